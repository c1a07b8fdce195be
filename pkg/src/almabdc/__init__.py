"""Sequential experimental design with a GP surrogate, bandit allocation and a simulated cluster.

Subpackages and modules:

- ``surrogate``: exact GP regression, believer conditioning, IPV
- ``acquisition``: UCB / EI / max-variance scores and diverse batches
- ``bandit``: UCB1 and Thompson sampling, regret ledgers, delayed feedback
- ``distsim``: virtual-clock scheduler and Amdahl / Gustafson scaling
- ``benchmarks``: the five benchmark problems, the mixture demo and baselines
- ``stats``: rank tests, Bonferroni, bootstrap, convergence-rate fits
- ``harness``: configs, replicate runner, output files and the CLI
"""

from .errors import AlmabError, ConfigError, InputError, NumericalError

__version__ = "0.1.0"

__all__ = ["AlmabError", "ConfigError", "InputError", "NumericalError", "__version__"]
