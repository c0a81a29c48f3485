"""Spatial birth-death process laboratory.

Thin re-export of the compiled module: particle ensembles, the nonlocal
kinetic equation, correlation-chain evolution and boundedness certificates,
plus the text-config experiment runner used by the command line tool.
"""

from ._sbdlab import (
    ConfigError,
    HomogeneousSolution,
    Kernel,
    Model,
    OUTPUT_ROOT_ENV,
    TorusDomain,
    __version__,
    certify_dominated_bound,
    certify_excess_mass_bound,
    certify_global_support_bound,
    content_hash,
    epsilon_sweep,
    evolve_chain,
    homogeneous_exact,
    integrate,
    picard_solve,
    run_config,
    run_config_file,
    run_ensemble,
    time_horizon,
    validate_config,
)

__all__ = [
    "ConfigError",
    "HomogeneousSolution",
    "Kernel",
    "Model",
    "OUTPUT_ROOT_ENV",
    "TorusDomain",
    "__version__",
    "certify_dominated_bound",
    "certify_excess_mass_bound",
    "certify_global_support_bound",
    "content_hash",
    "epsilon_sweep",
    "evolve_chain",
    "homogeneous_exact",
    "integrate",
    "picard_solve",
    "run_config",
    "run_config_file",
    "run_ensemble",
    "time_horizon",
    "validate_config",
]
