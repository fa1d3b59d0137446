"""Simulation-gap quantification and gap-aware symbolic controller synthesis."""

from ._core import (
    Config,
    ConfigError,
    Cover,
    DomainError,
    Error,
    GapModel,
    InputGrid,
    NominalModel,
    OracleError,
    Pipeline,
    ResourceError,
    SolverError,
    StateBox,
    SurrogateOracle,
    __version__,
    load_config,
    lp_oracle,
    make_cover,
    parse_config,
    solve_lp,
    stages,
)

__all__ = [
    "Config",
    "ConfigError",
    "Cover",
    "DomainError",
    "Error",
    "GapModel",
    "InputGrid",
    "NominalModel",
    "OracleError",
    "Pipeline",
    "ResourceError",
    "SolverError",
    "StateBox",
    "SurrogateOracle",
    "__version__",
    "load_config",
    "lp_oracle",
    "make_cover",
    "parse_config",
    "solve_lp",
    "stages",
]
