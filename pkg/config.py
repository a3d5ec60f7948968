"""
Configuration settings for tobitsel.
Centralizes optimizer, bootstrap, simulation and output parameters.
"""
import json
import os
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Optional, Tuple

from errors import ConfigError

__version__ = "0.1.0"


@dataclass
class OptimizerConfig:
    """Newton optimizer settings for the Tobit MLE."""
    tol: float = 1e-8  # sup-norm of the (beta, sigma) gradient
    max_iter: int = 200
    sigma_floor: float = 1e-3  # floor for the starting sigma
    max_step_halvings: int = 60


@dataclass
class BootstrapConfig:
    """Bootstrap settings shared by the EIC, BCV and BQCV families."""
    mechanism: str = "nonparametric"
    replicates: int = 200
    max_redraws: int = 100
    base_seed: int = 20190601
    bias_constant_mode: str = "normalized"  # or "literal"


@dataclass
class SimulationDefaults:
    """Monte Carlo design defaults."""
    p: int = 8
    rho: float = 0.3
    sigma2: float = 1.0
    runs: int = 500
    replicates: int = 200
    n_grid: Tuple[int, ...] = (100, 120, 150, 200)
    seed: int = 20190601
    workers: int = 1


@dataclass
class CacheConfig:
    """Fit and replicate-refit cache limits (per candidate scorer)."""
    max_cache_size: int = 4096
    cleanup_batch_size: int = 256


@dataclass
class OutputConfig:
    """Report and table formatting."""
    significant_digits: int = 6
    output_dir: str = "results"


@dataclass
class LoggingSettings:
    """Logging setup passed to logging_config.setup_logging."""
    level: str = "INFO"
    log_to_file: bool = False
    log_file_path: str = "logs/tobitsel.log"


@dataclass
class AppConfig:
    """Main application configuration."""
    optimizer: OptimizerConfig = None
    bootstrap: BootstrapConfig = None
    simulation: SimulationDefaults = None
    cache: CacheConfig = None
    output: OutputConfig = None
    logging: LoggingSettings = None

    def __post_init__(self):
        if self.optimizer is None:
            self.optimizer = OptimizerConfig()
        if self.bootstrap is None:
            self.bootstrap = BootstrapConfig()
        if self.simulation is None:
            self.simulation = SimulationDefaults()
        if self.cache is None:
            self.cache = CacheConfig()
        if self.output is None:
            self.output = OutputConfig()
        if self.logging is None:
            self.logging = LoggingSettings()

    def to_dict(self) -> Dict[str, Any]:
        """Serialize the effective configuration (tuples become lists)."""
        return json.loads(json.dumps(asdict(self)))

    def update_from_dict(self, values: Dict[str, Any]) -> None:
        """Apply a nested {section: {key: value}} mapping; unknown keys raise ConfigError."""
        for section_name, section_values in values.items():
            section = getattr(self, section_name, None)
            if section is None or not hasattr(section, "__dataclass_fields__"):
                raise ConfigError(f"Unknown configuration section: {section_name}")
            if not isinstance(section_values, dict):
                raise ConfigError(f"Section {section_name} must be a mapping")
            known = {f.name: f for f in fields(section)}
            for key, value in section_values.items():
                if key not in known:
                    raise ConfigError(f"Unknown configuration key: {section_name}.{key}")
                current = getattr(section, key)
                if isinstance(current, tuple):
                    value = tuple(value)
                setattr(section, key, value)


# Global configuration instance
CONFIG = AppConfig()


def get_config() -> AppConfig:
    """Get the global configuration instance."""
    return CONFIG


def load_config_file(path: str, config: Optional[AppConfig] = None) -> AppConfig:
    """Apply a JSON key-value configuration file on top of the given (or global) config."""
    config = config or get_config()
    if not os.path.exists(path):
        raise ConfigError(f"Configuration file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as handle:
            values = json.load(handle)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid configuration file {path}: {e}") from e
    if not isinstance(values, dict):
        raise ConfigError(f"Configuration file {path} must hold a JSON object")
    config.update_from_dict(values)
    return config


def update_config_from_env(config: Optional[AppConfig] = None) -> AppConfig:
    """Update configuration from environment variables."""
    config = config or get_config()

    # Optimizer settings
    if os.getenv('TOBITSEL_TOL'):
        config.optimizer.tol = float(os.getenv('TOBITSEL_TOL'))

    if os.getenv('TOBITSEL_MAX_ITER'):
        config.optimizer.max_iter = int(os.getenv('TOBITSEL_MAX_ITER'))

    # Bootstrap and simulation settings
    if os.getenv('TOBITSEL_REPLICATES'):
        config.bootstrap.replicates = int(os.getenv('TOBITSEL_REPLICATES'))

    if os.getenv('TOBITSEL_WORKERS'):
        config.simulation.workers = int(os.getenv('TOBITSEL_WORKERS'))

    # Output and logging
    if os.getenv('TOBITSEL_OUTPUT_DIR'):
        config.output.output_dir = os.getenv('TOBITSEL_OUTPUT_DIR')

    if os.getenv('TOBITSEL_LOG_LEVEL'):
        config.logging.level = os.getenv('TOBITSEL_LOG_LEVEL')

    return config


# Apply environment overrides
update_config_from_env()
