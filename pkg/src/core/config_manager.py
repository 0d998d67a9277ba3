"""
Configuration Management System

Centralized configuration for the dynamic octree library and its command
line tool. Settings come from dataclass defaults, an optional YAML or JSON
file and DYNOCT_* environment variables, in increasing precedence.
"""

import os
import yaml
import json
import logging
from pathlib import Path
from typing import Dict, Any, Optional, Union, List
from dataclasses import dataclass, field, asdict, fields, is_dataclass

from .error_handler import ConfigurationError, InputError
from .validation_utils import get_validator

logger = logging.getLogger(__name__)

ENV_PREFIX = "DYNOCT_"


@dataclass
class OctreeSettings:
    """(K, alpha) balance parameters and growth policy"""
    K: int = 10
    alpha: float = 2.0
    max_depth: int = 32
    expansion_factor: float = 2.0


@dataclass
class SvgdSettings:
    """Particle inference defaults"""
    n: int = 100
    iterations: int = 100
    step_size: float = 0.05
    bandwidth: str = "median"  # "median" or a positive number
    target: str = "mixture2"
    mode: str = "octree"
    compat_norm: bool = False
    rebuild_every: int = 0  # 0 keeps the octree incrementally
    record_every: int = 1


@dataclass
class KnnSettings:
    """Incremental classifier defaults"""
    k: int = 5
    batch_size: int = 500


@dataclass
class IndexSettings:
    """Hybrid vector index defaults"""
    num_clusters: int = 8
    probe_clusters: int = 3
    candidate_multiplier: int = 10
    top_k: int = 10
    kmeans_max_iter: int = 100
    power_iterations: int = 30


@dataclass
class MetricsSettings:
    """Structure metric defaults"""
    k: int = 10


@dataclass
class BenchSettings:
    """Benchmark harness defaults"""
    distribution: str = "varying"
    scale: float = 0.1
    cutoff: float = 2.0
    K: List[int] = field(default_factory=lambda: [10, 1000])
    alpha: float = 2.0
    steps: int = 10
    wave_points: int = 10000
    wave_frequency: float = 3.0


@dataclass
class LoggingConfig:
    """Logging system configuration"""
    level: str = "WARNING"
    format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    file_enabled: bool = False
    file_path: str = "logs/dynoct.log"
    file_max_size_mb: int = 10
    file_backup_count: int = 5
    console_enabled: bool = True
    structured_logging: bool = False


@dataclass
class AppConfig:
    """Main application configuration container"""
    environment: str = "development"
    seed: int = 0

    octree: OctreeSettings = field(default_factory=OctreeSettings)
    svgd: SvgdSettings = field(default_factory=SvgdSettings)
    knn: KnnSettings = field(default_factory=KnnSettings)
    index: IndexSettings = field(default_factory=IndexSettings)
    metrics: MetricsSettings = field(default_factory=MetricsSettings)
    bench: BenchSettings = field(default_factory=BenchSettings)
    logging: LoggingConfig = field(default_factory=LoggingConfig)

    custom_settings: Dict[str, Any] = field(default_factory=dict)


_SECTION_NAMES = ['octree', 'svgd', 'knn', 'index', 'metrics', 'bench', 'logging']

_SCHEMAS = {
    'octree': {
        'K': ['required', 'integer', 'at_least_one'],
        'alpha': ['required', 'finite', 'at_least_one'],
        'max_depth': ['required', 'integer', 'at_least_one'],
        'expansion_factor': ['required', 'finite', 'greater_than_one'],
    },
    'svgd': {
        'n': ['integer', 'at_least_one'],
        'iterations': ['integer', 'non_negative'],
        'step_size': ['finite', 'positive'],
        'rebuild_every': ['integer', 'non_negative'],
        'record_every': ['integer', 'at_least_one'],
    },
    'knn': {
        'k': ['integer', 'at_least_one'],
        'batch_size': ['integer', 'at_least_one'],
    },
    'index': {
        'num_clusters': ['integer', 'at_least_one'],
        'probe_clusters': ['integer', 'at_least_one'],
        'candidate_multiplier': ['integer', 'at_least_one'],
        'top_k': ['integer', 'at_least_one'],
        'kmeans_max_iter': ['integer', 'at_least_one'],
        'power_iterations': ['integer', 'at_least_one'],
    },
    'metrics': {
        'k': ['integer', 'at_least_one'],
    },
    'bench': {
        'scale': ['finite', 'positive'],
        'cutoff': ['finite', 'positive'],
        'alpha': ['finite', 'at_least_one'],
        'steps': ['integer', 'at_least_one'],
        'wave_points': ['integer', 'at_least_one'],
        'wave_frequency': ['finite', 'positive'],
    },
}


def load_mapping(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Load a YAML or JSON mapping from disk.

    Raises:
        InputError: the file is missing, unreadable or not a mapping
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"Configuration file not found: {path}", field_name='path', field_value=path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            if path.suffix.lower() == '.json':
                data = json.load(f)
            else:
                data = yaml.safe_load(f) or {}
    except (OSError, json.JSONDecodeError, yaml.YAMLError) as e:
        raise InputError(f"Cannot parse configuration file {path}: {e}", field_name='path',
                         field_value=path)
    if not isinstance(data, dict):
        raise InputError(f"Configuration file {path} must contain a mapping", field_name='path',
                         field_value=path)
    return data


class ConfigManager:
    """
    Configuration manager.

    Handles loading, validation, and management of application configuration
    from files, environment variables, and defaults.
    """

    def __init__(self, config_file: Optional[Union[str, Path]] = None):
        """
        Initialize configuration manager.

        Args:
            config_file: Path to configuration file (optional)
        """
        self.config_file = Path(config_file) if config_file else None
        self._config: Optional[AppConfig] = None
        self._config_loaded = False

    def load_config(self, config_file: Optional[Union[str, Path]] = None) -> AppConfig:
        """
        Load configuration from file and environment variables.

        Args:
            config_file: Optional config file path (overrides init setting)

        Returns:
            Loaded AppConfig instance
        """
        if config_file:
            self.config_file = Path(config_file)

        config_dict = asdict(AppConfig())

        if self.config_file:
            file_config = load_mapping(self.config_file)
            config_dict = self._merge_configs(config_dict, file_config)
            logger.info(f"Loaded configuration from file: {self.config_file}")

        env_config = self._load_environment_config()
        config_dict = self._merge_configs(config_dict, env_config)

        self._config = self._dict_to_config(config_dict)
        self._validate_config(self._config)

        self._config_loaded = True
        logger.debug("Configuration loaded and validated")

        return self._config

    def get_config(self) -> AppConfig:
        """
        Get current configuration.

        Returns:
            Current AppConfig instance

        Raises:
            RuntimeError: If configuration hasn't been loaded
        """
        if not self._config_loaded or self._config is None:
            raise RuntimeError("Configuration not loaded. Call load_config() first.")

        return self._config

    def save_config(self, config_file: Optional[Union[str, Path]] = None) -> bool:
        """
        Save current configuration to file.

        Args:
            config_file: Output file path (optional)

        Returns:
            True if successful, False otherwise
        """
        if not self._config:
            logger.error("No configuration to save")
            return False

        output_file = Path(config_file) if config_file else self.config_file
        if not output_file:
            logger.error("No output file specified")
            return False

        try:
            output_file.parent.mkdir(parents=True, exist_ok=True)
            config_dict = asdict(self._config)
            with open(output_file, 'w', encoding='utf-8') as f:
                if output_file.suffix.lower() == '.json':
                    json.dump(config_dict, f, indent=2, default=str)
                else:
                    yaml.dump(config_dict, f, default_flow_style=False, sort_keys=False)
        except OSError as e:
            logger.error(f"Error saving configuration: {str(e)}")
            return False

        logger.info(f"Configuration saved to: {output_file}")
        return True

    def update_config(self, updates: Dict[str, Any]) -> AppConfig:
        """
        Update configuration with new values.

        Args:
            updates: Nested dictionary of configuration updates

        Returns:
            The updated AppConfig

        Raises:
            ConfigurationError: the updated configuration is invalid
        """
        base = asdict(self._config) if self._config else asdict(AppConfig())
        merged = self._merge_configs(base, updates)
        candidate = self._dict_to_config(merged)
        self._validate_config(candidate)
        self._config = candidate
        self._config_loaded = True
        return self._config

    def _load_environment_config(self) -> Dict[str, Any]:
        """Load configuration from DYNOCT_* environment variables"""
        env_config: Dict[str, Any] = {}
        top_level = {f.name for f in fields(AppConfig)}

        for key, value in os.environ.items():
            if not key.startswith(ENV_PREFIX):
                continue
            name = key[len(ENV_PREFIX):].lower()

            if name in top_level and name not in _SECTION_NAMES:
                env_config[name] = self._convert_env_value(value)
                continue

            section, _, setting = name.partition('_')
            if section in _SECTION_NAMES and setting:
                # field names such as "K" are matched case-insensitively
                section_fields = {f.name.lower(): f.name for f in fields(type(getattr(AppConfig(), section)))}
                if setting in section_fields:
                    env_config.setdefault(section, {})[section_fields[setting]] = \
                        self._convert_env_value(value)
                    continue

            logger.debug(f"Ignoring unrecognized environment variable {key}")

        return env_config

    def _convert_env_value(self, value: str) -> Any:
        """Convert environment variable string to appropriate type"""
        if value.lower() in ('true', 'false'):
            return value.lower() == 'true'

        try:
            return int(value)
        except ValueError:
            pass

        try:
            return float(value)
        except ValueError:
            pass

        if ',' in value:
            return [self._convert_env_value(item.strip()) for item in value.split(',')]

        return value

    def _merge_configs(self, base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
        """Recursively merge configuration dictionaries"""
        result = base.copy()

        for key, value in override.items():
            if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                result[key] = self._merge_configs(result[key], value)
            else:
                result[key] = value

        return result

    def _dict_to_config(self, config_dict: Dict[str, Any]) -> AppConfig:
        """Convert dictionary to AppConfig instance"""
        def create_dataclass(cls, data):
            if not isinstance(data, dict):
                raise ConfigurationError(f"Section for {cls.__name__} must be a mapping",
                                         config_key=cls.__name__, config_value=data)

            field_types = {f.name: f.type for f in fields(cls)}
            unknown = set(data) - set(field_types)
            if unknown:
                raise ConfigurationError(f"Unknown configuration keys: {sorted(unknown)}",
                                         config_key=cls.__name__)
            kwargs = {}

            for name, field_type in field_types.items():
                if name in data:
                    value = data[name]
                    if is_dataclass(field_type):
                        kwargs[name] = create_dataclass(field_type, value)
                    else:
                        kwargs[name] = value

            return cls(**kwargs)

        config = create_dataclass(AppConfig, config_dict)
        if not isinstance(config.bench.K, list):
            config.bench.K = [config.bench.K]
        return config

    def _validate_config(self, config: AppConfig):
        """Validate configuration values"""
        validator = get_validator()
        errors: List[str] = []

        for section, schema in _SCHEMAS.items():
            result = validator.validate_dict(asdict(getattr(config, section)), schema)
            errors.extend(f"{section}.{error}" for error in result.errors)

        if not isinstance(config.seed, int) or isinstance(config.seed, bool) or config.seed < 0:
            errors.append("seed: Value must be a non-negative integer")

        ks = config.bench.K if isinstance(config.bench.K, list) else [config.bench.K]
        if not ks or any(not isinstance(k, int) or k < 1 for k in ks):
            errors.append("bench.K: Values must be integers >= 1")

        valid_levels = ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']
        if str(config.logging.level).upper() not in valid_levels:
            errors.append(f"logging.level: Invalid logging level {config.logging.level}")

        if errors:
            raise ConfigurationError("Invalid configuration: " + "; ".join(errors),
                                     details={'errors': errors})


# Global configuration instance
_config_manager: Optional[ConfigManager] = None


def get_config_manager() -> ConfigManager:
    """Get global configuration manager instance"""
    global _config_manager
    if _config_manager is None:
        _config_manager = ConfigManager()
    return _config_manager


def load_config(config_file: Optional[Union[str, Path]] = None) -> AppConfig:
    """Load application configuration"""
    return get_config_manager().load_config(config_file)


def get_config() -> AppConfig:
    """Get current application configuration"""
    return get_config_manager().get_config()
