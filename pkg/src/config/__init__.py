from .config import RunConfig, ConfigError, COMMANDS, parse_config, resolve_path
