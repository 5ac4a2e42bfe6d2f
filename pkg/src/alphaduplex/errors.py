class ConfigError(ValueError):
    """Invalid parameter or configuration value."""


class TopologyParseError(ConfigError):
    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


class EstimationError(RuntimeError):
    """Raised when a Monte-Carlo run produced no usable trial."""
