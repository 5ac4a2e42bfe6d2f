"""Monte-Carlo rates of alpha-duplex (partial-overlap full-duplex) cellular networks."""

__version__ = "0.1.0"

from .errors import ConfigError, EstimationError, TopologyParseError  # noqa: E402

__all__ = ["ConfigError", "EstimationError", "TopologyParseError", "__version__"]
