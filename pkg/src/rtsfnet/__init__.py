"""rTsfNet: multi-head 3D rotation + time-series features for IMU activity recognition."""

from .config import ModelConfig, load_config, validate_config
from .model import RTsfNet, build_model

__version__ = "0.1.0"

__all__ = ["ModelConfig", "RTsfNet", "build_model", "load_config", "validate_config"]
