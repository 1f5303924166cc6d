# Configuration package
from .config_loader import load_config
from .settings import Settings, get_settings

__all__ = ["load_config", "Settings", "get_settings"]
