"""Run Configuration Package"""

from .presets import PRESETS, preset_defaults
from .run_config import RunConfig, build_run_config, load_config_file
from .runtime import Runtime, configure_runtime, get_runtime

__all__ = [
    "PRESETS",
    "preset_defaults",
    "RunConfig",
    "build_run_config",
    "load_config_file",
    "Runtime",
    "configure_runtime",
    "get_runtime",
]
