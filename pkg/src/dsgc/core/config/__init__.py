from dsgc.core.config.settings import (
    EngineSettings,
    LogFormat,
    LogLevel,
    Precision,
    get_settings,
    reload_settings,
)

__all__ = [
    "EngineSettings",
    "LogFormat",
    "LogLevel",
    "Precision",
    "get_settings",
    "reload_settings",
]
