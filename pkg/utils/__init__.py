"""WIRES Utils Package"""

from .logger import WiresLogger, get_logger, logger
from .errors import WiresError, ConfigError, BracketError

__all__ = [
    'WiresLogger',
    'get_logger',
    'logger',
    'WiresError',
    'ConfigError',
    'BracketError'
]
