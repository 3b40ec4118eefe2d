"""fruit_disease package."""
from .constants import __version__
