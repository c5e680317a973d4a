"""Encode image folders and prompt strings into LEMB/LLAB embedding worlds."""

from .extract import ExtractSpec, extract

__version__ = "0.1.0"

__all__ = ["ExtractSpec", "extract", "__version__"]
