"""Exact formal deformation quantization on Kähler charts."""

from .errors import DeformaError

__version__ = "0.1.0"

__all__ = ["DeformaError", "__version__"]
