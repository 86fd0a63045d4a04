"""Exact chain-level laboratory for dg-enhanced six-functor computations on finite spaces."""
from . import exactla

__version__ = "0.1.0"
__all__ = ["exactla", "__version__"]
