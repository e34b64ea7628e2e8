"""Quantum fibrations over finite topological spaces at desk scale."""
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
