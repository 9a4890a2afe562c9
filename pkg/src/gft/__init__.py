"""Generalized Fourier transforms on discretized Riemannian manifolds."""

from .errors import GFTError
from .manifold import ManifoldSpec, catalog, load_manifest

__all__ = ["GFTError", "ManifoldSpec", "catalog", "load_manifest"]
