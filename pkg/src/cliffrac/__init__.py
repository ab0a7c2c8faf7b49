"""Clifford-analysis toolkit for jump problems on fractal hypersurfaces."""

from cliffrac.algebra import Multivector, Paravector, paravector

__all__ = ["Multivector", "Paravector", "paravector"]

__version__ = "0.1.0"
