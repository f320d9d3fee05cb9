"""Creep-rupture life prediction with uncertainty quantification."""

__version__ = "0.1.0"
