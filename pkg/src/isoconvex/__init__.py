"""Convexity diagnostics for planar isotropic energies with a volumetric-isochoric split."""

__version__ = "0.1.0"
