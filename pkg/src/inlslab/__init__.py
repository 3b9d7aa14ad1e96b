"""Spectral simulation and verification laboratory for the L2-critical
inhomogeneous nonlinear Schrodinger equation i u_t + Lap u + |x|^{-b}|u|^{(4-2b)/N} u = 0."""

from .core import ProblemParams, Grid, Field, InitialData, realize
from .spectral import SpectralPlan
from .cutoff import CutoffProfile, build_cutoff, default_k
from .solver import SolverConfig, RunReport, run

__all__ = [
    "ProblemParams",
    "Grid",
    "Field",
    "InitialData",
    "realize",
    "SpectralPlan",
    "CutoffProfile",
    "build_cutoff",
    "default_k",
    "SolverConfig",
    "RunReport",
    "run",
]
