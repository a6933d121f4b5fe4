"""Quantum phase-space simulation: Wigner-Moyal dynamics and its stochastic,
relativistic and hydrodynamic companions, each checked against an independent
reference."""

from .core import (
    DensityProfile,
    PhaseGrid,
    PhysParams,
    WignerField,
    build_grid,
    gaussian_wigner,
    momentum_moment_identity,
    negativity_volume,
    phase_moments,
    position_marginal,
)
from .potentials import HamiltonianSpec, PotentialSpec

__version__ = "0.1.0"
