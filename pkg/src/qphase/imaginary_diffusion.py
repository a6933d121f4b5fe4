"""Gaussian spreading with real and imaginary diffusion constants, and the
fourth-order density equation obtained by differentiating diffusion in time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DensityProfile, PhysParams


def classical_gaussian_spread(sigma0, D, t):
    """Variance ``sigma0^2 + 2 D t`` of a diffusing Gaussian."""
    if not sigma0 > 0:
        raise ValueError("sigma0 must be positive")
    if D < 0 or np.any(np.asarray(t) < 0):
        raise ValueError("D and t must be non-negative")
    return sigma0**2 + 2 * D * np.asarray(t, dtype=float)


@dataclass(frozen=True)
class QuantumSpread:
    variance: float
    complex_variance: complex

    def modulus_profile(self, q):
        """``|exp(-q^2 / 2 sigma_c^2)|`` for the complex variance."""
        q = np.asarray(q, dtype=float)
        return np.abs(np.exp(-(q**2) / (2 * self.complex_variance)))

    def real_profile(self, q):
        q = np.asarray(q, dtype=float)
        return np.exp(-(q**2) / (2 * self.variance))


def complex_variance(sigma0, params: PhysParams, t) -> complex:
    """``sigma0^2 + 2 D t`` with ``D = i hbar / 4m``."""
    return sigma0**2 + 2j * params.hbar * t / (4 * params.require_mass())


def quantum_gaussian_spread(sigma0, params: PhysParams, t) -> QuantumSpread:
    """Real width obtained from the modulus of the imaginary-diffusion Gaussian.

    ``|exp(-q^2/2 s)| = exp(-q^2 Re(1/s) / 2)``, so the effective variance is
    ``1 / Re(1/s) = |s|^2 / sigma0^2 = sigma0^2 + (hbar t / 2 m sigma0)^2``.
    """
    if not sigma0 > 0:
        raise ValueError("sigma0 must be positive")
    s = complex_variance(sigma0, params, t)
    var = sigma0**2 + (params.hbar * t / (2 * params.require_mass() * sigma0)) ** 2
    return QuantumSpread(float(var), s)


def dispersion_relation(k, params: PhysParams):
    """``omega = hbar k^2 / 2m``."""
    return params.hbar * np.asarray(k, dtype=float) ** 2 / (2 * params.require_mass())


def biharmonic_evolve(rho0: DensityProfile, rho_dot0, params: PhysParams, t) -> DensityProfile:
    """Exact solution of ``∂_t^2 rho = -(hbar^2/4m^2) ∂_q^4 rho`` on a periodic grid.

    Both ``rho(0)`` and ``∂_t rho(0)`` are required because the equation is
    second order in time.  Every Fourier mode oscillates at ``omega(k)``; the
    ``k = 0`` mode grows linearly with the initial rate.
    """
    q = rho0.q
    n = len(q)
    k = 2 * np.pi * np.fft.fftfreq(n, d=rho0.dq)
    omega = dispersion_relation(k, params)
    a = np.fft.fft(rho0.rho)
    b = np.fft.fft(np.asarray(rho_dot0, dtype=float) * np.ones(n))
    wt = omega * t
    with np.errstate(divide="ignore", invalid="ignore"):
        sinc_term = np.where(omega == 0, t, np.sin(wt) / np.where(omega == 0, 1.0, omega))
    out = np.fft.ifft(a * np.cos(wt) + b * sinc_term)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("biharmonic evolution produced non-finite values")
    return DensityProfile(q, out.real, rho0.time + t)


def dispersion_table(ks, params: PhysParams):
    ks = np.asarray(ks, dtype=float)
    return np.column_stack([ks, dispersion_relation(ks, params)])
