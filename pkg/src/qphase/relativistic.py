"""Relativistic mass, slow-particle expansions and the free relativistic Wigner propagator."""

from __future__ import annotations

import numpy as np

from .core import Q_AXIS, PhysParams, WignerField

# Slow-particle formulas are accepted only while both p^2/m^2c^2 and
# (hbar k)^2/4m^2c^2 stay below this.
VALIDITY_GATE = 0.3
# Relative magnitude below which a p-row or k-mode counts as unoccupied.
SUPPORT_THRESHOLD = 1e-10


class ValidityGateError(ValueError):
    pass


def relativistic_mass(p, params: PhysParams):
    """Einstein mass ``sqrt(m^2 + p^2/c^2)``."""
    p = np.asarray(p, dtype=float)
    return np.sqrt(params.mass**2 + p**2 / params.c**2)


def hamiltonian_expansion(p, params: PhysParams, order: int):
    """``mc^2 + p^2/2m - p^4/8m^3c^2`` truncated after the ``p^order`` term."""
    if order not in (0, 2, 4):
        raise ValueError("order must be 0, 2 or 4")
    m, c = params.require_mass(), params.c
    p = np.asarray(p, dtype=float)
    out = m * c**2 + 0 * p
    if order >= 2:
        out = out + p**2 / (2 * m)
    if order >= 4:
        out = out - p**4 / (8 * m**3 * c**2)
    return out


def effective_mass(p, k, params: PhysParams):
    """``sqrt(m^2 + p^2/c^2 + hbar^2 k^2 / 4c^2)``; equals the Einstein mass at k = 0."""
    p = np.asarray(p, dtype=float)
    k = np.asarray(k, dtype=float)
    c = params.c
    return np.sqrt(params.mass**2 + p**2 / c**2 + params.hbar**2 * k**2 / (4 * c**2))


def gate_values(p, k, params: PhysParams):
    m, c = params.require_mass(), params.c
    p = np.asarray(p, dtype=float)
    k = np.asarray(k, dtype=float)
    return p**2 / (m * c) ** 2, (params.hbar * k) ** 2 / (4 * (m * c) ** 2)


def check_gate(p, k, params: PhysParams):
    xp, xk = gate_values(p, k, params)
    worst_p = float(np.max(xp)) if np.size(xp) else 0.0
    worst_k = float(np.max(xk)) if np.size(xk) else 0.0
    if worst_p > VALIDITY_GATE or worst_k > VALIDITY_GATE:
        raise ValidityGateError(
            f"slow-particle expansion invalid: p^2/m^2c^2={worst_p:.3g}, "
            f"(hbar k)^2/4m^2c^2={worst_k:.3g} (limit {VALIDITY_GATE})"
        )


def effective_mass_series(p, k, params: PhysParams):
    """First-order form ``m (1 + p^2/2m^2c^2 + hbar^2 k^2/8m^2c^2)``."""
    check_gate(p, k, params)
    xp, xk = gate_values(p, k, params)
    return params.mass * (1 + 0.5 * xp + 0.5 * xk)


def propagator_mass(p, k, params: PhysParams):
    """Mass in the free-streaming rate ``k p / M``: ``m / (1 - p^2/2m^2c^2 - hbar^2 k^2/8m^2c^2)``.

    This is the mass the one-shot propagator actually transports with; it
    agrees with :func:`effective_mass` to first order in the gate variables.
    """
    xp, xk = gate_values(p, k, params)
    return params.mass / (1 - 0.5 * xp - 0.5 * xk)


def nonrel_energy(p, k, params: PhysParams):
    """``p^2/2m + hbar^2 k^2 / 8m``."""
    m = params.require_mass()
    p = np.asarray(p, dtype=float)
    k = np.asarray(k, dtype=float)
    return p**2 / (2 * m) + params.hbar**2 * k**2 / (8 * m)


def occupied_support(W: WignerField, threshold=SUPPORT_THRESHOLD):
    """Momenta and wavenumbers where ``W`` (resp. its q-transform) is non-negligible."""
    g = W.grid
    v = np.abs(W.values)
    rows = v.max(axis=1) > threshold * v.max()
    spec = np.abs(np.fft.fft(W.values, axis=Q_AXIS))
    cols = spec.max(axis=0) > threshold * spec.max()
    return g.p[rows], g.k[cols]


def evolve_relativistic_free(W0: WignerField, params: PhysParams, t, check=True) -> WignerField:
    """Exact free evolution with the first relativistic correction, in one shot.

    Each ``(p, k)`` component is multiplied by
    ``exp(-i k p t (1 - p^2/2m^2c^2 - hbar^2 k^2/8m^2c^2) / m)`` (numpy's
    ``e^{-ikq}`` forward convention), so a mode travels at ``p / M`` with
    ``M`` from :func:`propagator_mass`.
    """
    if t == 0:
        return W0
    g = W0.grid
    m = params.require_mass()
    if check:
        ps, ks = occupied_support(W0)
        check_gate(ps, 0.0, params)
        check_gate(0.0, ks, params)
    k = g.k.copy()
    k[g.n_q // 2] = 0.0
    P = g.p[:, None]
    K = k[None, :]
    xp, xk = gate_values(P, K, params)
    phase = np.exp(-1j * K * P * t * (1 - 0.5 * xp - 0.5 * xk) / m)
    out = np.fft.ifft(np.fft.fft(W0.values, axis=Q_AXIS) * phase, axis=Q_AXIS)
    resid = np.abs(out.imag).max()
    if resid > 1e-9 * max(np.abs(out.real).max(), 1e-300):
        raise FloatingPointError(f"relativistic propagator left imaginary residue {resid:.2e}")
    return WignerField(g, out.real, W0.time + t)
