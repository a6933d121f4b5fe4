"""Reference Schrödinger propagator, Wigner transform and Madelung variables.

Nothing here depends on the Wigner-Moyal solver, so it serves as the
independent oracle for it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PhaseGrid, PhysParams, WignerField, spectral_derivative
from .potentials import PotentialSpec

EDGE_LEAK_TOL = 1e-8


class BoundaryLeakError(RuntimeError):
    pass


@dataclass(frozen=True)
class WaveField:
    q: np.ndarray
    psi: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        psi = np.array(self.psi, dtype=complex)
        if q.shape != psi.shape or q.ndim != 1:
            raise ValueError("q and psi must be 1-D arrays of equal length")
        if not np.all(np.isfinite(psi)):
            raise FloatingPointError("wave function contains non-finite values")
        for a in (q, psi):
            a.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "psi", psi)

    @property
    def dq(self) -> float:
        return float(self.q[1] - self.q[0])

    @property
    def k(self):
        return 2 * np.pi * np.fft.fftfreq(len(self.q), d=self.dq)

    @property
    def density(self):
        return np.abs(self.psi) ** 2

    @property
    def norm(self) -> float:
        return float(self.density.sum() * self.dq)

    def normalized(self) -> WaveField:
        return WaveField(self.q, self.psi / np.sqrt(self.norm), self.time)

    def derivative(self, order=1):
        return spectral_derivative(self.psi, self.k, order)


def gaussian_wave(q, q0, p0, sigma, params: PhysParams) -> WaveField:
    """Normalized packet with ``|psi|^2`` of variance ``sigma^2`` and mean momentum ``p0``."""
    q = np.asarray(q, dtype=float)
    psi = (2 * np.pi * sigma**2) ** -0.25 * np.exp(
        -((q - q0) ** 2) / (4 * sigma**2) + 1j * p0 * (q - q0) / params.hbar
    )
    return WaveField(q, psi)


def harmonic_eigenstate(q, n, k_spring, params: PhysParams, q0=0.0) -> WaveField:
    """Analytic eigenfunction ``n`` of ``U = k q^2 / 2`` (real, normalized)."""
    from math import factorial

    from scipy.special import eval_hermite

    m, hbar = params.require_mass(), params.hbar
    omega = np.sqrt(k_spring / m)
    x = np.sqrt(m * omega / hbar) * (np.asarray(q, dtype=float) - q0)
    pref = (m * omega / (np.pi * hbar)) ** 0.25 / np.sqrt(2.0**n * factorial(n))
    return WaveField(q, pref * eval_hermite(n, x) * np.exp(-(x**2) / 2))


def check_edges(psi: WaveField, tol=EDGE_LEAK_TOL):
    edge = max(abs(psi.psi[0]) ** 2, abs(psi.psi[-1]) ** 2)
    if edge > tol:
        raise BoundaryLeakError(f"|psi|^2 at the q-boundary is {edge:.2e} > {tol:.0e}")


def split_step_schrodinger(psi: WaveField, U: PotentialSpec, params: PhysParams, dt, steps,
                           check_boundary=True) -> WaveField:
    """Strang split ``exp(-iT dt/2) exp(-iU dt) exp(-iT dt/2)`` on a periodic grid."""
    if steps == 0 or dt == 0:
        return psi
    m, hbar = params.require_mass(), params.hbar
    k = psi.k
    half_kin = np.exp(-1j * hbar * k**2 * dt / (4 * m))
    kick = np.exp(-1j * np.asarray(U.value(psi.q), dtype=float) * dt / hbar)
    z = np.fft.fft(psi.psi)
    for _ in range(steps):
        z = z * half_kin
        z = np.fft.fft(np.fft.ifft(z) * kick)
        z = z * half_kin
    out = np.fft.ifft(z)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("split-step propagation produced non-finite values")
    res = WaveField(psi.q, out, psi.time + steps * dt)
    if check_boundary:
        check_edges(res)
    return res


def _shifted(psi: WaveField, shifts):
    """Band-limited values ``psi(q + s)`` for every shift ``s``; zero outside the window.

    Zeroing (rather than wrapping) stops the periodic image of the packet from
    producing ghost interference half a period away.
    """
    q = psi.q
    length = len(q) * psi.dq
    z = np.fft.fft(psi.psi)
    vals = np.fft.ifft(z[None, :] * np.exp(1j * psi.k[None, :] * shifts[:, None]), axis=1)
    pos = q[None, :] + shifts[:, None]
    inside = (pos >= q[0] - 1e-12 * length) & (pos < q[0] + length)
    return np.where(inside, vals, 0.0)


def wigner_transform(psi: WaveField, grid: PhaseGrid, params: PhysParams) -> WignerField:
    """``W(p, q) = (1/pi hbar) ∫ psi*(q + y) psi(q - y) e^{2ipy/hbar} dy``.

    Evaluated as ``F(lam, q) = psi*(q + hbar lam/2) psi(q - hbar lam/2)`` on
    the lambda lattice dual to the grid's p axis, followed by an inverse
    transform in lambda.  The wave function's q samples must be the grid's.
    """
    if len(psi.q) != grid.n_q or not np.allclose(psi.q, grid.q, rtol=0, atol=1e-12 * grid.length_q):
        raise ValueError("wave field q-samples do not match the phase grid")
    hbar = params.hbar
    lam = grid.lam
    y = 0.5 * hbar * lam
    F = np.conj(_shifted(psi, y)) * _shifted(psi, -y)
    F = F * np.exp(1j * grid.p_min * lam)[:, None]
    W = np.fft.ifft(F, axis=0) / grid.dp
    resid = np.abs(W.imag).max()
    if resid > 1e-9 * max(np.abs(W.real).max(), 1e-300):
        raise ValueError(f"Wigner transform not real (residue {resid:.2e}); check grid compatibility")
    return WignerField(grid, W.real, psi.time)


# -- Madelung / Bohm ---------------------------------------------------------


@dataclass(frozen=True)
class MadelungFields:
    q: np.ndarray
    rho: np.ndarray
    S: np.ndarray
    mask: np.ndarray
    dS: np.ndarray
    hbar: float
    time: float = 0.0

    def reconstruct(self):
        """``sqrt(rho) exp(iS/hbar)`` on the mask, zero elsewhere."""
        out = np.zeros_like(self.rho, dtype=complex)
        m = self.mask
        out[m] = np.sqrt(self.rho[m]) * np.exp(1j * self.S[m] / self.hbar)
        return out


def _unwrap_from(phase, mask, start):
    out = np.full_like(phase, np.nan)
    out[start] = phase[start]
    for direction in (1, -1):
        prev = start
        i = start + direction
        while 0 <= i < len(phase):
            if mask[i]:
                d = phase[i] - phase[prev]
                d -= 2 * np.pi * np.round(d / (2 * np.pi))
                out[i] = out[prev] + d
                prev = i
            i += direction
    return out


def madelung_decompose(psi: WaveField, rho_floor=None, params: PhysParams | None = None) -> MadelungFields:
    """``rho = |psi|^2``, ``S = hbar * unwrapped arg psi`` where ``rho >= rho_floor``.

    Unwrapping starts at the density maximum and walks outward; masked-out
    points (nodes, tails) are skipped.  ``dS`` is ``∂_q S`` from the spectral
    current ``hbar Im(psi* ∂_q psi) / rho``, which needs no unwrapping.
    """
    hbar = (params or PhysParams()).hbar
    rho = psi.density
    if rho_floor is None:
        rho_floor = 1e-8 * rho.max()
    if not rho_floor > 0:
        raise ValueError("rho_floor must be positive")
    mask = rho >= rho_floor
    if not mask.any():
        raise ValueError("density is below the floor everywhere")
    start = int(np.argmax(rho))
    S = hbar * _unwrap_from(np.angle(psi.psi), mask, start)
    dpsi = psi.derivative(1)
    dS = np.full_like(rho, np.nan)
    dS[mask] = hbar * np.imag(np.conj(psi.psi[mask]) * dpsi[mask]) / rho[mask]
    return MadelungFields(psi.q, rho, S, mask, dS, hbar, psi.time)


def bohm_potential(rho, q, params: PhysParams, mask=None):
    """``Q = -hbar^2 ∂_q^2 sqrt(rho) / (2 m sqrt(rho))`` on ``mask`` (NaN elsewhere)."""
    rho = np.asarray(rho, dtype=float)
    q = np.asarray(q, dtype=float)
    m = params.require_mass()
    if mask is None:
        mask = rho >= 1e-8 * rho.max()
    if not mask.any():
        raise ValueError("empty mask")
    amp = np.sqrt(np.clip(rho, 0, None))
    k = 2 * np.pi * np.fft.fftfreq(len(q), d=q[1] - q[0])
    d2 = spectral_derivative(amp, k, 2)
    Q = np.full_like(rho, np.nan)
    Q[mask] = -(params.hbar**2) * d2[mask] / (2 * m * amp[mask])
    return Q


@dataclass(frozen=True)
class MadelungResiduals:
    continuity_residual_l2: float
    hj_residual_l2: float


def madelung_time_derivatives(before: MadelungFields, after: MadelungFields, dt):
    """Central differences ``(X(t+dt) - X(t-dt)) / 2dt`` for rho and S.

    ``S`` is only defined up to multiples of ``2 pi hbar``; the later snapshot
    is shifted onto the branch of the earlier one at the shared anchor point.
    """
    mask = before.mask & after.mask
    if not mask.any():
        raise ValueError("snapshots share no reliable points")
    anchor = np.flatnonzero(mask)[np.argmax(before.rho[mask])]
    period = 2 * np.pi * before.hbar
    S_after = after.S - period * np.round((after.S[anchor] - before.S[anchor]) / period)
    drho = (after.rho - before.rho) / (2 * dt)
    dS = np.where(mask, (S_after - before.S) / (2 * dt), np.nan)
    return drho, dS, mask


def madelung_residuals(fields: MadelungFields, U: PotentialSpec | None, params: PhysParams,
                       drho_dt, dS_dt, mask=None) -> MadelungResiduals:
    """L2 norms over the mask of the continuity and quantum Hamilton-Jacobi residuals.

    continuity:  ∂_t rho + ∂_q (rho ∂_q S / m)
    HJ:          ∂_t S + (∂_q S)^2 / 2m + U + Q
    """
    m = params.require_mass()
    mask = fields.mask if mask is None else (mask & fields.mask)
    if not mask.any():
        raise ValueError("empty mask")
    q = fields.q
    dq = q[1] - q[0]
    k = 2 * np.pi * np.fft.fftfreq(len(q), d=dq)
    flux = np.where(fields.mask, fields.rho * fields.dS / m, 0.0)
    cont = np.asarray(drho_dt) + spectral_derivative(flux, k, 1)
    Q = bohm_potential(fields.rho, q, params, fields.mask)
    V = 0.0 if U is None else np.asarray(U.value(q), dtype=float)
    hj = np.asarray(dS_dt) + fields.dS**2 / (2 * m) + V + Q
    return MadelungResiduals(
        continuity_residual_l2=float(np.sqrt((cont[mask] ** 2).sum() * dq)),
        hj_residual_l2=float(np.sqrt((hj[mask] ** 2).sum() * dq)),
    )


@dataclass(frozen=True)
class FluxDecomposition:
    convective: np.ndarray
    fick: np.ndarray
    mask: np.ndarray


def flux_decomposition(psi: WaveField, params: PhysParams, rho_floor=None) -> FluxDecomposition:
    """Split ``conj(psi) p psi / m`` into the Bohm flow (real) and Fick flux (imaginary)."""
    m = params.require_mass()
    fields = madelung_decompose(psi, rho_floor, params)
    convective = np.where(fields.mask, fields.rho * np.nan_to_num(fields.dS) / m, 0.0)
    drho = spectral_derivative(fields.rho, psi.k, 1)
    fick = -params.hbar * drho / (2 * m)
    return FluxDecomposition(convective, fick, fields.mask)


def momentum_current(psi: WaveField, params: PhysParams):
    """``conj(psi) (-i hbar ∂_q) psi / m`` evaluated directly."""
    return np.conj(psi.psi) * (-1j * params.hbar) * psi.derivative(1) / params.require_mass()
