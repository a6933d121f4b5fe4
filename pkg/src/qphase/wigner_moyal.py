"""Pseudo-spectral Strang-split propagator for the Wigner-Moyal equation.

The free streaming part is diagonal in the (p, k) representation and the
potential part is diagonal in the (lambda, q) representation, where lambda is
the Fourier conjugate of p.  With ``F(lam, q) = ∫ W e^{-i lam p} dp`` the
potential term of the Moyal equation becomes

    d/dt F = (i/hbar) [U(q + hbar lam/2) - U(q - hbar lam/2)] F,

so one kick multiplies F by ``exp(i dt theta)`` with
``theta = [U(q + hbar lam/2) - U(q - hbar lam/2)] / hbar``.  Truncating the
odd Taylor series of that difference after ``n_max`` terms gives the
order-truncated kernels; keeping only the first term gives classical
Liouville dynamics.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import (
    P_AXIS,
    Q_AXIS,
    PhaseGrid,
    PhaseMoments,
    PhysParams,
    WignerField,
    negativity_volume,
    phase_moments,
)
from .potentials import PotentialSpec, odd_series

log = logging.getLogger(__name__)

MAX_TRUNCATION = 6
# Imaginary residue tolerated (and discarded) after a step, relative to max|W|.
IMAG_DISCARD = 1e-12
IMAG_FAIL = 1e-9


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class MoyalKernel:
    """Potential-kick generator ``theta(lam, q)`` tabulated on the grid.

    ``variant`` is ``"exact"``, ``"truncated"`` or ``"classical"``; ``order``
    is the highest retained ``n`` of the odd series (0 for classical).
    """

    variant: str
    order: int | None
    theta: np.ndarray = field(repr=False)
    potential: PotentialSpec
    grid: PhaseGrid
    params: PhysParams

    def multiplier(self, dt) -> np.ndarray:
        return np.exp(1j * dt * self.theta)


def build_kernel(U: PotentialSpec, grid: PhaseGrid, params: PhysParams, variant="exact",
                 order=None) -> MoyalKernel:
    """Tabulate the kick generator on the ``(lam, q)`` lattice.

    ``variant="truncated"`` keeps the terms ``n = 0..order`` of the Moyal
    series; ``truncated`` with ``order=0`` and ``classical`` are identical.
    Polynomial potentials use the terminating series for ``exact`` as well,
    so e.g. the harmonic exact table equals the classical one bit for bit.
    """
    hbar = params.hbar
    lam = grid.lam[:, None]
    q = grid.q[None, :]
    a = 0.5 * hbar * lam
    if variant == "exact":
        order = None
    elif variant == "classical":
        order = 0
    elif variant == "truncated":
        if order is None or not 0 <= order <= MAX_TRUNCATION:
            raise ValueError(f"truncation order must be in 0..{MAX_TRUNCATION}, got {order}")
    else:
        raise ValueError(f"unknown kernel variant {variant!r}")
    # overflow is detected below and reported as a SolverError
    with np.errstate(over="ignore", invalid="ignore"):
        diff = U.odd_difference(q, a) if order is None else 2.0 * odd_series(U, q, a, order)
        theta = np.array(diff / hbar, dtype=float)
    # The Nyquist row has no +lambda partner; a real multiplier there keeps W real.
    theta[grid.n_p // 2] = 0.0
    if not np.all(np.isfinite(theta)):
        raise SolverError("kernel overflow: the potential grows too fast for this grid's lambda span")
    theta.setflags(write=False)
    return MoyalKernel(variant, order, theta, U, grid, params)


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    steps: int
    kernel: str = "exact"
    order: int | None = None
    record_every: int = 1

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


def transport_bound_ok(grid: PhaseGrid, params: PhysParams, dt) -> bool:
    pmax = max(abs(grid.p_min), abs(grid.p_max))
    return abs(dt) * pmax / params.mass < grid.length_q / 4


def _free_multiplier(grid: PhaseGrid, params: PhysParams, dt):
    # W(p, q) -> W(p, q - p dt / m)  is  W_k -> W_k exp(-i k p dt / m)
    k = grid.k.copy()
    k[grid.n_q // 2] = 0.0
    return np.exp(-1j * k[None, :] * grid.p[:, None] * dt / params.mass)


def _realify(z, what):
    scale = np.abs(z.real).max() or 1.0
    resid = np.abs(z.imag).max() / scale
    if not np.isfinite(resid):
        raise SolverError(f"{what}: non-finite values")
    if resid > IMAG_FAIL:
        raise SolverError(f"{what}: imaginary residue {resid:.2e} exceeds {IMAG_FAIL:.0e}")
    if resid > IMAG_DISCARD:
        log.debug("%s: discarding imaginary residue %.2e", what, resid)
    return z.real


class WignerMoyalSolver:
    """Precomputes the transport and kick multipliers for a fixed ``dt``."""

    def __init__(self, kernel: MoyalKernel, dt):
        self.kernel = kernel
        self.grid = kernel.grid
        self.params = kernel.params
        self.dt = float(dt)
        if not transport_bound_ok(self.grid, self.params, self.dt):
            raise SolverError("dt * max|p| / m exceeds a quarter of the q-period")
        self._half_free = _free_multiplier(self.grid, self.params, 0.5 * self.dt)
        self._kick = kernel.multiplier(self.dt)

    def step_values(self, w):
        w = np.fft.ifft(np.fft.fft(w, axis=Q_AXIS) * self._half_free, axis=Q_AXIS)
        w = np.fft.ifft(np.fft.fft(w, axis=P_AXIS) * self._kick, axis=P_AXIS)
        w = np.fft.ifft(np.fft.fft(w, axis=Q_AXIS) * self._half_free, axis=Q_AXIS)
        return w

    def step(self, W: WignerField) -> WignerField:
        if self.dt == 0:
            return W
        out = _realify(self.step_values(W.values), "wigner_moyal.step")
        return WignerField(W.grid, out, W.time + self.dt)


def step(W: WignerField, kernel: MoyalKernel, params: PhysParams, dt) -> WignerField:
    if params != kernel.params:
        raise ValueError("kernel was built for different physical parameters")
    return WignerMoyalSolver(kernel, dt).step(W)


@dataclass
class Evolution:
    times: list
    snapshots: list
    moment_times: list
    moments: list
    negativity: list

    def moments_table(self):
        """Rows of ``t, mean_q, mean_p, var_q, var_p, cov_qp, norm, negativity``."""
        return [
            (t, m.mean_q, m.mean_p, m.var_q, m.var_p, m.cov_qp, m.norm, neg)
            for t, m, neg in zip(self.moment_times, self.moments, self.negativity)
        ]


MOMENT_COLUMNS = ("t", "mean_q", "mean_p", "var_q", "var_p", "cov_qp", "norm", "negativity")


def evolve(W0: WignerField, U: PotentialSpec, params: PhysParams, config: SolverConfig,
           kernel: MoyalKernel | None = None) -> Evolution:
    """Run ``config.steps`` Strang steps; moments every step, snapshots every ``record_every``."""
    if kernel is None:
        kernel = build_kernel(U, W0.grid, params, config.kernel, config.order)
    solver = WignerMoyalSolver(kernel, config.dt)
    W = W0
    ev = Evolution([W.time], [W], [W.time], [phase_moments(W)], [negativity_volume(W)])
    w = W0.values
    for i in range(1, config.steps + 1):
        w = _realify(solver.step_values(w), "wigner_moyal.evolve")
        t = W0.time + i * config.dt
        W = WignerField(W0.grid, w, t)
        ev.moment_times.append(t)
        ev.moments.append(phase_moments(W))
        ev.negativity.append(negativity_volume(W))
        if i % config.record_every == 0 or i == config.steps:
            ev.times.append(t)
            ev.snapshots.append(W)
    return ev


def evolve_to(W0: WignerField, U: PotentialSpec, params: PhysParams, dt, steps,
              variant="exact", order=None) -> WignerField:
    """Final field only; skips the per-step bookkeeping of :func:`evolve`."""
    kernel = build_kernel(U, W0.grid, params, variant, order)
    if steps == 0 or dt == 0:
        return W0
    solver = WignerMoyalSolver(kernel, dt)
    w = W0.values
    for _ in range(steps):
        w = _realify(solver.step_values(w), "wigner_moyal.evolve_to")
    return WignerField(W0.grid, w, W0.time + steps * dt)


@dataclass(frozen=True)
class FieldComparison:
    l2: float
    linf: float
    norm_diff: float


def compare_fields(Wa: WignerField, Wb: WignerField) -> FieldComparison:
    """Quadrature L2, sup norm, and norm difference of ``Wa - Wb``."""
    if Wa.grid != Wb.grid:
        raise ValueError("fields live on different grids")
    d = Wa.values - Wb.values
    return FieldComparison(
        l2=float(np.sqrt((d**2).sum() * Wa.grid.cell)),
        linf=float(np.abs(d).max()),
        norm_diff=Wa.norm - Wb.norm,
    )


def l2_norm(W: WignerField) -> float:
    return float(np.sqrt((W.values**2).sum() * W.grid.cell))


__all__ = [
    "MoyalKernel", "SolverConfig", "SolverError", "WignerMoyalSolver", "Evolution",
    "FieldComparison", "MOMENT_COLUMNS", "build_kernel", "step", "evolve", "evolve_to",
    "compare_fields", "l2_norm", "PhaseMoments",
]
