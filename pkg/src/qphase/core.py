"""Phase-space grids, Wigner fields and the observables extracted from them.

Both axes are periodic.  Fields are stored as ``values[i_p, i_q]`` (rows are
momenta, columns are positions) and integrals are plain Riemann sums on the
uniform lattice, which coincide with the trapezoidal rule for periodic data.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace

import numpy as np

# Forward transforms use numpy's e^{-i k x} convention on both axes:
#   W_k(p)   = sum_q W(p, q) e^{-i k q} dq        (q -> k, axis 1)
#   F(lam, q) = sum_p W(p, q) e^{-i lam p} dp     (p -> lam, axis 0)
# Every multiplier in the solvers is written against these two definitions.
Q_AXIS = 1
P_AXIS = 0

# Absolute size allowed for |W| on the boundary rows/columns before integrals
# that rely on decay are refused.
EDGE_DECAY_TOL = 1e-10


class GridError(ValueError):
    pass


class DecayError(ValueError):
    """A field does not vanish at the grid edge where an integral needs it to."""


@dataclass(frozen=True)
class PhysParams:
    hbar: float = 1.0
    mass: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if not self.hbar > 0:
            raise ValueError(f"hbar must be positive, got {self.hbar}")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if not self.mass >= 0:
            raise ValueError(f"mass must be non-negative, got {self.mass}")

    def require_mass(self) -> float:
        if self.mass <= 0:
            raise ValueError("this operation needs a massive particle (mass > 0)")
        return self.mass


NATURAL = PhysParams(hbar=1.0, mass=1.0, c=1.0)


def _is_pow2(n) -> bool:
    return isinstance(n, (int, np.integer)) and n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform periodic lattice ``q_j = q_min + j dq``, ``p_i = p_min + i dp``.

    ``q_max`` and ``p_max`` are excluded (they are the periodic images of
    ``q_min`` and ``p_min``).
    """

    q_min: float
    q_max: float
    n_q: int
    p_min: float
    p_max: float
    n_p: int

    def __post_init__(self):
        problems = []
        for name in ("n_q", "n_p"):
            n = getattr(self, name)
            if not _is_pow2(n) or n < 8:
                problems.append(f"{name}={n} must be a power of two >= 8")
        if not self.q_max > self.q_min:
            problems.append(f"q bounds inverted: [{self.q_min}, {self.q_max}]")
        if not self.p_max > self.p_min:
            problems.append(f"p bounds inverted: [{self.p_min}, {self.p_max}]")
        if problems:
            raise GridError("; ".join(problems))

    @property
    def dq(self) -> float:
        return (self.q_max - self.q_min) / self.n_q

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / self.n_p

    @property
    def length_q(self) -> float:
        return self.q_max - self.q_min

    @property
    def length_p(self) -> float:
        return self.p_max - self.p_min

    @property
    def q(self) -> np.ndarray:
        return self.q_min + self.dq * np.arange(self.n_q)

    @property
    def p(self) -> np.ndarray:
        return self.p_min + self.dp * np.arange(self.n_p)

    @property
    def k(self) -> np.ndarray:
        """Wavenumbers conjugate to q, in FFT order."""
        return 2 * np.pi * np.fft.fftfreq(self.n_q, d=self.dq)

    @property
    def lam(self) -> np.ndarray:
        """Wavenumbers conjugate to p (units of inverse momentum), FFT order."""
        return 2 * np.pi * np.fft.fftfreq(self.n_p, d=self.dp)

    def mesh(self):
        """Return ``(P, Q)`` broadcastable to ``(n_p, n_q)``."""
        return self.p[:, None], self.q[None, :]

    @property
    def shape(self):
        return (self.n_p, self.n_q)

    @property
    def cell(self) -> float:
        return self.dq * self.dp


def build_grid(q_min, q_max, n_q, p_min, p_max, n_p) -> PhaseGrid:
    return PhaseGrid(float(q_min), float(q_max), n_q, float(p_min), float(p_max), n_p)


@dataclass(frozen=True)
class WignerField:
    grid: PhaseGrid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise GridError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise FloatingPointError("WignerField contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def norm(self) -> float:
        return float(self.values.sum() * self.grid.cell)

    def normalized(self) -> WignerField:
        n = self.norm
        if n == 0:
            raise ValueError("cannot normalize a field with zero norm")
        return replace(self, values=self.values / n)

    def scaled(self, factor) -> WignerField:
        return replace(self, values=self.values * factor)

    def with_values(self, values, time=None) -> WignerField:
        return WignerField(self.grid, values, self.time if time is None else time)


@dataclass(frozen=True)
class DensityProfile:
    q: np.ndarray
    rho: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        for name in ("q", "rho"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def dq(self) -> float:
        return float(self.q[1] - self.q[0])

    @property
    def integral(self) -> float:
        return float(self.rho.sum() * self.dq)


def gaussian_wigner(grid: PhaseGrid, q0, p0, sigma_q, sigma_p, margin=4.0) -> WignerField:
    """Product Gaussian ``exp(-(q-q0)^2/2 sq^2 - (p-p0)^2/2 sp^2)`` scaled to unit lattice norm.

    With ``sigma_q * sigma_p == hbar / 2`` this is the Wigner function of a
    minimum-uncertainty wave packet.  The scale is the lattice sum rather
    than ``2 pi sq sp`` so the norm is 1 even when the tails are clipped.
    """
    if not (sigma_q > 0 and sigma_p > 0):
        raise ValueError("sigma_q and sigma_p must be positive")
    if not (grid.q_min + margin * sigma_q <= q0 <= grid.q_max - margin * sigma_q):
        raise GridError(f"packet at q0={q0} leaks past the q-range (needs {margin} sigma margin)")
    if not (grid.p_min + margin * sigma_p <= p0 <= grid.p_max - margin * sigma_p):
        raise GridError(f"packet at p0={p0} leaks past the p-range (needs {margin} sigma margin)")
    P, Q = grid.mesh()
    w = np.exp(-((Q - q0) ** 2) / (2 * sigma_q**2) - (P - p0) ** 2 / (2 * sigma_p**2))
    return WignerField(grid, w / (w.sum() * grid.cell))


def position_marginal(W: WignerField) -> DensityProfile:
    return DensityProfile(W.grid.q, W.values.sum(axis=0) * W.grid.dp, W.time)


def momentum_marginal(W: WignerField) -> DensityProfile:
    """Momentum density; the returned ``q`` slot holds the p samples."""
    return DensityProfile(W.grid.p, W.values.sum(axis=1) * W.grid.dq, W.time)


@dataclass(frozen=True)
class PhaseMoments:
    mean_q: float
    mean_p: float
    var_q: float
    var_p: float
    cov_qp: float
    norm: float


def phase_moments(W: WignerField) -> PhaseMoments:
    norm = W.norm
    if norm == 0:
        raise ValueError("moments of a zero-norm field are undefined")
    P, Q = W.grid.mesh()
    w = W.values * (W.grid.cell / norm)
    mq = float((w * Q).sum())
    mp = float((w * P).sum())
    dq_ = Q - mq
    dp_ = P - mp
    return PhaseMoments(
        mean_q=mq,
        mean_p=mp,
        var_q=float((w * dq_**2).sum()),
        var_p=float((w * dp_**2).sum()),
        cov_qp=float((w * dq_ * dp_).sum()),
        norm=norm,
    )


def negativity_volume(W: WignerField) -> float:
    v = W.values
    return float((np.abs(v) - v).sum() * W.grid.cell / 2)


def spectral_derivative(values, wavenumbers, order=1, axis=-1):
    """n-th derivative of periodic samples along ``axis`` by FFT.

    The Nyquist mode is dropped for odd orders so real input stays real.
    """
    values = np.asarray(values)
    shape = [1] * values.ndim
    shape[axis] = -1
    mult = (1j * np.asarray(wavenumbers)) ** order
    if order % 2 == 1 and len(wavenumbers) % 2 == 0:
        mult = mult.copy()
        mult[len(wavenumbers) // 2] = 0
    out = np.fft.ifft(np.fft.fft(values, axis=axis) * mult.reshape(shape), axis=axis)
    if np.isrealobj(values):
        return out.real
    return out


def check_p_decay(W: WignerField, tol=EDGE_DECAY_TOL):
    edge = max(np.abs(W.values[0]).max(), np.abs(W.values[-1]).max())
    if edge > tol:
        raise DecayError(f"|W| at the p-boundary is {edge:.3e} > {tol:.0e}")


def momentum_moment_identity(W: WignerField) -> float:
    """``∫∫ p^2 ∂_p^2 W dp dq``; equals ``2 * norm(W)`` for boundary-decayed W."""
    check_p_decay(W)
    d2 = spectral_derivative(W.values, W.grid.lam, order=2, axis=P_AXIS)
    p2 = W.grid.p[:, None] ** 2
    return float((p2 * d2).sum() * W.grid.cell)


# -- snapshot files ---------------------------------------------------------

_HEADER_KEYS = ("q_min", "q_max", "n_q", "p_min", "p_max", "n_p", "time")


def format_field(W: WignerField, params: PhysParams | None = None, extra=None) -> str:
    """Serialize to a ``# key = value`` header followed by row-major CSV.

    Values are written with 17 significant digits, which round-trips doubles
    exactly.
    """
    g = W.grid
    head = {
        "format": "qphase-wigner-field/1",
        "q_min": repr(g.q_min),
        "q_max": repr(g.q_max),
        "n_q": str(g.n_q),
        "p_min": repr(g.p_min),
        "p_max": repr(g.p_max),
        "n_p": str(g.n_p),
        "time": repr(float(W.time)),
        "layout": "rows=p columns=q",
    }
    if params is not None:
        head.update(hbar=repr(params.hbar), mass=repr(params.mass), c=repr(params.c))
    for key, value in (extra or {}).items():
        head[key] = str(value)
    buf = io.StringIO()
    for key, value in head.items():
        buf.write(f"# {key} = {value}\n")
    np.savetxt(buf, W.values, delimiter=",", fmt="%.17g")
    return buf.getvalue()


def parse_field(text: str):
    """Inverse of :func:`format_field`; returns ``(field, header_dict)``."""
    header = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            header[key.strip()] = value.strip()
        elif line.strip():
            body.append(line)
    missing = [k for k in _HEADER_KEYS if k not in header]
    if missing:
        raise ValueError(f"field header missing {missing}")
    grid = PhaseGrid(
        float(header["q_min"]), float(header["q_max"]), int(header["n_q"]),
        float(header["p_min"]), float(header["p_max"]), int(header["n_p"]),
    )
    values = np.loadtxt(body, delimiter=",", ndmin=2)
    return WignerField(grid, values, float(header["time"])), header


def save_field(path, W: WignerField, params: PhysParams | None = None, extra=None):
    with open(path, "w") as fh:
        fh.write(format_field(W, params, extra))


def load_field(path):
    with open(path) as fh:
        return parse_field(fh.read())
