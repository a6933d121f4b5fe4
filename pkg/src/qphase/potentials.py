"""Analytic potentials and Hamiltonians, quantum jump moments, kinetic potential.

Every potential in the catalog can be evaluated at complex arguments and
differentiated to any order in closed form, which is what the Moyal kernel
and the imaginary-noise force need.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.special import eval_hermite

MAX_POLY_DEGREE = 12


class PawulaClass(enum.Enum):
    Constant = "constant"
    Linear = "linear"
    Harmonic = "harmonic"
    GeneralSmooth = "general_smooth"


@dataclass(frozen=True)
class PotentialSpec:
    """One entry of the potential catalog.

    ``kind`` is one of ``constant``, ``linear``, ``harmonic``, ``polynomial``,
    ``gaussian_well``.  ``coeffs`` holds the named coefficients:

    =============  ======================================
    constant       ``U0``            U = U0
    linear         ``a``             U = a q
    harmonic       ``k``             U = k q^2 / 2
    polynomial     ``c`` (tuple)     U = sum_j c_j q^j
    gaussian_well  ``depth, width``  U = -depth exp(-q^2 / 2 width^2)
    =============  ======================================
    """

    kind: str
    coeffs: tuple = ()

    def __post_init__(self):
        arity = {"constant": 1, "linear": 1, "harmonic": 1, "gaussian_well": 2}
        if self.kind == "polynomial":
            c = tuple(float(x) for x in self.coeffs)
            if not c:
                raise ValueError("polynomial needs at least one coefficient")
            if len(c) - 1 > MAX_POLY_DEGREE:
                raise ValueError(f"polynomial degree {len(c) - 1} exceeds {MAX_POLY_DEGREE}")
        elif self.kind in arity:
            c = tuple(float(x) for x in self.coeffs)
            if len(c) != arity[self.kind]:
                raise ValueError(f"{self.kind} takes {arity[self.kind]} coefficient(s), got {len(c)}")
            if self.kind == "gaussian_well" and not c[1] > 0:
                raise ValueError("gaussian_well width must be positive")
        else:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if not all(math.isfinite(x) for x in c):
            raise ValueError("potential coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    # constructors
    @classmethod
    def constant(cls, U0=0.0):
        return cls("constant", (U0,))

    @classmethod
    def linear(cls, a):
        return cls("linear", (a,))

    @classmethod
    def harmonic(cls, k):
        return cls("harmonic", (k,))

    @classmethod
    def polynomial(cls, coefficients):
        return cls("polynomial", tuple(coefficients))

    @classmethod
    def gaussian_well(cls, depth, width):
        return cls("gaussian_well", (depth, width))

    def poly_coeffs(self):
        """Ascending power-series coefficients, or ``None`` for non-polynomials."""
        if self.kind == "constant":
            return np.array([self.coeffs[0]])
        if self.kind == "linear":
            return np.array([0.0, self.coeffs[0]])
        if self.kind == "harmonic":
            return np.array([0.0, 0.0, 0.5 * self.coeffs[0]])
        if self.kind == "polynomial":
            return np.array(self.coeffs)
        return None

    @property
    def is_polynomial(self) -> bool:
        return self.kind != "gaussian_well"

    @property
    def degree(self):
        c = self.poly_coeffs()
        if c is None:
            return None
        nz = np.nonzero(c)[0]
        return int(nz[-1]) if len(nz) else 0

    def __call__(self, q):
        return self.value(q)

    def value(self, q):
        """U(q) for real or complex ``q``."""
        q = np.asarray(q)
        c = self.poly_coeffs()
        if c is not None:
            return P.polyval(q, c)
        depth, width = self.coeffs
        return -depth * np.exp(-(q**2) / (2 * width**2))

    def derivative(self, n: int, q):
        if n < 0:
            raise ValueError("derivative order must be >= 0")
        if n == 0:
            return self.value(q)
        q = np.asarray(q)
        c = self.poly_coeffs()
        if c is not None:
            if n >= len(c):
                return np.zeros_like(q, dtype=np.result_type(q, float))
            return P.polyval(q, P.polyder(c, n))
        depth, width = self.coeffs
        s = 1.0 / (np.sqrt(2.0) * width)
        x = q * s
        # d^n/dx^n e^{-x^2} = (-1)^n H_n(x) e^{-x^2}
        return -depth * (-s) ** n * eval_hermite(n, x) * np.exp(-(x**2))

    def odd_difference(self, q, a):
        """``U(q + a) - U(q - a)`` evaluated without cancellation for polynomials.

        For polynomial potentials the Taylor series in ``a`` terminates, so the
        difference is the finite sum ``2 sum_j U^(2j+1)(q) a^(2j+1)/(2j+1)!``.
        """
        if self.is_polynomial:
            return 2.0 * odd_series(self, q, a, (self.degree - 1) // 2)
        return self.value(q + a) - self.value(q - a)

    def describe(self) -> dict:
        names = {
            "constant": ("U0",),
            "linear": ("a",),
            "harmonic": ("k",),
            "gaussian_well": ("depth", "width"),
        }
        if self.kind == "polynomial":
            return {"kind": "polynomial", "coefficients": list(self.coeffs)}
        return {"kind": self.kind, **dict(zip(names[self.kind], self.coeffs))}


def odd_series(U: PotentialSpec, q, a, n_max: int):
    """``sum_{n<=n_max} U^(2n+1)(q) a^(2n+1) / (2n+1)!``."""
    q = np.asarray(q)
    a = np.asarray(a)
    total = np.zeros(np.broadcast_shapes(q.shape, a.shape))
    for n in range(max(n_max, 0) + 1):
        j = 2 * n + 1
        total = total + U.derivative(j, q) * a**j / math.factorial(j)
    return total


def derivative(U: PotentialSpec, n: int, q):
    return U.derivative(n, q)


def pawula_class(U: PotentialSpec) -> PawulaClass:
    if not U.is_polynomial:
        return PawulaClass.GeneralSmooth
    d = U.degree
    if d == 0:
        return PawulaClass.Constant
    if d == 1:
        return PawulaClass.Linear
    if d == 2:
        return PawulaClass.Harmonic
    return PawulaClass.GeneralSmooth


# -- Hamiltonians -----------------------------------------------------------


@dataclass(frozen=True)
class HamiltonianSpec:
    """``kind`` is ``nonrelativistic``, ``relativistic_free`` or ``relativistic``.

    The relativistic kinetic energy is ``c sqrt(m^2 c^2 + p^2)``.  Setting
    ``expansion`` to 0, 2 or 4 replaces it by its slow-particle power series
    ``mc^2 + p^2/2m - p^4/8m^3c^2`` truncated at that power of p.
    """

    kind: str
    mass: float
    potential: PotentialSpec | None = None
    c: float | None = None
    expansion: int | None = None

    def __post_init__(self):
        if self.kind == "nonrelativistic":
            if not self.mass > 0:
                raise ValueError("nonrelativistic Hamiltonian needs mass > 0")
        elif self.kind in ("relativistic_free", "relativistic"):
            if self.c is None or not self.c > 0:
                raise ValueError("relativistic Hamiltonian needs c > 0")
            if self.mass < 0:
                raise ValueError("mass must be non-negative")
            if self.expansion is not None:
                if self.expansion not in (0, 2, 4):
                    raise ValueError("expansion order must be 0, 2 or 4")
                if self.mass == 0:
                    raise ValueError("the slow-particle expansion needs mass > 0")
        else:
            raise ValueError(f"unknown Hamiltonian kind {self.kind!r}")
        if self.kind == "relativistic_free" and self.potential is not None:
            raise ValueError("relativistic_free takes no potential")
        if self.kind != "relativistic_free" and self.potential is None:
            object.__setattr__(self, "potential", PotentialSpec.constant(0.0))

    @classmethod
    def nonrelativistic(cls, mass, potential=None):
        return cls("nonrelativistic", mass, potential or PotentialSpec.constant(0.0))

    @classmethod
    def relativistic_free(cls, mass, c, expansion=None):
        return cls("relativistic_free", mass, None, c, expansion)

    @classmethod
    def relativistic(cls, mass, c, potential, expansion=None):
        return cls("relativistic", mass, potential, c, expansion)

    def kinetic_poly(self):
        """Ascending coefficients in p of a polynomial kinetic energy, else ``None``."""
        m = self.mass
        if self.kind == "nonrelativistic":
            return np.array([0.0, 0.0, 0.5 / m])
        if self.expansion is None:
            return None
        c = self.c
        full = np.array([m * c**2, 0.0, 0.5 / m, 0.0, -1.0 / (8 * m**3 * c**2)])
        return full[: self.expansion + 1]

    def kinetic(self, p):
        p = np.asarray(p)
        poly = self.kinetic_poly()
        if poly is not None:
            return P.polyval(p, poly)
        m, c = self.mass, self.c
        return c * np.sqrt(m**2 * c**2 + p**2)

    def __call__(self, p, q):
        V = 0.0 if self.potential is None else self.potential.value(q)
        return self.kinetic(p) + V

    def dq(self, n: int, q):
        if n == 0:
            raise ValueError("use __call__ for the value")
        if self.potential is None:
            return np.zeros_like(np.asarray(q, dtype=float))
        return self.potential.derivative(n, q)

    def dp(self, n: int, p):
        if n < 1:
            raise ValueError("momentum derivative order must be >= 1")
        p = np.asarray(p, dtype=float)
        poly = self.kinetic_poly()
        if poly is not None:
            if n >= len(poly):
                return np.zeros_like(p)
            return P.polyval(p, P.polyder(poly, n))
        return self.c * _sqrt_derivatives(self.mass * self.c, p, n)[n]


def _sqrt_derivatives(a, p, n):
    """Derivatives 0..n of ``f(p) = sqrt(a^2 + p^2)``.

    Uses the Leibniz expansion of ``f^2 = a^2 + p^2``:
    ``2 f f^(n) = g^(n) - sum_{k=1}^{n-1} C(n,k) f^(k) f^(n-k)``.
    """
    p = np.asarray(p, dtype=float)
    f = [np.sqrt(a * a + p * p)]
    for order in range(1, n + 1):
        rhs = {1: 2 * p, 2: np.full_like(p, 2.0)}.get(order, np.zeros_like(p))
        acc = np.zeros_like(p)
        for k in range(1, order):
            acc = acc + math.comb(order, k) * f[k] * f[order - k]
        with np.errstate(divide="ignore", invalid="ignore"):
            f.append((rhs - acc) / (2 * f[0]))
    return f


def quantum_prefactor(n: int, hbar) -> float:
    """``Re[(i hbar/2)^(n-1)]``; zero for even ``n``."""
    if n < 1:
        raise ValueError("jump moment order must be >= 1")
    if n % 2 == 0:
        return 0.0
    j = (n - 1) // 2
    return (-1) ** j * (hbar / 2) ** (n - 1)


def jump_moment_alpha(H: HamiltonianSpec, n: int, q, hbar):
    """Momentum jump moment ``-Re[(i hbar/2)^(n-1)] d^n H / dq^n``."""
    pref = quantum_prefactor(n, hbar)
    if pref == 0.0:
        return np.zeros_like(np.asarray(q, dtype=float))
    return -pref * H.dq(n, q)


def jump_moment_beta(H: HamiltonianSpec, n: int, p, hbar):
    """Position jump moment ``Re[(i hbar/2)^(n-1)] d^n H / dp^n``.

    Zero for every even ``n``, including ``n = 2``.  The value ``hbar/m``
    sometimes quoted for a Nelson-type Wiener process is not produced here.
    """
    pref = quantum_prefactor(n, hbar)
    if pref == 0.0:
        return np.zeros_like(np.asarray(p, dtype=float))
    return pref * H.dp(n, p)


def jump_moment_beta_poly(H: HamiltonianSpec, n: int, hbar):
    """``beta_n`` as ascending polynomial coefficients in p (polynomial kinetic terms only)."""
    poly = H.kinetic_poly()
    if poly is None:
        raise ValueError("coefficient form needs a polynomial kinetic energy")
    pref = quantum_prefactor(n, hbar)
    if n >= len(poly) or pref == 0.0:
        return np.zeros(1)
    return P.polytrim(pref * P.polyder(poly, n), tol=0)


def kinetic_potential(H: HamiltonianSpec, p, q, xi, zeta, hbar):
    """``(2/hbar) Im H(p + i hbar zeta/2, q - i hbar xi/2)``.

    For a massless free relativistic particle this is exactly ``c * zeta``
    (principal branch, i.e. ``Re p > 0``); that case is returned directly.
    """
    shape = np.broadcast_shapes(*(np.shape(x) for x in (p, q, xi, zeta)))
    if H.kind == "relativistic_free" and H.mass == 0 and H.expansion is None:
        return np.broadcast_to(H.c * np.asarray(zeta, dtype=float), shape).copy()
    pc = np.asarray(p) + 0.5j * hbar * np.asarray(zeta)
    qc = np.asarray(q) - 0.5j * hbar * np.asarray(xi)
    return np.broadcast_to((2.0 / hbar) * np.imag(H(pc, qc)), shape).copy()


def fd_weights(order: int, offsets) -> list:
    """Exact finite-difference weights (Fornberg) for the ``order``-th derivative at 0."""
    xs = [Fraction(x) for x in offsets]
    n = len(xs)
    if order >= n:
        raise ValueError("stencil too small for the requested derivative")
    c = [[Fraction(0)] * (order + 1) for _ in range(n)]
    c[0][0] = Fraction(1)
    c1 = Fraction(1)
    c4 = xs[0]
    for i in range(1, n):
        mn = min(i, order)
        c2 = Fraction(1)
        c5 = c4
        c4 = xs[i]
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2
            for k in range(mn, 0, -1):
                c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3
            c[j][0] = c4 * c[j][0] / c3
        c1 = c2
    return [float(row[order]) for row in c]


@dataclass(frozen=True)
class SeriesCheck:
    max_abs_discrepancy: float
    alpha_fd: tuple
    beta_fd: tuple
    alpha_exact: tuple
    beta_exact: tuple


def kinetic_potential_series_check(H: HamiltonianSpec, p, q, max_order: int, hbar,
                                   step=0.1, half_width=8) -> SeriesCheck:
    """Recover the jump moments as Taylor coefficients of the kinetic potential.

    The n-th derivatives of Phi in xi (at zeta = 0) and in zeta (at xi = 0)
    are taken by a (2*half_width+1)-point central finite-difference stencil and
    compared with :func:`jump_moment_alpha` / :func:`jump_moment_beta`.
    """
    if not 1 <= max_order <= 8:
        raise ValueError("max_order must be between 1 and 8")
    offsets = list(range(-half_width, half_width + 1))
    s = np.array(offsets, dtype=float) * step
    phi_xi = kinetic_potential(H, p, q, s, 0.0, hbar)
    phi_zeta = kinetic_potential(H, p, q, 0.0, s, hbar)
    a_fd, b_fd, a_ex, b_ex = [], [], [], []
    for n in range(1, max_order + 1):
        w = np.array(fd_weights(n, offsets))
        a_fd.append(float(w @ phi_xi) / step**n)
        b_fd.append(float(w @ phi_zeta) / step**n)
        a_ex.append(float(jump_moment_alpha(H, n, q, hbar)))
        b_ex.append(float(jump_moment_beta(H, n, p, hbar)))
    worst = max(np.max(np.abs(np.subtract(a_fd, a_ex))), np.max(np.abs(np.subtract(b_fd, b_ex))))
    return SeriesCheck(float(worst), tuple(a_fd), tuple(b_fd), tuple(a_ex), tuple(b_ex))
