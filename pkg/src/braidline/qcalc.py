"""q-deformation primitives on a truncated bilateral Jackson lattice.

The lattice consists of the points ``{+-x0 * b**j : j_min <= j <= j_max}``
with base ``0 < b < 1``, carrying the Jackson measure ``w(x) = (1-b)|x|``.
Everything else in the package (bases, propagators, scattering) is built on
top of the difference calculus defined here.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

G1 = "G1"
G2 = "G2"


@dataclass(frozen=True)
class QContext:
    """Deformation parameters governing every computation.

    ``q`` is the deformation parameter, ``kappa`` the argument-scaling unit
    and ``zeta`` the integer exponent entering the scaled Hamiltonians.  The
    one-dimensional case fixes kappa = q and zeta = -1 in the canonical
    geometry G1; the crossed geometry G2 carries the reciprocal parameters.
    """

    q: float
    kappa: float
    zeta: int
    geometry: str = G1
    barred: bool = False

    def __post_init__(self) -> None:
        if self.q <= 0 or self.q == 1.0:
            raise ValueError(f"q must be positive and != 1, got {self.q}")
        if self.geometry not in (G1, G2):
            raise ValueError(f"unknown geometry {self.geometry!r}")

    @property
    def shift_factor(self) -> float:
        """Scaling applied to the argument by the difference quotient.

        G1 differentiates against f(q x); the crossed geometry G2 against
        f(q^-1 x).
        """
        return self.q if self.geometry == G1 else 1.0 / self.q


def braided_line(q: float) -> QContext:
    """Canonical one-dimensional context: kappa = q, zeta = -1, geometry G1."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"canonical G1 context requires 0 < q < 1, got {q}")
    return QContext(q=q, kappa=q, zeta=-1, geometry=G1, barred=False)


def crossing_transform(ctx: QContext) -> QContext:
    """Swap q <-> 1/q, kappa <-> 1/kappa, flip geometry label and conjugation.

    The map is an involution.
    """
    return QContext(
        q=1.0 / ctx.q,
        kappa=1.0 / ctx.kappa,
        zeta=-ctx.zeta,
        geometry=G2 if ctx.geometry == G1 else G1,
        barred=not ctx.barred,
    )


@dataclass(frozen=True)
class QLattice:
    """Truncated bilateral geometric lattice with Jackson weights.

    Points are stored in ascending order: the negative branch from the
    outermost point inward, then the positive branch outward.  ``base`` is
    the contraction factor in (0, 1); an index shift j -> j+1 multiplies the
    point by ``base``.
    """

    x0: float
    j_min: int
    j_max: int
    base: float
    points: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    js: np.ndarray = field(repr=False)  # exponent j per point
    signs: np.ndarray = field(repr=False)  # +-1 per point

    @property
    def size(self) -> int:
        return self.points.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, QLattice):
            return NotImplemented
        return (
            self.x0 == other.x0
            and self.j_min == other.j_min
            and self.j_max == other.j_max
            and self.base == other.base
        )

    def __hash__(self) -> int:
        return hash((self.x0, self.j_min, self.j_max, self.base))

    def shift_map(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        """Index map for x -> base**m * x.

        Returns (idx, ok): for each point i, idx[i] is the index of the point
        ``base**m * x_i`` and ok[i] says whether it stays on the lattice.
        """
        n_per = self.j_max - self.j_min + 1
        jj = self.js + m
        ok = (jj >= self.j_min) & (jj <= self.j_max)
        idx = np.zeros(self.size, dtype=int)
        neg = self.signs < 0
        # negative branch is laid out with j ascending, positive descending
        idx[neg] = jj[neg] - self.j_min
        idx[~neg] = n_per + (self.j_max - jj[~neg])
        idx[~ok] = -1
        return idx, ok


def make_lattice(q: float, x0: float = 1.0, j_min: int = -12, j_max: int = 12) -> QLattice:
    """Build the truncated lattice for deformation parameter q.

    A crossed context with q > 1 produces the same point set as its partner
    with 1/q, so the base is normalised into (0, 1).
    """
    if x0 <= 0:
        raise ValueError("x0 must be positive")
    if j_min > j_max:
        raise ValueError("j_min must not exceed j_max")
    base = q if q < 1.0 else 1.0 / q
    if not 0.0 < base < 1.0:
        raise ValueError(f"invalid deformation parameter {q}")
    j = np.arange(j_min, j_max + 1)
    pos = x0 * base ** j
    points = np.concatenate([-pos, pos[::-1]])
    js = np.concatenate([j, j[::-1]])
    signs = np.concatenate([-np.ones_like(j), np.ones_like(j[::-1])])
    weights = (1.0 - base) * np.abs(points)
    return QLattice(
        x0=x0, j_min=j_min, j_max=j_max, base=base,
        points=points, weights=weights, js=js, signs=signs,
    )


@dataclass
class LatticeFunction:
    """Complex values on a QLattice at a fixed time stamp.

    ``valid`` marks points whose value is trustworthy; boundary-shifted
    points are zero-filled and flagged invalid, and norms are taken over
    valid points only.
    """

    lattice: QLattice
    values: np.ndarray
    time: float = 0.0
    valid: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.lattice.size,):
            raise ValueError("value count must equal lattice point count")
        if self.valid is None:
            self.valid = np.ones(self.lattice.size, dtype=bool)


def q_number(n: int, q: float) -> float:
    """[n]_q = (1 - q**n) / (1 - q)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if q <= 0 or q == 1.0:
        raise ValueError("q must be positive and != 1")
    return (1.0 - q ** n) / (1.0 - q)


def q_factorial(n: int, q: float) -> float:
    """[n]_q! = [1]_q [2]_q ... [n]_q, with [0]_q! = 1."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    out = 1.0
    for k in range(1, n + 1):
        out *= q_number(k, q)
    return out


class QExpResult(NamedTuple):
    value: complex
    last_term: float  # magnitude of the last retained term
    converged: bool


def q_exponential(z: complex, q: float, n_trunc: int) -> QExpResult:
    """Partial sum of sum_n z**n / [n]_q! with a convergence diagnostic.

    Overflowing terms stop the summation and are reported through
    ``converged=False`` rather than silently propagating infs.
    """
    if n_trunc < 1:
        raise ValueError("n_trunc must be >= 1")
    total = 1.0 + 0.0j
    term = 1.0 + 0.0j
    last = 1.0
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, n_trunc + 1):
            term = term * z / q_number(n, q)
            if not np.isfinite(term):
                return QExpResult(total, np.inf, False)
            total += term
            last = abs(term)
    converged = np.isfinite(total) and last <= 1e-6 * max(abs(total), 1.0)
    return QExpResult(complex(total), last, bool(converged))


def derivative_matrix(lattice: QLattice, ctx: QContext) -> np.ndarray:
    """Matrix of the Jackson difference quotient on the lattice.

    Row i realises (f(x_i) - f(s x_i)) / ((1 - s) x_i) with s the context's
    shift factor.  Where s*x falls off the lattice the shifted term is
    zero-filled.
    """
    s = ctx.shift_factor
    if not np.isclose(s, lattice.base):
        raise ValueError("context shift factor does not match the lattice base")
    n = lattice.size
    idx, ok = lattice.shift_map(1)
    denom = (1.0 - s) * lattice.points
    d = np.zeros((n, n))
    d[np.arange(n), np.arange(n)] = 1.0 / denom
    rows = np.arange(n)[ok]
    d[rows, idx[ok]] -= 1.0 / denom[ok]
    return d


def jackson_derivative(f: LatticeFunction, ctx: QContext) -> LatticeFunction:
    """Pointwise difference quotient; boundary rows flagged invalid."""
    d = derivative_matrix(f.lattice, ctx)
    _, ok = f.lattice.shift_map(1)
    return LatticeFunction(f.lattice, d @ f.values, time=f.time, valid=f.valid & ok)


def jackson_integral(f: LatticeFunction) -> complex:
    """Weighted sum over valid lattice points."""
    return complex(np.sum(f.lattice.weights[f.valid] * f.values[f.valid]))


def kappa_scale(f: LatticeFunction, m: int, ctx: QContext) -> LatticeFunction:
    """g(x) = f(kappa**m x), an exact index shift on the lattice.

    Points shifted past the truncation boundary are zero-filled and
    flagged invalid.
    """
    # kappa**m x corresponds to base**(e*m) x for some integer orientation e
    ratio = np.log(ctx.kappa) / np.log(f.lattice.base)
    e = int(round(ratio))
    if not np.isclose(ratio, e):
        raise ValueError("kappa is not an integer power of the lattice base")
    idx, ok = f.lattice.shift_map(e * m)
    vals = np.zeros_like(f.values)
    vals[ok] = f.values[idx[ok]]
    valid = np.zeros_like(ok)
    valid[ok] = f.valid[idx[ok]]
    return LatticeFunction(f.lattice, vals, time=f.time, valid=valid)


def sesquilinear(f: LatticeFunction, g: LatticeFunction) -> complex:
    """<f, g> = sum_x w(x) conj(f(x)) g(x) over mutually valid points."""
    if f.lattice != g.lattice:
        raise ValueError("lattice mismatch")
    mask = f.valid & g.valid
    return complex(np.sum(f.lattice.weights[mask] * np.conj(f.values[mask]) * g.values[mask]))
