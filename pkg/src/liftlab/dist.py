"""Distributions with explicit support, min-entropy deficiency, sparsity.

Two support-backed distribution types are provided.  ``UniformSubset`` is
uniform over a set of tuples from Lambda^n.  Projecting it onto a subset of
coordinates generally introduces multiplicities, so projections are returned
as ``Marginal`` objects carrying integer weights.  Every operation below
accepts either type; probabilities derived from supports are exact
``Fraction`` values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .core import CoordSet, Gadget, Restriction
from .errors import ConditioningError, GuardError, InputError
from .numerics import TOL, le

SUPPORT_GUARD = 1 << 24
SPARSITY_COORD_GUARD = 20


class _SupportDist:
    """Shared plumbing for support-plus-weights distributions."""

    __slots__ = ("alphabet", "rows", "weights", "total")

    def __init__(self, alphabet: int, rows: np.ndarray, weights: np.ndarray):
        if not 2 <= alphabet <= 256:
            raise InputError("alphabet size must be in [2, 256]")
        rows = np.asarray(rows, dtype=np.uint8)
        if rows.ndim != 2:
            raise InputError("support must be a 2-d array of tuples")
        if rows.shape[0] == 0:
            raise InputError("empty support")
        if rows.size and rows.max() >= alphabet:
            raise InputError("support symbol out of alphabet range")
        weights = np.asarray(weights, dtype=np.int64)
        if weights.shape != (rows.shape[0],) or (weights <= 0).any():
            raise InputError("weights must be positive, one per support row")
        # canonical form: distinct rows in lexicographic order
        order = np.lexsort(rows.T[::-1]) if rows.shape[1] else np.arange(rows.shape[0])
        rows = rows[order]
        weights = weights[order]
        if rows.shape[1]:
            keep = np.ones(rows.shape[0], dtype=bool)
            keep[1:] = (rows[1:] != rows[:-1]).any(axis=1)
            if not keep.all():
                idx = np.cumsum(keep) - 1
                agg = np.zeros(int(idx[-1]) + 1, dtype=np.int64)
                np.add.at(agg, idx, weights)
                rows, weights = rows[keep], agg
        else:
            rows, weights = rows[:1], np.array([int(weights.sum())], dtype=np.int64)
        rows.setflags(write=False)
        weights.setflags(write=False)
        self.alphabet = alphabet
        self.rows = rows
        self.weights = weights
        self.total = int(weights.sum())

    @property
    def n(self) -> int:
        return int(self.rows.shape[1])

    @property
    def size(self) -> int:
        return int(self.rows.shape[0])

    def tuples(self) -> list[tuple[int, ...]]:
        return [tuple(int(v) for v in r) for r in self.rows]

    def prob(self, t: Sequence[int]) -> Fraction:
        arr = np.asarray(t, dtype=np.uint8)
        hit = np.nonzero((self.rows == arr).all(axis=1))[0]
        if len(hit) == 0:
            return Fraction(0)
        return Fraction(int(self.weights[hit[0]]), self.total)

    def project(self, coords) -> "Marginal":
        idx = _coord_indices(self, coords)
        return Marginal(self.alphabet, self.rows[:, idx], self.weights.copy())

    def restrict(self, mask: np.ndarray):
        """Same-type distribution on the rows selected by a boolean mask."""
        if not mask.any():
            raise ConditioningError("selected event has empty support")
        if isinstance(self, UniformSubset):
            return UniformSubset(self.alphabet, self.rows[mask])
        return Marginal(self.alphabet, self.rows[mask], self.weights[mask])


class UniformSubset(_SupportDist):
    """Uniform distribution over an explicit set of tuples from Lambda^n."""

    def __init__(self, alphabet: int, rows):
        rows = np.asarray(rows, dtype=np.uint8)
        if rows.ndim == 1:
            rows = rows.reshape(-1, 1)
        super().__init__(alphabet, rows, np.ones(rows.shape[0], dtype=np.int64))

    @classmethod
    def from_tuples(cls, alphabet: int, tuples: Iterable[Sequence[int]]) -> "UniformSubset":
        arr = np.array([list(t) for t in tuples], dtype=np.uint8)
        return cls(alphabet, arr)

    @classmethod
    def full(cls, alphabet: int, n: int) -> "UniformSubset":
        if alphabet**n > SUPPORT_GUARD:
            raise GuardError(f"full support {alphabet}^{n} exceeds {SUPPORT_GUARD}")
        codes = np.arange(alphabet**n, dtype=np.int64)
        rows = np.zeros((len(codes), n), dtype=np.uint8)
        for i in range(n - 1, -1, -1):
            rows[:, i] = codes % alphabet
            codes //= alphabet
        return cls(alphabet, rows)


class Marginal(_SupportDist):
    """Projection of a support distribution; rows carry multiplicities."""

    def __init__(self, alphabet: int, rows, weights):
        super().__init__(alphabet, np.asarray(rows, dtype=np.uint8), weights)


def _coord_indices(D: _SupportDist, coords) -> list[int]:
    if isinstance(coords, CoordSet):
        if coords.n != D.n:
            raise InputError("coordinate set over wrong n")
        return list(coords.indices())
    idx = sorted(int(i) for i in coords)
    if any(not 0 <= i < D.n for i in idx) or len(set(idx)) != len(idx):
        raise InputError(f"bad coordinate list {coords!r}")
    return idx


def _proj_weight_table(D: _SupportDist, idx: Sequence[int]):
    """(keys, weight sums) of the projection onto ``idx``; exact integers."""
    if len(idx) * math.log2(D.alphabet) <= 62:
        keys = kernels.pack_keys(D.rows, np.asarray(idx, dtype=np.int64), D.alphabet)
        return kernels.group_weights(keys, D.weights)
    # 128-bit-safe fallback for very wide projections
    table: dict[tuple, int] = {}
    for row, w in zip(D.rows, D.weights):
        key = tuple(int(row[i]) for i in idx)
        table[key] = table.get(key, 0) + int(w)
    return list(table.keys()), np.array(list(table.values()), dtype=np.int64)


# ---------------------------------------------------------------------------
# deficiency and sparsity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeficiencyReport:
    deficiency: float
    min_entropy: float
    max_prob: Fraction


@dataclass(frozen=True)
class ProjectionTable:
    """Exact weight of every value of a coordinate projection."""

    coords: tuple[int, ...]
    counts: dict
    total: int

    @property
    def max_count(self) -> int:
        return max(self.counts.values())

    def prob(self, value: tuple) -> Fraction:
        return Fraction(self.counts.get(tuple(value), 0), self.total)


def projection_table(D: _SupportDist, coords) -> ProjectionTable:
    idx = _coord_indices(D, coords)
    counts: dict[tuple, int] = {}
    for row, w in zip(D.rows, D.weights):
        key = tuple(int(row[i]) for i in idx)
        counts[key] = counts.get(key, 0) + int(w)
    return ProjectionTable(tuple(idx), counts, D.total)


def deficiency(D: _SupportDist, coords) -> DeficiencyReport:
    """Min-entropy deficiency of the projection of D onto ``coords``.

    Deficiency are measured against the full |Lambda|^|S| range:
    |S| log2 |Lambda| - Hmin(D_S).  The empty set gives (0, 0, 1).
    """
    idx = _coord_indices(D, coords)
    if not idx:
        return DeficiencyReport(0.0, 0.0, Fraction(1))
    _, sums = _proj_weight_table(D, idx)
    max_w = int(np.max(sums))
    max_prob = Fraction(max_w, D.total)
    hmin = math.log2(D.total) - math.log2(max_w)
    defect = len(idx) * math.log2(D.alphabet) - hmin
    return DeficiencyReport(defect, hmin, max_prob)


@dataclass(frozen=True)
class SparsityReport:
    holds: bool
    sigma: float
    worst_set: CoordSet | None
    worst_excess: float
    minimal_sigma: float


def is_sparse(D: _SupportDist, sigma: float, delta: float) -> SparsityReport:
    """Check deficiency(S) <= sigma * delta * |S| for every non-empty S.

    ``worst_set`` maximises the excess over the allowance (smallest bitmask
    on ties); ``minimal_sigma`` is the least sparsity level the distribution
    satisfies, max_S deficiency(S) / (delta |S|).
    """
    if delta <= 0:
        raise InputError("sparsity needs a positive discrepancy exponent")
    if D.n > SPARSITY_COORD_GUARD:
        raise GuardError(f"sparsity scan over n={D.n} > {SPARSITY_COORD_GUARD} coordinates")
    worst_excess = -math.inf
    worst_mask = None
    minimal = 0.0
    for mask in range(1, 1 << D.n):
        idx = [i for i in range(D.n) if mask >> i & 1]
        defect = deficiency(D, idx).deficiency
        allowance = sigma * delta * len(idx)
        excess = defect - allowance
        if excess > worst_excess + TOL:
            worst_excess = excess
            worst_mask = mask
        minimal = max(minimal, defect / (delta * len(idx)))
    if D.n == 0:
        return SparsityReport(True, sigma, None, -math.inf, 0.0)
    holds = le(worst_excess, 0.0)
    return SparsityReport(
        holds, sigma, CoordSet(worst_mask, D.n) if worst_mask is not None else None,
        worst_excess, minimal,
    )


def minimal_sparsity(D: _SupportDist, delta: float) -> float:
    """Least sigma for which D is sigma-sparse at this delta."""
    if D.n == 0:
        return 0.0
    return is_sparse(D, 0.0, delta).minimal_sigma


# ---------------------------------------------------------------------------
# conditioning and distances
# ---------------------------------------------------------------------------


def condition(D: _SupportDist, event, description: str = "event"):
    """Condition on an event given as a predicate on tuples or a row mask.

    Returns (conditioned distribution, exact probability of the event).
    """
    if callable(event):
        mask = np.fromiter(
            (bool(event(tuple(int(v) for v in row))) for row in D.rows),
            dtype=bool, count=D.size,
        )
    else:
        mask = np.asarray(event, dtype=bool)
        if mask.shape != (D.size,):
            raise InputError("event mask length does not match support size")
    kept = int(D.weights[mask].sum())
    if kept == 0:
        raise ConditioningError(f"{description} has probability zero")
    return D.restrict(mask), Fraction(kept, D.total)


def statistical_distance(D1: _SupportDist, D2: _SupportDist) -> Fraction:
    """Exact total-variation distance between two support distributions."""
    if D1.n != D2.n or D1.alphabet != D2.alphabet:
        raise InputError("distributions over different domains")
    p1 = {t: Fraction(int(w), D1.total) for t, w in zip(D1.tuples(), D1.weights)}
    p2 = {t: Fraction(int(w), D2.total) for t, w in zip(D2.tuples(), D2.weights)}
    acc = Fraction(0)
    for key in set(p1) | set(p2):
        acc += abs(p1.get(key, Fraction(0)) - p2.get(key, Fraction(0)))
    return acc / 2


def xor_bias(x_or_X, Y: _SupportDist, g: Gadget, coords: CoordSet) -> Fraction:
    """Bias of the parity of gadget values over ``coords``.

    First argument either a concrete tuple for the row side (bias over Y
    alone) or a distribution (bias over independent draws from both sides).
    The empty coordinate set is rejected.
    """
    if len(coords) == 0:
        raise InputError("bias over the empty coordinate set")
    idx = list(coords.indices())
    if isinstance(x_or_X, _SupportDist):
        X = x_or_X
        if X.n != Y.n or X.alphabet != Y.alphabet:
            raise InputError("sides over different domains")
        signed = 0
        for xrow, wx in zip(X.rows, X.weights):
            signed += int(wx) * _signed_parity_sum(xrow, Y, g, idx)
        return Fraction(abs(signed), X.total * Y.total)
    x = np.asarray(x_or_X, dtype=np.uint8)
    if x.shape != (Y.n,):
        raise InputError("x tuple length does not match Y")
    return Fraction(abs(_signed_parity_sum(x, Y, g, idx)), Y.total)


def _signed_parity_sum(x: np.ndarray, Y: _SupportDist, g: Gadget, idx: list[int]) -> int:
    bits = np.zeros(Y.size, dtype=np.uint8)
    for i in idx:
        bits ^= g.table[int(x[i])][Y.rows[:, i]]
    signs = 1 - 2 * bits.astype(np.int64)
    return int(signs @ Y.weights)


# ---------------------------------------------------------------------------
# near-uniformity from small Fourier coefficients
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VaziraniReport:
    m: int
    variant: str
    hypothesis_holds: bool
    conclusion_holds: bool
    implication_holds: bool
    vacuous: bool
    max_point_dev: Fraction | None = None
    deficiency: float | None = None
    deficiency_bound: float | None = None


def _walsh(probs: list[Fraction]) -> list[Fraction]:
    """In-place Walsh transform; entry T is the signed sum over z of
    (-1)^{|z & T|} p_z, i.e. the exact bias of the parity on T."""
    f = list(probs)
    h = 1
    while h < len(f):
        for start in range(0, len(f), 2 * h):
            for j in range(start, start + h):
                a, b = f[j], f[j + h]
                f[j], f[j + h] = a + b, a - b
        h *= 2
    return f


def vazirani_check(
    probs: Sequence[Fraction],
    variant: str,
    eps: Fraction | None = None,
    t: int | None = None,
) -> VaziraniReport:
    """Do small parity biases force the distribution close to uniform?

    ``probs`` lists the distribution on m-bit strings indexed by z_code.
    Variant I: all non-trivial parities eps*(2m)^{-|T|}-biased implies every
    point probability within (1 +- eps) 2^{-m}; exact rational comparison.
    Variant II (integer t >= 1): parities of size >= t bounded by
    (2m)^{-|T|} implies min-entropy deficiency <= t log2 m + 1.
    """
    size = len(probs)
    m = size.bit_length() - 1
    if size != 1 << m or m < 1:
        raise InputError("probability vector length must be 2^m, m >= 1")
    probs = [Fraction(p) for p in probs]
    if any(p < 0 for p in probs) or sum(probs) != 1:
        raise InputError("probabilities must be non-negative and sum to 1")
    coeffs = _walsh(probs)
    two_m = 2 * m
    if variant == "I":
        if eps is None:
            raise InputError("variant I needs eps")
        eps = Fraction(eps)
        hyp = all(
            abs(coeffs[tm]) * two_m ** bin(tm).count("1") <= eps
            for tm in range(1, size)
        )
        dev = max(abs(p * size - 1) for p in probs)
        concl = dev <= eps
        return VaziraniReport(
            m, "I", hyp, concl, (not hyp) or concl, not hyp, max_point_dev=dev,
        )
    if variant == "II":
        if t is None or t < 1 or t != int(t):
            raise InputError("variant II needs an integer t >= 1")
        hyp = all(
            abs(coeffs[tm]) * two_m ** bin(tm).count("1") <= 1
            for tm in range(1, size)
            if bin(tm).count("1") >= t
        )
        max_p = max(probs)
        defect = m + (math.log2(max_p.numerator) - math.log2(max_p.denominator))
        bound = t * math.log2(m) + 1
        concl = le(defect, bound)
        return VaziraniReport(
            m, "II", hyp, concl, (not hyp) or concl, not hyp,
            deficiency=defect, deficiency_bound=bound,
        )
    raise InputError(f"unknown variant {variant!r}")


@dataclass(frozen=True)
class BinomialBoundReport:
    lhs: float
    rhs: float
    holds: bool


def binomial_sum_bound(beta: float, l: float, n: int) -> BinomialBoundReport:
    """Tail bound: sum over |S| >= l of C(n,|S|) (beta/n)^|S| <= 2 beta^l."""
    if not 0 <= beta <= 1:
        raise InputError("beta must lie in [0, 1]")
    if l < 1:
        raise InputError("the bound needs l >= 1")
    if n < 1:
        raise InputError("n must be positive")
    lhs = sum(
        math.comb(n, k) * beta**k * float(n) ** (-k)
        for k in range(math.ceil(l - TOL), n + 1)
    )
    rhs = 2 * beta**l
    return BinomialBoundReport(lhs, rhs, le(lhs, rhs))


# ---------------------------------------------------------------------------
# structured pairs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StructuredReport:
    fixed_consistent: bool
    x_sparsity: SparsityReport | None
    y_sparsity: SparsityReport | None
    holds: bool
    failure: str | None


def structured_check(
    X: _SupportDist,
    Y: _SupportDist,
    rho: Restriction,
    g: Gadget,
    sigma_x: float,
    sigma_y: float,
    delta: float | None = None,
) -> StructuredReport:
    """Is (X, Y) structured with respect to the restriction?

    Fixed coordinates must evaluate to the restriction bit for every pair of
    support values (the sides are independent, so this is a per-coordinate
    product check); the free projections must be sigma-sparse.
    """
    if X.n != rho.n or Y.n != rho.n:
        raise InputError("restriction length does not match supports")
    delta = _resolve_delta(g, delta)
    for i, bit in rho.fixed_values():
        ux = np.unique(X.rows[:, i])
        uy = np.unique(Y.rows[:, i])
        if not (g.table[np.ix_(ux, uy)] == bit).all():
            return StructuredReport(False, None, None, False, f"fixed coordinate {i}")
    free = rho.free
    xr = is_sparse(X.project(free), sigma_x, delta)
    yr = is_sparse(Y.project(free), sigma_y, delta)
    if not xr.holds:
        return StructuredReport(True, xr, yr, False, "row side not sparse")
    if not yr.holds:
        return StructuredReport(True, xr, yr, False, "column side not sparse")
    return StructuredReport(True, xr, yr, True, None)


def _resolve_delta(g: Gadget, delta: float | None) -> float:
    if delta is not None:
        if delta <= 0:
            raise InputError("delta must be positive")
        return delta
    from .disc import gadget_delta

    return gadget_delta(g)


@dataclass(frozen=True)
class MultUniformityReport:
    precondition_holds: bool
    sigma_x: float
    sigma_y: float
    all_within: bool
    worst_dev: float
    bound: float
    asserted: bool


def multiplicative_uniformity_check(
    X: _SupportDist,
    Y: _SupportDist,
    rho: Restriction,
    g: Gadget,
    c: float,
    gamma: float,
    delta: float | None = None,
) -> MultUniformityReport:
    """Does every z on the free block have probability 2^-f (1 +- 2^-gamma*delta)?

    f counts free coordinates and the probability is over independent draws
    of the two sides.  The guarantee is only claimed when the sides are
    structured with sparsity summing below 1 - 8/c - gamma; the check is
    evaluated unconditionally and the precondition reported alongside.
    """
    delta = _resolve_delta(g, delta)
    if X.size * Y.size > SUPPORT_GUARD:
        raise GuardError("support pair too large for exact fiber scan")
    free = rho.free
    fidx = list(free.indices())
    f = len(fidx)
    Xf, Yf = X.project(free), Y.project(free)
    sx, sy = minimal_sparsity(Xf, delta), minimal_sparsity(Yf, delta)
    structured = structured_check(X, Y, rho, g, sx, sy, delta)
    pre = structured.holds and le(sx + sy, 1 - 8 / c - gamma)
    counts = np.zeros(1 << f, dtype=np.int64)
    for xrow, wx in zip(Xf.rows, Xf.weights):
        codes = kernels.gn_codes(g.table, xrow, Yf.rows)
        counts += int(wx) * np.bincount(
            codes, weights=Yf.weights.astype(np.float64), minlength=1 << f
        ).astype(np.int64)
    total = Xf.total * Yf.total
    devs = np.abs(counts.astype(np.float64) * (1 << f) / total - 1.0)
    worst = float(devs.max())
    bound = 2.0 ** (-gamma * delta)
    within = le(worst, bound)
    return MultUniformityReport(pre, sx, sy, within, worst, bound, pre and within)


@dataclass(frozen=True)
class UniformMarginalsReport:
    precondition_holds: bool
    tv_x: Fraction
    tv_y: Fraction
    bound: float
    within: bool
    asserted: bool
    fiber_weight: int


def uniform_marginals_check(
    X: _SupportDist,
    Y: _SupportDist,
    rho: Restriction,
    g: Gadget,
    z_free: Sequence[int],
    c: float,
    gamma: float,
    delta: float | None = None,
) -> UniformMarginalsReport:
    """Are the marginals of (X, Y) conditioned on the free block evaluating
    to z close to the unconditioned sides?

    Exact total variation on both sides against the 2^-gamma*delta budget;
    the precondition mirrors the structured requirement with sparsities
    summing below 1 - 10/c - gamma.
    """
    delta = _resolve_delta(g, delta)
    if X.size * Y.size > SUPPORT_GUARD:
        raise GuardError("support pair too large for exact fiber scan")
    free = rho.free
    f = len(free)
    if len(z_free) != f:
        raise InputError("z must assign exactly the free coordinates")
    target = sum(int(b) << i for i, b in enumerate(z_free))
    Xf, Yf = X.project(free), Y.project(free)
    wx_fiber = np.zeros(Xf.size, dtype=np.int64)
    wy_fiber = np.zeros(Yf.size, dtype=np.int64)
    for i, (xrow, wx) in enumerate(zip(Xf.rows, Xf.weights)):
        codes = kernels.gn_codes(g.table, xrow, Yf.rows)
        hit = codes == target
        wx_fiber[i] = int(wx) * int(Yf.weights[hit].sum())
        wy_fiber[hit] += int(wx) * Yf.weights[hit]
    if wx_fiber.sum() == 0:
        raise ConditioningError("the free block never evaluates to z on the supports")
    fiber_total = int(wx_fiber.sum())
    tv_x = _weighted_tv(Xf.weights, Xf.total, wx_fiber, fiber_total)
    tv_y = _weighted_tv(Yf.weights, Yf.total, wy_fiber, fiber_total)
    sx, sy = minimal_sparsity(Xf, delta), minimal_sparsity(Yf, delta)
    structured = structured_check(X, Y, rho, g, sx, sy, delta)
    pre = structured.holds and le(sx + sy, 1 - 10 / c - gamma)
    bound = 2.0 ** (-gamma * delta)
    within = le(float(max(tv_x, tv_y)), bound)
    return UniformMarginalsReport(pre, tv_x, tv_y, bound, within, pre and within, fiber_total)


def _weighted_tv(base_w, base_total, cond_w, cond_total) -> Fraction:
    acc = Fraction(0)
    for bw, cw in zip(base_w, cond_w):
        acc += abs(Fraction(int(bw), base_total) - Fraction(int(cw), cond_total))
    return acc / 2
