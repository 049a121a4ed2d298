"""Exact rectangle discrepancy and the reduction to uniform product measures.

disc(g, mu) maximises |mu(A x B and g=0) - mu(A x B and g=1)| over all
rectangles A x B.  With rational product measures everything stays integer:
clear denominators, enumerate column subsets in Gray-code order and read the
optimal row set off the signs of the per-row partial sums.  delta is the
exponent -log2 disc.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import kernels
from .core import Gadget
from .errors import GuardError, InputError
from .numerics import log2_fraction

ALPHABET_GUARD = 22
REDUCTION_GUARD = 1 << 12


@dataclass(frozen=True)
class DiscrepancyReport:
    disc: Fraction
    delta: float
    rows: tuple[int, ...]
    cols: tuple[int, ...]


@dataclass(frozen=True)
class ProductDistribution:
    """Product measure on Lambda x Lambda with exact rational marginals."""

    mu_x: tuple[Fraction, ...]
    mu_y: tuple[Fraction, ...]

    def __post_init__(self):
        for side in (self.mu_x, self.mu_y):
            if any(p < 0 for p in side):
                raise InputError("negative probability in product measure")
            if sum(side) != 1:
                raise InputError("product measure marginal does not sum to 1")

    @classmethod
    def uniform(cls, alphabet: int) -> "ProductDistribution":
        row = tuple(Fraction(1, alphabet) for _ in range(alphabet))
        return cls(row, row)

    @classmethod
    def from_floats(cls, xs: Sequence[float], ys: Sequence[float], eps: float) -> "ProductDistribution":
        """Round float marginals onto a rational grid within eps/4 per entry."""
        if eps <= 0:
            raise InputError("rounding needs eps > 0")
        quarter = eps / 4
        return cls(_rationalize(xs, quarter), _rationalize(ys, quarter))

    def denominator_lcm(self) -> int:
        l = 1
        for p in self.mu_x + self.mu_y:
            l = math.lcm(l, p.denominator)
        return l


def _rationalize(values: Sequence[float], quarter: float) -> tuple[Fraction, ...]:
    vals = [float(v) for v in values]
    if any(v < -quarter for v in vals) or abs(sum(vals) - 1.0) > quarter:
        raise InputError("float marginal is not close to a probability vector")
    top = max(range(len(vals)), key=lambda i: vals[i])
    q_cap = math.ceil((len(vals) + 1) / quarter) + 1
    for q in range(1, q_cap + 1):
        nums = [round(v * q) for v in vals]
        nums[top] = q - (sum(nums) - nums[top])
        if nums[top] < 0 or any(x < 0 for x in nums):
            continue
        if all(abs(x / q - v) <= quarter for x, v in zip(nums, vals)):
            return tuple(Fraction(x, q) for x in nums)
    raise InputError("could not place the marginal on a rational grid")


def _weights(side: tuple[Fraction, ...]) -> tuple[np.ndarray, int]:
    den = 1
    for p in side:
        den = math.lcm(den, p.denominator)
    w = np.array([int(p * den) for p in side], dtype=np.int64)
    return w, den


def disc_exact(g: Gadget, mu: ProductDistribution | None = None) -> DiscrepancyReport:
    """Exact discrepancy of g under a rational product measure.

    Defaults to the uniform measure.  Reported rows/cols witness a
    maximising rectangle (the argmax is canonical: first maximiser in the
    fixed Gray-code enumeration, rows with strictly signed partial sums).
    """
    L = g.alphabet
    if L > ALPHABET_GUARD:
        raise GuardError(f"alphabet {L} exceeds exact-scan guard {ALPHABET_GUARD}")
    if mu is None:
        mu = ProductDistribution.uniform(L)
    if len(mu.mu_x) != L or len(mu.mu_y) != L:
        raise InputError("product measure size does not match the alphabet")
    wx, dx = _weights(mu.mu_x)
    wy, dy = _weights(mu.mu_y)
    sign = (1 - 2 * g.table.astype(np.int64)).astype(np.int8)
    best, row_mask, col_mask = kernels.disc_scan(sign, wx, wy)
    disc = Fraction(int(best), dx * dy)
    if disc == 0:
        raise InputError("discrepancy vanished; product measure degenerate")
    delta = -log2_fraction(disc)
    rows = tuple(i for i in range(L) if row_mask >> i & 1)
    cols = tuple(j for j in range(L) if col_mask >> j & 1)
    return DiscrepancyReport(disc, delta, rows, cols)


_DELTA_CACHE: dict[tuple, float] = {}


def gadget_delta(g: Gadget) -> float:
    """Uniform-measure delta of the gadget, cached by table contents."""
    key = (g.alphabet, g.table.tobytes())
    if key not in _DELTA_CACHE:
        _DELTA_CACHE[key] = disc_exact(g).delta
    return _DELTA_CACHE[key]


# ---------------------------------------------------------------------------
# reduction to the uniform measure over a blown-up alphabet
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProductReduction:
    """Blow-up of g to a uniform-measure gadget.

    Symbol u of the base alphabet occupies l*mu(u) consecutive slots of the
    new alphabet [l]; ``r_a``/``r_b`` map slots back to base symbols, and
    gprime is g composed with those maps.
    """

    base: Gadget
    gadget: Gadget
    mu: ProductDistribution
    l: int
    r_a: tuple[int, ...]
    r_b: tuple[int, ...]
    rounding_eps: float | None = None


def reduce_product(
    g: Gadget,
    mu: ProductDistribution | tuple[Sequence[float], Sequence[float]],
    eps: float | None = None,
) -> ProductReduction:
    """Replace (g, mu) by an equivalent uniform-measure gadget.

    Float marginals are first rounded to a rational grid (needs ``eps``);
    rational ones reduce exactly, with disc preserved under the block maps.
    """
    rounding = None
    if not isinstance(mu, ProductDistribution):
        if eps is None:
            raise InputError("float marginals need an eps for grid rounding")
        xs, ys = mu
        mu = ProductDistribution.from_floats(xs, ys, eps)
        rounding = eps
    L = g.alphabet
    if len(mu.mu_x) != L or len(mu.mu_y) != L:
        raise InputError("product measure size does not match the alphabet")
    l = mu.denominator_lcm()
    if l > REDUCTION_GUARD:
        raise GuardError(f"common denominator {l} exceeds guard {REDUCTION_GUARD}")
    r_a = tuple(u for u in range(L) for _ in range(int(mu.mu_x[u] * l)))
    r_b = tuple(v for v in range(L) for _ in range(int(mu.mu_y[v] * l)))
    table = g.table[np.ix_(np.array(r_a, dtype=np.int64), np.array(r_b, dtype=np.int64))]
    gprime = Gadget(table, kind=f"{g.kind}-uniformized")
    return ProductReduction(g, gprime, mu, l, r_a, r_b, rounding)


def canonical_rectangle_opt(reduction: ProductReduction) -> DiscrepancyReport:
    """Best canonical rectangle of the blown-up gadget.

    Canonical rectangles are unions of whole blocks r_a^{-1}(u) x r_b^{-1}(v).
    Block constancy is re-derived from the blown-up table itself (validating
    the layout), then the block scan runs with block sizes as weights.
    Returned masks index the blown-up alphabet.
    """
    g, gp, l = reduction.base, reduction.gadget, reduction.l
    L = g.alphabet
    starts_a = _block_starts(reduction.r_a, L)
    starts_b = _block_starts(reduction.r_b, L)
    sign = np.zeros((L, L), dtype=np.int8)
    wx = np.zeros(L, dtype=np.int64)
    wy = np.zeros(L, dtype=np.int64)
    for u in range(L):
        a0, a1 = starts_a[u], starts_a[u + 1]
        wx[u] = a1 - a0
        for v in range(L):
            b0, b1 = starts_b[v], starts_b[v + 1]
            wy[v] = b1 - b0
            block = gp.table[a0:a1, b0:b1]
            if block.size == 0:
                continue
            if block.min() != block.max():
                raise InputError("blown-up table is not constant on a block")
            sign[u, v] = 1 - 2 * int(block[0, 0])
    live = [u for u in range(L) if wx[u] > 0]
    live_v = [v for v in range(L) if wy[v] > 0]
    if not live or not live_v:
        raise InputError("product measure degenerate")
    best, row_mask, col_mask = kernels.disc_scan(
        sign[np.ix_(live, live_v)], wx[live], wy[live_v]
    )
    rows = []
    for pos, u in enumerate(live):
        if row_mask >> pos & 1:
            rows.extend(range(starts_a[u], starts_a[u + 1]))
    cols = []
    for pos, v in enumerate(live_v):
        if col_mask >> pos & 1:
            cols.extend(range(starts_b[v], starts_b[v + 1]))
    disc = Fraction(int(best), l * l)
    return DiscrepancyReport(disc, -log2_fraction(disc), tuple(rows), tuple(cols))


def _block_starts(r_map: tuple[int, ...], L: int) -> list[int]:
    starts = [0] * (L + 1)
    for u in range(L):
        starts[u + 1] = starts[u] + sum(1 for s in r_map if s == u)
    if list(r_map) != sorted(r_map):
        raise InputError("slot map is not sorted into blocks")
    return starts
