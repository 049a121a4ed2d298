"""Value classification for block-composed gadgets.

Everything here looks at Z^x = g(x_1, Y_1)...g(x_n, Y_n) for a fixed row
value x and a column distribution Y, and asks how benign x is: is Z^x
almost uniform, can conditionings Z^x_I = z_I be repaired by a cheap event
(recoverability), how much probability sits on heavy column values, and do
heavy values force either a skewed conditional or a biased gadget parity.

Conventions: delta is the gadget's uniform discrepancy exponent unless the
caller passes one; sigma_y defaults to the minimal sparsity of Y at that
delta; heaviness thresholds live in the log domain and use the shared TOL
cushion, while probabilities derived from supports stay exact rationals.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import kernels
from .core import CoordSet, Gadget, SimulationConstants
from .dist import Marginal, UniformSubset, _SupportDist, is_sparse, minimal_sparsity, xor_bias
from .errors import ConditioningError, GuardError, InputError
from .numerics import TOL, gt, le

CLASSIFY_COORD_GUARD = 8
EXHAUSTIVE_SUPPORT_GUARD = 20


def _resolve(g: Gadget, delta: float | None) -> float:
    if delta is not None:
        return delta
    from .disc import gadget_delta

    return gadget_delta(g)


def _check_x(x: Sequence[int], Y: _SupportDist) -> np.ndarray:
    arr = np.asarray(x, dtype=np.int64)
    if arr.shape != (Y.n,) or arr.min(initial=0) < 0 or arr.max(initial=0) >= Y.alphabet:
        raise InputError("x must be a full tuple over the column alphabet")
    return arr.astype(np.uint8)


def zx_dist(x: Sequence[int], Y: _SupportDist, g: Gadget):
    """Exact distribution of Z^x as (weight per z_code, total weight)."""
    xa = _check_x(x, Y)
    codes = kernels.gn_codes(g.table, xa, Y.rows)
    counts = np.zeros(1 << Y.n, dtype=np.int64)
    np.add.at(counts, codes, Y.weights)
    return counts, Y.total


def is_almost_uniform(
    x: Sequence[int], Y: _SupportDist, g: Gadget, delta: float | None = None
) -> tuple[bool, float]:
    """Is every point of Z^x within a (1 +- 2^(-delta/10)) factor of 2^-n?"""
    delta = _resolve(g, delta)
    counts, total = zx_dist(x, Y, g)
    scale = float(1 << Y.n) / total
    worst = float(np.abs(counts * scale - 1.0).max())
    return le(worst, 2.0 ** (-delta / 10)), worst


# ---------------------------------------------------------------------------
# heaviness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HeavyWitness:
    J: CoordSet
    y_J: tuple[int, ...]
    I: CoordSet
    z_I: tuple[int, ...]
    cond_prob: Fraction
    threshold_log: float
    t: float
    e: float
    heavy: bool


def _heavy_threshold(constants: SimulationConstants, sigma_y: float, delta: float, b: float, k: int) -> float:
    return constants.heavy_sigma(sigma_y) * delta * k - b * k - 1.0


def _zI_mask(x: np.ndarray, Y: _SupportDist, g: Gadget, I: CoordSet, z_I: Sequence[int]) -> np.ndarray:
    codes = kernels.gn_codes(g.table, x, Y.rows)
    want = 0
    for pos, i in enumerate(I.indices()):
        want |= int(z_I[pos]) << i
    imask = I.mask
    return (codes & imask) == want


def heaviness(
    x: Sequence[int],
    Y: _SupportDist,
    g: Gadget,
    constants: SimulationConstants,
    J: CoordSet,
    y_J: Sequence[int],
    I: CoordSet | None = None,
    z_I: Sequence[int] = (),
    sigma_y: float | None = None,
    delta: float | None = None,
) -> HeavyWitness:
    """Heaviness of the column value y_J under the conditioning Z^x_I = z_I.

    t is calibrated so that y_J is t-heavy exactly when t > 0: the excess of
    log2 Pr[Y_J = y_J | Z_I = z_I] over the base threshold.  e measures how
    far the unconditional probability of y_J sits below its sparsity
    allowance (non-negative when sigma_y is the minimal sparsity).
    """
    if len(J) == 0:
        raise InputError("heaviness needs a non-empty value block")
    xa = _check_x(x, Y)
    delta = _resolve(g, delta)
    if sigma_y is None:
        sigma_y = minimal_sparsity(Y, delta)
    I = CoordSet.empty(Y.n) if I is None else I
    if (I.mask & J.mask) or len(z_I) != len(I):
        raise InputError("I must be disjoint from J and match z_I")
    sel = _zI_mask(xa, Y, g, I, z_I)
    w_sel = int(Y.weights[sel].sum())
    if w_sel == 0:
        raise ConditioningError("conditioning value z_I has probability zero")
    jidx = list(J.indices())
    target = np.asarray(y_J, dtype=np.uint8)
    match = sel & (Y.rows[:, jidx] == target).all(axis=1)
    cond_prob = Fraction(int(Y.weights[match].sum()), w_sel)
    uncond = Fraction(int(Y.weights[(Y.rows[:, jidx] == target).all(axis=1)].sum()), Y.total)
    thr = _heavy_threshold(constants, sigma_y, delta, g.b, len(J))
    if cond_prob == 0:
        t = -math.inf
    else:
        t = math.log2(cond_prob.numerator) - math.log2(cond_prob.denominator) - thr
    if uncond == 0:
        raise InputError("y_J is outside the support of Y")
    e = sigma_y * delta * len(J) - g.b * len(J) - (
        math.log2(uncond.numerator) - math.log2(uncond.denominator)
    )
    return HeavyWitness(J, tuple(int(v) for v in y_J), I, tuple(int(v) for v in z_I),
                        cond_prob, thr, t, e, gt(t, 0.0))


def _iter_conditionings(x: np.ndarray, Y: _SupportDist, g: Gadget):
    """All (I, z_I, row mask) with positive probability, I over all subsets."""
    codes = kernels.gn_codes(g.table, x, Y.rows)
    n = Y.n
    for imask in range(1 << n):
        sub = codes & imask
        for want in sorted(set(int(v) for v in sub)):
            sel = sub == want
            idx = [i for i in range(n) if imask >> i & 1]
            z_I = tuple(want >> i & 1 for i in idx)
            yield CoordSet(imask, n), z_I, sel


@dataclass(frozen=True)
class LightReport:
    light: bool
    alpha: float
    worst_ratio: float
    worst_I: CoordSet | None
    worst_z: tuple[int, ...] | None
    worst_J: CoordSet | None


def is_light(
    x: Sequence[int],
    Y: _SupportDist,
    g: Gadget,
    constants: SimulationConstants,
    alpha: float,
    sigma_y: float | None = None,
    delta: float | None = None,
) -> LightReport:
    """Does heavy mass stay below 2^(-alpha delta) (2n)^(-|J|) everywhere?

    Quantified over every conditioning Z^x_I = z_I with positive probability
    and every non-empty value block J disjoint from I.
    """
    if Y.n > CLASSIFY_COORD_GUARD:
        raise GuardError(f"classification over n={Y.n} > {CLASSIFY_COORD_GUARD}")
    xa = _check_x(x, Y)
    delta = _resolve(g, delta)
    if sigma_y is None:
        sigma_y = minimal_sparsity(Y, delta)
    n = Y.n
    worst = (-math.inf, None, None, None)
    for I, z_I, sel in _iter_conditionings(xa, Y, g):
        universe = np.array([i for i in range(n) if i not in I], dtype=np.int64)
        k = len(universe)
        if k == 0:
            continue
        thr = np.array(
            [_heavy_threshold(constants, sigma_y, delta, g.b, j) for j in range(k + 1)]
        )
        _, mass = kernels.heavy_scan(Y.rows, Y.weights, sel, universe, Y.alphabet, thr, TOL)
        w_sel = int(Y.weights[sel].sum())
        for jmask in range(1, 1 << k):
            size = bin(jmask).count("1")
            bound = 2.0 ** (-alpha * delta) * (2.0 * n) ** (-size)
            ratio = (int(mass[jmask]) / w_sel) / bound
            if ratio > worst[0]:
                jset = CoordSet.from_indices(
                    (int(universe[t]) for t in range(k) if jmask >> t & 1), n
                )
                worst = (ratio, I, z_I, jset)
    if worst[0] == -math.inf:
        return LightReport(True, alpha, 0.0, None, None, None)
    light = le(worst[0], 1.0)
    return LightReport(light, alpha, worst[0], worst[1], worst[2], worst[3])


# ---------------------------------------------------------------------------
# recovery events
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RecoveryEvent:
    """One removal pass: the conditional support minus its heavy rows."""

    I: CoordSet
    z_I: tuple[int, ...]
    base_mask: np.ndarray
    kept_mask: np.ndarray
    prob: Fraction
    empty: bool


def canonical_recovery_event(
    x: Sequence[int],
    Y: _SupportDist,
    g: Gadget,
    constants: SimulationConstants,
    I: CoordSet,
    z_I: Sequence[int],
    sigma_y: float | None = None,
    delta: float | None = None,
) -> RecoveryEvent:
    """Condition on Z^x_I = z_I and drop every row carrying a heavy value.

    Heaviness is measured in the conditional distribution over the blocks
    outside I, with thresholds built from the sparsity of the original Y.
    ``prob`` is the conditional probability of the surviving event.
    """
    xa = _check_x(x, Y)
    delta = _resolve(g, delta)
    if sigma_y is None:
        sigma_y = minimal_sparsity(Y, delta)
    if len(z_I) != len(I):
        raise InputError("z_I length does not match I")
    base = _zI_mask(xa, Y, g, I, z_I)
    w_base = int(Y.weights[base].sum())
    if w_base == 0:
        raise ConditioningError("conditioning value z_I has probability zero")
    universe = np.array([i for i in range(Y.n) if i not in I], dtype=np.int64)
    if len(universe) == 0:
        return RecoveryEvent(I, tuple(z_I), base, base.copy(), Fraction(1), False)
    thr = np.array(
        [_heavy_threshold(constants, sigma_y, delta, g.b, j) for j in range(len(universe) + 1)]
    )
    marks, _ = kernels.heavy_scan(Y.rows, Y.weights, base, universe, Y.alphabet, thr, TOL)
    kept = base & ~marks
    w_kept = int(Y.weights[kept].sum())
    return RecoveryEvent(I, tuple(z_I), base, kept, Fraction(w_kept, w_base), w_kept == 0)


@dataclass(frozen=True)
class RecoveryReport:
    recoverable: bool
    alpha: float
    mode: str
    failing_I: CoordSet | None
    failing_z: tuple[int, ...] | None
    max_passes: int
    pairs_checked: int


def is_recoverable(
    x: Sequence[int],
    Y: _SupportDist,
    g: Gadget,
    constants: SimulationConstants,
    alpha: float,
    mode: str = "canonical",
    sigma_y: float | None = None,
    delta: float | None = None,
) -> RecoveryReport:
    """Does every positive conditioning admit a high-probability repair event?

    A repair for (I, z_I) is an event of conditional probability at least
    1 - 2^(-alpha delta) under which the blocks outside I are
    (sigma_y + 4/c)-sparse.  Canonical mode iterates heavy-row removal to a
    fixed point, accepting at the first pass that satisfies both clauses
    (pass 0 accepts distributions that start out sparse); exhaustive mode
    additionally searches all small removal sets and needs a uniform support
    of at most 20 rows.
    """
    if Y.n > CLASSIFY_COORD_GUARD:
        raise GuardError(f"classification over n={Y.n} > {CLASSIFY_COORD_GUARD}")
    if mode not in ("canonical", "exhaustive"):
        raise InputError(f"unknown recovery mode {mode!r}")
    xa = _check_x(x, Y)
    delta = _resolve(g, delta)
    if sigma_y is None:
        sigma_y = minimal_sparsity(Y, delta)
    if mode == "exhaustive":
        if not isinstance(Y, UniformSubset):
            raise InputError("exhaustive recovery search needs a uniform support")
        if Y.size > EXHAUSTIVE_SUPPORT_GUARD:
            raise GuardError(
                f"support of {Y.size} rows exceeds exhaustive guard {EXHAUSTIVE_SUPPORT_GUARD}"
            )
    sigma_req = constants.heavy_sigma(sigma_y)
    budget = 2.0 ** (-alpha * delta)
    max_passes = 0
    checked = 0
    for I, z_I, base in _iter_conditionings(xa, Y, g):
        checked += 1
        ok, passes = _recover_pair(
            xa, Y, g, constants, I, base, sigma_y, sigma_req, delta, budget
        )
        max_passes = max(max_passes, passes)
        if not ok and mode == "exhaustive":
            ok = _recover_exhaustive(Y, I, base, sigma_req, delta, budget)
        if not ok:
            return RecoveryReport(False, alpha, mode, I, z_I, max_passes, checked)
    return RecoveryReport(True, alpha, mode, None, None, max_passes, checked)


def _free_marginal(Y: _SupportDist, mask: np.ndarray, outside: list[int]) -> Marginal | None:
    if not outside:
        return None
    return Marginal(Y.alphabet, Y.rows[mask][:, outside], Y.weights[mask])


def _recover_pair(x, Y, g, constants, I, base, sigma_y, sigma_req, delta, budget):
    """Iterated heavy-row removal; True at the first admissible pass."""
    outside = [i for i in range(Y.n) if i not in I]
    w_base = int(Y.weights[base].sum())
    sel = base.copy()
    thr = np.array(
        [_heavy_threshold(constants, sigma_y, delta, g.b, j) for j in range(len(outside) + 1)]
    )
    universe = np.array(outside, dtype=np.int64)
    passes = 0
    cap = Y.n * Y.size + 1
    while True:
        w_sel = int(Y.weights[sel].sum())
        if w_sel == 0 or not le(1 - w_sel / w_base, budget):
            return False, passes
        marg = _free_marginal(Y, sel, outside)
        if marg is None or is_sparse(marg, sigma_req, delta).holds:
            return True, passes
        marks, _ = kernels.heavy_scan(Y.rows, Y.weights, sel, universe, Y.alphabet, thr, TOL)
        if not (sel & marks).any():
            # fixed point that is still not sparse cannot occur; bail defensively
            return False, passes
        sel = sel & ~marks
        passes += 1
        if passes > cap:
            return False, passes


def _recover_exhaustive(Y, I, base, sigma_req, delta, budget):
    """Ground-truth search over all small removal sets (uniform support)."""
    outside = [i for i in range(Y.n) if i not in I]
    rows = np.nonzero(base)[0]
    m = len(rows)
    allowed = math.floor(m * (budget + TOL))
    for r in range(0, min(allowed, m - 1) + 1):
        for drop in itertools.combinations(range(m), r):
            mask = base.copy()
            mask[rows[list(drop)]] = False
            marg = _free_marginal(Y, mask, outside)
            if marg is None or is_sparse(marg, sigma_req, delta).holds:
                return True
    return False


# ---------------------------------------------------------------------------
# safety, danger, and the skew/bias dichotomy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SafetyVerdict:
    safe: bool
    almost_uniform: bool
    uniform_dev: float
    recoverable: bool
    recovery: RecoveryReport


def is_safe(
    x: Sequence[int],
    Y: _SupportDist,
    g: Gadget,
    constants: SimulationConstants,
    alpha: float,
    sigma_y: float | None = None,
    delta: float | None = None,
) -> SafetyVerdict:
    """Safe = Z^x almost uniform and every conditioning recoverable."""
    delta = _resolve(g, delta)
    uniform, dev = is_almost_uniform(x, Y, g, delta)
    recovery = is_recoverable(x, Y, g, constants, alpha, "canonical", sigma_y, delta)
    return SafetyVerdict(uniform and recovery.recoverable, uniform, dev,
                         recovery.recoverable, recovery)


@dataclass(frozen=True)
class DangerReport:
    dangerous: bool
    leaking: bool
    leak_I: CoordSet | None
    leak_z: tuple[int, ...] | None
    leak_prob: Fraction | None
    sparsifying: bool
    sparsify_I: CoordSet | None
    sparsify_z: tuple[int, ...] | None
    sparsify_set: CoordSet | None


def is_dangerous(
    x: Sequence[int],
    Y: _SupportDist,
    g: Gadget,
    eps: float,
    sigma_y: float | None = None,
    delta: float | None = None,
) -> DangerReport:
    """Dangerous = leaking or eps-sparsifying.

    Leaking: some conditioning value z_I has probability below 2^(-|I|-1)
    (exact rational comparison, unreachable values included).  Sparsifying:
    some positive conditioning leaves the outside blocks not
    (sigma_y + eps)-sparse.  First witnesses in (|I|, mask, z) order.
    """
    if Y.n > CLASSIFY_COORD_GUARD:
        raise GuardError(f"classification over n={Y.n} > {CLASSIFY_COORD_GUARD}")
    xa = _check_x(x, Y)
    delta = _resolve(g, delta)
    if sigma_y is None:
        sigma_y = minimal_sparsity(Y, delta)
    codes = kernels.gn_codes(g.table, xa, Y.rows)
    n = Y.n
    leak = None
    for imask in sorted(range(1, 1 << n), key=lambda m: (bin(m).count("1"), m)):
        idx = [i for i in range(n) if imask >> i & 1]
        sub = codes & imask
        need = 1 << len(idx)
        weights_by_value: dict[int, int] = {}
        for v, w in zip(sub, Y.weights):
            weights_by_value[int(v)] = weights_by_value.get(int(v), 0) + int(w)
        for pattern in range(need):
            want = 0
            for pos, i in enumerate(idx):
                want |= (pattern >> pos & 1) << i
            w = weights_by_value.get(want, 0)
            # strict: Pr < 2^(-|I|-1), i.e. w * 2^(|I|+1) < total
            if w * (2 ** (len(idx) + 1)) < Y.total:
                leak = (CoordSet(imask, n), tuple(pattern >> p & 1 for p in range(len(idx))),
                        Fraction(w, Y.total))
                break
        if leak:
            break
    sparsify = None
    sigma_bound = sigma_y + eps
    for I, z_I, sel in _iter_conditionings(xa, Y, g):
        outside = [i for i in range(n) if i not in I]
        marg = _free_marginal(Y, sel, outside)
        if marg is None:
            continue
        rep = is_sparse(marg, sigma_bound, delta)
        if not rep.holds:
            wset = CoordSet.from_indices((outside[t] for t in rep.worst_set.indices()), n)
            sparsify = (I, z_I, wset)
            break
    return DangerReport(
        leak is not None or sparsify is not None,
        leak is not None,
        leak[0] if leak else None,
        leak[1] if leak else None,
        leak[2] if leak else None,
        sparsify is not None,
        sparsify[0] if sparsify else None,
        sparsify[1] if sparsify else None,
        sparsify[2] if sparsify else None,
    )


@dataclass(frozen=True)
class SkewBiasReport:
    t: float
    e: float
    s0: float
    skewing: bool
    skew_I: CoordSet | None
    skew_excess: float
    biasing: bool
    bias_S: CoordSet | None
    bias_value: Fraction | None


def skew_bias_check(
    x: Sequence[int],
    y_J: Sequence[int],
    J: CoordSet,
    Y: _SupportDist,
    g: Gadget,
    t: float,
    sigma_y: float | None = None,
    delta: float | None = None,
) -> SkewBiasReport:
    """t-skewing and t-biasing of a column value, evaluated side by side.

    Skewing: some conditional Z^x_I given Y_J = y_J has deficiency above
    4 log2(n) |J| + e + t - 2.  Biasing: some parity over at least
    s0 = 4|J| + (t + e - 3)/log2(n) blocks outside J has bias above
    (2n)^(-|S|) in the conditional column distribution.  Needs n >= 2.
    """
    n = Y.n
    if n < 2:
        raise InputError("the skew/bias dichotomy needs n >= 2")
    if len(J) == 0:
        raise InputError("the value block J must be non-empty")
    xa = _check_x(x, Y)
    delta = _resolve(g, delta)
    if sigma_y is None:
        sigma_y = minimal_sparsity(Y, delta)
    jidx = list(J.indices())
    target = np.asarray(y_J, dtype=np.uint8)
    match = (Y.rows[:, jidx] == target).all(axis=1)
    w_match = int(Y.weights[match].sum())
    if w_match == 0:
        raise InputError("y_J is outside the support of Y")
    e = sigma_y * delta * len(J) - g.b * len(J) - (math.log2(w_match) - math.log2(Y.total))
    logn = math.log2(n)
    skew_thr = 4 * logn * len(J) + e + t - 2
    codes = kernels.gn_codes(g.table, xa, Y.rows)
    outside = [i for i in range(n) if i not in J]
    skew_I, skew_excess = None, -math.inf
    for sub in range(1 << len(outside)):
        imask = 0
        for pos, i in enumerate(outside):
            if sub >> pos & 1:
                imask |= 1 << i
        vals: dict[int, int] = {}
        for v, w in zip(codes[match] & imask, Y.weights[match]):
            vals[int(v)] = vals.get(int(v), 0) + int(w)
        defect = bin(imask).count("1") + math.log2(max(vals.values())) - math.log2(w_match)
        if defect - skew_thr > skew_excess:
            skew_excess = defect - skew_thr
            skew_I = CoordSet(imask, n)
    skewing = gt(skew_excess + skew_thr, skew_thr)
    cond = Y.restrict(match)
    s0 = 4 * len(J) + (t + e - 3) / logn
    bias_S, bias_val = None, None
    for sub in range(1, 1 << len(outside)):
        size = bin(sub).count("1")
        if size + TOL < s0:
            continue
        S = CoordSet.from_indices(
            (outside[pos] for pos in range(len(outside)) if sub >> pos & 1), n
        )
        val = xor_bias(list(map(int, xa)), cond, g, S)
        if val * (2 * n) ** size > 1:
            bias_S, bias_val = S, val
            break
    return SkewBiasReport(
        t, e, s0, skewing, skew_I if skewing else None,
        skew_excess, bias_S is not None, bias_S, bias_val,
    )


@dataclass(frozen=True)
class MainLemmaReport:
    unsafe_mass: Fraction
    unsafe_count: int
    bound: float
    sigma_x: float
    sigma_y: float
    precondition_holds: bool
    within_bound: bool
    asserted: bool


def main_lemma_estimate(
    X: _SupportDist,
    Y: _SupportDist,
    g: Gadget,
    constants: SimulationConstants,
    alpha: float | None = None,
    gamma: float | None = None,
    delta: float | None = None,
) -> MainLemmaReport:
    """Mass of unsafe rows against the 2^(-gamma delta) budget.

    The budget is only promised when sigma_x + 2 sigma_y stays below
    9/10 - 25/c - gamma - alpha; the mass is computed unconditionally and
    the precondition is reported alongside.
    """
    if X.n != Y.n or X.alphabet != Y.alphabet:
        raise InputError("sides over different domains")
    if X.n > 6:
        raise GuardError("unsafe-mass scan guarded at n <= 6")
    delta = _resolve(g, delta)
    alpha = constants.alpha if alpha is None else alpha
    gamma = constants.gamma if gamma is None else gamma
    sigma_x = minimal_sparsity(X, delta)
    sigma_y = minimal_sparsity(Y, delta)
    unsafe_w = 0
    unsafe_count = 0
    for row, w in zip(X.rows, X.weights):
        verdict = is_safe(list(map(int, row)), Y, g, constants, alpha, sigma_y, delta)
        if not verdict.safe:
            unsafe_w += int(w)
            unsafe_count += 1
    mass = Fraction(unsafe_w, X.total)
    bound = 2.0 ** (-gamma * delta)
    pre = le(sigma_x + 2 * sigma_y, 0.9 - 25.0 / constants.c - gamma - alpha)
    within = le(float(mass), bound)
    return MainLemmaReport(mass, unsafe_count, bound, sigma_x, sigma_y, pre, within, pre and within)
