"""Deterministic protocol-to-decision-tree simulation with full accounting.

The simulator walks the protocol tree keeping explicit supports for both
sides.  Per iteration: restrict the speaker to safe values, send the
majority bit, apply a density-restoring fix, query the fixed coordinates,
condition the listener on the gadget agreeing with the answers, and repair
the listener with the canonical recovery event.  Every conditioning is
logged as a TraceEvent carrying exact probabilities and the free-block
deficiencies of both sides, so the potential-function inequalities can be
re-checked from the trace alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import kernels
from .core import (
    BOT,
    CoordSet,
    DecisionTree,
    DTLeaf,
    DTNode,
    Gadget,
    ProtocolLeaf,
    ProtocolTree,
    Restriction,
    SimulationConstants,
)
from .dist import UniformSubset, _SupportDist, deficiency, minimal_sparsity
from .errors import GuardError, InputError, SimulationFailure
from .numerics import TOL, le
from .safety import _heavy_threshold, is_safe

SIM_COORD_GUARD = 8


# ---------------------------------------------------------------------------
# density-restoring fix
# ---------------------------------------------------------------------------


def maximal_violating_set(D: _SupportDist, sigma: float, delta: float):
    """Largest coordinate set whose deficiency beats the sparsity allowance.

    Returns (I, value): I of maximum cardinality (ties: smallest bitmask)
    with deficiency(I) > sigma*delta*|I| + tol, plus the most probable value
    of the projection onto I (ties: lexicographically smallest).  When D is
    already sigma-sparse the result is (empty set, None); conditioning on
    X_I = value and projecting off I always lands on a sigma-sparse
    distribution, which is what makes the fix restore density.
    """
    if delta <= 0:
        raise InputError("density fix needs a positive discrepancy exponent")
    n = D.n
    best_mask = 0
    best_size = 0
    for mask in range(1, 1 << n):
        size = bin(mask).count("1")
        if size < best_size:
            continue
        idx = [i for i in range(n) if mask >> i & 1]
        defect = deficiency(D, idx).deficiency
        if defect > sigma * delta * size + TOL and size > best_size:
            best_size = size
            best_mask = mask
    if best_mask == 0:
        return CoordSet.empty(n), None
    idx = [i for i in range(n) if best_mask >> i & 1]
    keys = kernels.pack_keys(D.rows, np.asarray(idx, dtype=np.int64), D.alphabet)
    uniq, sums = kernels.group_weights(keys, D.weights)
    top = int(np.argmax(sums))  # first maximum = lexicographically smallest value
    value = _unpack(int(uniq[top]), D.alphabet, len(idx))
    return CoordSet(best_mask, n), value


def _unpack(code: int, alphabet: int, k: int) -> tuple[int, ...]:
    out = [0] * k
    for i in range(k - 1, -1, -1):
        out[i] = code % alphabet
        code //= alphabet
    return tuple(out)


# ---------------------------------------------------------------------------
# trace bookkeeping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TraceEvent:
    iteration: int
    step: str
    side: str
    event_prob: Fraction | None
    def_x_before: float
    def_x_after: float
    def_y_before: float
    def_y_after: float
    free_after: int
    I: CoordSet | None = None
    notes: dict = field(default_factory=dict)


@dataclass
class DetSimResult:
    output: str
    queries: int
    transcript: str
    trace: list[TraceEvent]
    rho: Restriction
    flagged: bool
    fiber_nonempty: bool
    uniformity_precondition: bool
    x_support: int
    y_support: int
    constants_label: str


class _State:
    __slots__ = ("X", "Y", "rho", "node", "transcript", "iteration", "queries",
                 "trace", "sigma_listener")

    def __init__(self, X, Y, rho, node):
        self.X = X
        self.Y = Y
        self.rho = rho
        self.node = node
        self.transcript: list[str] = []
        self.iteration = 0
        self.queries = 0
        self.trace: list[TraceEvent] = []
        self.sigma_listener = 0.0

    def clone(self) -> "_State":
        st = _State(self.X, self.Y, self.rho, self.node)
        st.transcript = list(self.transcript)
        st.iteration = self.iteration
        st.queries = self.queries
        st.trace = list(self.trace)
        st.sigma_listener = self.sigma_listener
        return st


def _free_deficiencies(st: _State) -> tuple[float, float]:
    free = st.rho.free
    fx = deficiency(st.X.project(free), range(len(free))).deficiency
    fy = deficiency(st.Y.project(free), range(len(free))).deficiency
    return fx, fy


def _log(st: _State, step: str, side: str, prob, before, I=None, **notes):
    after = _free_deficiencies(st)
    st.trace.append(TraceEvent(
        st.iteration, step, side, prob, before[0], after[0], before[1], after[1],
        st.rho.free.mask, I, dict(notes),
    ))
    return after


def _fail(st: _State, step: str, reason: str):
    raise SimulationFailure(step, reason, diagnostics={
        "iteration": st.iteration,
        "transcript": "".join(st.transcript),
        "free": st.rho.free.indices(),
        "x_support": st.X.size,
        "y_support": st.Y.size,
        "trace_events": len(st.trace),
    })


# ---------------------------------------------------------------------------
# iteration steps
# ---------------------------------------------------------------------------


def _speaker_listener(st: _State, g: Gadget):
    """(speaker dist, listener dist, gadget oriented speaker-first, side tag)."""
    if st.node.owner == "A":
        return st.X, st.Y, g, "X"
    return st.Y, st.X, Gadget(np.ascontiguousarray(g.table.T), kind=g.kind + "-T"), "Y"


def _set_side(st: _State, tag: str, dist) -> None:
    if tag == "X":
        st.X = dist
    else:
        st.Y = dist


def _pre_query(st: _State, g: Gadget, constants: SimulationConstants, delta: float):
    """Steps 1-3.  Returns (absolute I, value, speaker tag); I None when sparse."""
    speaker, listener, g_sp, tag = _speaker_listener(st, g)
    free = st.rho.free
    fidx = list(free.indices())
    listener_free = listener.project(free)
    st.sigma_listener = minimal_sparsity(listener_free, delta)

    # step 1: keep speaker rows whose free pattern is alpha-safe for the listener
    before = _free_deficiencies(st)
    patterns = {}
    for row in speaker.rows[:, fidx]:
        key = tuple(int(v) for v in row)
        if key not in patterns:
            patterns[key] = is_safe(
                key, listener_free, g_sp, constants, constants.alpha,
                sigma_y=st.sigma_listener, delta=delta,
            ).safe
    mask = np.fromiter(
        (patterns[tuple(int(v) for v in row)] for row in speaker.rows[:, fidx]),
        dtype=bool, count=speaker.size,
    )
    kept = int(speaker.weights[mask].sum())
    if kept == 0:
        _fail(st, "safe-filter", "no safe speaker value survives")
    p1 = Fraction(kept, speaker.total)
    speaker = speaker.restrict(mask)
    _set_side(st, tag, speaker)
    before = _log(st, "safe-filter", tag, p1, before, filter_prob_at_least_half=p1 >= Fraction(1, 2))

    # step 2: majority message bit (tie resolved toward 0)
    bits = st.node.bits[_pack_rows(speaker.rows, speaker.alphabet)]
    w1 = int(speaker.weights[bits == 1].sum())
    m = 1 if 2 * w1 > speaker.total else 0
    p2 = Fraction(w1 if m else speaker.total - w1, speaker.total)
    speaker = speaker.restrict(bits == m)
    _set_side(st, tag, speaker)
    st.transcript.append(str(m))
    st.node = st.node.children[m]
    before = _log(st, "message", tag, p2, before, bit=m)

    # step 3: density-restoring fix on the speaker's free block
    I_rel, value = maximal_violating_set(speaker.project(free), constants.sigma, delta)
    if value is None:
        _log(st, "density-fix", tag, Fraction(1), before, I=CoordSet.empty(st.rho.n), skipped=True)
        return None, None, tag
    I_abs = CoordSet.from_indices((fidx[i] for i in I_rel), st.rho.n)
    sel = (speaker.rows[:, [fidx[i] for i in I_rel]] == np.asarray(value, dtype=np.uint8)).all(axis=1)
    p3 = Fraction(int(speaker.weights[sel].sum()), speaker.total)
    speaker = speaker.restrict(sel)
    _set_side(st, tag, speaker)
    _log(st, "density-fix", tag, p3, before, I=I_abs, value=value)
    return I_abs, value, tag


def _post_query(st: _State, g: Gadget, constants: SimulationConstants, delta: float,
                I_abs: CoordSet, value: tuple, z_I: tuple, speaker_tag: str,
                recovery_at_least: Fraction):
    """Steps 4-6 once the answers z_I are known."""
    speaker_is_x = speaker_tag == "X"
    listener = st.Y if speaker_is_x else st.X
    other = "Y" if speaker_is_x else "X"
    tag = speaker_tag

    before = _free_deficiencies(st)
    st.rho = st.rho.fix(I_abs, z_I)
    st.queries += len(I_abs)
    before = _log(st, "query", tag, None, before, I=I_abs, value=value, z=z_I)

    # step 5: listener rows must evaluate to the answers on I
    idx = list(I_abs.indices())
    ok = np.ones(listener.size, dtype=bool)
    for pos, i in enumerate(idx):
        if speaker_is_x:
            ok &= g.table[value[pos], listener.rows[:, i]] == z_I[pos]
        else:
            ok &= g.table[listener.rows[:, i], value[pos]] == z_I[pos]
    kept = int(listener.weights[ok].sum())
    if kept == 0:
        _fail(st, "g-condition", "listener support inconsistent with the answers")
    p5 = Fraction(kept, listener.total)
    listener = listener.restrict(ok)
    _set_side(st, other, listener)
    premise_gcond = p5 * 2 ** (len(idx) + 1) >= 1
    before = _log(st, "g-condition", other, p5, before, I=I_abs,
                  premise_direct_bound=premise_gcond)

    # step 6: canonical recovery event on the new free block
    new_free = [i for i in range(st.rho.n) if i in st.rho.free]
    universe = np.asarray(new_free, dtype=np.int64)
    if len(universe):
        thr = np.array([
            _heavy_threshold(constants, st.sigma_listener, delta, g.b, j)
            for j in range(len(universe) + 1)
        ])
        marks, _ = kernels.heavy_scan(
            listener.rows, listener.weights, np.ones(listener.size, dtype=bool),
            universe, listener.alphabet, thr, TOL,
        )
        keep = ~marks
    else:
        keep = np.ones(listener.size, dtype=bool)
    w_keep = int(listener.weights[keep].sum())
    p6 = Fraction(w_keep, listener.total)
    if p6 < recovery_at_least:
        _fail(st, "recovery", f"canonical event has probability {p6} < {recovery_at_least}")
    listener = listener.restrict(keep)
    _set_side(st, other, listener)
    _log(st, "recovery", other, p6, before, I=I_abs,
         premise_recovery=p6 >= Fraction(1, 2))


def _pack_rows(rows: np.ndarray, alphabet: int) -> np.ndarray:
    codes = np.zeros(rows.shape[0], dtype=np.int64)
    for i in range(rows.shape[1]):
        codes = codes * alphabet + rows[:, i]
    return codes


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------


def _start_state(protocol: ProtocolTree, X0, Y0) -> _State:
    if protocol.n > SIM_COORD_GUARD:
        raise GuardError(f"simulation guarded at n <= {SIM_COORD_GUARD}")
    X = UniformSubset.full(protocol.alphabet, protocol.n) if X0 is None else X0
    Y = UniformSubset.full(protocol.alphabet, protocol.n) if Y0 is None else Y0
    if X.n != protocol.n or Y.n != protocol.n:
        raise InputError("support width does not match the protocol")
    return _State(X, Y, Restriction.all_free(protocol.n), protocol.root)


def _resolve_delta(g: Gadget, delta: float | None) -> float:
    if delta is not None:
        return delta
    from .disc import gadget_delta

    return gadget_delta(g)


def _finish(st: _State, g: Gadget, constants: SimulationConstants, delta: float,
            bits: tuple[int, ...]) -> DetSimResult:
    output = st.node.output
    free = st.rho.free
    fiber = _fiber_nonempty(st, g, bits)
    sx = minimal_sparsity(st.X.project(free), delta)
    sy = minimal_sparsity(st.Y.project(free), delta)
    pre = le(sx + sy, 1 - 8 / constants.c - constants.gamma)
    return DetSimResult(
        output, st.queries, "".join(st.transcript), st.trace, st.rho,
        flagged=not pre, fiber_nonempty=fiber, uniformity_precondition=pre,
        x_support=st.X.size, y_support=st.Y.size, constants_label=constants.label,
    )


def _fiber_nonempty(st: _State, g: Gadget, bits: tuple[int, ...]) -> bool:
    """Does some support pair (x, y) satisfy g^n(x, y) = z exactly?

    On coordinates fixed along the run one side is constant and the other
    g-conditioned, so those agree automatically; the scan settles the free
    block.  Iterates over the smaller support, vectorised over the other.
    """
    target = 0
    for i, b in enumerate(bits):
        target |= b << i
    if st.X.size <= st.Y.size:
        outer, inner, table = st.X, st.Y, g.table
    else:
        outer, inner, table = st.Y, st.X, np.ascontiguousarray(g.table.T)
    for row in outer.rows:
        codes = kernels.gn_codes(table, row, inner.rows)
        if bool((codes == target).any()):
            return True
    return False


def simulate_det(
    protocol: ProtocolTree,
    g: Gadget,
    z: Sequence[int] | str,
    constants: SimulationConstants,
    X0=None,
    Y0=None,
    delta: float | None = None,
) -> DetSimResult:
    """Run the deterministic simulation against a concrete z.

    Returns the leaf output, query count, transcript and the full trace;
    raises SimulationFailure when a conditioning event empties or the
    recovery event falls below probability 1/2 (expected out of regime).
    """
    bits = tuple(int(ch) for ch in z)
    if len(bits) != protocol.n or any(b not in (0, 1) for b in bits):
        raise InputError("z must be an n-bit string")
    if g.alphabet != protocol.alphabet:
        raise InputError("gadget alphabet does not match the protocol")
    delta = _resolve_delta(g, delta)
    st = _start_state(protocol, X0, Y0)
    half = Fraction(1, 2)
    while not isinstance(st.node, ProtocolLeaf):
        st.iteration += 1
        I_abs, value, tag = _pre_query(st, g, constants, delta)
        if I_abs is not None:
            z_I = tuple(bits[i] for i in I_abs.indices())
            _post_query(st, g, constants, delta, I_abs, value, z_I, tag, half)
    return _finish(st, g, constants, delta, bits)


def build_full_tree(
    protocol: ProtocolTree,
    g: Gadget,
    constants: SimulationConstants,
    X0=None,
    Y0=None,
    delta: float | None = None,
) -> DecisionTree:
    """Expand the simulation over all query answers into a decision tree.

    The simulation reads z only when it queries, so branching on the two
    possible answers at each queried coordinate reproduces simulate_det
    exactly; failures become sentinel leaves marked with the failing step.
    """
    if g.alphabet != protocol.alphabet:
        raise InputError("gadget alphabet does not match the protocol")
    delta = _resolve_delta(g, delta)
    half = Fraction(1, 2)

    def expand(st: _State):
        while not isinstance(st.node, ProtocolLeaf):
            st.iteration += 1
            try:
                I_abs, value, tag = _pre_query(st, g, constants, delta)
            except SimulationFailure as exc:
                return DTLeaf(BOT, failed=True, reason=exc.step)
            if I_abs is None:
                continue
            idx = I_abs.indices()

            def branch(base: _State, pos: int, answers: tuple,
                       I_abs=I_abs, value=value, tag=tag, idx=idx):
                if pos == len(idx):
                    nxt = base.clone()
                    try:
                        _post_query(nxt, g, constants, delta, I_abs, value, answers, tag, half)
                    except SimulationFailure as exc:
                        return DTLeaf(BOT, failed=True, reason=exc.step)
                    return expand(nxt)
                return DTNode(idx[pos], (
                    branch(base, pos + 1, answers + (0,)),
                    branch(base, pos + 1, answers + (1,)),
                ))

            return branch(st, 0, ())
        return DTLeaf(st.node.output)

    root = expand(_start_state(protocol, X0, Y0))
    return DecisionTree(root, protocol.n)
