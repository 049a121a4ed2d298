"""Randomized simulation with information-cost halting.

The simulator enumerates every branch of the public-coin simulation
exactly: coin choice, per-iteration message bit and density-partition
class.  Query answers come from the fixed z, so they never branch.  Two
counters ride along, K_msg charging log(1/p) per message and K_prt
charging log(1/p_geq) per partition class; a branch whose counters pass
the halting thresholds is flagged exceeded.  The report exposes both the
halting view (exceeded mass lumped into bot) and the free-running view,
which lets the consistency between the two be checked leaf by leaf.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import kernels
from .core import (
    BOT,
    CoordSet,
    Gadget,
    ProtocolLeaf,
    RandomizedProtocol,
    Restriction,
    SimulationConstants,
)
from .dist import UniformSubset, _SupportDist, deficiency, minimal_sparsity
from .errors import ConditioningError, GuardError, InputError
from .numerics import TOL
from .safety import _heavy_threshold, is_safe
from .simdet import SIM_COORD_GUARD, maximal_violating_set

FIBER_GUARD = 1 << 24
BRANCH_GUARD = 10**6


# ---------------------------------------------------------------------------
# density-restoring partition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PartitionClass:
    index: int
    I: CoordSet
    value: tuple[int, ...] | None
    prob: Fraction
    p_geq: Fraction


@dataclass(frozen=True)
class DensityPartition:
    sigma: float
    delta: float
    n: int
    classes: tuple[PartitionClass, ...]

    def selectors(self, D: _SupportDist) -> list[np.ndarray]:
        """Row masks of each class within D's support, in class order."""
        remaining = np.ones(D.size, dtype=bool)
        out = []
        for cls in self.classes:
            if cls.value is None:
                sel = remaining.copy()
            else:
                idx = list(cls.I.indices())
                sel = remaining & (
                    D.rows[:, idx] == np.asarray(cls.value, dtype=np.uint8)
                ).all(axis=1)
            out.append(sel)
            remaining &= ~sel
        return out


def density_partition(D: _SupportDist, sigma: float, delta: float) -> DensityPartition:
    """Greedy carving into classes with sigma-sparse conditionals.

    Repeatedly takes the maximal violating set of what is left and splits
    off the rows matching its most probable value; once the remainder is
    sigma-sparse it becomes the final class with I empty.  Class j's
    conditional, projected off I_j, is sigma-sparse, and its deficiency is
    at most Dm(D) + log(1/p_geq_j) - sigma*delta*|I_j|.
    """
    classes = []
    work = D
    carved = Fraction(0)
    j = 0
    while work.size:
        p_geq = 1 - carved
        I, value = maximal_violating_set(work, sigma, delta)
        if value is None:
            classes.append(PartitionClass(j, CoordSet.empty(D.n), None, p_geq, p_geq))
            break
        idx = list(I.indices())
        sel = (work.rows[:, idx] == np.asarray(value, dtype=np.uint8)).all(axis=1)
        p = Fraction(int(work.weights[sel].sum()), D.total)
        classes.append(PartitionClass(j, I, value, p, p_geq))
        carved += p
        j += 1
        if bool(sel.all()):
            break
        work = work.restrict(~sel)
    return DensityPartition(sigma, delta, D.n, tuple(classes))


# ---------------------------------------------------------------------------
# exact branch enumeration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RandBranch:
    key: str
    output: str | None
    prob: Fraction
    component: int
    transcript: str
    k_msg: float
    k_prt: float
    msg_probs: tuple[Fraction, ...]
    class_geq_probs: tuple[Fraction, ...]
    queries: int
    exceeded: bool
    exceeded_at: int | None
    degenerate_reason: str | None
    iters: tuple[dict, ...]
    choices: tuple[tuple, ...]


@dataclass
class RandExactReport:
    dist: dict[str, Fraction]
    bot_mass: Fraction
    degenerate: dict[str, Fraction]
    branches: list[RandBranch]
    branch_count: int
    rounds: int
    delta: float
    kmsg_max: float
    kprt_max: float
    constants_label: str

    def star_dist(self) -> dict[str, Fraction]:
        """Transcript mass of the free-running simulation (no halting)."""
        out: dict[str, Fraction] = {}
        for br in self.branches:
            if br.degenerate_reason is None:
                out[br.key] = out.get(br.key, Fraction(0)) + br.prob
        return out

    def star_degenerate(self) -> dict[str, Fraction]:
        out: dict[str, Fraction] = {}
        for br in self.branches:
            if br.degenerate_reason is not None:
                key = br.degenerate_reason
                out[key] = out.get(key, Fraction(0)) + br.prob
        return out


class _RState:
    __slots__ = ("X", "Y", "rho", "node", "prob", "component", "transcript",
                 "iteration", "queries", "k_msg", "k_prt", "msg_probs",
                 "geq_probs", "exceeded", "exceeded_at", "iters", "choices")

    def __init__(self, X, Y, n, node, prob, component):
        self.X = X
        self.Y = Y
        self.rho = Restriction.all_free(n)
        self.node = node
        self.prob = prob
        self.component = component
        self.transcript: list[str] = []
        self.iteration = 0
        self.queries = 0
        self.k_msg = 0.0
        self.k_prt = 0.0
        self.msg_probs: list[Fraction] = []
        self.geq_probs: list[Fraction] = []
        self.exceeded = False
        self.exceeded_at: int | None = None
        self.iters: list[dict] = []
        self.choices: list[tuple] = []

    def clone(self) -> "_RState":
        st = _RState(self.X, self.Y, self.rho.n, self.node, self.prob, self.component)
        st.rho = self.rho
        st.transcript = list(self.transcript)
        st.iteration = self.iteration
        st.queries = self.queries
        st.k_msg = self.k_msg
        st.k_prt = self.k_prt
        st.msg_probs = list(self.msg_probs)
        st.geq_probs = list(self.geq_probs)
        st.exceeded = self.exceeded
        st.exceeded_at = self.exceeded_at
        st.iters = [dict(d) for d in self.iters]
        st.choices = list(self.choices)
        return st


class _Collector:
    def __init__(self, max_branches: int):
        self.max_branches = max_branches
        self.branches: list[RandBranch] = []

    def _guard(self):
        if len(self.branches) >= self.max_branches:
            raise GuardError(f"branch enumeration exceeded {self.max_branches}")

    def terminal(self, st: _RState, output: str | None, reason: str | None):
        self._guard()
        if reason is not None:
            key = "degen:" + reason
        else:
            key = f"{st.component}|{''.join(st.transcript)}"
        self.branches.append(RandBranch(
            key, output, st.prob, st.component, "".join(st.transcript),
            st.k_msg, st.k_prt, tuple(st.msg_probs), tuple(st.geq_probs),
            st.queries, st.exceeded, st.exceeded_at, reason,
            tuple(st.iters), tuple(st.choices),
        ))


def _pot(st: _RState) -> float:
    free = st.rho.free
    dx = deficiency(st.X.project(free), range(len(free))).deficiency
    dy = deficiency(st.Y.project(free), range(len(free))).deficiency
    return dx + dy


def _oriented(st: _RState, g: Gadget):
    if st.node.owner == "A":
        return st.X, st.Y, g, True
    return st.Y, st.X, Gadget(np.ascontiguousarray(g.table.T), kind=g.kind + "-T"), False


def _advance(st: _RState, g: Gadget, z: tuple[int, ...], constants: SimulationConstants,
             delta: float, kmsg_max: float, kprt_max: float, sink: _Collector) -> None:
    if isinstance(st.node, ProtocolLeaf):
        sink.terminal(st, st.node.output, None)
        return
    st.iteration += 1
    speaker, listener, g_sp, speaker_is_x = _oriented(st, g)
    free = st.rho.free
    fidx = list(free.indices())
    listener_free = listener.project(free)
    sigma_listener = minimal_sparsity(listener_free, delta)

    # step 1: drop unsafe speaker values
    verdicts = {}
    for row in speaker.rows[:, fidx]:
        key = tuple(int(v) for v in row)
        if key not in verdicts:
            verdicts[key] = is_safe(
                key, listener_free, g_sp, constants, constants.alpha,
                sigma_y=sigma_listener, delta=delta,
            ).safe
    mask = np.fromiter(
        (verdicts[tuple(int(v) for v in row)] for row in speaker.rows[:, fidx]),
        dtype=bool, count=speaker.size,
    )
    kept = int(speaker.weights[mask].sum())
    if kept == 0:
        sink.terminal(st, None, "safe-empty")
        return
    speaker = speaker.restrict(mask)
    if speaker_is_x:
        st.X = speaker
    else:
        st.Y = speaker

    # step 2: branch on the message bit
    bits = st.node.bits[_pack(speaker.rows, speaker.alphabet)]
    w1 = int(speaker.weights[bits == 1].sum())
    probs = (Fraction(speaker.total - w1, speaker.total), Fraction(w1, speaker.total))
    for m in (0, 1):
        if probs[m] == 0:
            continue
        stm = st.clone()
        sp_m = speaker.restrict(bits == m)
        if speaker_is_x:
            stm.X = sp_m
        else:
            stm.Y = sp_m
        stm.prob = st.prob * probs[m]
        stm.transcript.append(str(m))
        stm.node = st.node.children[m]
        stm.k_msg += -math.log2(float(probs[m]))
        stm.msg_probs.append(probs[m])
        stm.choices.append(("msg", m, probs))
        _branch_classes(stm, sp_m, speaker_is_x, g, z, constants, delta,
                        sigma_listener, kmsg_max, kprt_max, sink)


def _branch_classes(st: _RState, speaker, speaker_is_x: bool, g: Gadget,
                    z: tuple[int, ...], constants: SimulationConstants, delta: float,
                    sigma_listener: float, kmsg_max: float, kprt_max: float,
                    sink: _Collector) -> None:
    free = st.rho.free
    fidx = list(free.indices())
    part = density_partition(speaker.project(free), constants.sigma, delta)
    selectors = None
    pot_before = _pot(st)
    class_probs = tuple(cls.prob for cls in part.classes)
    for cls in part.classes:
        if selectors is None:
            selectors = _class_selectors(speaker, part, fidx)
        stc = st.clone()
        sp_c = speaker.restrict(selectors[cls.index])
        if speaker_is_x:
            stc.X = sp_c
        else:
            stc.Y = sp_c
        stc.prob = st.prob * cls.prob
        stc.k_prt += -math.log2(float(cls.p_geq))
        stc.geq_probs.append(cls.p_geq)
        stc.choices.append(("class", cls.index, class_probs))
        # step 5: halting check against both counters
        if not stc.exceeded and (stc.k_msg > kmsg_max + TOL or stc.k_prt > kprt_max + TOL):
            stc.exceeded = True
            stc.exceeded_at = stc.iteration
        _after_class(stc, cls, fidx, speaker_is_x, g, z, constants, delta,
                     sigma_listener, pot_before, kmsg_max, kprt_max, sink)


def _class_selectors(speaker, part: DensityPartition, fidx: list[int]) -> list[np.ndarray]:
    remaining = np.ones(speaker.size, dtype=bool)
    out = []
    for cls in part.classes:
        if cls.value is None:
            sel = remaining.copy()
        else:
            cols = [fidx[i] for i in cls.I]
            sel = remaining & (
                speaker.rows[:, cols] == np.asarray(cls.value, dtype=np.uint8)
            ).all(axis=1)
        out.append(sel)
        remaining &= ~sel
    return out


def _after_class(st: _RState, cls: PartitionClass, fidx: list[int], speaker_is_x: bool,
                 g: Gadget, z: tuple[int, ...], constants: SimulationConstants,
                 delta: float, sigma_listener: float, pot_before: float,
                 kmsg_max: float, kprt_max: float, sink: _Collector) -> None:
    record = {
        "iteration": st.iteration,
        "I_size": len(cls.I),
        "pot_before": pot_before,
        "cost_geq": -math.log2(float(cls.p_geq)),
        "cost_gcond": 0.0,
        "cost_rec": 0.0,
        "premise_gcond": True,
        "premise_rec": True,
    }
    if cls.value is not None:
        I_abs = CoordSet.from_indices((fidx[i] for i in cls.I), st.rho.n)
        z_I = tuple(z[i] for i in I_abs.indices())
        st.rho = st.rho.fix(I_abs, z_I)
        st.queries += len(I_abs)
        listener = st.Y if speaker_is_x else st.X

        # step 7: agreement with the answers
        ok = np.ones(listener.size, dtype=bool)
        for pos, i in enumerate(I_abs.indices()):
            if speaker_is_x:
                ok &= g.table[cls.value[pos], listener.rows[:, i]] == z_I[pos]
            else:
                ok &= g.table[listener.rows[:, i], cls.value[pos]] == z_I[pos]
        w_ok = int(listener.weights[ok].sum())
        if w_ok == 0:
            record["pot_after"] = _pot(st)
            st.iters.append(record)
            sink.terminal(st, None, "g-condition-empty")
            return
        p7 = Fraction(w_ok, listener.total)
        listener = listener.restrict(ok)
        record["cost_gcond"] = -math.log2(float(p7))
        record["premise_gcond"] = bool(p7 * 2 ** (len(I_abs) + 1) >= 1)

        # step 8: canonical recovery pass on the new free block
        new_free = [i for i in range(st.rho.n) if i in st.rho.free]
        if new_free:
            universe = np.asarray(new_free, dtype=np.int64)
            thr = np.array([
                _heavy_threshold(constants, sigma_listener, delta, g.b, j)
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
        p8 = Fraction(w_keep, listener.total)
        floor = 1.0 - 2.0 ** (-constants.alpha * delta)
        if not float(p8) > floor - TOL:
            record["pot_after"] = _pot(st)
            st.iters.append(record)
            sink.terminal(st, None, "recovery")
            return
        listener = listener.restrict(keep)
        record["cost_rec"] = -math.log2(float(p8))
        record["premise_rec"] = True
        if speaker_is_x:
            st.Y = listener
        else:
            st.X = listener
    record["pot_after"] = _pot(st)
    st.iters.append(record)
    _advance(st, g, z, constants, delta, kmsg_max, kprt_max, sink)


def _pack(rows: np.ndarray, alphabet: int) -> np.ndarray:
    codes = np.zeros(rows.shape[0], dtype=np.int64)
    for i in range(rows.shape[1]):
        codes = codes * alphabet + rows[:, i]
    return codes


def simulate_rand_exact(
    rp: RandomizedProtocol,
    g: Gadget,
    z,
    constants: SimulationConstants,
    halting: bool = True,
    max_branches: int = BRANCH_GUARD,
    X0=None,
    Y0=None,
    delta: float | None = None,
) -> RandExactReport:
    """Exact branch-by-branch run of the halting simulation on one z.

    ``dist`` collects transcript mass that never tripped the counters;
    exceeded mass is summed into ``bot_mass`` (the halting rule would have
    cut those branches at the trip point, and probability mass is identical
    either way).  Recovery shortfalls and emptied conditionings land in
    ``degenerate`` keyed by reason.  ``halting=False`` reports the
    free-running distribution instead, with nothing lumped into bot.
    """
    bits = tuple(int(ch) for ch in z)
    if len(bits) != rp.n or any(b not in (0, 1) for b in bits):
        raise InputError("z must be an n-bit string")
    if g.alphabet != rp.alphabet:
        raise InputError("gadget alphabet does not match the protocol")
    if rp.n > SIM_COORD_GUARD:
        raise GuardError(f"simulation guarded at n <= {SIM_COORD_GUARD}")
    if delta is None:
        from .disc import gadget_delta

        delta = gadget_delta(g)
    C = rp.depth
    kmsg_max = constants.kmsg_threshold(C, delta)
    kprt_max = constants.kprt_threshold(C, delta)
    X = UniformSubset.full(rp.alphabet, rp.n) if X0 is None else X0
    Y = UniformSubset.full(rp.alphabet, rp.n) if Y0 is None else Y0
    if X.n != rp.n or Y.n != rp.n:
        raise InputError("support width does not match the protocol")
    coin_probs = tuple(p for p, _ in rp.components)
    sink = _Collector(max_branches)
    for r, (q, tree) in enumerate(rp.components):
        st = _RState(X, Y, rp.n, tree.root, q, r)
        st.choices.append(("coin", r, coin_probs))
        _advance(st, g, bits, constants, delta, kmsg_max, kprt_max, sink)

    dist: dict[str, Fraction] = {}
    degenerate: dict[str, Fraction] = {}
    bot = Fraction(0)
    for br in sink.branches:
        counts_as_bot = halting and br.exceeded
        if counts_as_bot:
            bot += br.prob
        elif br.degenerate_reason is not None:
            degenerate[br.degenerate_reason] = (
                degenerate.get(br.degenerate_reason, Fraction(0)) + br.prob
            )
        else:
            dist[br.key] = dist.get(br.key, Fraction(0)) + br.prob
    return RandExactReport(
        dist, bot, degenerate, sink.branches, len(sink.branches), C, delta,
        kmsg_max, kprt_max, constants.label,
    )


# ---------------------------------------------------------------------------
# seeded sampler over the recorded branch structure
# ---------------------------------------------------------------------------


def simulate_rand_sample(
    rp: RandomizedProtocol,
    g: Gadget,
    z,
    seed: int,
    constants: SimulationConstants,
    reps: int = 10000,
    report: RandExactReport | None = None,
) -> dict[str, int]:
    """Sample the halting simulation ``reps`` times with a fixed seed.

    Walks the branch structure recorded by the exact run, drawing each coin,
    message bit and partition class by its local probability; outcomes are
    keyed like the exact report (exceeded branches count as the bot symbol).
    """
    if report is None:
        report = simulate_rand_exact(rp, g, z, constants)
    root: dict = {}
    for br in report.branches:
        node = root
        for step in br.choices:
            label, idx, probs = step
            if "probs" not in node:
                node["probs"] = [float(p) for p in probs]
                node["edges"] = {}
            node = node["edges"].setdefault(idx, {})
        if br.exceeded:
            node["outcome"] = BOT
        elif br.degenerate_reason is not None:
            node["outcome"] = "degen:" + br.degenerate_reason
        else:
            node["outcome"] = br.key
    rng = random.Random(seed)
    counts: dict[str, int] = {}
    for _ in range(reps):
        node = root
        while "outcome" not in node:
            probs = node["probs"]
            u = rng.random()
            acc = 0.0
            pick = None
            for idx in sorted(node["edges"]):
                acc += probs[idx]
                if u < acc:
                    pick = idx
                    break
            if pick is None:
                pick = max(node["edges"])
            node = node["edges"][pick]
        counts[node["outcome"]] = counts.get(node["outcome"], 0) + 1
    return counts


# ---------------------------------------------------------------------------
# target distribution and distance reports
# ---------------------------------------------------------------------------


def pi_prime_dist(rp: RandomizedProtocol, g: Gadget, z) -> dict[str, Fraction]:
    """Transcript distribution of the protocol on uniform fiber inputs.

    Enumerates {(x, y) : g^n(x, y) = z} outright, so it is the independent
    route the simulated distribution is compared against.
    """
    bits = tuple(int(ch) for ch in z)
    if len(bits) != rp.n or any(b not in (0, 1) for b in bits):
        raise InputError("z must be an n-bit string")
    L, n = rp.alphabet, rp.n
    if L ** (2 * n) > FIBER_GUARD:
        raise GuardError("fiber enumeration guarded at |Lambda|^(2n) <= 2^24")
    allowed = [[
        [yy for yy in range(L) if g.table[xx, yy] == bits[i]]
        for xx in range(L)
    ] for i in range(n)]
    pairs: list[tuple[tuple, tuple]] = []
    for xcode in range(L**n):
        x = _unpack_code(xcode, L, n)
        pools = [allowed[i][x[i]] for i in range(n)]
        if any(not pool for pool in pools):
            continue
        for y in _product(pools):
            pairs.append((x, y))
    if not pairs:
        raise ConditioningError("empty fiber", description=f"z={''.join(map(str, bits))}")
    out: dict[str, Fraction] = {}
    unit = Fraction(1, len(pairs))
    for r, (q, tree) in enumerate(rp.components):
        for x, y in pairs:
            key = f"{r}|{_run_transcript(tree, x, y)}"
            out[key] = out.get(key, Fraction(0)) + q * unit
    return out


def _run_transcript(tree, x, y) -> str:
    from .core import protocol_run

    transcript, _ = protocol_run(tree, x, y)
    return transcript


def _unpack_code(code: int, alphabet: int, n: int) -> tuple[int, ...]:
    out = [0] * n
    for i in range(n - 1, -1, -1):
        out[i] = code % alphabet
        code //= alphabet
    return tuple(out)


def _product(pools):
    if not pools:
        yield ()
        return
    for head in pools[0]:
        for rest in _product(pools[1:]):
            yield (head,) + rest


@dataclass(frozen=True)
class TvReport:
    tv_halting: Fraction
    tv_free: Fraction
    bound_halting: float
    bound_free: float
    bound_applies: bool


def tv_report(report: RandExactReport, target: dict[str, Fraction]) -> TvReport:
    """Total variation of both simulation views against the target.

    The halting view pays its bot and degenerate mass in full since the
    target never outputs them.  Bounds follow the (1 + rounds) and rounds
    multiples of 2^(-delta/20); they only bind once they drop below 1.
    """
    extra = report.bot_mass + sum(report.degenerate.values(), Fraction(0))
    tv_h = _tv(report.dist, target, extra)
    star_extra = sum(report.star_degenerate().values(), Fraction(0))
    tv_f = _tv(report.star_dist(), target, star_extra)
    unit = 2.0 ** (-report.delta / 20.0)
    bound_h = (1 + report.rounds) * unit
    bound_f = report.rounds * unit
    return TvReport(tv_h, tv_f, bound_h, bound_f, bound_h < 1.0)


def _tv(left: dict[str, Fraction], right: dict[str, Fraction], extra: Fraction) -> Fraction:
    keys = set(left) | set(right)
    gap = sum((abs(left.get(k, Fraction(0)) - right.get(k, Fraction(0))) for k in keys),
              Fraction(0))
    return (gap + extra) / 2


# ---------------------------------------------------------------------------
# Erlang tail
# ---------------------------------------------------------------------------


def erlang_tail(k: int, lam: float, t: float) -> float:
    """P[Erlang(k, lam) > t], evaluated stably in the log domain."""
    if k < 1 or lam <= 0 or t < 0:
        raise InputError("erlang_tail wants k >= 1, lam > 0, t >= 0")
    if t == 0:
        return 1.0
    llt = math.log(lam * t)
    logs = [-lam * t + i * llt - math.lgamma(i + 1) for i in range(k)]
    top = max(logs)
    return math.exp(top) * sum(math.exp(v - top) for v in logs)


@dataclass(frozen=True)
class ErlangChainReport:
    rounds: int
    delta: float
    t: float
    tail: float
    log2_tail: float
    log2_poisson_form: float
    log2_stirling_form: float
    log2_closed_form: float
    log2_target: float
    doubling_ok: bool
    holds: bool


def erlang_chain(rounds: int, delta: float, lam: float = math.log(2.0)) -> ErlangChainReport:
    """The tail bound chain at t = 5*rounds + 2*delta, stage by stage.

    tail <= 2^-t (lam t)^C / C!  <= 2^-t (lam t e / C)^C
         <= 2^-[(5 - log2(5 lam e^2)) C + (2 - (2/5) log2 e) delta] <= 2^-delta,
    the first step using that consecutive Poisson terms at least double
    (needs lam*t >= 2*rounds, true throughout the range of interest).
    """
    if rounds < 1 or delta <= 0:
        raise InputError("erlang_chain wants rounds >= 1 and delta > 0")
    C = rounds
    t = 5.0 * C + 2.0 * delta
    lt = lam * t
    tail = erlang_tail(C, lam, t)
    log2_tail = math.log2(tail) if tail > 0 else -math.inf
    s1 = -t + C * math.log2(lt) - math.log2(math.factorial(C))
    s2 = -t + C * math.log2(lt * math.e / C)
    s3 = -(5.0 - math.log2(5.0 * lam * math.e**2)) * C - (2.0 - 0.4 * math.log2(math.e)) * delta
    s4 = -delta
    holds = (log2_tail <= s1 + TOL and s1 <= s2 + TOL and s2 <= s3 + TOL and s3 <= s4 + TOL)
    return ErlangChainReport(C, delta, t, tail, log2_tail, s1, s2, s3, s4,
                             doubling_ok=lt >= 2 * C, holds=holds)
