"""Core objects: gadgets, coordinate sets, restrictions, protocols, trees.

Packing conventions (used consistently everywhere):

* tuples over the alphabet are packed mixed-radix with coordinate 0 as the
  most significant digit, so numeric order of codes = lexicographic order
  of tuples;
* n-bit strings z are packed with bit i (an int's bit ``1 << i``) holding
  coordinate i, which composes naturally with coordinate bitmasks.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import InputError

OWNER_A = "A"
OWNER_B = "B"

# Padding output for search problems on strings the caller left unspecified.
BOT = "⊥"


# ---------------------------------------------------------------------------
# coordinate sets and restrictions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoordSet:
    """Subset of the coordinate positions [0, n), stored as a bitmask."""

    mask: int
    n: int

    def __post_init__(self):
        if self.n < 0 or not 0 <= self.mask < (1 << self.n):
            raise InputError(f"bad coordinate mask {self.mask:#x} for n={self.n}")

    @classmethod
    def from_indices(cls, indices: Iterable[int], n: int) -> "CoordSet":
        mask = 0
        for i in indices:
            if not 0 <= i < n:
                raise InputError(f"coordinate {i} out of range [0, {n})")
            mask |= 1 << i
        return cls(mask, n)

    @classmethod
    def empty(cls, n: int) -> "CoordSet":
        return cls(0, n)

    @classmethod
    def full(cls, n: int) -> "CoordSet":
        return cls((1 << n) - 1, n)

    def indices(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n) if self.mask >> i & 1)

    def __len__(self) -> int:
        return bin(self.mask).count("1")

    def __iter__(self):
        return iter(self.indices())

    def __contains__(self, i: int) -> bool:
        return 0 <= i < self.n and bool(self.mask >> i & 1)

    def __or__(self, other: "CoordSet") -> "CoordSet":
        self._check(other)
        return CoordSet(self.mask | other.mask, self.n)

    def __and__(self, other: "CoordSet") -> "CoordSet":
        self._check(other)
        return CoordSet(self.mask & other.mask, self.n)

    def __sub__(self, other: "CoordSet") -> "CoordSet":
        self._check(other)
        return CoordSet(self.mask & ~other.mask, self.n)

    def complement(self) -> "CoordSet":
        return CoordSet(((1 << self.n) - 1) ^ self.mask, self.n)

    def issubset(self, other: "CoordSet") -> bool:
        self._check(other)
        return self.mask & ~other.mask == 0

    def _check(self, other: "CoordSet") -> None:
        if self.n != other.n:
            raise InputError("coordinate sets over different n")

    def __repr__(self) -> str:
        return f"CoordSet({{{','.join(map(str, self.indices()))}}}, n={self.n})"


def submasks(mask: int, nonempty: bool = False):
    """All submasks of ``mask`` in increasing numeric order."""
    out = []
    sub = 0
    while True:
        out.append(sub)
        if sub == mask:
            break
        sub = (sub - mask) & mask
    out.sort()
    return out[1:] if nonempty else out


@dataclass(frozen=True)
class Restriction:
    """Partial assignment in {0,1,*}^n; None entries are the live coordinates."""

    bits: tuple

    def __post_init__(self):
        for b in self.bits:
            if b not in (0, 1, None):
                raise InputError(f"restriction entry {b!r} not in {{0,1,*}}")

    @classmethod
    def all_free(cls, n: int) -> "Restriction":
        return cls(tuple([None] * n))

    @classmethod
    def from_pattern(cls, pattern: str) -> "Restriction":
        table = {"0": 0, "1": 1, "*": None}
        try:
            return cls(tuple(table[ch] for ch in pattern))
        except KeyError as exc:
            raise InputError(f"bad restriction character {exc.args[0]!r}") from None

    @property
    def n(self) -> int:
        return len(self.bits)

    @property
    def free(self) -> CoordSet:
        return CoordSet.from_indices(
            (i for i, b in enumerate(self.bits) if b is None), self.n
        )

    @property
    def fixed(self) -> CoordSet:
        return self.free.complement()

    def fixed_values(self) -> tuple[tuple[int, int], ...]:
        return tuple((i, b) for i, b in enumerate(self.bits) if b is not None)

    def fix(self, coords: CoordSet, values: Sequence[int]) -> "Restriction":
        idx = coords.indices()
        if len(idx) != len(values):
            raise InputError("coordinate/value length mismatch")
        bits = list(self.bits)
        for i, v in zip(idx, values):
            if bits[i] is not None:
                raise InputError(f"coordinate {i} already fixed")
            if v not in (0, 1):
                raise InputError(f"fixed value {v!r} not a bit")
            bits[i] = v
        return Restriction(tuple(bits))

    def pattern(self) -> str:
        return "".join("*" if b is None else str(b) for b in self.bits)


# ---------------------------------------------------------------------------
# gadgets
# ---------------------------------------------------------------------------


class Gadget:
    """Two-party predicate g: Lambda x Lambda -> {0,1} given by its table."""

    __slots__ = ("table", "kind")

    def __init__(self, table, kind: str = "custom"):
        arr = np.asarray(table, dtype=np.uint8)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise InputError("gadget table must be square")
        if arr.shape[0] < 2:
            raise InputError("gadget alphabet must have at least 2 symbols")
        if arr.max(initial=0) > 1:
            raise InputError("gadget table entries must be bits")
        arr.setflags(write=False)
        self.table = arr
        self.kind = kind

    @property
    def alphabet(self) -> int:
        return int(self.table.shape[0])

    @property
    def b(self) -> float:
        """Symbol length in bits, log2 |Lambda|; not necessarily an integer."""
        return math.log2(self.alphabet)

    def __call__(self, u: int, v: int) -> int:
        return int(self.table[u, v])

    def __eq__(self, other) -> bool:
        return isinstance(other, Gadget) and np.array_equal(self.table, other.table)

    def __hash__(self) -> int:
        return hash((self.table.shape[0], self.table.tobytes()))

    def __repr__(self) -> str:
        return f"Gadget(kind={self.kind!r}, alphabet={self.alphabet})"


def make_gadget(
    kind: str,
    *,
    alphabet: int | None = None,
    d: int | None = None,
    value: int | None = None,
    seed: int | None = None,
) -> Gadget:
    """Construct one of the named gadget families.

    * ``xor`` / ``and``: the 2x2 classics.
    * ``constant``: all cells equal to ``value``.
    * ``inner_product``: symbols are bit strings of length log2(alphabet)
      and g takes the inner product of the length-``d`` prefixes; requires a
      power-of-two alphabet and 1 <= d <= log2(alphabet).
    * ``random``: each cell an independent fair bit from ``seed``.
    """
    if kind == "xor":
        if alphabet not in (None, 2):
            raise InputError("xor gadget is defined over a binary alphabet")
        return Gadget([[0, 1], [1, 0]], kind="xor")
    if kind == "and":
        if alphabet not in (None, 2):
            raise InputError("and gadget is defined over a binary alphabet")
        return Gadget([[0, 0], [0, 1]], kind="and")
    if kind == "constant":
        if value not in (0, 1):
            raise InputError("constant gadget needs value in {0,1}")
        size = 2 if alphabet is None else alphabet
        return Gadget(np.full((size, size), value, dtype=np.uint8), kind=f"constant{value}")
    if kind == "inner_product":
        if d is None or d < 1:
            raise InputError("inner_product gadget needs prefix length d >= 1")
        size = (1 << d) if alphabet is None else alphabet
        k = size.bit_length() - 1
        if size != 1 << k:
            raise InputError("inner_product gadget needs a power-of-two alphabet")
        if d > k:
            raise InputError(f"prefix length d={d} exceeds log2(alphabet)={k}")
        shift = k - d
        u = np.arange(size, dtype=np.int64) >> shift
        prods = u[:, None] & u[None, :]
        table = np.zeros((size, size), dtype=np.uint8)
        for _ in range(d):
            table ^= (prods & 1).astype(np.uint8)
            prods >>= 1
        return Gadget(table, kind=f"ip(d={d})")
    if kind == "random":
        if seed is None:
            raise InputError("random gadget needs a seed")
        size = 2 if alphabet is None else alphabet
        rng = np.random.default_rng(seed)
        return Gadget(rng.integers(0, 2, size=(size, size), dtype=np.uint8), kind=f"random({seed})")
    raise InputError(f"unknown gadget kind {kind!r}")


def gadget_block_eval(g: Gadget, x: Sequence[int], y: Sequence[int], coords=None) -> tuple[int, ...]:
    """Apply g coordinate-wise; with ``coords`` restrict to those positions."""
    if len(x) != len(y):
        raise InputError("inputs of different length")
    idx = range(len(x)) if coords is None else coords.indices()
    return tuple(int(g.table[x[i], y[i]]) for i in idx)


def gadget_xor_eval(g: Gadget, coords: CoordSet, x: Sequence[int], y: Sequence[int]) -> int:
    """Parity of g over the coordinates in ``coords``; the empty set is rejected."""
    if len(coords) == 0:
        raise InputError("xor of gadget values over the empty coordinate set")
    bit = 0
    for i in coords:
        bit ^= int(g.table[x[i], y[i]])
    return bit


def pack_tuple(t: Sequence[int], alphabet: int) -> int:
    code = 0
    for v in t:
        code = code * alphabet + int(v)
    return code


def unpack_tuple(code: int, alphabet: int, n: int) -> tuple[int, ...]:
    out = [0] * n
    for i in range(n - 1, -1, -1):
        out[i] = code % alphabet
        code //= alphabet
    return tuple(out)


def z_code(z: Sequence[int] | str) -> int:
    """Pack an n-bit string; bit i of the result is coordinate i."""
    bits = [int(ch) for ch in z] if isinstance(z, str) else [int(v) for v in z]
    code = 0
    for i, b in enumerate(bits):
        if b not in (0, 1):
            raise InputError(f"z entry {b!r} not a bit")
        code |= b << i
    return code


def z_bits(code: int, n: int) -> tuple[int, ...]:
    return tuple(code >> i & 1 for i in range(n))


# ---------------------------------------------------------------------------
# search problems
# ---------------------------------------------------------------------------


class SearchProblem:
    """Total search relation on n-bit strings.

    ``mapping`` gives the feasible outputs per string; strings not mentioned
    get the singleton padding output so the relation stays total.
    """

    def __init__(self, n: int, mapping: Mapping):
        if n < 1:
            raise InputError("search problem needs n >= 1")
        self.n = n
        self._table: dict[int, frozenset[str]] = {}
        for key, outs in mapping.items():
            code = z_code(key) if not isinstance(key, int) else key
            if not 0 <= code < 1 << n:
                raise InputError(f"search key {key!r} out of range for n={n}")
            outs = frozenset(str(o) for o in outs)
            if not outs:
                raise InputError("empty output set; omit the key instead")
            self._table[code] = outs

    def outputs(self, z) -> frozenset[str]:
        code = z if isinstance(z, int) else z_code(z)
        return self._table.get(code, frozenset({BOT}))

    def specified(self) -> dict[int, frozenset[str]]:
        return dict(self._table)


# ---------------------------------------------------------------------------
# protocol trees
# ---------------------------------------------------------------------------


class ProtocolLeaf:
    __slots__ = ("output",)

    def __init__(self, output: str):
        self.output = str(output)


class ProtocolNode:
    """Internal node: the owner sends one bit computed from their full input.

    ``bits`` has one entry per packed input tuple (length alphabet**n);
    ``rule`` is the surface syntax the node was built from, kept so trees
    round-trip through the text format.
    """

    __slots__ = ("owner", "bits", "rule", "children")

    def __init__(self, owner: str, bits: np.ndarray, rule: str, children):
        if owner not in (OWNER_A, OWNER_B):
            raise InputError(f"node owner must be A or B, got {owner!r}")
        self.owner = owner
        self.bits = np.asarray(bits, dtype=np.uint8)
        self.rule = rule
        self.children = tuple(children)
        if len(self.children) != 2:
            raise InputError("protocol node needs exactly two children")


class ProtocolTree:
    """Deterministic two-party protocol on Lambda^n x Lambda^n."""

    def __init__(self, root, n: int, alphabet: int):
        if n < 1:
            raise InputError("protocol needs n >= 1")
        if n == 1:
            warnings.warn("n = 1 composed instance; most regime bounds are vacuous", stacklevel=2)
        self.root = root
        self.n = n
        self.alphabet = alphabet
        self.depth = self._depth(root)
        self._validate(root)

    def _depth(self, node) -> int:
        if isinstance(node, ProtocolLeaf):
            return 0
        return 1 + max(self._depth(ch) for ch in node.children)

    def _validate(self, node) -> None:
        if isinstance(node, ProtocolLeaf):
            return
        want = self.alphabet**self.n
        if node.bits.shape != (want,):
            raise InputError(f"node table has {node.bits.shape[0]} entries, wants {want}")
        if node.bits.max(initial=0) > 1:
            raise InputError("node table entries must be bits")
        for ch in node.children:
            self._validate(ch)

    def leaves(self):
        out = []

        def walk(node):
            if isinstance(node, ProtocolLeaf):
                out.append(node)
            else:
                for ch in node.children:
                    walk(ch)

        walk(self.root)
        return out


def node_from_rule(owner: str, rule: str, n: int, alphabet: int, children) -> ProtocolNode:
    """Build a node from the surface rule syntax.

    ``table:<digits>`` lists the bit per packed input, ``bit:i:j`` sends bit j
    of the owner's i-th symbol, ``const:b`` sends a constant.
    """
    size = alphabet**n
    if rule.startswith("table:"):
        digits = rule[len("table:"):]
        if len(digits) != size or set(digits) - {"0", "1"}:
            raise InputError(f"table rule wants {size} bits")
        bits = np.frombuffer(digits.encode(), dtype=np.uint8) - ord("0")
    elif rule.startswith("bit:"):
        try:
            _, i_s, j_s = rule.split(":")
            i, j = int(i_s), int(j_s)
        except ValueError:
            raise InputError(f"bad bit rule {rule!r}") from None
        if not 0 <= i < n or j < 0:
            raise InputError(f"bit rule out of range {rule!r}")
        bits = np.zeros(size, dtype=np.uint8)
        for code in range(size):
            sym = unpack_tuple(code, alphabet, n)[i]
            bits[code] = sym >> j & 1
    elif rule.startswith("const:"):
        b = rule[len("const:"):]
        if b not in ("0", "1"):
            raise InputError(f"bad const rule {rule!r}")
        bits = np.full(size, int(b), dtype=np.uint8)
    else:
        raise InputError(f"unknown node rule {rule!r}")
    return ProtocolNode(owner, bits, rule, children)


def protocol_run(tree: ProtocolTree, x: Sequence[int], y: Sequence[int]) -> tuple[str, str]:
    """Execute the protocol on a concrete input pair; returns (transcript, output)."""
    if len(x) != tree.n or len(y) != tree.n:
        raise InputError("input length does not match protocol n")
    xcode = pack_tuple(x, tree.alphabet)
    ycode = pack_tuple(y, tree.alphabet)
    node = tree.root
    transcript = []
    while not isinstance(node, ProtocolLeaf):
        bit = int(node.bits[xcode if node.owner == OWNER_A else ycode])
        transcript.append(str(bit))
        node = node.children[bit]
    return "".join(transcript), node.output


class RandomizedProtocol:
    """Mixture of deterministic protocol trees with exact rational weights."""

    def __init__(self, components: Sequence[tuple[Fraction, ProtocolTree]]):
        if not components:
            raise InputError("randomized protocol needs at least one component")
        total = Fraction(0)
        n = components[0][1].n
        alphabet = components[0][1].alphabet
        for p, tree in components:
            if not isinstance(p, Fraction) or p <= 0:
                raise InputError("component weights must be positive rationals")
            if tree.n != n or tree.alphabet != alphabet:
                raise InputError("components disagree on n or alphabet")
            total += p
        if total != 1:
            raise InputError(f"component weights sum to {total}, not 1")
        self.components = tuple(components)
        self.n = n
        self.alphabet = alphabet
        self.depth = max(tree.depth for _, tree in components)


# ---------------------------------------------------------------------------
# decision trees
# ---------------------------------------------------------------------------


class DTLeaf:
    __slots__ = ("output", "failed", "reason")

    def __init__(self, output: str, failed: bool = False, reason: str | None = None):
        self.output = str(output)
        self.failed = failed
        self.reason = reason


class DTNode:
    __slots__ = ("coord", "children")

    def __init__(self, coord: int, children):
        self.coord = coord
        self.children = tuple(children)
        if len(self.children) != 2:
            raise InputError("decision node needs exactly two children")


class DecisionTree:
    """Binary decision tree querying coordinates of an n-bit string."""

    def __init__(self, root, n: int):
        self.root = root
        self.n = n
        self.depth = self._check(root, frozenset())

    def _check(self, node, seen) -> int:
        if isinstance(node, DTLeaf):
            return 0
        if not 0 <= node.coord < self.n:
            raise InputError(f"query coordinate {node.coord} out of range")
        if node.coord in seen:
            raise InputError(f"coordinate {node.coord} queried twice on one path")
        seen = seen | {node.coord}
        return 1 + max(self._check(ch, seen) for ch in node.children)


def decision_tree_run(tree: DecisionTree, z: Sequence[int] | str) -> tuple[str, tuple[int, ...]]:
    """Evaluate the tree on z; returns (output, coordinates queried in order)."""
    bits = [int(ch) for ch in z] if isinstance(z, str) else [int(v) for v in z]
    if len(bits) != tree.n:
        raise InputError("z length does not match tree n")
    node = tree.root
    asked = []
    while not isinstance(node, DTLeaf):
        asked.append(node.coord)
        node = node.children[bits[node.coord]]
    return node.output, tuple(asked)


# ---------------------------------------------------------------------------
# simulation constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimulationConstants:
    """Bundle of the tunable constants a simulation run is parameterised by.

    ``kmsg_threshold`` / ``kprt_threshold`` map (C, delta) — protocol depth
    and gadget discrepancy exponent — to the halting thresholds on the
    accumulated message and partition information.
    """

    c: float
    sigma: float
    alpha: float
    gamma: float
    kmsg_threshold: Callable[[float, float], float] = field(compare=False)
    kprt_threshold: Callable[[float, float], float] = field(compare=False)
    strict_mode: bool = False
    label: str = "custom"

    def heavy_sigma(self, sigma_y: float) -> float:
        """Sparsity level used by the heaviness thresholds."""
        return sigma_y + 4.0 / self.c


def _kmsg_default(c_bits: float, delta: float) -> float:
    return c_bits + delta


def _kprt_default(c_bits: float, delta: float) -> float:
    return 5.0 * c_bits + 2.0 * delta


def det_paper() -> SimulationConstants:
    """Constant profile of the deterministic analysis at full strength."""
    return SimulationConstants(
        c=200.0, sigma=0.25, alpha=1 / 200, gamma=1 / 200,
        kmsg_threshold=_kmsg_default, kprt_threshold=_kprt_default,
        label="det-paper",
    )


def rand_paper() -> SimulationConstants:
    """Constant profile of the randomized analysis at full strength."""
    return SimulationConstants(
        c=1000.0, sigma=0.1 + 2 / 1000, alpha=0.1, gamma=0.1,
        kmsg_threshold=_kmsg_default, kprt_threshold=_kprt_default,
        label="rand-paper",
    )


def det_desk(c: float = 4.0) -> SimulationConstants:
    """Deterministic profile rescaled so small gadgets are inside the regime.

    The asymptotic profile assumes delta >= c log n, which no desk-size
    gadget satisfies at c = 200; this keeps the same shape with a small c.
    """
    return SimulationConstants(
        c=c, sigma=0.25, alpha=0.25, gamma=1 / c,
        kmsg_threshold=_kmsg_default, kprt_threshold=_kprt_default,
        label="det-desk",
    )


def rand_desk(c: float = 4.0) -> SimulationConstants:
    """Randomized profile rescaled the same way as det_desk.

    sigma stays below 1/delta for two-bit gadgets so a single message's
    worth of deficiency already trips the density fix; the asymptotic
    sigma = 1/10 + 2/c would let skew accumulate across rounds at this
    scale and starve the partition of classes.
    """
    return SimulationConstants(
        c=c, sigma=0.25, alpha=0.1, gamma=0.1,
        kmsg_threshold=_kmsg_default, kprt_threshold=_kprt_default,
        label="rand-desk",
    )


PROFILES = {
    "det-paper": det_paper,
    "rand-paper": rand_paper,
    "det-desk": det_desk,
    "rand-desk": rand_desk,
}
