"""Quartet (stacked-pair) model of RNA secondary structure.

Each binary variable selects a quartet: the pair (i, j) stacked on (i+1, j-1).
The objective sums quartet stacking energies, rewards selecting two quartets
that continue the same helix, and applies the U-A terminal term

    p * sum_{q_i in Q} sum_{q_j in QUA} q_i (1 - q_j)

expanded literally into linear and quadratic coefficients. Quartets whose base
pairs cross or share a base with a different partner may not be selected
together; :func:`to_penalty_qubo` folds those constraints into the objective.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .energy import EnergyParams, load_energy_params
from .seq_core import NucleotideSeq, PairSet, parse_nucleotide_sequence

VALID_PAIRS = frozenset({("A", "U"), ("U", "A"), ("C", "G"), ("G", "C"), ("G", "U"), ("U", "G")})
DEFAULT_MIN_LOOP = 3
DEFAULT_MIN_STEM = 3
DEFAULT_STACK_REWARD = -1.0
DEFAULT_UA_PENALTY = 0.5
UA_RULES = ("outer", "outer_or_inner")


def valid_pair(b1: str, b2: str) -> bool:
    return (b1, b2) in VALID_PAIRS


@dataclass(frozen=True)
class Quartet:
    i: int
    j: int
    outer: str  # bases at (i, j)
    inner: str  # bases at (i+1, j-1)
    energy: float

    @property
    def outer_pair(self) -> tuple[int, int]:
        return (self.i, self.j)

    @property
    def inner_pair(self) -> tuple[int, int]:
        return (self.i + 1, self.j - 1)

    @property
    def pairs(self) -> tuple[tuple[int, int], tuple[int, int]]:
        return (self.outer_pair, self.inner_pair)

    @property
    def key(self) -> tuple[int, int, int, int]:
        return (self.i, self.j, self.i + 1, self.j - 1)


def _as_seq(seq) -> NucleotideSeq:
    return seq if isinstance(seq, NucleotideSeq) else parse_nucleotide_sequence(seq)


def enumerate_quartets(seq: NucleotideSeq | str, min_loop: int = DEFAULT_MIN_LOOP,
                       params: EnergyParams | None = None,
                       min_stem: int = DEFAULT_MIN_STEM) -> list[Quartet]:
    """All stacked pairs of ``seq`` sorted by (i, j).

    A quartet needs both of its pairs valid and at least ``min_loop`` bases
    inside the inner pair. With ``min_stem > 2`` a quartet is kept only if it
    lies on a run of consecutive quartets spanning ``min_stem`` or more base
    pairs; ``min_stem=2`` keeps every stacked pair.
    """
    s = str(_as_seq(seq))
    n = len(s)
    if params is None:
        params = load_energy_params()
    found: dict[tuple[int, int], tuple[str, str]] = {}
    for i in range(1, n + 1):
        for j in range(i + min_loop + 3, n + 1):
            outer = s[i - 1] + s[j - 1]
            inner = s[i] + s[j - 2]
            if valid_pair(*outer) and valid_pair(*inner):
                found[(i, j)] = (outer, inner)

    if min_stem > 2:
        keep = set()
        for i, j in found:
            a = i
            while (a - 1, j + i - a + 1) in found:
                a -= 1
            c = i
            while (c + 1, j - (c + 1 - i)) in found:
                c += 1
            # quartets a..c span (c - a + 1) stacks, i.e. c - a + 2 pairs
            if c - a + 2 >= min_stem:
                keep.add((i, j))
        found = {k: v for k, v in found.items() if k in keep}

    return [Quartet(i, j, outer, inner, params.stack_energy(outer, inner))
            for (i, j), (outer, inner) in sorted(found.items())]


def _pairs_conflict(pairs) -> bool:
    partner: dict[int, int] = {}
    for a, b in pairs:
        for x, y in ((a, b), (b, a)):
            if partner.setdefault(x, y) != y:
                return True
    distinct = sorted(set(pairs))
    for (a, b), (c, d) in itertools.combinations(distinct, 2):
        if a < c < b < d or c < a < d < b:
            return True
    return False


def quartets_conflict(q1: Quartet, q2: Quartet) -> bool:
    """True if the two quartets' pairs cannot coexist in one planar structure."""
    return _pairs_conflict(q1.pairs + q2.pairs)


def stacking_partners(q: Quartet, quartets: list[Quartet]) -> set[int]:
    """Indices of quartets continuing ``q`` one step inward."""
    return {k for k, other in enumerate(quartets) if other.i == q.i + 1 and other.j == q.j - 1}


def ua_terminal_set(quartets: list[Quartet], rule: str = "outer") -> set[int]:
    if rule not in UA_RULES:
        raise ValueError(f"UA rule must be one of {UA_RULES}, got {rule!r}")
    out = set()
    for k, q in enumerate(quartets):
        if q.outer in ("UA", "AU") or (rule == "outer_or_inner" and q.inner in ("UA", "AU")):
            out.add(k)
    return out


@dataclass(frozen=True)
class QuartetUniverse:
    sequence: NucleotideSeq
    quartets: tuple[Quartet, ...]
    conflicts: frozenset[tuple[int, int]]  # QC, stored with a < b
    stacks: dict[int, frozenset[int]]  # QS
    ua_terminal: frozenset[int]  # QUA

    def __len__(self) -> int:
        return len(self.quartets)

    def conflicting(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.conflicts


def build_universe(seq: NucleotideSeq | str, params: EnergyParams | None = None,
                   min_loop: int = DEFAULT_MIN_LOOP, min_stem: int = DEFAULT_MIN_STEM,
                   ua_rule: str = "outer") -> QuartetUniverse:
    seq = _as_seq(seq)
    quartets = enumerate_quartets(seq, min_loop=min_loop, params=params, min_stem=min_stem)
    conflicts = frozenset(
        (a, b) for a, b in itertools.combinations(range(len(quartets)), 2)
        if quartets_conflict(quartets[a], quartets[b])
    )
    stacks = {k: frozenset(stacking_partners(q, quartets)) for k, q in enumerate(quartets)}
    return QuartetUniverse(seq, tuple(quartets), conflicts, stacks,
                           frozenset(ua_terminal_set(quartets, ua_rule)))


def _as_bits(bits) -> np.ndarray:
    if isinstance(bits, str):
        return np.array([int(c) for c in bits], dtype=np.int8)
    return np.asarray(bits, dtype=np.int8)


@dataclass(frozen=True)
class StructureModel:
    """Constrained quadratic binary model over the quartet variables."""

    universe: QuartetUniverse
    linear: np.ndarray
    quadratic: dict[tuple[int, int], float]
    constraints: tuple[tuple[int, int], ...]
    stack_reward: float
    ua_penalty: float
    offset: float = 0.0

    @property
    def num_vars(self) -> int:
        return len(self.linear)

    def objective(self, bits) -> float:
        """Direct evaluation of the quartet objective on a selection (constraints ignored)."""
        x = _as_bits(bits)
        u = self.universe
        total = sum(q.energy for q, xi in zip(u.quartets, x) if xi)
        total += self.stack_reward * sum(int(x[a] and x[b]) for a, nbrs in u.stacks.items() for b in nbrs)
        total += self.ua_penalty * sum(int(x[a]) * (1 - int(x[b]))
                                       for a in range(len(x)) for b in u.ua_terminal)
        return float(total)

    def coefficient_energy(self, bits) -> float:
        x = _as_bits(bits).astype(float)
        quad = sum(c * x[a] * x[b] for (a, b), c in self.quadratic.items())
        return float(self.offset + self.linear @ x + quad)

    def is_feasible(self, bits) -> bool:
        x = _as_bits(bits)
        return not any(x[a] and x[b] for a, b in self.constraints)


def build_model(seq: NucleotideSeq | str, params: EnergyParams | None = None,
                stack_reward: float = DEFAULT_STACK_REWARD, ua_penalty: float = DEFAULT_UA_PENALTY,
                min_loop: int = DEFAULT_MIN_LOOP, min_stem: int = DEFAULT_MIN_STEM,
                ua_rule: str = "outer", universe: QuartetUniverse | None = None) -> StructureModel:
    if universe is None:
        universe = build_universe(seq, params, min_loop=min_loop, min_stem=min_stem, ua_rule=ua_rule)
    n = len(universe)
    linear = np.array([q.energy for q in universe.quartets], dtype=float)
    quadratic: dict[tuple[int, int], float] = {}

    def add(a: int, b: int, c: float) -> None:
        key = (min(a, b), max(a, b))
        quadratic[key] = quadratic.get(key, 0.0) + c

    for a, nbrs in universe.stacks.items():
        for b in nbrs:
            add(a, b, stack_reward)
    # p * sum_i sum_{j in QUA} q_i (1 - q_j); q_i * q_i = q_i for binaries
    qua = sorted(universe.ua_terminal)
    for a in range(n):
        linear[a] += ua_penalty * len(qua)
        for b in qua:
            if a == b:
                linear[a] -= ua_penalty
            else:
                add(a, b, -ua_penalty)
    quadratic = {k: v for k, v in quadratic.items() if v != 0.0}
    return StructureModel(universe, linear, quadratic, tuple(sorted(universe.conflicts)),
                          stack_reward, ua_penalty)


@dataclass(frozen=True)
class QuboModel:
    """Unconstrained quadratic binary objective ``offset + lin.x + sum_{a<b} Q_ab x_a x_b``."""

    linear: np.ndarray
    quadratic: dict[tuple[int, int], float]
    offset: float = 0.0
    penalty: float = 0.0
    constraints: tuple[tuple[int, int], ...] = ()
    _upper: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = len(self.linear)
        upper = np.zeros((n, n))
        for (a, b), c in self.quadratic.items():
            if a == b:
                raise ValueError(f"quadratic term ({a}, {b}) must index distinct variables")
            upper[min(a, b), max(a, b)] += c
        object.__setattr__(self, "linear", np.asarray(self.linear, dtype=float))
        object.__setattr__(self, "_upper", upper)

    @property
    def num_vars(self) -> int:
        return len(self.linear)

    @property
    def upper(self) -> np.ndarray:
        return self._upper

    def symmetric(self) -> np.ndarray:
        return self._upper + self._upper.T

    def energy(self, bits) -> float:
        x = _as_bits(bits).astype(float)
        return float(self.offset + self.linear @ x + x @ self._upper @ x)

    def energies(self, states: np.ndarray) -> np.ndarray:
        """Energies for a (batch, n) 0/1 array."""
        x = np.asarray(states, dtype=float)
        return self.offset + x @ self.linear + ((x @ self._upper) * x).sum(axis=1)

    def is_feasible(self, bits) -> bool:
        x = _as_bits(bits)
        return not any(x[a] and x[b] for a, b in self.constraints)

    def feasible_mask(self, states: np.ndarray) -> np.ndarray:
        x = np.asarray(states, dtype=bool)
        mask = np.ones(len(x), dtype=bool)
        for a, b in self.constraints:
            mask &= ~(x[:, a] & x[:, b])
        return mask


def default_penalty(model: StructureModel) -> float:
    return 1.0 + 2.0 * (float(np.abs(model.linear).sum()) + sum(abs(c) for c in model.quadratic.values()))


def to_penalty_qubo(model: StructureModel, penalty: float | None = None) -> QuboModel:
    if penalty is None:
        penalty = default_penalty(model)
    if not penalty > 0:
        raise ValueError(f"penalty weight must be positive, got {penalty}")
    quad = dict(model.quadratic)
    for a, b in model.constraints:
        quad[(a, b)] = quad.get((a, b), 0.0) + penalty
    return QuboModel(model.linear.copy(), quad, model.offset, penalty, model.constraints)


@dataclass(frozen=True)
class Decoded:
    feasible: bool
    pairs: PairSet | None
    violations: tuple[tuple[int, int], ...] = ()

    @property
    def dot_bracket(self) -> str | None:
        from .seq_core import render_dot_bracket
        return None if self.pairs is None else render_dot_bracket(self.pairs)


def decode(bits, universe: QuartetUniverse) -> Decoded:
    x = _as_bits(bits)
    if len(x) != len(universe):
        raise ValueError(f"bitstring length {len(x)} does not match {len(universe)} variables")
    chosen = [k for k in range(len(x)) if x[k]]
    violations = tuple((a, b) for a, b in itertools.combinations(chosen, 2) if universe.conflicting(a, b))
    if violations:
        return Decoded(False, None, violations)
    pairs = {p for k in chosen for p in universe.quartets[k].pairs}
    return Decoded(True, PairSet(tuple(pairs), len(universe.sequence)))


def bits_to_str(bits) -> str:
    return "".join(str(int(b)) for b in bits)


def format_qubo(qubo: QuboModel) -> str:
    """Plain-text export: ``vars``/``offset`` header, then ``lin`` and ``quad`` lines (0-indexed)."""
    lines = [f"vars {qubo.num_vars} offset {qubo.offset!r}"]
    lines += [f"lin {k} {float(c)!r}" for k, c in enumerate(qubo.linear)]
    lines += [f"quad {a} {b} {float(c)!r}" for (a, b), c in sorted(qubo.quadratic.items())]
    return "\n".join(lines) + "\n"


def parse_qubo(text: str) -> QuboModel:
    lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    head = lines[0]
    if len(head) != 4 or head[0] != "vars" or head[2] != "offset":
        raise ValueError(f"bad QUBO header {' '.join(head)!r}")
    n = int(head[1])
    linear = np.zeros(n)
    quad = {}
    for parts in lines[1:]:
        if parts[0] == "lin" and len(parts) == 3:
            linear[int(parts[1])] = float(parts[2])
        elif parts[0] == "quad" and len(parts) == 4:
            quad[(int(parts[1]), int(parts[2]))] = float(parts[3])
        else:
            raise ValueError(f"bad QUBO line {' '.join(parts)!r}")
    return QuboModel(linear, quad, float(head[3]))
