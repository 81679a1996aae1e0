"""Codon usage tables, codon scoring terms, CAI and the codon-selection solver.

The selection problem picks one synonymous codon per residue to minimise

    theta_c * sum(gc) + theta_p * sum(p) + theta_r * sum(repeat(adjacent))

where ``p`` is the log usage frequency (``rarity_sign="log"``, the default) or
its negation, the nonnegative rarity penalty (``rarity_sign="neg_log"``).

Only neighbouring positions interact, so the problem is a shortest path through
a layered graph and :func:`solve_codon` solves it exactly by dynamic
programming.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from importlib import resources
from os import PathLike
from typing import Iterable, Sequence

import numpy as np

from .seq_core import AMINO_ACIDS, STANDARD_CODE, AminoAcidSeq, NucleotideSeq, SequenceError

REPEAT_RULES = ("run_minus_one_squared", "run_squared_minus_one")
RARITY_SIGNS = ("neg_log", "log")
BRUTE_FORCE_LIMIT = 10**7
_TIE_TOL = 1e-9


class CodonTableError(ValueError):
    pass


@dataclass(frozen=True)
class CodonUsage:
    codon: str
    amino_acid: str
    frequency: float
    weight: float
    rarity: float
    gc: int


@dataclass(frozen=True)
class CodonTable:
    """Synonymous codons per amino acid, each list sorted alphabetically by codon."""

    entries: dict[str, tuple[CodonUsage, ...]]
    _by_codon: dict[str, CodonUsage] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        by_codon = {u.codon: u for usages in self.entries.values() for u in usages}
        object.__setattr__(self, "_by_codon", by_codon)

    def codons(self, amino_acid: str) -> tuple[CodonUsage, ...]:
        try:
            return self.entries[amino_acid]
        except KeyError:
            raise CodonTableError(f"no codons for amino acid {amino_acid!r}") from None

    def usage(self, codon: str) -> CodonUsage:
        try:
            return self._by_codon[codon]
        except KeyError:
            raise CodonTableError(f"codon {codon!r} not in table") from None

    def amino_acid_of(self, codon: str) -> str:
        if codon not in self._by_codon:
            raise SequenceError(f"unknown codon {codon!r}")
        return self._by_codon[codon].amino_acid

    def __contains__(self, codon: str) -> bool:
        return codon in self._by_codon


def _sign(rarity_sign: str) -> float:
    if rarity_sign == "log":
        return -1.0
    if rarity_sign == "neg_log":
        return 1.0
    raise ValueError(f"rarity sign must be one of {RARITY_SIGNS}, got {rarity_sign!r}")


def build_codon_table(rows: Iterable[tuple[str, str, float]], require_all: bool = True) -> CodonTable:
    """Build a table from ``(amino_acid, codon, frequency)`` records."""
    grouped: dict[str, dict[str, float]] = {}
    for aa, codon, freq in rows:
        if aa not in AMINO_ACIDS:
            raise CodonTableError(f"unknown amino acid {aa!r}")
        if len(codon) != 3 or any(b not in "UACG" for b in codon):
            raise CodonTableError(f"malformed codon {codon!r}")
        if STANDARD_CODE[codon] != aa:
            raise CodonTableError(f"codon {codon} encodes {STANDARD_CODE[codon]}, not {aa}")
        if not freq > 0:
            raise CodonTableError(f"frequency for {codon} must be positive, got {freq}")
        per_aa = grouped.setdefault(aa, {})
        if codon in per_aa or any(codon in g for g in grouped.values() if g is not per_aa):
            raise CodonTableError(f"duplicate codon {codon}")
        per_aa[codon] = float(freq)

    if require_all:
        missing = [aa for aa in AMINO_ACIDS if aa not in grouped]
        if missing:
            raise CodonTableError(f"missing amino acids: {''.join(missing)}")

    entries = {}
    for aa, freqs in grouped.items():
        total = sum(freqs.values())
        if abs(total - 1.0) > 0.02:
            raise CodonTableError(f"frequencies for {aa} sum to {total:.3f}, expected 1")
        top = max(freqs.values())
        entries[aa] = tuple(
            CodonUsage(codon=c, amino_acid=aa, frequency=f, weight=f / top,
                       rarity=-math.log(f), gc=gc_count(c))
            for c, f in sorted(freqs.items())
        )
    return CodonTable(entries)


def parse_codon_table(text: str) -> CodonTable:
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise CodonTableError(f"line {lineno}: expected 'AA,codon,frequency', got {raw!r}")
        aa, codon, freq = parts
        if aa == "*":  # stop codons are out of scope
            continue
        try:
            value = float(freq)
        except ValueError:
            raise CodonTableError(f"line {lineno}: bad frequency {freq!r}") from None
        rows.append((aa.upper(), codon.upper().replace("T", "U"), value))
    if not rows:
        raise CodonTableError("codon table has no entries")
    return build_codon_table(rows)


def load_codon_table(source: str | PathLike | None = None) -> CodonTable:
    """Load a codon table file; ``None`` loads the bundled H. sapiens table."""
    if source is None:
        text = resources.files("mrna_coopt.data").joinpath("h_sapiens_9606.csv").read_text()
    else:
        with open(source) as fh:
            text = fh.read()
    return parse_codon_table(text)


def gc_count(codon: str) -> int:
    return sum(1 for b in codon if b in "GC")


def rarity(codon: str, table: CodonTable) -> float:
    """Rarity penalty ``-ln f`` of a codon; zero for the only codon of its amino acid."""
    return table.usage(codon).rarity


def longest_run(seq: str) -> int:
    return max(len(list(g)) for _, g in itertools.groupby(seq))


def repeat_score(codon_j: str, codon_k: str, rule: str = "run_minus_one_squared") -> int:
    """Penalty for identical-base runs across two adjacent codons.

    ``m`` is the longest single-base run in the six-base concatenation.
    The default rule scores ``(m - 1)**2``; ``run_squared_minus_one`` scores
    ``m**2 - 1``. Both vanish when no base repeats.
    """
    m = longest_run(codon_j + codon_k)
    if rule == "run_minus_one_squared":
        return (m - 1) ** 2
    if rule == "run_squared_minus_one":
        return m * m - 1
    raise ValueError(f"repeat rule must be one of {REPEAT_RULES}, got {rule!r}")


def cai(nt: NucleotideSeq | str, table: CodonTable) -> float:
    """Codon adaptation index: geometric mean of the relative-adaptiveness weights."""
    bases = str(nt)
    if len(bases) % 3:
        raise SequenceError(f"length {len(bases)} is not a multiple of 3")
    codons = [bases[k:k + 3] for k in range(0, len(bases), 3)]
    if not codons:
        raise SequenceError("empty sequence")
    log_sum = 0.0
    for codon in codons:
        if codon not in table:
            raise SequenceError(f"unknown codon {codon!r}")
        log_sum += math.log(table.usage(codon).weight)
    return math.exp(log_sum / len(codons))


@dataclass(frozen=True)
class Theta:
    theta_c: float = 0.0
    theta_p: float = 0.0
    theta_r: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.as_tuple()):
            raise ValueError(f"theta must be finite, got {self.as_tuple()}")

    @classmethod
    def coerce(cls, value: "Theta | Sequence[float]") -> "Theta":
        if isinstance(value, Theta):
            return value
        c, p, r = (float(v) for v in value)
        return cls(c, p, r)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.theta_c, self.theta_p, self.theta_r)


@dataclass(frozen=True)
class CodonProblem:
    amino: AminoAcidSeq
    table: CodonTable
    theta: Theta
    options: tuple[tuple[str, ...], ...]
    node_costs: tuple[np.ndarray, ...]
    edge_costs: tuple[np.ndarray, ...]
    repeat_rule: str = "run_minus_one_squared"
    rarity_sign: str = "log"

    @property
    def n(self) -> int:
        return len(self.options)


def build_problem(amino: AminoAcidSeq | str, table: CodonTable, theta: Theta | Sequence[float],
                  repeat_rule: str = "run_minus_one_squared", rarity_sign: str = "log") -> CodonProblem:
    if isinstance(amino, str):
        amino = AminoAcidSeq(amino)
    theta = Theta.coerce(theta)
    sign = _sign(rarity_sign)
    options = tuple(tuple(u.codon for u in table.codons(aa)) for aa in amino)
    node_costs = tuple(
        np.array([theta.theta_c * u.gc + theta.theta_p * sign * u.rarity for u in table.codons(aa)])
        for aa in amino
    )
    edge_costs = tuple(
        theta.theta_r * np.array([[repeat_score(a, b, repeat_rule) for b in right] for a in left], dtype=float)
        for left, right in zip(options[:-1], options[1:])
    )
    return CodonProblem(amino, table, theta, options, node_costs, edge_costs, repeat_rule, rarity_sign)


def objective_value(problem: CodonProblem, assignment: Sequence[int]) -> float:
    """Evaluate the codon objective directly from the table for one assignment."""
    if len(assignment) != problem.n:
        raise ValueError(f"assignment has length {len(assignment)}, expected {problem.n}")
    for i, (k, opts) in enumerate(zip(assignment, problem.options)):
        if not 0 <= k < len(opts):
            raise IndexError(f"codon index {k} out of range at position {i + 1}")
    codons = [opts[k] for k, opts in zip(assignment, problem.options)]
    th = problem.theta
    gc = sum(gc_count(c) for c in codons)
    rare = _sign(problem.rarity_sign) * sum(problem.table.usage(c).rarity for c in codons)
    rep = sum(repeat_score(a, b, problem.repeat_rule) for a, b in zip(codons, codons[1:]))
    return th.theta_c * gc + th.theta_p * rare + th.theta_r * rep


@dataclass(frozen=True)
class CodonSolution:
    sequence: NucleotideSeq
    objective: float
    assignment: tuple[int, ...]

    def __iter__(self):
        yield self.sequence
        yield self.objective


def _solution(problem: CodonProblem, assignment: Sequence[int]) -> CodonSolution:
    assignment = tuple(int(k) for k in assignment)
    seq = "".join(opts[k] for k, opts in zip(assignment, problem.options))
    return CodonSolution(NucleotideSeq(seq), objective_value(problem, assignment), assignment)


def _first_within(values: np.ndarray) -> int:
    best = values.min()
    return int(np.flatnonzero(values <= best + _TIE_TOL * max(1.0, abs(best)))[0])


def solve_codon(problem: CodonProblem) -> CodonSolution:
    """Exact minimiser by backward dynamic programming over the codon chain.

    Ties go to the lexicographically smallest assignment of codon indices.
    """
    n = problem.n
    cost_to_go: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    cost_to_go[-1] = problem.node_costs[-1]
    for i in range(n - 2, -1, -1):
        trans = problem.edge_costs[i] + cost_to_go[i + 1][None, :]
        cost_to_go[i] = problem.node_costs[i] + trans.min(axis=1)

    assignment = [_first_within(cost_to_go[0])]
    for i in range(1, n):
        prev = assignment[-1]
        assignment.append(_first_within(problem.edge_costs[i - 1][prev] + cost_to_go[i]))
    return _solution(problem, assignment)


def solve_codon_brute_force(problem: CodonProblem) -> CodonSolution:
    """Exhaustive minimiser over every codon combination (test oracle)."""
    sizes = [len(o) for o in problem.options]
    total = math.prod(sizes)
    if total > BRUTE_FORCE_LIMIT:
        raise ValueError(f"{total} combinations exceed the brute-force limit {BRUTE_FORCE_LIMIT}")
    n = problem.n
    values = np.zeros(sizes)
    for i, node in enumerate(problem.node_costs):
        shape = [1] * n
        shape[i] = sizes[i]
        values = values + node.reshape(shape)
    for i, edge in enumerate(problem.edge_costs):
        shape = [1] * n
        shape[i], shape[i + 1] = sizes[i], sizes[i + 1]
        values = values + edge.reshape(shape)
    flat = values.ravel()  # C order: lexicographic over assignments
    best = _first_within(flat)
    return _solution(problem, np.unravel_index(best, sizes))
