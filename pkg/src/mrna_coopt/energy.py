"""Nearest-neighbour free energy of a fixed secondary structure.

A simplified Turner-style model: stacking energies, size-dependent loop
initiation for hairpins, bulges and internal loops, a terminal A-U/G-U penalty
at every helix end, and a constant multiloop term. No dangles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from os import PathLike

from .seq_core import NucleotideSeq, PairSet

RT_37 = 0.616  # kcal/mol
PAIR_TYPES = ("AU", "UA", "GC", "CG", "GU", "UG")
WATSON_CRICK = ("AU", "UA", "GC", "CG")


class EnergyParamsError(ValueError):
    pass


class EnergyError(ValueError):
    pass


def rotate_stack(outer: str, inner: str) -> tuple[str, str]:
    """The same stack read from the other strand."""
    return inner[::-1], outer[::-1]


@dataclass(frozen=True)
class EnergyParams:
    stack: dict[tuple[str, str], float]
    hairpin: dict[int, float]
    bulge: dict[int, float]
    internal: dict[int, float]
    terminal_au: float
    multiloop_const: float = 0.0

    def stack_energy(self, outer: str, inner: str) -> float:
        if outer not in PAIR_TYPES or inner not in PAIR_TYPES:
            raise EnergyError(f"not a valid stack: outer {outer}, inner {inner}")
        try:
            return self.stack[(outer, inner)]
        except KeyError:
            raise EnergyError(f"missing stack entry {outer}/{inner}") from None

    def hairpin_energy(self, size: int) -> float:
        return _loop_lookup(self.hairpin, size, "hairpin")

    def bulge_energy(self, size: int) -> float:
        return _loop_lookup(self.bulge, size, "bulge")

    def internal_energy(self, size: int) -> float:
        return _loop_lookup(self.internal, size, "internal")

    def terminal_penalty(self, pair_bases: str) -> float:
        return self.terminal_au if pair_bases in ("AU", "UA", "GU", "UG") else 0.0


def _loop_lookup(table: dict[int, float], size: int, kind: str) -> float:
    if size in table:
        return table[size]
    largest = max(table)
    if size > largest:
        return table[largest] + 1.75 * RT_37 * math.log(size / largest)
    raise EnergyError(f"{kind} loop of size {size} is below the smallest tabulated size {min(table)}")


_MIN_SIZE = {"hairpin": 3, "bulge": 1, "internal": 2}


def parse_energy_params(text: str) -> EnergyParams:
    stack: dict[tuple[str, str], float] = {}
    loops: dict[str, dict[int, float]] = {"hairpin": {}, "bulge": {}, "internal": {}}
    scalars: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        key = parts[0].lower()
        try:
            if key == "stack" and len(parts) == 4:
                outer, inner = parts[1].upper(), parts[2].upper()
                if outer not in PAIR_TYPES or inner not in PAIR_TYPES:
                    raise EnergyParamsError(f"line {lineno}: invalid pair in {raw!r}")
                stack[(outer, inner)] = float(parts[3])
            elif key in loops and len(parts) == 3:
                loops[key][int(parts[1])] = float(parts[2])
            elif key in ("terminal_au", "multiloop") and len(parts) == 2:
                scalars[key] = float(parts[1])
            else:
                raise EnergyParamsError(f"line {lineno}: malformed line {raw!r}")
        except ValueError as exc:
            if isinstance(exc, EnergyParamsError):
                raise
            raise EnergyParamsError(f"line {lineno}: bad number in {raw!r}") from None

    if not stack and not any(loops.values()) and not scalars:
        raise EnergyParamsError("parameter file has no entries")

    # fill rotational equivalents, then require the full 6x6 table
    for (outer, inner), value in list(stack.items()):
        twin = rotate_stack(outer, inner)
        if twin in stack and abs(stack[twin] - value) > 1e-12:
            raise EnergyParamsError(f"inconsistent values for stack {outer}/{inner} and its rotation")
        stack.setdefault(twin, value)
    missing = [f"{o}/{i}" for o in PAIR_TYPES for i in PAIR_TYPES if (o, i) not in stack]
    if missing:
        raise EnergyParamsError(f"missing stack entries: {', '.join(missing)}")
    for o in WATSON_CRICK:
        for i in WATSON_CRICK:
            if stack[(o, i)] >= 0:
                raise EnergyParamsError(f"Watson-Crick stack {o}/{i} must be negative")

    for kind, table in loops.items():
        lo = _MIN_SIZE[kind]
        if lo not in table:
            raise EnergyParamsError(f"{kind} table must start at size {lo}")
        gaps = [s for s in range(lo, max(table) + 1) if s not in table]
        if gaps:
            raise EnergyParamsError(f"{kind} table is missing sizes {gaps}")
        if any(v <= 0 for v in table.values()):
            raise EnergyParamsError(f"{kind} initiation energies must be positive")
    if "terminal_au" not in scalars:
        raise EnergyParamsError("terminal_au entry is required")

    return EnergyParams(stack=stack, hairpin=loops["hairpin"], bulge=loops["bulge"],
                        internal=loops["internal"], terminal_au=scalars["terminal_au"],
                        multiloop_const=scalars.get("multiloop", 0.0))


def load_energy_params(source: str | PathLike | None = None) -> EnergyParams:
    """Read a parameter file; ``None`` loads the bundled simplified Turner 2004 set."""
    if source is None:
        text = resources.files("mrna_coopt.data").joinpath("rna_turner2004_simplified.par").read_text()
    else:
        with open(source) as fh:
            text = fh.read()
    return parse_energy_params(text)


def stack_energy(outer_pair: str, inner_pair: str, params: EnergyParams) -> float:
    return params.stack_energy(outer_pair, inner_pair)


@dataclass(frozen=True)
class Loop:
    kind: str  # hairpin | stack | bulge | internal | multiloop | exterior
    closing: tuple[int, int] | None  # None for the exterior loop
    branches: tuple[tuple[int, int], ...]
    unpaired: int
    sides: tuple[int, ...] = field(default=())  # unpaired counts 5' and 3' of the inner pair


@dataclass(frozen=True)
class LoopDecomposition:
    loops: tuple[Loop, ...]

    def count(self, kind: str) -> int:
        return sum(1 for lp in self.loops if lp.kind == kind)

    def __iter__(self):
        return iter(self.loops)

    def __len__(self):
        return len(self.loops)


def _scan(lo: int, hi: int, partner: dict[int, int]) -> tuple[list[tuple[int, int]], int, list[int]]:
    """Branches and unpaired bases in positions lo..hi (inclusive), skipping nested pairs."""
    branches, gaps = [], []
    unpaired = run = 0
    k = lo
    while k <= hi:
        if k in partner and partner[k] > k:
            branches.append((k, partner[k]))
            gaps.append(run)
            run = 0
            k = partner[k] + 1
        else:
            unpaired += 1
            run += 1
            k += 1
    gaps.append(run)
    return branches, unpaired, gaps


def decompose_loops(seq: NucleotideSeq | str, pairs: PairSet) -> LoopDecomposition:
    n = len(seq)
    if pairs.n != n:
        raise EnergyError(f"structure length {pairs.n} does not match sequence length {n}")
    partner = pairs.partner_map()
    branches, unpaired, _ = _scan(1, n, partner)
    loops = [Loop("exterior", None, tuple(branches), unpaired)]
    for i, j in pairs:
        inside, unpaired, gaps = _scan(i + 1, j - 1, partner)
        if not inside:
            loops.append(Loop("hairpin", (i, j), (), unpaired))
        elif len(inside) == 1:
            left, right = gaps
            kind = "stack" if unpaired == 0 else ("bulge" if 0 in (left, right) else "internal")
            loops.append(Loop(kind, (i, j), tuple(inside), unpaired, (left, right)))
        else:
            loops.append(Loop("multiloop", (i, j), tuple(inside), unpaired))
    return LoopDecomposition(tuple(loops))


def _bases(seq: str, pair: tuple[int, int]) -> str:
    return seq[pair[0] - 1] + seq[pair[1] - 1]


def loop_energy(seq: NucleotideSeq | str, loop: Loop, params: EnergyParams) -> float:
    s = str(seq)
    if loop.closing is not None:
        closing = _bases(s, loop.closing)
        if closing not in PAIR_TYPES:
            raise EnergyError(f"pair {loop.closing} ({closing}) is not a valid base pair")
    if loop.kind == "exterior":
        return sum(params.terminal_penalty(_bases(s, b)) for b in loop.branches)
    if loop.kind == "hairpin":
        return params.hairpin_energy(loop.unpaired) + params.terminal_penalty(closing)
    inner_pairs = [_bases(s, b) for b in loop.branches]
    for b, bases in zip(loop.branches, inner_pairs):
        if bases not in PAIR_TYPES:
            raise EnergyError(f"pair {b} ({bases}) is not a valid base pair")
    if loop.kind == "stack":
        return params.stack_energy(closing, inner_pairs[0])
    ends = params.terminal_penalty(closing) + sum(params.terminal_penalty(b) for b in inner_pairs)
    if loop.kind == "bulge":
        if loop.unpaired == 1:
            # single-base bulge keeps the helix stacked across it
            return params.bulge_energy(1) + params.stack_energy(closing, inner_pairs[0])
        return params.bulge_energy(loop.unpaired) + ends
    if loop.kind == "internal":
        return params.internal_energy(loop.unpaired) + ends
    if loop.kind == "multiloop":
        return params.multiloop_const + ends
    raise EnergyError(f"unknown loop kind {loop.kind!r}")


def energy_breakdown(seq: NucleotideSeq | str, pairs: PairSet,
                     params: EnergyParams) -> list[tuple[Loop, float]]:
    return [(lp, loop_energy(seq, lp, params)) for lp in decompose_loops(seq, pairs)]


def mfe_eval(seq: NucleotideSeq | str, pairs: PairSet, params: EnergyParams) -> float:
    """Free energy (kcal/mol) of ``seq`` folded into ``pairs``."""
    return float(sum((e for _, e in energy_breakdown(seq, pairs, params)), 0.0))
