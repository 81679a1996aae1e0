"""Sequence types, translation and dot-bracket handling.

Positions are 1-indexed throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

AMINO_ACIDS = "ACDEFGHIKLMNPQRSTVWY"
BASES = "UACG"

# Standard genetic code, RNA alphabet. Stop codons map to '*'.
STANDARD_CODE: dict[str, str] = {}
_first = "UUUUUUUUUUUUUUUUCCCCCCCCCCCCCCCCAAAAAAAAAAAAAAAAGGGGGGGGGGGGGGGG"
_second = "UUUUCCCCAAAAGGGGUUUUCCCCAAAAGGGGUUUUCCCCAAAAGGGGUUUUCCCCAAAAGGGG"
_third = "UCAG" * 16
_aas = "FFLLSSSSYY**CC*WLLLLPPPPHHQQRRRRIIIMTTTTNNKKSSRRVVVVAAAADDEEGGGG"
for _a, _b, _c, _aa in zip(_first, _second, _third, _aas):
    STANDARD_CODE[_a + _b + _c] = _aa
del _first, _second, _third, _aas, _a, _b, _c, _aa


class SequenceError(ValueError):
    """Invalid residue or base string."""


class StructureError(ValueError):
    """Invalid or unrepresentable secondary structure."""


@dataclass(frozen=True)
class AminoAcidSeq:
    residues: str

    def __post_init__(self):
        if not self.residues:
            raise SequenceError("empty sequence")
        for pos, ch in enumerate(self.residues, start=1):
            if ch not in AMINO_ACIDS:
                raise SequenceError(f"invalid amino acid {ch!r} at position {pos}")

    @property
    def n(self) -> int:
        return len(self.residues)

    def __len__(self) -> int:
        return len(self.residues)

    def __iter__(self) -> Iterator[str]:
        return iter(self.residues)

    def __getitem__(self, idx):
        return self.residues[idx]

    def __str__(self) -> str:
        return self.residues


@dataclass(frozen=True)
class NucleotideSeq:
    bases: str

    def __post_init__(self):
        if not self.bases:
            raise SequenceError("empty sequence")
        for pos, ch in enumerate(self.bases, start=1):
            if ch not in BASES:
                raise SequenceError(f"invalid base {ch!r} at position {pos}")

    @property
    def length(self) -> int:
        return len(self.bases)

    def codons(self) -> list[str]:
        return [self.bases[k:k + 3] for k in range(0, len(self.bases), 3)]

    def base(self, pos: int) -> str:
        """Base at 1-indexed position ``pos``."""
        return self.bases[pos - 1]

    def __len__(self) -> int:
        return len(self.bases)

    def __iter__(self) -> Iterator[str]:
        return iter(self.bases)

    def __getitem__(self, idx):
        return self.bases[idx]

    def __str__(self) -> str:
        return self.bases


def _crosses(p: tuple[int, int], q: tuple[int, int]) -> bool:
    (a, b), (c, d) = sorted((p, q))
    return a < c < b < d


@dataclass(frozen=True)
class PairSet:
    """Non-crossing partial matching on positions ``1..n``."""

    pairs: tuple[tuple[int, int], ...]
    n: int

    def __post_init__(self):
        pairs = tuple(sorted((min(i, j), max(i, j)) for i, j in self.pairs))
        object.__setattr__(self, "pairs", pairs)
        seen: set[int] = set()
        for i, j in pairs:
            if i == j or i < 1 or j > self.n:
                raise StructureError(f"pair ({i}, {j}) out of range for n={self.n}")
            if i in seen or j in seen:
                raise StructureError(f"position in pair ({i}, {j}) is already paired")
            seen.update((i, j))
        # sorted by i: a crossing exists iff some later pair opens inside and closes outside
        stack: list[int] = []
        for i, j in pairs:
            while stack and stack[-1] < i:
                stack.pop()
            if stack and j > stack[-1]:
                raise StructureError(f"pair ({i}, {j}) crosses an enclosing pair")
            stack.append(j)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, int]], n: int) -> "PairSet":
        return cls(tuple(pairs), n)

    def partner_map(self) -> dict[int, int]:
        out = {}
        for i, j in self.pairs:
            out[i] = j
            out[j] = i
        return out

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __contains__(self, pair) -> bool:
        return tuple(sorted(pair)) in self.pairs


def parse_amino_sequence(text: str) -> AminoAcidSeq:
    return AminoAcidSeq(text.strip().upper())


def parse_nucleotide_sequence(text: str, dna_to_rna: bool = True) -> NucleotideSeq:
    seq = text.strip().upper()
    if dna_to_rna:
        seq = seq.replace("T", "U")
    return NucleotideSeq(seq)


def translate(nt: NucleotideSeq, table: Mapping[str, str] | None = None) -> AminoAcidSeq:
    """Translate ``nt`` codon by codon.

    ``table`` maps codon -> amino acid; a ``CodonTable`` works as well since
    it exposes ``amino_acid_of``. Defaults to the standard genetic code.
    """
    if len(nt) % 3:
        raise SequenceError(f"length {len(nt)} is not a multiple of 3")
    lookup = getattr(table, "amino_acid_of", None)
    if lookup is None:
        code = STANDARD_CODE if table is None else table

        def lookup(codon):
            try:
                return code[codon]
            except KeyError:
                raise SequenceError(f"unknown codon {codon!r}") from None

    residues = []
    for k, codon in enumerate(nt.codons(), start=1):
        aa = lookup(codon)
        if aa not in AMINO_ACIDS:
            raise SequenceError(f"codon {codon!r} at codon position {k} does not encode an amino acid")
        residues.append(aa)
    return AminoAcidSeq("".join(residues))


def parse_dot_bracket(text: str) -> PairSet:
    text = text.strip()
    stack: list[int] = []
    pairs = []
    for pos, ch in enumerate(text, start=1):
        if ch == "(":
            stack.append(pos)
        elif ch == ")":
            if not stack:
                raise StructureError(f"unbalanced ')' at position {pos}")
            pairs.append((stack.pop(), pos))
        elif ch != ".":
            raise StructureError(f"invalid character {ch!r} at position {pos}")
    if stack:
        raise StructureError(f"unbalanced '(' at position {stack[-1]}")
    return PairSet(tuple(pairs), len(text))


def render_dot_bracket(pairs: PairSet | Iterable[tuple[int, int]], n: int | None = None) -> str:
    if not isinstance(pairs, PairSet):
        if n is None:
            raise ValueError("n is required when rendering a bare pair list")
        pairs = PairSet(tuple(pairs), n)
    chars = ["."] * pairs.n
    for i, j in pairs:
        chars[i - 1] = "("
        chars[j - 1] = ")"
    return "".join(chars)
