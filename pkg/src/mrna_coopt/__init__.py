"""Codon and secondary-structure co-optimisation for short mRNA designs."""

__version__ = "0.1.0"

from .codon import CodonTable, cai, load_codon_table, solve_codon, solve_codon_brute_force
from .energy import load_energy_params, mfe_eval
from .pipeline import FoldConfig, NmConfig, fold_sequence, optimize
from .seq_core import parse_amino_sequence, parse_dot_bracket, parse_nucleotide_sequence, translate
from .structure import build_model, to_penalty_qubo

__all__ = [
    "CodonTable", "FoldConfig", "NmConfig", "build_model", "cai", "fold_sequence", "load_codon_table",
    "load_energy_params", "mfe_eval", "optimize", "parse_amino_sequence", "parse_dot_bracket",
    "parse_nucleotide_sequence", "solve_codon", "solve_codon_brute_force", "to_penalty_qubo", "translate",
]
