"""Codon choice as a chain problem.

Scores one amino-acid string under a few weight vectors and shows how the
exact dynamic programme trades codon usage against GC content and repeats.
Run: python demos/01_codon_choice.py
"""

from mrna_coopt import cai, load_codon_table, translate
from mrna_coopt.codon import build_problem, solve_codon, solve_codon_brute_force

AA = "TLPKAD"
table = load_codon_table()

print(f"fixture ACUCUGCCGAAGGCAGAC  CAI = {cai('ACUCUGCCGAAGGCAGAC', table):.4f}\n")

# theta = (GC, log-usage, repeat) weights, minimised; negative usage weight favours common codons
for theta in [(0, -1, 0), (0, 1, 0), (1, 0, 0), (-1, 0, 0), (0, 0, 1), (-0.5, -1, 0.5)]:
    problem = build_problem(AA, table, theta)
    best = solve_codon(problem)
    assert best.objective == solve_codon_brute_force(problem).objective
    nt = str(best.sequence)
    gc = sum(b in "GC" for b in nt) / len(nt)
    print(f"theta={theta!s:16} {nt}  CAI={cai(nt, table):.3f}  GC={gc:.2f}  -> {translate(best.sequence)}")
