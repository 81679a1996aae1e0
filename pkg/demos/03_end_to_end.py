"""Joint optimisation of codon usage and folding stability for TLPKAD.

The outer simplex search moves the codon weights; each step picks codons
exactly, folds the result and scores alpha * CAI + MFE.
Run: python demos/03_end_to_end.py
"""

from mrna_coopt import NmConfig, load_codon_table, load_energy_params, optimize

report = optimize("TLPKAD", NmConfig(), load_codon_table(), load_energy_params())

print(f"{report.aa} -> {report.nt}")
print(f"           {report.structure}")
print(f"CAI {report.cai:.3f}   MFE {report.mfe:+.2f}   f {report.objective:+.3f}")
print(f"{report.iterations} iterations, {report.evaluations} evaluations, "
      f"{report.cache_hits} fold-cache hits")

seen = {}
for rec in report.records:
    seen.setdefault(rec.sequence, rec)
print(f"\n{len(seen)} distinct sequences visited:")
for rec in sorted(seen.values(), key=lambda r: r.objective)[:8]:
    print(f"  {rec.sequence}  {rec.structure}  CAI {rec.cai:.3f}  MFE {rec.mfe:+.2f}  f {rec.objective:+.3f}")
