"""Folding through the quartet QUBO.

Builds the binary model for one sequence, solves it with every backend and
scores the winning structure with the loop-based energy evaluator.
Run: python demos/02_fold_a_sequence.py
"""

from mrna_coopt import build_model, load_energy_params, mfe_eval, to_penalty_qubo
from mrna_coopt.energy import energy_breakdown
from mrna_coopt.seq_core import parse_dot_bracket
from mrna_coopt.solvers import CvarConfig, solve_cvar_variational, solve_exact, solve_milp, solve_sa
from mrna_coopt.structure import decode

SEQ = "ACUCUGCCGAAGGCAGAC"
params = load_energy_params()

model = build_model(SEQ, params)
qubo = to_penalty_qubo(model)
print(f"{SEQ}: {model.num_vars} quartet variables, penalty weight {qubo.penalty:.2f}")
for k, q in enumerate(model.universe.quartets):
    print(f"    x{k}: pairs ({q.i},{q.j}) {q.outer} / ({q.i + 1},{q.j - 1}) {q.inner}  stack {q.energy:+.2f}")

runs = {
    "exact": solve_exact(qubo),
    "milp": solve_milp(model),
    "sa": solve_sa(qubo, seed=1),
    "cvar": solve_cvar_variational(qubo, CvarConfig(seed=1)),
}
for name, res in runs.items():
    print(f"{name:>5}: {res.bitstring}  model energy {res.energy:+.3f}")

structure = decode(runs["exact"].bitstring, model.universe).dot_bracket
pairs = parse_dot_bracket(structure)
print(f"\n{SEQ}\n{structure}  {mfe_eval(SEQ, pairs, params):+.2f} kcal/mol")
for loop, energy in energy_breakdown(SEQ, pairs, params):
    where = "exterior" if loop.closing is None else f"closed by {loop.closing}"
    print(f"    {loop.kind:9} {where:18} {energy:+.2f}")
