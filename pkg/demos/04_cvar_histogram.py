"""Where does the trained circuit put its probability mass?

Trains the CVaR sampler on a 26-nt fragment and prints the feasible-energy
histogram of the final shots, plus the same data as CSV for plotting.
Takes a minute or two. Run: python demos/04_cvar_histogram.py [out.csv]
"""

import sys

from mrna_coopt import build_model, load_energy_params, to_penalty_qubo
from mrna_coopt.solvers import CvarConfig, energy_histogram, solve_cvar_variational, solve_exact

SEQ = "UACGACGACUGCGCUGUGAACUGGUG"
qubo = to_penalty_qubo(build_model(SEQ, load_energy_params()))
ground = solve_exact(qubo)

res = solve_cvar_variational(qubo, CvarConfig(beta=0.25, maxiter=600, seed=0))
hist = energy_histogram(qubo, res.metadata["final_counts"])
print(f"{SEQ}: {qubo.num_vars} qubits, exact ground energy {ground.energy:+.3f}, "
      f"sampler best {res.energy:+.3f}")

top = max(c for _, c in hist)
for energy, count in hist:
    print(f"{energy:+8.3f} {count:6d} {'#' * round(40 * count / top)}")

if len(sys.argv) > 1:
    with open(sys.argv[1], "w") as fh:
        fh.write("energy,count\n")
        fh.writelines(f"{e},{c}\n" for e, c in hist)
