"""Ground-state search on :class:`~mrna_coopt.structure.QuboModel`.

Three solvers share the :class:`SolveResult` output:

* :func:`solve_exact` enumerates every assignment (oracle, small models only);
* :func:`solve_sa` runs replica-parallel simulated annealing;
* :func:`solve_cvar_variational` trains a simulated layered RY/CZ circuit on
  the CVaR of sampled energies and returns the best feasible bitstring seen.

Bitstring character ``k`` is variable ``k``; in statevector indices variable 0
is the most significant bit.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp, minimize
from scipy.sparse import coo_matrix

from .structure import QuboModel, StructureModel

EXACT_LIMIT = 25
EXHAUSTIVE_PREFERRED = 20  # "exact" switches to MILP above this
STATEVECTOR_LIMIT = 22
_TIE_TOL = 1e-9


class SolverLimitError(RuntimeError):
    """Instance too large for the chosen solver."""


@dataclass
class SolveResult:
    bitstring: str
    energy: float
    feasible: bool
    samples: int
    trace: list[float] = field(default_factory=list)
    solver: str = ""
    metadata: dict = field(default_factory=dict)


def index_to_bits(index: int, n: int) -> str:
    return format(index, f"0{n}b") if n else ""


def _index_bits(indices: np.ndarray, n: int) -> np.ndarray:
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((np.asarray(indices, dtype=np.int64)[:, None] >> shifts) & 1).astype(np.int8)


def solve_exact(qubo: QuboModel, chunk: int = 1 << 18) -> SolveResult:
    """Global minimum by enumeration; ties go to the lexicographically smallest bitstring."""
    n = qubo.num_vars
    if n > EXACT_LIMIT:
        raise SolverLimitError(f"{n} variables exceed the exhaustive-search limit of {EXACT_LIMIT}")
    best_e, best_idx = math.inf, 0
    for start in range(0, 1 << n, chunk):
        idx = np.arange(start, min(start + chunk, 1 << n), dtype=np.int64)
        e = qubo.energies(_index_bits(idx, n))
        k = int(np.argmin(e))
        if best_e == math.inf or e[k] < best_e - _TIE_TOL * max(1.0, abs(best_e)):
            best_e, best_idx = float(e[k]), int(idx[k])
    bits = index_to_bits(best_idx, n)
    energy = qubo.energy(bits) if n else float(qubo.offset)
    return SolveResult(bits, energy, qubo.is_feasible(bits), 1 << n, [energy], "exact")


def solve_milp(model: StructureModel, penalty: float | None = None,
               time_limit: float | None = None) -> SolveResult:
    """Exact optimum of the constrained quartet model by mixed-integer programming.

    Conflicts stay explicit constraints ``x_a + x_b <= 1``; each product
    ``x_a x_b`` becomes a continuous ``y`` with the standard linearisation
    (only the bounds its coefficient sign needs). Solved with HiGHS. The
    reported energy is re-evaluated on the penalty QUBO built with ``penalty``.
    """
    from .structure import to_penalty_qubo

    qubo = to_penalty_qubo(model, penalty)
    n = model.num_vars
    if n == 0:
        e = float(qubo.offset)
        return SolveResult("", e, True, 0, [e], "milp")
    terms = sorted(model.quadratic.items())
    m = len(terms)
    cost = np.concatenate([model.linear, [c for _, c in terms]])
    rows, cols, vals, upper = [], [], [], []

    def row(entries, ub):
        r = len(upper)
        for col, v in entries:
            rows.append(r)
            cols.append(col)
            vals.append(v)
        upper.append(ub)

    for a, b in model.constraints:
        row([(a, 1.0), (b, 1.0)], 1.0)
    for k, ((a, b), c) in enumerate(terms):
        y = n + k
        if c < 0:
            row([(y, 1.0), (a, -1.0)], 0.0)
            row([(y, 1.0), (b, -1.0)], 0.0)
        else:
            row([(a, 1.0), (b, 1.0), (y, -1.0)], 1.0)
    constraints = []
    if upper:
        matrix = coo_matrix((vals, (rows, cols)), shape=(len(upper), n + m)).tocsr()
        constraints.append(LinearConstraint(matrix, -np.inf, np.array(upper)))
    integrality = np.concatenate([np.ones(n), np.zeros(m)])
    options = {} if time_limit is None else {"time_limit": time_limit}
    res = milp(cost, constraints=constraints, integrality=integrality,
               bounds=Bounds(np.zeros(n + m), np.ones(n + m)), options=options)
    if res.x is None:
        raise RuntimeError(f"MILP solve failed: {res.message}")
    bits = "".join(str(int(round(v))) for v in res.x[:n])
    energy = qubo.energy(bits)
    return SolveResult(bits, energy, qubo.is_feasible(bits), 0, [energy], "milp",
                       {"status": int(res.status), "message": str(res.message),
                        "optimal": res.status == 0})


def _sa_temperatures(qubo: QuboModel, sweeps: int) -> np.ndarray:
    sym = qubo.symmetric()
    coefs = np.concatenate([np.abs(qubo.linear), np.abs(sym[np.triu_indices_from(sym, 1)])])
    coefs = coefs[coefs > 0]
    if coefs.size == 0:
        return np.ones(sweeps)
    hot = float(np.max(np.abs(qubo.linear) + np.abs(sym).sum(axis=1)))
    cold = 0.01 * float(coefs.min())
    return np.geomspace(max(hot, cold), cold, sweeps)


def solve_sa(qubo: QuboModel, sweeps: int = 1000, restarts: int = 16, seed: int | None = 0) -> SolveResult:
    """Metropolis single-flip annealing with ``restarts`` independent replicas.

    Replicas run side by side; a geometric schedule cools from the largest
    possible single-flip change down to 1% of the smallest coefficient.
    """
    n = qubo.num_vars
    rng = np.random.default_rng(seed)
    if n == 0:
        e = float(qubo.offset)
        return SolveResult("", e, True, 0, [e], "sa")
    sym = qubo.symmetric()
    lin = qubo.linear
    x = rng.integers(0, 2, size=(restarts, n)).astype(float)
    energies = qubo.energies(x)
    best_e = float(energies.min())
    best_x = x[int(np.argmin(energies))].copy()
    trace = []
    for temp in _sa_temperatures(qubo, sweeps):
        for k in range(n):
            field_k = lin[k] + x @ sym[:, k]
            delta = (1.0 - 2.0 * x[:, k]) * field_k
            accept = (delta <= 0) | (rng.random(restarts) < np.exp(-np.maximum(delta, 0) / temp))
            x[accept, k] = 1.0 - x[accept, k]
            energies = energies + np.where(accept, delta, 0.0)
        k_best = int(np.argmin(energies))
        if energies[k_best] < best_e:
            best_e = float(energies[k_best])
            best_x = x[k_best].copy()
        trace.append(best_e)
    bits = "".join(str(int(b)) for b in best_x)
    energy = qubo.energy(bits)
    trace[-1] = min(trace[-1], energy)
    return SolveResult(bits, energy, qubo.is_feasible(bits), restarts * sweeps * n, trace, "sa",
                       {"sweeps": sweeps, "restarts": restarts, "seed": seed})


def cvar_value(energies, beta: float, counts=None) -> float:
    """Mean of the lowest ``ceil(beta * N)`` energies of a sample.

    With ``counts`` the energies are distinct outcomes observed ``counts``
    times each.
    """
    if not 0 < beta <= 1:
        raise ValueError(f"beta must be in (0, 1], got {beta}")
    e = np.asarray(energies, dtype=float)
    if e.size == 0:
        raise ValueError("cannot take CVaR of an empty sample")
    c = np.ones(e.size, dtype=np.int64) if counts is None else np.asarray(counts, dtype=np.int64)
    order = np.argsort(e, kind="stable")
    e, c = e[order], c[order]
    keep = math.ceil(beta * int(c.sum()) - 1e-12)
    taken = np.minimum(c, np.maximum(keep - (np.cumsum(c) - c), 0))
    return float((e * taken).sum() / keep)


@dataclass(frozen=True)
class CvarConfig:
    beta: float = 0.25
    shots: int = 2**13
    depth: int = 1
    seed: int = 0
    maxiter: int = 100

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            raise ValueError(f"beta must be in (0, 1], got {self.beta}")
        if self.shots < 1:
            raise ValueError("shots must be at least 1")
        if self.depth < 1:
            raise ValueError("depth must be at least 1")
        if self.maxiter < 1:
            raise ValueError("maxiter must be at least 1")


_PHASE_CACHE: dict[int, np.ndarray] = {}


def _chain_phases(n: int) -> np.ndarray:
    """Sign pattern of a CZ on every neighbouring qubit pair (they commute)."""
    if n not in _PHASE_CACHE:
        idx = np.arange(1 << n, dtype=np.int64)
        parity = np.zeros(1 << n, dtype=np.int64)
        for k in range(n - 1):
            a = (idx >> (n - 1 - k)) & 1
            b = (idx >> (n - 2 - k)) & 1
            parity ^= a & b
        _PHASE_CACHE[n] = 1.0 - 2.0 * parity
    return _PHASE_CACHE[n]


def _apply_ry_layer(psi: np.ndarray, angles: np.ndarray, n: int) -> np.ndarray:
    psi = psi.reshape((2,) * n) if n else psi
    for k, theta in enumerate(angles):
        c, s = math.cos(theta / 2), math.sin(theta / 2)
        psi = np.moveaxis(psi, k, 0)
        zero, one = psi[0].copy(), psi[1].copy()
        psi[0] = c * zero - s * one
        psi[1] = s * zero + c * one
        psi = np.moveaxis(psi, 0, k)
    return psi.reshape(-1)


def num_ansatz_params(num_qubits: int, depth: int) -> int:
    return num_qubits * (depth + 1)


def simulate_ansatz(angles, num_qubits: int, depth: int, check_norm: bool = False) -> np.ndarray:
    """Statevector of ``depth`` RY layers, each followed by a CZ chain, then a final RY layer.

    ``angles`` holds ``num_qubits * (depth + 1)`` values, layer by layer.
    All gates are real, so amplitudes are real; they are returned as complex.
    """
    if num_qubits > STATEVECTOR_LIMIT:
        raise SolverLimitError(f"{num_qubits} qubits exceed the statevector limit of {STATEVECTOR_LIMIT}")
    angles = np.asarray(angles, dtype=float).reshape(depth + 1, num_qubits)
    psi = np.zeros(1 << num_qubits)
    psi[0] = 1.0
    phases = _chain_phases(num_qubits)
    for layer in range(depth + 1):
        psi = _apply_ry_layer(psi, angles[layer], num_qubits)
        if layer < depth:
            psi = psi * phases
        if check_norm:
            norm = float(psi @ psi)
            if abs(norm - 1.0) > 1e-9:
                raise RuntimeError(f"norm drifted to {norm} after layer {layer}")
    return psi.astype(complex)


def _sample_indices(probs: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    return np.minimum(np.searchsorted(cdf, rng.random(shots), side="right"), len(probs) - 1)


def sample_bitstrings(amplitudes, shots: int, seed: int | np.random.Generator | None = None) -> Counter:
    """Draw ``shots`` measurement outcomes; returns bitstring -> count."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    probs = np.abs(np.asarray(amplitudes)) ** 2
    n = int(round(math.log2(len(probs))))
    idx = _sample_indices(probs, shots, rng)
    values, counts = np.unique(idx, return_counts=True)
    return Counter({index_to_bits(int(v), n): int(c) for v, c in zip(values, counts)})


def energy_histogram(qubo: QuboModel, counts: dict[str, int], feasible_only: bool = True,
                     decimals: int = 9) -> list[tuple[float, int]]:
    """Aggregate sampled bitstrings into ``(energy, count)`` bins sorted by energy."""
    hist: Counter = Counter()
    for bits, c in counts.items():
        if feasible_only and not qubo.is_feasible(bits):
            continue
        hist[round(qubo.energy(bits), decimals)] += c
    return sorted(hist.items())


def solve_cvar_variational(qubo: QuboModel, config: CvarConfig | None = None) -> SolveResult:
    """CVaR-trained sampling with a simulated RY/CZ circuit.

    Each objective call simulates the circuit, draws ``shots`` samples and
    scores them by CVaR of their penalised energies; COBYLA updates the
    angles. Infeasible samples steer the search but are never returned.
    """
    config = config or CvarConfig()
    n = qubo.num_vars
    if n > STATEVECTOR_LIMIT:
        raise SolverLimitError(f"{n} variables exceed the statevector limit of {STATEVECTOR_LIMIT}")
    if n == 0:
        e = float(qubo.offset)
        return SolveResult("", e, True, 0, [e], "cvar", {"iterations": 0})

    rng = np.random.default_rng(config.seed)
    energy_cache: dict[int, float] = {}
    feasible_cache: dict[int, bool] = {}

    def lookup(indices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        new = [int(i) for i in indices if int(i) not in energy_cache]
        if new:
            states = _index_bits(np.array(new), n)
            for i, e, ok in zip(new, qubo.energies(states), qubo.feasible_mask(states)):
                energy_cache[i] = float(e)
                feasible_cache[i] = bool(ok)
        return (np.array([energy_cache[int(i)] for i in indices]),
                np.array([feasible_cache[int(i)] for i in indices]))

    # all-zeros is always feasible, so a feasible answer always exists
    zero_e = float(qubo.offset)
    best = {"idx": 0, "energy": zero_e}
    trace: list[float] = []
    state = {"samples": 0}

    def objective(angles: np.ndarray) -> float:
        psi = simulate_ansatz(angles, n, config.depth).real
        idx = _sample_indices(psi * psi, config.shots, rng)
        values, counts = np.unique(idx, return_counts=True)
        energies, feasible = lookup(values)
        state["samples"] += config.shots
        if feasible.any():
            cand = np.flatnonzero(feasible)
            order = np.lexsort((values[cand], energies[cand]))
            k = cand[order[0]]
            if energies[k] < best["energy"] - _TIE_TOL or (
                    abs(energies[k] - best["energy"]) <= _TIE_TOL and values[k] < best["idx"]):
                best["idx"], best["energy"] = int(values[k]), float(energies[k])
        trace.append(best["energy"])
        return cvar_value(energies, config.beta, counts)

    init = np.zeros((config.depth + 1, n))
    init[0] = np.pi / 2 + rng.normal(0.0, 0.1, size=n)
    res = minimize(objective, init.ravel(), method="COBYLA",
                   options={"maxiter": config.maxiter, "rhobeg": np.pi / 4})

    # a final round at the trained angles, kept for histograms
    final_psi = simulate_ansatz(res.x, n, config.depth)
    final_counts = sample_bitstrings(final_psi, config.shots, rng)
    bits = index_to_bits(best["idx"], n)
    energy = qubo.energy(bits)
    return SolveResult(bits, energy, qubo.is_feasible(bits), state["samples"], trace, "cvar", {
        "iterations": len(trace),
        "beta": config.beta, "shots": config.shots, "depth": config.depth,
        "seed": config.seed, "maxiter": config.maxiter,
        "entangler": "cz-linear-chain",
        "final_cvar": float(res.fun),
        "angles": [float(a) for a in res.x],
        "final_counts": dict(final_counts),
    })
