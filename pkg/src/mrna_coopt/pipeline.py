"""Composite objective and the Nelder-Mead outer loop over codon weights.

One evaluation of ``f(theta) = alpha * CAI + MFE``:

1. solve the codon-selection problem for ``theta``;
2. score the resulting sequence's CAI;
3. fold it with the quartet model and the chosen structure solver;
4. evaluate the folded structure's free energy.

Folds are cached by nucleotide sequence. Stochastic solvers are seeded from
(run seed, sequence), so a fold depends only on its sequence and the cache
never changes a result.
"""

from __future__ import annotations

import hashlib
import math
import threading
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .codon import CodonTable, Theta, build_problem, cai, load_codon_table, solve_codon
from .energy import EnergyParams, load_energy_params, mfe_eval
from .seq_core import AminoAcidSeq, NucleotideSeq, parse_amino_sequence, render_dot_bracket
from .solvers import (EXHAUSTIVE_PREFERRED, CvarConfig, SolveResult, solve_cvar_variational, solve_exact,
                      solve_milp, solve_sa)
from .structure import (DEFAULT_MIN_LOOP, DEFAULT_MIN_STEM, DEFAULT_STACK_REWARD, DEFAULT_UA_PENALTY,
                        build_model, decode, to_penalty_qubo)

SOLVERS = ("exact", "milp", "sa", "cvar")
SCHEMA_VERSION = 1


class InfeasibleFoldError(RuntimeError):
    """The structure solver returned a selection that violates a conflict constraint."""


@dataclass(frozen=True)
class FoldConfig:
    solver: str = "exact"
    seed: int = 0
    stack_reward: float = DEFAULT_STACK_REWARD
    ua_penalty: float = DEFAULT_UA_PENALTY
    min_loop: int = DEFAULT_MIN_LOOP
    min_stem: int = DEFAULT_MIN_STEM
    ua_rule: str = "outer"
    penalty: float | None = None
    sweeps: int = 1000
    restarts: int = 16
    beta: float = 0.25
    shots: int = 2**13
    depth: int = 1
    cvar_maxiter: int = 100

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}, got {self.solver!r}")


@dataclass(frozen=True)
class NmConfig:
    alpha: float = -0.5
    theta0: tuple[float, float, float] = (0.0, 0.0, 0.0)
    initial_step: float = 1.0
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    fatol: float = 1e-6
    xatol: float = 1e-4
    max_iter: int = 200
    repeat_rule: str = "run_minus_one_squared"
    rarity_sign: str = "log"
    use_cache: bool = True
    fold: FoldConfig = field(default_factory=FoldConfig)

    def __post_init__(self):
        for name in ("reflection", "expansion", "contraction", "shrink", "fatol", "xatol", "initial_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not all(math.isfinite(v) for v in self.theta0):
            raise ValueError("theta0 must be finite")


@dataclass(frozen=True)
class FoldResult:
    structure: str
    mfe: float
    model_energy: float
    num_vars: int
    solver: str
    samples: int
    solver_iterations: int


def solver_seed(run_seed: int, sequence: str) -> int:
    digest = hashlib.sha256(f"{run_seed}:{sequence}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


def fold_sequence(nt: NucleotideSeq | str, params: EnergyParams, config: FoldConfig = FoldConfig(),
                  seed: int | None = None) -> tuple[FoldResult, SolveResult]:
    """Predict the structure of ``nt`` with the quartet model and score its free energy."""
    seq = str(nt)
    model = build_model(seq, params, stack_reward=config.stack_reward, ua_penalty=config.ua_penalty,
                        min_loop=config.min_loop, min_stem=config.min_stem, ua_rule=config.ua_rule)
    qubo = to_penalty_qubo(model, config.penalty)
    if seed is None:
        seed = solver_seed(config.seed, seq)
    if config.solver == "exact" and model.num_vars <= EXHAUSTIVE_PREFERRED:
        result = solve_exact(qubo)
    elif config.solver in ("exact", "milp"):
        result = solve_milp(model, config.penalty)
    elif config.solver == "sa":
        result = solve_sa(qubo, sweeps=config.sweeps, restarts=config.restarts, seed=seed)
    else:
        result = solve_cvar_variational(qubo, CvarConfig(beta=config.beta, shots=config.shots,
                                                         depth=config.depth, seed=seed,
                                                         maxiter=config.cvar_maxiter))
    decoded = decode(result.bitstring, model.universe)
    if not decoded.feasible:
        raise InfeasibleFoldError(f"solver {config.solver} returned an infeasible selection "
                                  f"violating {list(decoded.violations)}")
    structure = render_dot_bracket(decoded.pairs)
    fold = FoldResult(structure, mfe_eval(seq, decoded.pairs, params), result.energy,
                      model.num_vars, config.solver, result.samples,
                      int(result.metadata.get("iterations", len(result.trace))))
    return fold, result


class FoldCache:
    """Sequence -> fold map; reads are lock-free, writes serialised."""

    def __init__(self):
        self._data: dict[str, FoldResult] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, seq: str) -> FoldResult | None:
        return self._data.get(seq)

    def put(self, seq: str, fold: FoldResult) -> None:
        with self._lock:
            self._data.setdefault(seq, fold)

    def __len__(self) -> int:
        return len(self._data)

    def __contains__(self, seq: str) -> bool:
        return seq in self._data


@dataclass(frozen=True)
class EvalRecord:
    theta: tuple[float, float, float]
    sequence: str
    cai: float
    structure: str
    mfe: float
    objective: float
    codon_objective: float
    num_vars: int
    solver_samples: int
    solver_iterations: int
    cache_hit: bool


class CompositeObjective:
    """Callable ``theta -> f`` recording every evaluation."""

    def __init__(self, amino: AminoAcidSeq | str, config: NmConfig = NmConfig(),
                 table: CodonTable | None = None, params: EnergyParams | None = None,
                 cache: FoldCache | None = None):
        self.amino = parse_amino_sequence(amino) if isinstance(amino, str) else amino
        self.config = config
        self.table = table if table is not None else load_codon_table()
        self.params = params if params is not None else load_energy_params()
        self.cache = cache if cache is not None else FoldCache()
        self.records: list[EvalRecord] = []
        self.folds_computed = 0

    def evaluate(self, theta: Theta | Sequence[float]) -> EvalRecord:
        theta = Theta.coerce(theta)
        problem = build_problem(self.amino, self.table, theta, self.config.repeat_rule,
                                self.config.rarity_sign)
        solution = solve_codon(problem)
        seq = str(solution.sequence)
        cai_value = cai(solution.sequence, self.table)
        fold = self.cache.get(seq) if self.config.use_cache else None
        hit = fold is not None
        if hit:
            self.cache.hits += 1
        else:
            fold, _ = fold_sequence(seq, self.params, self.config.fold)
            self.folds_computed += 1
            if self.config.use_cache:
                self.cache.misses += 1
                self.cache.put(seq, fold)
        record = EvalRecord(theta.as_tuple(), seq, cai_value, fold.structure, fold.mfe,
                            composite_value(cai_value, fold.mfe, self.config.alpha),
                            solution.objective, fold.num_vars, fold.samples,
                            fold.solver_iterations, hit)
        self.records.append(record)
        return record

    def __call__(self, theta) -> float:
        return self.evaluate(theta).objective


def composite_value(cai_value: float, mfe: float, alpha: float) -> float:
    return alpha * cai_value + mfe


def composite_objective(amino, theta, config: NmConfig = NmConfig(), cache: FoldCache | None = None,
                        table: CodonTable | None = None, params: EnergyParams | None = None) -> EvalRecord:
    return CompositeObjective(amino, config, table, params, cache).evaluate(theta)


@dataclass
class NmResult:
    x: np.ndarray
    fun: float
    iterations: int
    evaluations: int
    converged: bool
    history: list[tuple[tuple[float, ...], float]]
    best_trace: list[float]
    message: str


def nelder_mead(fun: Callable[[np.ndarray], float], x0, config: NmConfig = NmConfig()) -> NmResult:
    """Downhill simplex minimisation.

    Stops when both the spread of function values across the simplex is below
    ``fatol`` and every vertex lies within ``xatol`` (max-norm) of the best
    one, or after ``max_iter`` iterations. Every function evaluation is
    logged in ``history``; ``best_trace`` holds the best value after each
    iteration.
    """
    x0 = np.asarray(x0, dtype=float)
    dim = x0.size
    rho, chi, psi, sigma = config.reflection, config.expansion, config.contraction, config.shrink
    history: list[tuple[tuple[float, ...], float]] = []

    def f(x: np.ndarray) -> float:
        value = float(fun(x.copy()))
        history.append((tuple(float(v) for v in x), value))
        return value

    sim = np.vstack([x0] + [x0 + config.initial_step * np.eye(dim)[k] for k in range(dim)])
    fsim = np.array([f(v) for v in sim])
    iterations = 0
    converged = False
    best_trace: list[float] = []
    while True:
        order = np.argsort(fsim, kind="stable")
        sim, fsim = sim[order], fsim[order]
        if (np.max(np.abs(fsim[1:] - fsim[0])) < config.fatol
                and np.max(np.abs(sim[1:] - sim[0])) < config.xatol):
            converged = True
            break
        if iterations >= config.max_iter:
            break
        iterations += 1
        centroid = sim[:-1].mean(axis=0)
        worst = sim[-1]
        xr = centroid + rho * (centroid - worst)
        fr = f(xr)
        shrink = False
        if fr < fsim[0]:
            xe = centroid + rho * chi * (centroid - worst)
            fe = f(xe)
            sim[-1], fsim[-1] = (xe, fe) if fe < fr else (xr, fr)
        elif fr < fsim[-2]:
            sim[-1], fsim[-1] = xr, fr
        elif fr < fsim[-1]:
            xc = centroid + psi * rho * (centroid - worst)
            fc = f(xc)
            if fc <= fr:
                sim[-1], fsim[-1] = xc, fc
            else:
                shrink = True
        else:
            xcc = centroid - psi * (centroid - worst)
            fcc = f(xcc)
            if fcc < fsim[-1]:
                sim[-1], fsim[-1] = xcc, fcc
            else:
                shrink = True
        if shrink:
            for k in range(1, dim + 1):
                sim[k] = sim[0] + sigma * (sim[k] - sim[0])
                fsim[k] = f(sim[k])
        best_trace.append(float(min(fsim.min(), best_trace[-1] if best_trace else math.inf)))

    k = int(np.argmin(fsim))
    message = "converged" if converged else f"iteration cap {config.max_iter} reached"
    return NmResult(sim[k].copy(), float(fsim[k]), iterations, len(history), converged,
                    history, best_trace, message)


@dataclass
class RunReport:
    aa: str
    nt: str
    cai: float
    mfe: float
    structure: str
    objective: float
    theta: list[float]
    alpha: float
    iterations: int
    evaluations: int
    cache_hits: int
    folds_computed: int
    solver: str
    seed: int
    converged: bool
    num_vars: int
    records: list[EvalRecord] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        out = asdict(self)
        del out["records"]
        out = {"schema": SCHEMA_VERSION, **out}
        return out


def optimize(amino: AminoAcidSeq | str, config: NmConfig = NmConfig(), table: CodonTable | None = None,
             params: EnergyParams | None = None, cache: FoldCache | None = None) -> RunReport:
    """Run the outer Nelder-Mead search and report the best evaluation seen."""
    objective = CompositeObjective(amino, config, table, params, cache)
    result = nelder_mead(objective, np.array(config.theta0, dtype=float), config)
    best = min(objective.records, key=lambda r: r.objective)  # first occurrence wins ties
    return RunReport(
        aa=str(objective.amino), nt=best.sequence, cai=best.cai, mfe=best.mfe,
        structure=best.structure, objective=best.objective, theta=list(best.theta),
        alpha=config.alpha, iterations=result.iterations, evaluations=result.evaluations,
        cache_hits=objective.cache.hits, folds_computed=objective.folds_computed,
        solver=config.fold.solver, seed=config.fold.seed, converged=result.converged,
        num_vars=best.num_vars, records=list(objective.records),
    )


def history_rows(records: Sequence[EvalRecord]) -> list[dict]:
    return [{"evaluation": k, "theta_c": r.theta[0], "theta_p": r.theta[1], "theta_r": r.theta[2],
             "sequence": r.sequence, "cai": r.cai, "mfe": r.mfe, "objective": r.objective,
             "structure": r.structure, "cache_hit": r.cache_hit}
            for k, r in enumerate(records, start=1)]
