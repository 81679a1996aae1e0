"""Command-line entry point: ``mrna-coopt {optimize,fold,score,export-qubo}``.

Exit codes: 0 success, 2 validation error, 3 solver infeasibility or cap,
4 I/O error. JSON output carries ``"schema": 1``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace

from . import __version__
from .codon import REPEAT_RULES, RARITY_SIGNS, CodonTableError, load_codon_table
from .energy import EnergyError, EnergyParamsError, energy_breakdown, load_energy_params
from .pipeline import (SCHEMA_VERSION, SOLVERS, FoldConfig, InfeasibleFoldError, NmConfig, fold_sequence,
                       history_rows, optimize)
from .seq_core import SequenceError, StructureError, parse_amino_sequence, parse_dot_bracket, parse_nucleotide_sequence
from .solvers import energy_histogram
from .structure import UA_RULES, build_model, format_qubo, to_penalty_qubo

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("data files")
    g.add_argument("--codon-table", metavar="PATH", help="codon usage file 'AA,codon,frequency' (default: bundled H. sapiens)")
    g.add_argument("--energy-params", metavar="PATH", help="nearest-neighbour parameter file (default: bundled)")


def _add_fold_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("structure model and solver")
    g.add_argument("--solver", choices=SOLVERS, default="exact",
                   help="exact: enumeration up to 20 variables, MILP above; milp; sa; cvar")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--stack-reward", type=float, default=-1.0, help="reward r for consecutive quartets")
    g.add_argument("--ua-penalty", type=float, default=0.5, help="U-A terminal penalty p")
    g.add_argument("--ua-rule", choices=UA_RULES, default="outer")
    g.add_argument("--min-loop", type=int, default=3, help="minimum hairpin loop length")
    g.add_argument("--min-stem", type=int, default=3, help="minimum helix length (pairs) a quartet must belong to")
    g.add_argument("--penalty", type=float, default=None, help="conflict penalty weight (default: automatic)")
    g.add_argument("--sweeps", type=int, default=1000, help="simulated annealing sweeps")
    g.add_argument("--restarts", type=int, default=16, help="simulated annealing replicas")
    g.add_argument("--shots", type=int, default=2**13, help="CVaR samples per evaluation")
    g.add_argument("--beta", type=float, default=0.25, help="CVaR tail fraction")
    g.add_argument("--depth", type=int, default=1, help="ansatz entangling layers")
    g.add_argument("--cvar-maxiter", type=int, default=100, help="CVaR optimizer iteration cap")


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.add_argument("--output", "-o", metavar="PATH", help="write the report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mrna-coopt",
                                     description="Co-optimise mRNA codon usage and secondary structure.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", metavar="PATH",
                        help="'key = value' file mirroring long flags; command-line flags win")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="run the full codon/structure optimisation")
    p.add_argument("--aa", required=True, help="amino-acid sequence (one-letter codes)")
    p.add_argument("--alpha", type=float, default=-0.5, help="CAI weight in f = alpha*CAI + MFE")
    p.add_argument("--theta0", type=float, nargs=3, default=(0.0, 0.0, 0.0), metavar=("C", "P", "R"))
    p.add_argument("--max-iter", type=int, default=200, help="Nelder-Mead iteration cap")
    p.add_argument("--repeat-rule", choices=REPEAT_RULES, default="run_minus_one_squared")
    p.add_argument("--rarity-sign", choices=RARITY_SIGNS, default="log",
                   help="log: rarity term uses ln f; neg_log: uses -ln f")
    p.add_argument("--no-cache", action="store_true", help="refold every evaluated sequence")
    p.add_argument("--history", metavar="PATH", help="write every evaluation as CSV")
    _add_data_flags(p)
    _add_fold_flags(p)
    _add_output_flags(p)

    p = sub.add_parser("fold", help="predict the structure of one nucleotide sequence")
    p.add_argument("--seq", required=True)
    p.add_argument("--histogram", metavar="PATH", help="CSV 'energy,count' of feasible final samples (cvar)")
    _add_data_flags(p)
    _add_fold_flags(p)
    _add_output_flags(p)

    p = sub.add_parser("score", help="free-energy breakdown of a sequence in a given structure")
    p.add_argument("--seq", required=True)
    p.add_argument("--structure", required=True, help="dot-bracket string")
    _add_data_flags(p)
    _add_output_flags(p)

    p = sub.add_parser("export-qubo", help="write the penalty QUBO of a sequence")
    p.add_argument("--seq", required=True)
    p.add_argument("--energy-params", metavar="PATH")
    for flag in ("--stack-reward", "--ua-penalty", "--penalty"):
        p.add_argument(flag, type=float, default={"--stack-reward": -1.0, "--ua-penalty": 0.5}.get(flag))
    p.add_argument("--ua-rule", choices=UA_RULES, default="outer")
    p.add_argument("--min-loop", type=int, default=3)
    p.add_argument("--min-stem", type=int, default=3)
    p.add_argument("--output", "-o", metavar="PATH")
    return parser


_FLAG_ONLY = {"no-cache"}


def config_to_argv(text: str) -> list[str]:
    """Turn 'key = value' lines into long-option tokens."""
    argv = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"config line {lineno}: expected 'key = value'", EXIT_VALIDATION)
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("_", "-")
        if key in _FLAG_ONLY:
            if value.lower() in ("1", "true", "yes", "on"):
                argv.append(f"--{key}")
            continue
        argv.append(f"--{key}")
        argv.extend(value.split())
    return argv


def _split_config(argv: list[str]) -> tuple[list[str], str | None]:
    rest, path = [], None
    it = iter(argv)
    for tok in it:
        if tok == "--config":
            path = next(it, None)
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
        else:
            rest.append(tok)
    return rest, path


def _fold_config(args) -> FoldConfig:
    return FoldConfig(solver=args.solver, seed=args.seed, stack_reward=args.stack_reward,
                      ua_penalty=args.ua_penalty, min_loop=args.min_loop, min_stem=args.min_stem,
                      ua_rule=args.ua_rule, penalty=args.penalty, sweeps=args.sweeps,
                      restarts=args.restarts, beta=args.beta, shots=args.shots, depth=args.depth,
                      cvar_maxiter=args.cvar_maxiter)


def _load_data(args, codons: bool = True):
    try:
        table = load_codon_table(args.codon_table) if codons else None
        params = load_energy_params(args.energy_params)
    except OSError as exc:
        raise CliError(f"cannot read data file: {exc}", EXIT_IO) from None
    return table, params


def _emit(args, payload: dict, text: str) -> None:
    out = json.dumps(payload, indent=2) + "\n" if args.format == "json" else text
    _write(args.output, out)


def _write(path: str | None, content: str) -> None:
    if path is None:
        sys.stdout.write(content)
        return
    try:
        with open(path, "w", newline="") as fh:
            fh.write(content)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from None


def _csv(rows: list[dict], header: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def cmd_optimize(args) -> int:
    amino = parse_amino_sequence(args.aa)
    table, params = _load_data(args)
    config = NmConfig(alpha=args.alpha, theta0=tuple(args.theta0), max_iter=args.max_iter,
                      repeat_rule=args.repeat_rule, rarity_sign=args.rarity_sign,
                      use_cache=not args.no_cache, fold=_fold_config(args))
    report = optimize(amino, config, table, params)
    payload = report.to_dict()
    text = (f"aa         {report.aa}\nnt         {report.nt}\nstructure  {report.structure}\n"
            f"cai        {report.cai:.4f}\nmfe        {report.mfe:.3f}\nobjective  {report.objective:.4f}\n"
            f"theta      {' '.join(f'{v:.4f}' for v in report.theta)}\n"
            f"iterations {report.iterations}  evaluations {report.evaluations}  cache hits {report.cache_hits}\n")
    _emit(args, payload, text)
    if args.history:
        rows = history_rows(report.records)
        _write(args.history, _csv(rows, list(rows[0])))
    return EXIT_OK  # an iteration cap still yields a best-so-far report


def cmd_fold(args) -> int:
    seq = parse_nucleotide_sequence(args.seq)
    _, params = _load_data(args, codons=False)
    config = _fold_config(args)
    fold, result = fold_sequence(seq, params, config, seed=args.seed)
    payload = {"schema": SCHEMA_VERSION, "seq": str(seq), "structure": fold.structure, "mfe": fold.mfe,
               "model_energy": fold.model_energy, "num_vars": fold.num_vars, "solver": fold.solver,
               "seed": args.seed, "samples": fold.samples, "bitstring": result.bitstring}
    if config.solver == "cvar":
        payload["cvar"] = {k: result.metadata[k] for k in ("iterations", "beta", "shots", "depth",
                                                          "entangler", "final_cvar")}
    _emit(args, payload, f"{seq}\n{fold.structure} ({fold.mfe:.2f})\n")
    if args.histogram:
        if config.solver != "cvar":
            raise CliError("--histogram needs --solver cvar", EXIT_VALIDATION)
        model = build_model(seq, params, stack_reward=config.stack_reward, ua_penalty=config.ua_penalty,
                            min_loop=config.min_loop, min_stem=config.min_stem, ua_rule=config.ua_rule)
        qubo = to_penalty_qubo(model, config.penalty)
        hist = energy_histogram(qubo, result.metadata["final_counts"])
        _write(args.histogram, _csv([{"energy": e, "count": c} for e, c in hist], ["energy", "count"]))
    return EXIT_OK


def cmd_score(args) -> int:
    seq = parse_nucleotide_sequence(args.seq)
    pairs = parse_dot_bracket(args.structure)
    if pairs.n != len(seq):
        raise CliError(f"structure length {pairs.n} does not match sequence length {len(seq)}", EXIT_VALIDATION)
    _, params = _load_data(args, codons=False)
    loops = []
    for loop, energy in energy_breakdown(seq, pairs, params):
        loops.append({"kind": loop.kind, "closing": list(loop.closing) if loop.closing else None,
                      "branches": [list(b) for b in loop.branches], "unpaired": loop.unpaired,
                      "energy": round(energy, 10)})
    total = sum(lp["energy"] for lp in loops)
    payload = {"schema": SCHEMA_VERSION, "seq": str(seq), "structure": args.structure.strip(),
               "mfe": round(total, 10), "loops": loops}
    text = "".join(f"{lp['kind']:<10}{lp['closing']}\t{lp['energy']:.2f}\n" for lp in loops)
    _emit(args, payload, text + f"total\t{total:.2f}\n")
    return EXIT_OK


def cmd_export_qubo(args) -> int:
    seq = parse_nucleotide_sequence(args.seq)
    try:
        params = load_energy_params(args.energy_params)
    except OSError as exc:
        raise CliError(f"cannot read data file: {exc}", EXIT_IO) from None
    model = build_model(seq, params, stack_reward=args.stack_reward, ua_penalty=args.ua_penalty,
                        min_loop=args.min_loop, min_stem=args.min_stem, ua_rule=args.ua_rule)
    _write(args.output, format_qubo(to_penalty_qubo(model, args.penalty)))
    return EXIT_OK


COMMANDS = {"optimize": cmd_optimize, "fold": cmd_fold, "score": cmd_score, "export-qubo": cmd_export_qubo}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv, config_path = _split_config(argv)
        if config_path:
            try:
                with open(config_path) as fh:
                    extra = config_to_argv(fh.read())
            except OSError as exc:
                raise CliError(f"cannot read config {config_path}: {exc}", EXIT_IO) from None
            # subcommand first, config values next, explicit flags last so they win
            cmd_pos = next((k for k, tok in enumerate(argv) if tok in COMMANDS), None)
            if cmd_pos is not None:
                argv = argv[:cmd_pos + 1] + extra + argv[cmd_pos + 1:]
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (SequenceError, StructureError, CodonTableError, EnergyParamsError, EnergyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (InfeasibleFoldError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
