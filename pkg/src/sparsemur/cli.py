"""Command-line front end.

Subcommands: ``solve``, ``factorize``, ``bench-snnls``, ``bench-block`` and
``diag``.  Results go to ``--out`` (default: ``$SPARSEMUR_OUT`` or
``./sparsemur-out``).  Exit status is 0 on success, 2 for invalid input and
3 for numerical failures.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .blocksparse import BlockStructure
from .diagnostics import kkt_residual, sparsity_profile
from .exceptions import NumericalError, ValidationError
from .experiments import (
    SolverEntry,
    TrialSpec,
    default_block_solvers,
    default_solvers,
    sweep,
)
from .iohub import RunReport, read_config, read_matrix, read_pgm_patches, write_csv_rows, write_matrix, write_report
from .priors import BLOCK_FAMILIES, PriorSpec, canonical_family
from .snmf import snmf_solve
from .snnls import UPDATE_RULES, AnnealSchedule, SolverConfig, snnls_solve

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
OUT_ENV = "SPARSEMUR_OUT"
DEFAULT_OUT = "sparsemur-out"

logger = logging.getLogger("sparsemur")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE) from ValidationError(f"{self.prog}: error: {message}")


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _common(p):
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    p.add_argument("--config", help="INI file; command-line flags take precedence")
    p.add_argument("-v", "--verbose", action="store_true")


def _solver_flags(p, lam_default=True):
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--inner-iters", type=int, help="multiplicative updates per EM iteration")
    p.add_argument("--outer-cap", type=int, help="maximum number of EM iterations")
    p.add_argument("--conv-tol", type=float)
    p.add_argument("--zero-tol", type=float)


def build_parser():
    parser = _Parser(prog="sparsemur", description="Sparse NNLS / NMF with scale-mixture priors.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="sparse NNLS: estimate H >= 0 with X ~ W H")
    _common(p)
    p.add_argument("--x", required=True, help="data matrix X (d x m)")
    p.add_argument("--w", required=True, help="dictionary W (d x n)")
    p.add_argument("--h0", help="starting point (n x m); all-ones by default")
    p.add_argument("--prior", help="prior family (rgdp, rst, exponential, ..., brst, brgdp)")
    p.add_argument("--tau", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--blocks", help="JSON list of index lists, or an integer block size")
    p.add_argument("--update-rule", choices=UPDATE_RULES)
    p.add_argument("--anneal", action="store_true", help="anneal tau (Student's-t priors)")
    p.add_argument("--anneal-steps", type=int)
    _solver_flags(p)
    p.add_argument("--format", choices=("mtx", "csv"), help="format of the written H")

    p = sub.add_parser("factorize", help="sparse NMF: X ~ W H")
    _common(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--x", help="data matrix X (d x m)")
    src.add_argument("--pgm", nargs="+", help="PGM images cut into patches")
    p.add_argument("--patch", type=int, default=8, help="patch size for --pgm")
    p.add_argument("--n", type=int, help="dictionary size (default 3 d)")
    p.add_argument("--prior-h")
    p.add_argument("--tau-h", type=float)
    p.add_argument("--prior-w", help="prior on W (default: none, i.e. plain NMF rule)")
    p.add_argument("--tau-w", type=float)
    p.add_argument("--no-normalize", action="store_true", help="skip unit-norm rescaling of W")
    _solver_flags(p)
    p.add_argument("--format", choices=("mtx", "csv"))

    for name, helptext in (("bench-snnls", "synthetic sparse recovery suite"),
                           ("bench-block", "synthetic block-sparse recovery suite")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        p.add_argument("--d", type=int)
        p.add_argument("--n", type=_ints, help="one or more dictionary sizes")
        p.add_argument("--m", type=int)
        p.add_argument("--k", type=_ints, help="one or more sparsity levels")
        p.add_argument("--block-size", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--lambdas", type=_floats)
        p.add_argument("--solvers", help="comma-separated subset of the configured solvers")
        p.add_argument("--no-refine", action="store_true")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--timing", action="store_true", help="include wall times (not reproducible)")

    p = sub.add_parser("diag", help="KKT residual and sparsity profile of a given H")
    _common(p)
    p.add_argument("--x", required=True)
    p.add_argument("--w", required=True)
    p.add_argument("--h", required=True)
    p.add_argument("--prior")
    p.add_argument("--tau", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--blocks")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--threshold", type=float, default=1e-6)
    return parser


# ----------------------------------------------------------------- helpers


def _config_section(args, section):
    if not args.config:
        return {}
    return read_config(args.config).get(section, {})


def _pick(flag, conf, key, default=None):
    if flag is not None:
        return flag
    return conf.get(key, default)


def _out_dir(args):
    import os

    out = Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_blocks(value, n):
    if value is None:
        return None
    if isinstance(value, int):
        return BlockStructure.contiguous(n, value)
    if isinstance(value, list):
        return BlockStructure(value)
    text = str(value).strip()
    if text.isdigit():
        return BlockStructure.contiguous(n, int(text))
    try:
        groups = json.loads(text)
    except json.JSONDecodeError:
        raise ValidationError(f"--blocks must be a JSON list of lists or a block size, got {text!r}") from None
    return _parse_blocks(groups, n)


def _make_prior(family, tau, alpha, blocks_value, n):
    if family is None:
        return None
    family = canonical_family(family)
    blocks = None
    if family in BLOCK_FAMILIES:
        if blocks_value is None:
            raise ValidationError(f"prior {family!r} requires --blocks")
        blocks = _parse_blocks(blocks_value, n)
    elif blocks_value is not None:
        raise ValidationError(f"--blocks given but prior {family!r} is not a block prior")
    return PriorSpec(family, 0.1 if tau is None else tau, alpha, blocks=blocks)


def _solver_config(args, conf, anneal=None, update_rule=None):
    kw = {}
    for key, attr in (("lam", "lambda"), ("inner_iters", "inner_iters"), ("outer_cap", "outer_cap"),
                      ("conv_tol", "conv_tol"), ("zero_tol", "zero_tol")):
        val = _pick(getattr(args, key, None), conf, attr)
        if val is not None:
            kw[key] = val
    if update_rule is not None:
        kw["update_rule"] = update_rule
    return SolverConfig(anneal=anneal, **kw)


def _matrix_suffix(args):
    return ".csv" if getattr(args, "format", None) == "csv" else ".mtx"


def _write_trace(values, path, extra=None):
    rows = []
    for i, v in enumerate(values):
        row = {"step": i, "objective": float(v)}
        if extra:
            for key, seq in extra.items():
                row[key] = seq[i]
        rows.append(row)
    write_csv_rows(rows, path)


# ----------------------------------------------------------------- commands


def cmd_solve(args):
    conf = _config_section(args, "solve")
    X = read_matrix(args.x)
    W = read_matrix(args.w)
    H0 = read_matrix(args.h0) if args.h0 else None
    prior = _make_prior(_pick(args.prior, conf, "prior"), _pick(args.tau, conf, "tau"),
                        _pick(args.alpha, conf, "alpha"), _pick(args.blocks, conf, "blocks"), W.shape[1])
    anneal = None
    if args.anneal or conf.get("anneal"):
        steps = _pick(args.anneal_steps, conf, "anneal_steps", AnnealSchedule().max_steps)
        anneal = AnnealSchedule(max_steps=steps)
    config = _solver_config(args, conf, anneal, _pick(args.update_rule, conf, "update_rule"))
    res = snnls_solve(X, W, H0=H0, prior=prior, config=config)

    out = _out_dir(args)
    write_matrix(res.H, out / ("H" + _matrix_suffix(args)))
    _write_trace(res.objective_trace, out / "objective_trace.csv", {"tau": res.tau_history})
    profile = sparsity_profile(res.H)
    report = RunReport(
        command="solve",
        spec={"x": str(args.x), "w": str(args.w), "h0": args.h0,
              "prior": res.prior.to_dict() if res.prior else None, "config": config.to_dict()},
        metrics={"kkt": res.kkt.to_dict(), "iterations": res.iterations, "converged": res.converged,
                 "final_objective": res.objective_trace[-1], "nnz_mean": profile.mean_count,
                 "condition_held": res.condition_held},
    )
    write_report(report, out / "report.json")
    print(f"solve: {res.iterations} EM iterations, objective {res.objective_trace[-1]:.6g}, "
          f"KKT {res.kkt_residual:.3g}; wrote {out}")
    return EXIT_OK


def cmd_factorize(args):
    conf = _config_section(args, "factorize")
    if args.x:
        X = read_matrix(args.x)
        source = {"x": str(args.x)}
    else:
        X = np.hstack([read_pgm_patches(p, args.patch) for p in args.pgm])
        source = {"pgm": [str(p) for p in args.pgm], "patch": args.patch}
    n = _pick(args.n, conf, "n", 3 * X.shape[0])
    prior_h = _make_prior(_pick(args.prior_h, conf, "prior_h"), _pick(args.tau_h, conf, "tau_h"), None,
                          conf.get("blocks_h"), n)
    prior_w = _make_prior(_pick(args.prior_w, conf, "prior_w"), _pick(args.tau_w, conf, "tau_w"), None,
                          conf.get("blocks_w"), n)
    config = _solver_config(args, conf)
    normalize = not (args.no_normalize or conf.get("normalize") is False)
    res = snmf_solve(X, n, prior_h=prior_h, prior_w=prior_w, config=config, normalize_w=normalize)

    out = _out_dir(args)
    suffix = _matrix_suffix(args)
    write_matrix(res.W, out / ("W" + suffix))
    write_matrix(res.H, out / ("H" + suffix))
    _write_trace(res.objective_trace, out / "objective_trace.csv")
    report = RunReport(
        command="factorize",
        spec={**source, "n": n, "prior_h": res.prior_h.to_dict(), "prior_w": res.prior_w.to_dict(),
              "config": config.to_dict(), "normalize_w": normalize},
        metrics={"outer_iters": res.outer_iters, "converged": res.converged,
                 "final_objective": res.objective_trace[-1],
                 "kkt_w": res.kkt_residuals[0], "kkt_h": res.kkt_residuals[1],
                 "h_nnz_mean": sparsity_profile(res.H).mean_count,
                 "rel_fit_error": float(np.linalg.norm(X - res.W @ res.H) / max(np.linalg.norm(X), 1e-300))},
    )
    write_report(report, out / "report.json")
    print(f"factorize: {res.outer_iters} iterations, objective {res.objective_trace[-1]:.6g}; wrote {out}")
    return EXIT_OK


_SOLVER_KEYS = ("method", "family", "tau", "lambdas", "inner_iters", "outer_cap")


def _solvers_from_config(conf):
    """``[solver.NAME]`` sections become SolverEntry objects, in file order."""
    entries = []
    for section, values in conf.items():
        if not section.startswith("solver."):
            continue
        name = section.split(".", 1)[1]
        unknown = set(values) - set(_SOLVER_KEYS) - {"anneal_steps", "anneal_trigger"}
        if unknown:
            raise ValidationError(f"unknown keys in [{section}]: {sorted(unknown)}")
        kw = {k: values[k] for k in _SOLVER_KEYS if k in values}
        if "lambdas" in kw and not isinstance(kw["lambdas"], list):
            kw["lambdas"] = [kw["lambdas"]]
        if "anneal_steps" in values:
            trig = values.get("anneal_trigger", AnnealSchedule().trigger_scale)
            kw["anneal"] = AnnealSchedule(max_steps=values["anneal_steps"], trigger_scale=trig)
        entries.append(SolverEntry(name, **kw))
    return tuple(entries)


BENCH_DEFAULTS = {
    "bench-snnls": {"d": 100, "n": [400], "m": 20, "k": [10, 50], "block_size": None, "trials": 10, "seed": 0},
    "bench-block": {"d": 80, "n": [160], "m": 20, "k": [10], "block_size": 8, "trials": 10, "seed": 0},
}


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def cmd_bench(args):
    full = read_config(args.config) if args.config else {}
    conf = full.get("problem", {})
    defaults = BENCH_DEFAULTS[args.command]
    val = {key: _pick(getattr(args, key, None), conf, key, default) for key, default in defaults.items()}
    if args.command == "bench-block" and not val["block_size"]:
        raise ValidationError("bench-block needs a block size")
    lambdas = args.lambdas or conf.get("lambdas")
    solvers = _solvers_from_config(full)
    if not solvers:
        base = default_block_solvers if args.command == "bench-block" else default_solvers
        solvers = base(tuple(_as_list(lambdas))) if lambdas else base()
    elif lambdas:
        solvers = tuple(replace(s, lambdas=tuple(_as_list(lambdas))) for s in solvers)
    if args.solvers:
        wanted = [s.strip() for s in args.solvers.split(",")]
        names = {s.name for s in solvers}
        missing = [w for w in wanted if w not in names]
        if missing:
            raise ValidationError(f"unknown solver(s) {missing}; available: {sorted(names)}")
        solvers = tuple(s for s in solvers if s.name in wanted)
    refine = not (args.no_refine or conf.get("refine") is False)
    ks = [int(k) for k in _as_list(val["k"])]
    ns = [int(n) for n in _as_list(val["n"])]
    spec = TrialSpec(d=int(val["d"]), n=ns[0], m=int(val["m"]), k=ks[0], seed=int(val["seed"]),
                     trials=int(val["trials"]), block_size=val["block_size"], solvers=solvers, refine=refine)
    if args.jobs < 1 and args.jobs != -1:
        raise ValidationError("--jobs must be >= 1 or -1")

    t0 = time.perf_counter()
    result = sweep(spec, k_values=ks, n_values=ns, jobs=args.jobs, timing=args.timing)
    elapsed = time.perf_counter() - t0

    out = _out_dir(args)
    columns = ["solver", "method", "d", "n", "m", "k", "block_size", "trials", "lambda",
               "error_mean", "error_std", "error_raw_mean", "error_raw_std", "nnz_mean", "kkt_mean", "failures"]
    if args.timing:
        columns.append("time_mean")
    stem = args.command.replace("-", "_")
    write_csv_rows(result["rows"], out / f"{stem}.csv", columns)
    metrics = {"rows": result["rows"]}
    if args.timing:
        metrics["elapsed_seconds"] = elapsed
    report = RunReport(command=args.command,
                       spec={**result["spec"], "k_values": ks, "n_values": ns},
                       metrics=metrics, seed=spec.seed)
    write_report(report, out / f"{stem}.json")
    for row in result["rows"]:
        print(f"{row['solver']:>10s} n={row['n']:<4d} k={row['k']:<3d} "
              f"error={row['error_mean']:.4g} (raw {row['error_raw_mean']:.4g})")
    return EXIT_OK


def cmd_diag(args):
    conf = _config_section(args, "diag")
    X = read_matrix(args.x)
    W = read_matrix(args.w)
    H = read_matrix(args.h)
    prior = _make_prior(_pick(args.prior, conf, "prior"), _pick(args.tau, conf, "tau"),
                        _pick(args.alpha, conf, "alpha"), _pick(args.blocks, conf, "blocks"), W.shape[1])
    prior = prior or PriorSpec("noninformative")
    lam = float(_pick(args.lam, conf, "lambda", 0.0))
    report_kkt = kkt_residual(X, W, H, prior, lam)
    profile = sparsity_profile(H, args.threshold)
    out = _out_dir(args)
    write_csv_rows([{"index": i + 1, "mean_magnitude": float(v)} for i, v in enumerate(profile.curve)],
                   out / "sparsity_profile.csv")
    report = RunReport(
        command="diag",
        spec={"x": str(args.x), "w": str(args.w), "h": str(args.h), "prior": prior.to_dict(), "lambda": lam},
        metrics={"kkt": report_kkt.to_dict(), "nnz_counts": profile.counts.tolist(),
                 "nnz_mean": profile.mean_count, "threshold": args.threshold},
    )
    write_report(report, out / "diag.json")
    print(f"diag: normalized KKT residual {report_kkt.normalized_norm:.3g}, "
          f"mean support {profile.mean_count:.2f}; wrote {out}")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "factorize": cmd_factorize,
    "bench-snnls": cmd_bench,
    "bench-block": cmd_bench,
    "diag": cmd_diag,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ValidationError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"sparsemur {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"sparsemur {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
