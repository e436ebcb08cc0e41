"""Command line entry point.

Subcommands::

    tree build|check     build a Bergman tree / run the structural suite on it
    mo eval              mean oscillation at given points
    op spectrum          singular values of the truncated commutator or Hankel model
    verify <id>          one named check (see ``verify --list``)
    theorem ratio        Schatten sum versus discrete oscillation sum
    cutoff               divergence below the cutoff, plateau above it
    report               summarize or re-emit a saved report

Every subcommand takes ``--config`` (one JSON file whose keys are the
ExperimentConfig fields), ``--out`` (output stem) and ``--seed``.  The exit
code is 0 iff every assertion of the produced report passed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .config import ExperimentConfig
from .errors import BergschattenError
from .operators import (
    build_basis,
    commutator_singular_values,
    entrywise_bound_check,
    hankel_matrix,
    hankel_zbar_spectrum_exact,
    singular_values,
)
from .report import Report, emit_report, parse_report
from .tree import build_tree

VERIFY_IDS = ex.CHECK_IDS + ("reverse_cs", "chain", "entrywise", "cutoff_reproduction")


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _finish(rep: Report, args) -> int:
    if args.out:
        for p in emit_report(rep, args.out, include_timing=args.timing):
            print(f"wrote {p}")
    print(rep.summary())
    return 0 if rep.passed else 1


def _points(text: str, n: int) -> np.ndarray:
    """Parse ``"x0,y0;x1,y1"`` (n = 1: re,im per point) into an (m, n) complex array."""
    rows = []
    for chunk in filter(None, (c.strip() for c in text.split(";"))):
        v = [float(x) for x in chunk.split(",")]
        if len(v) != 2 * n:
            raise SystemExit(f"each point needs {2 * n} reals, got {chunk!r}")
        rows.append(np.array(v[0::2]) + 1j * np.array(v[1::2]))
    return np.array(rows)


# ------------------------------------------------------------------ commands


def cmd_tree(args) -> int:
    cfg = _config(args)
    mode = "dyadic" if cfg.n == 1 else "net"
    tree = build_tree(cfg.lambda_value, int(cfg.depth), n=cfg.n, mode=mode, seed=cfg.seed)
    if args.action == "build":
        rep = Report("tree_build", {"config": cfg.to_dict(), "mode": mode})
        for N, c in enumerate(tree.counts):
            rep.add_row("levels", level=N, cells=int(c), r0=tree.radii(N)[0], r1=tree.radii(N)[1])
        rep.constants["nodes"] = len(tree.nodes)
        if args.out:
            path = Path(args.out).with_suffix(".tree.jsonl")
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(tree.to_jsonl())
            print(f"wrote {path}")
        return _finish(rep, args)
    return _finish(ex.run_geometry_suite(cfg, tree=tree), args)


def cmd_mo(args) -> int:
    cfg = _config(args)
    f = cfg.symbol_obj
    pts = _points(args.points, cfg.n)
    mo = ex.MOEvaluator(f, cfg.gamma, cfg.quad)
    vals = mo.many(pts)
    rep = Report("mo_eval", {"config": cfg.to_dict(), "points": args.points})
    for z, v in zip(pts, vals):
        rep.add_row("mo", z=[complex(c) for c in z], mo=float(v))
    return _finish(rep, args)


def cmd_op(args) -> int:
    cfg = _config(args)
    f = cfg.symbol_obj
    if cfg.n != 1:
        raise SystemExit("operator models exist for n = 1 only")
    basis = build_basis(cfg.D_max, cfg.gamma)
    rep = Report("op_spectrum", {"config": cfg.to_dict(), "operator": args.operator})
    if args.operator == "hankel":
        s = singular_values(hankel_matrix(basis, f)).values
    else:
        spec, drop = commutator_singular_values(basis, f)
        s = spec.values
        rep.constants["dropped_mass"] = drop
    exact = hankel_zbar_spectrum_exact(cfg.gamma, len(s)).values if ex.is_zbar(f) and args.operator == "hankel" else None
    for i, v in enumerate(s[: args.count]):
        row = {"index": i, "sigma": float(v)}
        if exact is not None:
            row["exact"] = float(exact[i])
        rep.add_row("spectrum", **row)
    for p in cfg.p_list:
        rep.constants[f"schatten_p={p}"] = float(np.sum(s[s > 0] ** p))
    if exact is not None:
        k = min(args.count, cfg.D_max // 2)  # the truncation is exact well below D
        err = float(np.max(np.abs(s[:k] - exact[:k]))) if k else 0.0
        rep.check_le("matches_exact_spectrum", err, 1e-8)
    return _finish(rep, args)


def _entrywise_report(cfg: ExperimentConfig, trials: int = 200) -> Report:
    rng = np.random.default_rng(cfg.seed)
    rep = Report("entrywise", {"trials": trials, "seed": cfg.seed})
    worst = np.inf
    for t in range(trials):
        m, k = rng.integers(1, 31, size=2)
        A = rng.standard_normal((m, k)) + 1j * rng.standard_normal((m, k))
        for p in (0.5, 1.0, 2.0):
            worst = min(worst, entrywise_bound_check(A, p)[1])
    rep.check("entrywise_bound", worst + 1e-10, f"worst slack {worst:.3g}")
    return rep


def cmd_verify(args) -> int:
    if args.list or not args.id:
        print("\n".join(VERIFY_IDS))
        return 0
    cfg = _config(args)
    if args.id in ex.CHECK_IDS:
        rep = ex.run_geometry_suite(cfg, checks=[args.id])
    elif args.id == "reverse_cs":
        rep = ex.run_reverse_cs(cfg, enforce_lambda=not args.no_lambda_check)
    elif args.id == "chain":
        rep = ex.run_discretization_chain(cfg)
    elif args.id == "entrywise":
        rep = _entrywise_report(cfg)
    elif args.id == "cutoff_reproduction":
        rep = ex.run_cutoff_reproduction(cfg)
    else:
        raise SystemExit(f"unknown id {args.id!r}; choose from {', '.join(VERIFY_IDS)}")
    return _finish(rep, args)


def cmd_theorem(args) -> int:
    return _finish(ex.run_main_theorem_ratio(_config(args)), args)


def cmd_cutoff(args) -> int:
    cfg = _config(args)
    eps = tuple(args.eps) if args.eps else ex.DEFAULT_EPS
    return _finish(ex.run_cutoff_divergence(cfg, eps=eps), args)


def cmd_report(args) -> int:
    rep = parse_report(Path(args.path).read_text())
    return _finish(rep, args)


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (keys are ExperimentConfig fields)")
    common.add_argument("--out", help="output stem for <stem>.json and CSV tables")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--timing", action="store_true", help="include wall time in written reports")

    ap = argparse.ArgumentParser(prog="bergschatten", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tree", parents=[common], help="build or check a Bergman tree")
    p.add_argument("action", choices=["build", "check"])
    p.set_defaults(func=cmd_tree)

    p = sub.add_parser("mo", parents=[common], help="mean oscillation")
    p.add_argument("action", choices=["eval"])
    p.add_argument("--points", required=True, help='points as "re,im;re,im" (n reals pairs per point)')
    p.set_defaults(func=cmd_mo)

    p = sub.add_parser("op", parents=[common], help="operator spectra")
    p.add_argument("action", choices=["spectrum"])
    p.add_argument("--operator", choices=["commutator", "hankel"], default="commutator")
    p.add_argument("--count", type=int, default=50, help="singular values to tabulate")
    p.set_defaults(func=cmd_op)

    p = sub.add_parser("verify", parents=[common], help="run one named check")
    p.add_argument("id", nargs="?")
    p.add_argument("--list", action="store_true")
    p.add_argument("--no-lambda-check", action="store_true", help="skip the 8 C2 lambda < 1 validation (reverse_cs)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("theorem", parents=[common], help="Schatten / oscillation-sum ratio")
    p.add_argument("action", choices=["ratio"])
    p.set_defaults(func=cmd_theorem)

    p = sub.add_parser("cutoff", parents=[common], help="divergence at and below the cutoff")
    p.add_argument("--eps", type=float, nargs="+")
    p.set_defaults(func=cmd_cutoff)

    p = sub.add_parser("report", parents=[common], help="summarize or re-emit a saved JSON report")
    p.add_argument("path")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BergschattenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
