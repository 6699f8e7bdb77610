"""Command-line front end: ``privmeasure {generate,rate,audit,eval}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 audit failure.
The default seed comes from ``PRIVMEASURE_SEED`` when ``--seed`` is absent.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import audit, bench, io
from .lp import LPError
from .measures import empirical
from .metrics import w1_1d, w1_grid_snapped, w1_lp
from .pmm import POLICIES

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_AUDIT = 0, 1, 2, 3
SEED_ENV = "PRIVMEASURE_SEED"
EVAL_METHODS = ("auto", "1d", "lp", "snapped")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="privmeasure", description="Private synthetic data on [0,1]^d and accuracy tooling.")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    def common(sp, multi_n: bool):
        sp.add_argument("--mechanism", choices=bench.MECHANISMS)
        sp.add_argument("--dim", type=int)
        sp.add_argument("--eps", type=float)
        if multi_n:
            sp.add_argument("--n", type=int, nargs="+")
        else:
            sp.add_argument("--n", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--policy", choices=POLICIES)
        sp.add_argument("--depth", type=int)
        sp.add_argument("--snap-depth", type=int)
        sp.add_argument("--input")
        sp.add_argument("--normalize", action="store_true")
        sp.add_argument("--output")
        sp.add_argument("--manifest", help="JSON manifest or generate metadata; flags override its fields")

    g = sub.add_parser("generate", help="run a mechanism once and write the synthetic points")
    common(g, multi_n=False)
    g.add_argument("--format", choices=("csv", "json"), default="csv", help="what to print when --output is absent")

    r = sub.add_parser("rate", help="accuracy sweep over n with a log-log slope fit")
    common(r, multi_n=True)
    r.add_argument("--trials", type=int)
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--format", choices=("json", "csv"), default="json")

    a = sub.add_parser("audit", help="exact privacy audit on a tiny instance")
    a.add_argument("--mechanism", choices=bench.MECHANISMS, required=True)
    a.add_argument("--eps", type=float, default=1.0)
    a.add_argument("--window", type=int, default=40)
    a.add_argument("--depth", type=int, default=2, help="partition depth (pmm)")
    a.add_argument("--n", type=int, help="dataset size (default 3 for pmm, 2 for psmm)")
    a.add_argument("--cells", type=int, default=3, help="anchor points / cells")
    a.add_argument("--adjacency", choices=audit.ADJACENCY, default="add-remove")
    a.add_argument("--halve-level", type=int, help="halve one level's noise (pmm), to see the audit fail")
    a.add_argument("--output")
    a.add_argument("--format", choices=("json",), default="json")

    e = sub.add_parser("eval", help="W1 between two point files")
    e.add_argument("--input", nargs=2, required=True, metavar=("FILE_A", "FILE_B"))
    e.add_argument("--dim", type=int)
    e.add_argument("--method", choices=EVAL_METHODS, default="auto")
    e.add_argument("--snap-depth", type=int, default=16)
    e.add_argument("--normalize", action="store_true")
    e.add_argument("--format", choices=("json", "csv"), default="json")
    e.add_argument("--output")
    return p


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _manifest(args, multi_n: bool) -> tuple[dict, np.ndarray | None]:
    """Manifest fields (file first, then flags) and the input point pool, if any."""
    base = io.read_json(args.manifest) if args.manifest else {}
    if "manifest" in base:
        # generate metadata: the input file and scaling travel with it
        if base.get("source", "uniform") != "uniform" and not args.input:
            args.input = base["source"]
            args.normalize = args.normalize or bool(base.get("normalize"))
        base = base["manifest"]
    fields = {
        "mechanism": args.mechanism,
        "dim": args.dim,
        "eps": args.eps,
        "n": args.n,
        "seed": args.seed,
        "policy": args.policy,
        "depth": args.depth,
        "snap_depth": args.snap_depth,
        "output": args.output,
    }
    if multi_n:
        fields["trials"] = args.trials
    merged = dict(base)
    merged.update({k: v for k, v in fields.items() if v is not None})
    merged.setdefault("seed", _default_seed())
    pool = None
    if args.input:
        pool = io.ingest(args.input, normalize=args.normalize, dim=merged.get("dim"))
        merged["dim"] = pool.shape[1]
        if merged.get("n") is None and not multi_n:
            merged["n"] = len(pool)
    for key in ("mechanism", "eps", "n", "dim"):
        if merged.get(key) is None:
            raise UsageError(f"--{key} is required")
    return merged, pool


def _stem(path: str) -> Path:
    p = Path(path)
    return p.with_suffix("") if p.suffix in (".csv", ".json") else p


def cmd_generate(args) -> int:
    raw, pool = _manifest(args, multi_n=False)
    try:
        manifest = bench.ExperimentManifest.from_dict(raw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if len(manifest.n) != 1:
        raise UsageError("generate takes a single --n")
    n = manifest.n[0]
    data_rng, mech_rng = bench.trial_streams(manifest.seed, n, 0)
    if pool is not None and len(pool) == n:
        data = pool
    else:
        data = bench.source_data(data_rng, n, manifest.dim, pool)
    try:
        synth, meta = bench.run_mechanism(manifest, data, mech_rng)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    meta = {
        "manifest": manifest.to_dict(),
        "source": "uniform" if pool is None else str(args.input),
        "normalize": bool(args.normalize),
        "synthetic_size": int(len(synth)),
        **meta,
    }
    if manifest.output:
        stem = _stem(manifest.output)
        io.write_points(synth, stem.with_suffix(".csv"))
        io.write_json(meta, stem.with_suffix(".json"))
    elif args.format == "json":
        sys.stdout.write(io.dumps(meta))
    else:
        for row in np.asarray(synth).reshape(len(synth), -1):
            sys.stdout.write(io.format_row(row) + "\n")
    return EXIT_OK


def cmd_rate(args) -> int:
    raw, pool = _manifest(args, multi_n=True)
    try:
        manifest = bench.ExperimentManifest.from_dict(raw)
        report = bench.rate(manifest, pool, workers=args.workers)
    except bench.SweepAborted as exc:
        raise io.DataError(str(exc)) from None
    except ValueError as exc:
        if isinstance(exc, io.DataError):
            raise
        raise UsageError(str(exc)) from None
    out = report.to_dict()
    out["manifest"] = manifest.to_dict()
    header, rows = report.table()
    if manifest.output:
        stem = _stem(manifest.output)
        io.write_json(out, stem.with_suffix(".json"))
        io.write_table(header, rows, stem.with_suffix(".csv"))
    elif args.format == "csv":
        sys.stdout.write(",".join(header) + "\n")
        for row in rows:
            sys.stdout.write(",".join(str(v) for v in row) + "\n")
    else:
        sys.stdout.write(io.dumps(out))
    return EXIT_OK


def cmd_audit(args) -> int:
    if not args.eps > 0:
        raise UsageError(f"--eps must be positive (eps={args.eps} would need infinite noise)")
    try:
        if args.mechanism == "pmm":
            if args.depth > 2 or (args.n or 3) > 3:
                raise UsageError("pmm audits are limited to depth <= 2 and n <= 3")
            schedule = None
            if args.halve_level is not None:
                if not 0 <= args.halve_level <= args.depth:
                    raise UsageError(f"--halve-level must be in 0..{args.depth}")
                schedule = audit.broken_schedule(args.eps, args.depth, args.halve_level)
            rep = audit.audit_pmm(
                args.eps, args.window, args.depth, args.n or 3, args.cells, schedule, args.adjacency
            )
        else:
            if args.cells > 3 or (args.n or 2) > 2:
                raise UsageError("psmm audits are limited to cells <= 3 and n <= 2")
            if args.halve_level is not None:
                raise UsageError("--halve-level applies to pmm only")
            rep = audit.audit_psmm(args.eps, args.window, args.cells, args.n or 2, args.adjacency)
    except audit.WindowTooSmall as exc:
        raise UsageError(str(exc)) from None
    text = io.dumps(rep.to_dict())
    if args.output:
        Path(args.output).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK if rep.passed else EXIT_AUDIT


def cmd_eval(args) -> int:
    a = io.ingest(args.input[0], normalize=args.normalize, dim=args.dim)
    b = io.ingest(args.input[1], normalize=args.normalize, dim=args.dim)
    if a.shape[1] != b.shape[1]:
        raise io.DataError(f"dimension mismatch: {a.shape[1]} columns vs {b.shape[1]}")
    method = args.method
    if method == "auto":
        method = "1d" if a.shape[1] == 1 else ("lp" if len(a) + len(b) <= 200 else "snapped")
    bound = 0.0
    try:
        if method == "1d":
            if a.shape[1] != 1:
                raise UsageError("method 1d needs one-dimensional data")
            value = w1_1d(empirical(a), empirical(b))
        elif method == "lp":
            value = w1_lp(empirical(a), empirical(b))
        else:
            s = w1_grid_snapped(a, b, args.snap_depth)
            value, bound = s.value, s.error_bound
    except (ValueError, LPError) as exc:
        raise UsageError(str(exc)) from None
    out = {"method": method, "w1": value, "error_bound": bound, "dim": int(a.shape[1])}
    if args.format == "csv":
        text = "method,w1,error_bound\n" + f"{method},{value!r},{bound!r}\n"
    else:
        text = io.dumps(out)
    if args.output:
        Path(args.output).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "rate": cmd_rate, "audit": cmd_audit, "eval": cmd_eval}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.verb](args)
    except UsageError as exc:
        print(f"privmeasure: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except io.DataError as exc:
        print(f"privmeasure: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
