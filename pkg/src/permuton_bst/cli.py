"""Command line entry point ``permuton-bst``.

Experiments::

    permuton-bst <experiment> [--model SPEC] [--n N[,N...]] [--reps K] [--seed S]
                 [--out results.csv] [--beta B] [--alpha A] [--depth D] [--mode fixed|poisson]
                 [--threads T] [--config FILE.json]

Utilities::

    permuton-bst sample --model SPEC --n N [--seed S] [--mode M] [--out points.tsv]
    permuton-bst tree POINTS.tsv [--out tree.txt]
    permuton-bst psi --model SPEC --depth D [--seed S] [--method M] [--out psi.txt]

Exit status: 0 all checks passed, 1 a statistical check failed, 2 usage
error, 3 an exact invariant was violated.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .bst import bst_from_points, read_points, write_points
from .experiments import KINDS, ExperimentSpec, UsageError, run
from .limit import PartialSampleError, sample_psi
from .permutons import parse_model
from .samplers import replicate_rng, sample

EXIT_OK, EXIT_STAT, EXIT_USAGE, EXIT_INVARIANT = 0, 1, 2, 3

# config keys map one-to-one onto the long flags
_KNOBS = {
    "model": str, "n": None, "reps": int, "seed": int, "out": str, "beta": float, "alpha": float,
    "depth": int, "mode": str, "threads": int, "k": int, "threshold": float, "samples": int,
    "method": str, "grid": int, "scale": float,
}


def _int_like(text) -> int:
    v = float(text)
    if v != int(v):
        raise ValueError(f"not an integer: {text!r}")
    return int(v)


def _n_list(value) -> tuple:
    if isinstance(value, (int, float)):
        return (_int_like(value),)
    if not isinstance(value, str):
        value = " ".join(str(v) for v in value)
    value = value.replace(",", " ").split()
    return tuple(_int_like(v) for v in value)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="permuton-bst", description="BSTs of permuton samples: experiments and utilities.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for kind in KINDS:
        e = sub.add_parser(kind, help=f"run the {kind} experiment")
        e.add_argument("--config", help="JSON file whose keys mirror the long flags")
        e.add_argument("--model", help="model spec, e.g. lebesgue or mallows:gamma=2 (model-check: 'all')")
        e.add_argument("--n", nargs="+", help="sizes, space or comma separated; 1e5 style accepted")
        e.add_argument("--reps", type=int, help="replicates per size")
        e.add_argument("--seed", type=int, help="unsigned 64-bit root seed")
        e.add_argument("--out", help="CSV path; a .json sidecar is written next to it")
        e.add_argument("--beta", type=float)
        e.add_argument("--alpha", type=float)
        e.add_argument("--depth", type=int)
        e.add_argument("--mode", choices=("fixed", "poisson"))
        e.add_argument("--threads", type=int)
        e.add_argument("--k", type=int, help="ssc-scan: number of leading y-values recorded")
        e.add_argument("--threshold", type=float, help="deep-tree / band-tree pass threshold")
        e.add_argument("--samples", type=int, help="ssc-scan: psi samples for the KS comparison")
        e.add_argument("--method", choices=("insertion", "conditional"), help="psi sampling route")
        e.add_argument("--grid", type=int, help="model-check: cells per axis")
        e.add_argument("--scale", type=float, help="verify-lemmas: fraction of randomized cases")

    s = sub.add_parser("sample", help="write a point file")
    s.add_argument("--model", required=True)
    s.add_argument("--n", required=True, type=float)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--mode", choices=("fixed", "poisson"), default="fixed")
    s.add_argument("--out")

    t = sub.add_parser("tree", help="print the BST of a point file as word<TAB>label lines")
    t.add_argument("points")
    t.add_argument("--out")

    q = sub.add_parser("psi", help="print one psi sample as word<TAB>psi lines")
    q.add_argument("--model", required=True)
    q.add_argument("--depth", required=True, type=int)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--method", choices=("insertion", "conditional"), default="insertion")
    q.add_argument("--out")
    return p


def load_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    out = {}
    for key, value in data.items():
        k = key.replace("-", "_")
        if k not in _KNOBS:
            raise UsageError(f"unknown config key {key!r}")
        out[k] = value
    return out


def spec_from_args(args) -> ExperimentSpec:
    values = load_config(args.config) if args.config else {}
    for k in _KNOBS:
        v = getattr(args, k, None)
        if v is not None:
            values[k] = v
    try:
        if "n" in values:
            values["n"] = _n_list(values["n"])
        for k, typ in _KNOBS.items():
            if typ is not None and k in values and values[k] is not None:
                values[k] = typ(values[k])
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    return ExperimentSpec(kind=args.command, **values).resolved()


def _emit(text: str, out) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _run_utility(args) -> int:
    if args.command == "sample":
        pts = sample(parse_model(args.model), _int_like(args.n), replicate_rng(args.seed, _int_like(args.n), 0), args.mode)
        header = f"model={args.model} n={_int_like(args.n)} seed={args.seed} mode={args.mode}"
        if args.out:
            write_points(pts, args.out, header=header)
        else:
            sys.stdout.write(f"# {header}\n" + "".join(f"{x!r}\t{y!r}\n" for x, y in pts))
        return EXIT_OK
    if args.command == "tree":
        tree = bst_from_points(read_points(args.points))
        _emit(f"# height={tree.height} size={tree.size}\n" + tree.to_text(), args.out)
        return EXIT_OK
    mu0 = parse_model(args.model).left_derivative()
    if mu0 is None or not mu0.atomless:
        raise UsageError(f"model {args.model!r} has no atomless left derivative")
    code = EXIT_OK
    try:
        s = sample_psi(mu0, args.depth, replicate_rng(args.seed, 0, 0), method=args.method)
    except PartialSampleError as exc:
        s = exc.partial
        print(f"permuton-bst: {exc}", file=sys.stderr)
        code = EXIT_STAT
    _emit(s.to_text(), args.out)
    return code


def _report(rec) -> None:
    for c in rec.checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status} {c.kind:<11} {c.name}: {c.value} ({c.threshold})", file=sys.stderr)
    print(f"{len(rec.rows)} rows in {rec.wall_clock:.1f}s; exit {rec.exit_code}", file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command not in KINDS:
            return _run_utility(args)
        spec = spec_from_args(args)
        rec = run(spec)
    except (UsageError, ValueError, OSError) as exc:
        print(f"permuton-bst: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if spec.out:
        rec.write(spec.out)
    else:
        sys.stdout.write(rec.csv_text())
    _report(rec)
    return rec.exit_code


if __name__ == "__main__":
    sys.exit(main())
