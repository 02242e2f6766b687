"""Command-line front end.

Exit codes: 0 every check passed, 2 checks ran with failures,
1 usage/spec/numeric error (an error JSON is still written).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__, pipeline
from .deform import DeformationParams
from .errors import KmnError, NumericError, UsageError
from .jsonio import SpecError, build_from_spec, dumps, load_spec

COMMANDS = ("classify", "kmn", "decompose", "deform", "verify", "catalog")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    common = _Parser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--spec", metavar="PATH", help="JSON manifold spec")
    src.add_argument("--catalog", metavar="NAME", help="built-in catalog entry")
    common.add_argument("--param", action="append", default=[], metavar="K=V", help="catalog parameter (repeatable)")
    common.add_argument("--points", type=int, default=None, metavar="N", help="random sample points (chart backend)")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument(
        "--tol",
        action="append",
        default=[],
        metavar="[KEY=]FLOAT",
        help="tolerance override; a bare number sets every tolerance",
    )
    common.add_argument("--out", metavar="PATH", help="write the report here instead of stdout")

    p = _Parser(prog="kappamunu", description="Curvature checks for almost contact metric manifolds.")
    p.add_argument("--version", action="version", version=f"kappamunu {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("classify", parents=[common], help="validate axioms and classify the structure")
    sub.add_parser("kmn", parents=[common], help="compute h and extract (kappa, mu, nu)")
    dp = sub.add_parser("decompose", parents=[common], help="fit R on the tensor basis")
    dp.add_argument("--basis", choices=["divided", "undivided"], default="divided")
    df = sub.add_parser("deform", parents=[common], help="check the D-homothetic transformation laws")
    df.add_argument("--beta", default="1", metavar="EXPR", help="number or expression in t")
    df.add_argument("--alpha-d", type=float, default=1.0, dest="alpha_d", metavar="FLOAT")
    sub.add_parser("verify", parents=[common], help="run the full chain")
    sub.add_parser("catalog", parents=[common], help="list catalog entries (or show one with --catalog)")
    return p


def _params(items):
    out = {}
    for item in items:
        k, sep, v = item.partition("=")
        if not sep or not k:
            raise UsageError(f"--param expects K=V, got {item!r}")
        try:
            out[k] = float(v)
        except ValueError:
            raise UsageError(f"--param {k}: {v!r} is not a number") from None
    return out


def _tols(items):
    out = {}
    for item in items:
        k, sep, v = item.rpartition("=")
        key = k if sep else "*"
        try:
            val = float(v)
        except ValueError:
            raise UsageError(f"--tol: {v!r} is not a number") from None
        if not np.isfinite(val) or val <= 0:
            raise UsageError(f"--tol {key}: tolerance must be positive and finite")
        out[key] = val
    return out


def _load(args):
    params = _params(args.param)
    if args.spec:
        data = load_spec(args.spec)
        if params:
            if "catalog" not in data:
                raise UsageError("--param applies to catalog references only")
            data = dict(data, params={**data.get("params", {}), **params})
        echo = data
        model, points = build_from_spec(data)
        tol_over = dict(data.get("tolerances", {}))
    elif args.catalog:
        from .catalog import build

        model, points = build(args.catalog, params), None
        echo = {"catalog": args.catalog, "params": params}
        tol_over = {}
    else:
        raise UsageError("one of --spec or --catalog is required")
    tol_over.update(_tols(args.tol))
    if args.points is not None:
        if args.points < 1:
            raise UsageError("--points must be positive")
        if model.structure.backend.kind != "chart":
            raise UsageError("--points applies to chart backends; Lie models are sampled at the identity")
        if points is not None:
            raise UsageError("--points conflicts with sample_points in the spec")
    return model, points, echo, tol_over


def execute(args):
    """Report dict for parsed ``args``."""
    if args.command == "catalog":
        out = {
            "engine": {"name": "kappamunu", "version": __version__},
            "command": "catalog",
            "seed": args.seed,
            "spec": {},
        }
        out.update(pipeline.run_catalog(args.catalog, _params(args.param)))
        out["checks"] = []
        out["passed"] = True
        return out
    model, points, echo, tol_over = _load(args)
    if points is None and args.points is not None:
        points = model.sample_points(args.points, np.random.default_rng(args.seed))
    ctx = pipeline.new_context(model, points, args.seed, tol_over, echo, args.command)
    if args.command == "classify":
        return pipeline.run_classify(ctx)
    if args.command == "kmn":
        return pipeline.run_kmn(ctx)
    if args.command == "decompose":
        return pipeline.run_decompose(ctx, args.basis)
    if args.command == "verify":
        return pipeline.run_verify(ctx)
    dparams = DeformationParams.from_expr(args.beta, args.alpha_d, model.structure.dim)
    if not dparams.constant and model.structure.backend.kind == "lie":
        raise UsageError("non-constant beta needs a chart model; Lie models have no xi coordinate")
    return pipeline.run_deform(ctx, dparams)


def _error(kind, exc):
    err = {"kind": kind, "message": str(exc)}
    if isinstance(exc, SpecError):
        if exc.line is not None:
            err["line"] = exc.line
            err["column"] = exc.column
    if isinstance(exc, NumericError):
        err["operation"] = exc.operation
    return {"error": err}


def _write(text, path):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run(argv=None):
    """Run one command line; returns the exit code."""
    out_path = None
    try:
        args = build_parser().parse_args(argv)
        out_path = getattr(args, "out", None)
        report = execute(args)
        _write(dumps(report), out_path)
        return 0 if report["passed"] else 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except NumericError as exc:
        kind, err = "numeric", exc
    except SpecError as exc:
        kind, err = "spec", exc
    except (UsageError, KmnError) as exc:
        kind, err = "usage", exc
    print(f"kappamunu: error: {err}", file=sys.stderr)
    _write(dumps(_error(kind, err)), out_path)
    return 1


def main():
    sys.exit(run())
