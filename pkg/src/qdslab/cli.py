"""Command-line front end.

Subcommands: validate, diagnose, sweep, evolve, deficiency, list-models.
Exit codes: 0 = conclusive result written, 1 = error (bad config,
structural failure), 2 = inconclusive verdict or solver non-convergence
(certificates are still emitted).  QDSLAB_THREADS caps parallelism.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import catalog, deficiency, resolvent, semigroup
from .config import ConfigError, RunConfig, model_to_dict, parse_grid
from .core import QdsLabError, StructureError, validate_model
from .report import (
    ReportEnvelope,
    atomic_write,
    evolution_table,
    sweep_table,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INCONCLUSIVE = 2

CSV_HELP = (
    "sweep CSV/TSV columns: dim, lambda, ell_norm, q_limit_norm, "
    "explosion_mass, verdict; evolution CSV columns: t, trace, min_eig, "
    "max_eig, explosion_min_eig, explosion_max_eig"
)


def _threads() -> int:
    raw = os.environ.get("QDSLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _add_common(p: argparse.ArgumentParser, needs_model: bool = True):
    if needs_model:
        p.add_argument("--model", help="catalog reference, e.g. pure-birth:quadratic")
        p.add_argument("--config", help="JSON run config file")
        p.add_argument("--dim", type=int, help="truncation dimension")
        p.add_argument("--grid", help="uniform grid start:stop:nodes (tau-f models)")
    p.add_argument("--out", help="report output path")
    p.add_argument("--format", default="json", choices=("json", "csv", "tsv"),
                   help="output format (default json)")
    p.add_argument("--tol", action="append", default=[], metavar="KEY=VALUE",
                   help="tolerance override, repeatable")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qdslab",
        description="Minimal-semigroup explosion diagnostics and the "
                    "defect-index lab on finite truncations.",
        epilog=CSV_HELP,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check generator structure conditions")
    _add_common(p)

    p = sub.add_parser("diagnose", help="conservativity verdict with certificates")
    _add_common(p)
    p.add_argument("--lambda", dest="lambdas", type=float, action="append",
                   help="Laplace parameter, repeatable (default 1.0)")

    p = sub.add_parser("sweep", help="verdicts across a truncation ladder")
    _add_common(p)
    p.add_argument("--lambda", dest="lambdas", type=float, action="append")
    p.add_argument("--dims", required=True,
                   help="comma-separated increasing dimensions, e.g. 8,16,32")

    p = sub.add_parser("evolve", help="integrate the master equation")
    _add_common(p)
    p.add_argument("--time", dest="t_final", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=20)

    p = sub.add_parser("deficiency", help="defect indices and Cayley lab")
    _add_common(p, needs_model=False)
    p.add_argument("--alpha", type=float, help="transport coefficient exponent")
    p.add_argument("--c1", type=float, default=1.0)
    p.add_argument("--grid", help="uniform grid start:stop:nodes")
    p.add_argument("--shift", type=int, help="shift isometry offset m")
    p.add_argument("--dim", type=int, help="isometry truncation dimension")

    p = sub.add_parser("list-models", help="print the model catalog")
    p.add_argument("--out", help="report output path")

    return parser


def _parse_tol_overrides(pairs) -> dict:
    out = {}
    for item in pairs:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--tol expects KEY=VALUE, got {item!r}")
        try:
            out[key.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"--tol {key}: not a number: {value!r}") from None
    return out


def _run_config(args) -> RunConfig:
    base = {}
    if getattr(args, "config", None):
        base = RunConfig.from_file(args.config).to_dict()
    if getattr(args, "model", None):
        base["model"] = args.model
    if getattr(args, "dim", None) is not None:
        base["dim"] = args.dim
    if getattr(args, "grid", None):
        base["grid"] = args.grid
    if getattr(args, "lambdas", None):
        base["lambdas"] = tuple(args.lambdas)
    if getattr(args, "out", None):
        base["output"] = args.out
    if getattr(args, "format", None):
        base["output_format"] = args.format
    tols = dict(base.get("tolerances") or {})
    tols.update(_parse_tol_overrides(args.tol))
    base["tolerances"] = tols
    return RunConfig.from_dict({k: v for k, v in base.items() if v is not None})


def _emit(envelope: ReportEnvelope, args, table: str | None = None) -> None:
    out = getattr(args, "out", None)
    fmt = getattr(args, "format", "json")
    if out:
        if fmt == "json" or table is None:
            envelope.write_json(out)
        else:
            atomic_write(out, table)
    else:
        print(json.dumps(envelope.to_dict(), indent=2))


def _cmd_validate(args) -> int:
    cfg = _run_config(args)
    spec = cfg.build_model()
    tol = cfg.build_tolerances()
    t0 = time.perf_counter()
    report = validate_model(spec, tol)
    env = ReportEnvelope(config=cfg.to_dict())
    env.add("validation", report, time.perf_counter() - t0)
    ok = report.passed()
    env.verdict_summary = f"{spec.name}: validation {'passed' if ok else 'FAILED'}"
    _emit(env, args)
    return EXIT_OK if ok else EXIT_ERROR


def _cmd_diagnose(args) -> int:
    cfg = _run_config(args)
    spec = cfg.build_model()
    tol = cfg.build_tolerances()
    env = ReportEnvelope(config=cfg.to_dict())
    worst = EXIT_OK
    summaries = []
    for lam in cfg.lambdas:
        t0 = time.perf_counter()
        ctx = resolvent.LaplaceContext(spec, lam, tol)
        cert = resolvent.conservativity_verdict(ctx)
        fixed = resolvent.verify_explosion_solution(ctx, cert)
        env.add(f"certificate[lambda={lam:g}]", cert, time.perf_counter() - t0)
        env.add(f"fixed_point[lambda={lam:g}]", fixed)
        summaries.append(f"lambda={lam:g}: {cert.verdict}")
        if cert.verdict == resolvent.VERDICT_INCONCLUSIVE:
            worst = EXIT_INCONCLUSIVE
    env.verdict_summary = f"{spec.name}: " + "; ".join(summaries)
    _emit(env, args)
    return worst


def _cmd_sweep(args) -> int:
    cfg = _run_config(args)
    tol = cfg.build_tolerances()
    dims = tuple(int(d) for d in args.dims.split(","))
    if cfg.model is None:
        raise ConfigError("sweep needs a catalog model reference")
    kind, _, _ = cfg.model.partition(":")

    if kind in ("tau-f", "tau_f", "transport"):
        if cfg.grid is None:
            raise ConfigError("tau-f sweeps need --grid start:stop:nodes")
        g = parse_grid(cfg.grid)
        probe_ref = cfg.model

        def family(n: int):
            from .config import resolve_model
            return resolve_model(probe_ref, grid=f"{g[0]}:{g[-1]}:{n}")
    else:
        def family(n: int):
            from .config import resolve_model
            return resolve_model(cfg.model, dim=n)

    env = ReportEnvelope(config=dict(cfg.to_dict(), dims=list(dims)))
    worst = EXIT_OK
    tables = []
    for lam in cfg.lambdas:
        t0 = time.perf_counter()
        sweep = resolvent.truncation_sweep(family, lam, dims, tol,
                                           max_workers=_threads())
        env.add(f"sweep[lambda={lam:g}]", sweep, time.perf_counter() - t0)
        sep = "\t" if args.format == "tsv" else ","
        tables.append(sweep_table(sweep, sep))
        if sweep.trend == resolvent.TREND_UNKNOWN:
            worst = EXIT_INCONCLUSIVE
    env.verdict_summary = "; ".join(
        f"lambda={lam:g}: trend {env.results[f'sweep[lambda={lam:g}]']['trend']}"
        for lam in cfg.lambdas
    )
    _emit(env, args, table="".join(tables) if args.format != "json" else None)
    return worst


def _cmd_evolve(args) -> int:
    cfg = _run_config(args)
    spec = cfg.build_model()
    tol = cfg.build_tolerances()
    t0 = time.perf_counter()
    result = semigroup.evolve_observable(
        spec, np.eye(spec.dim), args.t_final, steps=args.steps, tol=tol
    )
    env = ReportEnvelope(config=cfg.to_dict())
    env.add("evolution", {"rows": result.to_rows()}, time.perf_counter() - t0)
    final = result.to_rows()[-1]
    env.verdict_summary = (
        f"{spec.name}: t={final['t']:g}, min eig {final['min_eig']:.3e}"
    )
    sep = "\t" if args.format == "tsv" else ","
    _emit(env, args, table=evolution_table(result, sep)
          if args.format != "json" else None)
    return EXIT_OK


def _cmd_deficiency(args) -> int:
    tol_overrides = _parse_tol_overrides(args.tol)
    from .tolerances import DEFAULT
    tol = DEFAULT.override(**tol_overrides) if tol_overrides else DEFAULT
    env = ReportEnvelope(config={"alpha": args.alpha, "c1": args.c1,
                                 "grid": args.grid, "shift": args.shift,
                                 "dim": args.dim})
    if args.shift is not None:
        if args.dim is None:
            raise ConfigError("--shift needs --dim")
        iso = catalog.build_shift_isometry(args.shift, args.dim)
        t0 = time.perf_counter()
        res = deficiency.cayley_deficiency_from_isometry(iso, tol=tol)
        env.add("cayley", res, time.perf_counter() - t0)
        verdict = deficiency.isometric_restriction_verdict(res.n_plus, res.n_minus)
        env.results["restriction_verdict"] = verdict
        env.verdict_summary = (
            f"shift m={args.shift}: indices ({res.n_plus}, {res.n_minus}), {verdict}"
        )
    elif args.alpha is not None:
        if args.grid is None:
            raise ConfigError("--alpha needs --grid start:stop:nodes")
        grid = parse_grid(args.grid)
        if grid[0] != 0.0:
            raise ConfigError("deficiency grid must start at 0")
        model = deficiency.TauFModel.power(args.alpha, grid, args.c1)
        t0 = time.perf_counter()
        res = deficiency.deficiency_indices_tau_f(model, tol)
        env.add("indices", res, time.perf_counter() - t0)
        verdict = deficiency.isometric_restriction_verdict(res.n_plus, res.n_minus)
        env.results["restriction_verdict"] = verdict
        env.verdict_summary = (
            f"alpha={args.alpha:g}: indices ({res.n_plus}, {res.n_minus}), "
            f"norm_plus={res.norm_plus:.10f}, {verdict}"
        )
    else:
        raise ConfigError("deficiency needs either --alpha/--grid or --shift/--dim")
    _emit(env, args)
    return EXIT_OK


def _cmd_list_models(args) -> int:
    entries = [
        {"kind": e.kind, "description": e.description, "parameters": e.parameters}
        for e in catalog.CATALOG
    ]
    if getattr(args, "out", None):
        atomic_write(args.out, json.dumps(entries, indent=2) + "\n")
    else:
        for e in entries:
            print(f"{e['kind']}: {e['description']}")
            for k, v in e["parameters"].items():
                print(f"    {k}: {v}")
    return EXIT_OK


_COMMANDS = {
    "validate": _cmd_validate,
    "diagnose": _cmd_diagnose,
    "sweep": _cmd_sweep,
    "evolve": _cmd_evolve,
    "deficiency": _cmd_deficiency,
    "list-models": _cmd_list_models,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"qdslab: config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except StructureError as exc:
        print(f"qdslab: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except QdsLabError as exc:
        print(f"qdslab: inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE


if __name__ == "__main__":
    sys.exit(main())
