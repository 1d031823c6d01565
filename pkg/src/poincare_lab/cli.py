"""``poincare-lab`` command-line entry point."""

from __future__ import annotations

import argparse
import inspect
import json
import math
import sys
from importlib import resources
from pathlib import Path

from . import bounds, verification
from .experiment import (
    EXIT_CONFIG,
    EXIT_FAILED,
    EXIT_OK,
    ConfigError,
    ExperimentConfig,
    json_safe,
    run,
    to_csv,
)
from .measures import DiscreteAtoms, MeasureError, from_config, summarize
from .spectral import SpectralError, estimate_cp, muckenhoupt_bracket
from .zoo import ZOO_NAMES, zoo

EXTRA_BOUNDS = {"rate_recurrence": bounds.rate_recurrence, "zhai_crossover": bounds.zhai_crossover}
SUITES = ("shearer", "hypercube", "pairs", "gap", "muckenhoupt", "w2clt")


def _number(kind: str):
    def parse(text: str):
        if kind == "int":
            return int(text)
        return math.inf if text.lower() in ("inf", "infinity") else float(text)
    return parse


def _add_bound_parser(sub, name: str, fn):
    p = sub.add_parser(name, help=(fn.__doc__ or name).strip().splitlines()[0])
    for param in inspect.signature(fn).parameters.values():
        kind = "int" if param.annotation in ("int", int) else "float"
        flag = "--" + param.name.replace("_", "-")
        if param.default is inspect.Parameter.empty:
            p.add_argument(flag, dest=param.name, type=_number(kind), required=True)
        else:
            p.add_argument(flag, dest=param.name, type=_number(kind), default=param.default)
    if name in bounds.REGISTRY:
        p.add_argument("--measured", type=float, help="compare a measured value against the bound")
        p.add_argument("--rel-tol", type=float, default=0.0)
        p.add_argument("--abs-tol", type=float, default=0.0)
    p.set_defaults(bound_fn=fn, bound_name=name)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poincare-lab",
                                     description="Poincaré constants of convolutions and CLT sums.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config", help="config path, or the name of a bundled preset")
    p_run.add_argument("--output-dir", help="override output.directory")

    p_bounds = sub.add_parser("bounds", help="evaluate a closed-form bound")
    bsub = p_bounds.add_subparsers(dest="bound", required=True)
    for name, fn in {**bounds.REGISTRY, **EXTRA_BOUNDS}.items():
        _add_bound_parser(bsub, name, fn)

    p_est = sub.add_parser("estimate", help="spectral estimate of one measure")
    p_est.add_argument("--measure", required=True, help="zoo name or path to a JSON measure spec")
    p_est.add_argument("--n-grid", type=int, default=4096)
    p_est.add_argument("--window-sigmas", type=float, default=10.0)

    p_ver = sub.add_parser("verify", help="run a verification suite")
    p_ver.add_argument("suite", choices=SUITES)
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.add_argument("--instances", type=int)
    p_ver.add_argument("--max-n", type=int, default=4)
    p_ver.add_argument("--max-alphabet", type=int, default=3)
    p_ver.add_argument("--measure", default="bernoulli_smooth_0.25",
                       help="base measure for the w2clt suite")
    p_ver.add_argument("--csv", help="write the worst-margin table here instead of stdout")
    return parser


def preset_path(name: str) -> Path | None:
    candidate = resources.files("poincare_lab") / "presets" / name
    if not name.endswith(".json"):
        candidate = resources.files("poincare_lab") / "presets" / f"{name}.json"
    return Path(str(candidate)) if candidate.is_file() else None


def cmd_run(args) -> int:
    path = Path(args.config)
    if not path.exists():
        path = preset_path(args.config) or path
    try:
        config = ExperimentConfig.load(path)
        if args.output_dir:
            config.directory = Path(args.output_dir)
        result = run(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    failed = [v for v in result.verdicts if not v.holds]
    print(f"{len(result.verdicts)} verdicts, {len(failed)} failed, "
          f"{len(result.errors)} task errors; summary at {result.summary_path}")
    for label, err in result.errors.items():
        print(f"  error in {label}: {err}", file=sys.stderr)
    for v in failed:
        print(f"  FAIL {v.task} {v.inequality}: lhs={v.lhs:.6g} rhs={v.rhs:.6g}", file=sys.stderr)
    return result.status


def cmd_bounds(args) -> int:
    fn = args.bound_fn
    kwargs = {name: getattr(args, name) for name in inspect.signature(fn).parameters}
    try:
        out = fn(**kwargs)
    except bounds.BoundError as exc:
        print(json.dumps({"name": args.bound_name, "error": str(exc)}))
        return EXIT_FAILED
    if isinstance(out, bounds.BoundReport):
        if getattr(args, "measured", None) is not None:
            out = out.compare(args.measured, args.rel_tol, args.abs_tol)
        payload = out.to_dict()
    elif isinstance(out, list):
        payload = {"name": args.bound_name, "values": out}
    else:
        payload = {"name": args.bound_name, **out}
    print(json.dumps(json_safe(payload), sort_keys=True, default=str))
    return EXIT_FAILED if payload.get("satisfied") is False else EXIT_OK


def load_measure(ref: str, n_grid: int, window_sigmas: float):
    if ref in ZOO_NAMES:
        return zoo(n_grid)[ref]
    spec = json.loads(Path(ref).read_text(encoding="utf-8"))
    return from_config(spec, n_grid, window_sigmas)


def cmd_estimate(args) -> int:
    try:
        mu = load_measure(args.measure, args.n_grid, args.window_sigmas)
        if isinstance(mu, DiscreteAtoms):
            raise MeasureError("atomic measures need a positive smoothing_variance")
        res = estimate_cp(mu)
        payload = {"measure": args.measure, **res.to_dict(muckenhoupt_bracket(mu)),
                   **summarize(mu).to_dict()}
    except (OSError, ValueError, SpectralError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG if isinstance(exc, (OSError, json.JSONDecodeError)) else EXIT_FAILED
    print(json.dumps(json_safe(payload), sort_keys=True))
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.suite == "shearer":
        suites = verification.shearer_suites(args.seed, args.instances or 10_000,
                                             args.max_n, args.max_alphabet)
        rows = [s.to_dict() for s in suites.values()]
        passed = all(s.passed for s in suites.values())
    elif args.suite == "hypercube":
        res = verification.hypercube_suite(args.seed, args.instances or 1000,
                                           max_n=args.max_n)
        rows, passed = [res.to_dict()], res.passed
    else:
        z = zoo()
        if args.suite == "pairs":
            verdicts = verification.zoo_pair_verdicts(z)
        elif args.suite == "gap":
            verdicts = verification.gap_verdicts(z)
        elif args.suite == "muckenhoupt":
            verdicts = verification.muckenhoupt_verdicts(z)
        else:
            verdicts = verification.w2_clt_verdicts(z[args.measure])
        rows = [v.to_dict() for v in sorted(verdicts, key=lambda v: v.margin)]
        passed = all(v.holds for v in verdicts)

    if args.csv:
        Path(args.csv).write_text(to_csv(rows), encoding="utf-8")
    else:
        sys.stdout.write(to_csv(rows))
    print(f"{args.suite}: {'PASS' if passed else 'FAIL'}", file=sys.stderr)
    return EXIT_OK if passed else EXIT_FAILED


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": cmd_run, "bounds": cmd_bounds,
               "estimate": cmd_estimate, "verify": cmd_verify}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
