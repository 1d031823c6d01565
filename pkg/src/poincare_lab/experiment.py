"""Batch experiments: JSON configs in, CSV/JSON reports and a verdict summary out."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from . import bounds, verification
from .bounds import BoundError, SubsetFamily
from .convolve import clt_trace, convolve_pair
from .measures import DiscreteAtoms, GridMeasure, MeasureError, from_config, summarize
from .spectral import estimate_cp, muckenhoupt_bracket
from .verification import Verdict
from .zoo import ZOO_NAMES, zoo

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2

DEFAULT_NUMERICS = {"n_grid": 4096, "window_sigmas": 10.0, "w2_nodes": 4096, "seed": None}
RANDOMIZED = {"verify_shearer", "verify_hypercube"}
ZOO_WIDE = {"verify_pairs", "verify_gap", "verify_muckenhoupt"}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    measures: dict[str, dict]
    tasks: list[dict]
    numerics: dict
    directory: Path
    formats: tuple[str, ...]

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(raw) - {"measures", "tasks", "numerics", "output"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")

        measures = {}
        for entry in raw.get("measures", []):
            if not isinstance(entry, dict) or "name" not in entry:
                raise ConfigError("every measure needs a name")
            if entry["name"] in measures:
                raise ConfigError(f"duplicate measure name {entry['name']!r}")
            measures[entry["name"]] = {k: v for k, v in entry.items() if k != "name"}

        numerics = dict(DEFAULT_NUMERICS)
        extra = set(raw.get("numerics", {})) - set(DEFAULT_NUMERICS)
        if extra:
            raise ConfigError(f"unknown numerics keys: {sorted(extra)}")
        numerics.update(raw.get("numerics", {}))

        tasks = list(raw.get("tasks", []))
        for i, task in enumerate(tasks):
            kind = task.get("type") if isinstance(task, dict) else None
            if kind not in TASKS and not (isinstance(kind, str) and kind.startswith("bounds_")
                                          and kind[7:] in BOUND_TASKS):
                raise ConfigError(f"task {i}: unknown type {kind!r}")
            for ref in _references(task):
                if ref not in measures and ref not in ZOO_NAMES:
                    raise ConfigError(f"task {i}: measure {ref!r} is not declared")
            if kind in RANDOMIZED and task.get("seed", numerics["seed"]) is None:
                raise ConfigError(f"task {i}: randomized suites need a seed")

        out = raw.get("output", {})
        formats = tuple(out.get("formats", ["csv", "json"]))
        if not formats or set(formats) - {"csv", "json"}:
            raise ConfigError("output.formats must be a nonempty subset of {csv, json}")
        return cls(measures, tasks, numerics, Path(out.get("directory", "reports")), formats)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw)


def _references(task: dict) -> list[str]:
    refs = []
    if "measure" in task:
        refs.append(task["measure"])
    refs.extend(task.get("measures", []))
    return refs


# -- formatting ----------------------------------------------------------------

def fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = list(rows[0])
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(row.get(k)) for k in header])
    return buf.getvalue()


def json_safe(value):
    if isinstance(value, float) and value != value:
        return None
    if isinstance(value, float) and value in (float("inf"), float("-inf")):
        return "inf" if value > 0 else "-inf"
    if isinstance(value, dict):
        return {str(k): json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    if hasattr(value, "item"):
        return value.item()
    return value


def to_json(payload) -> str:
    return json.dumps(json_safe(payload), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_atomic(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- tasks ---------------------------------------------------------------------

@dataclass
class TaskOutput:
    rows: list[dict] = field(default_factory=list)
    payload: dict = field(default_factory=dict)
    verdicts: list[Verdict] = field(default_factory=list)


class Context:
    """Materialized measures shared (read-only) by all tasks of a run."""

    def __init__(self, config: ExperimentConfig):
        self.numerics = config.numerics
        self._specs = config.measures
        self._built = {}
        self._zoo = None

    def measure(self, name: str):
        if name not in self._built:
            if name in self._specs:
                self._built[name] = from_config(self._specs[name], int(self.numerics["n_grid"]),
                                                float(self.numerics["window_sigmas"]))
            else:
                if self._zoo is None:
                    self._zoo = zoo(int(self.numerics["n_grid"]))
                self._built[name] = self._zoo[name]
        return self._built[name]

    def grid(self, name: str) -> GridMeasure:
        mu = self.measure(name)
        if isinstance(mu, DiscreteAtoms):
            raise MeasureError(f"{name!r} is atomic; give it a positive smoothing_variance")
        return mu

    def prepare(self, tasks: list[dict]):
        # materialize up front so worker threads only read
        for task in tasks:
            refs = _references(task)
            if task.get("type") in ZOO_WIDE and not task.get("measures"):
                refs += list(ZOO_NAMES)
            for ref in refs:
                self.measure(ref)


def _names(task: dict) -> list[str]:
    return list(task.get("measures") or ZOO_NAMES)


def task_estimate(task: dict, ctx: Context) -> TaskOutput:
    name = task["measure"]
    mu = ctx.grid(name)
    res = estimate_cp(mu, refine=task.get("refine", True))
    br = muckenhoupt_bracket(mu)
    row = {"measure": name, **res.to_dict(br)}
    row.update(summarize(mu).to_dict())
    lower, upper = row.pop("muckenhoupt")
    row["muckenhoupt_lower"], row["muckenhoupt_upper"] = lower, upper
    return TaskOutput([row], {"result": row})


def task_convolve(task: dict, ctx: Context) -> TaskOutput:
    a, b = task["measures"]
    mu, nu = ctx.grid(a), ctx.grid(b)
    conv = convolve_pair(mu, nu)
    c_mu = estimate_cp(mu, refine=False).c_p
    c_nu = estimate_cp(nu, refine=False).c_p
    c_conv = estimate_cp(conv, refine=False).c_p
    row = {"mu": a, "nu": b, "c_mu": c_mu, "c_nu": c_nu, "c_conv": c_conv,
           "sigma2": conv.variance(), "mean": conv.mean(), "n_grid": conv.n_grid}
    return TaskOutput([row], {"result": row})


def task_clt_trace(task: dict, ctx: Context) -> TaskOutput:
    name = task["measure"]
    delta2 = float(task.get("delta2", 0.0))
    n_list = task.get("n_list", [1, 2, 4, 8])
    trace = clt_trace(ctx.measure(name), n_list, delta2,
                      w2_nodes=int(ctx.numerics["w2_nodes"]),
                      n_grid=int(ctx.numerics["n_grid"]),
                      window_sigmas=float(ctx.numerics["window_sigmas"]))
    rows = trace.rows()
    verdicts = []
    for row in rows:
        tag = f"clt_trace[{name},n={row['n']}]"
        ref = row["bound_example2"]
        if ref is not None:
            if delta2 > 0:
                verdicts.append(Verdict(tag, "regularized_decrease", row["c_p"], ref,
                                        row["c_p"] <= ref + float(task.get("abs_tol", 1e-3))))
            else:
                verdicts.append(Verdict(tag, "monotone_clt", row["c_p"], ref,
                                        row["c_p"] <= ref + float(task.get("abs_tol", 1e-6))))
        if row["bound_smoothing"] is not None:
            verdicts.append(Verdict(tag, "smoothing_cap", row["c_p"], row["bound_smoothing"],
                                    row["c_p"] <= row["bound_smoothing"]))
    return TaskOutput(rows, {"measure": name, "delta2": delta2, "rows": rows}, verdicts)


def _suite_rows(results) -> tuple[list[dict], list[Verdict]]:
    rows, verdicts = [], []
    for r in results:
        rows.append(r.to_dict())
        verdicts.append(Verdict(f"suite[{r.name}]", "zero_violations", float(r.violations), 0.0,
                                r.passed))
    return rows, verdicts


def task_verify_shearer(task: dict, ctx: Context) -> TaskOutput:
    seed = int(task.get("seed", ctx.numerics["seed"]))
    suites = verification.shearer_suites(seed, int(task.get("instances", 10_000)),
                                         int(task.get("max_n", 4)),
                                         int(task.get("max_alphabet", 3)))
    rows, verdicts = _suite_rows(suites.values())
    return TaskOutput(rows, {"seed": seed, "suites": rows}, verdicts)


def task_verify_hypercube(task: dict, ctx: Context) -> TaskOutput:
    seed = int(task.get("seed", ctx.numerics["seed"]))
    res = verification.hypercube_suite(seed, int(task.get("instances", 1000)),
                                       int(task.get("max_k", 3)), int(task.get("max_n", 4)))
    rows, verdicts = _suite_rows([res])
    return TaskOutput(rows, {"seed": seed, "suites": rows}, verdicts)


def _verdict_task(fn: Callable[[dict, Context], list[Verdict]]):
    def run(task: dict, ctx: Context) -> TaskOutput:
        verdicts = fn(task, ctx)
        rows = [v.to_dict() for v in verdicts]
        return TaskOutput(rows, {"verdicts": rows}, verdicts)
    return run


@_verdict_task
def task_verify_pairs(task, ctx):
    measures = {n: ctx.grid(n) for n in _names(task)}
    return verification.zoo_pair_verdicts(measures, rel_tol=float(task.get("rel_tol", 1e-3)))


@_verdict_task
def task_verify_gap(task, ctx):
    return verification.gap_verdicts({n: ctx.grid(n) for n in _names(task)})


@_verdict_task
def task_verify_muckenhoupt(task, ctx):
    return verification.muckenhoupt_verdicts({n: ctx.grid(n) for n in _names(task)},
                                             rel_tol=float(task.get("rel_tol", 0.02)))


@_verdict_task
def task_verify_w2clt(task, ctx):
    return verification.w2_clt_verdicts(ctx.grid(task["measure"]),
                                        tuple(task.get("n_values", (1, 4, 16, 64))),
                                        float(task.get("delta2", 1.0)),
                                        float(task.get("abs_tol", 1e-3)),
                                        task=f"w2clt[{task['measure']}]")


@_verdict_task
def task_verify_subset(task, ctx):
    n = int(task.get("n", 3))
    m = int(task.get("subset_size", 2))
    family = SubsetFamily.all_of_size(n, m)
    return [verification.subset_bound_verdict(ctx.grid(task["measure"]), family,
                                              float(task.get("rel_tol", 1e-3)),
                                              task=f"subset[{task['measure']},n={n},m={m}]")]


BOUND_TASKS = dict(bounds.REGISTRY)


def task_bounds(task: dict, ctx: Context) -> TaskOutput:
    name = task["type"][len("bounds_"):]
    args = dict(task.get("args", {}))
    report = BOUND_TASKS[name](**args)
    verdicts = []
    if "measured" in task:
        report = report.compare(float(task["measured"]), float(task.get("rel_tol", 0.0)),
                                float(task.get("abs_tol", 0.0)))
        verdicts.append(Verdict(f"bounds[{name}]", name, float(task["measured"]),
                                report.value, bool(report.satisfied)))
    d = report.to_dict()
    row = {"name": d["name"], "value": d["value"], **{f"in_{k}": v for k, v in d["inputs"].items()}}
    return TaskOutput([row], {"report": d}, verdicts)


TASKS: dict[str, Callable[[dict, Context], TaskOutput]] = {
    "estimate": task_estimate,
    "convolve": task_convolve,
    "clt_trace": task_clt_trace,
    "verify_shearer": task_verify_shearer,
    "verify_hypercube": task_verify_hypercube,
    "verify_pairs": task_verify_pairs,
    "verify_gap": task_verify_gap,
    "verify_muckenhoupt": task_verify_muckenhoupt,
    "verify_w2clt": task_verify_w2clt,
    "verify_subset": task_verify_subset,
}


def _runner(kind: str):
    return TASKS.get(kind) or task_bounds


def thread_count() -> int:
    env = os.environ.get("POINCARE_LAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


@dataclass
class RunResult:
    status: int
    verdicts: list[Verdict]
    errors: dict[str, str]
    summary_path: Path | None


def run(config: ExperimentConfig) -> RunResult:
    """Execute every task, write per-task artifacts and ``summary.json``."""
    ctx = Context(config)
    try:
        ctx.prepare(config.tasks)
    except (MeasureError, ValueError) as exc:
        raise ConfigError(f"measure construction failed: {exc}") from exc

    labels = [t.get("id", f"{i:02d}_{t['type']}") for i, t in enumerate(config.tasks)]

    def execute(i: int):
        task = config.tasks[i]
        try:
            out = _runner(task["type"])(task, ctx)
        except (BoundError, MeasureError, ValueError, RuntimeError, KeyError, TypeError) as exc:
            return i, None, f"{type(exc).__name__}: {exc}"
        stem = config.directory / labels[i]
        if "csv" in config.formats:
            write_atomic(stem.with_suffix(".csv"), to_csv(out.rows))
        if "json" in config.formats:
            write_atomic(stem.with_suffix(".json"),
                         to_json({"task": task, "numerics": config.numerics, **out.payload}))
        return i, out, None

    workers = max(1, min(thread_count(), len(config.tasks)))
    if workers == 1:
        results = [execute(i) for i in range(len(config.tasks))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(execute, range(len(config.tasks))))

    verdicts, errors = [], {}
    for i, out, err in sorted(results, key=lambda r: r[0]):
        if err is not None:
            errors[labels[i]] = err
        else:
            verdicts.extend(out.verdicts)
    status = EXIT_FAILED if errors or not all(v.holds for v in verdicts) else EXIT_OK
    summary = {"status": status, "numerics": config.numerics, "errors": errors,
               "verdicts": [v.to_dict() for v in verdicts]}
    path = config.directory / "summary.json"
    write_atomic(path, to_json(summary))
    return RunResult(status, verdicts, errors, path)
