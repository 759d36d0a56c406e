"""Experiment harness: run the three methods, write traces, tables and plot series.

Trace CSV columns (format version 1)::

    k,f,grad_norm,d_norm,lambda,j,T,s,grad_dot_d,f_evals,wall_nanos

One row per iteration record; the last row is the terminal record
(``lambda = 0``). Floats are written with ``repr`` so they round-trip
exactly. The JSON trace mirrors these columns and adds the extra per-record
fields, the run status and an echo of the configuration.
"""
from __future__ import annotations

import csv
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import problems
from .diagnostics import diagnose
from .errors import ConfigError, NumericalError
from .objectives import BoxQuadratic, lipschitz_estimate
from .solver import CSV_COLUMNS, SOLVERS, default_config

log = logging.getLogger(__name__)

TRACE_FORMAT_VERSION = 1
METHODS = ("SGM", "YWH", "ZH")
DEFAULT_MAX_ITERS = {"ex1_fractional": 100, "ex2_large_fractional": 500, "ex3_box_qp": 100}
DEFAULT_STOP_FERR = 5e-7
DEFAULT_STOP_GRAD = 1e-4
SCALING_CHOICES = ("identity", "hessian", "hessian-clipped", "2V")
LINESEARCH_KEYS = ("delta1", "delta2", "beta")

_RECORD_ATTRS = ("k", "f_val", "grad_norm", "d_norm", "lam", "j", "T", "s", "grad_dot_d", "f_evals", "wall_nanos")
_EXTRA_ATTRS = ("alpha", "eta_next", "mu_eff", "d_dinv_sq", "step_norm", "T_next", "f_next", "x_norm")


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    n: int | None = None
    seed: int = problems.DEFAULT_SEED
    methods: tuple = METHODS
    max_iters: int | None = None
    scaling: str | None = None
    x0_ones: bool = False
    overrides: tuple = ()

    def __post_init__(self):
        name = problems.ALIASES.get(self.name, self.name)
        if name not in problems.EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.name!r}")
        object.__setattr__(self, "name", name)
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown method {bad[0]!r}; choose from SGM, YWH, ZH, all")
        if self.scaling is not None and self.scaling not in SCALING_CHOICES:
            raise ConfigError(f"unknown scaling {self.scaling!r}; choose from {', '.join(SCALING_CHOICES)}")
        if self.max_iters is not None and self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        bad = [k for k, _ in self.overrides if k not in LINESEARCH_KEYS]
        if bad:
            raise ConfigError(f"unknown parameter override {bad[0]!r}")

    @property
    def iteration_cap(self):
        return self.max_iters or DEFAULT_MAX_ITERS[self.name]

    @property
    def short(self):
        return {v: k for k, v in problems.ALIASES.items()}[self.name]


def build_problem(spec):
    try:
        return problems.build(spec.name, spec.n, spec.seed, spec.x0_ones)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def solver_config(problem, spec):
    try:
        cfg = default_config(problem, spec.iteration_cap, scaling=spec.scaling)
    except (NumericalError, ValueError) as exc:
        raise ConfigError(f"scaling {spec.scaling or problem.scaling!r} is not usable here: {exc}") from exc
    if spec.overrides:
        try:
            cfg = replace(cfg, linesearch=replace(cfg.linesearch, **dict(spec.overrides)))
        except ValueError as exc:
            raise ConfigError(f"invalid line-search parameters: {exc}") from exc
    return cfg


def run_methods(problem, spec):
    """Solve with each requested method; returns ``{method: RunReport}``."""
    cfg = solver_config(problem, spec)
    out = {}
    for m in spec.methods:
        out[m] = SOLVERS[m](problem.objective, problem.feasible_set, problem.x0, cfg)
        log.info("%s %s: %s after %d iterations", spec.short, m, out[m].status, out[m].iterations)
    return out


# --- reference values -------------------------------------------------------


def box_qp_reference(obj, kset, iters=20000):
    """Minimum of a :class:`BoxQuadratic` over a box.

    Accelerated Euclidean projected gradient (step ``1/L``, adaptive restart),
    then the active set read off the result is solved exactly.
    """
    L = obj.lipschitz
    x = kset.clamp(np.zeros(kset.n))
    y, t = x.copy(), 1.0
    for _ in range(iters):
        x_new = kset.clamp(y - obj.gradient(y) / L)
        if float((y - x_new) @ (x_new - x)) > 0:
            t = 1.0
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        y = x_new + ((t - 1) / t_new) * (x_new - x)
        x, t = x_new, t_new
    g = obj.gradient(x)
    at_hi = (x >= kset.upper - 1e-9) & (g < 0)
    at_lo = (x <= kset.lower + 1e-9) & (g > 0)
    free = ~(at_hi | at_lo)
    z = np.where(at_hi, kset.upper, np.where(at_lo, kset.lower, x))
    H = 2.0 * obj.V
    rhs = -(obj._Wp + H[:, ~free] @ z[~free])[free]
    z[free] = np.linalg.solve(H[np.ix_(free, free)], rhs)
    if kset.contains(z, 0.0) and obj.value(z) <= obj.value(x):
        return float(obj.value(z))
    return float(obj.value(x))


def reference_value(problem, reports=None, spec=None):
    """``(f_star, source)`` used for error columns.

    ex1 uses the published optimum; ex3 the box-QP solve above (the published
    value is recorded alongside); ex2 the lowest value seen across the
    supplied runs and a long SGM/YWH reference pair.
    """
    if problem.name == "ex1_fractional":
        return problem.f_star, "published"
    if problem.name == "ex3_box_qp":
        return box_qp_reference(problem.objective, problem.feasible_set), "box-qp oracle"
    best = np.inf
    for rep in (reports or {}).values():
        best = min(best, float(np.nanmin(rep.column("f_val"))))
    ref_spec = ExperimentSpec(problem.name, problem.n, problem.meta.get("seed", problems.DEFAULT_SEED),
                              ("SGM", "YWH"), 2000, spec.scaling if spec else None,
                              overrides=spec.overrides if spec else ())
    for rep in run_methods(problem, ref_spec).values():
        best = min(best, float(np.nanmin(rep.column("f_val"))))
    return best, "best observed value"


# --- tables ----------------------------------------------------------------


@dataclass(frozen=True)
class TableRow:
    method: str
    ferr_iters: int | None
    ferr_error: float | None
    ferr_seconds: float | None
    grad_iters: int | None
    grad_norm: float
    grad_seconds: float | None
    final_error: float | None
    final_grad: float
    f_evals: int
    grad_evals: int
    wall_seconds: float
    status: str


def first_hit(values, threshold):
    hits = np.flatnonzero(np.asarray(values) <= threshold)
    return int(hits[0]) if hits.size else None


def comparison_table(reports, f_star, stop_ferr=DEFAULT_STOP_FERR, stop_grad=DEFAULT_STOP_GRAD):
    rows = []
    for m, rep in reports.items():
        wall = rep.column("wall_nanos") / 1e9
        g = rep.column("grad_norm")
        gk = first_hit(g, stop_grad)
        gi = gk if gk is not None else len(g) - 1
        if f_star is not None:
            err = np.abs(rep.column("f_val") - f_star)
            fk = first_hit(err, stop_ferr)
            fi = fk if fk is not None else len(err) - 1
            ferr = (fk, float(err[fi]), float(wall[fi]))
            final_err = float(err[-1])
        else:
            ferr, final_err = (None, None, None), None
        rows.append(TableRow(
            m, *ferr, gk, float(g[gi]), float(wall[gi]) if gk is not None else None,
            final_err, float(g[-1]), rep.total_f_evals, rep.total_grad_evals, float(wall[-1]), rep.status,
        ))
    return rows


def _cell(v, fmt):
    return "-" if v is None else format(v, fmt)


def format_table(rows, title, f_star, source, stop_ferr, stop_grad, published=None):
    lines = [
        title,
        f"f* = {f_star!r} ({source})" if f_star is not None else "f* unavailable",
    ]
    if published is not None:
        lines.append(f"published f* = {published!r}")
    lines.append(f"thresholds: |f - f*| <= {stop_ferr:g}, |grad f| <= {stop_grad:g}; '-' = not reached")
    head = ("method", "itr(ferr)", "cpu(s)", "error", "itr(grad)", "cpu(s)", "grad",
            "final err", "final grad", "f evals", "g evals", "wall(s)", "status")
    body = [head]
    for r in rows:
        body.append((
            r.method, _cell(r.ferr_iters, "d"), _cell(r.ferr_seconds, ".3f"), _cell(r.ferr_error, ".3g"),
            _cell(r.grad_iters, "d"), _cell(r.grad_seconds, ".3f"), format(r.grad_norm, ".3g"),
            _cell(r.final_error, ".3g"), format(r.final_grad, ".3g"), str(r.f_evals), str(r.grad_evals),
            format(r.wall_seconds, ".3f"), r.status,
        ))
    widths = [max(len(row[i]) for row in body) for i in range(len(head))]
    for row in body:
        lines.append("  ".join(c.rjust(w) for c, w in zip(row, widths)))
    return "\n".join(lines) + "\n"


# --- files -------------------------------------------------------------------


def _record_row(rec):
    return [repr(getattr(rec, a)) if isinstance(getattr(rec, a), float) else str(getattr(rec, a))
            for a in _RECORD_ATTRS]


def write_trace_csv(report, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for rec in report.trace:
            w.writerow(_record_row(rec))


def _jsonable(v):
    if isinstance(v, float) and not np.isfinite(v):
        return None if np.isnan(v) else ("inf" if v > 0 else "-inf")
    return v


def trace_payload(report, echo):
    records = []
    for rec in report.trace:
        row = {c: _jsonable(getattr(rec, a)) for c, a in zip(CSV_COLUMNS, _RECORD_ATTRS)}
        row.update({a: _jsonable(getattr(rec, a)) for a in _EXTRA_ATTRS})
        records.append(row)
    return {
        "format_version": TRACE_FORMAT_VERSION,
        "method": report.method,
        "status": report.status,
        "message": report.message,
        "columns": list(CSV_COLUMNS),
        "total_f_evals": report.total_f_evals,
        "total_grad_evals": report.total_grad_evals,
        "config": echo,
        "records": records,
    }


def write_trace_json(report, path, echo):
    with open(path, "w") as fh:
        json.dump(trace_payload(report, echo), fh, indent=1)
        fh.write("\n")


def emit_plot_data(reports, f_star, out_dir, prefix):
    """Per-method ``k, f_error, grad_norm`` series; the error column is dropped without ``f*``."""
    paths = []
    for m, rep in reports.items():
        path = Path(out_dir) / f"{prefix}_{m}_series.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if f_star is None:
                fh.write("# f* unavailable: f_error column omitted\n")
                w.writerow(("k", "grad_norm"))
                for r in rep.trace:
                    w.writerow((r.k, repr(r.grad_norm)))
            else:
                w.writerow(("k", "f_error", "grad_norm"))
                for r in rep.trace:
                    w.writerow((r.k, repr(abs(r.f_val - f_star)), repr(r.grad_norm)))
        paths.append(path)
    return paths


def series_from_trace_json(path):
    """Rebuild a minimal report-like object from a JSON trace for :func:`emit_plot_data`."""
    with open(path) as fh:
        data = json.load(fh)
    return _LoadedReport(data["method"], tuple(_LoadedRecord(r["k"], r["f"], r["grad_norm"]) for r in data["records"]))


@dataclass(frozen=True)
class _LoadedRecord:
    k: int
    f_val: float
    grad_norm: float


@dataclass(frozen=True)
class _LoadedReport:
    method: str
    trace: tuple


def lipschitz_for(problem):
    if isinstance(problem.objective, BoxQuadratic):
        return problem.objective.lipschitz
    samples = 200 if problem.n <= 64 else 20
    return lipschitz_estimate(problem.objective, problem.feasible_set, samples=samples, seed=0)


@dataclass(frozen=True)
class RunOutcome:
    spec: ExperimentSpec
    problem: object
    reports: dict
    f_star: float | None
    f_star_source: str
    rows: list
    table: str
    diagnostics: dict | None
    files: list


def run_experiment(spec, out_dir, formats=("csv", "json"), stop_ferr=DEFAULT_STOP_FERR,
                   stop_grad=DEFAULT_STOP_GRAD, diagnostics=True, f_star=None):
    """Run, then write traces, table, series and (optionally) diagnostics into ``out_dir``."""
    out_dir = Path(out_dir)
    if not out_dir.is_dir():
        raise ConfigError(f"output directory {str(out_dir)!r} does not exist")
    if not os.access(out_dir, os.W_OK):
        raise ConfigError(f"output directory {str(out_dir)!r} is not writable")
    problem = build_problem(spec)
    reports = run_methods(problem, spec)
    if f_star is None:
        f_star, source = reference_value(problem, reports, spec)
    else:
        source = "user supplied"
    prefix = spec.short
    echo = {"experiment": spec.name, "n": problem.n, "seed": spec.seed, "max_iters": spec.iteration_cap,
            "overrides": dict(spec.overrides),
            "scaling": spec.scaling or problem.scaling, "x0_ones": spec.x0_ones,
            "f_star": f_star, "f_star_source": source, "stop_ferr": stop_ferr, "stop_grad": stop_grad}
    if "seed" in problem.meta:
        echo["generator"] = problem.meta.get("generator")
    files = []
    for m, rep in reports.items():
        if "csv" in formats:
            files.append(out_dir / f"{prefix}_{m}_trace.csv")
            write_trace_csv(rep, files[-1])
        if "json" in formats:
            files.append(out_dir / f"{prefix}_{m}_trace.json")
            write_trace_json(rep, files[-1], dict(echo, method=m))
    rows = comparison_table(reports, f_star, stop_ferr, stop_grad)
    title = f"{spec.name} (n = {problem.n}, x0 = {'ones' if spec.x0_ones or problem.name != 'ex3_box_qp' else '0.8*ones'})"
    published = problems.PUBLISHED_FSTAR.get(problem.name) if problem.n == problems.DEFAULT_N[problem.name] else None
    table = format_table(rows, title, f_star, source, stop_ferr, stop_grad,
                         published if published != f_star else None)
    files.append(out_dir / f"{prefix}_table.txt")
    files[-1].write_text(table)
    if "json" in formats:
        files.append(out_dir / f"{prefix}_table.json")
        files[-1].write_text(json.dumps({"header": echo, "rows": [asdict(r) for r in rows]}, indent=1) + "\n")
    files.extend(emit_plot_data(reports, f_star, out_dir, prefix))
    diag = None
    if diagnostics:
        L = lipschitz_for(problem)
        diag = {"L": L, "methods": {m: diagnose(rep, L, f_star) for m, rep in reports.items()}}
        files.append(out_dir / f"{prefix}_diagnostics.json")
        files[-1].write_text(json.dumps(diag, indent=1, default=_jsonable) + "\n")
    return RunOutcome(spec, problem, reports, f_star, source, rows, table, diag, files)


def timed(fn, *args, **kw):
    t0 = time.monotonic()
    out = fn(*args, **kw)
    return out, time.monotonic() - t0
