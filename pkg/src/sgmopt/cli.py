"""Command-line entry point: ``sgmopt run | verify | plot-data``.

Settings can also come from a flat ``key = value`` file passed with
``--config``; command-line flags override it. The default output directory
is taken from ``$SGMOPT_OUT`` (falling back to the current directory).

Exit codes: 0 success, 1 solver pathology or failed acceptance criterion,
2 configuration error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import bench
from .errors import ConfigError, SgmError

OUT_ENV = "SGMOPT_OUT"
EXIT_OK, EXIT_PATHOLOGY, EXIT_CONFIG = 0, 1, 2
PATHOLOGIES = ("linesearch_failure", "numerical_error")

# config-file key -> (converter, default)
RUN_KEYS = {
    "experiment": (str, None),
    "method": (str, "all"),
    "n": (int, None),
    "seed": (int, bench.problems.DEFAULT_SEED),
    "max_iters": (int, None),
    "stop_ferr": (float, bench.DEFAULT_STOP_FERR),
    "stop_grad": (float, bench.DEFAULT_STOP_GRAD),
    "scaling": (str, None),
    "out": (str, None),
    "format": (str, "csv,json"),
    "no_diagnostics": (lambda s: _parse_bool(s), False),
    "x0_ones": (lambda s: _parse_bool(s), False),
    "f_star": (float, None),
    "delta1": (float, None),
    "delta2": (float, None),
    "beta": (float, None),
}


class _Parser(argparse.ArgumentParser):
    """argparse that reports errors as ConfigError instead of exiting."""

    def error(self, message):
        raise ConfigError(message)


def _parse_bool(s):
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def read_config_file(path):
    """Parse ``key = value`` lines; ``#`` starts a comment. Unknown keys are errors."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in RUN_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            values[key] = RUN_KEYS[key][0](value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
    return values


def _add_run_flags(p):
    p.add_argument("--config", help="flat key = value settings file (flags win)")
    p.add_argument("--experiment", choices=("ex1", "ex2", "ex3"))
    p.add_argument("--method", choices=("SGM", "YWH", "ZH", "all"))
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-iters", type=int, dest="max_iters")
    p.add_argument("--stop-ferr", type=float, dest="stop_ferr", help="f-error threshold for the table")
    p.add_argument("--stop-grad", type=float, dest="stop_grad", help="gradient-norm threshold for the table")
    p.add_argument("--scaling", choices=bench.SCALING_CHOICES)
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")
    p.add_argument("--format", help="comma-separated subset of csv,json")
    p.add_argument("--no-diagnostics", action="store_const", const=True, dest="no_diagnostics")
    p.add_argument("--x0-ones", action="store_const", const=True, dest="x0_ones",
                   help="start ex3 from ones instead of 0.8*ones")
    p.add_argument("--f-star", type=float, dest="f_star", help="override the reference optimal value")
    for key in bench.LINESEARCH_KEYS:
        p.add_argument(f"--{key}", type=float, help=f"line-search {key} (default from the experiment settings)")


def build_parser():
    parser = _Parser(prog="sgmopt", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    _add_run_flags(sub.add_parser("run", help="run one experiment and write traces, table, diagnostics"))
    v = sub.add_parser("verify", help="run the acceptance suite")
    v.add_argument("--out", help=f"directory for the trace files (default ${OUT_ENV} or .)")
    v.add_argument("--ex2-n", type=int, default=512, dest="ex2_n", help="dimension for the ex2 criterion")
    pd = sub.add_parser("plot-data", help="write k, f-error, grad-norm series from JSON traces")
    pd.add_argument("traces", nargs="+", help="trace JSON files")
    pd.add_argument("--f-star", type=float, dest="f_star")
    pd.add_argument("--out", help="output directory")
    pd.add_argument("--prefix", default="plot")
    return parser


def resolve_run_settings(ns):
    settings = {k: d for k, (_, d) in RUN_KEYS.items()}
    if ns.config:
        settings.update(read_config_file(ns.config))
    for key in RUN_KEYS:
        v = getattr(ns, key, None)
        if v is not None:
            settings[key] = v
    if settings["experiment"] is None:
        raise ConfigError("no experiment given (use --experiment or the 'experiment' key)")
    settings["experiment"] = str(settings["experiment"])
    if settings["out"] is None:
        settings["out"] = os.environ.get(OUT_ENV, ".")
    formats = tuple(f.strip() for f in str(settings["format"]).split(",") if f.strip())
    bad = [f for f in formats if f not in ("csv", "json")]
    if bad or not formats:
        raise ConfigError(f"unknown format {bad[0] if bad else settings['format']!r}; use csv, json or csv,json")
    settings["format"] = formats
    return settings


def cmd_run(ns):
    s = resolve_run_settings(ns)
    methods = bench.METHODS if s["method"] == "all" else (s["method"],)
    overrides = tuple((k, s[k]) for k in bench.LINESEARCH_KEYS if s[k] is not None)
    spec = bench.ExperimentSpec(s["experiment"], s["n"], s["seed"], methods, s["max_iters"], s["scaling"],
                                s["x0_ones"], overrides)
    outcome = bench.run_experiment(
        spec, s["out"], s["format"], s["stop_ferr"], s["stop_grad"], not s["no_diagnostics"], s["f_star"],
    )
    sys.stdout.write(outcome.table)
    bad = [m for m, r in outcome.reports.items() if r.status in PATHOLOGIES]
    for m in bad:
        print(f"{m}: {outcome.reports[m].status}: {outcome.reports[m].message}", file=sys.stderr)
    return EXIT_PATHOLOGY if bad else EXIT_OK


def cmd_verify(ns):
    from .acceptance import run_all

    out = ns.out or os.environ.get(OUT_ENV, ".")
    if not Path(out).is_dir():
        raise ConfigError(f"output directory {out!r} does not exist")
    results = run_all(out, ex2_n=ns.ex2_n)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_PATHOLOGY


def cmd_plot_data(ns):
    out = ns.out or os.environ.get(OUT_ENV, ".")
    if not Path(out).is_dir():
        raise ConfigError(f"output directory {out!r} does not exist")
    reports = {}
    for path in ns.traces:
        try:
            rep = bench.series_from_trace_json(path)
        except (OSError, KeyError, ValueError) as exc:
            raise ConfigError(f"cannot read trace {path}: {exc}") from exc
        reports[rep.method] = rep
    for p in bench.emit_plot_data(reports, ns.f_star, out, ns.prefix):
        print(p)
    return EXIT_OK


def main(argv=None):
    try:
        ns = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if ns.verbose else logging.ERROR,
                            format="%(levelname)s %(name)s: %(message)s")
        handler = {"run": cmd_run, "verify": cmd_verify, "plot-data": cmd_plot_data}[ns.command]
        return handler(ns)
    except ConfigError as exc:
        print(f"sgmopt: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SgmError, ValueError) as exc:
        print(f"sgmopt: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
