"""Command-line interface: detection on CSV data, simulations, pruning tables.

Exit codes are 0 on success, 2 for unreadable or malformed input and 3 for
an invalid configuration.  All indices written out are 1-based.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass

import numpy as np

from .evaluation import ScenarioKind, ScenarioSpec, generate_scenario, run_benchmark
from .model import (
    ConfigError,
    Cp3oConfig,
    DetectionResult,
    GofMetric,
    MetricKind,
    Segmentation,
    TimeSeries,
    validate_config,
)
from .search import run_cp3o

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONFIG = 3

# Minimum segment length used for the simulation lengths when --min-size is absent.
DEFAULT_W = {400: 30, 1600: 60, 3200: 90, 6000: 120}
HEAVY_TAIL_ENERGY_ALPHA = 0.09


class InputError(Exception):
    """Unreadable or malformed input data."""


# ---------------------------------------------------------------- input ----

@dataclass
class LoadedInput:
    data: np.ndarray
    columns: list[str]
    header: bool
    header_source: str
    n_rows: int


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_csv(path: str, columns: list[str] | None = None,
             header: bool | None = None) -> LoadedInput:
    """Read numeric columns from a comma-separated file.

    ``header=None`` treats the first row as a header when any of its cells
    is not a number.  ``columns`` selects by header name or 1-based index.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if any(cell.strip() for cell in r)]
    except (OSError, UnicodeDecodeError, csv.Error) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise InputError(f"{path} contains no data")

    if header is None:
        has_header = not all(_is_number(c) for c in rows[0])
        source = "auto"
    else:
        has_header = header
        source = "flag"
    width = len(rows[0])
    names = [c.strip() for c in rows[0]] if has_header else [str(j + 1) for j in range(width)]
    body = rows[1:] if has_header else rows
    first_line = 2 if has_header else 1
    if not body:
        raise InputError(f"{path} has a header but no data rows")

    if columns:
        picked = []
        for col in columns:
            if col in names:
                picked.append(names.index(col))
            elif col.isdigit() and 1 <= int(col) <= width:
                picked.append(int(col) - 1)
            else:
                raise InputError(f"unknown column {col!r}; available: {', '.join(names)}")
    else:
        picked = list(range(width))

    data = np.empty((len(body), len(picked)))
    for i, row in enumerate(body):
        if len(row) != width:
            raise InputError(
                f"row {first_line + i}: expected {width} fields, found {len(row)}"
            )
        for j, col in enumerate(picked):
            cell = row[col].strip()
            try:
                value = float(cell)
            except ValueError:
                raise InputError(
                    f"row {first_line + i}, column {names[col]!r}: not a number: {cell!r}"
                ) from None
            if not math.isfinite(value):
                raise InputError(
                    f"row {first_line + i}, column {names[col]!r}: non-finite value {cell!r}"
                )
            data[i, j] = value
    return LoadedInput(data, [names[c] for c in picked], has_header, source, len(body))


def apply_transforms(data: np.ndarray, transforms: list[str], names: list[str],
                     first_row: int = 1) -> tuple[np.ndarray, int]:
    """Apply ``log`` / ``diff`` in order; returns the data and the number of diffs.

    ``first_row`` is the 1-based row number of ``data[0]``, used in errors.
    """
    n_diff = 0
    for tr in transforms:
        if tr == "log":
            bad = np.argwhere(data <= 0)
            if len(bad):
                i, j = bad[0]
                raise InputError(
                    f"log transform: non-positive value {data[i, j]!r} at row "
                    f"{first_row + n_diff + i}, column {names[j]!r}"
                )
            data = np.log(data)
        elif tr == "diff":
            data = np.diff(data, axis=0)
            n_diff += 1
        else:
            raise ConfigError(f"unknown transform {tr!r}")
    return data, n_diff


# ---------------------------------------------------------- serialization ----

def _metric_from_args(name: str, alpha: float | None, delta: int | None) -> GofMetric:
    kind = MetricKind(name)
    if kind.is_energy:
        return GofMetric(kind, 1.0 if alpha is None else alpha, delta)
    return GofMetric(kind, delta=delta)


def config_to_dict(cfg: Cp3oConfig) -> dict:
    return {
        "K": cfg.K,
        "w": cfg.w,
        "metric": cfg.metric.kind.value,
        "alpha": cfg.metric.alpha,
        "delta": cfg.metric.delta,
        "pruning_enabled": cfg.pruning_enabled,
    }


def config_from_dict(d: dict) -> Cp3oConfig:
    metric = GofMetric(MetricKind(d["metric"]), d["alpha"], d["delta"])
    return Cp3oConfig(K=d["K"], w=d["w"], metric=metric, pruning_enabled=d["pruning_enabled"])


def result_to_dict(result: DetectionResult, cfg: Cp3oConfig, n_diff: int = 0) -> dict:
    """JSON-ready view of a detection result (1-based indices)."""
    cps = list(result.change_points.change_points)
    return {
        "config": config_to_dict(cfg),
        "index_base": 1,
        "series_length": result.change_points.series_length,
        "change_points": cps,
        "original_row_map": [c + n_diff for c in cps],
        "selected_k": result.selected_k,
        "gof_curve": list(result.gof_curve),
        "segmentations": {str(k): list(s.change_points)
                          for k, s in result.all_segmentations.items()},
        "degenerate_flag": result.degenerate,
        "knee_fallback": result.knee_fallback,
        "prune_stats": result.prune_stats.tolist(),
        "runtime_s": result.elapsed,
    }


def result_from_dict(d: dict) -> DetectionResult:
    """Inverse of :func:`result_to_dict`."""
    T = d["series_length"]
    return DetectionResult(
        selected_k=d["selected_k"],
        change_points=Segmentation(tuple(d["change_points"]), T),
        gof_curve=[float(v) for v in d["gof_curve"]],
        all_segmentations={int(k): Segmentation(tuple(v), T)
                           for k, v in d["segmentations"].items()},
        prune_stats=np.asarray(d["prune_stats"], dtype=np.int64),
        elapsed=d["runtime_s"],
        degenerate=d["degenerate_flag"],
        knee_fallback=d["knee_fallback"],
    )


def prune_stats_csv(stats: np.ndarray) -> str:
    """``|S_t(k)|`` as CSV: one row per ``t = 1..T``, one column per ``k``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t"] + [f"k{k}" for k in range(1, stats.shape[1])])
    for t in range(1, stats.shape[0]):
        writer.writerow([t] + [int(v) for v in stats[t, 1:]])
    return buf.getvalue()


def _json_text(obj) -> str:
    # json writes inf/nan as bare tokens, which strict parsers reject
    return json.dumps(obj, indent=2, allow_nan=False, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _finite_or_none(x: float):
    return x if math.isfinite(x) else None


def _write(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc


class _WarningCollector(logging.Handler):
    def __init__(self):
        super().__init__(logging.WARNING)
        self.messages: list[str] = []

    def emit(self, record):
        self.messages.append(record.getMessage())


# ------------------------------------------------------------- commands ----

def _default_w(T: int) -> int:
    return DEFAULT_W.get(T, max(2, round(1.5 * math.sqrt(T))))


def _detect_config(args, T: int) -> Cp3oConfig:
    w = args.min_size if args.min_size is not None else _default_w(T)
    metric = _metric_from_args(args.metric, args.alpha, args.delta)
    return Cp3oConfig(K=args.K, w=w, metric=metric, pruning_enabled=not args.no_prune)


def cmd_detect(args) -> int:
    loaded = read_csv(args.input, _split_columns(args.columns), args.header)
    data, n_diff = apply_transforms(loaded.data, args.transform or [], loaded.columns)
    try:
        seq = TimeSeries(data)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    cfg = validate_config(seq, _detect_config(args, seq.T))

    collector = _WarningCollector()
    logging.getLogger("cp3o").addHandler(collector)
    try:
        result = run_cp3o(seq, cfg)
    finally:
        logging.getLogger("cp3o").removeHandler(collector)

    if args.prune_stats_out:
        _write(prune_stats_csv(result.prune_stats), args.prune_stats_out)
    out = result_to_dict(result, cfg, n_diff)
    out["prune_stats_path"] = args.prune_stats_out
    out["input"] = {
        "path": args.input,
        "columns": loaded.columns,
        "header": loaded.header,
        "header_source": loaded.header_source,
        "rows": loaded.n_rows,
        "transforms": list(args.transform or []),
    }
    out["seed"] = args.seed
    out["warnings"] = collector.messages

    if args.format == "json":
        _write(_json_text(out), args.output)
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["k", "gof", "selected", "change_points", "original_rows"])
        for k, seg in result.all_segmentations.items():
            cps = seg.change_points
            writer.writerow([
                k, repr(result.gof_curve[k - 1]), int(k == result.selected_k),
                " ".join(map(str, cps)), " ".join(str(c + n_diff) for c in cps),
            ])
        _write(buf.getvalue(), args.output)
    for msg in collector.messages:
        print(f"warning: {msg}", file=sys.stderr)
    print(f"header: {'present' if loaded.header else 'absent'} ({loaded.header_source})",
          file=sys.stderr)
    return EXIT_OK


SIM_COLUMNS = [
    "scenario", "T", "metric", "alpha", "w", "K", "trials",
    "mean_rand", "mean_t2e", "mean_e2t", "mean_est_k", "mean_runtime_s",
]


def _sim_alpha(scenario: ScenarioKind, metric: str, alpha: float | None) -> float | None:
    if not MetricKind(metric).is_energy:
        return None
    if alpha is not None:
        return alpha
    return HEAVY_TAIL_ENERGY_ALPHA if scenario is ScenarioKind.HEAVY_TAIL else 1.0


def cmd_simulate(args) -> int:
    if args.trials < 1:
        raise ConfigError(f"--trials must be >= 1, got {args.trials}")
    rows = []
    for scen_name in args.scenario:
        scenario = _scenario(scen_name)
        for T in args.T:
            w = args.min_size if args.min_size is not None else _default_w(T)
            for metric_name in args.metric:
                alpha = _sim_alpha(scenario, metric_name, args.alpha)
                metric = _metric_from_args(metric_name, alpha, args.delta)
                cfg = Cp3oConfig(K=args.K, w=w, metric=metric,
                                 pruning_enabled=not args.no_prune)
                spec = _scenario_spec(scenario, T, args.seed)
                summary = run_benchmark(spec, cfg, args.trials)
                rows.append({
                    "scenario": scenario.value, "T": T, "metric": metric.kind.value,
                    "alpha": alpha, "w": w, "K": args.K, "trials": args.trials,
                    "mean_rand": summary.rand, "mean_t2e": _finite_or_none(summary.t2e),
                    "mean_e2t": summary.e2t, "mean_est_k": summary.est_k,
                    "mean_runtime_s": summary.runtime,
                })
    if args.format == "json":
        _write(_json_text({"seed": args.seed, "rows": rows}), args.output)
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(SIM_COLUMNS)
        for row in rows:
            writer.writerow(["" if row[c] is None else
                             repr(row[c]) if isinstance(row[c], float) else row[c]
                             for c in SIM_COLUMNS])
        _write(buf.getvalue(), args.output)
    return EXIT_OK


def cmd_prune_stats(args) -> int:
    if (args.input is None) == (args.scenario is None):
        raise ConfigError("prune-stats needs exactly one of --input or --scenario")
    if args.input is not None:
        loaded = read_csv(args.input, _split_columns(args.columns), args.header)
        data, _ = apply_transforms(loaded.data, args.transform or [], loaded.columns)
        try:
            seq = TimeSeries(data)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
    else:
        seq, _ = generate_scenario(_scenario_spec(_scenario(args.scenario), args.T, args.seed))
    result = run_cp3o(seq, _detect_config(args, seq.T))
    _write(prune_stats_csv(result.prune_stats), args.output)
    return EXIT_OK


def _scenario(name: str) -> ScenarioKind:
    try:
        return ScenarioKind(name)
    except ValueError:
        choices = ", ".join(k.value for k in ScenarioKind)
        raise ConfigError(f"unknown scenario {name!r}; choose from {choices}") from None


def _scenario_spec(kind: ScenarioKind, T: int, seed: int) -> ScenarioSpec:
    try:
        return ScenarioSpec(kind, T, seed=seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _split_columns(columns: list[str] | None) -> list[str] | None:
    if not columns:
        return None
    return [c.strip() for item in columns for c in item.split(",") if c.strip()]


# --------------------------------------------------------------- parser ----

def _add_detect_options(p: argparse.ArgumentParser, with_input: bool = True) -> None:
    """Options shared by the subcommands; ``simulate`` has no input file and
    takes several metrics."""
    metrics = [k.value for k in MetricKind]
    if with_input:
        p.add_argument("--input", help="CSV file, one observation per row")
        p.add_argument("--columns", action="append",
                       help="columns to use, by header name or 1-based index "
                            "(comma-separated or repeated; default: all)")
        p.add_argument("--transform", action="append", choices=["log", "diff"],
                       help="transform applied in the order given (repeatable)")
        hdr = p.add_mutually_exclusive_group()
        hdr.add_argument("--header", dest="header", action="store_true", default=None,
                         help="first row is a header")
        hdr.add_argument("--no-header", dest="header", action="store_false",
                         help="first row is data")
    if with_input:
        p.add_argument("--metric", choices=metrics, default="energy")
    else:
        p.add_argument("--metric", choices=metrics, nargs="+", default=["energy"])
    p.add_argument("--alpha", type=float, help="distance exponent for energy metrics")
    p.add_argument("--delta", type=int, help="window for windowed metrics (default w-1)")
    p.add_argument("--K", type=int, default=5, help="largest number of change points")
    p.add_argument("--min-size", type=int, help="minimum segment length w")
    p.add_argument("--no-prune", action="store_true", help="disable search-space pruning")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", help="output file (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cp3o", description="Approximate multiple change point detection.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="find change points in a CSV series")
    _add_detect_options(p)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--prune-stats-out", help="also write the |S_t(k)| table here")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("simulate", help="benchmark on simulated series")
    _add_detect_options(p, with_input=False)
    p.add_argument("--scenario", nargs="+", required=True,
                   help="one or more of: " + ", ".join(k.value for k in ScenarioKind))
    p.add_argument("--T", nargs="+", type=int, required=True, help="series lengths")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("prune-stats", help="candidate-set sizes per (t, k) as CSV")
    _add_detect_options(p)
    p.add_argument("--scenario", help="simulate the series instead of reading --input")
    p.add_argument("--T", type=int, default=400, help="length of the simulated series")
    p.set_defaults(func=cmd_prune_stats)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "input", "-") is None and args.command == "detect":
        parser.error("detect needs --input")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
