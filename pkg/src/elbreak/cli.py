"""Command-line front end.

Subcommands
-----------
detect    scan a CSV column for a single coefficient change
segment   recursive binary segmentation for multiple changes
critval   theoretical critical values (and raw-statistic thresholds)
power     Monte Carlo rejection-frequency study from a config file

Exit codes: 0 success (a "no change" result is success), 2 input error
(unreadable file, bad column, missing values, bad config), 3 numerical
failure (degenerate data, solver failure), 4 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .el_solver import DEFAULT_SEED, SolverSettings
from .errors import ElbreakError, InputError, NumericalError, ScanError
from .estimating import TimeSeries
from .scan import (
    bootstrap_pvalue,
    default_trim,
    gumbel_quantile,
    raw_threshold,
    trimmed_scan,
)
from .segmentation import DEFAULT_MIN_LEN, binary_segment
from .simulate import parse_power_config, power_study

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_INTERNAL = 4

SCHEMA_VERSION = 1

_MISSING_TOKENS = {"", "na", "nan", "null", "none"}


@dataclass
class RunReport:
    """Structured result of one CLI invocation.

    Serializes to human-readable text and to a versioned JSON document;
    reading tolerates unknown fields so newer writers stay compatible.
    """

    command: str
    seed: int
    input: dict = field(default_factory=dict)
    result: dict = field(default_factory=dict)
    timing_s: float = 0.0
    version: str = __version__
    schema_version: int = SCHEMA_VERSION

    def to_json(self) -> str:
        doc = {
            "schema_version": self.schema_version,
            "version": self.version,
            "command": self.command,
            "seed": self.seed,
            "input": self.input,
            "result": self.result,
            "timing_s": self.timing_s,
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        doc = json.loads(text)
        known = {
            "schema_version", "version", "command", "seed", "input",
            "result", "timing_s",
        }
        kwargs = {k: v for k, v in doc.items() if k in known}
        return cls(**kwargs)

    def to_text(self) -> str:
        lines = [f"elbreak {self.version} :: {self.command}"]
        if self.input:
            parts = ", ".join(f"{k}={v}" for k, v in self.input.items())
            lines.append(f"input: {parts}")
        lines.append(f"seed: {self.seed}")
        lines.extend(_format_result(self.command, self.result))
        lines.append(f"elapsed: {self.timing_s:.3f} s")
        return "\n".join(lines)


def _format_result(command: str, res: dict) -> list[str]:
    lines: list[str] = []
    if command == "detect":
        lines.append(
            f"n = {res['n']}, p = {res['p']}, trim = ({res['trim'][0]}, {res['trim'][1]})"
        )
        lines.append(
            f"Z* = {res['z_star']:.6f} at k-hat = {res['k_hat']} "
            f"(theta-hat = {res['theta_hat']:.4f})"
        )
        lines.append(
            f"normalized statistic = {res['t_normalized']:.6f}, "
            f"asymptotic p-value = {res['p_value']:.6g}"
        )
        if res.get("p_value_bootstrap") is not None:
            lines.append(
                f"bootstrap p-value = {res['p_value_bootstrap']:.6g} "
                f"({res['bootstrap_reps']} replicates)"
            )
        verdict = "change detected" if res["reject"] else "no change detected"
        lines.append(f"decision at alpha = {res['alpha']:g}: {verdict}")
        if res.get("n_failed", 0):
            lines.append(f"note: {res['n_failed']} candidate splits failed and were skipped")
    elif command == "segment":
        cps = res["change_points"]
        if cps:
            lines.append(f"change points: {', '.join(str(c) for c in cps)}")
        else:
            lines.append("no change points detected")
        for node in res["tree"]:
            tag = node["decision"]
            extra = f" k = {node['change_point']}" if node["change_point"] else ""
            note = f" ({node['note']})" if node["note"] else ""
            lines.append(
                f"  [{node['start']}, {node['end']}] depth {node['depth']} "
                f"alpha {node['alpha']:.4g}: {tag}{extra}{note}"
            )
    elif command == "critval":
        lines.append("alpha      t_alpha" + ("      raw Z* threshold" if res.get("raw") else ""))
        for row in res["rows"]:
            base = f"{row['alpha']:<9g}  {row['t_alpha']:.6f}"
            if "raw_threshold" in row:
                base += f"      {row['raw_threshold']:.6f}"
            lines.append(base)
        if res.get("raw"):
            lines.append(f"(raw thresholds at n = {res['n']}, r = {res['r']})")
    elif command == "power":
        lines.append(res["csv"].rstrip("\n"))
        if res.get("flagged"):
            lines.append(f"flagged cells (>5% failures): {res['flagged']}")
    return lines


def _read_csv_column(
    path: str, column: str, drop_missing: bool
) -> tuple[np.ndarray, dict]:
    """Read one numeric column. The column is selected by header name or by
    0-based index; a non-numeric first row is treated as a header."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    rows = [row for row in rows if row and any(cell.strip() for cell in row)]
    if not rows:
        raise InputError(f"{path}: no data rows")

    header: list[str] | None = None
    first = rows[0]
    if any(not _is_number_or_missing(cell) for cell in first):
        header = [cell.strip() for cell in first]
        rows = rows[1:]
        if not rows:
            raise InputError(f"{path}: header only, no data rows")

    col_idx: int
    if header is not None and column in header:
        col_idx = header.index(column)
    else:
        try:
            col_idx = int(column)
        except ValueError:
            raise InputError(
                f"{path}: column {column!r} not found"
                + (f" in header {header}" if header else " (file has no header)")
            ) from None
        width = len(rows[0])
        if not 0 <= col_idx < width:
            raise InputError(f"{path}: column index {col_idx} out of range 0..{width - 1}")

    values: list[float] = []
    dropped = 0
    for lineno, row in enumerate(rows, start=2 if header else 1):
        if col_idx >= len(row):
            raise InputError(f"{path}: line {lineno}: missing column {col_idx}")
        cell = row[col_idx].strip()
        if cell.lower() in _MISSING_TOKENS:
            if drop_missing:
                dropped += 1
                continue
            raise InputError(
                f"{path}: line {lineno}: missing value (use --drop-missing to "
                "drop rows; note that dropping breaks the AR time structure)"
            )
        try:
            values.append(float(cell))
        except ValueError:
            raise InputError(
                f"{path}: line {lineno}: non-numeric value {cell!r} in column"
            ) from None
    if dropped:
        print(
            f"warning: dropped {dropped} rows with missing values; the AR "
            "time structure across the gaps is broken",
            file=sys.stderr,
        )
    info = {
        "path": path,
        "rows": len(values),
        "column": header[col_idx] if header is not None and col_idx < len(header) else str(col_idx),
        "dropped": dropped,
    }
    return np.asarray(values, dtype=np.float64), info


def _is_number_or_missing(cell: str) -> bool:
    c = cell.strip()
    if c.lower() in _MISSING_TOKENS:
        return True
    try:
        float(c)
        return True
    except ValueError:
        return False


def _settings_from_args(args: argparse.Namespace) -> SolverSettings:
    shared = True
    if getattr(args, "separate_sigma2", False):
        shared = False
    if getattr(args, "shared_sigma2", False):
        shared = True
    return SolverSettings(shared_sigma2=shared, jitter_seed=args.seed)


def _parse_trim(spec: str | None) -> tuple[int, int] | None:
    if spec is None:
        return None
    try:
        parts = [int(tok) for tok in spec.split(",")]
    except ValueError:
        raise InputError(f"bad --trim value {spec!r}; expected T or T1,T2") from None
    if len(parts) == 1:
        return parts[0], parts[0]
    if len(parts) == 2:
        return parts[0], parts[1]
    raise InputError(f"bad --trim value {spec!r}; expected T or T1,T2")


def _emit(report: RunReport, fmt: str) -> None:
    if fmt == "json":
        print(report.to_json())
    else:
        print(report.to_text())


def _cmd_detect(args: argparse.Namespace) -> int:
    t0 = time.perf_counter()
    values, info = _read_csv_column(args.csv, args.column, args.drop_missing)
    series = TimeSeries(values)
    settings = _settings_from_args(args)
    trim = _parse_trim(args.trim)
    scan = trimmed_scan(
        series, args.order, alpha=args.alpha, settings=settings,
        trim=trim, r=args.r, jobs=args.jobs,
    )
    result = scan.to_dict()
    if args.bootstrap:
        pb = bootstrap_pvalue(
            series, args.order, args.bootstrap, seed=args.seed,
            settings=settings, trim=trim, jobs=args.jobs,
        )
        result["p_value_bootstrap"] = pb
        result["bootstrap_reps"] = args.bootstrap
    if args.profile_out:
        with open(args.profile_out, "w", encoding="utf-8") as fh:
            fh.write("k,stat\n")
            for k, v in scan.profile:
                fh.write(f"{k},{v:.10g}\n")
        result["profile_out"] = args.profile_out
    report = RunReport(
        command="detect", seed=args.seed, input=info, result=result,
        timing_s=time.perf_counter() - t0,
    )
    _emit(report, args.format)
    return EXIT_OK


def _cmd_segment(args: argparse.Namespace) -> int:
    t0 = time.perf_counter()
    values, info = _read_csv_column(args.csv, args.column, args.drop_missing)
    series = TimeSeries(values)
    settings = _settings_from_args(args)
    seg = binary_segment(
        series, args.order, alpha=args.alpha, min_len=args.min_len,
        settings=settings, depth_adjust=args.depth_adjust, jobs=args.jobs,
    )
    report = RunReport(
        command="segment", seed=args.seed, input=info, result=seg.to_dict(),
        timing_s=time.perf_counter() - t0,
    )
    _emit(report, args.format)
    return EXIT_OK


def _cmd_critval(args: argparse.Namespace) -> int:
    t0 = time.perf_counter()
    rows = []
    want_raw = args.n is not None
    for alpha in args.alphas:
        if not 0 < alpha < 1:
            raise InputError(f"alpha must lie in (0, 1), got {alpha}")
        row = {"alpha": alpha, "t_alpha": gumbel_quantile(alpha)}
        if want_raw:
            row["raw_threshold"] = raw_threshold(alpha, args.n, args.r)
        rows.append(row)
    result = {"rows": rows, "raw": want_raw}
    if want_raw:
        result["n"] = args.n
        result["r"] = args.r
    report = RunReport(
        command="critval", seed=args.seed, input={}, result=result,
        timing_s=time.perf_counter() - t0,
    )
    _emit(report, args.format)
    return EXIT_OK


def _cmd_power(args: argparse.Namespace) -> int:
    t0 = time.perf_counter()
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {args.config}: {exc}") from exc
    config = parse_power_config(text, path=args.config)
    table = power_study(config, jobs=args.jobs)
    csv_text = table.to_csv()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
    result = {
        "csv": csv_text,
        "out": args.out,
        "reps": table.reps,
        "alpha": table.alpha,
        "flagged": [list(c) for c in table.flagged()],
    }
    report = RunReport(
        command="power", seed=config.seed,
        input={"config": args.config}, result=result,
        timing_s=time.perf_counter() - t0,
    )
    if args.out:
        # The CSV already went to the file; keep stdout to the summary.
        result_no_csv = dict(result)
        result_no_csv["csv"] = f"(written to {args.out})"
        report.result = result_no_csv
    _emit(report, args.format)
    return EXIT_OK


def _add_common(sub: argparse.ArgumentParser, with_model: bool = True) -> None:
    sub.add_argument("--seed", type=int, default=DEFAULT_SEED,
                     help=f"random seed (default {DEFAULT_SEED})")
    sub.add_argument("--jobs", type=int, default=None,
                     help="worker threads (default: ELBREAK_JOBS env var or 1)")
    sub.add_argument("--format", choices=("text", "json"), default="text",
                     help="report format (default text)")
    if with_model:
        sub.add_argument("--order", "-p", type=int, default=1,
                         help="AR order p (default 1; not auto-selected)")
        sub.add_argument("--alpha", type=float, default=0.05,
                         help="test level (default 0.05)")
        sub.add_argument("--shared-sigma2", action="store_true",
                         help="share one innovation variance across segments "
                              "under the alternative (the default)")
        sub.add_argument("--separate-sigma2", action="store_true",
                         help="estimate one variance per segment under the "
                              "alternative (adds a variance restriction to "
                              "the test; changes its null calibration)")


def _add_csv_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("csv", help="input CSV file")
    sub.add_argument("--column", default="0",
                     help="column name or 0-based index (default 0)")
    sub.add_argument("--drop-missing", action="store_true",
                     help="drop rows with missing values instead of aborting "
                          "(breaks the AR time structure; use with care)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="elbreak",
        description="Empirical-likelihood change-point detection for AR(p) series.",
        epilog="Exit codes: 0 success, 2 input error, 3 numerical failure, 4 internal error.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="cmd", required=True)

    det = subs.add_parser("detect", help="scan for a single coefficient change")
    _add_csv_args(det)
    _add_common(det)
    det.add_argument("--trim", default=None,
                     help="trim override as T or T1,T2 (default 2*floor(sqrt(n)))")
    det.add_argument("--bootstrap", type=int, default=0, metavar="B",
                     help="add a residual-bootstrap p-value with B replicates "
                          "(recommended for small samples)")
    det.add_argument("--r", type=int, default=None,
                     help="change dimension for the normalization (default: p)")
    det.add_argument("--profile-out", default=None, metavar="FILE",
                     help="write the per-k statistic profile as CSV (k,stat)")
    det.set_defaults(func=_cmd_detect)

    seg = subs.add_parser("segment", help="detect multiple changes by binary segmentation")
    _add_csv_args(seg)
    _add_common(seg)
    seg.add_argument("--min-len", type=int, default=DEFAULT_MIN_LEN,
                     help=f"minimum testable interval length (default {DEFAULT_MIN_LEN}; "
                          "below ~50 the asymptotic calibration is unreliable and "
                          "bootstrap mode is advised)")
    seg.add_argument("--depth-adjust", action="store_true",
                     help="halve the level at each recursion depth (conservative)")
    seg.set_defaults(func=_cmd_segment)

    cv = subs.add_parser("critval", help="theoretical critical values")
    cv.add_argument("alphas", nargs="+", type=float, help="levels, e.g. 0.01 0.05 0.10")
    cv.add_argument("-n", type=int, default=None,
                    help="sample size for raw Z* thresholds")
    cv.add_argument("--r", type=int, default=1,
                    help="change dimension for raw thresholds (default 1)")
    _add_common(cv, with_model=False)
    cv.set_defaults(func=_cmd_critval)

    pw = subs.add_parser("power", help="Monte Carlo power study from a config file")
    pw.add_argument("config", help="plain-text key-value config file")
    pw.add_argument("--out", "-o", default=None, help="write the table CSV here")
    _add_common(pw, with_model=False)
    pw.set_defaults(func=_cmd_power)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ScanError as exc:
        causes = exc.cause_counts
        if causes:
            dominant = max(causes, key=causes.get)
            print(f"error: scan failed, dominated by {dominant}: {exc}", file=sys.stderr)
        else:
            print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except NumericalError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ElbreakError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - internal failures
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
