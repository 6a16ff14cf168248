"""Command-line front end: ``init``, ``analyze``, ``simulate``, ``both``, ``sweep``.

Exit codes: 0 success, 1 input error, 2 numeric failure, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .chain import build_transition_matrix, solve_stationary, truncation_check, write_triplets
from .config import KEY_BY_NAME, format_config, load_config, reference_config, parse_sweep
from .errors import InputError, NumericError
from .metrics import METRIC_NAMES, compute_metrics
from .mmpp import mean_rate
from .sim import SimConfig, simulate

log = logging.getLogger("ofdma_cac")

TRUNCATION_LIMIT = 2e-4

CSV_COLUMNS = (
    ["scenario", "sweep_key", "sweep_value", "mode", "source", "metric_mode"]
    + list(METRIC_NAMES)
    + [f"hw_{m}" for m in METRIC_NAMES]
    + ["truncation_check", "residual", "wall_time", "flags"]
)

COMMANDS = ("analyze", "simulate", "both")


def analyze_row(config, mode=None, metric_mode=None, dump_chain=None):
    """Build, solve and evaluate one scenario; returns a CSV row dict."""
    mode = mode or config.mode
    metric_mode = metric_mode or config.metric_mode
    t0 = time.perf_counter()
    P = build_transition_matrix(config, mode=mode)
    dist = solve_stationary(P, method=config.solver, tol=config.solver_tol,
                            max_iter=config.max_iterations)
    report = compute_metrics(dist, P, mean_rate(config.mmpp), metric_mode)
    if dump_chain:
        write_triplets(dump_chain, P, dist)
    row = {"mode": mode, "source": "analytic", "metric_mode": metric_mode,
           "residual": dist.residual, "flags": []}
    row.update(report.values())
    if not report.delay_defined:
        row["flags"].append("delay_undefined")
    if mode == "no_cac":
        tc = truncation_check(dist, mode)
        row["truncation_check"] = tc
        if tc >= TRUNCATION_LIMIT:
            log.warning("truncation check %.3e >= %.0e: raise truncation_level", tc, TRUNCATION_LIMIT)
            row["flags"].append("truncation_warning")
    row["wall_time"] = time.perf_counter() - t0
    return row


def simulate_row(config, sim: SimConfig, mode=None):
    mode = mode or config.mode
    t0 = time.perf_counter()
    rep = simulate(config, sim, mode=mode)
    row = {"mode": mode, "source": "sim", "metric_mode": "consistent", "flags": []}
    row.update(rep.estimates)
    row.update({f"hw_{k}": v for k, v in rep.half_widths.items()})
    if math.isnan(rep.estimates["delay"]):
        row["flags"].append("delay_undefined")
    row["wall_time"] = time.perf_counter() - t0
    return row


def _rows_for(config, command, sim, modes, metric_mode, dump_chain=None):
    rows = []
    for mode in modes:
        if command in ("analyze", "both"):
            rows.append(analyze_row(config, mode, metric_mode, dump_chain))
        if command in ("simulate", "both"):
            rows.append(simulate_row(config, sim, mode))
    return rows


def run(config, command="analyze", out=None, sim=None, metric_mode=None, dump_chain=None,
        scenario="scenario"):
    """Evaluate ``config`` in its own mode; write and return the CSV rows."""
    if command not in COMMANDS:
        raise InputError(f"unknown command {command!r}")
    sim = sim or SimConfig()
    rows = _rows_for(config, command, sim, [config.mode], metric_mode, dump_chain)
    for r in rows:
        r["scenario"] = scenario
    write_csv(rows, out)
    return rows


def sweep(config, spec, command="analyze", out=None, sim=None, metric_mode=None,
          modes=("cac", "no_cac"), jobs=1, plot_script=None, scenario="sweep"):
    """Evaluate every sweep point under each mode; rows come out in sweep order."""
    if command not in COMMANDS:
        raise InputError(f"unknown command {command!r}")
    sim = sim or SimConfig()
    points = spec.points()
    configs = [config.replace(**{spec.key: v}) for v in points]

    def work(cfg):
        return _rows_for(cfg, command, sim, modes, metric_mode)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, configs))
    else:
        results = [work(c) for c in configs]

    rows = []
    for n, (value, point_rows) in enumerate(zip(points, results)):
        for r in point_rows:
            r.update(scenario=f"{scenario}#{n}", sweep_key=spec.key, sweep_value=value)
            rows.append(r)
    write_csv(rows, out)
    if plot_script is not None:
        Path(plot_script).write_text(gnuplot_script(out or "sweep.csv", spec.key, modes))
    return rows


def _fmt(v):
    if isinstance(v, list):
        return ";".join(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return "" if v is None else str(v)


def write_csv(rows, out=None):
    """Write rows with the fixed column set; ``out=None`` writes to stdout."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in CSV_COLUMNS])
    if out is None:
        sys.stdout.write(buf.getvalue())
    else:
        Path(out).write_text(buf.getvalue())


def read_csv(path):
    """Read a result CSV back, converting numeric columns to float."""
    numeric = set(METRIC_NAMES) | {f"hw_{m}" for m in METRIC_NAMES} | {
        "sweep_value", "truncation_check", "residual", "wall_time"}
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for k in numeric:
            r[k] = float(r[k]) if r[k] != "" else None
    return rows


def gnuplot_script(csv_path, key, modes=("cac", "no_cac")):
    """One chart per metric against the swept key, one series per mode and source."""
    col = {c: n + 1 for n, c in enumerate(CSV_COLUMNS)}
    x = col["sweep_value"]
    unit = KEY_BY_NAME[key].unit
    stem = Path(csv_path).with_suffix("").name
    lines = [
        "# gnuplot script written by ofdma-cac",
        'set datafile separator ","',
        "set terminal pngcairo size 800,600",
        "set grid",
        f'set xlabel "{key} [{unit}]"',
    ]
    for metric in METRIC_NAMES:
        y = col[metric]
        series = []
        for mode in modes:
            label = "CAC" if mode == "cac" else "no CAC"
            for source, style in (("analytic", "linespoints"), ("sim", "points")):
                sel = f'(strcol({col["mode"]}) eq "{mode}" && strcol({col["source"]}) eq "{source}" ? ${y} : 1/0)'
                series.append(f'"{csv_path}" every ::1 using {x}:{sel} with {style} title "{label} {source}"')
        lines += [f'set output "{stem}_{metric}.png"', f'set ylabel "{metric}"',
                  "plot " + ", \\\n     ".join(series), ""]
    return "\n".join(lines)


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors (exit 1); exit 2 is reserved for numeric failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser():
    p = _Parser(prog="ofdma-cac", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    init = sub.add_parser("init", help="write the reference config annotated with units")
    init.add_argument("--out", help="destination (default: stdout)")

    def common(sp):
        sp.add_argument("--config", help="config file (default: built-in reference scenario)")
        sp.add_argument("--out", help="CSV destination (default: stdout)")
        sp.add_argument("--metric-mode", choices=("consistent", "paper_literal"))
        sp.add_argument("--seed", type=int, default=12345)
        sp.add_argument("--frames", type=int, default=1_000_000)
        sp.add_argument("--warmup", type=int, default=10_000)
        sp.add_argument("--batches", type=int, default=20)
        sp.add_argument("-v", "--verbose", action="store_true")

    helps = {"analyze": "solve the chain and report the metrics",
             "simulate": "estimate the metrics by simulation",
             "both": "analyze and simulate, one row each"}
    for name in COMMANDS:
        sp = sub.add_parser(name, help=helps[name])
        common(sp)
        sp.add_argument("--dump-chain", help="write P and pi as sparse triplets")

    sw = sub.add_parser("sweep", help="sweep one key under CAC and no-CAC")
    common(sw)
    sw.add_argument("--sweep", required=True, metavar="KEY=START:STEP:END")
    sw.add_argument("--run", choices=COMMANDS, default="analyze", help="what to do at each point")
    sw.add_argument("--modes", default="cac,no_cac", help="comma-separated modes")
    sw.add_argument("--jobs", type=int, default=1, help="sweep points evaluated concurrently")
    sw.add_argument("--plot-script", help="gnuplot script path (default: next to --out)")
    return p


def main(argv=None):
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        if args.command == "init":
            text = format_config(reference_config())
            if args.out:
                Path(args.out).write_text(text)
            else:
                sys.stdout.write(text)
            return 0
        config = load_config(args.config) if args.config else reference_config()
        scenario = Path(args.config).stem if args.config else "reference"
        sim = SimConfig(args.seed, args.frames, args.warmup, args.batches)
        if args.command == "sweep":
            spec = parse_sweep(args.sweep)
            modes = tuple(m.strip() for m in args.modes.split(",") if m.strip())
            plot = args.plot_script or (str(Path(args.out).with_suffix(".gp")) if args.out else None)
            sweep(config, spec, args.run, args.out, sim, args.metric_mode, modes,
                  args.jobs, plot, scenario)
        else:
            run(config, args.command, args.out, sim, args.metric_mode, args.dump_chain, scenario)
        return 0
    except (InputError, OSError) as exc:
        # unreadable config or unwritable output path
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
