"""Command line front end.

    mda-sim run --config cfg.toml --out results/ [--set trials=2000] [--seed 7] [--assert-trends]
    mda-sim validate --config cfg.toml
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from . import __version__
from .config import ConfigError, load_config
from .harness import MetricsReport, TrendCheck, baseline_crossover, run_experiment, summarize_trend
from .numerics import DomainError

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_CONFIG = 2
EXIT_TRENDS = 3

POWERS_HEADER = ["K", "L", "node", "mean_w", "ci_lo_w", "ci_hi_w", "trimmed_mean_w", "baseline_w"]
SELECTION_HEADER = ["L", "ch_id", "selection_probability"]


def _num(x: float) -> str:
    return f"{x:.17e}"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_powers(report: MetricsReport, path: Path) -> None:
    cfg = report.config
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(POWERS_HEADER)
        for k in cfg.k_sweep:
            for l in cfg.l_sweep:
                for node in report.node_names:
                    st = report.power(k, l, node)
                    w.writerow(
                        [k, l, node]
                        + [_num(v) for v in (st.mean, st.ci_lo, st.ci_hi, st.trimmed_mean, report.baseline_for(node))]
                    )


def write_selection(report: MetricsReport, path: Path) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SELECTION_HEADER)
        for l in report.config.l_sweep:
            for ch_id, prob in sorted(report.selection[l].items()):
                w.writerow([l, ch_id, _num(prob)])


def summary_lines(report: MetricsReport, checks: list[TrendCheck] | None, skipped: str | None) -> list[str]:
    cfg = report.config
    lines = [
        f"mda-sim {__version__}: {cfg.trials} trials per cell, seed {cfg.seed}, objective {cfg.objective.value}",
        f"K sweep {list(cfg.k_sweep)}, L sweep {list(cfg.l_sweep)}, outages {report.outage_count}",
        "",
        "trend checks:",
    ]
    if checks is None:
        lines.append(f"  skipped ({skipped})")
    else:
        lines += [f"  {c.line()}" for c in checks]
    pooled = {}
    for gains in report.mean_direct_gain.values():
        for j, g in gains.items():
            pooled[j] = pooled.get(j, 0.0) + g
    worst = min(pooled, key=lambda j: (pooled[j], j))
    lines += ["", f"weakest direct link: CH{worst}, non-fading direct baseline {report.baseline.ch_direct[worst]:.4e} W"]
    for l in cfg.l_sweep:
        if worst in report.selection[l] and report.selection[l][worst] > 0.0:
            k_star = baseline_crossover(report, worst, l)
            shown = "never within the sweep" if k_star is None else f"from K* = {k_star}"
            lines.append(f"  L={l}: CH{worst} CI below its baseline {shown}")
    lines += ["", "selection probability:"]
    for l in cfg.l_sweep:
        probs = ", ".join(f"CH{j}={p:.4f}" for j, p in sorted(report.selection[l].items()))
        lines.append(f"  L={l}: {probs}")
    return lines


def cmd_run(
    config_path: str | None,
    out_dir: str,
    overrides: Sequence[str] = (),
    assert_trends: bool = False,
    seed: int | None = None,
    workers: int | None = None,
) -> int:
    started = _now()
    try:
        loaded = load_config(config_path, overrides)
        cfg = loaded.experiment()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    problems = cfg.violations()
    if problems:
        for p in problems:
            print(f"config error: {p}", file=sys.stderr)
        return EXIT_CONFIG

    report = run_experiment(cfg, workers=workers)
    try:
        checks, skipped = summarize_trend(report), None
    except DomainError as exc:
        checks, skipped = None, str(exc)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_powers(report, out / "powers.csv")
    write_selection(report, out / "selection.csv")
    (out / "summary.txt").write_text("\n".join(summary_lines(report, checks, skipped)) + "\n")
    manifest = {
        "config_hash": loaded.sha256,
        "version": __version__,
        "seed": cfg.seed,
        "started_at": started,
        "finished_at": _now(),
        "outage_count": report.outage_count,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    if assert_trends:
        if checks is None:
            print(f"cannot assert trends: {skipped}", file=sys.stderr)
            return EXIT_CONFIG
        if not all(c.passed for c in checks):
            for c in checks:
                print(c.line(), file=sys.stderr)
            return EXIT_TRENDS
    return EXIT_OK


def cmd_validate(config_path: str | None) -> int:
    try:
        cfg = load_config(config_path).experiment()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    problems = cfg.violations()
    for p in problems:
        print(f"invalid: {p}")
    if problems:
        return EXIT_INVALID
    print("config OK")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mda-sim", description="Robot-relay mobility diversity simulator")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the (K, L) sweep and write results")
    run.add_argument("--config", help="config file (default: the shipped default.toml)")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--assert-trends", action="store_true", help="exit 3 if a trend check fails")

    val = sub.add_parser("validate", help="check a config file")
    val.add_argument("--config", help="config file (default: the shipped default.toml)")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.out, args.overrides, args.assert_trends, args.seed)
    return cmd_validate(args.config)


if __name__ == "__main__":
    sys.exit(main())
