"""Command-line interface.

Subcommands: simulate, certify, propagation, maxvel, minvel, oracle-compare,
report.  Global flags: --config <path>, --out <dir>, --seed <u64>,
--threads <k>.  Exit codes: 0 all certificates pass, 1 certificate failure,
2 configuration error, 3 numerical failure (flagged run).
"""

from __future__ import annotations

import argparse
import sys
import tempfile
from pathlib import Path

from halfwave.experiments.config import (
    ExperimentConfig,
    ConfigError,
    load_config,
    DEFAULT_CONFIG_TEXT,
)
from halfwave.experiments.report import (
    RunReport,
    write_report,
    read_series_csv,
    EXIT_CONFIG_ERROR,
    EXIT_NUMERICAL_FAILURE,
)


def _load(args) -> ExperimentConfig:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.config is not None:
        return load_config(args.config, overrides)
    return ExperimentConfig(**overrides)


def _dispatch(args) -> int:
    from halfwave.experiments import runs

    out_dir = Path(args.out)
    if args.command == "report":
        return _rerender(out_dir, args.label)
    try:
        cfg = _load(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    if args.label:
        cfg.label = args.label
    if cfg.threads > 1:
        _set_threads(cfg.threads)
    try:
        if args.command == "simulate":
            out_dir.mkdir(parents=True, exist_ok=True)
            report = runs.run_simulate(cfg, checkpoint_path=out_dir / f"{cfg.label}.traj")
        elif args.command == "certify":
            report = runs.run_certify(cfg)
        elif args.command == "propagation":
            report = runs.run_propagation_estimate(cfg)
        elif args.command == "maxvel":
            report = runs.run_maximal_velocity(cfg)
        elif args.command == "minvel":
            report = runs.run_minimal_velocity(cfg)
        elif args.command == "oracle-compare":
            report = runs.run_oracle_compare(cfg)
        else:
            print(f"unknown command {args.command}", file=sys.stderr)
            return EXIT_CONFIG_ERROR
    except ConfigError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (ArithmeticError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL_FAILURE
    write_report(report, out_dir)
    for cert in report.certificates:
        status = "PASS" if cert.get("pass") else "FAIL"
        print(f"[{status}] {cert['id']}")
    code = report.exit_code()
    print(f"report written to {out_dir} (exit {code})")
    return code


def _rerender(out_dir: Path, label: str | None) -> int:
    import json

    labels = [label] if label else [p.stem for p in out_dir.glob("*.json")]
    if not labels:
        print(f"no reports found in {out_dir}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    worst = 0
    for lb in labels:
        json_path = out_dir / f"{lb}.json"
        csv_path = out_dir / f"{lb}.csv"
        if not json_path.exists():
            print(f"missing {json_path}", file=sys.stderr)
            return EXIT_CONFIG_ERROR
        with open(json_path) as fh:
            doc = json.load(fh)
        report = RunReport(lb, doc.get("manifest", {}),
                           certificates=doc.get("certificates", []),
                           flagged=doc.get("flagged", False))
        if csv_path.exists():
            report.series = read_series_csv(csv_path)
        from halfwave.experiments.plots import plot_report_figures

        plot_report_figures(report, out_dir)
        worst = max(worst, report.exit_code())
        print(f"re-rendered {lb} (exit {report.exit_code()})")
    return worst


def _set_threads(k: int) -> None:
    import os

    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(k))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="halfwave",
        description="Spectral simulator and verification harness for "
                    "massless-particle dynamics on the radial half-line.",
    )
    parser.add_argument("--config", type=Path, default=None,
                        help="INI config file (defaults used when omitted)")
    parser.add_argument("--out", type=Path, default=Path("halfwave-out"),
                        help="output directory for reports")
    parser.add_argument("--seed", type=int, default=None, help="probe-vector seed")
    parser.add_argument("--threads", type=int, default=None, help="worker threads")
    parser.add_argument("--label", type=str, default=None, help="report label")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("simulate", "propagate and record the standard observable series"),
        ("certify", "run the static operator-inequality battery"),
        ("propagation", "shell propagation-estimate integrals with tails"),
        ("maxvel", "maximal velocity decay and dyadic decomposition"),
        ("minvel", "minimal velocity decay and shell integrals"),
        ("oracle-compare", "split-step vs dense propagator cross-check"),
        ("report", "re-render figures from an existing report directory"),
    ):
        sub.add_parser(name, help=doc)
    parser.add_argument("--print-default-config", action="store_true",
                        help=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "print_default_config", False):
        print(DEFAULT_CONFIG_TEXT)
        return 0
    return _dispatch(args)


if __name__ == "__main__":
    sys.exit(main())
