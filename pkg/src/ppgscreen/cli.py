"""Command-line interface.

Subcommands cover the full pipeline (``run``), synthetic data generation
(``synth``), feature dumps (``features``), figure regeneration from a
stored report (``report``), and cohort summaries (``summarize``).

Configuration comes from an optional TOML file plus command-line
overrides; flags always win. Fatal errors exit with a documented code and
leave a machine-readable error record on stderr (and error.json under the
output directory when one is known).

Exit codes:
  0  success
  2  missing input file or unusable invocation
  3  too few subjects for the requested cross-validation
  4  any other pipeline error
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ppgscreen import __version__
from ppgscreen.config import (
    PipelineConfig,
    apply_overrides,
    load_config,
    to_dict as config_to_dict,
)
from ppgscreen.errors import MissingFileError, PipelineError, TooFewSubjectsError
from ppgscreen.pipeline import collect_features, run_pipeline
from ppgscreen.report import (
    load_report,
    render_figures,
    write_feature_csv,
    write_report_json,
)
from ppgscreen.synth import SynthSpec, generate_dataset

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_MISSING_FILE = 2
EXIT_TOO_FEW_SUBJECTS = 3
EXIT_PIPELINE_ERROR = 4


def exit_code_for(exc: PipelineError) -> int:
    if isinstance(exc, MissingFileError):
        return EXIT_MISSING_FILE
    if isinstance(exc, TooFewSubjectsError):
        return EXIT_TOO_FEW_SUBJECTS
    return EXIT_PIPELINE_ERROR


def _parse_set(item: str):
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(
            f"--set expects key.path=value, got {item!r}")
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw  # bare word: treat as a string
    return key, value


def _add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="TOML",
                        help="configuration file; flags override it")
    parser.add_argument("--metadata", help="path to subjects.csv")
    parser.add_argument("--signals", help="directory of signal files")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int, help="pipeline seed")
    parser.add_argument("--k", type=int, help="number of CV folds")
    parser.add_argument("--exclude-ids", metavar="ID[,ID...]",
                        help="subjects to drop before cohort selection")
    parser.add_argument("--set", metavar="KEY=VALUE", type=_parse_set,
                        action="append", default=[], dest="overrides",
                        help="set any config key, e.g. filter.cutoff_hz=18")


def build_config(args: argparse.Namespace) -> PipelineConfig:
    config = load_config(args.config) if args.config else PipelineConfig()
    overrides = dict(args.overrides)
    if args.metadata is not None:
        overrides["paths.metadata"] = args.metadata
    if args.signals is not None:
        overrides["paths.signals"] = args.signals
    if args.out is not None:
        overrides["paths.out"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.k is not None:
        overrides["eval.k"] = args.k
    if args.exclude_ids is not None:
        overrides["exclude_ids"] = [
            s for s in args.exclude_ids.split(",") if s]
    if overrides:
        config = apply_overrides(config, overrides)
    return config


def _report_error(exc: PipelineError, out_dir: Path | None) -> None:
    record = {"error": type(exc).__name__, "message": str(exc),
              "exit_code": exit_code_for(exc)}
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    if out_dir is not None:
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / "error.json").write_text(
                json.dumps(record, sort_keys=True, indent=2) + "\n",
                encoding="utf-8")
        except OSError:
            log.warning("could not write error.json under %s", out_dir)


def cmd_run(args: argparse.Namespace) -> int:
    try:
        config = build_config(args)
    except PipelineError as exc:
        _report_error(exc, None)
        return exit_code_for(exc)
    out = Path(config.paths.out)
    try:
        result = run_pipeline(config)
        report = result.to_report()
        report_path = write_report_json(report, out)
        figures = render_figures(report, out)
        (out / "run_info.json").write_text(
            json.dumps({"runtime_s": result.runtime_s}, sort_keys=True) + "\n",
            encoding="utf-8")
    except PipelineError as exc:
        _report_error(exc, out)
        return exit_code_for(exc)
    logreg_auc = report["models"]["logreg"]["aggregate"]["AUC"]["mean"]
    gbt_auc = report["models"]["gbt"]["aggregate"]["AUC"]["mean"]
    print(f"subjects: {result.subjects_with_cycles} with cycles, "
          f"accepted cycles: {result.total_cycles}")
    print(f"AUC (mean over {config.eval.k} folds): "
          f"logreg {logreg_auc:.3f}, gbt {gbt_auc:.3f}")
    print(f"report: {report_path}")
    print(f"figures: {len(figures)} SVG files in {out}")
    log.info("pipeline finished in %.1f s", result.runtime_s)
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    try:
        spec = SynthSpec(
            n_per_class=args.n_per_class,
            segments_per_subject=args.segments,
            segment_s=args.segment_s,
            hr_range_bpm=(args.hr_min, args.hr_max),
            noise_frac=args.noise,
            drift_frac_per_s=args.drift,
            seed=args.seed,
        )
        paths = generate_dataset(spec, args.out)
    except PipelineError as exc:
        _report_error(exc, Path(args.out))
        return exit_code_for(exc)
    print(f"metadata: {paths['metadata']}")
    print(f"signals:  {paths['signals']}")
    print(f"truth:    {paths['truth']}")
    return EXIT_OK


def cmd_features(args: argparse.Namespace) -> int:
    try:
        config = build_config(args)
    except PipelineError as exc:
        _report_error(exc, None)
        return exit_code_for(exc)
    out = Path(config.paths.out)
    try:
        stage = collect_features(config)
        path = write_feature_csv(stage.vectors, out / "features.csv")
    except PipelineError as exc:
        _report_error(exc, out)
        return exit_code_for(exc)
    print(f"wrote {len(stage.vectors)} cycles to {path}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    out = Path(args.out)
    try:
        report = load_report(args.report)
        figures = render_figures(report, out)
    except PipelineError as exc:
        _report_error(exc, out)
        return exit_code_for(exc)
    for path in figures:
        print(path)
    return EXIT_OK


def _format_stats(entry: dict) -> str:
    mean, std = entry.get("mean"), entry.get("std")
    if mean is None:
        return "-"
    if std is None:
        return f"{mean:.1f}"
    return f"{mean:.1f} +/- {std:.1f}"


def cmd_summarize(args: argparse.Namespace) -> int:
    try:
        config = build_config(args)
        stage = collect_features(config)
    except PipelineError as exc:
        _report_error(exc, None)
        return exit_code_for(exc)
    summary = stage.summary.to_dict()
    if args.json:
        print(json.dumps(summary, sort_keys=True, indent=2))
        return EXIT_OK
    columns = ("non_diabetic", "diabetic", "total")
    print(f"{'':<14}" + "".join(f"{c:>16}" for c in columns))
    for row in ("subjects", "males", "cycles"):
        print(f"{row:<14}" + "".join(
            f"{summary[c][row]:>16}" for c in columns))
    for row in ("age", "height_cm", "weight_kg", "heart_rate_bpm", "bmi"):
        print(f"{row:<14}" + "".join(
            f"{_format_stats(summary[c][row]):>16}" for c in columns))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppgscreen",
        description="Fingertip PPG heartbeat morphology pipeline for "
                    "diabetes screening.",
        epilog="exit codes: 0 success; 2 missing file or bad invocation; "
               "3 too few subjects for the requested folds; "
               "4 other pipeline error")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for info logging, -vv for debug")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the full pipeline and write "
                                     "report.json plus figures")
    _add_config_arguments(run)
    run.set_defaults(func=cmd_run)

    synth = sub.add_parser("synth", help="generate a synthetic dataset "
                                         "with ground truth")
    synth.add_argument("--out", required=True, help="output directory")
    synth.add_argument("--n-per-class", type=int, default=10)
    synth.add_argument("--segments", type=int, default=3)
    synth.add_argument("--segment-s", type=float, default=2.1)
    synth.add_argument("--hr-min", type=float, default=72.0)
    synth.add_argument("--hr-max", type=float, default=90.0)
    synth.add_argument("--noise", type=float, default=0.0,
                       help="additive noise, fraction of pulse amplitude")
    synth.add_argument("--drift", type=float, default=0.0,
                       help="baseline drift, fraction of amplitude per second")
    synth.add_argument("--seed", type=int, default=0)
    synth.set_defaults(func=cmd_synth)

    features = sub.add_parser("features", help="dump per-cycle feature "
                                               "vectors as CSV")
    _add_config_arguments(features)
    features.set_defaults(func=cmd_features)

    report = sub.add_parser("report", help="regenerate figures from a "
                                           "stored report.json")
    report.add_argument("--report", required=True, help="path to report.json")
    report.add_argument("--out", required=True, help="figure directory")
    report.set_defaults(func=cmd_report)

    summarize = sub.add_parser("summarize", help="print a cohort summary "
                                                 "table")
    _add_config_arguments(summarize)
    summarize.add_argument("--json", action="store_true",
                           help="emit JSON instead of a table")
    summarize.set_defaults(func=cmd_summarize)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
