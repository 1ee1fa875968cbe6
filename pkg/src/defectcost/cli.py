"""Command-line front end.

Subcommands: validate, metrics, bootstrap, cross-version, cross-project,
analyze, sensitivity, synth. Exit codes: 0 success, 1 usage error, 2 data
error, 3 runtime failure. All randomness is traceable to --seed; identical
configuration and seed reproduce outputs byte for byte.

Option precedence: command-line flags > JSON config file (--config) > defaults.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import analysis
from .costmodel import DEFAULT_BOUNDARIES
from .extmath import json_number
from .metrics import CoverageError
from .dataset import (
    DataError,
    SplitError,
    filter_releases,
    load_corpus,
    load_release_dir,
    write_release,
)
from .experiments import (
    evaluate_external_prediction,
    make_model,
    read_records,
    run_bootstrap,
    run_cross_project,
    run_cross_version,
    write_records_csv,
    write_records_jsonl,
    BootstrapConfig,
    CROSS_PROJECT_GAP_DAYS,
)
from .synth import SynthSpec, generate_synthetic

log = logging.getLogger("defectcost")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits 2 by default; the contract is 1
        raise UsageError(message)


def _parse_boundaries(text: str) -> tuple[float, float]:
    try:
        b1, b2 = (float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"--boundaries expects 'b1,b2', got {text!r}") from None
    if not (0 < b1 < b2):
        raise UsageError("--boundaries must satisfy 0 < b1 < b2")
    return (b1, b2)


def _parse_range(text: str, kind=float):
    try:
        lo, hi = (kind(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"expected 'lo,hi', got {text!r}") from None
    return (lo, hi)


def build_parser() -> _Parser:
    parser = _Parser(prog="defectcost", description=__doc__)
    parser.add_argument("--config", type=Path, help="JSON config file with default option values")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, samples=False):
        p.add_argument("--data", type=Path, help="corpus directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("-o", "--out", type=Path, required=True, help="output directory")
        p.add_argument("--boundaries", default=None, help="potential boundaries 'b1,b2'")
        p.add_argument("--min-instances", type=int, default=100)
        p.add_argument("--min-defects", type=int, default=5)
        p.add_argument("--count-mode", choices=("defective_files", "defects"), default="defective_files")
        p.add_argument("--model", choices=("forest", "gnb"), default="forest")
        p.add_argument("--trees", type=int, default=100)
        p.add_argument("--tune", action="store_true", help="tune the forest with differential evolution")
        p.add_argument("--de-population", type=int, default=20)
        p.add_argument("--de-generations", type=int, default=30)
        p.add_argument("--oversample", choices=("off", "smote", "smote_tuned"), default=None)
        p.add_argument("--transfer", choices=("none", "watanabe", "camargo_cruz"), default="none")
        p.add_argument("--threshold", type=float, default=0.5)
        p.add_argument("--effort-mode", choices=("defects", "files"), default="defects")
        if samples:
            p.add_argument("--samples", type=int, default=100)
            p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("validate", help="load and validate a corpus")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--min-instances", type=int, default=100)
    p.add_argument("--min-defects", type=int, default=5)
    p.add_argument("--count-mode", choices=("defective_files", "defects"), default="defective_files")

    p = sub.add_parser("metrics", help="evaluate an external prediction for one release")
    p.add_argument("--release", type=Path, required=True, help="release directory")
    p.add_argument("--pred", type=Path, required=True, help="CSV with columns artifact_id,score")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--boundaries", default=None)
    p.add_argument("--effort-mode", choices=("defects", "files"), default="defects")
    p.add_argument("-o", "--out", type=Path, required=True)

    p = sub.add_parser("bootstrap", help="bootstrap experiment over a corpus")
    add_common(p, samples=True)

    p = sub.add_parser("cross-version", help="train on the prior release of each project")
    add_common(p)

    p = sub.add_parser("cross-project", help="train on other projects with temporal filtering")
    add_common(p)
    p.add_argument("--gap-days", type=int, default=CROSS_PROJECT_GAP_DAYS)

    p = sub.add_parser("analyze", help="relationship models and report bundle from records")
    p.add_argument("--records", type=Path, required=True, help="records.csv or records.jsonl")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--tune", action="store_true")
    p.add_argument("--corr-threshold", type=float, default=0.8)
    p.add_argument("--boundaries", default=None)
    p.add_argument("-o", "--out", type=Path, required=True)

    p = sub.add_parser("sensitivity", help="boundary-shift and diff-regression analysis")
    p.add_argument("--records", type=Path, required=True)
    p.add_argument("--eval-records", type=Path, help="records from another experiment for the regression")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--boundaries", default=None)
    p.add_argument("-o", "--out", type=Path, required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--projects", type=int, default=10)
    p.add_argument("--releases", type=int, default=5)
    p.add_argument("--artifacts", default="150,250", help="artifact count range 'lo,hi'")
    p.add_argument("--defect-ratio", default="0.05,0.15", help="defect ratio range 'lo,hi'")
    p.add_argument("--features", type=int, default=8)
    p.add_argument("--signal", type=float, default=1.0)
    p.add_argument("--size-mu", type=float, default=4.0)
    p.add_argument("--size-sigma", type=float, default=1.0)
    p.add_argument("-o", "--out", type=Path, required=True)

    return parser


def _apply_config(parser: _Parser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if args.config:
        try:
            overrides = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read config file: {exc}", args.config) from exc
        if not isinstance(overrides, dict):
            raise DataError("config file must hold a JSON object", args.config)
        # flags beat config: only fill values the user did not set explicitly
        given = {a.split("=")[0].lstrip("-").replace("-", "_") for a in argv if a.startswith("--")}
        for key, value in overrides.items():
            attr = key.replace("-", "_")
            if hasattr(args, attr) and attr not in given:
                setattr(args, attr, value)
    return args


def _boundaries_of(args) -> tuple[float, float]:
    raw = getattr(args, "boundaries", None)
    if raw is None:
        return DEFAULT_BOUNDARIES
    if isinstance(raw, (list, tuple)):
        b1, b2 = (float(v) for v in raw)
        if not (0 < b1 < b2):
            raise UsageError("boundaries must satisfy 0 < b1 < b2")
        return (b1, b2)
    return _parse_boundaries(str(raw))


def _load_filtered(args):
    if args.data is None:
        raise UsageError("--data is required (or set 'data' in the config file)")
    releases = load_corpus(args.data)
    kept = filter_releases(releases, args.min_instances, args.min_defects, args.count_mode)
    log.info("loaded %d releases, %d pass the (%d, %d) filter",
             len(releases), len(kept), args.min_instances, args.min_defects)
    return releases, kept


def _model_of(args):
    return make_model(
        args.model,
        tune=args.tune,
        n_trees=args.trees,
        tune_population=args.de_population,
        tune_generations=args.de_generations,
    )


def _write_outputs(result, outdir: Path) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    write_records_csv(result.records, outdir / "records.csv")
    write_records_jsonl(result.records, outdir / "records.jsonl")
    if result.notices:
        (outdir / "notices.txt").write_text("\n".join(result.notices) + "\n")
    log.info("wrote %d records to %s", len(result.records), outdir)


def cmd_validate(args) -> int:
    releases = load_corpus(args.data)
    kept = filter_releases(releases, args.min_instances, args.min_defects, args.count_mode)
    for r in releases:
        print(
            f"{r.key()}: artifacts={r.n_artifacts} defects={len(r.defects)} "
            f"defective_files={r.n_defective} ratio={r.defect_ratio:.3f}"
        )
    print(f"total releases: {len(releases)}")
    print(f"eligible ({args.min_instances}, {args.min_defects}, {args.count_mode}): {len(kept)}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    release = load_release_dir(args.release)
    scores: dict[str, float] = {}
    try:
        with args.pred.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["artifact_id", "score"]:
                raise DataError("prediction header must be 'artifact_id,score'", args.pred, 1)
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    scores[row[0]] = float(row[1])
                except (IndexError, ValueError) as exc:
                    raise DataError("malformed prediction row", args.pred, lineno) from exc
    except OSError as exc:
        raise DataError(f"cannot read predictions: {exc}", args.pred) from exc
    record = evaluate_external_prediction(
        release,
        scores,
        threshold=args.threshold,
        boundaries=_boundaries_of(args),
        effort_mode=args.effort_mode,
    )
    args.out.mkdir(parents=True, exist_ok=True)
    write_records_csv([record], args.out / "records.csv")
    write_records_jsonl([record], args.out / "records.jsonl")
    print(f"potential={record.potential.label} lower={record.bounds.lower} "
          f"upper={record.bounds.upper} diff={record.bounds.diff}")
    return EXIT_OK


def cmd_bootstrap(args) -> int:
    _, kept = _load_filtered(args)
    if not kept:
        raise DataError("no releases pass the eligibility filter")
    config = BootstrapConfig(
        n_samples=args.samples,
        seed=args.seed,
        model=_model_of(args),
        oversample=args.oversample if args.oversample is not None else "smote",
        boundaries=_boundaries_of(args),
        threshold=args.threshold,
        effort_mode=args.effort_mode,
    )
    result = run_bootstrap(kept, args.samples, args.seed, config=config, jobs=args.jobs)
    _write_outputs(result, args.out)
    return EXIT_OK


def cmd_cross_version(args) -> int:
    releases, _ = _load_filtered(args)
    result = run_cross_version(
        releases,
        model=_model_of(args),
        seed=args.seed,
        min_instances=args.min_instances,
        min_defects=args.min_defects,
        count_mode=args.count_mode,
        transfer=args.transfer,
        oversample=args.oversample if args.oversample is not None else "off",
        boundaries=_boundaries_of(args),
        threshold=args.threshold,
        effort_mode=args.effort_mode,
    )
    _write_outputs(result, args.out)
    return EXIT_OK


def cmd_cross_project(args) -> int:
    releases, _ = _load_filtered(args)
    result = run_cross_project(
        releases,
        model=_model_of(args),
        seed=args.seed,
        gap_days=args.gap_days,
        min_instances=args.min_instances,
        min_defects=args.min_defects,
        count_mode=args.count_mode,
        transfer=args.transfer,
        oversample=args.oversample if args.oversample is not None else "off",
        boundaries=_boundaries_of(args),
        threshold=args.threshold,
        effort_mode=args.effort_mode,
    )
    _write_outputs(result, args.out)
    return EXIT_OK


def _read_records_checked(path):
    try:
        records = read_records(path)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise DataError(f"malformed records file: {exc}", path) from exc
    if not records:
        raise DataError("records file is empty", path)
    return records


def cmd_analyze(args) -> int:
    records = _read_records_checked(args.records)
    from .learners import ForestParams

    analysis.write_report_bundle(
        args.out,
        records,
        seed=args.seed,
        correlation_threshold=args.corr_threshold,
        forest_params=ForestParams(n_trees=args.trees),
        tune_forest=args.tune,
        boundaries=_boundaries_of(args),
    )
    log.info("report bundle written to %s", args.out)
    return EXIT_OK


def cmd_sensitivity(args) -> int:
    records = _read_records_checked(args.records)
    from .learners import ForestParams

    params = ForestParams(n_trees=args.trees)
    sens = analysis.sensitivity_boundaries(
        records, seed=args.seed, base=_boundaries_of(args), forest_params=params
    )
    payload = sens.to_json_dict()
    if args.eval_records:
        eval_records = _read_records_checked(args.eval_records)
        try:
            reg = analysis.sensitivity_regression(records, eval_records, seed=args.seed, forest_params=params)
            payload["regression"] = {
                "train_r2": json_number(reg["train_r2"]),
                "eval_r2": json_number(reg["eval_r2"]),
                "n_train": reg["n_train"],
                "n_eval": reg["n_eval"],
            }
        except ValueError as exc:
            raise DataError(str(exc), args.eval_records) from exc
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "sensitivity.json").write_text(json.dumps(payload, indent=1, allow_nan=False) + "\n")
    log.info("sensitivity report written to %s", args.out / "sensitivity.json")
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = SynthSpec(
        n_projects=args.projects,
        releases_per_project=args.releases,
        artifacts_range=_parse_range(args.artifacts, int),
        defect_ratio_range=_parse_range(args.defect_ratio, float),
        n_features=args.features,
        signal=args.signal,
        size_log_mean=args.size_mu,
        size_log_sigma=args.size_sigma,
    )
    try:
        spec.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    releases = generate_synthetic(spec, args.seed)
    for release in releases:
        write_release(release, Path(args.out) / release.project / release.release_id)
    log.info("wrote %d releases to %s", len(releases), args.out)
    print(f"generated {len(releases)} releases ({args.projects} projects) in {args.out}")
    return EXIT_OK


_COMMANDS = {
    "validate": cmd_validate,
    "metrics": cmd_metrics,
    "bootstrap": cmd_bootstrap,
    "cross-version": cmd_cross_version,
    "cross-project": cmd_cross_project,
    "analyze": cmd_analyze,
    "sensitivity": cmd_sensitivity,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, list(sys.argv[1:] if argv is None else argv))
        logging.basicConfig(
            level=logging.DEBUG if args.verbose else logging.INFO,
            format="%(asctime)s %(levelname)s %(name)s: %(message)s",
            stream=sys.stderr,
        )
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, CoverageError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, SplitError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
