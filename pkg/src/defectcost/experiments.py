"""Experiment pipelines producing EvaluationRecords.

Three scenarios share one record schema: the bootstrap experiment (in-bag
training, out-of-bag evaluation, a plain and an oversampled variant per
sample), cross-version prediction (train on the closest eligible prior
release of the same project), and strict cross-project prediction (train on
all eligible data of other projects released at least six months before the
target, with defect labels recomputed from fix timestamps so nothing from the
future leaks into training).

All randomness is derived from one master seed through named seed sequences,
so identical configurations reproduce records bit by bit.
"""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import timedelta
from pathlib import Path
from typing import Sequence

import numpy as np

from .confounders import CONFOUNDER_NAMES, ConfounderVector, compute_confounders, top_share
from .costmodel import (
    DEFAULT_BOUNDARIES,
    CostBounds,
    Potential,
    classify_potential,
    cost_bounds,
)
from .dataset import Release, ReleaseView, SplitError, bootstrap_split
from .extmath import fmt_float
from .learners import (
    ForestParams,
    SmoteTuning,
    apply_smote,
    differential_evolution,
    oob_mcc,
    params_from_vector,
    train_gaussian_nb,
    train_random_forest,
    tune_smote,
)
from .metrics import METRIC_NAMES, MetricVector, Prediction, evaluate_metrics

log = logging.getLogger(__name__)

SCENARIO_CODES = {"bootstrap": 1, "cross_version": 2, "cross_project": 3, "external": 4}
CROSS_PROJECT_GAP_DAYS = 183  # "six months", fixed in days for determinism

CSV_COLUMNS = (
    "scenario",
    "project",
    "release",
    "sample",
    "preprocessing",
    "seed",
    *METRIC_NAMES,
    *CONFOUNDER_NAMES,
    "lower",
    "upper",
    "diff",
    "potential",
)

VARIABLE_NAMES = METRIC_NAMES + CONFOUNDER_NAMES


@dataclass(frozen=True)
class EvaluationRecord:
    scenario: str
    project: str
    release: str
    sample: int
    preprocessing: str
    seed: int
    metrics: MetricVector
    confounders: ConfounderVector
    bounds: CostBounds
    potential: Potential

    def variables(self) -> dict[str, float]:
        out = self.metrics.to_dict()
        out.update(self.confounders.to_dict())
        return out

    def to_csv_row(self) -> list[str]:
        vars_ = self.variables()
        return [
            self.scenario,
            self.project,
            self.release,
            str(self.sample),
            self.preprocessing,
            str(self.seed),
            *[fmt_float(vars_[name]) for name in VARIABLE_NAMES],
            fmt_float(self.bounds.lower),
            fmt_float(self.bounds.upper),
            fmt_float(self.bounds.diff),
            self.potential.label,
        ]

    def to_json_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "project": self.project,
            "release": self.release,
            "sample": self.sample,
            "preprocessing": self.preprocessing,
            "seed": self.seed,
            "metrics": self.metrics.to_json_dict(),
            "confounders": self.confounders.to_json_dict(),
            "bounds": self.bounds.to_json_dict(),
            "potential": self.potential.label,
        }


def write_records_csv(records: Sequence[EvaluationRecord], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow(rec.to_csv_row())
    return path


def write_records_jsonl(records: Sequence[EvaluationRecord], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json_dict(), allow_nan=False) + "\n")
    return path


def _record_from_parts(identity: dict, variables: dict[str, float], lower, upper, diff, potential) -> EvaluationRecord:
    metrics = MetricVector(**{k: variables[k] for k in METRIC_NAMES})
    confounders = ConfounderVector(**{k: variables[k] for k in CONFOUNDER_NAMES})
    return EvaluationRecord(
        scenario=identity["scenario"],
        project=identity["project"],
        release=identity["release"],
        sample=int(identity["sample"]),
        preprocessing=identity["preprocessing"],
        seed=int(identity["seed"]),
        metrics=metrics,
        confounders=confounders,
        bounds=CostBounds(lower=lower, upper=upper, diff=diff),
        potential=potential,
    )


def read_records_csv(path) -> list[EvaluationRecord]:
    path = Path(path)
    records = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"records file {path} lacks columns {sorted(missing)}")
        for row in reader:
            records.append(
                _record_from_parts(
                    row,
                    {name: float(row[name]) for name in VARIABLE_NAMES},
                    float(row["lower"]),
                    float(row["upper"]),
                    float(row["diff"]),
                    Potential.from_label(row["potential"]),
                )
            )
    return records


def read_records_jsonl(path) -> list[EvaluationRecord]:
    from .extmath import parse_extended

    records = []
    with Path(path).open() as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            variables = {
                k: (float("nan") if v is None else float(v))
                for k, v in {**obj["metrics"], **obj["confounders"]}.items()
            }
            records.append(
                _record_from_parts(
                    obj,
                    variables,
                    parse_extended(obj["bounds"]["lower"]),
                    parse_extended(obj["bounds"]["upper"]),
                    parse_extended(obj["bounds"]["diff"]),
                    Potential.from_label(obj["potential"]),
                )
            )
    return records


def read_records(path) -> list[EvaluationRecord]:
    path = Path(path)
    if path.suffix == ".jsonl":
        return read_records_jsonl(path)
    return read_records_csv(path)


# ---------------------------------------------------------------------------
# pluggable defect prediction models


@dataclass(frozen=True)
class ForestModel:
    """Random forest, optionally tuned with differential evolution on OOB MCC."""

    params: ForestParams = ForestParams()
    tune: bool = False
    tune_population: int = 20
    tune_generations: int = 30

    name = "forest"

    def fit(self, X, y, seed: int) -> "FittedScorer":
        y = np.asarray(y, dtype=np.int64)
        if len(np.unique(y)) < 2:
            return FittedScorer(constant=float(y[0]) if len(y) else 0.0)
        params = self.params
        if self.tune:
            base = self.params

            def objective(vec):
                cand = params_from_vector(vec, base=base)
                forest = train_random_forest(X, y, cand, seed=seed, n_classes=2)
                score = oob_mcc(forest, X, y)
                return np.inf if np.isnan(score) else -score

            best, _ = differential_evolution(
                objective,
                bounds=[(0.0, 1.0), (2, 20), (1, 20)],
                population=self.tune_population,
                generations=self.tune_generations,
                integer_dims=(1, 2),
                seed=seed,
            )
            params = params_from_vector(best, base=base)
        forest = train_random_forest(X, y, params, seed=seed, n_classes=2)
        return FittedScorer(forest=forest)


@dataclass(frozen=True)
class GaussianNBModel:
    """Gaussian naive-bayes-style scorer (used by the transfer pipelines)."""

    name = "gnb"

    def fit(self, X, y, seed: int) -> "FittedScorer":
        y = np.asarray(y, dtype=np.int64)
        if len(np.unique(y)) < 2:
            return FittedScorer(constant=float(y[0]) if len(y) else 0.0)
        return FittedScorer(nb=train_gaussian_nb(X, y))


@dataclass(frozen=True, eq=False)
class FittedScorer:
    forest: object = None
    nb: object = None
    constant: float | None = None

    def predict_scores(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self.constant is not None:
            return np.full(X.shape[0], self.constant)
        if self.forest is not None:
            return self.forest.predict_proba(X)[:, 1]
        probs = self.nb.predict_proba(X)
        col = int(np.argmax(self.nb.classes == 1)) if 1 in self.nb.classes else None
        if col is None:
            return np.zeros(X.shape[0])
        return probs[:, col]


def make_model(name: str, *, tune: bool = False, n_trees: int = 100,
               tune_population: int = 20, tune_generations: int = 30):
    if name == "forest":
        return ForestModel(
            params=ForestParams(n_trees=n_trees),
            tune=tune,
            tune_population=tune_population,
            tune_generations=tune_generations,
        )
    if name == "gnb":
        return GaussianNBModel()
    raise ValueError(f"unknown model {name!r} (expected 'forest' or 'gnb')")


# ---------------------------------------------------------------------------
# transfer transforms for cross-project prediction


@dataclass(frozen=True, eq=False)
class TransferResult:
    train_X: np.ndarray
    target_X: np.ndarray
    flagged: tuple[int, ...] = ()


TRANSFER_KINDS = ("none", "watanabe", "camargo_cruz")


def transfer_transform(kind: str, train_X: np.ndarray, target_X: np.ndarray) -> TransferResult:
    """Align training data with the target project.

    watanabe: scale each training feature by mean(target)/mean(train);
    features with zero training mean are left unscaled and flagged.
    camargo_cruz: ln(x+1) on both sides (negative values clipped to zero
    first; static metrics are non-negative by construction), then shift the
    training features by median(target) - median(train).
    """
    train_X = np.asarray(train_X, dtype=np.float64)
    target_X = np.asarray(target_X, dtype=np.float64)
    if kind == "none":
        return TransferResult(train_X, target_X)
    if kind == "watanabe":
        train_mean = train_X.mean(axis=0)
        target_mean = target_X.mean(axis=0)
        flagged = tuple(int(i) for i in np.flatnonzero(train_mean == 0))
        scale = np.where(train_mean == 0, 1.0, target_mean / np.where(train_mean == 0, 1.0, train_mean))
        return TransferResult(train_X * scale, target_X, flagged)
    if kind == "camargo_cruz":
        flagged = tuple(
            int(i) for i in np.flatnonzero((train_X < 0).any(axis=0) | (target_X < 0).any(axis=0))
        )
        train_log = np.log1p(np.maximum(train_X, 0.0))
        target_log = np.log1p(np.maximum(target_X, 0.0))
        shift = np.median(target_log, axis=0) - np.median(train_log, axis=0)
        return TransferResult(train_log + shift, target_log, flagged)
    raise ValueError(f"unknown transfer kind {kind!r} (expected one of {TRANSFER_KINDS})")


# ---------------------------------------------------------------------------
# record assembly


@dataclass(frozen=True)
class RunResult:
    records: list[EvaluationRecord]
    notices: list[str] = field(default_factory=list)


def build_record(
    *,
    scenario: str,
    project: str,
    release: str,
    sample: int,
    preprocessing: str,
    seed: int,
    train_labels,
    train_prime_labels,
    test_view: ReleaseView,
    scores: np.ndarray,
    threshold: float = 0.5,
    boundaries: tuple[float, float] = DEFAULT_BOUNDARIES,
    effort_mode: str = "defects",
) -> EvaluationRecord:
    pred = Prediction.from_arrays(test_view.ids, scores, threshold)
    metrics = evaluate_metrics(test_view, pred, effort_mode=effort_mode)
    confounders = compute_confounders(train_labels, train_prime_labels, test_view)
    bounds = cost_bounds(test_view, pred)
    return EvaluationRecord(
        scenario=scenario,
        project=project,
        release=release,
        sample=sample,
        preprocessing=preprocessing,
        seed=seed,
        metrics=metrics,
        confounders=confounders,
        bounds=bounds,
        potential=classify_potential(bounds.diff, boundaries),
    )


@dataclass(frozen=True)
class BootstrapConfig:
    n_samples: int
    seed: int
    model: object = ForestModel()
    oversample: str = "smote"  # off | smote | smote_tuned
    smote_k: int = 5
    smote_ratio: float = 0.5
    smote_tuning: SmoteTuning = SmoteTuning()
    boundaries: tuple[float, float] = DEFAULT_BOUNDARIES
    max_redraws: int = 1000
    threshold: float = 0.5
    effort_mode: str = "defects"

    def __post_init__(self):
        if self.oversample not in ("off", "smote", "smote_tuned"):
            raise ValueError(f"unknown oversample mode {self.oversample!r}")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")


def _bootstrap_release(args) -> tuple[list[EvaluationRecord], list[str]]:
    release, release_idx, config = args
    records: list[EvaluationRecord] = []
    notices: list[str] = []
    for s in range(config.n_samples):
        ss = np.random.SeedSequence([config.seed, SCENARIO_CODES["bootstrap"], release_idx, s])
        split_seed, model_plain, model_over, smote_seed, tune_seed = (int(v) for v in ss.generate_state(5))
        try:
            split = bootstrap_split(release, seed=split_seed, max_redraws=config.max_redraws)
        except SplitError as exc:
            notices.append(str(exc))
            continue
        train_view = release.view(split.train)
        test_view = release.view(split.test)

        variants = [("plain", model_plain)]
        if config.oversample != "off":
            variants.append(("oversampled", model_over))

        for variant, model_seed in variants:
            X, y = train_view.X, train_view.y
            if variant == "oversampled":
                if config.oversample == "smote_tuned":
                    k, ratio = tune_smote(X, y, seed=tune_seed, tuning=config.smote_tuning)
                else:
                    k, ratio = config.smote_k, config.smote_ratio
                X, y = apply_smote(X, y, k_neighbors=k, target_ratio=ratio, seed=smote_seed)
            fitted = config.model.fit(X, y, seed=model_seed)
            records.append(
                build_record(
                    scenario="bootstrap",
                    project=release.project,
                    release=release.release_id,
                    sample=s,
                    preprocessing=variant,
                    seed=model_seed,
                    train_labels=train_view.y,
                    train_prime_labels=y,
                    test_view=test_view,
                    scores=fitted.predict_scores(test_view.X),
                    threshold=config.threshold,
                    boundaries=config.boundaries,
                    effort_mode=config.effort_mode,
                )
            )
    return records, notices


def run_bootstrap(
    releases: Sequence[Release],
    n_samples: int,
    seed: int,
    *,
    config: BootstrapConfig | None = None,
    jobs: int = 1,
) -> RunResult:
    """Bootstrap experiment over pre-filtered releases.

    Produces per release and sample one record on the plain training data and
    one after oversampling (unless oversampling is off). Redraw exhaustion is
    reported per release and the run continues.
    """
    if config is None:
        config = BootstrapConfig(n_samples=n_samples, seed=seed)
    else:
        config = replace(config, n_samples=n_samples, seed=seed)
    tasks = [(release, i, config) for i, release in enumerate(releases)]
    results: list[tuple[list[EvaluationRecord], list[str]]] = []
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_bootstrap_release, tasks))
    else:
        results = [_bootstrap_release(t) for t in tasks]
    records: list[EvaluationRecord] = []
    notices: list[str] = []
    for recs, notes in results:
        records.extend(recs)
        notices.extend(notes)
    for note in notices:
        log.warning("%s", note)
    return RunResult(records=records, notices=notices)


def _ordered_by_time(releases: Sequence[Release]) -> list[Release]:
    return sorted(releases, key=lambda r: (r.released_at, r.release_id))


def _eligible_train_view(
    release: Release, as_of, min_instances: int, min_defects: int, mode: str
) -> ReleaseView | None:
    """View with leakage-cleaned labels if it passes the size/defect filter."""
    view = release.view(as_of=as_of)
    if view.n < min_instances:
        return None
    if mode == "defects":
        n_def = len(view.defects)
    else:
        n_def = view.n_defective
    if n_def < min_defects:
        return None
    return view


def _fit_and_record(
    *,
    scenario: str,
    target: Release,
    train_X,
    train_y,
    sample: int,
    seed_parts: Sequence[int],
    model,
    transfer: str,
    oversample: str,
    smote_k: int,
    smote_ratio: float,
    smote_tuning: SmoteTuning,
    boundaries,
    threshold: float,
    effort_mode: str,
) -> EvaluationRecord:
    ss = np.random.SeedSequence(list(seed_parts))
    model_seed, smote_seed, tune_seed = (int(v) for v in ss.generate_state(3))
    test_view = target.view()
    moved = transfer_transform(transfer, train_X, test_view.X)
    X, y = moved.train_X, np.asarray(train_y, dtype=np.int64)
    preprocessing = "plain"
    if oversample != "off":
        if oversample == "smote_tuned":
            k, ratio = tune_smote(X, y, seed=tune_seed, tuning=smote_tuning)
        else:
            k, ratio = smote_k, smote_ratio
        X, y = apply_smote(X, y, k_neighbors=k, target_ratio=ratio, seed=smote_seed)
        preprocessing = "oversampled"
    fitted = model.fit(X, y, seed=model_seed)
    return build_record(
        scenario=scenario,
        project=target.project,
        release=target.release_id,
        sample=sample,
        preprocessing=preprocessing,
        seed=model_seed,
        train_labels=train_y,
        train_prime_labels=y,
        test_view=test_view,
        scores=fitted.predict_scores(moved.target_X),
        threshold=threshold,
        boundaries=boundaries,
        effort_mode=effort_mode,
    )


def run_cross_version(
    releases: Sequence[Release],
    model=None,
    seed: int = 0,
    *,
    min_instances: int = 100,
    min_defects: int = 5,
    count_mode: str = "defective_files",
    transfer: str = "none",
    oversample: str = "off",
    smote_k: int = 5,
    smote_ratio: float = 0.5,
    smote_tuning: SmoteTuning = SmoteTuning(),
    boundaries=DEFAULT_BOUNDARIES,
    threshold: float = 0.5,
    effort_mode: str = "defects",
) -> RunResult:
    """Train on the closest eligible prior release of the same project.

    Targets are never filtered; training candidates must pass the size/defect
    filter after their labels are restricted to defects fixed before the
    target release (no future information enters training).
    """
    model = model or ForestModel()
    records: list[EvaluationRecord] = []
    notices: list[str] = []
    by_project: dict[str, list[Release]] = {}
    for r in releases:
        by_project.setdefault(r.project, []).append(r)
    target_idx = 0
    for project in sorted(by_project):
        ordered = _ordered_by_time(by_project[project])
        for i, target in enumerate(ordered):
            target_idx += 1
            train_view = None
            for candidate in reversed(ordered[:i]):
                view = _eligible_train_view(
                    candidate, target.released_at, min_instances, min_defects,
                    "defects" if count_mode == "defects" else "defective_files",
                )
                if view is not None:
                    train_view = view
                    break
            if train_view is None:
                notices.append(f"cross_version: no eligible prior release for {target.key()}")
                continue
            records.append(
                _fit_and_record(
                    scenario="cross_version",
                    target=target,
                    train_X=train_view.X,
                    train_y=train_view.y,
                    sample=0,
                    seed_parts=[seed, SCENARIO_CODES["cross_version"], target_idx],
                    model=model,
                    transfer=transfer,
                    oversample=oversample,
                    smote_k=smote_k,
                    smote_ratio=smote_ratio,
                    smote_tuning=smote_tuning,
                    boundaries=boundaries,
                    threshold=threshold,
                    effort_mode=effort_mode,
                )
            )
    for note in notices:
        log.warning("%s", note)
    return RunResult(records=records, notices=notices)


def cross_project_pool(
    releases: Sequence[Release], target: Release, gap_days: int = CROSS_PROJECT_GAP_DAYS
) -> list[Release]:
    """Releases of other projects released at least ``gap_days`` before the target."""
    cutoff = target.released_at - timedelta(days=gap_days)
    return [
        r
        for r in _ordered_by_time(releases)
        if r.project != target.project and r.released_at <= cutoff
    ]


def cross_project_training_views(
    releases: Sequence[Release],
    target: Release,
    *,
    gap_days: int = CROSS_PROJECT_GAP_DAYS,
    min_instances: int = 100,
    min_defects: int = 5,
    count_mode: str = "defective_files",
) -> list[tuple[Release, ReleaseView]]:
    """Eligible training views for one cross-project target.

    Pool releases respect the temporal gap; their labels only reflect defects
    fixed before the target's release date.
    """
    mode = "defects" if count_mode == "defects" else "defective_files"
    out = []
    for candidate in cross_project_pool(releases, target, gap_days):
        view = _eligible_train_view(candidate, target.released_at, min_instances, min_defects, mode)
        if view is not None:
            out.append((candidate, view))
    return out


def run_cross_project(
    releases: Sequence[Release],
    model=None,
    seed: int = 0,
    *,
    gap_days: int = CROSS_PROJECT_GAP_DAYS,
    min_instances: int = 100,
    min_defects: int = 5,
    count_mode: str = "defective_files",
    transfer: str = "none",
    oversample: str = "off",
    smote_k: int = 5,
    smote_ratio: float = 0.5,
    smote_tuning: SmoteTuning = SmoteTuning(),
    boundaries=DEFAULT_BOUNDARIES,
    threshold: float = 0.5,
    effort_mode: str = "defects",
) -> RunResult:
    """Strict cross-project prediction with temporal-leakage removal.

    The training pool contains eligible releases of other projects released at
    least ``gap_days`` before the target; training labels only reflect defects
    fixed before the target's release date.
    """
    model = model or ForestModel()
    records: list[EvaluationRecord] = []
    notices: list[str] = []
    for idx, target in enumerate(sorted(releases, key=lambda r: (r.project, r.released_at, r.release_id))):
        pool = cross_project_training_views(
            releases,
            target,
            gap_days=gap_days,
            min_instances=min_instances,
            min_defects=min_defects,
            count_mode=count_mode,
        )
        if not pool:
            notices.append(f"cross_project: empty training pool for {target.key()}")
            continue
        train_X = np.vstack([v.X for _, v in pool])
        train_y = np.concatenate([v.y for _, v in pool])
        records.append(
            _fit_and_record(
                scenario="cross_project",
                target=target,
                train_X=train_X,
                train_y=train_y,
                sample=0,
                seed_parts=[seed, SCENARIO_CODES["cross_project"], idx],
                model=model,
                transfer=transfer,
                oversample=oversample,
                smote_k=smote_k,
                smote_ratio=smote_ratio,
                smote_tuning=smote_tuning,
                boundaries=boundaries,
                threshold=threshold,
                effort_mode=effort_mode,
            )
        )
    for note in notices:
        log.warning("%s", note)
    return RunResult(records=records, notices=notices)


def evaluate_external_prediction(
    release: Release,
    scores_by_id: dict[str, float],
    *,
    threshold: float = 0.5,
    boundaries=DEFAULT_BOUNDARIES,
    effort_mode: str = "defects",
    seed: int = 0,
) -> EvaluationRecord:
    """One record for a third-party prediction of a release.

    No training data exists here, so the training-side confounders carry the
    undefined marker and the training sizes are zero.
    """
    test_view = release.view()
    pred = Prediction(dict(scores_by_id), threshold)
    metrics = evaluate_metrics(test_view, pred, effort_mode=effort_mode)
    bounds = cost_bounds(test_view, pred)
    nan = float("nan")
    confounders = ConfounderVector(
        bias_train=nan,
        bias_train_prime=nan,
        bias_test=float(test_view.y.mean()),
        ratio_bias=nan,
        ratio_bias_prime=nan,
        prop_def_1pct=top_share(test_view.sizes[test_view.y == 1]),
        prop_clean_1pct=top_share(test_view.sizes[test_view.y == 0]),
        n_train=0.0,
        n_train_prime=0.0,
        n_test=float(test_view.n),
    )
    return EvaluationRecord(
        scenario="external",
        project=release.project,
        release=release.release_id,
        sample=0,
        preprocessing="plain",
        seed=seed,
        metrics=metrics,
        confounders=confounders,
        bounds=bounds,
        potential=classify_potential(bounds.diff, boundaries),
    )
