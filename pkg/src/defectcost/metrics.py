"""Performance metrics: confusion-matrix based, ranking based, and effort aware.

Twenty metrics are computed per evaluation. Division by zero never raises;
the affected metric becomes the undefined marker (NaN) and is serialized as
JSON null. Ranking metrics break score ties deterministically: descending
score, then descending size, then ascending artifact id.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Mapping, Sequence

import numpy as np

from .dataset import ReleaseView
from .extmath import UNDEFINED, json_number, safe_div


class CoverageError(Exception):
    """Prediction does not cover exactly the evaluation artifacts."""


@dataclass(frozen=True)
class Prediction:
    """Per-artifact scores in [0,1] with a decision threshold.

    The derived label is 1 iff score > threshold (strict).
    """

    scores: Mapping[str, float]
    threshold: float = 0.5

    def label(self, artifact_id: str) -> int:
        return 1 if self.scores[artifact_id] > self.threshold else 0

    def labels(self) -> dict[str, int]:
        return {a: self.label(a) for a in self.scores}

    @staticmethod
    def from_arrays(ids: Sequence[str], scores: Sequence[float], threshold: float = 0.5) -> "Prediction":
        if len(ids) != len(scores):
            raise ValueError(f"{len(ids)} ids but {len(scores)} scores")
        return Prediction(dict(zip(ids, (float(s) for s in scores))), threshold)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


METRIC_NAMES = (
    "recall",
    "precision",
    "fpr",
    "f_measure",
    "g_measure",
    "balance",
    "accuracy",
    "error",
    "error_type1",
    "error_type2",
    "mcc",
    "consistency",
    "auc",
    "auc_alberg",
    "auc_recall_pf",
    "necm10",
    "necm25",
    "cost",
    "nofb20",
    "nofc80",
)


@dataclass(frozen=True)
class MetricVector:
    recall: float
    precision: float
    fpr: float
    f_measure: float
    g_measure: float
    balance: float
    accuracy: float
    error: float
    error_type1: float
    error_type2: float
    mcc: float
    consistency: float
    auc: float
    auc_alberg: float
    auc_recall_pf: float
    necm10: float
    necm25: float
    cost: float
    nofb20: float
    nofc80: float

    def to_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def to_json_dict(self) -> dict:
        return {k: json_number(v) for k, v in self.to_dict().items()}


def check_coverage(view: ReleaseView, pred: Prediction) -> None:
    if set(pred.scores) != set(view.ids):
        missing = set(view.ids) - set(pred.scores)
        extra = set(pred.scores) - set(view.ids)
        raise CoverageError(
            f"prediction does not cover the evaluation set of {view.release_key} "
            f"(missing={sorted(missing)[:5]}, extra={sorted(extra)[:5]})"
        )


def confusion_counts(view: ReleaseView, pred: Prediction) -> ConfusionCounts:
    check_coverage(view, pred)
    tp = fp = tn = fn = 0
    for aid, truth in zip(view.ids, view.y):
        predicted = pred.label(aid)
        if truth == 1 and predicted == 1:
            tp += 1
        elif truth == 1:
            fn += 1
        elif predicted == 1:
            fp += 1
        else:
            tn += 1
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def mcc_from_counts(tp: float, fp: float, tn: float, fn: float) -> float:
    num = tp * tn - fp * fn
    den = math.sqrt(float(tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    return safe_div(num, den)


def confusion_metrics(c: ConfusionCounts) -> dict[str, float]:
    """The 14 confusion-based metrics (12 classic ones plus NECM at ratios 10/25)."""
    tp, fp, tn, fn = c.tp, c.fp, c.tn, c.fn
    n = c.total
    recall = safe_div(tp, tp + fn)
    precision = safe_div(tp, tp + fp)
    fpr = safe_div(fp, tn + fp)
    f_measure = safe_div(2 * recall * precision, recall + precision)
    g_measure = safe_div(2 * recall * (1 - fpr), recall + (1 - fpr))
    if math.isnan(recall) or math.isnan(fpr):
        balance = UNDEFINED
    else:
        balance = 1 - math.sqrt((1 - recall) ** 2 + fpr**2) / math.sqrt(2)
    return {
        "recall": recall,
        "precision": precision,
        "fpr": fpr,
        "f_measure": f_measure,
        "g_measure": g_measure,
        "balance": balance,
        "accuracy": safe_div(tp + tn, n),
        "error": safe_div(fp + fn, n),
        "error_type1": safe_div(fp, tp + fn),
        "error_type2": safe_div(fn, tn + fp),
        "mcc": mcc_from_counts(tp, fp, tn, fn),
        "consistency": safe_div(tp * n - (tp + fn) ** 2, (tp + fn) * (tn + fp)),
        "necm10": safe_div(fp + 10 * fn, n),
        "necm25": safe_div(fp + 25 * fn, n),
    }


def auc(truth: Sequence[int], scores: Sequence[float]) -> float:
    """Mann-Whitney AUC with ties counted 1/2; undefined for one-class input."""
    truth = np.asarray(truth, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos = int(truth.sum())
    n_neg = len(truth) - n_pos
    if n_pos == 0 or n_neg == 0:
        return UNDEFINED
    ranks = average_ranks(scores)
    rank_sum = float(ranks[truth == 1].sum())
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def ranking_order(view: ReleaseView, pred: Prediction) -> list[str]:
    """Inspection order: descending score, then descending size, then id."""
    return sorted(
        view.ids,
        key=lambda a: (-pred.scores[a], -view.size_by_id[a], a),
    )


def auc_alberg(view: ReleaseView, pred: Prediction) -> float:
    """Area under (fraction of modules considered, fraction of defective found)."""
    check_coverage(view, pred)
    order = ranking_order(view, pred)
    total_def = sum(view.truth_by_id[a] for a in order)
    if total_def == 0:
        return UNDEFINED
    n = len(order)
    area = 0.0
    found = 0
    prev_y = 0.0
    for i, aid in enumerate(order, start=1):
        found += view.truth_by_id[aid]
        y = found / total_def
        area += (1.0 / n) * (prev_y + y) / 2.0
        prev_y = y
    return area


def _roc_points(truth: np.ndarray, scores: np.ndarray) -> list[tuple[float, float]]:
    """ROC polyline vertices (pf, recall), grouping tied scores into one step."""
    n_pos = int(truth.sum())
    n_neg = len(truth) - n_pos
    order = np.argsort(-scores, kind="stable")
    points = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        group = order[i : j + 1]
        tp += int(truth[group].sum())
        fp += len(group) - int(truth[group].sum())
        points.append((fp / n_neg, tp / n_pos))
        i = j + 1
    return points


def auc_recall_pf(truth: Sequence[int], scores: Sequence[float]) -> float:
    """Area of the ROC region strictly above the chance diagonal, normalized by 1/2.

    A perfect ranking scores 1; a curve on the diagonal scores 0. Regions
    below the diagonal do not compensate regions above it.
    """
    truth = np.asarray(truth, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos = int(truth.sum())
    if n_pos == 0 or n_pos == len(truth):
        return UNDEFINED
    points = _roc_points(truth, scores)
    area = 0.0
    for (x1, y1), (x2, y2) in zip(points, points[1:]):
        dx = x2 - x1
        if dx == 0:
            continue
        g1 = y1 - x1
        g2 = y2 - x2
        if g1 >= 0 and g2 >= 0:
            area += (g1 + g2) / 2.0 * dx
        elif g1 <= 0 and g2 <= 0:
            continue
        else:
            t = g1 / (g1 - g2)  # zero crossing within the segment
            if g1 > 0:
                area += g1 * (t * dx) / 2.0
            else:
                area += g2 * ((1 - t) * dx) / 2.0
    return area / 0.5


def effort_metrics(
    view: ReleaseView, pred: Prediction, mode: str = "defects"
) -> tuple[float, float, float]:
    """(cost, nofb20, nofc80) per the effort-aware definitions.

    cost: total size of artifacts predicted defective.
    nofb20: bugs found within a budget of 20% of total size, walking the
        ranking and stopping before the first artifact that would exceed it.
    nofc80: artifacts visited until 80% of the bugs are found (ceil), the
        undefined marker if that point is never reached.

    ``mode`` selects the counting granularity: "defects" (default) counts a
    defect only when all its artifacts were inspected, "files" counts
    defective files.
    """
    if mode not in ("defects", "files"):
        raise ValueError(f"unknown effort counting mode {mode!r}")
    check_coverage(view, pred)
    cost = float(sum(view.size_by_id[a] for a in view.ids if pred.label(a) == 1))

    order = ranking_order(view, pred)
    budget = 0.2 * float(view.sizes.sum())
    inspected: set[str] = set()
    used = 0.0
    for aid in order:
        size = view.size_by_id[aid]
        if used + size > budget:
            break
        inspected.add(aid)
        used += size

    if mode == "files":
        nofb20 = float(sum(1 for a in inspected if view.truth_by_id[a] == 1))
    else:
        nofb20 = float(sum(1 for d in view.defects if d.artifacts <= inspected))

    if mode == "files":
        total = int(view.y.sum())
        need = math.ceil(0.8 * total)
        if total == 0:
            return cost, nofb20, UNDEFINED
        found = 0
        for i, aid in enumerate(order, start=1):
            found += view.truth_by_id[aid]
            if found >= need:
                return cost, nofb20, float(i)
        return cost, nofb20, UNDEFINED

    total = len(view.defects)
    if total == 0:
        return cost, nofb20, UNDEFINED
    need = math.ceil(0.8 * total)
    remaining = {d.id: set(d.artifacts) for d in view.defects}
    by_artifact: dict[str, list[str]] = {}
    for d in view.defects:
        for a in d.artifacts:
            by_artifact.setdefault(a, []).append(d.id)
    found = 0
    for i, aid in enumerate(order, start=1):
        for did in by_artifact.get(aid, ()):
            rem = remaining[did]
            rem.discard(aid)
            if not rem:
                found += 1
                del remaining[did]
        if found >= need:
            return cost, nofb20, float(i)
    return cost, nofb20, UNDEFINED


def evaluate_metrics(view: ReleaseView, pred: Prediction, effort_mode: str = "defects") -> MetricVector:
    """All twenty metrics for one evaluation set."""
    counts = confusion_counts(view, pred)
    base = confusion_metrics(counts)
    truth = view.y
    scores = np.array([pred.scores[a] for a in view.ids], dtype=np.float64)
    cost, nofb20, nofc80 = effort_metrics(view, pred, mode=effort_mode)
    return MetricVector(
        **base,
        auc=auc(truth, scores),
        auc_alberg=auc_alberg(view, pred),
        auc_recall_pf=auc_recall_pf(truth, scores),
        cost=cost,
        nofb20=nofb20,
        nofc80=nofc80,
    )
