"""Cost-bound model: predicted/missed defects, lower/upper bounds, diff, potential.

The bounds bracket the unknown cost ratio between a post-release defect and
quality assurance per size unit. A defect counts as predicted only when every
artifact it touches is predicted defective (n-to-m semantics); the lower bound
is the predicted quality-assurance effort per predicted defect, the upper
bound the saved effort per missed defect. Corner cases are values, not errors:
0/0 yields the undefined marker, x/0 a signed infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

from .dataset import ReleaseView
from .extmath import ext_sub, json_extended, safe_div
from .metrics import Prediction, check_coverage


class Potential(IntEnum):
    """Ordinal cost-saving potential from decadic-logarithmic diff bins."""

    NONE = 0
    MEDIUM = 1
    LARGE = 2
    EXTRA_LARGE = 3

    @property
    def label(self) -> str:
        return _POTENTIAL_LABELS[self]

    @staticmethod
    def from_label(label: str) -> "Potential":
        try:
            return _POTENTIAL_BY_LABEL[label]
        except KeyError:
            raise ValueError(f"unknown potential level {label!r}") from None


_POTENTIAL_LABELS = {
    Potential.NONE: "none",
    Potential.MEDIUM: "medium",
    Potential.LARGE: "large",
    Potential.EXTRA_LARGE: "extra_large",
}
_POTENTIAL_BY_LABEL = {v: k for k, v in _POTENTIAL_LABELS.items()}

DEFAULT_BOUNDARIES = (1000.0, 10000.0)


@dataclass(frozen=True)
class DefectOutcome:
    predicted: frozenset[str]
    missed: frozenset[str]


@dataclass(frozen=True)
class CostBounds:
    lower: float
    upper: float
    diff: float

    def to_json_dict(self) -> dict:
        return {
            "lower": json_extended(self.lower),
            "upper": json_extended(self.upper),
            "diff": json_extended(self.diff),
        }


def defect_outcome(view: ReleaseView, pred: Prediction) -> DefectOutcome:
    """Partition the view's defects into predicted and missed sets."""
    check_coverage(view, pred)
    predicted = frozenset(d.id for d in view.defects if all(pred.label(a) == 1 for a in d.artifacts))
    missed = frozenset(d.id for d in view.defects) - predicted
    return DefectOutcome(predicted=predicted, missed=missed)


def cost_bounds(view: ReleaseView, pred: Prediction) -> CostBounds:
    """lower = predicted size / |predicted defects|; upper = remaining size / |missed|."""
    outcome = defect_outcome(view, pred)
    size_predicted = float(sum(view.size_by_id[a] for a in view.ids if pred.label(a) == 1))
    size_clean = float(sum(view.size_by_id[a] for a in view.ids if pred.label(a) == 0))
    lower = safe_div(size_predicted, len(outcome.predicted))
    upper = safe_div(size_clean, len(outcome.missed))
    return CostBounds(lower=lower, upper=upper, diff=ext_sub(upper, lower))


def diff_simplified(view: ReleaseView, pred: Prediction) -> float:
    """diff' with tp/fn denominators instead of the defect-set sizes."""
    check_coverage(view, pred)
    tp = fn = 0
    size_predicted = 0.0
    size_clean = 0.0
    for aid, truth in zip(view.ids, view.y):
        if pred.label(aid) == 1:
            size_predicted += view.size_by_id[aid]
            tp += int(truth)
        else:
            size_clean += view.size_by_id[aid]
            fn += int(truth)
    return ext_sub(safe_div(size_clean, fn), safe_div(size_predicted, tp))


def classify_potential(diff: float, boundaries: tuple[float, float] = DEFAULT_BOUNDARIES) -> Potential:
    """Bin diff into the four ordinal levels; boundaries are configurable
    for the sensitivity analysis and must satisfy 0 < b1 < b2."""
    b1, b2 = boundaries
    if not (0 < b1 < b2):
        raise ValueError(f"boundaries must satisfy 0 < b1 < b2, got {boundaries}")
    if math.isnan(diff) or diff <= 0:
        return Potential.NONE
    if diff <= b1:
        return Potential.MEDIUM
    if diff <= b2:
        return Potential.LARGE
    return Potential.EXTRA_LARGE
