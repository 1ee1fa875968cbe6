import math
from datetime import datetime, timezone

import pytest

from defectcost.confounders import ConfounderVector
from defectcost.costmodel import CostBounds, classify_potential
from defectcost.dataset import Artifact, Defect, Release
from defectcost.experiments import EvaluationRecord
from defectcost.metrics import METRIC_NAMES, MetricVector, Prediction

T1_SIZES = {"a1": 100, "a2": 50, "a3": 200, "a4": 10, "a5": 40, "a6": 600}
T1_DEFECTS = {"d1": {"a1"}, "d2": {"a3", "a5"}}
T1_SCORES = {"a1": 0.9, "a5": 0.8, "a2": 0.7, "a3": 0.4, "a6": 0.3, "a4": 0.1}


def make_release(sizes=None, defects=None, project="demo", release_id="r1",
                 released_at=None, features=None):
    sizes = T1_SIZES if sizes is None else sizes
    defects = T1_DEFECTS if defects is None else defects
    artifacts = tuple(
        Artifact(aid, size, tuple(features[aid]) if features else (0.0,))
        for aid, size in sorted(sizes.items())
    )
    return Release(
        project=project,
        release_id=release_id,
        released_at=released_at or datetime(2020, 1, 1, tzinfo=timezone.utc),
        artifacts=artifacts,
        defects=tuple(Defect(did, frozenset(arts)) for did, arts in sorted(defects.items())),
    )


@pytest.fixture
def t1_release():
    return make_release()


@pytest.fixture
def t1_view(t1_release):
    return t1_release.view()


@pytest.fixture
def t1_prediction():
    return Prediction(dict(T1_SCORES), 0.5)


_DEFAULT_VARS = {name: 0.5 for name in METRIC_NAMES}
_DEFAULT_VARS.update(cost=100.0, nofb20=1.0, nofc80=3.0, necm10=0.5, necm25=0.5)


def make_record(diff=500.0, lower=100.0, upper=600.0, potential=None,
                scenario="bootstrap", project="p", release="r", sample=0,
                preprocessing="plain", seed=0, **variables):
    """Record factory for analysis-level tests; unspecified variables get defaults."""
    vars_ = dict(_DEFAULT_VARS)
    confounder_defaults = dict(
        bias_train=0.1, bias_train_prime=0.5, bias_test=0.1, ratio_bias=1.0,
        ratio_bias_prime=0.2, prop_def_1pct=0.3, prop_clean_1pct=0.3,
        n_train=100.0, n_train_prime=180.0, n_test=40.0,
    )
    vars_.update(confounder_defaults)
    vars_.update(variables)
    metrics = MetricVector(**{k: vars_[k] for k in METRIC_NAMES})
    confounders = ConfounderVector(**{k: vars_[k] for k in confounder_defaults})
    if potential is None:
        potential = classify_potential(diff)
    return EvaluationRecord(
        scenario=scenario,
        project=project,
        release=release,
        sample=sample,
        preprocessing=preprocessing,
        seed=seed,
        metrics=metrics,
        confounders=confounders,
        bounds=CostBounds(lower=lower, upper=upper, diff=diff),
        potential=potential,
    )


def assert_close(a, b, tol=1e-12):
    if isinstance(a, float) and isinstance(b, float) and math.isnan(a) and math.isnan(b):
        return
    assert a == pytest.approx(b, abs=tol), f"{a} != {b}"
