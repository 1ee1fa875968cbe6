"""Synthetic corpus generator.

Produces releases whose artifact sizes follow a log-normal distribution (a
small share of very large files carries most of the code volume, as in real
release data) and whose defective artifacts have their feature vectors shifted
by a configurable signal strength, so downstream learnability is controllable:
signal 0 yields AUC ~ 0.5, large signals make the classes separable.

Defects get footprints of 1-3 artifacts to exercise the n-to-m defect/artifact
mapping, and every defect carries a fix timestamp after its release date so
the temporal-leakage rules of the cross-project experiment can be exercised.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

import numpy as np

from .dataset import Artifact, Defect, Release


@dataclass(frozen=True)
class SynthSpec:
    n_projects: int = 10
    releases_per_project: int = 5
    artifacts_range: tuple[int, int] = (150, 250)
    defect_ratio_range: tuple[float, float] = (0.05, 0.15)
    size_log_mean: float = 4.0
    size_log_sigma: float = 1.0
    n_features: int = 8
    signal: float = 1.0
    feature_base: float = 3.0
    max_defect_footprint: int = 3
    start: datetime = datetime(2015, 1, 1, tzinfo=timezone.utc)
    release_gap_days: tuple[int, int] = (120, 260)
    fix_delay_days: tuple[int, int] = (10, 400)

    def validate(self) -> None:
        if self.n_projects < 1 or self.releases_per_project < 1:
            raise ValueError("need at least one project and one release per project")
        lo, hi = self.artifacts_range
        if not (1 <= lo <= hi):
            raise ValueError(f"invalid artifacts_range {self.artifacts_range}")
        rlo, rhi = self.defect_ratio_range
        if not (0.0 < rlo <= rhi < 1.0):
            raise ValueError(f"invalid defect_ratio_range {self.defect_ratio_range}")
        if self.size_log_sigma < 0 or self.n_features < 1:
            raise ValueError("size_log_sigma must be >= 0 and n_features >= 1")
        if self.max_defect_footprint < 1:
            raise ValueError("max_defect_footprint must be >= 1")
        glo, ghi = self.release_gap_days
        flo, fhi = self.fix_delay_days
        if not (1 <= glo <= ghi) or not (1 <= flo <= fhi):
            raise ValueError("invalid day ranges")


def _generate_release(spec: SynthSpec, project: str, release_id: str,
                      released_at: datetime, rng: np.random.Generator) -> Release:
    lo, hi = spec.artifacts_range
    n = int(rng.integers(lo, hi + 1))
    sizes = np.rint(np.exp(rng.normal(spec.size_log_mean, spec.size_log_sigma, size=n))).astype(np.int64)
    sizes = np.maximum(sizes, 1)

    ratio = float(rng.uniform(*spec.defect_ratio_range))
    target_defective = max(1, int(round(ratio * n)))

    # grow the defect set until enough distinct artifacts are covered
    defects: list[Defect] = []
    covered: set[int] = set()
    flo, fhi = spec.fix_delay_days
    k = 0
    while len(covered) < target_defective:
        remaining = target_defective - len(covered)
        foot_n = int(rng.integers(1, min(spec.max_defect_footprint, max(remaining, 1)) + 1))
        fresh = rng.choice(np.array(sorted(set(range(n)) - covered)), size=foot_n, replace=False)
        footprint = set(int(i) for i in fresh)
        # occasionally include an already-defective artifact: n-to-m mapping
        if covered and foot_n > 1 and rng.random() < 0.3:
            footprint.discard(int(fresh[0]))
            footprint.add(int(rng.choice(np.array(sorted(covered)))))
        covered.update(footprint)
        fixed_at = released_at + timedelta(days=int(rng.integers(flo, fhi + 1)))
        defects.append(Defect(id=f"d{k:03d}", artifacts=frozenset(f"f{i:04d}" for i in footprint), fixed_at=fixed_at))
        k += 1

    base = rng.normal(spec.feature_base, 1.0, size=(n, spec.n_features))
    shift = np.zeros(n)
    shift[sorted(covered)] = spec.signal
    features = np.maximum(base + shift[:, None], 0.0)  # static metrics are non-negative

    artifacts = tuple(
        Artifact(id=f"f{i:04d}", size=int(sizes[i]), features=tuple(float(v) for v in features[i]))
        for i in range(n)
    )
    return Release(
        project=project,
        release_id=release_id,
        released_at=released_at,
        artifacts=artifacts,
        defects=tuple(defects),
    )


def generate_synthetic(spec: SynthSpec, seed: int) -> list[Release]:
    """Deterministic synthetic corpus: one RNG stream per (project, release)."""
    spec.validate()
    releases = []
    glo, ghi = spec.release_gap_days
    for p in range(spec.n_projects):
        project = f"proj{p:02d}"
        date_rng = np.random.default_rng(np.random.SeedSequence([seed, p, 0xDA7E]))
        released_at = spec.start + timedelta(days=int(date_rng.integers(0, 120)))
        for r in range(spec.releases_per_project):
            rng = np.random.default_rng(np.random.SeedSequence([seed, p, r]))
            releases.append(_generate_release(spec, project, f"r{r}", released_at, rng))
            released_at = released_at + timedelta(days=int(date_rng.integers(glo, ghi + 1)))
    return releases
