"""Synthetic ordinal-class dataset generator.

Classes 1..K sit at equal arc length along a circular arc embedded in a
random 2-D subspace of the input space, so neighboring classes are close
and the extremes are far apart (and no single linear direction orders
them perfectly). Instances are class centers plus isotropic Gaussian
noise. Each date label carries a class-proportion vector from a
schedule; instance classes are drawn from that vector.

The shipped default 5-class schedule starts at 100% class 1 and then
moves mass along the ordinal axis over the dates (class 2 peaking early,
a 3-to-4 shift in the middle, class 5 dominant at the end). Only the
first row is principled; the rest are designer defaults — supply a
schedule file to replace them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bags import Dataset, load_proportion_table
from .ordinal import validate_proportions

__all__ = [
    "ProportionSchedule",
    "ManifoldConfig",
    "default_schedule",
    "load_schedule",
    "generate",
]

DEFAULT_DATES = ("day0", "day3", "day5", "day7", "day14")

_DEFAULT_ROWS = np.array([
    [1.00, 0.00, 0.00, 0.00, 0.00],   # day0: all class 1
    [0.15, 0.55, 0.20, 0.07, 0.03],   # day3: class 2 peak
    [0.05, 0.25, 0.45, 0.20, 0.05],   # day5: class 3 peak
    [0.03, 0.10, 0.22, 0.45, 0.20],   # day7: mass shifted to class 4
    [0.05, 0.05, 0.10, 0.20, 0.60],   # day14: class 5 dominant
])


@dataclass(frozen=True)
class ProportionSchedule:
    """Ordered date labels with one class-proportion row per date."""

    dates: tuple[str, ...]
    proportions: np.ndarray  # (num_dates, K)

    def __post_init__(self):
        if len(self.dates) != self.proportions.shape[0]:
            raise ValueError("one proportion row per date required")
        for row in self.proportions:
            validate_proportions(row)
        first = self.proportions[0]
        if not (first[0] == 1.0 and np.all(first[1:] == 0.0)):
            raise ValueError("the first date must be 100% class 1")

    @property
    def num_classes(self) -> int:
        return self.proportions.shape[1]

    def as_table(self) -> dict[str, np.ndarray]:
        return {d: self.proportions[i].copy() for i, d in enumerate(self.dates)}


def default_schedule(num_classes: int = 5) -> ProportionSchedule:
    """The shipped 5-class recovery-like schedule."""
    if num_classes != 5:
        raise ValueError("the default schedule is 5-class; supply a schedule file otherwise")
    return ProportionSchedule(dates=DEFAULT_DATES, proportions=_DEFAULT_ROWS.copy())


def load_schedule(path) -> ProportionSchedule:
    """Read a schedule from a proportion-table file (row order preserved)."""
    table = load_proportion_table(path)
    dates = tuple(table)
    return ProportionSchedule(dates=dates, proportions=np.stack([table[d] for d in dates]))


@dataclass(frozen=True)
class ManifoldConfig:
    """Geometry of the ordinal class manifold.

    Class centers lie on an arc of the given radius spanning `arc_angle`
    radians, embedded in a seeded random 2-D subspace of R^input_dim.
    `hard_mode` widens the within-class noise so neighboring classes
    overlap heavily.
    """

    input_dim: int = 32
    num_classes: int = 5
    radius: float = 3.0
    arc_angle: float = 2.4  # just under pi keeps center distance monotone in |k-k'|
    noise_scale: float = 0.8
    hard_mode: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.input_dim < 2:
            raise ValueError("input_dim must be >= 2 to embed the class arc")
        if self.num_classes < 2:
            raise ValueError("need at least 2 classes")
        if not (0 < self.arc_angle <= np.pi):
            raise ValueError("arc_angle must lie in (0, pi] for ordinal geometry")
        if self.radius <= 0 or self.noise_scale < 0:
            raise ValueError("radius must be positive and noise_scale nonnegative")

    def effective_noise(self) -> float:
        return self.noise_scale * (2.5 if self.hard_mode else 1.0)

    def class_centers(self) -> np.ndarray:
        """(K, input_dim) centers; adjacent ones closer than the extremes."""
        rng = np.random.default_rng(self.seed)
        basis, _ = np.linalg.qr(rng.standard_normal((self.input_dim, 2)))
        theta = self.arc_angle * np.arange(self.num_classes) / (self.num_classes - 1)
        planar = self.radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
        centers = planar @ basis.T
        adjacent = np.linalg.norm(centers[1] - centers[0])
        extreme = np.linalg.norm(centers[-1] - centers[0])
        if not adjacent < extreme:
            raise ValueError("degenerate manifold: adjacent centers as far apart as the extremes")
        return centers


def generate(schedule: ProportionSchedule, manifold: ManifoldConfig,
             per_date_count: int, seed: int) -> tuple[Dataset, dict[str, np.ndarray]]:
    """Draw `per_date_count` instances per date; returns (dataset, proportion table).

    Instance classes follow each date's proportion row; features are the
    class center plus isotropic noise. Per-date substreams are derived
    from (`seed`, date index), so generation is reproducible and dates are
    independent.
    """
    if per_date_count < 1:
        raise ValueError("per_date_count must be >= 1")
    if schedule.num_classes != manifold.num_classes:
        raise ValueError("schedule and manifold disagree on the class count")
    centers = manifold.class_centers()
    noise = manifold.effective_noise()

    dates: list[str] = []
    classes: list[np.ndarray] = []
    features: list[np.ndarray] = []
    for di, date in enumerate(schedule.dates):
        rng = np.random.default_rng([seed, di])
        drawn = rng.choice(schedule.num_classes, size=per_date_count,
                           p=schedule.proportions[di]) + 1
        x = centers[drawn - 1] + noise * rng.standard_normal(
            (per_date_count, manifold.input_dim))
        dates.extend([date] * per_date_count)
        classes.append(drawn)
        features.append(x)
    dataset = Dataset(input_dim=manifold.input_dim,
                      num_classes=schedule.num_classes,
                      dates=dates,
                      features=np.concatenate(features, axis=0),
                      true_classes=np.concatenate(classes).astype(np.int64))
    return dataset, schedule.as_table()
