"""Bag construction and the on-disk dataset formats.

A dataset file is CSV with a ``D_in,K,count`` header line followed by one
row per instance: ``date_label,true_class,v_1,...,v_D_in`` where
``true_class`` is a 1-based class index or -1 when unknown. The companion
proportion table holds one ``date_label,p_1,...,p_K`` row per date.

Bags group `bag_size` instances sharing one date label; each bag carries
its date's class-proportion vector. Hidden true classes stay out of the
bags — training only ever sees proportions.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ordinal import validate_proportions

__all__ = [
    "Dataset",
    "Bag",
    "BagPair",
    "DatasetFormatError",
    "load_dataset",
    "save_dataset",
    "load_proportion_table",
    "save_proportion_table",
    "build_bags",
    "sample_bag_pair",
]


class DatasetFormatError(ValueError):
    """A dataset or proportion-table file failed to parse."""


@dataclass
class Dataset:
    input_dim: int
    num_classes: int
    dates: list[str]
    features: np.ndarray      # (count, input_dim)
    true_classes: np.ndarray  # (count,), 1..K or -1 when unknown

    def __len__(self) -> int:
        return self.features.shape[0]

    def date_order(self) -> list[str]:
        seen: dict[str, None] = {}
        for d in self.dates:
            seen.setdefault(d)
        return list(seen)


@dataclass
class Bag:
    date: str
    instances: np.ndarray    # (bag_size, input_dim)
    proportions: np.ndarray  # (num_classes,)

    def __len__(self) -> int:
        return self.instances.shape[0]


@dataclass
class BagPair:
    bag_a: Bag
    bag_b: Bag
    permutation: np.ndarray  # aligns bag_b's instances with bag_a's

    def aligned_instances(self) -> tuple[np.ndarray, np.ndarray]:
        return self.bag_a.instances, self.bag_b.instances[self.permutation]


def _fmt(x: float) -> str:
    return repr(float(x))


def save_dataset(path, dataset: Dataset) -> None:
    lines = [f"{dataset.input_dim},{dataset.num_classes},{len(dataset)}"]
    for date, cls, row in zip(dataset.dates, dataset.true_classes, dataset.features):
        lines.append(",".join([date, str(int(cls))] + [_fmt(v) for v in row]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def load_dataset(path) -> Dataset:
    text = Path(path).read_text(encoding="ascii")
    lines = text.splitlines()
    if not lines:
        raise DatasetFormatError(f"{path}: empty dataset file")
    head = lines[0].split(",")
    if len(head) != 3:
        raise DatasetFormatError(f"{path}, line 1: expected header 'D_in,K,count'")
    try:
        input_dim, num_classes, count = (int(v) for v in head)
    except ValueError as exc:
        raise DatasetFormatError(f"{path}, line 1: non-integer header field") from exc
    if input_dim < 1 or num_classes < 2 or count < 0:
        raise DatasetFormatError(f"{path}, line 1: invalid header values {head}")
    if len(lines) - 1 != count:
        raise DatasetFormatError(
            f"{path}: header declares {count} rows, found {len(lines) - 1}")

    dates: list[str] = []
    classes = np.empty(count, dtype=np.int64)
    features = np.empty((count, input_dim), dtype=np.float64)
    for i, line in enumerate(lines[1:]):
        lineno = i + 2
        parts = line.split(",")
        if len(parts) != 2 + input_dim:
            raise DatasetFormatError(
                f"{path}, line {lineno}: expected {2 + input_dim} fields, got {len(parts)}")
        date = parts[0].strip()
        if not date:
            raise DatasetFormatError(f"{path}, line {lineno}: empty date label")
        try:
            cls = int(parts[1])
            row = [float(v) for v in parts[2:]]
        except ValueError as exc:
            raise DatasetFormatError(f"{path}, line {lineno}: malformed number") from exc
        if cls != -1 and not (1 <= cls <= num_classes):
            raise DatasetFormatError(
                f"{path}, line {lineno}: class {cls} outside 1..{num_classes} (or -1)")
        if not all(np.isfinite(row)):
            raise DatasetFormatError(f"{path}, line {lineno}: non-finite feature value")
        dates.append(date)
        classes[i] = cls
        features[i] = row
    return Dataset(input_dim=input_dim, num_classes=num_classes, dates=dates,
                   features=features, true_classes=classes)


def save_proportion_table(path, proportions: dict[str, np.ndarray]) -> None:
    lines = [",".join([date] + [_fmt(v) for v in vec])
             for date, vec in proportions.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def load_proportion_table(path, num_classes: int | None = None) -> dict[str, np.ndarray]:
    table: dict[str, np.ndarray] = {}
    for i, line in enumerate(Path(path).read_text(encoding="ascii").splitlines()):
        lineno = i + 1
        if not line.strip():
            continue
        parts = line.split(",")
        date = parts[0].strip()
        try:
            vec = np.array([float(v) for v in parts[1:]], dtype=np.float64)
        except ValueError as exc:
            raise DatasetFormatError(f"{path}, line {lineno}: malformed number") from exc
        if date in table:
            raise DatasetFormatError(f"{path}, line {lineno}: duplicate date {date!r}")
        try:
            table[date] = validate_proportions(vec, num_classes)
        except ValueError as exc:
            raise DatasetFormatError(f"{path}, line {lineno}: {exc}") from exc
    if not table:
        raise DatasetFormatError(f"{path}: empty proportion table")
    return table


def build_bags(dataset: Dataset, proportions: dict[str, np.ndarray],
               bag_size: int, seed: int) -> list[Bag]:
    """Shuffle each date group (seeded) and chunk it into full bags.

    Leftover instances (count mod bag_size) are dropped — padding would
    distort the similarity histogram. Raises if any date group is smaller
    than one bag or has no proportion-table entry.
    """
    if bag_size < 1:
        raise ValueError("bag size must be >= 1")
    rng = np.random.default_rng(seed)
    by_date: dict[str, list[int]] = {}
    for idx, date in enumerate(dataset.dates):
        by_date.setdefault(date, []).append(idx)

    bags: list[Bag] = []
    for date, members in by_date.items():
        if len(members) < bag_size:
            raise ValueError(
                f"date {date!r} has {len(members)} instances, fewer than bag size {bag_size}")
        if date not in proportions:
            raise ValueError(f"date {date!r} missing from the proportion table")
        p = validate_proportions(proportions[date], dataset.num_classes)
        members = np.asarray(members)[rng.permutation(len(members))]
        for start in range(0, len(members) - bag_size + 1, bag_size):
            chunk = members[start:start + bag_size]
            bags.append(Bag(date=date, instances=dataset.features[chunk].copy(),
                            proportions=p))
    return bags


def sample_bag_pair(bags: list[Bag], rng: np.random.Generator) -> BagPair:
    """Draw two distinct bags uniformly plus a fresh pairing permutation."""
    if len(bags) < 2:
        raise ValueError("need at least 2 bags to sample a pair")
    i, j = rng.choice(len(bags), size=2, replace=False)
    bag_a, bag_b = bags[int(i)], bags[int(j)]
    return BagPair(bag_a=bag_a, bag_b=bag_b,
                   permutation=rng.permutation(len(bag_b)))
