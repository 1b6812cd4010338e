"""Tabular datasets: CSV ingestion, ranges, subsetting, and training-set biasing."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    EmptyDataset,
    MissingFile,
    NoLabels,
    ParseError,
    RaggedRow,
    SubsetTooLarge,
)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass
class Dataset:
    """An immutable feature matrix with optional integer class labels.

    Rows are instances; instance identity is the row index within this
    dataset. Labels are dense integer ids indexing into ``class_names``.
    """

    features: np.ndarray
    labels: Optional[np.ndarray] = None
    feature_names: list[str] = field(default_factory=list)
    class_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.features = _frozen(np.asarray(self.features, dtype=np.float64))
        if self.features.ndim != 2 or self.features.shape[1] < 1:
            raise ValueError("features must be a 2-D matrix with at least one column")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features must be finite")
        if not self.feature_names:
            self.feature_names = [f"f{j}" for j in range(self.features.shape[1])]
        if len(self.feature_names) != self.features.shape[1]:
            raise ValueError("feature_names length must equal the feature count")
        if self.labels is not None:
            self.labels = _frozen(np.asarray(self.labels, dtype=np.int64))
            if self.labels.shape != (self.features.shape[0],):
                raise ValueError("label count must equal the row count")
            if self.labels.size and self.labels.min() < 0:
                raise ValueError("labels must be non-negative")
            n_classes = len(self.class_names) if self.class_names else int(self.labels.max()) + 1
            if not self.class_names:
                self.class_names = [str(k) for k in range(n_classes)]
            if self.labels.size and self.labels.max() >= len(self.class_names):
                raise ValueError("every label must index into class_names")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def take(self, indices: Sequence[int]) -> "Dataset":
        """A new dataset holding the given rows, in the given order."""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            features=self.features[idx].copy(),
            labels=None if self.labels is None else self.labels[idx].copy(),
            feature_names=list(self.feature_names),
            class_names=list(self.class_names),
        )


@dataclass(frozen=True)
class FeatureRanges:
    """Per-column (min, max) bounds."""

    low: np.ndarray
    high: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "low", _frozen(np.asarray(self.low, dtype=np.float64)))
        object.__setattr__(self, "high", _frozen(np.asarray(self.high, dtype=np.float64)))
        if self.low.shape != self.high.shape or self.low.ndim != 1:
            raise ValueError("low/high must be 1-D and the same length")
        if np.any(self.low > self.high):
            raise ValueError("min must not exceed max")

    def __len__(self) -> int:
        return self.low.shape[0]

    @property
    def width(self) -> np.ndarray:
        return self.high - self.low

    def contains(self, other: "FeatureRanges") -> bool:
        return bool(np.all(other.low >= self.low) and np.all(other.high <= self.high))


def load_csv(path: str | Path, label_column: Optional[str] = None) -> Dataset:
    """Load a comma-separated file with a mandatory header row.

    Every non-label cell must parse as a finite real number. Label strings
    are mapped to dense integer ids in order of first appearance.
    """
    path = Path(path)
    if not path.exists():
        raise MissingFile(str(path))
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataset(f"{path} has no header row")
        header = [h.strip() for h in header]
        label_idx = None
        if label_column is not None:
            if label_column not in header:
                raise ParseError(0, label_column, "missing label column")
            label_idx = header.index(label_column)
        feature_names = [h for i, h in enumerate(header) if i != label_idx]

        rows: list[list[float]] = []
        label_tokens: list[str] = []
        for rownum, cells in enumerate(reader, start=1):
            if not cells:
                continue
            if len(cells) != len(header):
                raise RaggedRow(rownum, len(header), len(cells))
            values = []
            for i, cell in enumerate(cells):
                if i == label_idx:
                    label_tokens.append(cell.strip())
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(rownum, header[i], cell)
                if not np.isfinite(v):
                    raise ParseError(rownum, header[i], cell)
                values.append(v)
            rows.append(values)

    if not rows:
        raise EmptyDataset(f"{path} has a header but no data rows")
    features = np.array(rows, dtype=np.float64)

    labels = None
    class_names: list[str] = []
    if label_idx is not None:
        ids: dict[str, int] = {}
        encoded = []
        for tok in label_tokens:
            if tok not in ids:
                ids[tok] = len(ids)
                class_names.append(tok)
            encoded.append(ids[tok])
        labels = np.array(encoded, dtype=np.int64)

    return Dataset(features=features, labels=labels, feature_names=feature_names, class_names=class_names)


def save_csv(d: Dataset, path: str | Path, label_column: str = "label") -> None:
    """Write a dataset back to CSV; numeric cells use shortest round-trip form."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = list(d.feature_names)
        if d.labels is not None:
            header.append(label_column)
        writer.writerow(header)
        for i in range(len(d)):
            row = [repr(float(v)) for v in d.features[i]]
            if d.labels is not None:
                row.append(d.class_names[d.labels[i]])
            writer.writerow(row)


def feature_ranges(d: Dataset) -> FeatureRanges:
    """Exact column-wise min and max."""
    if len(d) == 0:
        raise EmptyDataset("cannot compute ranges of an empty dataset")
    return FeatureRanges(low=d.features.min(axis=0), high=d.features.max(axis=0))


def bias_split(
    d: Dataset,
    predicate: Callable[[np.ndarray, int], bool],
    keep_fraction_matching: float,
    seed: int,
    test_fraction: float = 0.5,
) -> tuple[Dataset, Dataset]:
    """Split into a biased training set and an unbiased test set.

    The test set is a plain random split. On the training side, rows where
    ``predicate(features, label)`` holds are thinned down to an exact
    ``round(keep_fraction_matching * n_matching)`` count; everything else
    is kept. Used to manufacture classifiers that are overconfident on the
    thinned sub-population.
    """
    if d.labels is None:
        raise NoLabels("bias_split requires a labeled dataset")
    if not 0.0 <= keep_fraction_matching <= 1.0:
        raise ValueError("keep_fraction_matching must be in [0, 1]")
    rng = np.random.default_rng(seed)
    n = len(d)
    order = rng.permutation(n)
    n_test = int(round(test_fraction * n))
    test_idx = np.sort(order[:n_test])
    train_pool = np.sort(order[n_test:])

    matching = np.array([predicate(d.features[i], int(d.labels[i])) for i in train_pool], dtype=bool)
    match_idx = train_pool[matching]
    keep_count = int(round(keep_fraction_matching * len(match_idx)))
    kept_matching = rng.choice(match_idx, size=keep_count, replace=False) if len(match_idx) else match_idx
    train_idx = np.sort(np.concatenate([train_pool[~matching], kept_matching]))
    return d.take(train_idx), d.take(test_idx)


def subset_sample(d: Dataset, n: int, seed: int) -> Dataset:
    """n distinct rows, uniform without replacement, deterministic per seed."""
    if n > len(d):
        raise SubsetTooLarge(f"requested {n} rows from a dataset of {len(d)}")
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(d), size=n, replace=False)
    return d.take(idx)
