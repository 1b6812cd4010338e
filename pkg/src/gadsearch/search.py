"""Oracle-in-the-loop searches over an eligible prediction pool, plus the
discovery-ratio metric and reliability diagrams.

A search queries one instance at a time; an error is a queried instance
whose oracle label disagrees with the prediction. Quality is the number of
errors found relative to the number expected from the confidences alone.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .classifiers import Prediction, train_logistic
from .data import Dataset
from .errors import BudgetExceedsPool, DegenerateConfidence, EmptyInput
from .scoring import GadRecord

CONFIDENCE_THRESHOLD = 0.65  # strict: a prediction at exactly 0.65 is ineligible


class Oracle(Protocol):
    def label(self, index: int) -> int: ...


class GroundTruthOracle:
    """Simulated oracle answering from a fixed label vector."""

    def __init__(self, labels: Sequence[int]):
        self._labels = np.asarray(labels, dtype=np.int64)

    def label(self, index: int) -> int:
        return int(self._labels[index])


def sdr(confidences: Sequence[float], error_flags: Sequence[bool]) -> float:
    """Errors found divided by errors expected given the confidences.

    A value above 1 means errors are surfacing faster than the stated
    confidences can explain. The denominator uses a correctly rounded sum
    so the value is independent of accumulation order.
    """
    denom = math.fsum(1.0 - float(c) for c in confidences)
    if denom <= 0.0:
        raise DegenerateConfidence("all queried confidences are 1; expected error count is zero")
    return sum(bool(f) for f in error_flags) / denom


def eligible_indices(predictions: Sequence[Prediction], class_of_interest: int) -> list[int]:
    """Rows predicted as the class of interest with confidence above the threshold."""
    return [
        i
        for i, p in enumerate(predictions)
        if p.label == class_of_interest and p.confidence > CONFIDENCE_THRESHOLD
    ]


@dataclass
class SearchTrace:
    """Ordered record of one oracle session."""

    queried: list[int] = field(default_factory=list)
    labels: list[int] = field(default_factory=list)
    predicted: list[int] = field(default_factory=list)
    confidences: list[float] = field(default_factory=list)
    errors: list[int] = field(default_factory=list)
    sdr_curve: list[float] = field(default_factory=list)
    budget: int = 0

    def record(self, index: int, prediction: Prediction, oracle_label: int) -> None:
        self.queried.append(index)
        self.labels.append(oracle_label)
        self.predicted.append(prediction.label)
        self.confidences.append(prediction.confidence)
        if oracle_label != prediction.label:
            self.errors.append(index)
        error_set = set(self.errors)
        self.sdr_curve.append(sdr(self.confidences, [q in error_set for q in self.queried]))

    @property
    def errors_found(self) -> int:
        return len(self.errors)

    def to_jsonl(self) -> str:
        lines = []
        error_set = set(self.errors)
        for step, idx in enumerate(self.queried, start=1):
            lines.append(
                json.dumps(
                    {
                        "step": step,
                        "index": idx,
                        "confidence": self.confidences[step - 1],
                        "predicted": self.predicted[step - 1],
                        "label": self.labels[step - 1],
                        "is_error": idx in error_set,
                        "sdr": self.sdr_curve[step - 1],
                    }
                )
            )
        return "\n".join(lines) + ("\n" if lines else "")


class Planner(Protocol):
    """Chooses the next instance given the outcomes so far."""

    def next_index(self, queried: Sequence[int], error_flags: Sequence[bool]) -> int: ...


class StaticOrderPlanner:
    def __init__(self, order: Sequence[int]):
        self._order = list(order)

    def next_index(self, queried: Sequence[int], error_flags: Sequence[bool]) -> int:
        seen = set(queried)
        for idx in self._order:
            if idx not in seen:
                return idx
        raise BudgetExceedsPool("no unqueried instances left")


def gad_order(records: Sequence[GadRecord], pool: Sequence[int]) -> list[int]:
    """Pool indices by ascending score, ties by ascending index."""
    by_index = {r.index: r for r in records}
    return sorted(pool, key=lambda i: (by_index[i].gad, i))


def least_confidence_order(predictions: Sequence[Prediction], pool: Sequence[int]) -> list[int]:
    return sorted(pool, key=lambda i: (predictions[i].confidence, i))


def random_order(pool: Sequence[int], seed: int) -> list[int]:
    rng = np.random.default_rng(seed)
    return [pool[j] for j in rng.permutation(len(pool))]


class MetamodelPlanner:
    """Low confidence first; once both outcomes exist, chase a fitted error model.

    After every query the planner refits a logistic model on
    (features, confidence) -> error/non-error over the queried instances and
    picks the unqueried pool instance with the highest predicted error
    probability. Until both an error and a non-error have been seen the
    logistic fit is undefined, so the confidence ordering continues.
    """

    def __init__(
        self,
        eval_set: Dataset,
        predictions: Sequence[Prediction],
        pool: Sequence[int],
        seed: int,
        epochs: int = 300,
        learning_rate: float = 0.5,
    ):
        self._features = eval_set.features
        self._predictions = predictions
        self._pool = list(pool)
        self._seed = seed
        self._epochs = epochs
        self._lr = learning_rate
        self._fallback = least_confidence_order(predictions, pool)

    def _design_row(self, i: int) -> np.ndarray:
        return np.concatenate([self._features[i], [self._predictions[i].confidence]])

    def next_index(self, queried: Sequence[int], error_flags: Sequence[bool]) -> int:
        seen = set(queried)
        remaining = [i for i in self._pool if i not in seen]
        if not remaining:
            raise BudgetExceedsPool("no unqueried instances left")
        outcomes = np.asarray(error_flags, dtype=np.int64)
        if outcomes.size == 0 or len(np.unique(outcomes)) < 2:
            return next(i for i in self._fallback if i not in seen)
        design = np.stack([self._design_row(i) for i in queried])
        meta = train_logistic(
            Dataset(features=design, labels=outcomes, class_names=["ok", "error"]),
            epochs=self._epochs,
            learning_rate=self._lr,
            seed=self._seed,
        )
        candidates = np.stack([self._design_row(i) for i in remaining])
        error_prob = meta.predict_proba(candidates)[:, 1]
        best = int(np.argmax(error_prob))  # ties break to the lowest pool position = lowest index order
        return remaining[best]


def _run(
    planner,
    eval_set: Dataset,
    predictions: Sequence[Prediction],
    oracle: Oracle,
    budget: int,
    pool_size: int,
) -> SearchTrace:
    if budget > pool_size:
        raise BudgetExceedsPool(f"budget {budget} exceeds eligible pool of {pool_size}")
    trace = SearchTrace(budget=budget)
    error_flags: list[bool] = []
    for _ in range(budget):
        idx = planner.next_index(trace.queried, error_flags)
        pred = predictions[idx]
        y = oracle.label(idx)
        trace.record(idx, pred, y)
        error_flags.append(y != pred.label)
    return trace


def gad_search(
    eval_set: Dataset,
    records: Sequence[GadRecord],
    predictions: Sequence[Prediction],
    oracle: Oracle,
    budget: int,
    class_of_interest: int,
) -> SearchTrace:
    """Query eligible instances in ascending score order."""
    pool = eligible_indices(predictions, class_of_interest)
    planner = StaticOrderPlanner(gad_order(records, pool))
    return _run(planner, eval_set, predictions, oracle, budget, len(pool))


def random_search(
    eval_set: Dataset,
    predictions: Sequence[Prediction],
    oracle: Oracle,
    budget: int,
    seed: int,
    class_of_interest: int,
) -> SearchTrace:
    """Uniform without replacement over the eligible pool."""
    pool = eligible_indices(predictions, class_of_interest)
    planner = StaticOrderPlanner(random_order(pool, seed))
    return _run(planner, eval_set, predictions, oracle, budget, len(pool))


def least_confidence_search(
    eval_set: Dataset,
    predictions: Sequence[Prediction],
    oracle: Oracle,
    budget: int,
    class_of_interest: int,
) -> SearchTrace:
    """Ascending confidence over the eligible pool, index tie-break."""
    pool = eligible_indices(predictions, class_of_interest)
    planner = StaticOrderPlanner(least_confidence_order(predictions, pool))
    return _run(planner, eval_set, predictions, oracle, budget, len(pool))


def metamodel_search(
    eval_set: Dataset,
    predictions: Sequence[Prediction],
    oracle: Oracle,
    budget: int,
    seed: int,
    class_of_interest: int,
) -> SearchTrace:
    pool = eligible_indices(predictions, class_of_interest)
    planner = MetamodelPlanner(eval_set, predictions, pool, seed=seed)
    return _run(planner, eval_set, predictions, oracle, budget, len(pool))


@dataclass(frozen=True)
class ReliabilityBin:
    low: float
    high: float
    count: int
    observed: float
    expected: float

    @property
    def gap(self) -> float:
        return self.expected - self.observed


@dataclass(frozen=True)
class ReliabilityDiagram:
    bins: list[ReliabilityBin]

    @property
    def total(self) -> int:
        return sum(b.count for b in self.bins)

    def ece(self) -> float:
        """Count-weighted mean absolute gap over occupied bins."""
        total = self.total
        return sum(b.count / total * abs(b.gap) for b in self.bins if b.count)


def reliability(
    predictions: Sequence[Prediction],
    truths: Sequence[int],
    bin_width: float = 0.05,
) -> ReliabilityDiagram:
    """Observed vs. expected accuracy over confidence bins in (0.65, 1].

    A positive gap means the model claims more accuracy than it delivers.
    The final bin truncates at 1.0 when the width does not divide evenly.
    """
    if len(predictions) == 0:
        raise EmptyInput("no predictions to diagram")
    if len(predictions) != len(truths):
        raise ValueError("predictions and truths must align")
    edges = [CONFIDENCE_THRESHOLD]
    while edges[-1] < 1.0 - 1e-12:
        edges.append(min(round(edges[-1] + bin_width, 12), 1.0))
    conf = np.array([p.confidence for p in predictions])
    correct = np.array([p.label == t for p, t in zip(predictions, truths)], dtype=np.float64)
    idx = np.digitize(conf, edges, right=True) - 1  # bin i covers (edges[i], edges[i+1]]

    bins = []
    for i in range(len(edges) - 1):
        mask = (idx == i) & (conf > CONFIDENCE_THRESHOLD)
        count = int(mask.sum())
        if count:
            observed = float(correct[mask].mean())
            expected = float(conf[mask].mean())
        else:
            observed = expected = float("nan")
        bins.append(ReliabilityBin(low=edges[i], high=edges[i + 1], count=count, observed=observed, expected=expected))
    return ReliabilityDiagram(bins=bins)
