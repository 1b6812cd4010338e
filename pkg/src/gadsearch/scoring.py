"""Adversarial-distance scoring: perturbation cost vs. its expectation at a
given confidence. Strongly negative scores flag suspected overconfidence.
"""

from __future__ import annotations

import csv
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .classifiers import Prediction
from .data import Dataset
from .errors import DimensionMismatch, EmptyVector, TooFewFlipped
from .loess import LOG_SCALE, RAW_SCALE, loess_fit, loess_predict

GAD_CSV_HEADER = ["index", "confidence", "mae", "expected", "gad", "flipped"]


def mae(a: np.ndarray, b: np.ndarray) -> float:
    """Mean absolute difference between two equal-length feature vectors."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape[0] == 0:
        raise EmptyVector("vectors must have at least one element")
    if a.shape != b.shape:
        raise DimensionMismatch(f"lengths differ: {a.shape[0]} vs {b.shape[0]}")
    return float(np.mean(np.abs(a - b)))


@dataclass(frozen=True)
class GadRecord:
    """Per-instance attack cost, its expectation, and the residual score.

    ``gad`` is the response-scaled cost minus ``expected``; failed attacks
    carry gad = +inf with an undefined expectation. ``log_clamped`` marks a
    zero-perturbation flip whose log response was floored.
    """

    index: int
    confidence: float
    mae: float
    expected: float
    gad: float
    flipped: bool
    log_clamped: bool = False


def gad_scores(
    eval_set: Dataset,
    predictions: Sequence[Prediction],
    attacks: Sequence,
    span: float = 0.75,
    scale: str = RAW_SCALE,
) -> list[GadRecord]:
    """Score every instance: fit the expectation curve on flipped attacks only.

    Returns one record per row, row-aligned. Unflipped instances get
    gad = +inf so a budgeted search reaches them last.
    """
    n = len(eval_set)
    if not (len(predictions) == len(attacks) == n):
        raise DimensionMismatch(
            f"misaligned inputs: {n} rows, {len(predictions)} predictions, {len(attacks)} attacks"
        )
    flipped_idx = [i for i in range(n) if attacks[i].flipped]
    if len(flipped_idx) < 4:
        raise TooFewFlipped(f"need >= 4 flipped attacks to fit the curve, got {len(flipped_idx)}")

    # a zero-perturbation flip sits on the decision boundary; floor it so the
    # log transform stays defined, and flag the record
    clamped = {i: scale == LOG_SCALE and attacks[i].mae_to_original <= 0.0 for i in flipped_idx}
    fit_points = [
        (predictions[i].confidence, sys.float_info.min if clamped[i] else attacks[i].mae_to_original)
        for i in flipped_idx
    ]
    model = loess_fit(fit_points, span=span, scale=scale)
    scaled_response = {i: float(model.y[pos]) for pos, i in enumerate(flipped_idx)}

    records = []
    for i in range(n):
        conf = predictions[i].confidence
        cost = attacks[i].mae_to_original
        if attacks[i].flipped:
            expected = loess_predict(model, conf)
            records.append(
                GadRecord(
                    index=i, confidence=conf, mae=cost, expected=expected,
                    gad=scaled_response[i] - expected, flipped=True, log_clamped=clamped[i],
                )
            )
        else:
            records.append(
                GadRecord(index=i, confidence=conf, mae=cost, expected=float("nan"), gad=float("inf"), flipped=False)
            )
    return records


def write_gad_csv(records: Sequence[GadRecord], dest) -> None:
    """Serialize records as ``index,confidence,mae,expected,gad,flipped``."""
    own = isinstance(dest, (str, Path))
    fh = open(dest, "w", newline="", encoding="utf-8") if own else dest
    try:
        writer = csv.writer(fh)
        writer.writerow(GAD_CSV_HEADER)
        for r in records:
            writer.writerow(
                [r.index, repr(r.confidence), repr(r.mae), repr(r.expected), repr(r.gad), int(r.flipped)]
            )
    finally:
        if own:
            fh.close()


def read_gad_csv(src) -> list[GadRecord]:
    own = isinstance(src, (str, Path))
    fh = open(src, newline="", encoding="utf-8") if own else src
    try:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header] != GAD_CSV_HEADER:
            raise ValueError(f"unexpected gad csv header: {header}")
        records = []
        for row in reader:
            if not row:
                continue
            records.append(
                GadRecord(
                    index=int(row[0]),
                    confidence=float(row[1]),
                    mae=float(row[2]),
                    expected=float(row[3]),
                    gad=float(row[4]),
                    flipped=bool(int(row[5])),
                )
            )
        return records
    finally:
        if own:
            fh.close()
