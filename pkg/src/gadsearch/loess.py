"""Locally weighted degree-1 regression with tricube weights.

Estimates expected perturbation cost as a function of classifier
confidence. Plain classic smoother: nearest-neighbor span, no
robustifying iterations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NonPositiveResponseForLog, TooFewPoints

RAW_SCALE = "raw"
LOG_SCALE = "log"


@dataclass(frozen=True)
class LoessModel:
    """Fitted smoother state; responses are already in the configured scale."""

    x: np.ndarray
    y: np.ndarray
    span: float
    scale: str

    @property
    def n_neighbors(self) -> int:
        return math.ceil(self.span * len(self.x))


def loess_fit(points: Sequence[tuple[float, float]], span: float = 0.75, scale: str = RAW_SCALE) -> LoessModel:
    """Store (confidence, response) pairs for local linear smoothing.

    With scale="log" the responses are natural-logged at fit time and all
    predictions live in log space.
    """
    if not 0.0 < span <= 1.0:
        raise ValueError("span must be in (0, 1]")
    if scale not in (RAW_SCALE, LOG_SCALE):
        raise ValueError(f"scale must be {RAW_SCALE!r} or {LOG_SCALE!r}")
    pts = list(points)
    n = len(pts)
    if n < 4:
        raise TooFewPoints(f"need at least 4 points, got {n}")
    if math.ceil(span * n) < 3:
        raise TooFewPoints(f"span {span} gives {math.ceil(span * n)} neighbors; need >= 3")
    x = np.array([p[0] for p in pts], dtype=np.float64)
    y = np.array([p[1] for p in pts], dtype=np.float64)
    if np.unique(x).size < 2:
        raise TooFewPoints("need at least 2 distinct confidence values")
    if scale == LOG_SCALE:
        if np.any(y <= 0.0):
            raise NonPositiveResponseForLog("log scale requires strictly positive responses")
        y = np.log(y)
    x.setflags(write=False)
    y.setflags(write=False)
    return LoessModel(x=x, y=y, span=span, scale=scale)


def loess_predict(model: LoessModel, confidence: float) -> float:
    """Local degree-1 weighted fit at the query point; total over the reals.

    Queries beyond the training range reuse the boundary neighborhood, so
    the edge local line extrapolates.
    """
    x0 = float(confidence)
    d = np.abs(model.x - x0)
    k = model.n_neighbors
    d_max = np.partition(d, k - 1)[k - 1]
    # take everything within the k-th distance: tie-robust and permutation
    # invariant (points exactly at d_max carry zero tricube weight anyway)
    mask = d <= d_max
    dn, xn, yn = d[mask], model.x[mask], model.y[mask]
    if d_max == 0.0:
        w = np.ones_like(dn)
    else:
        w = (1.0 - (dn / d_max) ** 3) ** 3
    s0 = float(w.sum())
    if s0 <= 0.0:
        return float(yn.mean())
    u = xn - x0
    s1 = float(w @ u)
    s2 = float(w @ (u * u))
    t0 = float(w @ yn)
    t1 = float(w @ (u * yn))
    det = s0 * s2 - s1 * s1
    if det <= 1e-14 * max(s0 * s2, 1e-300):
        return t0 / s0  # collinear-in-x neighborhood: weighted mean
    return (s2 * t0 - s1 * t1) / det
