"""Pseudo-model extraction: label a space-filling design with the black box's
class-of-interest confidence and fit a small dense regression net to it.

The net exists to supply the input gradients the black box withholds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .classifiers import class_of_interest_confidence, predict_pool
from .data import FeatureRanges
from .errors import DimensionMismatch

_OPEN_LO = np.nextafter(0.0, 1.0)
_OPEN_HI = np.nextafter(1.0, 0.0)

DEFAULT_HIDDEN = (64, 64, 64, 64)  # 5 dense layers total with the scalar output


@dataclass(frozen=True)
class LhsDesign:
    """A Latin hypercube: per column, exactly one point per equal-width stratum."""

    points: np.ndarray
    ranges: FeatureRanges
    seed: int

    @property
    def n(self) -> int:
        return self.points.shape[0]


def lhs_design(ranges: FeatureRanges, n: int, seed: int) -> LhsDesign:
    """Sample an n-point Latin hypercube over the given box.

    Column permutations are independent; position within a stratum is
    uniform. A degenerate column (min == max) yields that constant.
    Points are nudged below their stratum's upper edge when rounding
    would spill them over, so bin-count checks hold exactly.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    m = len(ranges)
    points = np.empty((n, m), dtype=np.float64)
    for j in range(m):
        lo, hi = ranges.low[j], ranges.high[j]
        perm = rng.permutation(n)
        u = rng.random(n)
        if hi == lo:
            points[:, j] = lo
            continue
        edges = np.linspace(lo, hi, n + 1)
        lower = edges[perm]
        upper = edges[perm + 1]
        x = lower + u * (upper - lower)
        x = np.minimum(np.maximum(x, lower), np.nextafter(upper, lower))
        points[:, j] = x
    points.setflags(write=False)
    return LhsDesign(points=points, ranges=ranges, seed=seed)


class DenseNet:
    """Fully connected regression net: ReLU hidden layers, sigmoid scalar output."""

    def __init__(self, layers: list[tuple[np.ndarray, np.ndarray]], hyperparams: dict | None = None):
        self.layers = [(np.asarray(w, dtype=np.float64), np.asarray(b, dtype=np.float64)) for w, b in layers]
        if self.layers[-1][0].shape[0] != 1:
            raise ValueError("output layer must be scalar")
        for (w, b), (w_next, _) in zip(self.layers, self.layers[1:]):
            if w_next.shape[1] != w.shape[0]:
                raise ValueError("layer dimensions must chain")
        self.hyperparams = dict(hyperparams or {})

    @property
    def n_features(self) -> int:
        return self.layers[0][0].shape[1]

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {x.shape[-1]}")
        return x

    def forward_batch(self, xs: np.ndarray) -> np.ndarray:
        a = self._check(xs)
        for w, b in self.layers[:-1]:
            a = np.maximum(a @ w.T + b, 0.0)
        w, b = self.layers[-1]
        z = (a @ w.T + b)[..., 0]
        out = np.where(z >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))
        return np.clip(out, _OPEN_LO, _OPEN_HI)

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": "dense_net",
                "layers": [{"w": w.tolist(), "b": b.tolist()} for w, b in self.layers],
                "hyperparams": self.hyperparams,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "DenseNet":
        doc = json.loads(text)
        layers = [(np.array(l["w"], dtype=np.float64), np.array(l["b"], dtype=np.float64)) for l in doc["layers"]]
        return cls(layers, doc.get("hyperparams"))


def load_pseudo(path: str | Path) -> DenseNet:
    return DenseNet.from_json(Path(path).read_text(encoding="utf-8"))


def forward(net: DenseNet, x: np.ndarray) -> float:
    """Scalar confidence estimate, strictly inside (0, 1)."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    return float(net.forward_batch(x[None, :])[0])


def input_gradient(net: DenseNet, x: np.ndarray, target: float) -> np.ndarray:
    """Exact gradient w.r.t. x of the squared error (forward(net, x) - target)**2."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    net._check(x)
    # forward with caches
    activations = [x]
    for w, b in net.layers[:-1]:
        activations.append(np.maximum(activations[-1] @ w.T + b, 0.0))
    w_out, b_out = net.layers[-1]
    z = float((activations[-1] @ w_out.T + b_out)[0])
    f = 1.0 / (1.0 + np.exp(-z)) if z >= 0.0 else np.exp(z) / (1.0 + np.exp(z))
    # backward to the input
    delta = np.array([2.0 * (f - target) * f * (1.0 - f)])
    for li in range(len(net.layers) - 1, 0, -1):
        w, _ = net.layers[li]
        delta = (delta @ w) * (activations[li] > 0.0)
    return delta @ net.layers[0][0]


@dataclass(frozen=True)
class ExtractionReport:
    r_squared: float
    train_mse: float
    n_design: int
    epochs: int


def _init_dense(n_features: int, hidden_widths: Sequence[int], rng: np.random.Generator):
    layers = []
    fan_in = n_features
    for width in hidden_widths:
        layers.append((rng.standard_normal((width, fan_in)) * np.sqrt(2.0 / fan_in), np.zeros(width)))
        fan_in = width
    layers.append((np.zeros((1, fan_in)), np.zeros(1)))
    return layers


def fit_pseudo(
    m_o,
    design: LhsDesign | np.ndarray,
    class_of_interest: int,
    hidden_widths: Sequence[int] = DEFAULT_HIDDEN,
    epochs: int = 20,
    learning_rate: float = 1e-2,
    seed: int = 0,
    batch_size: int = 128,
) -> tuple[DenseNet, ExtractionReport]:
    """Regress the black box's class-of-interest confidence over the design.

    Mini-batch gradient descent on mean squared error. The last 10% of the
    design rows are held out for the reported R².
    """
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    points = design.points if isinstance(design, LhsDesign) else np.asarray(design, dtype=np.float64)
    n = points.shape[0]
    targets = np.array(
        [class_of_interest_confidence(p, class_of_interest) for p in predict_pool(m_o, points)]
    )

    n_holdout = max(1, n // 10)
    x_train, t_train = points[: n - n_holdout], targets[: n - n_holdout]
    x_hold, t_hold = points[n - n_holdout :], targets[n - n_holdout :]

    rng = np.random.default_rng(seed)
    layers = [(w.copy(), b.copy()) for w, b in _init_dense(points.shape[1], hidden_widths, rng)]

    n_train = x_train.shape[0]
    train_mse = float("nan")
    for _ in range(epochs):
        order = rng.permutation(n_train)
        for start in range(0, n_train, batch_size):
            idx = order[start : start + batch_size]
            xb, tb = x_train[idx], t_train[idx]
            activations = [xb]
            for w, b in layers[:-1]:
                activations.append(np.maximum(activations[-1] @ w.T + b, 0.0))
            w_out, b_out = layers[-1]
            z = (activations[-1] @ w_out.T + b_out)[:, 0]
            f = np.where(z >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))
            delta = (2.0 * (f - tb) * f * (1.0 - f) / len(idx))[:, None]
            grads = []
            for li in range(len(layers) - 1, -1, -1):
                w, b = layers[li]
                grads.append((delta.T @ activations[li], delta.sum(axis=0)))
                if li > 0:
                    delta = (delta @ w) * (activations[li] > 0.0)
            for (w, b), (gw, gb) in zip(layers, reversed(grads)):
                w -= learning_rate * gw
                b -= learning_rate * gb

    net = DenseNet(
        layers,
        hyperparams={
            "hidden_widths": list(hidden_widths),
            "epochs": epochs,
            "learning_rate": learning_rate,
            "batch_size": batch_size,
            "seed": seed,
            "class_of_interest": class_of_interest,
            "n_design": n,
        },
    )
    train_mse = float(np.mean((net.forward_batch(x_train) - t_train) ** 2))
    pred_hold = net.forward_batch(x_hold)
    sse = float(np.sum((pred_hold - t_hold) ** 2))
    sst = float(np.sum((t_hold - t_hold.mean()) ** 2))
    if sst == 0.0:
        r2 = 1.0 if sse == 0.0 else float("-inf")
    else:
        r2 = 1.0 - sse / sst
    return net, ExtractionReport(r_squared=r2, train_mse=train_mse, n_design=n, epochs=epochs)
