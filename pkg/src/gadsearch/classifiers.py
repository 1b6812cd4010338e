"""Black-box classifier abstraction plus trainable built-ins and a subprocess adapter.

Everything downstream sees only ``predict(x) -> Prediction``: an argmax
class id and the probability of that class. Built-ins exist so experiments
have something to evaluate; any real black box plugs in through
``ExternalClassifier`` and its line protocol.
"""

from __future__ import annotations

import json
import os
import select
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import Dataset
from .errors import DimensionMismatch, NoLabels, ProcessSpawnError, ProtocolError, SingleClass, Timeout


@dataclass(frozen=True)
class Prediction:
    """An argmax class id and the model's confidence in it."""

    label: int
    confidence: float

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


def class_of_interest_confidence(pred: Prediction, class_of_interest: int) -> float:
    """Probability the black box assigns to the class of interest.

    Exact for binary classifiers; for more classes it is the standard
    one-vs-rest reading of an (argmax, confidence) pair.
    """
    if pred.label == class_of_interest:
        return pred.confidence
    return 1.0 - pred.confidence


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class SoftmaxNetClassifier:
    """Fully connected net with ReLU hidden layers and a softmax head.

    With no hidden layers this is multinomial logistic regression. Instances
    are immutable after training and safe to share across threads.
    """

    kind = "softmax_net"

    def __init__(self, layers: list[tuple[np.ndarray, np.ndarray]], class_names: list[str]):
        self.layers = [(np.asarray(w, dtype=np.float64), np.asarray(b, dtype=np.float64)) for w, b in layers]
        self.class_names = list(class_names)
        for w, b in self.layers:
            w.setflags(write=False)
            b.setflags(write=False)
        self.loss_history: list[float] = []

    @property
    def n_features(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def n_classes(self) -> int:
        return self.layers[-1][0].shape[0]

    def _logits(self, x: np.ndarray) -> np.ndarray:
        a = x
        for w, b in self.layers[:-1]:
            a = np.maximum(a @ w.T + b, 0.0)
        w, b = self.layers[-1]
        return a @ w.T + b

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {x.shape[-1]}")
        return _softmax(self._logits(x))

    def predict(self, x: np.ndarray) -> Prediction:
        probs = self.predict_proba(np.asarray(x, dtype=np.float64).reshape(-1))
        label = int(np.argmax(probs))  # argmax ties break to the lowest id
        return Prediction(label=label, confidence=float(probs[label]))

    def predict_batch(self, xs: np.ndarray) -> list[Prediction]:
        probs = self.predict_proba(np.asarray(xs, dtype=np.float64))
        labels = np.argmax(probs, axis=1)
        return [Prediction(int(l), float(p[l])) for l, p in zip(labels, probs)]

    def to_json(self) -> str:
        doc = {
            "kind": self.kind,
            "class_names": self.class_names,
            "layers": [{"w": w.tolist(), "b": b.tolist()} for w, b in self.layers],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "SoftmaxNetClassifier":
        doc = json.loads(text)
        layers = [(np.array(l["w"], dtype=np.float64), np.array(l["b"], dtype=np.float64)) for l in doc["layers"]]
        return cls(layers, doc["class_names"])


def _init_layers(
    n_features: int, hidden_widths: Sequence[int], n_classes: int, rng: np.random.Generator
) -> list[tuple[np.ndarray, np.ndarray]]:
    # He init on hidden layers, zeros on the output layer: keeps the
    # no-hidden case identical to zero-initialized logistic regression.
    layers = []
    fan_in = n_features
    for width in hidden_widths:
        w = rng.standard_normal((width, fan_in)) * np.sqrt(2.0 / fan_in)
        layers.append((w, np.zeros(width)))
        fan_in = width
    layers.append((np.zeros((n_classes, fan_in)), np.zeros(n_classes)))
    return layers


def _train_softmax_net(
    train: Dataset,
    hidden_widths: Sequence[int],
    epochs: int,
    learning_rate: float,
    seed: int,
) -> SoftmaxNetClassifier:
    if train.labels is None:
        raise NoLabels("training requires labels")
    classes_present = np.unique(train.labels)
    if classes_present.size < 2:
        raise SingleClass("training requires at least two classes present")

    x = train.features
    n, m = x.shape
    k = train.n_classes
    onehot = np.zeros((n, k))
    onehot[np.arange(n), train.labels] = 1.0

    rng = np.random.default_rng(seed)
    layers = [(w.copy(), b.copy()) for w, b in _init_layers(m, hidden_widths, k, rng)]
    losses = []
    for _ in range(epochs):
        # forward with caches
        activations = [x]
        for w, b in layers[:-1]:
            activations.append(np.maximum(activations[-1] @ w.T + b, 0.0))
        w_out, b_out = layers[-1]
        probs = _softmax(activations[-1] @ w_out.T + b_out)
        losses.append(float(-np.mean(np.log(np.clip(probs[np.arange(n), train.labels], 1e-300, None)))))

        # full-batch gradient of mean cross-entropy
        delta = (probs - onehot) / n
        grads = []
        for li in range(len(layers) - 1, -1, -1):
            w, b = layers[li]
            grads.append((delta.T @ activations[li], delta.sum(axis=0)))
            if li > 0:
                delta = (delta @ w) * (activations[li] > 0.0)
        for (w, b), (gw, gb) in zip(layers, reversed(grads)):
            w -= learning_rate * gw
            b -= learning_rate * gb

    model = SoftmaxNetClassifier(layers, train.class_names)
    model.loss_history = losses
    return model


def train_logistic(train: Dataset, epochs: int, learning_rate: float, seed: int = 0) -> SoftmaxNetClassifier:
    """Multinomial logistic regression, full-batch gradient descent from zero init."""
    return _train_softmax_net(train, [], epochs, learning_rate, seed)


def train_mlp(
    train: Dataset,
    hidden_widths: Sequence[int],
    epochs: int,
    learning_rate: float,
    seed: int = 0,
) -> SoftmaxNetClassifier:
    """Dense ReLU net with a softmax head, full-batch gradient descent."""
    return _train_softmax_net(train, hidden_widths, epochs, learning_rate, seed)


class ExternalClassifier:
    """Adapter for a classifier living in a child process.

    Line protocol over the child's standard streams:
    request ``predict v1,v2,...,vM\\n``, reply ``<label:int> <confidence:decimal>\\n``,
    one reply per request in order; ``quit\\n`` terminates. Requests are
    serialized per process; spawn one adapter per worker for parallelism.
    """

    kind = "external"

    def __init__(self, command: str | Sequence[str], n_classes: int, timeout: float = 10.0):
        self.n_classes = n_classes
        self.timeout = timeout
        argv = [command] if isinstance(command, (str, Path)) else list(command)
        try:
            self._proc = subprocess.Popen(
                argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, bufsize=0
            )
        except OSError as e:
            raise ProcessSpawnError(f"cannot start {argv[0]}: {e}")
        self._buf = b""

    def _read_line(self) -> str:
        while b"\n" not in self._buf:
            ready, _, _ = select.select([self._proc.stdout], [], [], self.timeout)
            if not ready:
                raise Timeout(f"no reply within {self.timeout}s")
            chunk = os.read(self._proc.stdout.fileno(), 4096)
            if not chunk:
                raise ProtocolError("", "child closed its output stream")
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        return line.decode("utf-8")

    def predict(self, x: np.ndarray) -> Prediction:
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        request = "predict " + ",".join(repr(float(v)) for v in x) + "\n"
        self._proc.stdin.write(request.encode("utf-8"))
        self._proc.stdin.flush()
        line = self._read_line()
        parts = line.split()
        if len(parts) != 2:
            raise ProtocolError(line, "expected '<label> <confidence>'")
        try:
            label = int(parts[0])
            confidence = float(parts[1])
        except ValueError:
            raise ProtocolError(line, "label must be an int and confidence a decimal")
        if not 0.0 <= confidence <= 1.0:
            raise ProtocolError(line, "confidence out of range")
        if not 0 <= label < self.n_classes:
            raise ProtocolError(line, f"label outside [0, {self.n_classes})")
        return Prediction(label=label, confidence=confidence)

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.write(b"quit\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError):
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def external_adapter(command: str | Sequence[str], n_classes: int = 2, timeout: float = 10.0) -> ExternalClassifier:
    """Spawn a child process speaking the predict/quit line protocol."""
    return ExternalClassifier(command, n_classes=n_classes, timeout=timeout)


def predict_pool(m, features: np.ndarray) -> list[Prediction]:
    """Predictions for every row, using the batch path when the model has one."""
    if hasattr(m, "predict_batch"):
        return m.predict_batch(features)
    return [m.predict(features[i]) for i in range(features.shape[0])]


def load_classifier(path: str | Path):
    text = Path(path).read_text(encoding="utf-8")
    doc = json.loads(text)
    if doc.get("kind") != "softmax_net":
        raise ValueError(f"unknown classifier kind {doc.get('kind')!r}")
    return SoftmaxNetClassifier.from_json(text)


PREDICTIONS_CSV_HEADER = ["index", "label", "confidence"]


def write_predictions_csv(predictions: Sequence[Prediction], dest) -> None:
    """Row-aligned prediction artifact: ``index,label,confidence``."""
    own = isinstance(dest, (str, Path))
    fh = open(dest, "w", newline="", encoding="utf-8") if own else dest
    try:
        fh.write(",".join(PREDICTIONS_CSV_HEADER) + "\n")
        for i, p in enumerate(predictions):
            fh.write(f"{i},{p.label},{p.confidence!r}\n")
    finally:
        if own:
            fh.close()


def read_predictions_csv(src) -> list[Prediction]:
    own = isinstance(src, (str, Path))
    fh = open(src, newline="", encoding="utf-8") if own else src
    try:
        header = fh.readline().strip().split(",")
        if header != PREDICTIONS_CSV_HEADER:
            raise ValueError(f"unexpected predictions csv header: {header}")
        out = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            idx, label, conf = line.split(",")
            if int(idx) != len(out):
                raise ValueError("predictions csv must be row-aligned starting at index 0")
            out.append(Prediction(label=int(label), confidence=float(conf)))
        return out
    finally:
        if own:
            fh.close()
