"""Gradient-sign attack that perturbs an instance until the black box flips.

The pseudo model supplies gradients; the original classifier is the judge.
Each step moves every coordinate by the step size in the direction that
increases the squared error between the pseudo model's output and a target
fixed at the start.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import Dataset, FeatureRanges
from .errors import DimensionMismatch
from .extraction import DenseNet, forward, input_gradient
from .scoring import mae

TARGET_MODES = ("hard", "soft-fixed", "soft-tracking")


@dataclass(frozen=True)
class AttackConfig:
    epsilon: float
    max_iters: int = 1000
    clip_to_ranges: Optional[FeatureRanges] = None
    # "hard" saturates the pseudo model's starting prediction to {0, 1}.
    # The soft modes target the raw output itself; they are provided for
    # experimentation but stall, because the squared-error gradient
    # vanishes when target and output coincide at the starting point.
    target_mode: str = "hard"

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.target_mode not in TARGET_MODES:
            raise ValueError(f"target_mode must be one of {TARGET_MODES}")


def default_epsilon(ranges: FeatureRanges, fraction: float = 0.01) -> float:
    """Step size as a fraction (default 1%) of the mean per-column range width."""
    width = float(np.mean(ranges.width))
    if width <= 0.0:
        raise ValueError("all feature ranges are degenerate; pass an explicit epsilon")
    return fraction * width


@dataclass(frozen=True)
class AttackResult:
    x_adv: np.ndarray
    iterations: int
    flipped: bool
    mae_to_original: float


def gradient_step(x: np.ndarray, grad: np.ndarray, epsilon: float) -> np.ndarray:
    """One signed step: every nonzero-gradient coordinate moves by epsilon."""
    return x + epsilon * np.sign(grad)


def attack(m_o, m_p: DenseNet, x: np.ndarray, cfg: AttackConfig) -> AttackResult:
    """Perturb x until m_o's label changes or the iteration budget runs out.

    Budget exhaustion is an ordinary outcome (flipped=False), not an error:
    downstream scoring needs to see it per instance.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != m_p.n_features:
        raise DimensionMismatch(f"pseudo model expects {m_p.n_features} features, got {x.shape[0]}")
    original_label = m_o.predict(x).label

    start_conf = forward(m_p, x)
    if cfg.target_mode == "hard":
        target = 1.0 if start_conf >= 0.5 else 0.0
    else:
        target = start_conf

    x_adv = x.copy()
    iterations = 0
    while iterations < cfg.max_iters:
        if cfg.target_mode == "soft-tracking":
            target = forward(m_p, x_adv)
        grad = input_gradient(m_p, x_adv, target)
        x_next = gradient_step(x_adv, grad, cfg.epsilon)
        if cfg.clip_to_ranges is not None:
            x_next = np.clip(x_next, cfg.clip_to_ranges.low, cfg.clip_to_ranges.high)
        iterations += 1
        if np.array_equal(x_next, x_adv):
            # zero gradient (or fully clipped): no future step can differ
            break
        x_adv = x_next
        if m_o.predict(x_adv).label != original_label:
            return AttackResult(x_adv=x_adv, iterations=iterations, flipped=True, mae_to_original=mae(x, x_adv))
    return AttackResult(x_adv=x_adv, iterations=iterations, flipped=False, mae_to_original=mae(x, x_adv))


def attack_all(m_o, m_p: DenseNet, eval_set: Dataset, cfg: AttackConfig) -> list[AttackResult]:
    """One AttackResult per row, order-aligned; per-instance exhaustion never aborts the batch."""
    return [attack(m_o, m_p, eval_set.features[i], cfg) for i in range(len(eval_set))]


def write_attacks_csv(results: list[AttackResult], feature_names: list[str], dest) -> None:
    """Stage artifact: ``index,flipped,iterations,mae`` plus the perturbed coordinates."""
    from pathlib import Path

    own = isinstance(dest, (str, Path))
    fh = open(dest, "w", newline="", encoding="utf-8") if own else dest
    try:
        fh.write("index,flipped,iterations,mae," + ",".join(f"adv_{n}" for n in feature_names) + "\n")
        for i, r in enumerate(results):
            coords = ",".join(repr(float(v)) for v in r.x_adv)
            fh.write(f"{i},{int(r.flipped)},{r.iterations},{r.mae_to_original!r},{coords}\n")
    finally:
        if own:
            fh.close()


def read_attacks_csv(src) -> list[AttackResult]:
    from pathlib import Path

    own = isinstance(src, (str, Path))
    fh = open(src, newline="", encoding="utf-8") if own else src
    try:
        header = fh.readline().strip().split(",")
        if header[:4] != ["index", "flipped", "iterations", "mae"]:
            raise ValueError(f"unexpected attacks csv header: {header}")
        out = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if int(cells[0]) != len(out):
                raise ValueError("attacks csv must be row-aligned starting at index 0")
            out.append(
                AttackResult(
                    x_adv=np.array([float(v) for v in cells[4:]]),
                    iterations=int(cells[2]),
                    flipped=bool(int(cells[1])),
                    mae_to_original=float(cells[3]),
                )
            )
        return out
    finally:
        if own:
            fh.close()
