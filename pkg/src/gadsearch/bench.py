"""Replicated search comparison on a scored pool: scenario construction,
pipeline execution, and aggregate reporting.

The pipeline runs once per experiment (train, extract, attack, score); each
replication then draws a fresh evaluation subset and runs every configured
search on it. Stage outputs are fingerprinted into a hash chain so a report
proves which artifacts fed which stage.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .attack import AttackConfig, attack_all, default_epsilon
from .classifiers import Prediction, predict_pool, train_logistic, train_mlp
from .data import Dataset, bias_split, feature_ranges, load_csv
from .errors import InsufficientEligiblePool
from .extraction import DEFAULT_HIDDEN, lhs_design, fit_pseudo
from .scoring import GadRecord, gad_scores
from .search import (
    GroundTruthOracle,
    ReliabilityDiagram,
    eligible_indices,
    gad_search,
    least_confidence_search,
    metamodel_search,
    random_search,
    reliability,
)

SEARCH_NAMES = ("gad", "random", "least_confidence", "metamodel")


# -- synthetic scenario -------------------------------------------------------

def synth_population(n: int, seed: int) -> Dataset:
    """Two equal-covariance Gaussian blobs, so the true posterior is logistic."""
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    centers = np.array([[-1.2, 0.0], [1.2, 0.0]])
    x = centers[y] + rng.standard_normal((n, 2))
    return Dataset(features=x, labels=y, class_names=["neg", "pos"])


def overconfidence_predicate(features: np.ndarray, label: int) -> bool:
    """The censored sub-population: other-class instances on the high-f0 side."""
    return label == 0 and features[0] > 0.0


def synth_overconfident(n: int, seed: int, keep_fraction: float = 0.08) -> tuple[Dataset, Dataset, int]:
    """A train/test pair whose training side censors most high-f0 instances of
    class 0, so a classifier trained on it is overconfident about class 1 there.

    keep_fraction=1.0 turns the bias off and yields a near-calibrated scenario.
    """
    population = synth_population(n, seed)
    train, test = bias_split(population, overconfidence_predicate, keep_fraction, seed=seed + 1)
    return train, test, 1


# -- configuration ------------------------------------------------------------

@dataclass
class ExperimentConfig:
    dataset: dict
    class_of_interest: int
    classifier: dict
    extraction: dict = field(default_factory=dict)
    attack: dict = field(default_factory=dict)
    gad: dict = field(default_factory=dict)
    searches: list[str] = field(default_factory=lambda: ["gad", "random"])
    replications: int = 100
    subset_size: int = 250
    budget: int = 50
    master_seed: int = 0

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.budget > self.subset_size:
            raise ValueError("budget must not exceed subset_size")
        unknown = set(self.searches) - set(SEARCH_NAMES)
        if unknown:
            raise ValueError(f"unknown searches: {sorted(unknown)}")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        return cls(**doc)

    @classmethod
    def from_json_file(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "class_of_interest": self.class_of_interest,
            "classifier": self.classifier,
            "extraction": self.extraction,
            "attack": self.attack,
            "gad": self.gad,
            "searches": self.searches,
            "replications": self.replications,
            "subset_size": self.subset_size,
            "budget": self.budget,
            "master_seed": self.master_seed,
        }


def _build_scenario(spec: dict) -> tuple[Dataset, Dataset]:
    source = spec.get("source", "synthetic")
    if source == "synthetic":
        train, test, _ = synth_overconfident(
            n=spec.get("n", 8000), seed=spec.get("seed", 0), keep_fraction=spec.get("keep_fraction", 0.08)
        )
        return train, test
    if source == "csv":
        d = load_csv(spec["path"], label_column=spec.get("label_column", "label"))
        bias = spec.get("bias")
        if bias is None:
            predicate = lambda f, l: False
            keep = 1.0
        else:
            feature_idx = d.feature_names.index(bias["feature"])
            value = float(bias["value"])
            target_label = int(bias["label"])
            if bias.get("op", ">") == ">":
                predicate = lambda f, l: l == target_label and f[feature_idx] > value
            else:
                predicate = lambda f, l: l == target_label and f[feature_idx] < value
            keep = float(bias.get("keep_fraction", 0.0))
        return bias_split(
            d, predicate, keep, seed=spec.get("seed", 0), test_fraction=spec.get("test_fraction", 0.5)
        )
    raise ValueError(f"unknown dataset source {source!r}")


def _train_classifier(spec: dict, train: Dataset):
    kind = spec.get("kind", "logistic")
    if kind == "logistic":
        return train_logistic(
            train, epochs=spec.get("epochs", 2000), learning_rate=spec.get("learning_rate", 0.5),
            seed=spec.get("seed", 0),
        )
    if kind == "mlp":
        return train_mlp(
            train, spec.get("hidden", [16]), epochs=spec.get("epochs", 3000),
            learning_rate=spec.get("learning_rate", 0.5), seed=spec.get("seed", 0),
        )
    raise ValueError(f"unknown classifier kind {kind!r}")


# -- fingerprint chain --------------------------------------------------------

def _chain(prev: str, stage: str, payload: bytes) -> str:
    h = hashlib.sha256()
    h.update(prev.encode("ascii"))
    h.update(stage.encode("utf-8"))
    h.update(payload)
    return h.hexdigest()


# -- replications -------------------------------------------------------------

def _search_seed(master_seed: int, replication: int, slot: int) -> int:
    return int(np.random.SeedSequence(master_seed, spawn_key=(slot, replication)).generate_state(1)[0])


def _run_replication(args) -> tuple[int, Optional[dict]]:
    (
        r,
        features,
        labels,
        pred_labels,
        pred_confs,
        gad_values,
        subset_size,
        budget,
        coi,
        searches,
        master_seed,
    ) = args
    rng = np.random.default_rng(master_seed + r)
    subset = rng.choice(features.shape[0], size=subset_size, replace=False)

    sub_preds = [Prediction(int(pred_labels[i]), float(pred_confs[i])) for i in subset]
    eligible = eligible_indices(sub_preds, coi)
    if len(eligible) < budget:
        return r, None

    sub_ds = Dataset(features=features[subset].copy(), labels=labels[subset].copy())
    oracle = GroundTruthOracle(sub_ds.labels)
    sub_records = [
        GadRecord(
            index=local, confidence=float(pred_confs[i]), mae=0.0, expected=float("nan"),
            gad=float(gad_values[i]), flipped=bool(np.isfinite(gad_values[i])),
        )
        for local, i in enumerate(subset)
    ]

    out = {}
    for name in searches:
        if name == "gad":
            trace = gad_search(sub_ds, sub_records, sub_preds, oracle, budget, coi)
        elif name == "random":
            trace = random_search(sub_ds, sub_preds, oracle, budget, _search_seed(master_seed, r, 1), coi)
        elif name == "least_confidence":
            trace = least_confidence_search(sub_ds, sub_preds, oracle, budget, coi)
        elif name == "metamodel":
            trace = metamodel_search(sub_ds, sub_preds, oracle, budget, _search_seed(master_seed, r, 2), coi)
        else:
            raise ValueError(name)
        error_set = set(trace.errors)
        flags = np.array([q in error_set for q in trace.queried])
        out[name] = {
            "sdr_curve": np.array(trace.sdr_curve),
            "errors_curve": np.cumsum(flags).astype(float),
            "confidences": np.array(trace.confidences),
        }
    return r, out


# -- report -------------------------------------------------------------------

@dataclass
class SearchSummary:
    name: str
    mean_sdr_curve: list[float]
    stderr_sdr_curve: list[float]
    mean_errors_curve: list[float]
    confidence_quartiles: tuple[float, float, float]


@dataclass
class BenchReport:
    config: dict
    searches: list[SearchSummary]
    reliability_bins: ReliabilityDiagram
    pseudo_r_squared: float
    extraction_report: dict
    flip_rate: float
    eligible_pool_size: int
    replications_run: int
    replications_skipped: int
    stage_fingerprints: list[dict]
    gad_records: list[GadRecord] = field(default_factory=list, repr=False)
    queried_confidences: dict = field(default_factory=dict, repr=False)

    def to_json_dict(self) -> dict:
        def clean(v):
            if isinstance(v, float) and not np.isfinite(v):
                return None
            return v

        return {
            "config": self.config,
            "searches": {
                s.name: {
                    "mean_sdr_curve": s.mean_sdr_curve,
                    "stderr_sdr_curve": s.stderr_sdr_curve,
                    "mean_errors_curve": s.mean_errors_curve,
                    "confidence_quartiles": list(s.confidence_quartiles),
                }
                for s in self.searches
            },
            "reliability": [
                {
                    "low": b.low,
                    "high": b.high,
                    "count": b.count,
                    "observed": clean(b.observed),
                    "expected": clean(b.expected),
                    "gap": clean(b.gap),
                }
                for b in self.reliability_bins.bins
            ],
            "pseudo_r_squared": clean(self.pseudo_r_squared),
            "extraction": {k: clean(v) for k, v in self.extraction_report.items()},
            "flip_rate": self.flip_rate,
            "eligible_pool_size": self.eligible_pool_size,
            "replications_run": self.replications_run,
            "replications_skipped": self.replications_skipped,
            "stage_fingerprints": self.stage_fingerprints,
        }


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> BenchReport:
    """Train once, extract once, score once, then replicate the searches."""
    train, test = _build_scenario(cfg.dataset)
    coi = cfg.class_of_interest
    fingerprints = []
    prev = "genesis"
    prev = _chain(prev, "dataset", train.features.tobytes() + test.features.tobytes())
    fingerprints.append({"stage": "dataset", "sha256": prev})

    m_o = _train_classifier(cfg.classifier, train)
    prev = _chain(prev, "classifier", m_o.to_json().encode("utf-8"))
    fingerprints.append({"stage": "classifier", "sha256": prev})

    predictions = predict_pool(m_o, test.features)
    pred_labels = np.array([p.label for p in predictions], dtype=np.int64)
    pred_confs = np.array([p.confidence for p in predictions], dtype=np.float64)
    prev = _chain(prev, "predictions", pred_labels.tobytes() + pred_confs.tobytes())
    fingerprints.append({"stage": "predictions", "sha256": prev})

    ext = cfg.extraction
    ranges = feature_ranges(test)
    if ext.get("design", "lhs") == "dataset":
        design_points = test.features
    else:
        design_points = lhs_design(ranges, ext.get("n_design", 20000), seed=ext.get("seed", 0)).points
    net, ext_report = fit_pseudo(
        m_o,
        design_points,
        coi,
        hidden_widths=ext.get("hidden", list(DEFAULT_HIDDEN)),
        epochs=ext.get("epochs", 20),
        learning_rate=ext.get("learning_rate", 0.05),
        seed=ext.get("seed", 0),
        batch_size=ext.get("batch_size", 128),
    )
    prev = _chain(prev, "extraction", net.to_json().encode("utf-8"))
    fingerprints.append({"stage": "extraction", "sha256": prev})

    eligible = eligible_indices(predictions, coi)
    pool = test.take(eligible)
    pool_predictions = [predictions[i] for i in eligible]

    atk = cfg.attack
    epsilon = atk.get("epsilon") or default_epsilon(ranges)
    attack_cfg = AttackConfig(
        epsilon=epsilon,
        max_iters=atk.get("max_iters", 1000),
        clip_to_ranges=ranges if atk.get("clip", True) else None,
    )
    attacks = attack_all(m_o, net, pool, attack_cfg)
    flip_rate = float(np.mean([a.flipped for a in attacks])) if attacks else 0.0
    prev = _chain(
        prev,
        "attack",
        np.concatenate([a.x_adv for a in attacks]).tobytes()
        + np.array([a.flipped for a in attacks]).tobytes(),
    )
    fingerprints.append({"stage": "attack", "sha256": prev})

    records = gad_scores(
        pool, pool_predictions, attacks, span=cfg.gad.get("span", 0.75), scale=cfg.gad.get("scale", "log")
    )
    prev = _chain(prev, "gad", np.array([r.gad for r in records]).tobytes())
    fingerprints.append({"stage": "gad", "sha256": prev})

    # scores live on eligible test rows; ineligible rows stay unscored
    gad_by_test_row = np.full(len(test), np.nan)
    for rec, test_idx in zip(records, eligible):
        gad_by_test_row[test_idx] = rec.gad

    tasks = [
        (
            r,
            test.features,
            test.labels,
            pred_labels,
            pred_confs,
            gad_by_test_row,
            cfg.subset_size,
            cfg.budget,
            coi,
            list(cfg.searches),
            cfg.master_seed,
        )
        for r in range(1, cfg.replications + 1)
    ]
    if cfg.subset_size > len(test):
        raise InsufficientEligiblePool(
            f"subset_size {cfg.subset_size} exceeds the test pool of {len(test)}"
        )
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_replication, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        results = [_run_replication(t) for t in tasks]
    results.sort(key=lambda t: t[0])  # ordered reduction: identical for any worker count

    per_search = {name: [] for name in cfg.searches}
    skipped = 0
    for _, payload in results:
        if payload is None:
            skipped += 1
            continue
        for name in cfg.searches:
            per_search[name].append(payload[name])

    run_count = cfg.replications - skipped
    summaries = []
    pooled_confidences = {}
    search_digest = hashlib.sha256()
    for name in cfg.searches:
        rows = per_search[name]
        if not rows:
            raise InsufficientEligiblePool("every replication was skipped: eligible pools below budget")
        sdr_matrix = np.stack([row["sdr_curve"] for row in rows])
        err_matrix = np.stack([row["errors_curve"] for row in rows])
        confs = np.concatenate([row["confidences"] for row in rows])
        pooled_confidences[name] = confs.tolist()
        stderr = (
            sdr_matrix.std(axis=0, ddof=1) / np.sqrt(sdr_matrix.shape[0])
            if sdr_matrix.shape[0] > 1
            else np.zeros(sdr_matrix.shape[1])
        )
        q25, q50, q75 = np.percentile(confs, [25.0, 50.0, 75.0])
        summaries.append(
            SearchSummary(
                name=name,
                mean_sdr_curve=sdr_matrix.mean(axis=0).tolist(),
                stderr_sdr_curve=stderr.tolist(),
                mean_errors_curve=err_matrix.mean(axis=0).tolist(),
                confidence_quartiles=(float(q25), float(q50), float(q75)),
            )
        )
        search_digest.update(sdr_matrix.tobytes())
    prev = _chain(prev, "search", search_digest.digest())
    fingerprints.append({"stage": "search", "sha256": prev})

    coi_mask = pred_labels == coi
    diagram = reliability(
        [p for p, m in zip(predictions, coi_mask) if m],
        [int(t) for t, m in zip(test.labels, coi_mask) if m],
    )

    return BenchReport(
        config=cfg.to_dict(),
        searches=summaries,
        reliability_bins=diagram,
        pseudo_r_squared=ext_report.r_squared,
        extraction_report={
            "r_squared": ext_report.r_squared,
            "train_mse": ext_report.train_mse,
            "n_design": ext_report.n_design,
            "epochs": ext_report.epochs,
        },
        flip_rate=flip_rate,
        eligible_pool_size=len(pool),
        replications_run=run_count,
        replications_skipped=skipped,
        stage_fingerprints=fingerprints,
        gad_records=records,
        queried_confidences=pooled_confidences,
    )


def write_report(report: BenchReport, outdir: str | Path, figures: bool = True) -> None:
    """Emit report.json, the four plot-ready CSVs, and matching PNG figures."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    (outdir / "report.json").write_text(
        json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    names = [s.name for s in report.searches]
    budget = len(report.searches[0].mean_sdr_curve)

    with (outdir / "sdr_curve.csv").open("w", encoding="utf-8") as fh:
        fh.write("step," + ",".join(f"{n}_mean,{n}_stderr" for n in names) + "\n")
        for i in range(budget):
            cells = [str(i + 1)]
            for s in report.searches:
                cells += [repr(s.mean_sdr_curve[i]), repr(s.stderr_sdr_curve[i])]
            fh.write(",".join(cells) + "\n")

    with (outdir / "errors_curve.csv").open("w", encoding="utf-8") as fh:
        fh.write("step," + ",".join(f"{n}_mean" for n in names) + "\n")
        for i in range(budget):
            fh.write(",".join([str(i + 1)] + [repr(s.mean_errors_curve[i]) for s in report.searches]) + "\n")

    with (outdir / "confidences.csv").open("w", encoding="utf-8") as fh:
        fh.write("search,q25,q50,q75\n")
        for s in report.searches:
            q25, q50, q75 = s.confidence_quartiles
            fh.write(f"{s.name},{q25!r},{q50!r},{q75!r}\n")

    with (outdir / "reliability.csv").open("w", encoding="utf-8") as fh:
        fh.write("bin_low,bin_high,count,observed,expected,gap\n")
        for b in report.reliability_bins.bins:
            fh.write(f"{b.low!r},{b.high!r},{b.count},{b.observed!r},{b.expected!r},{b.gap!r}\n")

    if figures:
        from . import plots

        plots.sdr_curve_figure(
            {s.name: (s.mean_sdr_curve, s.stderr_sdr_curve) for s in report.searches},
            outdir / "sdr_curve.png",
        )
        plots.errors_curve_figure(
            {s.name: s.mean_errors_curve for s in report.searches}, outdir / "errors_curve.png"
        )
        box_data = report.queried_confidences or {
            s.name: list(s.confidence_quartiles) for s in report.searches
        }
        plots.confidence_box_figure(box_data, outdir / "confidences.png")
        plots.reliability_figure(report.reliability_bins.bins, outdir / "reliability.png")
        if report.gad_records:
            plots.gad_scatter_figure(report.gad_records, outdir / "gad_scatter.png")
