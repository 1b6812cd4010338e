from __future__ import annotations

import pytest

from gadsearch.attack import AttackConfig, attack_all, default_epsilon
from gadsearch.bench import synth_overconfident
from gadsearch.classifiers import predict_pool, train_mlp
from gadsearch.data import feature_ranges
from gadsearch.extraction import fit_pseudo, lhs_design
from gadsearch.scoring import gad_scores
from gadsearch.search import eligible_indices


@pytest.fixture(scope="session")
def small_scenario():
    """A compact end-to-end pipeline shared by scoring/search/bench tests.

    Keeps the expensive stages (training, extraction, attack) to one run
    per test session.
    """
    train, test, coi = synth_overconfident(2000, seed=5, keep_fraction=0.08)
    m_o = train_mlp(train, [16], epochs=800, learning_rate=0.5, seed=6)
    predictions = predict_pool(m_o, test.features)
    ranges = feature_ranges(test)
    design = lhs_design(ranges, 4000, seed=7)
    net, report = fit_pseudo(m_o, design, coi, epochs=12, learning_rate=0.05, seed=8)
    eligible = eligible_indices(predictions, coi)
    pool = test.take(eligible)
    pool_predictions = [predictions[i] for i in eligible]
    cfg = AttackConfig(epsilon=default_epsilon(ranges), max_iters=600, clip_to_ranges=ranges)
    attacks = attack_all(m_o, net, pool, cfg)
    records = gad_scores(pool, pool_predictions, attacks, span=0.75, scale="raw")
    return {
        "train": train,
        "test": test,
        "coi": coi,
        "classifier": m_o,
        "predictions": predictions,
        "ranges": ranges,
        "net": net,
        "extraction_report": report,
        "pool": pool,
        "pool_predictions": pool_predictions,
        "attack_config": cfg,
        "attacks": attacks,
        "records": records,
    }
