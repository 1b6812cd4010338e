from __future__ import annotations

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from gadsearch.classifiers import Prediction, write_predictions_csv
from gadsearch.data import Dataset, save_csv
from gadsearch.scoring import GadRecord, write_gad_csv
from gadsearch.search import GroundTruthOracle, gad_search
from gadsearch.service import create_app


@pytest.fixture()
def scored_pool(tmp_path):
    """A data directory holding pool.csv, preds.csv, and gad.csv artifacts."""
    rng = np.random.default_rng(17)
    n = 40
    features = rng.standard_normal((n, 3))
    truths = rng.integers(0, 2, n)
    pool = Dataset(features=features, labels=truths, class_names=["neg", "pos"])
    confs = rng.uniform(0.7, 0.99, n)
    preds = [Prediction(1, float(c)) for c in confs]
    gads = rng.standard_normal(n)
    records = [
        GadRecord(index=i, confidence=float(confs[i]), mae=0.5, expected=0.0, gad=float(gads[i]), flipped=True)
        for i in range(n)
    ]
    unlabeled = Dataset(features=features, feature_names=pool.feature_names)
    save_csv(unlabeled, tmp_path / "pool.csv")
    write_predictions_csv(preds, tmp_path / "preds.csv")
    write_gad_csv(records, tmp_path / "gad.csv")
    return {
        "dir": tmp_path,
        "pool": pool,
        "unlabeled": unlabeled,
        "preds": preds,
        "records": records,
        "truths": truths,
    }


def session_body(**overrides):
    body = {
        "pool": "pool.csv",
        "predictions": "preds.csv",
        "gad": "gad.csv",
        "method": "gad",
        "budget": 10,
        "class_of_interest": 1,
        "class_names": ["neg", "pos"],
    }
    body.update(overrides)
    return body


@pytest.fixture()
def client(scored_pool):
    app = create_app(scored_pool["dir"])
    return TestClient(app)


class TestCreateSession:
    def test_valid_config_returns_201_with_id(self, client):
        r = client.post("/sessions", json=session_body())
        assert r.status_code == 201
        assert "session_id" in r.json()

    def test_missing_artifact_is_404(self, client):
        r = client.post("/sessions", json=session_body(predictions="nope.csv"))
        assert r.status_code == 404

    def test_invalid_config_is_400(self, client):
        assert client.post("/sessions", json=session_body(method="bogus")).status_code == 400
        assert client.post("/sessions", json=session_body(budget=0)).status_code == 400
        assert client.post("/sessions", json=session_body(budget=10_000)).status_code == 400

    def test_two_creates_get_distinct_ids(self, client):
        a = client.post("/sessions", json=session_body()).json()["session_id"]
        b = client.post("/sessions", json=session_body()).json()["session_id"]
        assert a != b


class TestNextQuery:
    def test_first_query_is_min_gad_eligible(self, client, scored_pool):
        sid = client.post("/sessions", json=session_body()).json()["session_id"]
        view = client.get(f"/sessions/{sid}/next").json()
        records = scored_pool["records"]
        best = min(records, key=lambda r: (r.gad, r.index))
        assert view["index"] == best.index
        assert view["feature_names"] == scored_pool["unlabeled"].feature_names
        assert len(view["features"]) == 3
        assert view["gad"] == pytest.approx(best.gad)

    def test_idempotent_until_labeled(self, client):
        sid = client.post("/sessions", json=session_body()).json()["session_id"]
        a = client.get(f"/sessions/{sid}/next").json()
        b = client.get(f"/sessions/{sid}/next").json()
        assert a == b

    def test_exhausted_budget_is_410(self, client, scored_pool):
        sid = client.post("/sessions", json=session_body(budget=2)).json()["session_id"]
        for _ in range(2):
            view = client.get(f"/sessions/{sid}/next").json()
            client.post(f"/sessions/{sid}/label", json={"index": view["index"], "label": 0})
        assert client.get(f"/sessions/{sid}/next").status_code == 410

    def test_unknown_session_is_404(self, client):
        assert client.get("/sessions/doesnotexist/next").status_code == 404


class TestPostLabel:
    def test_correct_label_keeps_error_count(self, client):
        sid = client.post("/sessions", json=session_body()).json()["session_id"]
        view = client.get(f"/sessions/{sid}/next").json()
        r = client.post(f"/sessions/{sid}/label", json={"index": view["index"], "label": view["predicted_label"]})
        m = r.json()
        assert r.status_code == 200
        assert m["errors_found"] == 0 and m["step"] == 1

    def test_wrong_label_sdr_arithmetic(self, scored_pool):
        # pin the first query's confidence at 0.8: a wrong label gives 1/0.2 = 5
        d = scored_pool["dir"]
        preds = list(scored_pool["preds"])
        records = scored_pool["records"]
        best = min(records, key=lambda r: (r.gad, r.index))
        preds[best.index] = Prediction(1, 0.8)
        write_predictions_csv(preds, d / "preds.csv")
        new_records = [
            GadRecord(index=r.index, confidence=0.8 if r.index == best.index else r.confidence,
                      mae=r.mae, expected=r.expected, gad=r.gad, flipped=r.flipped)
            for r in records
        ]
        write_gad_csv(new_records, d / "gad.csv")
        client = TestClient(create_app(d))
        sid = client.post("/sessions", json=session_body()).json()["session_id"]
        view = client.get(f"/sessions/{sid}/next").json()
        assert view["confidence"] == 0.8
        m = client.post(f"/sessions/{sid}/label", json={"index": view["index"], "label": 0}).json()
        assert m["sdr"] == pytest.approx(5.0)
        assert m["errors_found"] == 1

    def test_stale_index_is_409_and_state_unchanged(self, client):
        sid = client.post("/sessions", json=session_body()).json()["session_id"]
        view = client.get(f"/sessions/{sid}/next").json()
        wrong = (view["index"] + 1) % 40
        r = client.post(f"/sessions/{sid}/label", json={"index": wrong, "label": 0})
        assert r.status_code == 409
        assert client.get(f"/sessions/{sid}/metrics").json()["step"] == 0
        assert client.get(f"/sessions/{sid}/next").json() == view

    def test_unknown_label_is_422(self, client):
        sid = client.post("/sessions", json=session_body()).json()["session_id"]
        view = client.get(f"/sessions/{sid}/next").json()
        assert client.post(f"/sessions/{sid}/label", json={"index": view["index"], "label": 7}).status_code == 422


class TestMetrics:
    def test_fresh_session_zero_curve(self, client):
        sid = client.post("/sessions", json=session_body()).json()["session_id"]
        m = client.get(f"/sessions/{sid}/metrics").json()
        assert m == {"step": 0, "errors_found": 0, "sdr": None, "sdr_curve": [], "budget": 10, "status": "active"}

    def test_curve_grows_with_labels(self, client, scored_pool):
        sid = client.post("/sessions", json=session_body()).json()["session_id"]
        for k in range(1, 4):
            view = client.get(f"/sessions/{sid}/next").json()
            client.post(f"/sessions/{sid}/label", json={"index": view["index"], "label": 0})
            assert len(client.get(f"/sessions/{sid}/metrics").json()["sdr_curve"]) == k

    def test_snapshot_matches_trace_recompute(self, client):
        sid = client.post("/sessions", json=session_body()).json()["session_id"]
        for _ in range(5):
            view = client.get(f"/sessions/{sid}/next").json()
            client.post(f"/sessions/{sid}/label", json={"index": view["index"], "label": 0})
        snapshot = client.get(f"/sessions/{sid}/metrics").json()
        lines = [json.loads(l) for l in client.get(f"/sessions/{sid}/trace").text.splitlines() if l]
        errors = sum(l["is_error"] for l in lines)
        denom = sum(1.0 - l["confidence"] for l in lines)
        assert snapshot["errors_found"] == errors
        assert snapshot["sdr"] == pytest.approx(errors / denom)
        # the snapshot is the persisted value verbatim, not a re-derivation
        assert snapshot["sdr"] == lines[-1]["sdr"]
        assert snapshot["sdr_curve"] == [l["sdr"] for l in lines]


class TestPersistence:
    @pytest.mark.parametrize(
        "overrides",
        [
            {},  # gad: static order
            {"method": "random", "gad": None, "seed": 5},
            {"method": "metamodel", "gad": None, "seed": 5},  # stateful planner
        ],
    )
    def test_restart_replays_identical_state(self, scored_pool, overrides):
        d = scored_pool["dir"]
        client = TestClient(create_app(d))
        sid = client.post("/sessions", json=session_body(**overrides)).json()["session_id"]
        truths = scored_pool["truths"]
        for _ in range(6):
            view = client.get(f"/sessions/{sid}/next").json()
            client.post(
                f"/sessions/{sid}/label",
                json={"index": view["index"], "label": int(truths[view["index"]])},
            )
        before = client.get(f"/sessions/{sid}/metrics").json()
        next_before = client.get(f"/sessions/{sid}/next").json()

        fresh = TestClient(create_app(d))  # new registry, same disk
        after = fresh.get(f"/sessions/{sid}/metrics").json()
        next_after = fresh.get(f"/sessions/{sid}/next").json()
        assert after == before
        assert next_after == next_before


class TestOracleEquivalence:
    def test_scripted_session_reproduces_gad_search(self, scored_pool):
        pool = scored_pool["pool"]
        preds = scored_pool["preds"]
        records = scored_pool["records"]
        oracle = GroundTruthOracle(scored_pool["truths"])
        budget = 15
        direct = gad_search(scored_pool["unlabeled"], records, preds, oracle, budget, class_of_interest=1)

        client = TestClient(create_app(scored_pool["dir"]))
        sid = client.post("/sessions", json=session_body(budget=budget)).json()["session_id"]
        served = []
        for _ in range(budget):
            view = client.get(f"/sessions/{sid}/next").json()
            served.append(view["index"])
            client.post(
                f"/sessions/{sid}/label",
                json={"index": view["index"], "label": int(scored_pool["truths"][view["index"]])},
            )
        assert served == direct.queried
        snapshot = client.get(f"/sessions/{sid}/metrics").json()
        assert snapshot["sdr_curve"] == pytest.approx(direct.sdr_curve)
        assert snapshot["errors_found"] == direct.errors_found
