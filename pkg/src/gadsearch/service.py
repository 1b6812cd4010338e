"""HTTP service for live labeling sessions.

A session pins a scored pool and a search method at creation, serves one
query at a time, and accepts oracle labels. Every accepted label is
appended to a JSON-lines trace file, so sessions survive restarts and the
trace downloads as-is. The running SDR is always recomputed server-side
from the persisted trace.
"""

from __future__ import annotations

import json
import math
import threading
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.responses import HTMLResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles

from .classifiers import read_predictions_csv
from .data import Dataset, load_csv
from .errors import GadSearchError
from .scoring import read_gad_csv
from .search import (
    MetamodelPlanner,
    SearchTrace,
    StaticOrderPlanner,
    eligible_indices,
    gad_order,
    least_confidence_order,
    random_order,
)

SEARCH_METHODS = ("gad", "random", "least_confidence", "metamodel")


@dataclass
class SessionConfig:
    pool: str
    predictions: str
    method: str = "gad"
    budget: int = 50
    class_of_interest: int = 1
    gad: Optional[str] = None
    class_names: Optional[list[str]] = None
    n_classes: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.method not in SEARCH_METHODS:
            raise ValueError(f"method must be one of {SEARCH_METHODS}")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.method == "gad" and not self.gad:
            raise ValueError("method 'gad' requires a gad scores artifact")

    @property
    def label_count(self) -> int:
        if self.n_classes:
            return self.n_classes
        if self.class_names:
            return len(self.class_names)
        return 2


class Session:
    """One labeling session: planner state plus an append-only trace file."""

    def __init__(self, session_id: str, config: SessionConfig, pool: Dataset, predictions, records, trace_path: Path):
        self.id = session_id
        self.config = config
        self.pool_data = pool
        self.predictions = predictions
        self.trace_path = trace_path
        self.trace = SearchTrace(budget=config.budget)
        self._error_flags: list[bool] = []
        self._current: Optional[int] = None
        self._lock = threading.Lock()

        eligible = eligible_indices(predictions, config.class_of_interest)
        if len(eligible) < config.budget:
            raise ValueError(
                f"budget {config.budget} exceeds the eligible pool of {len(eligible)}"
            )
        self._gad_by_index = {r.index: r.gad for r in records} if records else {}
        if config.method == "gad":
            self.planner = StaticOrderPlanner(gad_order(records, eligible))
        elif config.method == "random":
            self.planner = StaticOrderPlanner(random_order(eligible, config.seed))
        elif config.method == "least_confidence":
            self.planner = StaticOrderPlanner(least_confidence_order(predictions, eligible))
        else:
            self.planner = MetamodelPlanner(pool, predictions, eligible, seed=config.seed)

    @property
    def status(self) -> str:
        return "exhausted" if len(self.trace.queried) >= self.config.budget else "active"

    def current_query(self) -> int:
        if self._current is None:
            self._current = self.planner.next_index(self.trace.queried, self._error_flags)
        return self._current

    def query_view(self) -> dict:
        idx = self.current_query()
        pred = self.predictions[idx]
        gad = self._gad_by_index.get(idx)
        return {
            "index": idx,
            "features": [float(v) for v in self.pool_data.features[idx]],
            "feature_names": list(self.pool_data.feature_names),
            "predicted_label": pred.label,
            "confidence": pred.confidence,
            "gad": gad if gad is not None and math.isfinite(gad) else None,
            "step": len(self.trace.queried) + 1,
            "budget": self.config.budget,
            "class_names": self.config.class_names,
        }

    def apply_label(self, index: int, label: int) -> None:
        pred = self.predictions[index]
        self.trace.record(index, pred, label)
        self._error_flags.append(label != pred.label)
        self._current = None
        step = len(self.trace.queried)
        line = {
            "step": step,
            "index": index,
            "confidence": pred.confidence,
            "predicted": pred.label,
            "label": label,
            "is_error": label != pred.label,
            "sdr": self.trace.sdr_curve[-1],
        }
        with self.trace_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(line) + "\n")

    def metrics(self) -> dict:
        curve = list(self.trace.sdr_curve)
        return {
            "step": len(self.trace.queried),
            "errors_found": self.trace.errors_found,
            "sdr": curve[-1] if curve else None,
            "sdr_curve": curve,
            "budget": self.config.budget,
            "status": self.status,
        }


class SessionStore:
    def __init__(self, data_dir: Path):
        self.data_dir = Path(data_dir)
        self.sessions_dir = self.data_dir / "sessions"
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def _artifact(self, relpath: str) -> Path:
        p = (self.data_dir / relpath).resolve()
        if not str(p).startswith(str(self.data_dir.resolve())):
            raise ValueError(f"artifact path {relpath!r} escapes the data directory")
        return p

    def _build(self, session_id: str, config: SessionConfig) -> Session:
        pool_path = self._artifact(config.pool)
        preds_path = self._artifact(config.predictions)
        for p in (pool_path, preds_path):
            if not p.exists():
                raise FileNotFoundError(str(p))
        pool = load_csv(pool_path)
        predictions = read_predictions_csv(preds_path)
        if len(predictions) != len(pool):
            raise ValueError("predictions artifact does not align with the pool")
        records = None
        if config.gad:
            gad_path = self._artifact(config.gad)
            if not gad_path.exists():
                raise FileNotFoundError(str(gad_path))
            records = read_gad_csv(gad_path)
            if len(records) != len(pool):
                raise ValueError("gad artifact does not align with the pool")
        trace_path = self.sessions_dir / f"{session_id}.trace.jsonl"
        return Session(session_id, config, pool, predictions, records, trace_path)

    def create(self, config: SessionConfig) -> Session:
        session_id = uuid.uuid4().hex
        session = self._build(session_id, config)
        header = self.sessions_dir / f"{session_id}.json"
        header.write_text(json.dumps(config.__dict__, sort_keys=True) + "\n", encoding="utf-8")
        session.trace_path.touch()
        with self._lock:
            self._sessions[session_id] = session
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            if session_id in self._sessions:
                return self._sessions[session_id]
        # lazy reload after a restart: rebuild and replay the persisted trace
        header = self.sessions_dir / f"{session_id}.json"
        if not header.exists():
            raise KeyError(session_id)
        config = SessionConfig(**json.loads(header.read_text(encoding="utf-8")))
        session = self._build(session_id, config)
        if session.trace_path.exists():
            for line in session.trace_path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    event = json.loads(line)
                    expected = session.current_query()
                    if expected != event["index"]:
                        raise RuntimeError(
                            f"persisted trace diverges from the planner at step {event['step']}"
                        )
                    session.trace.record(event["index"], session.predictions[event["index"]], event["label"])
                    session._error_flags.append(event["is_error"])
                    session._current = None
        with self._lock:
            self._sessions[session_id] = session
        return session


def create_app(data_dir: str | Path, ui_dir: Optional[str | Path] = None) -> FastAPI:
    store = SessionStore(Path(data_dir))
    app = FastAPI(title="gadsearch labeling service")

    def _get(session_id: str) -> Session:
        try:
            return store.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session")

    @app.post("/sessions", status_code=201)
    def create_session(body: dict):
        try:
            config = SessionConfig(**body)
        except (TypeError, ValueError) as e:
            raise HTTPException(status_code=400, detail=str(e))
        try:
            session = store.create(config)
        except FileNotFoundError as e:
            raise HTTPException(status_code=404, detail=f"missing artifact: {e}")
        except (ValueError, GadSearchError) as e:
            raise HTTPException(status_code=400, detail=str(e))
        return {"session_id": session.id}

    @app.get("/sessions/{session_id}/next")
    def next_query(session_id: str):
        session = _get(session_id)
        with session._lock:
            if session.status == "exhausted":
                raise HTTPException(status_code=410, detail="budget exhausted")
            return session.query_view()

    @app.post("/sessions/{session_id}/label")
    def post_label(session_id: str, body: dict):
        session = _get(session_id)
        try:
            index = int(body["index"])
            label = int(body["label"])
        except (KeyError, TypeError, ValueError):
            raise HTTPException(status_code=422, detail="body must carry integer 'index' and 'label'")
        with session._lock:
            if session.status == "exhausted":
                raise HTTPException(status_code=410, detail="budget exhausted")
            if not 0 <= label < session.config.label_count:
                raise HTTPException(status_code=422, detail=f"unknown label id {label}")
            if index != session.current_query():
                raise HTTPException(status_code=409, detail="stale query index")
            session.apply_label(index, label)
            return session.metrics()

    @app.get("/sessions/{session_id}/metrics")
    def get_metrics(session_id: str):
        session = _get(session_id)
        with session._lock:
            return session.metrics()

    @app.get("/sessions/{session_id}/trace")
    def get_trace(session_id: str):
        session = _get(session_id)
        return PlainTextResponse(
            session.trace_path.read_text(encoding="utf-8"), media_type="application/jsonl"
        )

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    else:
        @app.get("/", response_class=HTMLResponse)
        def index():
            return "<html><body><h1>gadsearch labeling service</h1><p>No UI bundle installed.</p></body></html>"

    return app
