"""HTTP session API: the closed loop driven by a live rater.

One FastAPI app over an in-memory session store. Every batch/rating
exchange appends to a per-session JSON-lines log, and `replay_session`
rebuilds the exact engine state from that log (the engine is deterministic
given corpus, config, and seed, so the log only has to carry the ratings).
The update code is the same `search` module the oracle-driven benchmarks
use; the rating is simply the reward.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import secrets
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .bench import CatalogSpec, make_clustered_catalog
from .core import Catalog, Item, RngHandle
from .search import (
    SearchConfig,
    SessionState,
    apply_rewards,
    init_session,
    sample_batch,
)

__all__ = [
    "ServiceConfig",
    "SessionStore",
    "LiveSession",
    "create_app",
    "load_corpus",
    "probability_entropy",
    "state_hash",
    "replay_session",
    "main",
]

MODES = ("mental-match", "emotion")
IDLE_EVICT_SECONDS = 24 * 3600.0


@dataclass(frozen=True)
class ServiceConfig:
    """Whole-service settings, loaded from one JSON file.

    corpora maps a name to either clustered-catalog parameters or
    {"manifest": path} pointing at a JSON item list
    [{"id", "embedding", "payload"?}, ...].
    """

    data_dir: str = "./stimloop-sessions"
    assets_dir: str | None = None
    corpora: dict = field(default_factory=lambda: {"default": {}})

    @classmethod
    def from_file(cls, path: str) -> "ServiceConfig":
        with open(path) as fh:
            return cls(**json.load(fh))


def load_corpus(name: str, config: ServiceConfig) -> Catalog:
    """Resolve a corpus reference; unknown names raise KeyError."""
    if name not in config.corpora:
        raise KeyError(f"unknown corpus: {name!r}")
    entry = dict(config.corpora[name])
    if "manifest" in entry:
        with open(entry["manifest"]) as fh:
            raw = json.load(fh)
        items = [Item(str(r["id"]), np.asarray(r["embedding"], dtype=np.float64),
                      r.get("payload")) for r in raw]
        return Catalog(items)
    catalog, _ = make_clustered_catalog(CatalogSpec(**entry))
    return catalog


def probability_entropy(probs: np.ndarray) -> float:
    """Shannon entropy in nats; zero-probability entries contribute zero."""
    p = np.asarray(probs, dtype=np.float64)
    nz = p[p > 0.0]
    return float(-(nz * np.log(nz)).sum())


def state_hash(state: SessionState) -> str:
    """Order-sensitive digest of everything the engine evolves.

    Floats are hex-encoded so the hash only matches on bit-identical state.
    """
    doc = {
        "t": state.t,
        "scores": [float(x).hex() for x in state.scores],
        "probs": [float(x).hex() for x in state.probs],
        "history": [[t, i, float(r).hex()] for t, i, r in state.history],
        "best_id": state.best_id,
        "best_reward": float(state.best_reward).hex(),
        "done": state.done,
    }
    blob = json.dumps(doc, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class LiveSession:
    """One rating session: engine state, pending batch, log, lock."""

    def __init__(self, session_id: str, mode: str, catalog: Catalog,
                 config: SearchConfig, seed: int, log_path: Path):
        self.id = session_id
        self.mode = mode
        self.catalog = catalog
        self.seed = seed
        self.state = init_session(catalog, config, RngHandle(seed, stream=0))
        self.pending: list[int] | None = sample_batch(self.state)
        self.mean_ratings: list[float] = []
        self.created = time.time()
        self.updated = self.created
        self.log_path = log_path
        self.lock = threading.Lock()

    def batch_payload(self) -> list[dict]:
        assert self.pending is not None
        return [{"item_id": self.catalog[i].id,
                 "payload": self.catalog[i].payload}
                for i in self.pending]

    def best_payload(self) -> dict | None:
        if self.state.best_id is None:
            return None
        item = self.catalog[self.catalog.index_of(self.state.best_id)]
        return {"item_id": item.id, "payload": item.payload,
                "reward": float(self.state.best_reward)}

    def submit(self, ratings: dict[str, float]) -> dict:
        """Apply one full batch of ratings; caller must hold the lock."""
        if self.state.done or self.pending is None:
            raise ApiError(409, "session-done", "session already finished")
        pending_ids = [self.catalog[i].id for i in self.pending]
        given = set(ratings)
        if given != set(pending_ids):
            raise ApiError(400, "batch-mismatch",
                           "ratings must cover exactly the pending batch")
        values = [ratings[i] for i in pending_ids]
        for v in values:
            if not isinstance(v, (int, float)) or not np.isfinite(v) \
                    or v < 0.0 or v > 1.0:
                raise ApiError(400, "rating-out-of-range",
                               "ratings must be numbers in [0, 1]")
        rewards = [float(v) for v in values]
        apply_rewards(self.state, self.pending, rewards)
        self.mean_ratings.append(float(np.mean(rewards)))
        self.pending = None if self.state.done else sample_batch(self.state)
        self.updated = time.time()
        self._append_log({"event": "ratings", "ratings": ratings})
        out = {
            "done": self.state.done,
            "iteration": self.state.t,
            "mean_ratings": list(self.mean_ratings),
        }
        if self.state.done:
            out["best_item"] = self.best_payload()
        else:
            out["batch"] = self.batch_payload()
        return out

    def snapshot(self) -> dict:
        return {
            "iteration": self.state.t,
            "max_iterations": self.state.config.max_iterations,
            "mean_ratings": list(self.mean_ratings),
            "best_item": self.best_payload(),
            "entropy": probability_entropy(self.state.probs),
            "done": self.state.done,
            "mode": self.mode,
        }

    def _append_log(self, record: dict) -> None:
        with open(self.log_path, "a") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


class SessionStore:
    """In-memory session map plus the JSONL logs under data_dir."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.data_dir = Path(config.data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, LiveSession] = {}
        self._lock = threading.Lock()

    def create(self, mode: str, engine: dict, corpus: str, seed: int) -> LiveSession:
        if mode not in MODES:
            raise ApiError(400, "invalid-mode",
                           f"mode must be one of {', '.join(MODES)}")
        try:
            catalog = load_corpus(corpus, self.config)
        except KeyError as exc:
            raise ApiError(404, "unknown-corpus", str(exc)) from exc
        except (OSError, json.JSONDecodeError, ValueError, TypeError) as exc:
            raise ApiError(400, "bad-corpus", f"corpus unusable: {exc}") from exc
        try:
            cfg = SearchConfig(**engine)
            cfg.validate(len(catalog))
        except (TypeError, ValueError) as exc:
            raise ApiError(400, "bad-config", f"engine config invalid: {exc}") from exc
        session_id = secrets.token_hex(8)
        log_path = self.data_dir / f"{session_id}.jsonl"
        session = LiveSession(session_id, mode, catalog, cfg, int(seed), log_path)
        session._append_log({
            "event": "create", "session_id": session_id, "mode": mode,
            "engine": asdict(cfg), "corpus": corpus, "seed": int(seed),
        })
        with self._lock:
            self._sessions[session_id] = session
        return session

    def get(self, session_id: str) -> LiveSession:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise ApiError(404, "unknown-session",
                           f"no session {session_id!r}")
        return session

    def evict_idle(self, max_idle: float = IDLE_EVICT_SECONDS) -> int:
        """Drop sessions idle beyond max_idle; their logs stay on disk."""
        now = time.time()
        with self._lock:
            stale = [sid for sid, s in self._sessions.items()
                     if now - s.updated > max_idle]
            for sid in stale:
                del self._sessions[sid]
        return len(stale)


def replay_session(log_path: str | Path, config: ServiceConfig) -> SessionState:
    """Rebuild engine state from a session log; determinism does the rest."""
    with open(log_path) as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or lines[0].get("event") != "create":
        raise ValueError("log must start with a create event")
    head = lines[0]
    catalog = load_corpus(head["corpus"], config)
    cfg = SearchConfig(**head["engine"])
    state = init_session(catalog, cfg, RngHandle(int(head["seed"]), stream=0))
    pending = sample_batch(state)
    for record in lines[1:]:
        if record.get("event") != "ratings":
            raise ValueError(f"unexpected log event: {record.get('event')!r}")
        ratings = record["ratings"]
        rewards = [float(ratings[catalog[i].id]) for i in pending]
        apply_rewards(state, pending, rewards)
        pending = None if state.done else sample_batch(state)
    return state


def create_app(config: ServiceConfig):
    """FastAPI app factory; import stays local so the core package works
    without the HTTP extras installed."""
    from fastapi import FastAPI, Request
    from fastapi.responses import JSONResponse

    app = FastAPI(title="stimloop service")
    store = SessionStore(config)
    app.state.store = store

    @app.exception_handler(ApiError)
    async def on_api_error(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status,
                            content={"code": exc.code, "message": exc.message})

    @app.post("/sessions")
    def create_session(body: dict):
        mode = body.get("mode", "")
        engine = body.get("engine", {})
        corpus = body.get("corpus", "default")
        seed = body.get("seed", 0)
        if not isinstance(engine, dict):
            raise ApiError(400, "bad-config", "engine must be an object")
        if not isinstance(seed, int):
            raise ApiError(400, "bad-config", "seed must be an integer")
        session = store.create(mode, engine, corpus, seed)
        return {
            "session_id": session.id,
            "mode": session.mode,
            "batch": session.batch_payload(),
            "iteration": 0,
            "max_iterations": session.state.config.max_iterations,
        }

    @app.get("/sessions/{session_id}/batch")
    def get_batch(session_id: str):
        session = store.get(session_id)
        if session.state.done or session.pending is None:
            return {"done": True, "iteration": session.state.t,
                    "best_item": session.best_payload()}
        return {"done": False, "iteration": session.state.t,
                "batch": session.batch_payload()}

    @app.post("/sessions/{session_id}/ratings")
    def post_ratings(session_id: str, body: dict):
        session = store.get(session_id)
        ratings = body.get("ratings")
        if not isinstance(ratings, dict):
            raise ApiError(400, "batch-mismatch",
                           "body must carry a ratings object")
        if not session.lock.acquire(blocking=False):
            raise ApiError(409, "conflict",
                           "another submission is in progress")
        try:
            return session.submit(ratings)
        finally:
            session.lock.release()

    @app.get("/sessions/{session_id}/state")
    def get_state(session_id: str):
        return store.get(session_id).snapshot()

    if config.assets_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/assets", StaticFiles(directory=config.assets_dir),
                  name="assets")
    return app


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="stimloop-serve",
                                     description="Run the rating service")
    parser.add_argument("--config", metavar="JSON", default=None,
                        help="service config file")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--host", default="127.0.0.1")
    args = parser.parse_args(argv)
    config = (ServiceConfig.from_file(args.config)
              if args.config else ServiceConfig())
    import uvicorn

    uvicorn.run(create_app(config), host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
