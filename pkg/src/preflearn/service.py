"""Live elicitation sessions over HTTP+JSON.

A session owns a belief against an ingested catalog, serves adaptively
chosen questions, applies human responses, and reports its state. Every
session is persisted as an append-only JSON Lines event log; replaying the
log against the stored config reproduces the belief exactly, so the log is
the complete state.

Endpoints:
    POST /catalogs                     body: catalog JSON Lines
    POST /sessions                     body: session config JSON
    GET  /sessions/{id}/question
    POST /sessions/{id}/response       body: {"token": ..., "choice": 1..m}
    GET  /sessions/{id}/state
Errors are JSON {"code": ..., "message": ...}.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from .belief import (
    BeliefState,
    PosteriorSampleSet,
    Question,
    differential_entropy_estimate,
    gaussian_entropy_bits,
    hit_and_run_sample,
    predictive_distribution,
    update,
)
from .catalog import Catalog, parse_catalog_lines
from .channel import channel_equation, channel_from_dict
from .errors import IngestionError, InvalidArgumentError, PreflearnError
from .selection import (
    POLICY_ENTROPY_PURSUIT,
    PolicyConfig,
    entropy_pursuit_select,
    knowledge_gradient_select,
)
from .simulation import derive_rng, derive_seed

DATA_DIR_ENV = "PREFLEARN_DATA"

_STREAM_DECISION = 3
_STREAM_MCMC = 4


class NotFoundError(PreflearnError):
    pass


class ConflictError(PreflearnError):
    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def parse_prior(spec: dict, d: int) -> tuple[np.ndarray, np.ndarray]:
    mean_spec = spec.get("mean", 0.0)
    mean = np.full(d, float(mean_spec)) if np.isscalar(mean_spec) else np.asarray(mean_spec, float)
    cov_spec = spec.get("covariance", {"scale": 1.0})
    if isinstance(cov_spec, dict):
        cov = float(cov_spec.get("scale", 1.0)) * np.eye(d)
    else:
        cov = np.asarray(cov_spec, dtype=float)
    if mean.shape != (d,) or cov.shape != (d, d):
        raise InvalidArgumentError(f"prior does not match catalog dimension {d}")
    return mean, cov


@dataclass
class _Session:
    session_id: str
    config: dict
    catalog_ref: str
    catalog: Catalog
    policy: PolicyConfig
    seed: int
    belief: BeliefState
    samples: PosteriorSampleSet
    lock: threading.RLock
    step: int = 0  # completed responses
    pending: dict | None = None  # served, unanswered question event
    acks: dict | None = None  # token -> ack payload
    entropy_trajectory: list | None = None

    def __post_init__(self):
        if self.acks is None:
            self.acks = {}
        if self.entropy_trajectory is None:
            self.entropy_trajectory = [
                {"step": 0, "bits": gaussian_entropy_bits(self.belief.prior_covariance), "se": 0.0}
            ]


class ElicitationService:
    """Catalog store plus session lifecycle, independent of the transport."""

    def __init__(self, data_dir: str):
        self.data_dir = Path(data_dir)
        self.catalog_dir = self.data_dir / "catalogs"
        self.session_dir = self.data_dir / "sessions"
        self.catalog_dir.mkdir(parents=True, exist_ok=True)
        self.session_dir.mkdir(parents=True, exist_ok=True)
        self._store_lock = threading.RLock()
        self._sessions: dict[str, _Session] = {}
        self._catalogs: dict[str, Catalog] = {}

    # -- catalogs -----------------------------------------------------------

    def ingest_catalog(self, text: str) -> dict:
        """Validate and store a JSON Lines catalog; returns its content ref."""
        catalog = parse_catalog_lines(text.splitlines())
        ref = "sha256-" + hashlib.sha256(text.encode("utf-8")).hexdigest()[:32]
        path = self.catalog_dir / f"{ref}.jsonl"
        if not path.exists():
            tmp = path.with_suffix(".tmp")
            tmp.write_text(text, encoding="utf-8")
            os.replace(tmp, path)
        with self._store_lock:
            self._catalogs[ref] = catalog
        return {"catalog_ref": ref, "count": len(catalog), "d": catalog.d}

    def _load_catalog(self, ref: str) -> Catalog:
        with self._store_lock:
            if ref in self._catalogs:
                return self._catalogs[ref]
        path = self.catalog_dir / f"{ref}.jsonl"
        if not path.exists():
            raise NotFoundError(f"unknown catalog {ref!r}")
        with open(path, "r", encoding="utf-8") as handle:
            catalog = parse_catalog_lines(handle)
        with self._store_lock:
            self._catalogs[ref] = catalog
        return catalog

    # -- session plumbing ----------------------------------------------------

    def _log_path(self, session_id: str) -> Path:
        return self.session_dir / f"{session_id}.jsonl"

    def _append_event(self, session_id: str, event: dict) -> None:
        with open(self._log_path(session_id), "a", encoding="utf-8") as handle:
            handle.write(json.dumps(event) + "\n")
            handle.flush()
            os.fsync(handle.fileno())

    def _resample(self, session: _Session, step: int, warm=None) -> PosteriorSampleSet:
        return hit_and_run_sample(
            session.belief,
            session.policy.decision_samples,
            burn_in=session.policy.burn_in,
            thinning=session.policy.thinning,
            seed=derive_seed(session.seed, step, _STREAM_MCMC),
            initial=warm,
        )

    def create_session(self, config: dict) -> dict:
        catalog_ref = config.get("catalog_ref")
        if not catalog_ref:
            raise InvalidArgumentError("session config needs catalog_ref")
        catalog = self._load_catalog(catalog_ref)
        policy = PolicyConfig.from_dict(config.get("policy", {"policy": POLICY_ENTROPY_PURSUIT}))
        channel = channel_from_dict(config["channel"])
        if channel.m != policy.m:
            raise InvalidArgumentError("channel size does not match policy question size")
        mean, cov = parse_prior(config.get("prior", {}), catalog.d)
        seed = int(config.get("seed", 0))
        belief = BeliefState(prior_mean=mean, prior_covariance=cov, channel=channel)
        session_id = uuid.uuid4().hex[:16]
        session = _Session(
            session_id=session_id,
            config=config,
            catalog_ref=catalog_ref,
            catalog=catalog,
            policy=policy,
            seed=seed,
            belief=belief,
            samples=self._resample_initial(belief, policy, seed),
            lock=threading.RLock(),
        )
        with self._store_lock:
            self._sessions[session_id] = session
        self._append_event(
            session_id,
            {"type": "created", "at": _now(), "config": config, "catalog_ref": catalog_ref},
        )
        return {
            "session_id": session_id,
            "step": 0,
            "entropy_bits": session.entropy_trajectory[0]["bits"],
            "catalog_count": len(catalog),
            "d": catalog.d,
        }

    def _resample_initial(self, belief, policy, seed) -> PosteriorSampleSet:
        return hit_and_run_sample(
            belief,
            policy.decision_samples,
            burn_in=policy.burn_in,
            thinning=policy.thinning,
            seed=derive_seed(seed, 0, _STREAM_MCMC),
        )

    def _get_session(self, session_id: str) -> _Session:
        with self._store_lock:
            session = self._sessions.get(session_id)
        if session is None:
            session = self._replay_session(session_id)
        return session

    def _replay_session(self, session_id: str) -> _Session:
        """Rebuild a session from its event log (lazy crash recovery)."""
        path = self._log_path(session_id)
        if not path.exists():
            raise NotFoundError(f"unknown session {session_id!r}")
        with open(path, "r", encoding="utf-8") as handle:
            events = [json.loads(line) for line in handle if line.strip()]
        if not events or events[0]["type"] != "created":
            raise NotFoundError(f"session log for {session_id!r} is unreadable")
        config = events[0]["config"]
        catalog = self._load_catalog(events[0]["catalog_ref"])
        policy = PolicyConfig.from_dict(config.get("policy", {"policy": POLICY_ENTROPY_PURSUIT}))
        channel = channel_from_dict(config["channel"])
        mean, cov = parse_prior(config.get("prior", {}), catalog.d)
        seed = int(config.get("seed", 0))
        belief = BeliefState(prior_mean=mean, prior_covariance=cov, channel=channel)
        session = _Session(
            session_id=session_id,
            config=config,
            catalog_ref=events[0]["catalog_ref"],
            catalog=catalog,
            policy=policy,
            seed=seed,
            belief=belief,
            samples=self._resample_initial(belief, policy, seed),
            lock=threading.RLock(),
        )
        id_to_index = {a.id: i for i, a in enumerate(catalog.alternatives)}
        for event in events[1:]:
            if event["type"] == "question":
                session.pending = event
            elif event["type"] == "response":
                pending = session.pending
                if pending is None or pending["token"] != event["token"]:
                    raise PreflearnError("session log interleaves responses and questions")
                question = catalog.question([id_to_index[i] for i in pending["alt_ids"]])
                from .channel import PredictiveDistribution

                u_hat = PredictiveDistribution(np.asarray(pending["u_hat"], dtype=float))
                session.belief = update(session.belief, question, int(event["choice"]), u_hat)
                session.step += 1
                session.samples = self._resample(
                    session, session.step, warm=session.samples.samples
                )
                session.acks[event["token"]] = event["ack"]
                session.entropy_trajectory.append(
                    {
                        "step": session.step,
                        "bits": event["ack"]["entropy_bits"],
                        "se": event["ack"]["entropy_se"],
                    }
                )
                session.pending = None
        with self._store_lock:
            self._sessions[session_id] = session
        return session

    # -- session operations ---------------------------------------------------

    def next_question(self, session_id: str) -> dict:
        session = self._get_session(session_id)
        with session.lock:
            if session.pending is not None:
                return self._question_payload(session, session.pending)
            step = session.step + 1
            rng = derive_rng(session.seed, step, _STREAM_DECISION)
            if session.policy.policy == POLICY_ENTROPY_PURSUIT:
                question, u_hat, score = entropy_pursuit_select(
                    session.belief, session.samples, session.catalog, session.policy, rng
                )
            else:
                question, _ = knowledge_gradient_select(
                    session.belief, session.samples, session.catalog, session.policy, rng
                )
                u_hat = predictive_distribution(session.samples, question)
                score = channel_equation(u_hat, session.belief.channel)
            event = {
                "type": "question",
                "at": _now(),
                "step": step,
                "token": f"q{step}",
                "alt_ids": [a.id for a in question.alternatives],
                "u_hat": u_hat.weights.tolist(),
                "phi_bits": score,
            }
            self._append_event(session_id, event)
            session.pending = event
            return self._question_payload(session, event)

    def _question_payload(self, session: _Session, event: dict) -> dict:
        id_to_alt = {a.id: a for a in session.catalog.alternatives}
        return {
            "session_id": session.session_id,
            "step": event["step"],
            "question_token": event["token"],
            "alternatives": [
                {
                    "id": alt_id,
                    "title": id_to_alt[alt_id].title,
                    "features": id_to_alt[alt_id].features.tolist(),
                }
                for alt_id in event["alt_ids"]
            ],
        }

    def submit_response(self, session_id: str, token: str, choice: int) -> dict:
        session = self._get_session(session_id)
        with session.lock:
            if token in session.acks:
                return session.acks[token]  # idempotent replay
            pending = session.pending
            if pending is None or pending["token"] != token:
                raise ConflictError(
                    f"token {token!r} does not match the pending question",
                    payload=self._question_payload(session, pending) if pending else None,
                )
            m = len(pending["alt_ids"])
            choice = int(choice)
            if not 1 <= choice <= m:
                raise InvalidArgumentError(f"choice must be in 1..{m}")
            id_to_index = {a.id: i for i, a in enumerate(session.catalog.alternatives)}
            question = session.catalog.question([id_to_index[i] for i in pending["alt_ids"]])
            from .channel import PredictiveDistribution

            u_hat = PredictiveDistribution(np.asarray(pending["u_hat"], dtype=float))
            belief = update(session.belief, question, choice, u_hat)
            step = session.step + 1
            samples = self._resample_for(session, belief, step)
            estimate = differential_entropy_estimate(belief, samples)
            ranking = self._ranking(session.catalog, samples)
            ack = {
                "session_id": session_id,
                "step": step,
                "question_token": token,
                "entropy_bits": estimate.bits,
                "entropy_se": estimate.stderr,
                "top_alternatives": ranking[:10],
            }
            self._append_event(
                session_id,
                {"type": "response", "at": _now(), "token": token, "choice": choice, "ack": ack},
            )
            session.belief = belief
            session.samples = samples
            session.step = step
            session.pending = None
            session.acks[token] = ack
            session.entropy_trajectory.append(
                {"step": step, "bits": estimate.bits, "se": estimate.stderr}
            )
            return ack

    def _resample_for(self, session: _Session, belief: BeliefState, step: int) -> PosteriorSampleSet:
        return hit_and_run_sample(
            belief,
            session.policy.decision_samples,
            burn_in=session.policy.burn_in,
            thinning=session.policy.thinning,
            seed=derive_seed(session.seed, step, _STREAM_MCMC),
            initial=session.samples.samples,
        )

    @staticmethod
    def _ranking(catalog: Catalog, samples: PosteriorSampleSet) -> list[dict]:
        posterior_mean = samples.samples.mean(axis=0)
        scores = catalog.features @ posterior_mean
        order = np.argsort(-scores, kind="stable")
        return [
            {
                "id": catalog.alternatives[i].id,
                "title": catalog.alternatives[i].title,
                "score": float(scores[i]),
            }
            for i in order
        ]

    def session_state(self, session_id: str) -> dict:
        session = self._get_session(session_id)
        with session.lock:
            points = session.samples.samples
            projection = points[:: max(1, points.shape[0] // 500), :2]
            with open(self._log_path(session_id), "r", encoding="utf-8") as handle:
                events = [json.loads(line) for line in handle if line.strip()]
            return {
                "session_id": session_id,
                "step": session.step,
                "entropy": list(session.entropy_trajectory),
                "ranking": self._ranking(session.catalog, session.samples),
                "projection": projection.tolist(),
                "events": events,
                "pending_token": session.pending["token"] if session.pending else None,
            }


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------

_ROUTE_QUESTION = re.compile(r"^/sessions/([0-9a-f]+)/question$")
_ROUTE_RESPONSE = re.compile(r"^/sessions/([0-9a-f]+)/response$")
_ROUTE_STATE = re.compile(r"^/sessions/([0-9a-f]+)/state$")

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "application/javascript",
    ".css": "text/css",
    ".map": "application/json",
    ".svg": "image/svg+xml",
    ".ico": "image/x-icon",
}


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value)}")


def _error_status(exc: Exception) -> tuple[int, str]:
    if isinstance(exc, NotFoundError):
        return 404, "not_found"
    if isinstance(exc, ConflictError):
        return 409, "conflict"
    if isinstance(exc, IngestionError):
        return 400, "ingestion_error"
    if isinstance(exc, InvalidArgumentError):
        return 400, "invalid_argument"
    return 500, "internal"


class _Handler(BaseHTTPRequestHandler):
    service: ElicitationService = None  # set by make_server
    ui_dir: Path | None = None

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload, default=_jsonable).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def do_OPTIONS(self):  # CORS preflight for cross-origin UI deployments
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Access-Control-Max-Age", "600")
        self.end_headers()

    def _send_error_json(self, exc: Exception) -> None:
        status, code = _error_status(exc)
        payload = {"code": code, "message": str(exc)}
        if isinstance(exc, ConflictError) and exc.payload is not None:
            payload["pending_question"] = exc.payload
        if isinstance(exc, IngestionError):
            payload["line_numbers"] = list(exc.line_numbers)
        self._send_json(status, payload)

    def _read_body(self) -> bytes:
        length = int(self.headers.get("Content-Length", 0))
        return self.rfile.read(length)

    def do_POST(self):
        try:
            if self.path == "/catalogs":
                text = self._read_body().decode("utf-8")
                self._send_json(201, self.service.ingest_catalog(text))
                return
            if self.path == "/sessions":
                config = json.loads(self._read_body().decode("utf-8"))
                self._send_json(201, self.service.create_session(config))
                return
            match = _ROUTE_RESPONSE.match(self.path)
            if match:
                body = json.loads(self._read_body().decode("utf-8"))
                ack = self.service.submit_response(
                    match.group(1), body.get("token"), body.get("choice")
                )
                self._send_json(200, ack)
                return
            self._send_json(404, {"code": "not_found", "message": f"no route {self.path}"})
        except Exception as exc:  # noqa: BLE001 - mapped to HTTP statuses
            self._send_error_json(exc)

    def do_GET(self):
        try:
            match = _ROUTE_QUESTION.match(self.path)
            if match:
                self._send_json(200, self.service.next_question(match.group(1)))
                return
            match = _ROUTE_STATE.match(self.path)
            if match:
                self._send_json(200, self.service.session_state(match.group(1)))
                return
            if self.path == "/healthz":
                self._send_json(200, {"status": "ok"})
                return
            if self.ui_dir is not None and self._serve_static():
                return
            self._send_json(404, {"code": "not_found", "message": f"no route {self.path}"})
        except Exception as exc:  # noqa: BLE001
            self._send_error_json(exc)

    def _serve_static(self) -> bool:
        rel = self.path.split("?")[0].lstrip("/") or "index.html"
        target = (self.ui_dir / rel).resolve()
        if not str(target).startswith(str(self.ui_dir.resolve())) or not target.is_file():
            return False
        body = target.read_bytes()
        self.send_response(200)
        self.send_header(
            "Content-Type", _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        )
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)
        return True


def make_server(addr: str, data_dir: str, ui_dir: str | None = None) -> ThreadingHTTPServer:
    """Build (but do not start) the HTTP server bound to addr 'host:port'."""
    host, _, port = addr.rpartition(":")
    service = ElicitationService(data_dir)
    handler = type(
        "BoundHandler",
        (_Handler,),
        {"service": service, "ui_dir": Path(ui_dir) if ui_dir else None},
    )
    return ThreadingHTTPServer((host or "127.0.0.1", int(port)), handler)
