"""HTTP surface for live co-writing sessions.

Each session wraps the in-process session engine and adds telemetry
counters plus an append-only JSONL log. Every state-changing request
persists one log line, so restarting the service and replaying a session's
log reconstructs the same document text and counters. Requests for
distinct sessions proceed concurrently; handling within one session is
serialized by a per-session lock.
"""

from __future__ import annotations

import json
import math
import os
import threading
import time
import uuid
from dataclasses import asdict, dataclass, field

from fastapi import FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .core import FeedbackKind, ParadigmLevel, Suggestion, UserFeedback
from .errors import EmptySuggestionError, GatewayError, StaleFeedbackError
from .gateway import LLMGateway
from .session import (
    IdlePolicy,
    Session,
    StageBasis,
    StageEstimate,
    StrategyPolicy,
    idle_threshold,
    stage_for_progress,
)

EVENT_KINDS = ("feedback", "typed_text", "deletion", "focus_change", "active_time")


@dataclass
class Telemetry:
    """Interaction counters a user study would tabulate."""

    shown: int = 0
    accepted: int = 0
    modified: int = 0
    rejected: int = 0
    window_switches: int = 0
    active_ms: int = 0

    def check(self) -> None:
        values = (
            self.shown,
            self.accepted,
            self.modified,
            self.rejected,
            self.window_switches,
            self.active_ms,
        )
        if any(v < 0 for v in values):
            raise ValueError("telemetry counters must be non-negative")
        if self.accepted + self.modified + self.rejected > self.shown:
            raise ValueError("decisions cannot outnumber suggestions shown")

    @property
    def acceptance_rate(self) -> float | None:
        return self.accepted / self.shown if self.shown else None


@dataclass
class ApiSession:
    """One served session: engine state, counters, and its log file."""

    id: str
    session: Session
    log_path: str
    created_at: int
    telemetry: Telemetry = field(default_factory=Telemetry)
    lock: threading.Lock = field(default_factory=threading.Lock)


@dataclass(frozen=True)
class ServiceConfig:
    """Serving knobs; the gateway carries its own backend config."""

    data_dir: str
    completion_model: str | None = None
    temperature: float = 0.0
    target_length: int | None = None


def _now_ms() -> int:
    return int(time.time() * 1000)


def _suggestion_to_dict(suggestion: Suggestion) -> dict:
    return {
        "suggestion_id": suggestion.id,
        "content": suggestion.content,
        "paradigm": suggestion.paradigm.name,
        "prompt_hash": suggestion.prompt_hash,
        "created_at": suggestion.created_at,
    }


def _suggestion_from_dict(data: dict) -> Suggestion:
    return Suggestion(
        id=data["suggestion_id"],
        content=data["content"],
        paradigm=ParadigmLevel[data["paradigm"]],
        prompt_hash=data["prompt_hash"],
        created_at=data["created_at"],
    )


class SessionStore:
    """In-memory registry backed by per-session JSONL logs."""

    def __init__(
        self,
        config: ServiceConfig,
        *,
        idle_policy: IdlePolicy | None = None,
        strategy_policy: StrategyPolicy | None = None,
    ):
        self.config = config
        self.idle_policy = idle_policy if idle_policy is not None else IdlePolicy()
        self.strategy_policy = strategy_policy if strategy_policy is not None else StrategyPolicy()
        self._sessions: dict[str, ApiSession] = {}
        self._registry_lock = threading.Lock()
        os.makedirs(config.data_dir, exist_ok=True)

    def _log_path(self, session_id: str) -> str:
        return os.path.join(self.config.data_dir, f"{session_id}.jsonl")

    def _build(self, session_id: str, paradigm: ParadigmLevel, initial_text: str, created_at: int) -> ApiSession:
        session = Session(
            paradigm,
            initial_text,
            idle_policy=self.idle_policy,
            strategy_policy=self.strategy_policy,
            target_length=self.config.target_length,
            created_at=created_at,
        )
        return ApiSession(
            id=session_id,
            session=session,
            log_path=self._log_path(session_id),
            created_at=created_at,
        )

    def create(self, paradigm: ParadigmLevel, initial_text: str) -> ApiSession:
        session_id = uuid.uuid4().hex[:12]
        created_at = _now_ms()
        api = self._build(session_id, paradigm, initial_text, created_at)
        append_log_line(
            api.log_path,
            {
                "type": "created",
                "session_id": session_id,
                "paradigm": paradigm.name,
                "initial_text": initial_text,
                "created_at": created_at,
            },
        )
        with self._registry_lock:
            self._sessions[session_id] = api
        return api

    def get(self, session_id: str) -> ApiSession:
        with self._registry_lock:
            api = self._sessions.get(session_id)
        if api is not None:
            return api
        api = self._restore(session_id)
        if api is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        with self._registry_lock:
            # another thread may have restored it first; keep the winner
            api = self._sessions.setdefault(session_id, api)
        return api

    def _restore(self, session_id: str) -> ApiSession | None:
        """Rebuild a session by replaying its persisted log."""
        path = self._log_path(session_id)
        if not os.path.exists(path):
            return None
        api: ApiSession | None = None
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                entry = json.loads(line)
                if api is None:
                    if entry.get("type") != "created":
                        raise ValueError(f"session log {path} does not start with creation")
                    api = self._build(
                        session_id,
                        ParadigmLevel[entry["paradigm"]],
                        entry["initial_text"],
                        entry["created_at"],
                    )
                else:
                    _replay_entry(api, entry)
        if api is not None:
            api.telemetry.check()
        return api


def append_log_line(path: str, entry: dict) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(entry, ensure_ascii=False, sort_keys=True))
        fh.write("\n")


def read_log(path: str) -> list[dict]:
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                entries.append(json.loads(line))
    return entries


def _apply_feedback(api: ApiSession, entry: dict) -> None:
    pending = api.session.pending_suggestion
    if pending is None or pending.id != entry["suggestion_id"]:
        raise StaleFeedbackError(
            f"suggestion {entry['suggestion_id']!r} is not the pending proposal"
        )
    kind = FeedbackKind(entry["kind"])
    feedback = UserFeedback(
        kind=kind,
        decided_at=entry["decided_at"],
        decision_ms=entry["decision_ms"],
        final_text=entry.get("final_text", ""),
    )
    api.session.handle_feedback(pending, feedback)
    if kind is FeedbackKind.ACCEPT:
        api.telemetry.accepted += 1
    elif kind is FeedbackKind.MODIFY:
        api.telemetry.modified += 1
    else:
        api.telemetry.rejected += 1


def _replay_entry(api: ApiSession, entry: dict) -> None:
    """Re-apply one persisted log line without touching disk or gateway."""
    entry_type = entry["type"]
    if entry_type == "suggestion":
        api.session.pending_suggestion = _suggestion_from_dict(entry["suggestion"])
        api.telemetry.shown += 1
    elif entry_type == "feedback":
        _apply_feedback(api, entry)
    elif entry_type == "typed_text":
        api.session.record_typed_text(entry["text"])
    elif entry_type == "deletion":
        api.session.record_deletion(entry["offset"], entry["removed"])
    elif entry_type == "focus_change":
        api.telemetry.window_switches += 1
    elif entry_type == "active_time":
        api.telemetry.active_ms += entry["active_ms"]
    else:
        raise ValueError(f"unknown log entry type {entry_type!r}")


class CreateSessionBody(BaseModel):
    paradigm: str = "L1"
    initial_text: str = ""


class SuggestionBody(BaseModel):
    idle_ms: float = 0.0
    progress: float | None = None  # client hint; server still applies its policy


class EventBody(BaseModel):
    type: str
    suggestion_id: str | None = None
    kind: str | None = None
    final_text: str = ""
    decision_ms: int | None = None
    text: str | None = None
    offset: int | None = None
    removed: str | None = None
    active_ms: int | None = None


def _session_view(api: ApiSession, store: SessionStore) -> dict:
    session = api.session
    stage = session.stage()
    pending = session.pending_suggestion
    threshold_s = idle_threshold(stage, store.idle_policy, session.paradigm)
    return {
        "session_id": api.id,
        "paradigm": session.paradigm.name,
        "text": session.live_text,
        "pending": _suggestion_to_dict(pending) if pending is not None else None,
        "stage": stage.stage.value,
        "progress": stage.progress,
        # inf (the on-demand paradigm never fires proactively) is not JSON
        "idle_threshold_s": None if math.isinf(threshold_s) else threshold_s,
        "telemetry": {
            **asdict(api.telemetry),
            "acceptance_rate": api.telemetry.acceptance_rate,
        },
        "created_at": api.created_at,
    }


def create_app(
    gateway: LLMGateway,
    config: ServiceConfig,
    *,
    idle_policy: IdlePolicy | None = None,
    strategy_policy: StrategyPolicy | None = None,
) -> FastAPI:
    """Wire the session API around a gateway and a data directory."""
    store = SessionStore(config, idle_policy=idle_policy, strategy_policy=strategy_policy)
    app = FastAPI(title="co-writing session API")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.store = store

    def _propose(api: ApiSession) -> Response | dict:
        try:
            suggestion = api.session.propose(
                gateway,
                model=config.completion_model,
                temperature=config.temperature,
                now=_now_ms(),
            )
        except EmptySuggestionError:
            return Response(status_code=204)
        except GatewayError as exc:
            raise HTTPException(status_code=502, detail=f"completion backend failed: {exc}")
        api.telemetry.shown += 1
        append_log_line(
            api.log_path,
            {"type": "suggestion", "suggestion": _suggestion_to_dict(suggestion)},
        )
        return _suggestion_to_dict(suggestion)

    @app.post("/sessions")
    def create_session(body: CreateSessionBody) -> dict:
        try:
            paradigm = ParadigmLevel[body.paradigm.upper()]
        except KeyError:
            raise HTTPException(status_code=400, detail=f"unknown paradigm {body.paradigm!r}")
        api = store.create(paradigm, body.initial_text)
        return {"session_id": api.id}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        api = store.get(session_id)
        with api.lock:
            return _session_view(api, store)

    @app.post("/sessions/{session_id}/suggestion")
    def request_suggestion(session_id: str, body: SuggestionBody):
        api = store.get(session_id)
        with api.lock:
            session = api.session
            if session.paradigm is ParadigmLevel.L0:
                raise HTTPException(
                    status_code=400,
                    detail="L0 sessions only serve explicit suggestion:demand requests",
                )
            if session.pending_suggestion is not None:
                return Response(status_code=204)
            if body.progress is not None and not 0.0 <= body.progress <= 1.0:
                raise HTTPException(status_code=400, detail="progress must lie in [0, 1]")
            stage = session.stage()
            if body.progress is not None:
                stage = StageEstimate(
                    stage_for_progress(body.progress), body.progress, StageBasis.HEURISTIC
                )
            threshold_s = idle_threshold(stage, store.idle_policy, session.paradigm)
            if body.idle_ms / 1000.0 < threshold_s:
                return Response(status_code=204)
            return _propose(api)

    @app.post("/sessions/{session_id}/suggestion:demand")
    def demand_suggestion(session_id: str):
        api = store.get(session_id)
        with api.lock:
            pending = api.session.pending_suggestion
            if pending is not None:
                return _suggestion_to_dict(pending)
            return _propose(api)

    @app.post("/sessions/{session_id}/events")
    def append_event(session_id: str, body: EventBody) -> dict:
        api = store.get(session_id)
        event_type = body.type.replace("-", "_")
        if event_type not in EVENT_KINDS:
            raise HTTPException(status_code=400, detail=f"unknown event type {body.type!r}")
        with api.lock:
            now = _now_ms()
            if event_type == "feedback":
                entry = _feedback_entry(api, body, now)
            elif event_type == "typed_text":
                if body.text is None:
                    raise HTTPException(status_code=400, detail="typed_text needs text")
                api.session.record_typed_text(body.text)
                entry = {"type": "typed_text", "text": body.text, "at": now}
            elif event_type == "deletion":
                if body.offset is None or body.removed is None:
                    raise HTTPException(status_code=400, detail="deletion needs offset and removed")
                try:
                    api.session.record_deletion(body.offset, body.removed)
                except ValueError as exc:
                    raise HTTPException(status_code=400, detail=str(exc))
                entry = {"type": "deletion", "offset": body.offset, "removed": body.removed, "at": now}
            elif event_type == "focus_change":
                api.telemetry.window_switches += 1
                entry = {"type": "focus_change", "at": now}
            else:
                if body.active_ms is None or body.active_ms < 0:
                    raise HTTPException(status_code=400, detail="active_time needs active_ms >= 0")
                api.telemetry.active_ms += body.active_ms
                entry = {"type": "active_time", "active_ms": body.active_ms, "at": now}
            append_log_line(api.log_path, entry)
            return {"status": "ok", "text": api.session.live_text}

    def _feedback_entry(api: ApiSession, body: EventBody, now: int) -> dict:
        if body.suggestion_id is None or body.kind is None:
            raise HTTPException(status_code=400, detail="feedback needs suggestion_id and kind")
        try:
            FeedbackKind(body.kind)
        except ValueError:
            raise HTTPException(status_code=400, detail=f"unknown feedback kind {body.kind!r}")
        pending = api.session.pending_suggestion
        decision_ms = body.decision_ms
        if decision_ms is None:
            decision_ms = max(0, now - pending.created_at) if pending is not None else 0
        entry = {
            "type": "feedback",
            "suggestion_id": body.suggestion_id,
            "kind": body.kind,
            "final_text": body.final_text,
            "decision_ms": decision_ms,
            "decided_at": now,
        }
        try:
            _apply_feedback(api, entry)
        except StaleFeedbackError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return entry

    @app.get("/sessions/{session_id}/log")
    def get_log(session_id: str) -> dict:
        api = store.get(session_id)
        with api.lock:
            return {"events": read_log(api.log_path)}

    return app
