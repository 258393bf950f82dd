"""HTTP + event-stream service around per-channel engine sessions.

One ProjectState per channel; turns are mutually exclusive per channel
(409 when one is already in flight); every completed turn is broadcast to
the channel's SSE subscribers as a structured trace record.
"""

from __future__ import annotations

import asyncio
import json
import logging
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional

from starlette.applications import Starlette
from starlette.middleware import Middleware
from starlette.middleware.cors import CORSMiddleware
from starlette.requests import Request
from starlette.responses import JSONResponse, Response, StreamingResponse
from starlette.routing import Route

from .errors import MalformedMessage
from .model import format_wire_time
from .orchestrator import Engine, EngineConfig

logger = logging.getLogger(__name__)

CHANNEL_RE = re.compile(r"^[A-Za-z0-9_-]{1,64}$")


@dataclass
class ServiceSession:
    """One channel: its engine (which owns the ProjectState), the turn
    mutex, and the live event subscribers."""

    channel: str
    engine: Engine
    lock: asyncio.Lock = field(default_factory=asyncio.Lock)
    subscribers: set = field(default_factory=set)

    def broadcast(self, record: dict) -> None:
        for queue in list(self.subscribers):
            queue.put_nowait(record)


class SessionStore:
    def __init__(self, config: EngineConfig):
        self.config = config
        self.sessions: dict[str, ServiceSession] = {}

    def get(self, channel: str) -> Optional[ServiceSession]:
        if not CHANNEL_RE.match(channel or ""):
            return None
        session = self.sessions.get(channel)
        if session is None:
            engine = self.config.build(channel=channel)
            session = ServiceSession(channel=channel, engine=engine)
            engine.listeners.append(session.broadcast)
            self.sessions[channel] = session
        return session


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=status)


def _state_view(engine: Engine) -> dict:
    state = engine.state
    return {
        "channel": engine.channel,
        "team": [m.to_dict() for m in state.team],
        "backlog": [t.to_dict() for t in state.backlog],
        "workflow": state.workflow.to_dict() if state.workflow is not None else None,
        "history_length": len(state.history),
        "memory_size": len(state.memory),
        "turns": len(engine.turn_records),
    }


def build_app(config: Optional[EngineConfig] = None, *, token: Optional[str] = None) -> Starlette:
    """Assemble the service. `token`, when set, turns on static bearer
    auth for every endpoint."""
    store = SessionStore(config if config is not None else EngineConfig())

    def check_auth(request: Request) -> Optional[JSONResponse]:
        if token is None:
            return None
        supplied = request.headers.get("authorization", "")
        if supplied == f"Bearer {token}":
            return None
        return _error(401, "missing or invalid bearer token")

    def session_of(request: Request) -> Optional[ServiceSession]:
        return store.get(request.path_params["channel"])

    async def post_message(request: Request) -> Response:
        denied = check_auth(request)
        if denied is not None:
            return denied
        session = session_of(request)
        if session is None:
            return _error(404, "unknown channel")
        try:
            payload = await request.json()
        except Exception:
            return _error(400, "body must be JSON")
        if not isinstance(payload, dict):
            return _error(400, "body must be a JSON object")
        user = payload.get("user")
        text = payload.get("text", payload.get("message"))
        if not isinstance(user, str) or not user.strip():
            return _error(400, "field 'user' is required")
        if not isinstance(text, str) or not text.strip():
            return _error(400, "field 'text' is required")
        time = payload.get("time") or format_wire_time(datetime.now(timezone.utc))
        if session.lock.locked():
            return _error(409, "a turn is already in flight for this channel")
        async with session.lock:
            try:
                outcome = await asyncio.to_thread(
                    session.engine.process, {"user": user, "message": text, "time": time}
                )
            except MalformedMessage as exc:
                return _error(400, str(exc))
        return JSONResponse(
            {
                "turn": len(session.engine.turn_records) - 1,
                "responses": outcome.responses,
                "emitted": outcome.emitted.to_dicts(),
            }
        )

    async def get_state(request: Request) -> Response:
        denied = check_auth(request)
        if denied is not None:
            return denied
        session = session_of(request)
        if session is None:
            return _error(404, "unknown channel")
        return JSONResponse(_state_view(session.engine))

    async def get_history(request: Request) -> Response:
        denied = check_auth(request)
        if denied is not None:
            return denied
        session = session_of(request)
        if session is None:
            return _error(404, "unknown channel")
        raw_n = request.query_params.get("n", "50")
        try:
            n = int(raw_n)
            if n < 0:
                raise ValueError
        except ValueError:
            return _error(400, "query parameter 'n' must be a nonnegative integer")
        history = session.engine.state.history[-n:] if n else []
        return JSONResponse(
            {
                "channel": session.channel,
                "messages": [
                    {"seq": m.seq, "user": m.user, "time": m.wire_time(), "message": m.content}
                    for m in history
                ],
            }
        )

    async def get_events(request: Request) -> Response:
        denied = check_auth(request)
        if denied is not None:
            return denied
        session = session_of(request)
        if session is None:
            return _error(404, "unknown channel")
        replay = request.query_params.get("replay") in ("1", "true", "yes")
        queue: asyncio.Queue = asyncio.Queue()
        backlog = list(session.engine.trace_records) if replay else []
        session.subscribers.add(queue)

        async def stream():
            try:
                for record in backlog:
                    yield f"data: {json.dumps(record, ensure_ascii=False)}\n\n".encode()
                while True:
                    try:
                        record = await asyncio.wait_for(queue.get(), timeout=15.0)
                    except asyncio.TimeoutError:
                        yield b": keepalive\n\n"
                        continue
                    yield f"data: {json.dumps(record, ensure_ascii=False)}\n\n".encode()
            finally:
                session.subscribers.discard(queue)

        return StreamingResponse(stream(), media_type="text/event-stream")

    routes = [
        Route("/v1/channels/{channel}/messages", post_message, methods=["POST"]),
        Route("/v1/channels/{channel}/state", get_state, methods=["GET"]),
        Route("/v1/channels/{channel}/history", get_history, methods=["GET"]),
        Route("/v1/channels/{channel}/events", get_events, methods=["GET"]),
    ]
    middleware = [
        Middleware(
            CORSMiddleware,
            allow_origins=["*"],
            allow_methods=["GET", "POST"],
            allow_headers=["authorization", "content-type"],
        )
    ]
    app = Starlette(routes=routes, middleware=middleware)
    app.state.store = store
    return app


def serve(config: EngineConfig, host: str = "127.0.0.1", port: int = 8470,
          token: Optional[str] = None) -> None:
    import uvicorn

    uvicorn.run(build_app(config, token=token), host=host, port=port, log_level="info")
