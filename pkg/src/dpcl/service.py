"""REST facade over programs and sessions.

All state lives in the session store (and a program registry next to it),
so restarting the service against the same directory preserves every
session.  Handlers are thin: parse the request, call the store/engine,
shape the JSON.  Errors use `{"error": {"code", "message"}}` bodies.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .ast import Atom, pretty_print, render_term
from .engine import enabled_actions, query_positions, resolve_name, step_from_json
from .parser import check, load_program
from .rewrite import RewriteError, apply_all, list_applicable
from .runtime import EngineError
from .store import SessionStore, StoreError, new_session_id

DEFAULT_PORT = 8479


def _diag_json(diag) -> dict:
    return {
        "file": diag.span.file,
        "line": diag.span.start_line,
        "col": diag.span.start_col,
        "severity": diag.severity,
        "code": diag.code,
        "message": diag.message,
        "rendered": str(diag),
    }


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse({"error": {"code": code, "message": message}}, status_code=status)


class ProgramRegistry:
    """Programs posted to the service, persisted as .dpcl files."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def ids(self) -> list:
        return sorted(p.stem for p in self.root.glob("*.dpcl"))

    def add(self, source: str) -> str:
        pid = new_session_id(self.ids())
        (self.root / f"{pid}.dpcl").write_text(source, "utf-8")
        return pid

    def get(self, pid: str):
        path = self.root / f"{pid}.dpcl"
        if not path.exists():
            return None
        source = path.read_text("utf-8")
        return source, load_program(source, pid)


def create_app(sessions_dir) -> FastAPI:
    sessions_dir = Path(sessions_dir)
    store = SessionStore(sessions_dir)
    programs = ProgramRegistry(sessions_dir / "programs")
    app = FastAPI(title="dpcl", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.store = store
    app.state.programs = programs

    @app.get("/")
    def index():
        return {"service": "dpcl", "sessions": store.list_sessions()}

    @app.post("/programs")
    async def post_program(request: Request):
        raw = await request.body()
        try:
            source = raw.decode("utf-8")
        except UnicodeDecodeError:
            return _error(422, "bad-encoding", "program source must be UTF-8 text")
        if request.headers.get("content-type", "").startswith("application/json"):
            try:
                payload = json.loads(source) if source else {}
                source = payload.get("source", "")
            except json.JSONDecodeError:
                return _error(422, "bad-payload", "JSON body must carry a `source` field")
        result = check(source, "<posted>")
        diagnostics = [_diag_json(d) for d in result.diagnostics]
        if not result.ok:
            return JSONResponse({"diagnostics": diagnostics}, status_code=422)
        pid = programs.add(source)
        return JSONResponse(
            {"program_id": pid, "diagnostics": diagnostics}, status_code=201
        )

    @app.post("/sessions")
    async def post_session(request: Request):
        payload = await request.json()
        pid = payload.get("program_id") if isinstance(payload, dict) else None
        entry = programs.get(pid) if pid else None
        if entry is None:
            return _error(404, "unknown-program", f"no program `{pid}`")
        source, program = entry
        session = store.create_session(program, source)
        return JSONResponse(
            {"session_id": session.sid, "state": session.snapshot()}, status_code=201
        )

    def _session_or_404(sid: str):
        try:
            return store.get(sid)
        except StoreError as exc:
            return _error(404, exc.code, exc.message)

    @app.post("/sessions/{sid}/steps")
    async def post_step(sid: str, request: Request):
        session = _session_or_404(sid)
        if isinstance(session, Response):
            return session
        payload = await request.json()
        try:
            step = step_from_json(payload)
            session, delta = store.step(sid, step)
        except EngineError as exc:
            return _error(409, exc.code, exc.message)
        body = {
            "delta": delta.to_json(),
            "state": session.snapshot(),
            "disabled": delta.disabled,
        }
        return JSONResponse(body, status_code=200)

    @app.get("/sessions/{sid}/state")
    def get_state(sid: str):
        session = _session_or_404(sid)
        if isinstance(session, Response):
            return session
        return {
            "session_id": session.sid,
            "parent": session.parent,
            "lineage": store.lineage(sid),
            "state": session.snapshot(),
        }

    @app.get("/sessions/{sid}/positions")
    def get_positions(sid: str, kind: str | None = None, violated: str | None = None):
        session = _session_or_404(sid)
        if isinstance(session, Response):
            return session
        want_violated = None
        if violated is not None:
            want_violated = violated.lower() in ("1", "true", "yes")
        matches = query_positions(session.state, kind=kind, violated=want_violated)
        wanted = {p.pid for p in matches}
        snapshot = session.snapshot()
        return {"positions": [p for p in snapshot["positions"] if p["id"] in wanted]}

    @app.get("/sessions/{sid}/enabled")
    def get_enabled(sid: str, actor: str | None = None):
        session = _session_or_404(sid)
        if isinstance(session, Response):
            return session
        if not actor:
            return _error(400, "unknown-actor", "query parameter `actor` is required")
        try:
            actions = enabled_actions(session.state, actor)
        except EngineError as exc:
            return _error(400, exc.code, exc.message)
        items = []
        for pid, event in actions:
            pattern = dict(session.state.positions[pid].frame.action.refinements)
            refinements = []
            for field, value in event.refinements:
                pat = pattern.get(field)
                free = isinstance(pat, Atom) and isinstance(
                    resolve_name(session.state, pat.name), Atom
                )
                refinements.append(
                    {"field": field, "value": render_term(value), "free": free}
                )
            items.append(
                {
                    "power": pid,
                    "name": event.name,
                    "display": render_term(event),
                    "refinements": refinements,
                }
            )
        return {"actor": actor, "enabled": items}

    @app.get("/sessions/{sid}/trace")
    def get_trace(sid: str):
        session = _session_or_404(sid)
        if isinstance(session, Response):
            return session
        return session.trace.to_json()

    @app.post("/sessions/{sid}/fork")
    def post_fork(sid: str):
        try:
            child = store.fork_session(sid)
        except StoreError as exc:
            return _error(404, exc.code, exc.message)
        return JSONResponse(
            {"session_id": child.sid, "parent": sid, "state": child.snapshot()},
            status_code=201,
        )

    @app.post("/rewrite")
    async def post_rewrite(request: Request):
        payload = await request.json()
        pid = payload.get("program_id") if isinstance(payload, dict) else None
        transform = payload.get("transform", "violation-to-power")
        entry = programs.get(pid) if pid else None
        if entry is None:
            return _error(404, "unknown-program", f"no program `{pid}`")
        _, program = entry
        try:
            sites = list_applicable(program, transform)
            if not sites:
                return _error(422, "not-applicable", "no applicable sites")
            rewritten = apply_all(program, transform)
        except RewriteError as exc:
            status = 422 if exc.code == "not-applicable" else 404
            return _error(status, exc.code, exc.message)
        source = pretty_print(rewritten)
        new_pid = programs.add(source)
        return JSONResponse(
            {"program_id": new_pid, "source": source, "sites": sites}, status_code=200
        )

    return app


def serve(sessions_dir, host: str = "127.0.0.1", port: int = DEFAULT_PORT):
    import uvicorn

    uvicorn.run(create_app(sessions_dir), host=host, port=port, log_level="warning")
