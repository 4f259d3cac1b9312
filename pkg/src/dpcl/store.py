"""Named sessions: a program plus live state, with fork lineage and
versioned JSON persistence.

Each session is two files under the sessions directory: `<id>.json`
(program source + state snapshot + lineage) and `<id>.trace.json` (the
replayable step record since creation or fork).  Operations on one
session are serialized with a per-session lock; distinct sessions are
independent.
"""

from __future__ import annotations

import json
import secrets
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .ast import Program, pretty_print
from .engine import Trace, apply_step, init_state
from .parser import load_program
from .runtime import (
    InstitutionalState,
    StateDelta,
    clone_state,
    state_from_json,
    state_to_json,
    SCHEMA_VERSION,
)

_ID_ALPHABET = "abcdefghijklmnopqrstuvwxyz0123456789"


class StoreError(Exception):
    def __init__(self, code: str, message: str):
        self.code = code
        self.message = message
        super().__init__(f"{code}: {message}")


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def new_session_id(taken=()) -> str:
    while True:
        sid = "".join(secrets.choice(_ID_ALPHABET) for _ in range(8))
        if sid not in taken:
            return sid


@dataclass
class Session:
    sid: str
    program: Program
    source: str
    state: InstitutionalState
    trace: Trace
    parent: str | None = None
    created_at: str = ""
    last_step_at: str | None = None

    def snapshot(self) -> dict:
        return state_to_json(self.state)

    def to_json(self) -> dict:
        return {
            "dpcl_schema": SCHEMA_VERSION,
            "id": self.sid,
            "parent": self.parent,
            "created_at": self.created_at,
            "last_step_at": self.last_step_at,
            "program_name": self.program.source_name,
            "program": self.source,
            "state": self.snapshot(),
        }


class SessionStore:
    """Disk-backed registry of sessions; safe for concurrent use."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._cache: dict[str, Session] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    # -- locking

    def lock(self, sid: str) -> threading.Lock:
        with self._registry_lock:
            if sid not in self._locks:
                self._locks[sid] = threading.Lock()
            return self._locks[sid]

    # -- paths

    def session_path(self, sid: str) -> Path:
        return self.root / f"{sid}.json"

    def trace_path(self, sid: str) -> Path:
        return self.root / f"{sid}.trace.json"

    def list_sessions(self) -> list:
        known = set(self._cache)
        for path in self.root.glob("*.json"):
            if not path.name.endswith(".trace.json"):
                known.add(path.stem)
        return sorted(known)

    # -- lifecycle

    def create_session(self, program: Program, source: str | None = None, at: int = 0) -> Session:
        state = init_state(program, at)
        snapshot = state_to_json(state)
        session = Session(
            sid=new_session_id(self.list_sessions()),
            program=program,
            source=source if source is not None else pretty_print(program),
            state=state,
            trace=Trace(program.source_name, snapshot, [], snapshot),
            created_at=_now_iso(),
        )
        with self.lock(session.sid):
            self._cache[session.sid] = session
            self._persist(session)
        return session

    def fork_session(self, sid: str) -> Session:
        parent = self.get(sid)
        with self.lock(sid):
            snapshot = parent.snapshot()
            child = Session(
                sid=new_session_id(self.list_sessions()),
                program=parent.program,
                source=parent.source,
                state=clone_state(parent.state),
                trace=Trace(parent.program.source_name, snapshot, [], snapshot),
                parent=parent.sid,
                created_at=_now_iso(),
            )
        with self.lock(child.sid):
            self._cache[child.sid] = child
            self._persist(child)
        return child

    def get(self, sid: str) -> Session:
        session = self._cache.get(sid)
        if session is not None:
            return session
        path = self.session_path(sid)
        if path.exists():
            return self.load_session(path)
        raise StoreError("unknown-session", f"no session `{sid}`")

    def lineage(self, sid: str) -> list:
        chain = []
        current: str | None = sid
        while current is not None:
            chain.append(current)
            try:
                current = self.get(current).parent
            except StoreError:
                break
        return chain

    # -- stepping

    def step(self, sid: str, step) -> tuple[Session, StateDelta]:
        session = self.get(sid)
        with self.lock(sid):
            state, delta = apply_step(session.state, step)
            session.state = state
            session.trace.steps.append((step, delta, state.clock))
            session.trace.final = state_to_json(state)
            session.last_step_at = _now_iso()
            self._persist(session)
        return session, delta

    # -- persistence

    def _persist(self, session: Session) -> None:
        self.session_path(session.sid).write_text(
            json.dumps(session.to_json(), sort_keys=True, indent=1) + "\n", "utf-8"
        )
        self.trace_path(session.sid).write_text(
            json.dumps(session.trace.to_json(), sort_keys=True, indent=1) + "\n", "utf-8"
        )

    def save_session(self, sid: str, path=None) -> Path:
        session = self.get(sid)
        target = Path(path) if path is not None else self.session_path(sid)
        with self.lock(sid):
            target.write_text(
                json.dumps(session.to_json(), sort_keys=True, indent=1) + "\n", "utf-8"
            )
        return target

    def load_session(self, path, register: bool = True) -> Session:
        path = Path(path)
        try:
            data = json.loads(path.read_text("utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise StoreError("corrupt-payload", f"cannot read session file {path}: {exc}") from exc
        for key in ("id", "program", "state", "created_at"):
            if not isinstance(data, dict) or key not in data:
                raise StoreError("corrupt-payload", f"session file {path} is missing `{key}`")
        if data.get("dpcl_schema") != SCHEMA_VERSION:
            raise StoreError(
                "version-mismatch",
                f"session file schema {data.get('dpcl_schema')!r}, expected {SCHEMA_VERSION}",
            )
        program = load_program(data["program"], data.get("program_name", "<session>"))
        state = state_from_json(data["state"], program)
        trace_file = path.parent / f"{data['id']}.trace.json"
        if trace_file.exists():
            trace = Trace.from_json(json.loads(trace_file.read_text("utf-8")))
        else:
            snapshot = state_to_json(state)
            trace = Trace(program.source_name, snapshot, [], snapshot)
        session = Session(
            sid=data["id"],
            program=program,
            source=data["program"],
            state=state,
            trace=trace,
            parent=data.get("parent"),
            created_at=data["created_at"],
            last_step_at=data.get("last_step_at"),
        )
        if register:
            with self.lock(session.sid):
                self._cache[session.sid] = session
        return session
