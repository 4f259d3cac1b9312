"""Session store: create, fork isolation, save/load round-trips."""

import json

import pytest

from dpcl.ast import Duration
from dpcl.engine import AdvanceStep, step_from_json
from dpcl.parser import load_program
from dpcl.runtime import canonical_json, state_to_json
from dpcl.store import SessionStore, StoreError


@pytest.fixture
def store(tmp_path):
    return SessionStore(tmp_path / "sessions")


def test_create_session_library(store, corpus_program, corpus_source):
    session = store.create_session(corpus_program, corpus_source)
    powers = [p for p in session.snapshot()["positions"] if p["kind"] == "power"]
    assert len(powers) == 2
    assert store.session_path(session.sid).exists()
    assert store.trace_path(session.sid).exists()


def test_create_session_empty_program(store):
    session = store.create_session(load_program(""))
    snap = session.snapshot()
    assert snap["positions"] == [] and snap["objects"] == []


def test_session_ids_distinct(store, corpus_program):
    # id-uniqueness oracle over repeated creates
    ids = {store.create_session(corpus_program).sid for _ in range(20)}
    assert len(ids) == 20


def test_fork_snapshots_equal(store, corpus_program):
    parent = store.create_session(corpus_program)
    child = store.fork_session(parent.sid)
    assert child.parent == parent.sid
    assert canonical_json(child.snapshot()) == canonical_json(parent.snapshot())


def test_fork_isolation(store, corpus_program):
    parent = store.create_session(corpus_program)
    before = canonical_json(parent.snapshot())
    child = store.fork_session(parent.sid)
    store.step(child.sid, AdvanceStep(Duration(2, "h")))
    # isolation oracle: compare snapshots after touching only the child
    assert canonical_json(store.get(parent.sid).snapshot()) == before
    assert store.get(child.sid).state.clock == 7200


def test_fork_of_fork_lineage(store, corpus_program):
    a = store.create_session(corpus_program)
    b = store.fork_session(a.sid)
    c = store.fork_session(b.sid)
    assert store.lineage(c.sid) == [c.sid, b.sid, a.sid]


def test_save_load_roundtrip_fresh(store, corpus_program, tmp_path):
    session = store.create_session(corpus_program)
    path = store.save_session(session.sid, tmp_path / "one.json")
    loaded = store.load_session(path, register=False)
    assert canonical_json(loaded.snapshot()) == canonical_json(session.snapshot())
    assert loaded.sid == session.sid


def test_save_load_roundtrip_mid_scenario(store, corpus_program, canonical_scenario, tmp_path):
    session = store.create_session(corpus_program)
    for step in canonical_scenario.steps:
        store.step(session.sid, step)
    snap_before = canonical_json(session.snapshot())
    assert any(p["violated"] for p in session.snapshot()["positions"])
    path = store.save_session(session.sid, tmp_path / "mid.json")
    loaded = store.load_session(path, register=False)
    assert canonical_json(loaded.snapshot()) == snap_before
    # saving what was loaded reproduces the file byte for byte
    resaved = tmp_path / "mid2.json"
    resaved.write_text(json.dumps(loaded.to_json(), sort_keys=True, indent=1) + "\n", "utf-8")
    assert resaved.read_bytes() == path.read_bytes()


def test_truncated_payload_rejected(store, corpus_program, tmp_path):
    session = store.create_session(corpus_program)
    path = store.save_session(session.sid, tmp_path / "x.json")
    raw = path.read_text("utf-8")
    path.write_text(raw[: len(raw) // 2], "utf-8")
    with pytest.raises(StoreError) as err:
        store.load_session(path, register=False)
    assert err.value.code == "corrupt-payload"


def test_version_mismatch_rejected(store, corpus_program, tmp_path):
    session = store.create_session(corpus_program)
    path = store.save_session(session.sid, tmp_path / "x.json")
    data = json.loads(path.read_text("utf-8"))
    data["dpcl_schema"] = 999
    path.write_text(json.dumps(data), "utf-8")
    with pytest.raises(StoreError) as err:
        store.load_session(path, register=False)
    assert err.value.code == "version-mismatch"


def test_unknown_session(store):
    with pytest.raises(StoreError) as err:
        store.get("nope1234")
    assert err.value.code == "unknown-session"


def test_concurrent_steps_serialized(store, corpus_program):
    import threading

    session = store.create_session(corpus_program)
    workers, steps_each = 8, 5

    def worker():
        for _ in range(steps_each):
            store.step(session.sid, AdvanceStep(Duration(1, "s")))

    threads = [threading.Thread(target=worker) for _ in range(workers)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    final = store.get(session.sid)
    assert final.state.clock == workers * steps_each
    assert len(final.trace.steps) == workers * steps_each


def test_reload_from_directory(tmp_path, corpus_program, canonical_scenario):
    first = SessionStore(tmp_path / "s")
    session = first.create_session(corpus_program)
    for step in canonical_scenario.steps[:4]:
        first.step(session.sid, step)
    snap = canonical_json(session.snapshot())
    second = SessionStore(tmp_path / "s")  # a fresh store over the same dir
    again = second.get(session.sid)
    assert canonical_json(again.snapshot()) == snap
    assert len(again.trace.steps) == 4
