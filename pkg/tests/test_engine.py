"""Interpreter semantics: actions, clock, productions, closure, queries."""

import pytest

from dpcl.ast import (
    Atom,
    Duration,
    EventRef,
    FlagRef,
    InstanceRef,
    ObjectRef,
    ProductionEvent,
    TransformationalRule,
    term_to_json,
)
from dpcl import engine
from dpcl.parser import load_program
from dpcl.runtime import EngineError, canonical_json, clone_state, state_to_json

import gen


def fold(program, steps, at=0):
    state = engine.init_state(program, at)
    deltas = []
    for raw in steps:
        state, delta = engine.apply_step(state, engine.step_from_json(raw))
        deltas.append(delta)
    return state, deltas


def closure_signature(state):
    """Characterize derived items per supporting rule, id-insensitively."""
    sig = []
    for rid in sorted(state.rules):
        live = state.rules[rid]
        if not isinstance(live.rule, TransformationalRule):
            continue
        item = engine._derived_item_for(state, rid)
        if item is None:
            sig.append((rid, None))
        elif item[0] == "object":
            sig.append((rid, ("object", state.objects[item[1]].base_name)))
        elif item[0] == "position":
            frame = state.positions[item[1]].frame
            sig.append((rid, ("position", canonical_json(term_to_json(frame)))))
        elif item[0] == "compound":
            sig.append((rid, ("compound", state.compounds[item[1]].decl_name)))
        else:
            sig.append((rid, item[0:1] + item[1:]))
    return sig


def closure_oracle_signature(state):
    """Independent oracle: strip every derived item, then re-derive from
    scratch by naive monotone iteration over rule conditions."""
    s = clone_state(state)
    for oid in [o.oid for o in s.objects.values() if o.origin.get("kind") == "derived"]:
        del s.objects[oid]
    for pid in [p.pid for p in s.positions.values() if p.origin.get("kind") == "derived"]:
        s.positions.pop(pid, None)
    for cid in [c.cid for c in s.compounds.values() if c.origin.get("kind") == "derived"]:
        if cid in s.compounds:
            engine._remove_compound(s, cid, s.compounds[cid].decl_name)
    for obj in s.objects.values():
        for name in [n for n, i in obj.descriptors.items() if i.get("prov") == "derived"]:
            del obj.descriptors[name]
    for _ in range(1000):
        changed = False
        for rid in sorted(s.rules):
            live = s.rules.get(rid)
            if live is None or not isinstance(live.rule, TransformationalRule):
                continue
            if engine.truthy(s, live.rule.condition) and engine._derived_item_for(s, rid) is None:
                if engine._derive(s, rid, live.rule.conclusion):
                    changed = True
        if not changed:
            break
    return closure_signature(s)


ASSERTS = [
    {"assert": {"name": "alice", "descriptors": ["student"], "properties": {"id_card": "c1"}}},
    {"assert": {"name": "library"}},
]
REGISTER = {"do": {"actor": "alice", "event": "register", "refinements": {"instrument": "c1"}}}
BORROW = {"do": {"actor": "alice", "event": "borrow", "refinements": {"item": "book1"}}}


# -- init_state


def test_init_library_two_powers(corpus_program):
    state = engine.init_state(corpus_program, 0)
    assert len(engine.query_positions(state, kind="power")) == 2
    assert engine.query_positions(state, kind="duty") == []
    assert state.clock == 0 and state.event_log == []


def test_init_empty_program():
    state = engine.init_state(load_program(""), 0)
    assert state.positions == {}


def test_init_conditional_rule_not_instantiated():
    # closure oracle: `raining` does not hold in the empty state, so the
    # conclusion power must be absent
    program = load_program("raining -> power { holder: x\n action: #f\n consequence: y }")
    state = engine.init_state(program, 0)
    assert engine.query_positions(state, kind="power") == []


# -- do_action


def test_register_grants_member(corpus_program):
    state, _ = fold(corpus_program, ASSERTS + [REGISTER])
    alice = state.object_named("alice")
    assert alice.has_descriptor("member")
    assert alice.descriptors["member"] == {"prov": "asserted"}


def test_unqualified_actor_disabled(corpus_program):
    # hand simulation: bob carries neither `student` nor `staff` and no
    # power's holder pattern matches his base name, so nothing can match
    steps = [{"assert": {"name": "bob"}},
             {"do": {"actor": "bob", "event": "register", "refinements": {"instrument": "x"}}}]
    state, deltas = fold(corpus_program, steps)
    delta = deltas[-1]
    assert delta.disabled
    assert delta.created_positions == [] and delta.descriptors_added == []
    assert state.event_log[-1].disabled
    assert not state.object_named("bob").descriptors


def test_borrow_creates_compound_with_timeout(corpus_program):
    state, _ = fold(corpus_program, ASSERTS + [REGISTER, BORROW], at=100)
    (comp,) = state.compounds_named("borrowing")
    assert engine.to_ticks(state, comp.params["timeout"]) == 100 + 2_592_000
    member_kinds = sorted(state.positions[p].kind for p in state.member_positions(comp.cid))
    assert member_kinds == ["duty", "power"]
    duty = next(p for p in state.positions.values() if p.kind == "duty")
    assert duty.label == "d1"
    assert duty.frame.holder == ObjectRef(state.object_named("alice").oid)


def test_unknown_actor_rejected(corpus_program):
    state = engine.init_state(corpus_program, 0)
    with pytest.raises(EngineError) as err:
        engine.do_action(state, "ghost", EventRef("register"))
    assert err.value.code == "unknown-actor"


def test_unresolvable_event_refinement_rejected(corpus_program):
    state, _ = fold(corpus_program, ASSERTS)
    with pytest.raises(EngineError) as err:
        engine.do_action(
            state, "alice",
            EventRef("register", (("instrument", engine.DottedRef(("nobody", "card"))),)),
        )
    assert err.value.code == "unresolved-ref"


def test_no_match_leaves_state_unchanged(corpus_program):
    state, _ = fold(corpus_program, ASSERTS)
    before = state_to_json(state)
    after_state, delta = engine.do_action(state, "alice", EventRef("noop"))
    after = state_to_json(after_state)
    assert delta.disabled
    assert before["objects"] == after["objects"]
    assert before["positions"] == after["positions"]
    assert len(after["event_log"]) == len(before["event_log"]) + 1


def test_discharge_precedence(corpus_program):
    steps = ASSERTS + [REGISTER, BORROW,
                       {"do": {"actor": "alice", "event": "return", "refinements": {"item": "book1"}}},
                       {"advance": "1m"}, {"advance": "1s"}]
    state, deltas = fold(corpus_program, steps)
    assert engine.query_positions(state, kind="duty") == []
    assert engine.query_positions(state, kind="power", action="fine") == []
    assert not any(d.violations for d in deltas)


def test_request_return_creates_new_duty(corpus_program):
    steps = ASSERTS + [REGISTER, BORROW,
                       {"do": {"actor": "library", "event": "request_return", "refinements": {}}}]
    state, _ = fold(corpus_program, steps)
    duties = engine.query_positions(state, kind="duty")
    assert len(duties) == 2
    produced = [d for d in duties if d.origin.get("kind") == "produced"]
    assert len(produced) == 1
    assert produced[0].frame.holder == ObjectRef(state.object_named("alice").oid)
    assert produced[0].frame.violation is None


# -- advance_clock


def test_advance_zero_no_delta(corpus_program):
    state = engine.init_state(corpus_program, 0)
    after, delta = engine.advance_clock(state, Duration(0, "s"))
    assert after.clock == 0
    assert delta.is_empty


def test_advance_past_timeout_raises_violation(corpus_program):
    state, deltas = fold(corpus_program, ASSERTS + [REGISTER, BORROW, {"advance": "1m"}])
    assert not deltas[-1].violations  # boundary: now() == timeout is not yet past
    state, delta = engine.advance_clock(state, Duration(1, "s"))
    duty = next(p for p in state.positions.values() if p.kind == "duty")
    assert delta.violations == [duty.pid]
    assert duty.violated
    fine_powers = engine.query_positions(state, kind="power", holder="library", action="fine")
    assert len(fine_powers) == 1


def test_violation_edge_triggered(corpus_program):
    steps = ASSERTS + [REGISTER, BORROW, {"advance": "1m"}, {"advance": "1s"},
                       {"advance": "1m"}, {"advance": "1y"}]
    state, _ = fold(corpus_program, steps)
    # oracle: count violation productions in the log
    raised = [occ for occ in state.event_log
              if isinstance(occ.event, ProductionEvent)
              and isinstance(occ.event.target, FlagRef)
              and occ.event.target.field == "violation"]
    assert len(raised) == 1


def test_advance_overflow(corpus_program):
    state = engine.init_state(corpus_program, 0)
    with pytest.raises(EngineError) as err:
        engine.advance_clock(state, Duration(2**40, "y"))
    assert err.value.code in ("overflow",)


def test_clock_monotonic(corpus_program):
    state, deltas = fold(corpus_program, ASSERTS + [{"advance": "2h"}, {"advance": "0s"}, {"advance": "30s"}])
    clocks = [d.clock_to for d in deltas]
    assert clocks == sorted(clocks)
    assert state.clock == 2 * 3600 + 30


# -- produce


def test_produce_then_rule_derives():
    program = load_program("raining -> wet_streets")
    state = engine.init_state(program, 0)
    state, _ = engine.produce(state, ProductionEvent("create", Atom("raining")))
    assert state.object_named("wet_streets") is not None
    assert state.object_named("wet_streets").origin["kind"] == "derived"


def test_produce_idempotent_create():
    program = load_program("")
    state = engine.init_state(program, 0)
    state, _ = engine.produce(state, ProductionEvent("create", Atom("raining")))
    state, delta = engine.produce(state, ProductionEvent("create", Atom("raining")))
    assert len([o for o in state.objects.values() if o.base_name == "raining"]) == 1
    assert delta.created_objects == []
    assert len(delta.events) == 1  # the external attempt is still logged


def test_remove_compound_removes_members(corpus_program):
    state, _ = fold(corpus_program, ASSERTS + [REGISTER, BORROW])
    (comp,) = state.compounds_named("borrowing")
    members = state.member_positions(comp.cid)  # membership oracle
    assert members
    state, delta = engine.produce(
        state, ProductionEvent("remove", InstanceRef("borrowing", comp.cid))
    )
    assert state.compounds == {}
    for pid in members:
        assert pid not in state.positions
    assert sorted(delta.removed_positions) == members


def test_remove_missing_target_errors():
    state = engine.init_state(load_program(""), 0)
    with pytest.raises(EngineError) as err:
        engine.produce(state, ProductionEvent("remove", Atom("ghost")))
    assert err.value.code == "missing-target"


def test_reactive_chain_fires():
    program = load_program(
        "power { holder: weather\n action: #rain\n consequence: +raining }\n"
        "#rain => +wet\n+wet => +slippery"
    )
    state = engine.init_state(program, 0)
    state, _ = engine.assert_object(state, "sky", ("weather",), ())
    state, _ = engine.do_action(state, "sky", EventRef("rain"))
    assert state.object_named("wet") is not None
    assert state.object_named("slippery") is not None


def test_disabled_event_does_not_cascade():
    # no power enables #f, so the reactive chain never sees the occurrence
    program = load_program("#f => #g\n#g => +done")
    state = engine.init_state(program, 0)
    state, _ = engine.assert_object(state, "actor_x", (), ())
    state, delta = engine.do_action(state, "actor_x", EventRef("f"))
    assert delta.disabled
    assert state.object_named("done") is None


def test_event_to_event_reactive():
    program = load_program(
        "power { holder: anyone\n action: #f\n consequence: holder in started }\n"
        "#f => #g\n#g => +done"
    )
    state = engine.init_state(program, 0)
    state, _ = engine.assert_object(state, "actor_x", ("anyone",), ())
    state, _ = engine.do_action(state, "actor_x", EventRef("f"))
    assert state.object_named("done") is not None


def test_cascade_limit():
    program = load_program(
        "power { holder: anyone\n action: #tick\n consequence: holder in ticking }\n#tick => #tick"
    )
    state = engine.init_state(program, 0)
    state, _ = engine.assert_object(state, "clockwork", ("anyone",), ())
    with pytest.raises(EngineError) as err:
        engine.do_action(state, "clockwork", EventRef("tick"))
    assert err.value.code == "cascade-limit"


# -- closure


REWRITTEN_SNIPPET = """
power {
    holder: member
    action: #borrow { item: book }
    consequence: +borrowing {
        lender: library
        borrower: holder
        item: book
        timeout: now() + 1m
    }
}

borrowing(lender, borrower, item, timeout) {
    duty d1 {
        holder: borrower
        counterparty: lender
        action: #return { item: book }
    }
    now() > timeout -> power {
        holder: d1.counterparty
        action: #declare_violation { target: d1 }
        consequence: +d1.violation
    }
}
"""


def _rewritten_state():
    program = load_program(REWRITTEN_SNIPPET)
    steps = [
        {"assert": {"name": "alice", "descriptors": ["member"], "properties": {}}},
        {"assert": {"name": "library"}},
        {"do": {"actor": "alice", "event": "borrow", "refinements": {"item": "book1"}}},
    ]
    return fold(program, steps)[0]


def test_derived_power_appears_past_timeout():
    state = _rewritten_state()
    assert engine.query_positions(state, action="declare_violation") == []
    state, _ = engine.advance_clock(state, Duration(32, "d"))
    derived = engine.query_positions(state, action="declare_violation")
    assert len(derived) == 1
    assert derived[0].origin["kind"] == "derived"
    assert closure_signature(state) == closure_oracle_signature(state)


def test_derived_power_absent_before_timeout():
    state = _rewritten_state()
    state, _ = engine.advance_clock(state, Duration(1, "d"))
    assert engine.query_positions(state, action="declare_violation") == []


def test_derived_power_retracted_when_support_removed():
    state = _rewritten_state()
    state, _ = engine.advance_clock(state, Duration(32, "d"))
    assert engine.query_positions(state, action="declare_violation")
    (comp,) = state.compounds_named("borrowing")
    state, _ = engine.produce(state, ProductionEvent("remove", InstanceRef("borrowing", comp.cid)))
    # closure oracle: with the compound (and its rule) gone, nothing supports
    # the derived power
    assert engine.query_positions(state, action="declare_violation") == []
    assert closure_signature(state) == closure_oracle_signature(state)


def test_closure_idempotent(corpus_program):
    state, _ = fold(corpus_program, ASSERTS + [REGISTER, BORROW, {"advance": "1m"}, {"advance": "1s"}])
    once = engine.recompute_closure(state)
    twice = engine.recompute_closure(once)
    assert state_to_json(once) == state_to_json(twice)


def test_chain_retraction():
    program = load_program("seed -> a1\na1 -> a2\na2 -> a3")
    state = engine.init_state(program, 0)
    state, _ = engine.produce(state, ProductionEvent("create", Atom("seed")))
    assert all(state.object_named(n) for n in ("a1", "a2", "a3"))
    state, _ = engine.produce(state, ProductionEvent("remove", Atom("seed")))
    assert all(state.object_named(n) is None for n in ("a1", "a2", "a3"))


# -- run


def test_run_full_scenario(corpus_program, canonical_scenario):
    trace = engine.run(corpus_program, canonical_scenario)
    assert trace.error is None
    fines = [c for c in trace.final["compounds"] if c["decl"] == "fine"]
    assert len(fines) == 1
    assert fines[0]["display"] == {"borrower": "alice", "lender": "library"}


def test_run_empty_scenario(corpus_program):
    trace = engine.run(corpus_program, engine.Scenario(()))
    assert trace.steps == []
    assert trace.initial == trace.final


def test_run_deterministic(corpus_program, canonical_scenario):
    a = engine.run(corpus_program, canonical_scenario)
    b = engine.run(corpus_program, canonical_scenario)
    assert canonical_json(a.to_json()) == canonical_json(b.to_json())


def test_run_error_keeps_partial_trace(corpus_program):
    scenario = engine.scenario_from_json({"steps": ASSERTS + [
        {"do": {"actor": "ghost", "event": "register", "refinements": {}}},
        {"advance": "1h"},
    ]})
    trace = engine.run(corpus_program, scenario)
    assert trace.error == {
        "index": 2, "code": "unknown-actor", "message": "no object named `ghost`"}
    assert len(trace.steps) == 2
    assert trace.final["clock"] == 0  # the failing and later steps never ran


def test_trace_replay(corpus_program, canonical_scenario):
    trace = engine.run(corpus_program, canonical_scenario)
    assert trace.replay() == trace.final


# -- queries


def test_query_kind_power_fresh(corpus_program):
    state = engine.init_state(corpus_program, 0)
    assert len(engine.query_positions(state, kind="power")) == 2


def test_query_violated_fresh_empty(corpus_program):
    state = engine.init_state(corpus_program, 0)
    assert engine.query_positions(state, violated=True) == []


def test_query_holder_after_borrow(corpus_program):
    state, _ = fold(corpus_program, ASSERTS + [REGISTER, BORROW])
    mine = engine.query_positions(state, holder="alice")
    assert any(p.kind == "duty" and p.label == "d1" for p in mine)


def test_enabled_fresh_alice(corpus_program):
    state, _ = fold(corpus_program, ASSERTS)
    # pattern-match oracle over the two static powers: only the register
    # power matches a `student`, and instrument resolves to alice's card
    actions = engine.enabled_actions(state, "alice")
    assert [(a.name, dict(a.refinements)) for _, a in actions] == [
        ("register", {"instrument": Atom("c1")})
    ]


def test_enabled_unmatched_actor(corpus_program):
    state, _ = fold(corpus_program, [{"assert": {"name": "bob"}}])
    assert engine.enabled_actions(state, "bob") == []


def test_enabled_library_post_violation(corpus_program):
    state, _ = fold(corpus_program, ASSERTS + [REGISTER, BORROW, {"advance": "1m"}, {"advance": "1s"}])
    names = [a.name for _, a in engine.enabled_actions(state, "library")]
    assert "fine" in names
