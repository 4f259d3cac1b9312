"""Live institutional state: instances, snapshots and state deltas.

A state holds everything a scenario has built up: objects with their
descriptors, position instances (bound frames), compound instances, the
live rule set, the simulated clock and the event log.  Snapshots are
canonical JSON structures; a `StateDelta` is the exact difference between
two snapshots of the same lineage, so replaying deltas from the initial
snapshot reproduces the final state bit for bit.  Display strings inside a
snapshot are always derived from that snapshot's own tables, which keeps
replayed and freshly rendered snapshots byte-identical.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

from .ast import (
    Alternation,
    Arith,
    Atom,
    CompoundCall,
    Comparison,
    DottedRef,
    DutyFrame,
    EventRef,
    FlagRef,
    InstanceRef,
    ObjectRef,
    OtherPositionFrame,
    PositionRef,
    PowerFrame,
    Program,
    ProductionEvent,
    PropRef,
    Qualification,
    ReactiveRule,
    RefinedObject,
    TransformationalRule,
    render_term,
    term_from_json,
    term_to_json,
)

SCHEMA_VERSION = 1

FRAME_FIELD_ORDER = ("holder", "counterparty", "action", "consequence", "violation")


class EngineError(Exception):
    """A scenario step failed; `code` is a stable machine-readable tag."""

    def __init__(self, code: str, message: str):
        self.code = code
        self.message = message
        super().__init__(f"{code}: {message}")


@dataclass
class ObjectInstance:
    oid: int
    base_name: str
    properties: dict  # field -> ground term
    descriptors: dict  # name -> {"prov": "asserted"} | {"prov": "derived", "rule": rid}
    origin: dict

    def has_descriptor(self, name: str) -> bool:
        return name in self.descriptors


@dataclass
class PositionInstance:
    pid: int
    kind: str  # power | duty | claim | ...
    frame: object
    origin: dict
    label: str | None = None
    compound: int | None = None
    violated: bool = False


@dataclass
class CompoundInstance:
    cid: int
    decl_name: str
    params: dict  # param name -> ground term, in declaration order
    origin: dict


@dataclass
class LiveRule:
    rid: int
    rule: object  # TransformationalRule | ReactiveRule, fully substituted
    origin: dict


@dataclass
class EventOccurrence:
    seq: int
    at: int
    actor: int | None
    event: object  # ground EventRef | ProductionEvent
    provenance: dict
    disabled: bool = False


@dataclass
class InstitutionalState:
    program: Program
    clock: int = 0
    objects: dict = field(default_factory=dict)
    positions: dict = field(default_factory=dict)
    compounds: dict = field(default_factory=dict)
    rules: dict = field(default_factory=dict)
    event_log: list = field(default_factory=list)
    next_id: int = 1
    next_seq: int = 1

    # -- allocation

    def fresh_id(self) -> int:
        n = self.next_id
        self.next_id += 1
        return n

    def fresh_seq(self) -> int:
        n = self.next_seq
        self.next_seq += 1
        return n

    # -- lookups

    def object_named(self, name: str) -> ObjectInstance | None:
        for obj in self.objects.values():
            if obj.base_name == name:
                return obj
        return None

    def compounds_named(self, name: str) -> list:
        return [c for c in self.compounds.values() if c.decl_name == name]

    def positions_labeled(self, label: str) -> list:
        return [p for p in self.positions.values() if p.label == label]

    def member_positions(self, cid: int) -> list:
        return sorted(p.pid for p in self.positions.values() if p.compound == cid)

    def member_rules(self, cid: int) -> list:
        return sorted(
            r.rid
            for r in self.rules.values()
            if r.origin.get("kind") == "compound" and r.origin.get("compound") == cid
        )


# ---------------------------------------------------------------------------
# Display rendering.  Engine references are replaced with readable names
# taken from explicit lookup tables so the result depends only on the data
# being rendered, never on ambient state.


def readable_term(node, names: dict, posinfo: dict):
    """Rewrite engine refs into surface-ish terms using the given tables."""

    def walk(n):
        if isinstance(n, ObjectRef):
            return Atom(names[n.oid]) if n.oid in names else InstanceRef("object", n.oid)
        if isinstance(n, PositionRef):
            kind, label = posinfo.get(n.pid, ("position", None))
            return Atom(label) if label else InstanceRef(kind, n.pid)
        if isinstance(n, FlagRef):
            kind, label = posinfo.get(n.pid, ("position", None))
            if label:
                return DottedRef((label, n.field))
            return DottedRef((f"{kind}_{n.pid}", n.field))
        if isinstance(n, PropRef):
            head = names.get(n.oid, f"object_{n.oid}")
            return DottedRef((head,) + n.path)
        if isinstance(n, CompoundCall):
            return CompoundCall(n.name, tuple(walk(a) for a in n.args))
        if isinstance(n, RefinedObject):
            return RefinedObject(n.head, tuple((k, walk(v)) for k, v in n.body))
        if isinstance(n, Alternation):
            return Alternation(tuple(walk(o) for o in n.options))
        if isinstance(n, Comparison):
            return Comparison(walk(n.lhs), n.op, walk(n.rhs))
        if isinstance(n, Arith):
            return Arith(walk(n.lhs), n.op, walk(n.rhs))
        if isinstance(n, Qualification):
            return Qualification(walk(n.subject), n.descriptor)
        if isinstance(n, EventRef):
            return EventRef(n.name, tuple((k, walk(v)) for k, v in n.refinements))
        if isinstance(n, ProductionEvent):
            return ProductionEvent(n.polarity, walk(n.target))
        if isinstance(n, PowerFrame):
            return PowerFrame(walk(n.holder), walk(n.action), walk(n.consequence), n.label)
        if isinstance(n, DutyFrame):
            return DutyFrame(
                walk(n.holder),
                walk(n.counterparty),
                walk(n.action),
                None if n.violation is None else walk(n.violation),
                n.label,
            )
        if isinstance(n, OtherPositionFrame):
            return OtherPositionFrame(n.kind, tuple((k, walk(v)) for k, v in n.body), n.label)
        if isinstance(n, TransformationalRule):
            return TransformationalRule(walk(n.condition), walk(n.conclusion))
        if isinstance(n, ReactiveRule):
            return ReactiveRule(walk(n.trigger), walk(n.effect))
        return n

    return walk(node)


def _state_tables(state):
    names = {o.oid: o.base_name for o in state.objects.values()}
    posinfo = {p.pid: (p.kind, p.label) for p in state.positions.values()}
    return names, posinfo


def display_term(state: InstitutionalState, node) -> str:
    """One-line readable rendering of a term against the live state."""
    names, posinfo = _state_tables(state)
    return render_term(readable_term(node, names, posinfo))


def _snapshot_tables(snap: dict):
    names = {o["id"]: o["name"] for o in snap["objects"]}
    posinfo = {p["id"]: (p["kind"], p["label"]) for p in snap["positions"]}
    return names, posinfo


def attach_displays(snap: dict) -> dict:
    """Fill every display field of a snapshot from the snapshot itself."""
    names, posinfo = _snapshot_tables(snap)

    def disp(term_json):
        return render_term(readable_term(term_from_json(term_json), names, posinfo))

    for pos in snap["positions"]:
        frame = term_from_json(pos["frame"])
        display = {}
        for fname in FRAME_FIELD_ORDER:
            value = getattr(frame, fname, None)
            if value is not None:
                display[fname] = render_term(readable_term(value, names, posinfo))
        if isinstance(frame, OtherPositionFrame):
            for key, value in frame.body:
                display[key] = render_term(readable_term(value, names, posinfo))
        pos["display"] = display
    for comp in snap["compounds"]:
        comp["display"] = {k: disp(v) for k, v in comp["params"]}
    for rule in snap["rules"]:
        rule["display"] = disp(rule["rule"])
    for occ in snap["event_log"]:
        occ["display"] = disp(occ["event"])
    return snap


# ---------------------------------------------------------------------------
# Snapshots


def object_to_json(obj: ObjectInstance) -> dict:
    return {
        "id": obj.oid,
        "name": obj.base_name,
        "origin": obj.origin,
        "properties": {k: term_to_json(v) for k, v in obj.properties.items()},
        "descriptors": [[name, info] for name, info in obj.descriptors.items()],
    }


def object_from_json(data) -> ObjectInstance:
    return ObjectInstance(
        oid=data["id"],
        base_name=data["name"],
        origin=data["origin"],
        properties={k: term_from_json(v) for k, v in data["properties"].items()},
        descriptors={name: info for name, info in data["descriptors"]},
    )


def position_to_json(pos: PositionInstance) -> dict:
    return {
        "id": pos.pid,
        "kind": pos.kind,
        "label": pos.label,
        "compound": pos.compound,
        "origin": pos.origin,
        "violated": pos.violated,
        "frame": term_to_json(pos.frame),
        "display": {},
    }


def position_from_json(data) -> PositionInstance:
    return PositionInstance(
        pid=data["id"],
        kind=data["kind"],
        frame=term_from_json(data["frame"]),
        origin=data["origin"],
        label=data["label"],
        compound=data["compound"],
        violated=data["violated"],
    )


def compound_to_json(state, comp: CompoundInstance) -> dict:
    return {
        "id": comp.cid,
        "decl": comp.decl_name,
        "origin": comp.origin,
        "params": [[k, term_to_json(v)] for k, v in comp.params.items()],
        "display": {},
        "member_positions": state.member_positions(comp.cid),
        "member_rules": state.member_rules(comp.cid),
    }


def compound_from_json(data) -> CompoundInstance:
    return CompoundInstance(
        cid=data["id"],
        decl_name=data["decl"],
        params={k: term_from_json(v) for k, v in data["params"]},
        origin=data["origin"],
    )


def rule_to_json(rule: LiveRule) -> dict:
    return {
        "id": rule.rid,
        "kind": "reactive" if isinstance(rule.rule, ReactiveRule) else "transformational",
        "origin": rule.origin,
        "rule": term_to_json(rule.rule),
        "display": "",
    }


def rule_from_json(data) -> LiveRule:
    return LiveRule(rid=data["id"], rule=term_from_json(data["rule"]), origin=data["origin"])


def occurrence_to_json(occ: EventOccurrence) -> dict:
    return {
        "seq": occ.seq,
        "at": occ.at,
        "actor": occ.actor,
        "event": term_to_json(occ.event),
        "display": "",
        "provenance": occ.provenance,
        "disabled": occ.disabled,
    }


def occurrence_from_json(data) -> EventOccurrence:
    return EventOccurrence(
        seq=data["seq"],
        at=data["at"],
        actor=data["actor"],
        event=term_from_json(data["event"]),
        provenance=data["provenance"],
        disabled=data["disabled"],
    )


def state_to_json(state: InstitutionalState) -> dict:
    """Canonical snapshot; excludes the program (kept alongside as source)."""
    snap = {
        "dpcl_schema": SCHEMA_VERSION,
        "clock": state.clock,
        "next_id": state.next_id,
        "next_seq": state.next_seq,
        "objects": [object_to_json(o) for _, o in sorted(state.objects.items())],
        "positions": [position_to_json(p) for _, p in sorted(state.positions.items())],
        "compounds": [compound_to_json(state, c) for _, c in sorted(state.compounds.items())],
        "rules": [rule_to_json(r) for _, r in sorted(state.rules.items())],
        "event_log": [occurrence_to_json(e) for e in state.event_log],
    }
    return attach_displays(snap)


def state_from_json(data: dict, program: Program) -> InstitutionalState:
    if data.get("dpcl_schema") != SCHEMA_VERSION:
        raise EngineError(
            "schema-version",
            f"unsupported snapshot schema: {data.get('dpcl_schema')!r}",
        )
    state = InstitutionalState(program=program)
    state.clock = data["clock"]
    state.next_id = data["next_id"]
    state.next_seq = data["next_seq"]
    for item in data["objects"]:
        obj = object_from_json(item)
        state.objects[obj.oid] = obj
    for item in data["positions"]:
        pos = position_from_json(item)
        state.positions[pos.pid] = pos
    for item in data["compounds"]:
        comp = compound_from_json(item)
        state.compounds[comp.cid] = comp
    for item in data["rules"]:
        rule = rule_from_json(item)
        state.rules[rule.rid] = rule
    for item in data["event_log"]:
        state.event_log.append(occurrence_from_json(item))
    return state


def clone_state(state: InstitutionalState) -> InstitutionalState:
    """Deep copy through the snapshot codec; the program is shared."""
    return state_from_json(state_to_json(state), state.program)


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------------------
# State deltas


@dataclass
class StateDelta:
    clock_to: int
    counters_after: list
    created_objects: list = field(default_factory=list)
    removed_objects: list = field(default_factory=list)
    created_positions: list = field(default_factory=list)
    removed_positions: list = field(default_factory=list)
    created_compounds: list = field(default_factory=list)
    removed_compounds: list = field(default_factory=list)
    created_rules: list = field(default_factory=list)
    removed_rules: list = field(default_factory=list)
    descriptors_added: list = field(default_factory=list)  # [oid, name, info]
    descriptors_removed: list = field(default_factory=list)  # [oid, name]
    properties_set: list = field(default_factory=list)  # [oid, field, term json]
    violations: list = field(default_factory=list)  # position ids newly violated
    events: list = field(default_factory=list)  # occurrence json
    disabled: bool = False

    def to_json(self) -> dict:
        return {
            "clock_to": self.clock_to,
            "counters_after": self.counters_after,
            "created_objects": self.created_objects,
            "removed_objects": self.removed_objects,
            "created_positions": self.created_positions,
            "removed_positions": self.removed_positions,
            "created_compounds": self.created_compounds,
            "removed_compounds": self.removed_compounds,
            "created_rules": self.created_rules,
            "removed_rules": self.removed_rules,
            "descriptors_added": self.descriptors_added,
            "descriptors_removed": self.descriptors_removed,
            "properties_set": self.properties_set,
            "violations": self.violations,
            "events": self.events,
            "disabled": self.disabled,
        }

    @classmethod
    def from_json(cls, data: dict) -> "StateDelta":
        return cls(
            clock_to=data["clock_to"],
            counters_after=data["counters_after"],
            created_objects=data["created_objects"],
            removed_objects=data["removed_objects"],
            created_positions=data["created_positions"],
            removed_positions=data["removed_positions"],
            created_compounds=data["created_compounds"],
            removed_compounds=data["removed_compounds"],
            created_rules=data["created_rules"],
            removed_rules=data["removed_rules"],
            descriptors_added=data["descriptors_added"],
            descriptors_removed=data["descriptors_removed"],
            properties_set=data["properties_set"],
            violations=data["violations"],
            events=data["events"],
            disabled=data["disabled"],
        )

    @property
    def is_empty(self) -> bool:
        return not any(
            (
                self.created_objects,
                self.removed_objects,
                self.created_positions,
                self.removed_positions,
                self.created_compounds,
                self.removed_compounds,
                self.created_rules,
                self.removed_rules,
                self.descriptors_added,
                self.descriptors_removed,
                self.properties_set,
                self.violations,
                self.events,
            )
        )


def diff_states(pre: InstitutionalState, post: InstitutionalState, disabled=False) -> StateDelta:
    delta = StateDelta(
        clock_to=post.clock,
        counters_after=[post.next_id, post.next_seq],
        disabled=disabled,
    )
    post_snap = state_to_json(post)
    created_obj = post.objects.keys() - pre.objects.keys()
    created_pos = post.positions.keys() - pre.positions.keys()
    created_comp = post.compounds.keys() - pre.compounds.keys()
    created_rule = post.rules.keys() - pre.rules.keys()
    delta.created_objects = [i for i in post_snap["objects"] if i["id"] in created_obj]
    delta.created_positions = [i for i in post_snap["positions"] if i["id"] in created_pos]
    delta.created_compounds = [i for i in post_snap["compounds"] if i["id"] in created_comp]
    delta.created_rules = [i for i in post_snap["rules"] if i["id"] in created_rule]
    delta.removed_objects = sorted(pre.objects.keys() - post.objects.keys())
    delta.removed_positions = sorted(pre.positions.keys() - post.positions.keys())
    delta.removed_compounds = sorted(pre.compounds.keys() - post.compounds.keys())
    delta.removed_rules = sorted(pre.rules.keys() - post.rules.keys())

    for oid in sorted(pre.objects.keys() & post.objects.keys()):
        before, after = pre.objects[oid], post.objects[oid]
        for name, info in after.descriptors.items():
            if name not in before.descriptors:
                delta.descriptors_added.append([oid, name, info])
        for name in before.descriptors:
            if name not in after.descriptors:
                delta.descriptors_removed.append([oid, name])
        for prop, value in after.properties.items():
            if before.properties.get(prop) != value:
                delta.properties_set.append([oid, prop, term_to_json(value)])

    for pid in sorted(pre.positions.keys() & post.positions.keys()):
        if post.positions[pid].violated and not pre.positions[pid].violated:
            delta.violations.append(pid)

    delta.events = post_snap["event_log"][len(pre.event_log) :]
    return delta


def apply_delta(snapshot: dict, delta: dict) -> dict:
    """Replay one delta (both in JSON form) onto a snapshot, canonically."""
    objects = {item["id"]: item for item in copy.deepcopy(snapshot["objects"])}
    positions = {item["id"]: item for item in copy.deepcopy(snapshot["positions"])}
    compounds = {item["id"]: item for item in copy.deepcopy(snapshot["compounds"])}
    rules = {item["id"]: item for item in copy.deepcopy(snapshot["rules"])}
    event_log = copy.deepcopy(snapshot["event_log"])

    for oid in delta["removed_objects"]:
        objects.pop(oid, None)
    for pid in delta["removed_positions"]:
        positions.pop(pid, None)
    for cid in delta["removed_compounds"]:
        compounds.pop(cid, None)
    for rid in delta["removed_rules"]:
        rules.pop(rid, None)
    for item in delta["created_objects"]:
        objects[item["id"]] = copy.deepcopy(item)
    for item in delta["created_positions"]:
        positions[item["id"]] = copy.deepcopy(item)
    for item in delta["created_compounds"]:
        compounds[item["id"]] = copy.deepcopy(item)
    for item in delta["created_rules"]:
        rules[item["id"]] = copy.deepcopy(item)
    for oid, name, info in delta["descriptors_added"]:
        objects[oid]["descriptors"].append([name, info])
    for oid, name in delta["descriptors_removed"]:
        objects[oid]["descriptors"] = [
            pair for pair in objects[oid]["descriptors"] if pair[0] != name
        ]
    for oid, prop, value in delta["properties_set"]:
        objects[oid]["properties"][prop] = value
    for pid in delta["violations"]:
        positions[pid]["violated"] = True
    event_log.extend(copy.deepcopy(delta["events"]))

    # Member lists are views over positions/rules; refresh them.
    for comp in compounds.values():
        comp["member_positions"] = sorted(
            p["id"] for p in positions.values() if p["compound"] == comp["id"]
        )
        comp["member_rules"] = sorted(
            r["id"]
            for r in rules.values()
            if r["origin"].get("kind") == "compound"
            and r["origin"].get("compound") == comp["id"]
        )

    result = {
        "dpcl_schema": snapshot["dpcl_schema"],
        "clock": delta["clock_to"],
        "next_id": delta["counters_after"][0],
        "next_seq": delta["counters_after"][1],
        "objects": [objects[k] for k in sorted(objects)],
        "positions": [positions[k] for k in sorted(positions)],
        "compounds": [compounds[k] for k in sorted(compounds)],
        "rules": [rules[k] for k in sorted(rules)],
        "event_log": event_log,
    }
    return attach_displays(result)
