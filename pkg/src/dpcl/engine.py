"""Scenario interpreter over institutional state.

Execution semantics in brief:

* Actions (`do`) are matched against active powers by holder pattern and
  action pattern; every matching power applies its consequence.  Duties
  held by the actor whose action matches are discharged (removed).
  An action matching neither is logged `disabled` and changes nothing.
* Productions (`+x` / `-x`) create or remove objects, compound instances
  and position frames, or raise violation flags.  A production that does
  not change anything is silent: it neither logs inside a cascade nor
  triggers reactive rules (activation-edge semantics).
* Reactive rules fire breadth-first on the occurrences of one step, with
  a firing budget against runaway production loops.
* Transformational rules are maintained as a fixpoint closure: while a
  rule's condition holds its conclusion is derived; when the condition
  fails the derived item is retracted.  Asserted, static and produced
  facts are never retracted by closure.
* The clock only moves through `advance`, which sweeps duty violation
  conditions (edge-triggered, one violation production per duty).

All public operations take a state and return `(new_state, delta)`,
leaving the input untouched; errors leave no partial mutations behind.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .ast import (
    Alternation,
    Arith,
    Atom,
    CompoundCall,
    Comparison,
    DottedRef,
    Duration,
    DutyFrame,
    EventRef,
    FlagRef,
    InstanceRef,
    IntLiteral,
    NowCall,
    OtherPositionFrame,
    OTHER_POSITION_KINDS,
    PositionRef,
    PowerFrame,
    ProductionEvent,
    Program,
    PropRef,
    Qualification,
    ReactiveRule,
    RefinedObject,
    TICK_MAX,
    TimeValue,
    TransformationalRule,
    ObjectRef,
    duration_to_ticks,
    is_identifier,
    render_term,
)
from .parser import parse_duration_text, parse_term_text
from .runtime import (
    CompoundInstance,
    EngineError,
    EventOccurrence,
    InstitutionalState,
    LiveRule,
    ObjectInstance,
    PositionInstance,
    StateDelta,
    apply_delta,
    clone_state,
    diff_states,
    state_to_json,
)

CASCADE_BUDGET = 10_000
CLOSURE_PASS_CAP = 1_000
SUBST_DEPTH_CAP = 50

_FRAME_TYPES = (PowerFrame, DutyFrame, OtherPositionFrame)


# ---------------------------------------------------------------------------
# Name resolution and evaluation


def resolve_name(state: InstitutionalState, name: str):
    """A bare name denotes an object, a uniquely labeled position, or itself."""
    obj = state.object_named(name)
    if obj is not None:
        return ObjectRef(obj.oid)
    labeled = state.positions_labeled(name)
    if len(labeled) == 1:
        return PositionRef(labeled[0].pid)
    return Atom(name)


def to_ticks(state: InstitutionalState, value) -> int | None:
    if isinstance(value, TimeValue):
        return value.ticks
    if isinstance(value, IntLiteral):
        return value.value
    if isinstance(value, Duration):
        try:
            return duration_to_ticks(value)
        except ArithmeticError as exc:
            raise EngineError("overflow", str(exc)) from exc
    if isinstance(value, NowCall):
        return state.clock
    if isinstance(value, FlagRef):
        pos = state.positions.get(value.pid)
        return int(bool(pos and value.field == "violation" and pos.violated))
    return None


def ground_equal(state: InstitutionalState, a, b) -> bool:
    ta, tb = to_ticks(state, a), to_ticks(state, b)
    if ta is not None and tb is not None:
        return ta == tb
    return a == b


def evaluate(state: InstitutionalState, term, env=None, depth=0):
    """Eagerly resolve a term to a ground value; raises on unresolvable paths."""
    env = env or {}
    if depth > SUBST_DEPTH_CAP:
        raise EngineError("unresolved-ref", f"cyclic reference while evaluating `{term}`")
    if isinstance(term, Atom):
        if term.name in env:
            return env[term.name]
        return resolve_name(state, term.name)
    if isinstance(term, (ObjectRef, PositionRef, FlagRef, IntLiteral, TimeValue, Duration)):
        return term
    if isinstance(term, NowCall):
        return TimeValue(state.clock)
    if isinstance(term, PropRef):
        return _read_prop(state, term)
    if isinstance(term, DottedRef):
        head = env.get(term.parts[0])
        if head is None:
            head = resolve_name(state, term.parts[0])
            if isinstance(head, Atom):
                raise EngineError(
                    "unresolved-ref", f"cannot resolve `{term.parts[0]}` in `{term}`"
                )
        return _deref(state, head, term.parts[1:], env, depth)
    if isinstance(term, InstanceRef):
        return _resolve_instance_ref(state, term)
    if isinstance(term, Arith):
        lhs = evaluate(state, term.lhs, env, depth + 1)
        rhs = evaluate(state, term.rhs, env, depth + 1)
        lt, rt = to_ticks(state, lhs), to_ticks(state, rhs)
        if lt is None or rt is None:
            raise EngineError("unresolved-ref", f"non-numeric arithmetic in `{term}`")
        result = lt + rt if term.op == "+" else lt - rt
        if result > TICK_MAX or result < -TICK_MAX:
            raise EngineError("overflow", f"`{term}` leaves the tick range")
        timeish = isinstance(lhs, (TimeValue, NowCall)) or isinstance(rhs, (TimeValue, NowCall))
        return TimeValue(result) if timeish else IntLiteral(result)
    if isinstance(term, Comparison):
        return IntLiteral(int(_compare(state, term, env, depth)))
    if isinstance(term, Qualification):
        return IntLiteral(int(truthy(state, term, env)))
    if isinstance(term, EventRef):
        return EventRef(
            term.name,
            tuple((k, evaluate(state, v, env, depth + 1)) for k, v in term.refinements),
        )
    # patterns, frames and instantiation forms evaluate to themselves;
    # produce/instantiate handles their parts
    return term


def _read_prop(state, ref: PropRef):
    obj = state.objects.get(ref.oid)
    if obj is None:
        raise EngineError("unresolved-ref", f"object {ref.oid} no longer exists")
    value = obj
    for part in ref.path:
        if not isinstance(value, ObjectInstance):
            value = state.objects.get(value.oid) if isinstance(value, ObjectRef) else None
            if value is None:
                raise EngineError("unresolved-ref", f"cannot resolve `{ref}`")
        if part not in value.properties:
            raise EngineError(
                "unresolved-ref", f"`{value.base_name}` has no property `{part}`"
            )
        value = value.properties[part]
    return value


def _deref(state, base, path, env, depth):
    if isinstance(base, Atom):
        # symbol-valued binding: keep the path symbolic against that name
        return evaluate(state, DottedRef((base.name,) + tuple(path)), env, depth + 1)
    for i, part in enumerate(path):
        if isinstance(base, ObjectRef):
            return evaluate(state, PropRef(base.oid, tuple(path[i:])), env, depth + 1)
        if isinstance(base, PositionRef):
            base = _position_field(state, base.pid, part)
            continue
        if isinstance(base, InstanceRef):
            comp = state.compounds.get(base.num)
            if comp is None or part not in comp.params:
                raise EngineError("unresolved-ref", f"`{base}` has no field `{part}`")
            base = comp.params[part]
            continue
        raise EngineError("unresolved-ref", f"cannot access `{part}` on `{base}`")
    return base


def _position_field(state, pid: int, field: str):
    if field == "violation":
        return FlagRef(pid, "violation")
    pos = state.positions.get(pid)
    if pos is None:
        raise EngineError("unresolved-ref", f"position {pid} no longer exists")
    value = getattr(pos.frame, field, None)
    if value is None and isinstance(pos.frame, OtherPositionFrame):
        for key, v in pos.frame.body:
            if key == field:
                value = v
                break
    if value is None:
        raise EngineError("unresolved-ref", f"position {pid} has no field `{field}`")
    return value


def _resolve_instance_ref(state, ref: InstanceRef):
    comp = state.compounds.get(ref.num)
    if comp is not None and comp.decl_name == ref.name:
        return ref
    obj = state.objects.get(ref.num)
    if obj is not None and obj.base_name == ref.name:
        return ObjectRef(obj.oid)
    pos = state.positions.get(ref.num)
    if pos is not None and (pos.kind == ref.name or pos.label == ref.name):
        return PositionRef(pos.pid)
    raise EngineError("missing-target", f"no instance `{ref}`")


def _compare(state, cmp: Comparison, env, depth=0) -> bool:
    lhs = evaluate(state, cmp.lhs, env, depth + 1)
    rhs = evaluate(state, cmp.rhs, env, depth + 1)
    if cmp.op in ("==", "!="):
        eq = ground_equal(state, lhs, rhs)
        return eq if cmp.op == "==" else not eq
    lt, rt = to_ticks(state, lhs), to_ticks(state, rhs)
    if lt is None or rt is None:
        return False  # ordering is defined on time-like values only
    if cmp.op == ">":
        return lt > rt
    if cmp.op == ">=":
        return lt >= rt
    if cmp.op == "<":
        return lt < rt
    if cmp.op == "<=":
        return lt <= rt
    raise EngineError("bad-step", f"unknown comparison operator {cmp.op!r}")


def truthy(state: InstitutionalState, term, env=None) -> bool:
    """Lazy condition evaluation; anything unresolvable simply does not hold."""
    env = env or {}
    if isinstance(term, Comparison):
        try:
            return _compare(state, term, env)
        except EngineError:
            return False
    if isinstance(term, Atom):
        if term.name in env:
            return truthy(state, env[term.name], env)
        if state.object_named(term.name) is not None:
            return True
        return bool(state.compounds_named(term.name))
    if isinstance(term, Qualification):
        try:
            subject = evaluate(state, term.subject, env)
        except EngineError:
            return False
        if isinstance(subject, ObjectRef):
            obj = state.objects.get(subject.oid)
            return bool(obj and obj.has_descriptor(term.descriptor))
        return False
    if isinstance(term, (DottedRef, PropRef)):
        try:
            value = evaluate(state, term, env)
        except EngineError:
            return False
        return _truthy_value(state, value)
    if isinstance(term, FlagRef):
        pos = state.positions.get(term.pid)
        return bool(pos and term.field == "violation" and pos.violated)
    if isinstance(term, ObjectRef):
        return term.oid in state.objects
    if isinstance(term, PositionRef):
        return term.pid in state.positions
    if isinstance(term, InstanceRef):
        try:
            _resolve_instance_ref(state, term)
            return True
        except EngineError:
            return False
    if isinstance(term, Alternation):
        return any(truthy(state, o, env) for o in term.options)
    if isinstance(term, (IntLiteral, TimeValue, Duration, NowCall)):
        return bool(to_ticks(state, term))
    return False


def _truthy_value(state, value) -> bool:
    if isinstance(value, (IntLiteral, TimeValue, Duration)):
        return bool(to_ticks(state, value))
    if isinstance(value, ObjectRef):
        return value.oid in state.objects
    if isinstance(value, PositionRef):
        return value.pid in state.positions
    if isinstance(value, FlagRef):
        pos = state.positions.get(value.pid)
        return bool(pos and pos.violated)
    return True


# ---------------------------------------------------------------------------
# Substitution (binding names into frames and rules)


def substitute(state: InstitutionalState, node, env: dict, depth: int = 0):
    """Replace bound names in a term tree with their ground values.

    `now()` is left untouched: it stays lazy in conditions and is only
    forced at consequence-application time via `evaluate`.
    """
    if depth > SUBST_DEPTH_CAP:
        raise EngineError("unresolved-ref", f"cyclic reference while binding `{node}`")
    if not env:
        return node

    def sub(n):
        return substitute(state, n, env, depth + 1)

    if isinstance(node, Atom):
        return env.get(node.name, node)
    if isinstance(node, DottedRef):
        head = env.get(node.parts[0])
        if head is None:
            return node
        return _bind_path(state, head, node.parts[1:], env, depth)
    if isinstance(node, CompoundCall):
        return CompoundCall(node.name, tuple(sub(a) for a in node.args))
    if isinstance(node, RefinedObject):
        return RefinedObject(node.head, tuple((k, sub(v)) for k, v in node.body))
    if isinstance(node, Alternation):
        return Alternation(tuple(sub(o) for o in node.options))
    if isinstance(node, Comparison):
        return Comparison(sub(node.lhs), node.op, sub(node.rhs))
    if isinstance(node, Arith):
        return Arith(sub(node.lhs), node.op, sub(node.rhs))
    if isinstance(node, Qualification):
        return Qualification(sub(node.subject), node.descriptor)
    if isinstance(node, EventRef):
        return EventRef(node.name, tuple((k, sub(v)) for k, v in node.refinements))
    if isinstance(node, ProductionEvent):
        return ProductionEvent(node.polarity, sub(node.target))
    if isinstance(node, PowerFrame):
        return PowerFrame(sub(node.holder), sub(node.action), sub(node.consequence), node.label)
    if isinstance(node, DutyFrame):
        return DutyFrame(
            sub(node.holder),
            sub(node.counterparty),
            sub(node.action),
            None if node.violation is None else sub(node.violation),
            node.label,
        )
    if isinstance(node, OtherPositionFrame):
        return OtherPositionFrame(node.kind, tuple((k, sub(v)) for k, v in node.body), node.label)
    if isinstance(node, TransformationalRule):
        return TransformationalRule(sub(node.condition), sub(node.conclusion))
    if isinstance(node, ReactiveRule):
        return ReactiveRule(sub(node.trigger), sub(node.effect))
    return node


def _bind_path(state, base, path, env, depth):
    """Bind `x.field...` given the ground value of `x`."""
    if isinstance(base, ObjectRef):
        return PropRef(base.oid, tuple(path))
    if isinstance(base, Atom):
        return DottedRef((base.name,) + tuple(path))
    if isinstance(base, PositionRef):
        field, rest = path[0], path[1:]
        value = _position_field_lenient(state, base.pid, field)
        if value is None:
            return DottedRef((f"__position_{base.pid}",) + tuple(path))
        value = substitute(state, value, env, depth + 1)
        if rest:
            if isinstance(value, ObjectRef):
                return PropRef(value.oid, tuple(rest))
            return _bind_path(state, value, rest, env, depth + 1)
        return value
    if isinstance(base, InstanceRef):
        comp = state.compounds.get(base.num)
        field, rest = path[0], path[1:]
        if comp is None or field not in comp.params:
            return DottedRef((f"__compound_{base.num}",) + tuple(path))
        value = comp.params[field]
        if rest:
            return _bind_path(state, value, rest, env, depth + 1)
        return value
    return DottedRef(("__unbound",) + tuple(path))


def _position_field_lenient(state, pid, field):
    if field == "violation":
        return FlagRef(pid, "violation")
    pos = state.positions.get(pid)
    if pos is None:
        return None
    value = getattr(pos.frame, field, None)
    if value is None and isinstance(pos.frame, OtherPositionFrame):
        for key, v in pos.frame.body:
            if key == field:
                return v
    return value


# ---------------------------------------------------------------------------
# Pattern matching


def holder_matches(state: InstitutionalState, pattern, actor: ObjectInstance) -> bool:
    if isinstance(pattern, Atom):
        return pattern.name == actor.base_name or actor.has_descriptor(pattern.name)
    if isinstance(pattern, ObjectRef):
        return pattern.oid == actor.oid
    if isinstance(pattern, InstanceRef):
        return pattern.num == actor.oid and pattern.name == actor.base_name
    if isinstance(pattern, Alternation):
        return any(holder_matches(state, o, actor) for o in pattern.options)
    return False


def match_value(state, pattern, value, bindings: dict, env: dict) -> bool:
    """Match one refinement pattern against a ground value, binding free atoms."""
    if isinstance(pattern, Atom):
        if pattern.name in bindings:
            return ground_equal(state, bindings[pattern.name], value)
        if pattern.name in env:
            return ground_equal(state, env[pattern.name], value)
        resolved = resolve_name(state, pattern.name)
        if isinstance(resolved, Atom):
            bindings[pattern.name] = value  # a free name binds to the event value
            return True
        return ground_equal(state, resolved, value)
    try:
        resolved = evaluate(state, pattern, env | bindings)
    except EngineError:
        return False
    return ground_equal(state, resolved, value)


def action_matches(state, pattern: EventRef, event: EventRef, env: dict):
    """Match an action pattern against a ground event; returns bindings or None."""
    if pattern.name != event.name:
        return None
    given = dict(event.refinements)
    bindings: dict = {}
    for field, pat in pattern.refinements:
        if field not in given:
            return None
        if not match_value(state, pat, given[field], bindings, env):
            return None
    return bindings


def trigger_matches(state, trigger, event):
    """Match a reactive trigger against an occurrence; returns bindings or None."""
    if isinstance(trigger, EventRef) and isinstance(event, EventRef):
        return action_matches(state, trigger, event, {})
    if isinstance(trigger, ProductionEvent) and isinstance(event, ProductionEvent):
        if trigger.polarity != event.polarity:
            return None
        pat, got = trigger.target, event.target
        if isinstance(pat, FlagRef):
            return {} if pat == got else None
        if isinstance(pat, Atom):
            if isinstance(got, InstanceRef) and got.name == pat.name:
                return {}
            return None
        if isinstance(pat, (RefinedObject,)) and isinstance(got, InstanceRef):
            return {} if pat.head == got.name else None
        if isinstance(pat, CompoundCall) and isinstance(got, InstanceRef):
            return {} if pat.name == got.name else None
        if isinstance(pat, InstanceRef):
            return {} if pat == got else None
        if isinstance(pat, (PositionRef, ObjectRef)):
            return {} if pat == got else None
        if isinstance(pat, DottedRef):
            return None  # an unresolved flag pattern can never fire
        return None
    return None


# ---------------------------------------------------------------------------
# Instantiation and productions


def _instantiate_position(state, frame, origin, compound=None) -> int:
    pid = state.fresh_id()
    state.positions[pid] = PositionInstance(
        pid=pid,
        kind=frame.kind,
        frame=frame,
        origin=origin,
        label=frame.label,
        compound=compound,
    )
    return pid


def _instantiate_compound(state, decl, param_values: dict, origin) -> int:
    cid = state.fresh_id()
    params = {p: param_values[p] for p in decl.params}
    state.compounds[cid] = CompoundInstance(cid, decl.name, params, origin)
    member_origin = {"kind": "compound", "compound": cid}
    raw_frames = []
    raw_rules = []
    env = dict(params)
    for member in decl.members:
        if isinstance(member, _FRAME_TYPES):
            pid = _instantiate_position(state, member, member_origin, compound=cid)
            raw_frames.append(pid)
            if member.label:
                env[member.label] = PositionRef(pid)
        else:
            rid = state.fresh_id()
            state.rules[rid] = LiveRule(rid, member, member_origin)
            raw_rules.append(rid)
    for pid in raw_frames:
        pos = state.positions[pid]
        pos.frame = substitute(state, pos.frame, env)
    for rid in raw_rules:
        rule = state.rules[rid]
        rule.rule = substitute(state, rule.rule, env)
    return cid


def _compound_decl(state, name):
    return state.program.compounds().get(name)


def _create_object(state, name, properties, origin) -> int:
    oid = state.fresh_id()
    state.objects[oid] = ObjectInstance(
        oid=oid, base_name=name, properties=properties, descriptors={}, origin=origin
    )
    return oid


def apply_production(state, polarity, target, env, origin, strict=True):
    """Apply one production; returns (changed, ground_ref).

    `origin` is the origin dict stamped on anything created.  With
    `strict=False` (reactive cascades) missing removal targets are no-ops
    instead of errors.
    """
    if polarity == "create":
        return _apply_create(state, target, env, origin)
    return _apply_remove(state, target, strict)


def _apply_create(state, target, env, origin):
    if isinstance(target, _FRAME_TYPES):
        frame = substitute(state, target, env)
        pid = _instantiate_position(state, frame, origin)
        return True, PositionRef(pid)
    if isinstance(target, RefinedObject):
        decl = _compound_decl(state, target.head)
        if decl is not None:
            values = {}
            body = dict(target.body)
            for p in decl.params:
                if p not in body:
                    raise EngineError(
                        "bad-target", f"`{target.head}` instantiation missing `{p}`"
                    )
                values[p] = evaluate(state, substitute(state, body[p], env), env)
            cid = _instantiate_compound(state, decl, values, origin)
            return True, InstanceRef(target.head, cid)
        existing = state.object_named(target.head)
        if existing is not None:
            return False, InstanceRef(target.head, existing.oid)
        props = {
            k: evaluate(state, substitute(state, v, env), env) for k, v in target.body
        }
        oid = _create_object(state, target.head, props, origin)
        return True, InstanceRef(target.head, oid)
    if isinstance(target, CompoundCall):
        decl = _compound_decl(state, target.name)
        if decl is None:
            raise EngineError("bad-target", f"unknown compound `{target.name}`")
        if len(target.args) != len(decl.params):
            raise EngineError("bad-target", f"wrong arity for `{target.name}`")
        values = {
            p: evaluate(state, substitute(state, a, env), env)
            for p, a in zip(decl.params, target.args)
        }
        cid = _instantiate_compound(state, decl, values, origin)
        return True, InstanceRef(target.name, cid)
    if isinstance(target, Atom):
        decl = _compound_decl(state, target.name)
        if decl is not None and not decl.params:
            if state.compounds_named(target.name):
                comp = state.compounds_named(target.name)[0]
                return False, InstanceRef(target.name, comp.cid)
            cid = _instantiate_compound(state, decl, {}, origin)
            return True, InstanceRef(target.name, cid)
        existing = state.object_named(target.name)
        if existing is not None:
            return False, InstanceRef(target.name, existing.oid)
        oid = _create_object(state, target.name, {}, origin)
        return True, InstanceRef(target.name, oid)
    if isinstance(target, (DottedRef, PropRef, FlagRef)):
        slot = evaluate(state, target, env) if isinstance(target, DottedRef) else target
        return _raise_flag(state, slot)
    if isinstance(target, ObjectRef):
        if target.oid in state.objects:
            obj = state.objects[target.oid]
            return False, InstanceRef(obj.base_name, obj.oid)
        raise EngineError("missing-target", f"object {target.oid} no longer exists")
    if isinstance(target, PositionRef):
        if target.pid in state.positions:
            return False, target
        raise EngineError("missing-target", f"position {target.pid} no longer exists")
    if isinstance(target, InstanceRef):
        ref = _resolve_instance_ref(state, target)  # raises if missing
        return False, target if isinstance(ref, InstanceRef) else target
    raise EngineError("bad-target", f"cannot produce `{target}`")


def _raise_flag(state, slot):
    if isinstance(slot, FlagRef):
        pos = state.positions.get(slot.pid)
        if pos is None or slot.field != "violation" or pos.kind != "duty":
            return False, slot
        if pos.violated:
            return False, slot
        pos.violated = True
        return True, slot
    if isinstance(slot, PropRef):
        obj = state.objects.get(slot.oid)
        if obj is None or len(slot.path) != 1:
            return False, slot
        if _truthy_value(state, obj.properties.get(slot.path[0], IntLiteral(0))):
            return False, slot
        obj.properties[slot.path[0]] = IntLiteral(1)
        return True, slot
    raise EngineError("bad-target", f"cannot set `{slot}`")


def _apply_remove(state, target, strict):
    def missing(what):
        if strict:
            raise EngineError("missing-target", f"nothing to remove: {what}")
        return False, target

    if isinstance(target, DottedRef):
        try:
            target = evaluate(state, target, {})
        except EngineError:
            return missing(str(target))
    if isinstance(target, Atom):
        obj = state.object_named(target.name)
        if obj is not None:
            del state.objects[obj.oid]
            return True, InstanceRef(target.name, obj.oid)
        comps = state.compounds_named(target.name)
        if len(comps) == 1:
            return _remove_compound(state, comps[0].cid, target.name)
        if len(comps) > 1:
            raise EngineError(
                "ambiguous-target",
                f"several `{target.name}` instances exist; use `{target.name}#<id>`",
            )
        return missing(target.name)
    if isinstance(target, InstanceRef):
        if target.num in state.compounds and state.compounds[target.num].decl_name == target.name:
            return _remove_compound(state, target.num, target.name)
        obj = state.objects.get(target.num)
        if obj is not None and obj.base_name == target.name:
            del state.objects[target.num]
            return True, target
        pos = state.positions.get(target.num)
        if pos is not None and (pos.kind == target.name or pos.label == target.name):
            del state.positions[target.num]
            return True, target
        return missing(str(target))
    if isinstance(target, ObjectRef):
        obj = state.objects.get(target.oid)
        if obj is None:
            return missing(f"object {target.oid}")
        del state.objects[target.oid]
        return True, InstanceRef(obj.base_name, obj.oid)
    if isinstance(target, PositionRef):
        if target.pid not in state.positions:
            return missing(f"position {target.pid}")
        del state.positions[target.pid]
        return True, target
    if isinstance(target, FlagRef):
        pos = state.positions.get(target.pid)
        if pos is None or not pos.violated:
            return False, target
        pos.violated = False
        return True, target
    if isinstance(target, PropRef):
        obj = state.objects.get(target.oid)
        if obj is None or len(target.path) != 1:
            return missing(str(target))
        if not _truthy_value(state, obj.properties.get(target.path[0], IntLiteral(0))):
            return False, target
        obj.properties[target.path[0]] = IntLiteral(0)
        return True, target
    raise EngineError("bad-target", f"cannot remove `{target}`")


def _remove_compound(state, cid, name):
    for pid in state.member_positions(cid):
        del state.positions[pid]
    for rid in state.member_rules(cid):
        del state.rules[rid]
    del state.compounds[cid]
    return True, InstanceRef(name, cid)


# ---------------------------------------------------------------------------
# Occurrences, cascades


def _log_event(state, event, actor, provenance, disabled=False) -> EventOccurrence:
    occ = EventOccurrence(
        seq=state.fresh_seq(),
        at=state.clock,
        actor=actor,
        event=event,
        provenance=provenance,
        disabled=disabled,
    )
    state.event_log.append(occ)
    return occ


def _emit_production(state, polarity, target, env, provenance, strict, always_log=False):
    """Apply a production and log it when it changed something.

    Returns the occurrence (or None).  The sequence number is allocated
    first so creations can carry `produced(event)` origins.
    """
    seq_origin = {"kind": "produced", "event": state.next_seq}
    changed, ref = apply_production(state, polarity, target, env, seq_origin, strict)
    if changed or always_log:
        return _log_event(state, ProductionEvent(polarity, ref), None, provenance), changed
    return None, changed


def _cascade(state, occurrences):
    """Fire reactive rules breadth-first over this step's occurrences."""
    queue = deque(occurrences)
    fired = 0
    while queue:
        occ = queue.popleft()
        for rid in sorted(state.rules):
            live = state.rules.get(rid)
            if live is None or not isinstance(live.rule, ReactiveRule):
                continue
            bindings = trigger_matches(state, live.rule.trigger, occ.event)
            if bindings is None:
                continue
            fired += 1
            if fired > CASCADE_BUDGET:
                raise EngineError(
                    "cascade-limit",
                    f"reactive cascade exceeded {CASCADE_BUDGET} firings; likely a production loop",
                )
            effect = substitute(state, live.rule.effect, bindings)
            provenance = {"kind": "reactive", "rule": rid}
            if isinstance(effect, EventRef):
                ground = evaluate(state, effect, bindings)
                queue.append(_log_event(state, ground, None, provenance))
            else:
                new_occ, changed = _emit_production(
                    state, effect.polarity, effect.target, bindings, provenance, strict=False
                )
                if new_occ is not None:
                    queue.append(new_occ)


# ---------------------------------------------------------------------------
# Transformational closure


def _all_derived_items(state):
    """Every derived item with its supporting rule id."""
    items = []
    for oid, obj in state.objects.items():
        if obj.origin.get("kind") == "derived":
            items.append((obj.origin.get("rule"), ("object", oid)))
        for name, info in obj.descriptors.items():
            if info.get("prov") == "derived":
                items.append((info.get("rule"), ("descriptor", oid, name)))
    for pid, pos in state.positions.items():
        if pos.origin.get("kind") == "derived":
            items.append((pos.origin.get("rule"), ("position", pid)))
    for cid, comp in state.compounds.items():
        if comp.origin.get("kind") == "derived":
            items.append((comp.origin.get("rule"), ("compound", cid)))
    return items


def _derived_item_for(state, rid):
    for rule_id, item in _all_derived_items(state):
        if rule_id == rid:
            return item
    return None


def _derive(state, rid, conclusion) -> bool:
    origin = {"kind": "derived", "rule": rid}
    if isinstance(conclusion, ProductionEvent):
        if conclusion.polarity != "create":
            return False
        conclusion = conclusion.target
    if isinstance(conclusion, _FRAME_TYPES):
        _instantiate_position(state, conclusion, origin)
        return True
    if isinstance(conclusion, Qualification):
        try:
            subject = evaluate(state, conclusion.subject, {})
        except EngineError:
            return False
        if not isinstance(subject, ObjectRef) or subject.oid not in state.objects:
            return False
        obj = state.objects[subject.oid]
        if conclusion.descriptor in obj.descriptors:
            return False
        obj.descriptors[conclusion.descriptor] = {"prov": "derived", "rule": rid}
        return True
    if isinstance(conclusion, Atom):
        decl = _compound_decl(state, conclusion.name)
        if decl is not None and not decl.params:
            if state.compounds_named(conclusion.name):
                return False
            _instantiate_compound(state, decl, {}, origin)
            return True
        if state.object_named(conclusion.name) is not None:
            return False
        _create_object(state, conclusion.name, {}, origin)
        return True
    if isinstance(conclusion, (RefinedObject, CompoundCall)):
        try:
            changed, _ = _apply_create(state, conclusion, {}, origin)
        except EngineError:
            return False
        return changed
    return False


def _retract(state, item) -> None:
    kind = item[0]
    if kind == "object":
        state.objects.pop(item[1], None)
    elif kind == "position":
        state.positions.pop(item[1], None)
    elif kind == "compound":
        if item[1] in state.compounds:
            _remove_compound(state, item[1], state.compounds[item[1]].decl_name)
    elif kind == "descriptor":
        obj = state.objects.get(item[1])
        if obj is not None:
            obj.descriptors.pop(item[2], None)


def run_closure(state: InstitutionalState) -> None:
    """Fixpoint of transformational rules with support-based retraction."""
    for _ in range(CLOSURE_PASS_CAP):
        changed = False
        live_trans = {
            rid
            for rid, live in state.rules.items()
            if isinstance(live.rule, TransformationalRule)
        }
        for rule_id, item in _all_derived_items(state):
            if rule_id not in live_trans:  # supporting rule is gone
                _retract(state, item)
                changed = True
        for rid in sorted(live_trans):
            live = state.rules.get(rid)
            if live is None:
                continue
            holds = truthy(state, live.rule.condition)
            item = _derived_item_for(state, rid)
            if holds and item is None:
                if _derive(state, rid, live.rule.conclusion):
                    changed = True
            elif not holds and item is not None:
                _retract(state, item)
                changed = True
        if not changed:
            return
    raise EngineError("closure-divergence", f"closure did not settle in {CLOSURE_PASS_CAP} passes")


# ---------------------------------------------------------------------------
# Public operations


def init_state(program: Program, at: int = 0) -> InstitutionalState:
    """Instantiate top-level frames and rules, then settle the closure."""
    state = InstitutionalState(program=program, clock=at)
    env: dict = {}
    frame_pids = []
    rule_rids = []
    for decl in program.declarations:
        if isinstance(decl, _FRAME_TYPES):
            pid = _instantiate_position(state, decl, {"kind": "static"})
            frame_pids.append(pid)
            if decl.label:
                env[decl.label] = PositionRef(pid)
        elif isinstance(decl, (TransformationalRule, ReactiveRule)):
            rid = state.fresh_id()
            state.rules[rid] = LiveRule(rid, decl, {"kind": "static"})
            rule_rids.append(rid)
    for pid in frame_pids:
        state.positions[pid].frame = substitute(state, state.positions[pid].frame, env)
    for rid in rule_rids:
        state.rules[rid].rule = substitute(state, state.rules[rid].rule, env)
    run_closure(state)
    return state


def _resolve_actor(state, actor) -> ObjectInstance:
    if isinstance(actor, int):
        obj = state.objects.get(actor)
    else:
        obj = state.object_named(str(actor))
    if obj is None:
        raise EngineError("unknown-actor", f"no object named `{actor}`")
    return obj


def assert_object(state, name, descriptors=(), properties=()):
    """Introduce a scenario-level object with asserted descriptors."""
    pre = state
    state = clone_state(state)
    if not isinstance(name, str) or not is_identifier(name):
        raise EngineError("bad-step", f"object name must be an identifier: {name!r}")
    if state.object_named(name) is not None:
        raise EngineError("duplicate-object", f"an object named `{name}` already exists")
    props = {}
    for key, raw in dict(properties).items():
        props[key] = evaluate(state, raw, {})
    oid = _create_object(state, name, props, {"kind": "asserted"})
    obj = state.objects[oid]
    for desc in descriptors:
        obj.descriptors[desc] = {"prov": "asserted"}
    run_closure(state)
    return state, diff_states(pre, state)


def do_action(state, actor, event: EventRef):
    """Perform an action: match powers and duties, cascade, close."""
    pre = state
    state = clone_state(state)
    actor_obj = _resolve_actor(state, actor)
    ground = EventRef(
        event.name,
        tuple((k, evaluate(state, v, {})) for k, v in event.refinements),
    )
    matched_powers = []
    matched_duties = []
    for pid in sorted(state.positions):
        pos = state.positions[pid]
        if pos.kind == "power":
            if not holder_matches(state, pos.frame.holder, actor_obj):
                continue
            env = {"holder": ObjectRef(actor_obj.oid)}
            bindings = action_matches(state, pos.frame.action, ground, env)
            if bindings is not None:
                matched_powers.append((pid, env | bindings))
        elif pos.kind == "duty":
            if not holder_matches(state, pos.frame.holder, actor_obj):
                continue
            env = {"holder": ObjectRef(actor_obj.oid)}
            bindings = action_matches(state, pos.frame.action, ground, env)
            if bindings is not None:
                matched_duties.append(pid)
    disabled = not matched_powers and not matched_duties
    occ = _log_event(state, ground, actor_obj.oid, {"kind": "external"}, disabled)
    queue = [occ]
    if not disabled:
        for pid, env in matched_powers:
            if pid not in state.positions:
                continue
            queue.extend(_apply_consequence(state, pid, env))
        for pid in matched_duties:
            state.positions.pop(pid, None)  # duty discharged by performance
        _cascade(state, queue)
        run_closure(state)
    return state, diff_states(pre, state, disabled=disabled)


def _apply_consequence(state, pid, env):
    """Apply one power's consequence; returns production occurrences."""
    frame = state.positions[pid].frame
    cons = substitute(state, frame.consequence, env)
    provenance = {"kind": "consequence", "power": pid}
    if isinstance(cons, Qualification):
        subject = evaluate(state, cons.subject, env)
        if not isinstance(subject, ObjectRef) or subject.oid not in state.objects:
            raise EngineError("unresolved-ref", f"cannot qualify `{cons.subject}`")
        obj = state.objects[subject.oid]
        if cons.descriptor not in obj.descriptors:
            obj.descriptors[cons.descriptor] = {"prov": "asserted"}
        return []
    if isinstance(cons, ProductionEvent):
        polarity, target = cons.polarity, cons.target
    elif isinstance(cons, (DottedRef, FlagRef, PropRef, Atom, RefinedObject, CompoundCall)) or isinstance(
        cons, _FRAME_TYPES
    ):
        polarity, target = "create", cons
    else:
        raise EngineError("bad-target", f"cannot apply consequence `{cons}`")
    new_occ, _ = _emit_production(state, polarity, target, env, provenance, strict=True)
    return [new_occ] if new_occ is not None else []


def advance_clock(state, duration: Duration):
    """Move the clock and sweep duty violation conditions (edge-triggered)."""
    pre = state
    state = clone_state(state)
    try:
        ticks = duration_to_ticks(duration)
    except ArithmeticError as exc:
        raise EngineError("overflow", str(exc)) from exc
    if ticks < 0:
        raise EngineError("bad-step", "cannot advance by a negative duration")
    if state.clock + ticks > TICK_MAX:
        raise EngineError("overflow", "clock advance leaves the tick range")
    state.clock += ticks
    for _ in range(CLOSURE_PASS_CAP):
        run_closure(state)
        occurrences = []
        for pid in sorted(state.positions):
            pos = state.positions[pid]
            if pos.kind != "duty" or pos.violated or pos.frame.violation is None:
                continue
            if truthy(state, pos.frame.violation):
                pos.violated = True
                occurrences.append(
                    _log_event(
                        state,
                        ProductionEvent("create", FlagRef(pid, "violation")),
                        None,
                        {"kind": "violation", "duty": pid},
                    )
                )
        if not occurrences:
            break
        _cascade(state, occurrences)
    else:
        raise EngineError("cascade-limit", "violation sweep did not settle")
    return state, diff_states(pre, state)


def produce(state, production: ProductionEvent):
    """Apply an external production event."""
    pre = state
    state = clone_state(state)
    target = production.target
    if isinstance(target, DottedRef):
        target = evaluate(state, target, {})
    occ, changed = _emit_production(
        state,
        production.polarity,
        target,
        {},
        {"kind": "external"},
        strict=True,
        always_log=True,
    )
    if changed:
        _cascade(state, [occ])
    run_closure(state)
    return state, diff_states(pre, state)


def recompute_closure(state):
    """Re-settle the transformational closure (idempotent)."""
    state = clone_state(state)
    run_closure(state)
    return state


# ---------------------------------------------------------------------------
# Queries


def query_positions(state, kind=None, holder=None, action=None, violated=None):
    """All positions matching the filter, ordered by instance id."""
    holder_obj = None
    if holder is not None:
        if isinstance(holder, int):
            holder_obj = state.objects.get(holder)
        else:
            holder_obj = state.object_named(str(holder))
        if holder_obj is None:
            return []
    results = []
    for pid in sorted(state.positions):
        pos = state.positions[pid]
        if kind is not None:
            if kind == "other":
                if pos.kind not in OTHER_POSITION_KINDS:
                    continue
            elif pos.kind != kind:
                continue
        if holder_obj is not None:
            pattern = getattr(pos.frame, "holder", None)
            if pattern is None or not holder_matches(state, pattern, holder_obj):
                continue
        if action is not None:
            ev = getattr(pos.frame, "action", None)
            if ev is None or ev.name != action:
                continue
        if violated is not None and pos.violated != violated:
            continue
        results.append(pos)
    return results


def enabled_actions(state, actor):
    """Action templates the actor could perform through an active power."""
    actor_obj = _resolve_actor(state, actor)
    env = {"holder": ObjectRef(actor_obj.oid)}
    results = []
    for pid in sorted(state.positions):
        pos = state.positions[pid]
        if pos.kind != "power":
            continue
        if not holder_matches(state, pos.frame.holder, actor_obj):
            continue
        template = []
        feasible = True
        for field, pat in pos.frame.action.refinements:
            if isinstance(pat, Atom) and isinstance(resolve_name(state, pat.name), Atom):
                template.append((field, pat))  # free slot: any value
                continue
            try:
                template.append((field, evaluate(state, pat, env)))
            except EngineError:
                feasible = False
                break
        if feasible:
            results.append((pid, EventRef(pos.frame.action.name, tuple(template))))
    return results


# ---------------------------------------------------------------------------
# Scenarios and traces


@dataclass(frozen=True)
class AssertStep:
    name: str
    descriptors: tuple = ()
    properties: tuple = ()  # ((field, term), ...)


@dataclass(frozen=True)
class DoStep:
    actor: object  # name or object id
    event: EventRef


@dataclass(frozen=True)
class AdvanceStep:
    duration: Duration


@dataclass(frozen=True)
class ProduceStep:
    production: ProductionEvent


@dataclass(frozen=True)
class Scenario:
    steps: tuple = ()


def _value_from_json(raw):
    if isinstance(raw, bool):
        return IntLiteral(int(raw))
    if isinstance(raw, int):
        return IntLiteral(raw)
    if isinstance(raw, str):
        try:
            return parse_term_text(raw)
        except ValueError as exc:
            raise EngineError("bad-step", f"bad scenario value {raw!r}: {exc}") from exc
    raise EngineError("bad-step", f"unsupported scenario value: {raw!r}")


def _value_to_json(term):
    if isinstance(term, IntLiteral):
        return term.value
    return render_term(term)


def step_from_json(data: dict):
    if not isinstance(data, dict) or len(data) != 1:
        raise EngineError("bad-step", f"a step must be a single-key object: {data!r}")
    key, body = next(iter(data.items()))
    if key == "assert":
        props = tuple(
            (k, _value_from_json(v)) for k, v in body.get("properties", {}).items()
        )
        return AssertStep(
            name=body["name"],
            descriptors=tuple(body.get("descriptors", ())),
            properties=props,
        )
    if key == "do":
        refinements = tuple(
            (k, _value_from_json(v)) for k, v in body.get("refinements", {}).items()
        )
        return DoStep(actor=body["actor"], event=EventRef(body["event"], refinements))
    if key == "advance":
        try:
            return AdvanceStep(parse_duration_text(body))
        except ValueError as exc:
            raise EngineError("bad-step", f"bad duration {body!r}") from exc
    if key == "produce":
        try:
            term = parse_term_text(body)
        except ValueError as exc:
            raise EngineError("bad-step", f"bad production {body!r}") from exc
        if not isinstance(term, ProductionEvent):
            raise EngineError("bad-step", f"`produce` needs `+target` or `-target`: {body!r}")
        return ProduceStep(term)
    raise EngineError("bad-step", f"unknown step kind `{key}`")


def step_to_json(step) -> dict:
    if isinstance(step, AssertStep):
        return {
            "assert": {
                "name": step.name,
                "descriptors": list(step.descriptors),
                "properties": {k: _value_to_json(v) for k, v in step.properties},
            }
        }
    if isinstance(step, DoStep):
        return {
            "do": {
                "actor": step.actor,
                "event": step.event.name,
                "refinements": {k: _value_to_json(v) for k, v in step.event.refinements},
            }
        }
    if isinstance(step, AdvanceStep):
        return {"advance": str(step.duration)}
    if isinstance(step, ProduceStep):
        return {"produce": render_term(step.production)}
    raise EngineError("bad-step", f"unknown step type {type(step).__name__}")


def scenario_from_json(data: dict) -> Scenario:
    return Scenario(tuple(step_from_json(s) for s in data.get("steps", ())))


def scenario_to_json(scenario: Scenario) -> dict:
    return {"steps": [step_to_json(s) for s in scenario.steps]}


def apply_step(state, step):
    if isinstance(step, AssertStep):
        return assert_object(state, step.name, step.descriptors, step.properties)
    if isinstance(step, DoStep):
        return do_action(state, step.actor, step.event)
    if isinstance(step, AdvanceStep):
        return advance_clock(state, step.duration)
    if isinstance(step, ProduceStep):
        return produce(state, step.production)
    raise EngineError("bad-step", f"unknown step type {type(step).__name__}")


@dataclass
class Trace:
    program_name: str
    initial: dict
    steps: list  # [(step, StateDelta, clock_after)]
    final: dict
    error: dict | None = None

    def to_json(self) -> dict:
        return {
            "dpcl_schema": 1,
            "program": self.program_name,
            "initial": self.initial,
            "steps": [
                {"step": step_to_json(s), "delta": d.to_json(), "clock": c}
                for s, d, c in self.steps
            ],
            "final": self.final,
            "error": self.error,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Trace":
        steps = [
            (step_from_json(item["step"]), StateDelta.from_json(item["delta"]), item["clock"])
            for item in data["steps"]
        ]
        return cls(
            program_name=data["program"],
            initial=data["initial"],
            steps=steps,
            final=data["final"],
            error=data.get("error"),
        )

    def replay(self) -> dict:
        """Reapply the recorded deltas; must reproduce the final snapshot."""
        snap = self.initial
        for _, delta, _ in self.steps:
            snap = apply_delta(snap, delta.to_json())
        return snap


def run(program: Program, scenario: Scenario, at: int = 0) -> Trace:
    """Fold a scenario into a trace; errors abort with the partial trace."""
    state = init_state(program, at)
    trace = Trace(
        program_name=program.source_name,
        initial=state_to_json(state),
        steps=[],
        final=state_to_json(state),
    )
    for index, step in enumerate(scenario.steps):
        try:
            state, delta = apply_step(state, step)
        except EngineError as exc:
            trace.error = {"index": index, "code": exc.code, "message": exc.message}
            break
        trace.steps.append((step, delta, state.clock))
    trace.final = state_to_json(state)
    return trace
