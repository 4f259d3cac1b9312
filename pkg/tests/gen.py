"""Hypothesis strategies: random surface ASTs, and small random worlds
(program + scenario) for the interpreter property suites."""

from hypothesis import strategies as st

from dpcl.ast import (
    Alternation,
    Arith,
    Atom,
    CompoundCall,
    CompoundDecl,
    Comparison,
    DottedRef,
    Duration,
    DutyFrame,
    EventRef,
    InstanceRef,
    IntLiteral,
    KEYWORDS,
    NowCall,
    OtherPositionFrame,
    PowerFrame,
    ProductionEvent,
    Program,
    Qualification,
    ReactiveRule,
    RefinedObject,
    TransformationalRule,
)
from dpcl.engine import Scenario, scenario_from_json

_NAME_POOL = [
    "alpha", "beta", "gamma", "delta_x", "holder", "member", "agent",
    "w1", "w2", "item", "card", "rainx", "wetx", "k9",
]

idents = st.sampled_from(_NAME_POOL)
fresh_idents = st.from_regex(r"[a-z][a-z0-9_]{0,6}", fullmatch=True).filter(
    lambda s: s not in KEYWORDS
)
names = st.one_of(idents, fresh_idents)

units = st.sampled_from(["s", "min", "h", "d", "w", "m", "y"])
durations = st.builds(Duration, st.integers(0, 999), units)
int_literals = st.builds(IntLiteral, st.integers(0, 10_000))
dotted = st.builds(
    lambda parts: DottedRef(tuple(parts)), st.lists(names, min_size=2, max_size=3)
)
instance_refs = st.builds(InstanceRef, names, st.integers(0, 99))

_base_terms = st.one_of(
    st.builds(Atom, names),
    dotted,
    st.just(NowCall()),
    int_literals,
    durations,
    instance_refs,
)

_cmp_ops = st.sampled_from([">", ">=", "<", "<=", "==", "!="])
_arith_ops = st.sampled_from(["+", "-"])


def _bodies(values, max_size=3):
    return st.dictionaries(names, values, max_size=max_size).map(
        lambda d: tuple(d.items())
    )


def _extend(children):
    events = st.builds(EventRef, names, _bodies(children, 2))
    return st.one_of(
        st.builds(Comparison, children, _cmp_ops, children),
        st.builds(Arith, children, _arith_ops, children),
        st.builds(
            lambda opts: Alternation(tuple(opts)),
            st.lists(
                children.filter(lambda t: not isinstance(t, Alternation)),
                min_size=2,
                max_size=3,
            ),
        ),
        st.builds(Qualification, children, names),
        st.builds(RefinedObject, names, _bodies(children)),
        st.builds(
            lambda n, args: CompoundCall(n, tuple(args)),
            names,
            st.lists(children, max_size=3),
        ),
        events,
        st.builds(
            ProductionEvent,
            st.sampled_from(["create", "remove"]),
            st.one_of(st.builds(Atom, names), dotted, instance_refs),
        ),
    )


surface_terms = st.recursive(_base_terms, _extend, max_leaves=12)

surface_events = st.builds(EventRef, names, _bodies(surface_terms, 2))

_labels = st.one_of(st.none(), names)

power_frames = st.builds(
    PowerFrame,
    holder=surface_terms,
    action=surface_events,
    consequence=st.one_of(
        surface_terms,
        st.builds(Qualification, st.builds(Atom, names), names),
        st.builds(ProductionEvent, st.just("create"), st.builds(Atom, names)),
    ),
    label=_labels,
)

duty_frames = st.builds(
    DutyFrame,
    holder=surface_terms,
    counterparty=surface_terms,
    action=surface_events,
    violation=st.one_of(st.none(), st.builds(Comparison, st.just(NowCall()), _cmp_ops, surface_terms)),
    label=_labels,
)

other_frames = st.builds(
    OtherPositionFrame,
    kind=st.sampled_from(["claim", "liability", "liberty", "disability", "no_claim", "immunity"]),
    body=_bodies(surface_terms),
    label=_labels,
)

frames = st.one_of(power_frames, duty_frames, other_frames)

productions = st.builds(
    ProductionEvent,
    st.sampled_from(["create", "remove"]),
    st.one_of(st.builds(Atom, names), dotted),
)

trans_rules = st.builds(
    TransformationalRule,
    condition=surface_terms,
    conclusion=st.one_of(
        frames,
        st.builds(Atom, names),
        st.builds(ProductionEvent, st.just("create"), st.builds(Atom, names)),
    ),
)

reactive_rules = st.builds(
    ReactiveRule,
    trigger=st.one_of(surface_events, productions),
    effect=st.one_of(
        st.builds(EventRef, names, _bodies(_base_terms, 1)),
        st.builds(
            ProductionEvent,
            st.sampled_from(["create", "remove"]),
            st.one_of(st.builds(Atom, names), dotted, frames),
        ),
    ),
)

rules = st.one_of(trans_rules, reactive_rules)


@st.composite
def compound_decls(draw):
    name = draw(names)
    params = tuple(draw(st.lists(names, max_size=3, unique=True)))
    members = tuple(draw(st.lists(st.one_of(frames, rules), max_size=3)))
    return CompoundDecl(name, params, members)


@st.composite
def programs(draw):
    """Random well-formed surface programs (parse-level, not validated)."""
    decls = list(draw(st.lists(st.one_of(frames, rules, compound_decls()), max_size=5)))
    seen_compounds = set()
    seen_labels = set()
    result = []
    for decl in decls:
        if isinstance(decl, CompoundDecl):
            if decl.name in seen_compounds:
                continue
            seen_compounds.add(decl.name)
        label = getattr(decl, "label", None)
        if label:
            if label in seen_labels:
                continue
            seen_labels.add(label)
        result.append(decl)
    return Program(tuple(result), "<random>")


# ---------------------------------------------------------------------------
# Random worlds: a validating program plus a scenario that exercises it.


@st.composite
def worlds(draw):
    """A small institution: chain rules, a reactive pair, a power granting a
    descriptor, and a compound with a timed duty; plus a scenario."""
    decls = []

    chain_len = draw(st.integers(0, 3))
    for i in range(chain_len):
        src = Atom("seed" if i == 0 else f"link{i - 1}")
        decls.append(TransformationalRule(src, Atom(f"link{i}")))

    if draw(st.booleans()):
        decls.append(
            ReactiveRule(
                EventRef("ping", ()),
                ProductionEvent("create", Atom("pinged")),
            )
        )
    if draw(st.booleans()):
        decls.append(
            ReactiveRule(
                ProductionEvent("create", Atom("pinged")),
                ProductionEvent("create", Atom("echoed")),
            )
        )

    decls.append(
        PowerFrame(
            holder=Alternation((Atom("novice"), Atom("expert"))),
            action=EventRef("enroll", ()),
            consequence=Qualification(Atom("holder"), "enrolled"),
        )
    )

    timeout_amount = draw(st.integers(1, 5))
    decls.append(
        PowerFrame(
            holder=Atom("enrolled"),
            action=EventRef("engage", (("item", Atom("thing")),)),
            consequence=ProductionEvent(
                "create",
                RefinedObject(
                    "engagement",
                    (
                        ("party", Atom("holder")),
                        ("item", Atom("thing")),
                        ("deadline", Arith(NowCall(), "+", Duration(timeout_amount, "h"))),
                    ),
                ),
            ),
        )
    )
    decls.append(
        CompoundDecl(
            "engagement",
            ("party", "item", "deadline"),
            (
                DutyFrame(
                    holder=Atom("party"),
                    counterparty=Atom("party"),
                    action=EventRef("disengage", (("item", Atom("thing")),)),
                    violation=Comparison(NowCall(), ">", Atom("deadline")),
                    label="dd",
                ),
                ReactiveRule(
                    ProductionEvent("create", DottedRef(("dd", "violation"))),
                    ProductionEvent("create", Atom("sanction")),
                ),
            ),
        )
    )

    program = Program(tuple(decls), "<world>")

    actors = draw(st.lists(st.sampled_from(["ann", "bob", "cyd"]), min_size=1, max_size=3, unique=True))
    steps = []
    for actor in actors:
        descs = draw(st.lists(st.sampled_from(["novice", "expert", "other"]), max_size=2, unique=True))
        steps.append({"assert": {"name": actor, "descriptors": descs, "properties": {}}})
    n_actions = draw(st.integers(0, 6))
    for _ in range(n_actions):
        kind = draw(st.sampled_from(["enroll", "engage", "disengage", "ping", "advance", "produce"]))
        actor = draw(st.sampled_from(actors))
        if kind == "enroll":
            steps.append({"do": {"actor": actor, "event": "enroll", "refinements": {}}})
        elif kind == "engage":
            steps.append({"do": {"actor": actor, "event": "engage", "refinements": {"item": "it1"}}})
        elif kind == "disengage":
            steps.append({"do": {"actor": actor, "event": "disengage", "refinements": {"item": "it1"}}})
        elif kind == "ping":
            steps.append({"do": {"actor": actor, "event": "ping", "refinements": {}}})
        elif kind == "advance":
            amount = draw(st.integers(0, 4))
            steps.append({"advance": f"{amount}h"})
        else:
            steps.append({"produce": "+seed"})
    scenario = scenario_from_json({"steps": steps})
    return program, scenario


# ---------------------------------------------------------------------------
# Programs for rewrite properties: labeled duties with violation conditions.


@st.composite
def violation_programs(draw):
    n_duties = draw(st.integers(0, 3))
    members = []
    for i in range(n_duties):
        has_violation = draw(st.booleans())
        has_label = draw(st.booleans())
        members.append(
            DutyFrame(
                holder=Atom("party"),
                counterparty=Atom("party"),
                action=EventRef(f"act{i}", ()),
                violation=Comparison(NowCall(), ">", Atom("deadline")) if has_violation else None,
                label=f"dt{i}" if has_label else None,
            )
        )
    decls = [
        CompoundDecl("bundle", ("party", "deadline"), tuple(members)),
        PowerFrame(
            holder=Atom("anyone"),
            action=EventRef("open", ()),
            consequence=ProductionEvent(
                "create",
                RefinedObject(
                    "bundle",
                    (("party", Atom("holder")), ("deadline", Arith(NowCall(), "+", Duration(1, "h")))),
                ),
            ),
        ),
    ]
    if draw(st.booleans()):
        decls.append(
            DutyFrame(
                holder=Atom("anyone"),
                counterparty=Atom("anyone"),
                action=EventRef("close", ()),
                violation=Comparison(NowCall(), ">", IntLiteral(100)),
                label="topd",
            )
        )
    return Program(tuple(decls), "<violations>")
