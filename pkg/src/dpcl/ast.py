"""Core data model: terms, frames, rules, programs, and their renderings.

Everything here is immutable. Structural equality on nodes is plain
dataclass equality, which makes print/parse round-trip checks cheap.
Ground values produced by the interpreter (object/position references,
time values) live in the same algebra so that bound frames can be stored,
rendered and serialized uniformly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

IDENT_RE = re.compile(r"[a-z][A-Za-z0-9_]*\Z")

POSITION_KINDS = (
    "power",
    "duty",
    "claim",
    "liability",
    "liberty",
    "disability",
    "no_claim",
    "immunity",
)
OTHER_POSITION_KINDS = tuple(k for k in POSITION_KINDS if k not in ("power", "duty"))

KEYWORDS = frozenset(POSITION_KINDS) | {"in", "now"}

# Simulated time is measured in integer ticks of one second.  The month
# and year factors are fixed (30 and 365 days) so traces stay deterministic.
DURATION_UNITS = {
    "s": 1,
    "min": 60,
    "h": 3600,
    "d": 86400,
    "w": 604800,
    "m": 2592000,
    "y": 31536000,
}

# Ticks must stay representable in a signed 64-bit slot so snapshots keep
# exact values in JSON consumers.
TICK_MAX = 2**63 - 1


class TickOverflowError(ArithmeticError):
    """Raised when a time computation leaves the representable tick range."""


def is_identifier(name: str) -> bool:
    return bool(IDENT_RE.match(name)) and name not in KEYWORDS


# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True)
class Atom:
    """A bare literal: an object name, descriptor, or pattern variable."""

    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class DottedRef:
    """Property access `a.b.c` (at least two parts)."""

    parts: tuple[str, ...]

    def __str__(self):
        return ".".join(self.parts)


@dataclass(frozen=True)
class CompoundCall:
    """Positional compound instantiation `fine(borrower, lender)`."""

    name: str
    args: tuple

    def __str__(self):
        return render_term(self)


@dataclass(frozen=True)
class RefinedObject:
    """An object literal with a body, `borrowing { lender: library ... }`."""

    head: str
    body: tuple  # ordered ((field, Term), ...)

    def __str__(self):
        return render_term(self)


@dataclass(frozen=True)
class Alternation:
    """Flat choice of alternatives, `student | staff`."""

    options: tuple

    def __str__(self):
        return render_term(self)


@dataclass(frozen=True)
class NowCall:
    """The current simulated time, `now()`."""

    def __str__(self):
        return "now()"


@dataclass(frozen=True)
class Duration:
    """A literal span of simulated time such as `1m` or `30s`."""

    amount: int
    unit: str

    def __str__(self):
        return f"{self.amount}{self.unit}"


@dataclass(frozen=True)
class TimeValue:
    """An absolute instant, in ticks."""

    ticks: int

    def __str__(self):
        return str(self.ticks)


@dataclass(frozen=True)
class IntLiteral:
    value: int

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class Comparison:
    lhs: object
    op: str  # > >= < <= == !=
    rhs: object

    def __str__(self):
        return render_term(self)


@dataclass(frozen=True)
class Arith:
    lhs: object
    op: str  # + -
    rhs: object

    def __str__(self):
        return render_term(self)


@dataclass(frozen=True)
class Qualification:
    """`subject in descriptor`: a descriptor test or a qualification act."""

    subject: object
    descriptor: str

    def __str__(self):
        return render_term(self)


@dataclass(frozen=True)
class InstanceRef:
    """Surface reference to a numbered instance, `borrowing#7`."""

    name: str
    num: int

    def __str__(self):
        return f"{self.name}#{self.num}"


# Ground values assigned by the interpreter.  They have no surface syntax of
# their own but render readably and serialize exactly.


@dataclass(frozen=True)
class ObjectRef:
    oid: int

    def __str__(self):
        return f"<object {self.oid}>"


@dataclass(frozen=True)
class PositionRef:
    pid: int

    def __str__(self):
        return f"<position {self.pid}>"


@dataclass(frozen=True)
class FlagRef:
    """A boolean flag slot on a position instance, e.g. its violation bit."""

    pid: int
    field: str

    def __str__(self):
        return f"<position {self.pid}>.{self.field}"


@dataclass(frozen=True)
class PropRef:
    """A property slot on an object instance, resolved when evaluated."""

    oid: int
    path: tuple[str, ...]

    def __str__(self):
        return f"<object {self.oid}>." + ".".join(self.path)


# ---------------------------------------------------------------------------
# Events and frames


@dataclass(frozen=True)
class EventRef:
    """A transition event `#name { field: value ... }`."""

    name: str
    refinements: tuple = ()

    def __str__(self):
        return render_term(self)


@dataclass(frozen=True)
class ProductionEvent:
    """Creation (`+`) or removal (`-`) of an object, compound or flag."""

    polarity: str  # "create" | "remove"
    target: object

    @property
    def sign(self) -> str:
        return "+" if self.polarity == "create" else "-"

    def __str__(self):
        return render_term(self)


@dataclass(frozen=True)
class PowerFrame:
    holder: object
    action: EventRef
    consequence: object
    label: str | None = None

    kind = "power"

    def __str__(self):
        return render_term(self)


@dataclass(frozen=True)
class DutyFrame:
    holder: object
    counterparty: object
    action: EventRef
    violation: object | None = None
    label: str | None = None

    kind = "duty"

    def __str__(self):
        return render_term(self)


@dataclass(frozen=True)
class OtherPositionFrame:
    """One of the six positions without execution semantics; body kept verbatim."""

    kind: str
    body: tuple  # ordered ((field, Term), ...)
    label: str | None = None

    def __str__(self):
        return render_term(self)


FRAME_TYPES = (PowerFrame, DutyFrame, OtherPositionFrame)


@dataclass(frozen=True)
class TransformationalRule:
    """`condition -> conclusion`: the conclusion holds as long as the condition does."""

    condition: object
    conclusion: object  # frame, production event, or object term

    def __str__(self):
        return render_term(self)


@dataclass(frozen=True)
class ReactiveRule:
    """`trigger => effect`: each occurrence of the trigger fires the effect once."""

    trigger: object  # EventRef | ProductionEvent
    effect: object  # ProductionEvent | EventRef

    def __str__(self):
        return render_term(self)


@dataclass(frozen=True)
class CompoundDecl:
    """A named, parameterized bundle of positions and rules."""

    name: str
    params: tuple[str, ...]
    members: tuple

    def __str__(self):
        return pretty_print(Program((self,)))


@dataclass(frozen=True)
class Program:
    declarations: tuple
    source_name: str = "<program>"

    def compounds(self) -> dict[str, CompoundDecl]:
        return {d.name: d for d in self.declarations if isinstance(d, CompoundDecl)}

    def __str__(self):
        return pretty_print(self)


# ---------------------------------------------------------------------------
# Durations


def duration_to_ticks(d: Duration) -> int:
    """Convert a duration literal to ticks; unit factors are fixed."""
    if d.unit not in DURATION_UNITS:
        raise ValueError(f"unknown duration unit: {d.unit!r}")
    ticks = d.amount * DURATION_UNITS[d.unit]
    if ticks > TICK_MAX:
        raise TickOverflowError(f"duration {d} exceeds the tick range")
    return ticks


def body_get(body: tuple, name: str):
    for key, value in body:
        if key == name:
            return value
    return None


# ---------------------------------------------------------------------------
# Rendering

_INDENT = "    "

# Precedence levels, loosest first.  A child rendered in a context that
# requires tighter binding than it provides gets parenthesized.
_PREC_QUAL = 0
_PREC_ALT = 1
_PREC_CMP = 2
_PREC_ADD = 3
_PREC_POSTFIX = 4


def render_term(node, indent: int | None = None) -> str:
    """Render any term, event, frame or rule back to concrete syntax.

    With ``indent=None`` everything is kept on one line; otherwise frame and
    object bodies break over lines at the given indent depth, matching the
    shape of `pretty_print` output.
    """
    return _render(node, _PREC_QUAL, indent)


def _render(node, prec: int, indent: int | None) -> str:
    if isinstance(node, Atom):
        return node.name
    if isinstance(node, DottedRef):
        return ".".join(node.parts)
    if isinstance(node, InstanceRef):
        return f"{node.name}#{node.num}"
    if isinstance(node, NowCall):
        return "now()"
    if isinstance(node, Duration):
        return f"{node.amount}{node.unit}"
    if isinstance(node, TimeValue):
        return str(node.ticks)
    if isinstance(node, IntLiteral):
        return str(node.value)
    if isinstance(node, ObjectRef):
        return f"<object {node.oid}>"
    if isinstance(node, PositionRef):
        return f"<position {node.pid}>"
    if isinstance(node, FlagRef):
        return f"<position {node.pid}>.{node.field}"
    if isinstance(node, PropRef):
        return f"<object {node.oid}>." + ".".join(node.path)
    if isinstance(node, CompoundCall):
        args = ", ".join(_render(a, _PREC_QUAL, None) for a in node.args)
        return f"{node.name}({args})"
    if isinstance(node, RefinedObject):
        return node.head + _render_body(node.body, indent)
    if isinstance(node, Alternation):
        text = " | ".join(_render(o, _PREC_CMP, indent) for o in node.options)
        return _parens(text, _PREC_ALT, prec)
    if isinstance(node, Qualification):
        text = f"{_render(node.subject, _PREC_ALT, indent)} in {node.descriptor}"
        return _parens(text, _PREC_QUAL, prec)
    if isinstance(node, Comparison):
        lhs = _render(node.lhs, _PREC_ADD, indent)
        rhs = _render(node.rhs, _PREC_ADD, indent)
        return _parens(f"{lhs} {node.op} {rhs}", _PREC_CMP, prec)
    if isinstance(node, Arith):
        lhs = _render(node.lhs, _PREC_ADD, indent)
        rhs = _render(node.rhs, _PREC_POSTFIX, indent)
        return _parens(f"{lhs} {node.op} {rhs}", _PREC_ADD, prec)
    if isinstance(node, EventRef):
        if not node.refinements:
            return f"#{node.name}"
        inner = ", ".join(
            f"{k}: {_render(v, _PREC_QUAL, indent)}" for k, v in node.refinements
        )
        return f"#{node.name} {{ {inner} }}"
    if isinstance(node, ProductionEvent):
        return node.sign + _render(node.target, _PREC_POSTFIX, indent)
    if isinstance(node, PowerFrame):
        fields = [("holder", node.holder), ("action", node.action), ("consequence", node.consequence)]
        return _render_frame("power", node.label, fields, indent)
    if isinstance(node, DutyFrame):
        fields = [("holder", node.holder), ("counterparty", node.counterparty), ("action", node.action)]
        if node.violation is not None:
            fields.append(("violation", node.violation))
        return _render_frame("duty", node.label, fields, indent)
    if isinstance(node, OtherPositionFrame):
        return _render_frame(node.kind, node.label, list(node.body), indent)
    if isinstance(node, TransformationalRule):
        cond = _render(node.condition, _PREC_QUAL, indent)
        return f"{cond} -> {_render(node.conclusion, _PREC_QUAL, indent)}"
    if isinstance(node, ReactiveRule):
        trig = _render(node.trigger, _PREC_QUAL, indent)
        return f"{trig} => {_render(node.effect, _PREC_QUAL, indent)}"
    raise TypeError(f"cannot render {type(node).__name__}")


def _parens(text: str, level: int, required: int) -> str:
    return f"({text})" if level < required else text


def _render_body(body, indent: int | None) -> str:
    if not body:
        return " {}"
    if indent is None:
        inner = ", ".join(f"{k}: {_render(v, _PREC_QUAL, None)}" for k, v in body)
        return f" {{ {inner} }}"
    pad = _INDENT * (indent + 1)
    lines = [f"{pad}{k}: {_render(v, _PREC_QUAL, indent + 1)}" for k, v in body]
    return " {\n" + "\n".join(lines) + "\n" + _INDENT * indent + "}"


def _render_frame(kind, label, fields, indent: int | None) -> str:
    head = f"{kind} {label}" if label else kind
    return head + _render_body(tuple(fields), indent)


def pretty_print(program: Program) -> str:
    """Render a program as concrete syntax that re-parses to an equal AST."""
    chunks = []
    for decl in program.declarations:
        chunks.append(_render_decl(decl, 0))
    return "\n\n".join(chunks) + ("\n" if chunks else "")


def _render_decl(decl, indent: int) -> str:
    pad = _INDENT * indent
    if isinstance(decl, CompoundDecl):
        params = ", ".join(decl.params)
        if not decl.members:
            return f"{pad}{decl.name}({params}) {{}}"
        inner = "\n".join(_render_decl(m, indent + 1) for m in decl.members)
        return f"{pad}{decl.name}({params}) {{\n{inner}\n{pad}}}"
    return pad + render_term(decl, indent)


# ---------------------------------------------------------------------------
# JSON codec for terms, frames and rules (used by state snapshots)

_SCALAR_TAGS = {}


def term_to_json(node):
    if isinstance(node, Atom):
        return {"t": "atom", "n": node.name}
    if isinstance(node, DottedRef):
        return {"t": "dot", "p": list(node.parts)}
    if isinstance(node, InstanceRef):
        return {"t": "iref", "n": node.name, "i": node.num}
    if isinstance(node, NowCall):
        return {"t": "now"}
    if isinstance(node, Duration):
        return {"t": "dur", "v": node.amount, "u": node.unit}
    if isinstance(node, TimeValue):
        return {"t": "time", "v": node.ticks}
    if isinstance(node, IntLiteral):
        return {"t": "int", "v": node.value}
    if isinstance(node, ObjectRef):
        return {"t": "obj", "id": node.oid}
    if isinstance(node, PositionRef):
        return {"t": "pos", "id": node.pid}
    if isinstance(node, FlagRef):
        return {"t": "flag", "id": node.pid, "f": node.field}
    if isinstance(node, PropRef):
        return {"t": "prop", "id": node.oid, "p": list(node.path)}
    if isinstance(node, CompoundCall):
        return {"t": "call", "n": node.name, "a": [term_to_json(a) for a in node.args]}
    if isinstance(node, RefinedObject):
        return {"t": "robj", "n": node.head, "b": _body_to_json(node.body)}
    if isinstance(node, Alternation):
        return {"t": "alt", "o": [term_to_json(o) for o in node.options]}
    if isinstance(node, Comparison):
        return {"t": "cmp", "op": node.op, "l": term_to_json(node.lhs), "r": term_to_json(node.rhs)}
    if isinstance(node, Arith):
        return {"t": "arith", "op": node.op, "l": term_to_json(node.lhs), "r": term_to_json(node.rhs)}
    if isinstance(node, Qualification):
        return {"t": "qual", "s": term_to_json(node.subject), "d": node.descriptor}
    if isinstance(node, EventRef):
        return {"t": "ev", "n": node.name, "r": _body_to_json(node.refinements)}
    if isinstance(node, ProductionEvent):
        return {"t": "prod", "pol": node.polarity, "tg": term_to_json(node.target)}
    if isinstance(node, PowerFrame):
        return {
            "t": "power",
            "lb": node.label,
            "h": term_to_json(node.holder),
            "a": term_to_json(node.action),
            "c": term_to_json(node.consequence),
        }
    if isinstance(node, DutyFrame):
        return {
            "t": "duty",
            "lb": node.label,
            "h": term_to_json(node.holder),
            "cp": term_to_json(node.counterparty),
            "a": term_to_json(node.action),
            "v": None if node.violation is None else term_to_json(node.violation),
        }
    if isinstance(node, OtherPositionFrame):
        return {"t": "opos", "k": node.kind, "lb": node.label, "b": _body_to_json(node.body)}
    if isinstance(node, TransformationalRule):
        return {"t": "trule", "c": term_to_json(node.condition), "cc": term_to_json(node.conclusion)}
    if isinstance(node, ReactiveRule):
        return {"t": "rrule", "tr": term_to_json(node.trigger), "ef": term_to_json(node.effect)}
    raise TypeError(f"cannot serialize {type(node).__name__}")


def _body_to_json(body):
    return [[k, term_to_json(v)] for k, v in body]


def term_from_json(data):
    tag = data["t"]
    if tag == "atom":
        return Atom(data["n"])
    if tag == "dot":
        return DottedRef(tuple(data["p"]))
    if tag == "iref":
        return InstanceRef(data["n"], data["i"])
    if tag == "now":
        return NowCall()
    if tag == "dur":
        return Duration(data["v"], data["u"])
    if tag == "time":
        return TimeValue(data["v"])
    if tag == "int":
        return IntLiteral(data["v"])
    if tag == "obj":
        return ObjectRef(data["id"])
    if tag == "pos":
        return PositionRef(data["id"])
    if tag == "flag":
        return FlagRef(data["id"], data["f"])
    if tag == "prop":
        return PropRef(data["id"], tuple(data["p"]))
    if tag == "call":
        return CompoundCall(data["n"], tuple(term_from_json(a) for a in data["a"]))
    if tag == "robj":
        return RefinedObject(data["n"], _body_from_json(data["b"]))
    if tag == "alt":
        return Alternation(tuple(term_from_json(o) for o in data["o"]))
    if tag == "cmp":
        return Comparison(term_from_json(data["l"]), data["op"], term_from_json(data["r"]))
    if tag == "arith":
        return Arith(term_from_json(data["l"]), data["op"], term_from_json(data["r"]))
    if tag == "qual":
        return Qualification(term_from_json(data["s"]), data["d"])
    if tag == "ev":
        return EventRef(data["n"], _body_from_json(data["r"]))
    if tag == "prod":
        return ProductionEvent(data["pol"], term_from_json(data["tg"]))
    if tag == "power":
        return PowerFrame(
            holder=term_from_json(data["h"]),
            action=term_from_json(data["a"]),
            consequence=term_from_json(data["c"]),
            label=data["lb"],
        )
    if tag == "duty":
        return DutyFrame(
            holder=term_from_json(data["h"]),
            counterparty=term_from_json(data["cp"]),
            action=term_from_json(data["a"]),
            violation=None if data["v"] is None else term_from_json(data["v"]),
            label=data["lb"],
        )
    if tag == "opos":
        return OtherPositionFrame(kind=data["k"], body=_body_from_json(data["b"]), label=data["lb"])
    if tag == "trule":
        return TransformationalRule(term_from_json(data["c"]), term_from_json(data["cc"]))
    if tag == "rrule":
        return ReactiveRule(term_from_json(data["tr"]), term_from_json(data["ef"]))
    raise ValueError(f"unknown term tag: {tag!r}")


def _body_from_json(items):
    return tuple((k, term_from_json(v)) for k, v in items)
