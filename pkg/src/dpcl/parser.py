"""Lexer, parser and validator for DPCL concrete syntax.

The grammar is the one exhibited by the language listings: frames
(`power { ... }`, `duty d1 { ... }`), parameterized compounds
(`borrowing(lender, borrower, item, timeout) { ... }`), transformational
rules (`cond -> conclusion`) and reactive rules (`trigger => effect`).
Parsing never throws on bad input; diagnostics carry source spans and
stable codes, and the parser synchronizes at `}` so independent errors
in one file are all reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ast import (
    Alternation,
    Arith,
    Atom,
    CompoundCall,
    CompoundDecl,
    Comparison,
    DottedRef,
    Duration,
    DURATION_UNITS,
    DutyFrame,
    EventRef,
    InstanceRef,
    IntLiteral,
    KEYWORDS,
    NowCall,
    OTHER_POSITION_KINDS,
    OtherPositionFrame,
    POSITION_KINDS,
    PowerFrame,
    ProductionEvent,
    Program,
    Qualification,
    ReactiveRule,
    RefinedObject,
    TransformationalRule,
)

CMP_OPS = (">=", "<=", "==", "!=", ">", "<")

POWER_FIELDS = ("holder", "action", "consequence")
DUTY_REQUIRED_FIELDS = ("holder", "counterparty", "action")
DUTY_FIELDS = DUTY_REQUIRED_FIELDS + ("violation",)


@dataclass(frozen=True)
class SourceSpan:
    file: str
    start_line: int
    start_col: int
    end_line: int
    end_col: int

    def __str__(self):
        return f"{self.file}:{self.start_line}:{self.start_col}"


@dataclass(frozen=True)
class Diagnostic:
    span: SourceSpan
    severity: str  # "error" | "warning"
    message: str
    code: str

    def __str__(self):
        return f"{self.span}: {self.severity}[{self.code}]: {self.message}"


class ProgramError(Exception):
    """A program failed to parse or validate; carries the diagnostics."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


@dataclass
class Token:
    t: str  # "ident" "event" "int" "dur" "kw" "eof" or the literal symbol
    v: object
    line: int
    col: int
    end_line: int
    end_col: int
    start: int
    end: int


@dataclass
class ParseResult:
    program: Program | None
    diagnostics: list
    spans: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.program is not None and not any(
            d.severity == "error" for d in self.diagnostics
        )


# ---------------------------------------------------------------------------
# Lexer


def tokenize(source: str, filename: str = "<string>"):
    """Split source into tokens; returns (tokens, diagnostics)."""
    toks: list[Token] = []
    diags: list[Diagnostic] = []
    i = 0
    line = 1
    col = 1
    n = len(source)

    def span_here(length=1):
        return SourceSpan(filename, line, col, line, col + length)

    def push(t, v, start, length, sl, sc):
        toks.append(Token(t, v, sl, sc, line, col, start, start + length))

    while i < n:
        c = source[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                i += 1
                col += 1
            continue
        start, sl, sc = i, line, col
        if c.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            digits = source[i:j]
            k = j
            while k < n and (source[k].isalpha() or source[k] == "_"):
                k += 1
            if k > j:
                unit = source[j:k]
                length = k - i
                if unit in DURATION_UNITS:
                    col += length
                    i = k
                    push("dur", Duration(int(digits), unit), start, length, sl, sc)
                else:
                    diags.append(
                        Diagnostic(
                            SourceSpan(filename, sl, sc, sl, sc + length),
                            "error",
                            f"unknown duration unit {unit!r}",
                            "unknown-unit",
                        )
                    )
                    col += length
                    i = k
            else:
                length = j - i
                col += length
                i = j
                push("int", int(digits), start, length, sl, sc)
            continue
        if c == "#" and i + 1 < n and (source[i + 1].isalpha() or source[i + 1] == "_"):
            j = i + 1
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            name = source[i + 1 : j]
            length = j - i
            col += length
            i = j
            push("event", name, start, length, sl, sc)
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            word = source[i:j]
            length = j - i
            col += length
            i = j
            if word in KEYWORDS:
                push("kw", word, start, length, sl, sc)
            else:
                push("ident", word, start, length, sl, sc)
            continue
        two = source[i : i + 2]
        if two in ("->", "=>", ">=", "<=", "==", "!="):
            col += 2
            i += 2
            push(two, two, start, 2, sl, sc)
            continue
        if c in "{}():,.|+-<>#":
            col += 1
            i += 1
            push(c, c, start, 1, sl, sc)
            continue
        diags.append(
            Diagnostic(span_here(), "error", f"unknown character {c!r}", "unknown-char")
        )
        i += 1
        col += 1

    toks.append(Token("eof", None, line, col, line, col, n, n))
    return toks, diags


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, tokens, filename, diagnostics):
        self.toks = tokens
        self.pos = 0
        self.filename = filename
        self.diags = diagnostics
        self.spans: dict[int, SourceSpan] = {}

    # -- token helpers

    @property
    def cur(self) -> Token:
        return self.toks[self.pos]

    def peek(self, k=1) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def advance(self) -> Token:
        tok = self.cur
        if tok.t != "eof":
            self.pos += 1
        return tok

    def at(self, t, v=None) -> bool:
        return self.cur.t == t and (v is None or self.cur.v == v)

    def expect(self, t, what=None):
        if self.cur.t == t:
            return self.advance()
        self.error(f"expected {what or t!r}, found {self._describe(self.cur)}")
        raise _Bail()

    def _describe(self, tok):
        if tok.t == "eof":
            return "end of input"
        if tok.t in ("ident", "kw"):
            return f"`{tok.v}`"
        if tok.t == "event":
            return f"`#{tok.v}`"
        return f"`{tok.v}`"

    def token_span(self, tok: Token) -> SourceSpan:
        return SourceSpan(self.filename, tok.line, tok.col, tok.end_line, tok.end_col)

    def error(self, message, code="syntax", tok=None):
        self.diags.append(
            Diagnostic(self.token_span(tok or self.cur), "error", message, code)
        )

    def reg(self, node, tok):
        self.spans[id(node)] = self.token_span(tok)
        return node

    # -- recovery

    def sync_block(self):
        """Skip to the close of the current `{ ... }` block."""
        depth = 0
        while not self.at("eof"):
            if self.at("{"):
                depth += 1
            elif self.at("}"):
                if depth == 0:
                    self.advance()
                    return
                depth -= 1
            self.advance()

    def sync_decl(self):
        """Skip to a plausible next declaration start."""
        depth = 0
        while not self.at("eof"):
            if depth == 0 and (self.at("kw") and self.cur.v in POSITION_KINDS):
                return
            if self.at("{"):
                depth += 1
            elif self.at("}"):
                if depth == 0:
                    self.advance()
                    return
                depth -= 1
            self.advance()

    # -- program structure

    def parse_program(self, source_name):
        decls = []
        while not self.at("eof"):
            try:
                decls.append(self.parse_declaration(top_level=True))
            except _Bail:
                self.sync_decl()
        return Program(tuple(decls), source_name)

    def parse_declaration(self, top_level):
        if self.at("kw") and self.cur.v in POSITION_KINDS:
            return self.parse_frame()
        if (
            top_level
            and self.at("ident")
            and self.peek().t == "("
            and self.peek().start == self.cur.end
        ):
            saved = self.pos
            head = self.advance()
            args, _ = self.parse_call_args()
            if self.at("{"):
                return self.parse_compound_body(head, args)
            self.pos = saved  # it was a rule condition like `fine(x) -> ...`
        return self.parse_rule()

    def parse_compound_body(self, head_tok, args):
        params = []
        ok = True
        for a in args:
            if isinstance(a, Atom):
                params.append(a.name)
            else:
                self.error(
                    f"compound parameter must be an identifier, found `{a}`",
                    "bad-param",
                    head_tok,
                )
                ok = False
        if len(set(params)) != len(params):
            self.error(
                f"duplicate parameter name in `{head_tok.v}`", "duplicate-param", head_tok
            )
        self.expect("{")
        members = []
        while not self.at("}") and not self.at("eof"):
            try:
                members.append(self.parse_declaration(top_level=False))
            except _Bail:
                self.sync_block()
                return self.reg(
                    CompoundDecl(head_tok.v, tuple(params), tuple(members)), head_tok
                )
        self.expect("}")
        decl = CompoundDecl(head_tok.v, tuple(params), tuple(members))
        return self.reg(decl, head_tok)

    # -- frames

    def parse_frame(self):
        kind_tok = self.advance()
        kind = kind_tok.v
        label = None
        if self.at("ident"):
            label = self.advance().v
        fields = self.parse_body()
        if kind == "power":
            frame = self.build_power(fields, label, kind_tok)
        elif kind == "duty":
            frame = self.build_duty(fields, label, kind_tok)
        else:
            frame = OtherPositionFrame(kind=kind, body=tuple(fields), label=label)
        return self.reg(frame, kind_tok)

    def parse_body(self):
        """Parse `{ field: value ... }`; separators are newlines or commas."""
        self.expect("{")
        fields = []
        seen = set()
        while not self.at("}") and not self.at("eof"):
            if self.at(","):
                self.advance()
                continue
            if not self.at("ident"):
                self.error(
                    f"expected field name, found {self._describe(self.cur)}",
                    "bad-field",
                )
                raise _Bail()
            name_tok = self.advance()
            self.expect(":", "`:` after field name")
            value = self.parse_term()
            if name_tok.v in seen:
                self.error(
                    f"duplicate field `{name_tok.v}`", "duplicate-field", name_tok
                )
            seen.add(name_tok.v)
            fields.append((name_tok.v, value))
        self.expect("}")
        return fields

    def build_power(self, fields, label, tok):
        mapping = dict(fields)
        for name, _ in fields:
            if name not in POWER_FIELDS:
                self.error(f"unknown field `{name}` in power frame", "unknown-field", tok)
        for name in POWER_FIELDS:
            if name not in mapping:
                self.error(f"power frame missing `{name}`", "missing-field", tok)
        action = mapping.get("action")
        if action is not None and not isinstance(action, EventRef):
            self.error("power `action` must be an event", "bad-field-type", tok)
        if any(name not in mapping for name in POWER_FIELDS):
            raise _Bail()
        return PowerFrame(
            holder=mapping["holder"],
            action=mapping["action"],
            consequence=mapping["consequence"],
            label=label,
        )

    def build_duty(self, fields, label, tok):
        mapping = dict(fields)
        for name, _ in fields:
            if name not in DUTY_FIELDS:
                self.error(f"unknown field `{name}` in duty frame", "unknown-field", tok)
        for name in DUTY_REQUIRED_FIELDS:
            if name not in mapping:
                self.error(f"duty frame missing `{name}`", "missing-field", tok)
        action = mapping.get("action")
        if action is not None and not isinstance(action, EventRef):
            self.error("duty `action` must be an event", "bad-field-type", tok)
        if any(name not in mapping for name in DUTY_REQUIRED_FIELDS):
            raise _Bail()
        return DutyFrame(
            holder=mapping["holder"],
            counterparty=mapping["counterparty"],
            action=mapping["action"],
            violation=mapping.get("violation"),
            label=label,
        )

    # -- rules

    def parse_rule(self):
        start = self.cur
        lhs = self.parse_term()
        if self.at("=>"):
            self.advance()
            effect = self.parse_term()
            if not isinstance(effect, (ProductionEvent, EventRef)):
                self.error(
                    "reactive effect must be an event or a production",
                    "bad-effect",
                    start,
                )
                raise _Bail()
            if not isinstance(lhs, (ProductionEvent, EventRef)):
                self.error(
                    "reactive trigger must be an event or a production",
                    "bad-trigger",
                    start,
                )
                raise _Bail()
            rule = ReactiveRule(trigger=lhs, effect=effect)
        elif self.at("->"):
            self.advance()
            conclusion = self.parse_term()
            rule = TransformationalRule(condition=lhs, conclusion=conclusion)
        else:
            self.error(
                f"expected a declaration or rule, found {self._describe(self.cur)}",
                "bad-declaration",
                start,
            )
            raise _Bail()
        if self.at("."):
            self.advance()  # optional statement terminator
        return self.reg(rule, start)

    # -- terms, loosest binding first

    def parse_term(self):
        subject = self.parse_alt()
        if self.at("kw", "in"):
            tok = self.advance()
            desc = self.expect("ident", "descriptor name after `in`")
            return self.reg(Qualification(subject, desc.v), tok)
        return subject

    def parse_alt(self):
        first = self.parse_cmp()
        if not self.at("|"):
            return first
        options = [first]
        while self.at("|"):
            self.advance()
            options.append(self.parse_cmp())
        flat = []
        for o in options:  # keep alternation flat
            if isinstance(o, Alternation):
                flat.extend(o.options)
            else:
                flat.append(o)
        return Alternation(tuple(flat))

    def parse_cmp(self):
        lhs = self.parse_add()
        if self.cur.t in CMP_OPS:
            op = self.advance().v
            rhs = self.parse_add()
            return Comparison(lhs, op, rhs)
        return lhs

    def parse_add(self):
        lhs = self.parse_postfix()
        # Binary +/- must start on the line the left operand ends on,
        # otherwise `power { ... }` followed by a `+x => y` member would be
        # swallowed as arithmetic.
        while (self.at("+") or self.at("-")) and self.cur.line == self.toks[
            self.pos - 1
        ].end_line:
            op = self.advance().v
            rhs = self.parse_postfix()
            lhs = Arith(lhs, op, rhs)
        return lhs

    def parse_postfix(self):
        node = self.parse_primary()
        while True:
            prev = self.toks[self.pos - 1]
            # `.` continues a dotted path only when glued to both neighbours,
            # so a statement-terminating period is never swallowed.
            if (
                self.at(".")
                and self.cur.start == prev.end
                and self.peek().t == "ident"
                and self.peek().start == self.cur.end
            ):
                dot = self.advance()
                name = self.advance().v
                if isinstance(node, DottedRef):
                    node = DottedRef(node.parts + (name,))
                elif isinstance(node, Atom):
                    node = DottedRef((node.name, name))
                else:
                    self.error("property access on a non-name", "bad-access", dot)
                    raise _Bail()
                self.reg(node, dot)
                continue
            if (
                self.at("#")
                and self.cur.start == prev.end
                and self.peek().t == "int"
                and self.peek().start == self.cur.end
            ):
                hash_tok = self.advance()
                num = self.advance().v
                if isinstance(node, Atom):
                    node = InstanceRef(node.name, num)
                    self.reg(node, hash_tok)
                    continue
                self.error("instance reference on a non-name", "bad-access", hash_tok)
                raise _Bail()
            return node

    def parse_primary(self):
        tok = self.cur
        if self.at("("):
            self.advance()
            inner = self.parse_term()
            self.expect(")")
            return inner
        if self.at("kw", "now"):
            self.advance()
            self.expect("(", "`(` after now")
            self.expect(")", "`)` after now(")
            return self.reg(NowCall(), tok)
        if self.at("kw") and tok.v in POSITION_KINDS:
            return self.parse_frame()
        if self.at("int"):
            self.advance()
            return self.reg(IntLiteral(tok.v), tok)
        if self.at("dur"):
            self.advance()
            return self.reg(tok.v, tok)
        if self.at("event"):
            self.advance()
            refinements = ()
            # a refinement body binds only when it opens on the same line
            if self.at("{") and self.cur.line == tok.end_line:
                refinements = tuple(self.parse_body())
            return self.reg(EventRef(tok.v, refinements), tok)
        if self.at("+") or self.at("-"):
            sign = self.advance()
            target = self.parse_production_target()
            polarity = "create" if sign.v == "+" else "remove"
            return self.reg(ProductionEvent(polarity, target), sign)
        if self.at("ident"):
            self.advance()
            # call parens glue to the name; an object body opens on the same
            # line, so a following declaration is never swallowed
            if self.at("(") and self.cur.start == tok.end:
                args, _ = self.parse_call_args()
                return self.reg(CompoundCall(tok.v, tuple(args)), tok)
            if self.at("{") and self.cur.line == tok.end_line:
                body = tuple(self.parse_body())
                return self.reg(RefinedObject(tok.v, body), tok)
            return self.reg(Atom(tok.v), tok)
        self.error(f"expected a term, found {self._describe(tok)}")
        raise _Bail()

    def parse_production_target(self):
        if self.at("kw") and self.cur.v in POSITION_KINDS:
            return self.parse_frame()
        node = self.parse_postfix()
        if not isinstance(node, (Atom, DottedRef, RefinedObject, CompoundCall, InstanceRef)):
            self.error(
                "production target must be an object, compound or flag reference",
                "bad-target",
            )
            raise _Bail()
        return node

    def parse_call_args(self):
        self.expect("(")
        args = []
        while not self.at(")") and not self.at("eof"):
            args.append(self.parse_term())
            if self.at(","):
                self.advance()
            elif not self.at(")"):
                break
        close = self.expect(")")
        return args, close


class _Bail(Exception):
    """Internal: abandon the current construct and let recovery resume."""


def parse(source: str, filename: str = "<string>") -> ParseResult:
    """Parse DPCL source; the program is produced only when error-free."""
    tokens, diagnostics = tokenize(source, filename)
    parser = _Parser(tokens, filename, diagnostics)
    program = parser.parse_program(filename)
    if any(d.severity == "error" for d in diagnostics):
        return ParseResult(None, diagnostics, parser.spans)
    return ParseResult(program, diagnostics, parser.spans)


# ---------------------------------------------------------------------------
# Validation (name resolution, arity checks)


def validate(program: Program, spans=None, filename: str = "<string>") -> list:
    """Resolve names and check arities; returns diagnostics (possibly empty)."""
    spans = spans or {}
    diags: list[Diagnostic] = []
    compounds = {}

    def span_of(node):
        return spans.get(id(node), SourceSpan(filename, 1, 1, 1, 1))

    def err(node, message, code):
        diags.append(Diagnostic(span_of(node), "error", message, code))

    def warn(node, message, code):
        diags.append(Diagnostic(span_of(node), "warning", message, code))

    for decl in program.declarations:
        if isinstance(decl, CompoundDecl):
            if decl.name in compounds:
                err(decl, f"duplicate compound `{decl.name}`", "duplicate-compound")
            compounds[decl.name] = decl

    top_labels = set()
    for decl in program.declarations:
        if isinstance(decl, (PowerFrame, DutyFrame, OtherPositionFrame)) and decl.label:
            if decl.label in top_labels:
                err(decl, f"duplicate label `{decl.label}`", "duplicate-label")
            top_labels.add(decl.label)

    def check_term(node, scope):
        if isinstance(node, DottedRef):
            if node.parts[0] not in scope:
                err(
                    node,
                    f"unresolved name `{node.parts[0]}` in `{node}`",
                    "unresolved-name",
                )
            return
        if isinstance(node, CompoundCall):
            decl = compounds.get(node.name)
            if decl is None:
                err(node, f"unknown compound `{node.name}`", "unknown-compound")
            elif len(decl.params) != len(node.args):
                err(
                    node,
                    f"`{node.name}` takes {len(decl.params)} arguments,"
                    f" {len(node.args)} given",
                    "arity-mismatch",
                )
            for a in node.args:
                check_term(a, scope)
            return
        if isinstance(node, RefinedObject):
            decl = compounds.get(node.head)
            if decl is not None:
                given = [k for k, _ in node.body]
                missing = [p for p in decl.params if p not in given]
                unknown = [k for k in given if k not in decl.params]
                if missing:
                    err(
                        node,
                        f"`{node.head}` instantiation missing parameter(s):"
                        f" {', '.join(missing)}",
                        "arity-mismatch",
                    )
                if unknown:
                    err(
                        node,
                        f"`{node.head}` has no parameter(s): {', '.join(unknown)}",
                        "arity-mismatch",
                    )
            for _, v in node.body:
                check_term(v, scope)
            return
        if isinstance(node, Alternation):
            for o in node.options:
                check_term(o, scope)
            return
        if isinstance(node, Qualification):
            check_term(node.subject, scope)
            return
        if isinstance(node, (Comparison, Arith)):
            check_term(node.lhs, scope)
            check_term(node.rhs, scope)
            return
        if isinstance(node, EventRef):
            for _, v in node.refinements:
                check_term(v, scope)
            return
        if isinstance(node, ProductionEvent):
            check_frame_or_term(node.target, scope)
            return
        if isinstance(node, (PowerFrame, DutyFrame, OtherPositionFrame)):
            check_frame(node, scope)
            return
        # atoms, literals, now(), instance refs: nothing to resolve

    def check_frame_or_term(node, scope):
        if isinstance(node, (PowerFrame, DutyFrame, OtherPositionFrame)):
            check_frame(node, scope)
        else:
            check_term(node, scope)

    def check_frame(frame, scope):
        if isinstance(frame, PowerFrame):
            own = POWER_FIELDS
            items = [
                ("holder", frame.holder),
                ("action", frame.action),
                ("consequence", frame.consequence),
            ]
        elif isinstance(frame, DutyFrame):
            own = DUTY_FIELDS
            items = [
                ("holder", frame.holder),
                ("counterparty", frame.counterparty),
                ("action", frame.action),
            ]
            if frame.violation is not None:
                items.append(("violation", frame.violation))
        else:
            warn(
                frame,
                f"`{frame.kind}` positions are recorded but not executed",
                "no-exec-semantics",
            )
            own = tuple(k for k, _ in frame.body)
            items = list(frame.body)
        inner = scope | set(own)
        for _, value in items:
            check_term(value, inner)

    def check_rule(rule, scope):
        if isinstance(rule, TransformationalRule):
            check_term(rule.condition, scope)
            if (
                isinstance(rule.conclusion, ProductionEvent)
                and rule.conclusion.polarity == "remove"
            ):
                err(
                    rule,
                    "a transformational conclusion cannot be a removal",
                    "bad-conclusion",
                )
            check_frame_or_term(rule.conclusion, scope)
        else:
            check_term(rule.trigger, scope)
            check_frame_or_term(rule.effect, scope)

    global_scope = set(compounds) | top_labels

    for decl in program.declarations:
        if isinstance(decl, CompoundDecl):
            labels = set()
            for m in decl.members:
                if isinstance(m, (PowerFrame, DutyFrame, OtherPositionFrame)) and m.label:
                    if m.label in labels:
                        err(m, f"duplicate label `{m.label}`", "duplicate-label")
                    labels.add(m.label)
            scope = global_scope | set(decl.params) | labels
            for m in decl.members:
                if isinstance(m, (PowerFrame, DutyFrame, OtherPositionFrame)):
                    check_frame(m, scope)
                else:
                    check_rule(m, scope)
        elif isinstance(decl, (PowerFrame, DutyFrame, OtherPositionFrame)):
            check_frame(decl, global_scope)
        else:
            check_rule(decl, global_scope)

    return diags


def check(source: str, filename: str = "<string>") -> ParseResult:
    """Parse and, when parse succeeds, validate."""
    result = parse(source, filename)
    if result.program is not None:
        result.diagnostics.extend(validate(result.program, result.spans, filename))
        if any(d.severity == "error" for d in result.diagnostics):
            return ParseResult(None, result.diagnostics, result.spans)
    return result


def load_program(source: str, filename: str = "<string>") -> Program:
    """Parse + validate, raising ProgramError on any error diagnostic."""
    result = check(source, filename)
    if not result.ok or result.program is None:
        raise ProgramError([d for d in result.diagnostics if d.severity == "error"])
    return result.program


# ---------------------------------------------------------------------------
# Fragment parsing (REPL and scenario files reuse the main grammar)


def _parse_fragment(text: str, what: str):
    tokens, diags = tokenize(text, "<input>")
    parser = _Parser(tokens, "<input>", diags)
    node = None
    try:
        node = parser.parse_term()
    except _Bail:
        pass
    if node is None or diags or not parser.at("eof"):
        problems = "; ".join(d.message for d in diags) or "trailing input"
        raise ValueError(f"invalid {what}: {problems}")
    return node


def parse_term_text(text: str):
    return _parse_fragment(text, "term")


def parse_event_text(text: str) -> EventRef:
    node = _parse_fragment(text, "event")
    if not isinstance(node, EventRef):
        raise ValueError(f"invalid event: {text!r}")
    return node


def parse_duration_text(text: str) -> Duration:
    node = _parse_fragment(text, "duration")
    if not isinstance(node, Duration):
        raise ValueError(f"invalid duration: {text!r}")
    return node
