"""Lexer, parser and validator behaviour, including diagnostics."""

import pytest

from dpcl.ast import (
    Alternation,
    Atom,
    CompoundDecl,
    DottedRef,
    Duration,
    DutyFrame,
    EventRef,
    PowerFrame,
    ProductionEvent,
    Qualification,
    ReactiveRule,
    TransformationalRule,
)
from dpcl.parser import check, parse, tokenize, validate


def toks(source):
    tokens, diags = tokenize(source)
    assert not diags
    return [(t.t, t.v) for t in tokens[:-1]]


def test_tokenize_descriptor_phrase():
    assert toks("holder in member") == [
        ("ident", "holder"),
        ("kw", "in"),
        ("ident", "member"),
    ]


def test_tokenize_empty():
    assert toks("") == []


def test_tokenize_reactive_production():
    assert toks("#rain => +wet") == [
        ("event", "rain"),
        ("=>", "=>"),
        ("+", "+"),
        ("ident", "wet"),
    ]


def test_tokenize_duration_and_int():
    assert toks("now() + 1m 15 2min") == [
        ("kw", "now"),
        ("(", "("),
        (")", ")"),
        ("+", "+"),
        ("dur", Duration(1, "m")),
        ("int", 15),
        ("dur", Duration(2, "min")),
    ]


def test_tokenize_unknown_char():
    _, diags = tokenize("power @ {")
    assert any(d.code == "unknown-char" for d in diags)


def test_tokenize_comments_skipped():
    assert toks("// a comment\nx") == [("ident", "x")]


def test_parse_register_power():
    result = parse(
        """
        power {
            holder: student | staff
            action: #register { instrument: holder.id_card }
            consequence: holder in member
        }
        """
    )
    assert result.ok
    (frame,) = result.program.declarations
    assert frame == PowerFrame(
        holder=Alternation((Atom("student"), Atom("staff"))),
        action=EventRef("register", (("instrument", DottedRef(("holder", "id_card"))),)),
        consequence=Qualification(Atom("holder"), "member"),
    )


def test_parse_borrowing_compound(corpus_program):
    decl = corpus_program.compounds()["borrowing"]
    assert isinstance(decl, CompoundDecl)
    assert decl.params == ("lender", "borrower", "item", "timeout")
    kinds = [type(m) for m in decl.members]
    assert kinds == [PowerFrame, DutyFrame, ReactiveRule]
    duty = decl.members[1]
    assert duty.label == "d1"
    assert duty.violation is not None
    rule = decl.members[2]
    assert rule.trigger == ProductionEvent("create", DottedRef(("d1", "violation")))


def test_missing_fields_reported_each():
    result = parse("power { holder: x }")
    assert result.program is None
    messages = [d.message for d in result.diagnostics]
    assert any("action" in m for m in messages)
    assert any("consequence" in m for m in messages)


def test_error_recovery_counts_independent_errors():
    source = """
    power { holder: a }
    power { holder: b }
    duty { holder: c }
    """
    result = parse(source)
    errors = [d for d in result.diagnostics if d.severity == "error"]
    # two powers missing 2 fields each, one duty missing 2 fields: >= 3 sites
    assert len(errors) >= 3
    assert sum("power frame missing" in d.message for d in errors) == 4


def test_duplicate_field_rejected():
    result = parse("power { holder: a\n holder: b\n action: #f\n consequence: c }")
    assert any(d.code == "duplicate-field" for d in result.diagnostics)


def test_optional_rule_terminator():
    result = parse("a -> b.\n#f => #g.")
    assert result.ok
    first, second = result.program.declarations
    assert first == TransformationalRule(Atom("a"), Atom("b"))
    assert second == ReactiveRule(EventRef("f"), EventRef("g"))


def test_terminator_not_confused_with_access():
    result = parse("a -> b.violation")
    assert result.ok
    (rule,) = result.program.declarations
    assert rule.conclusion == DottedRef(("b", "violation"))


def test_diagnostic_rendering():
    result = parse("power { holder: x }", filename="f.dpcl")
    rendered = str(result.diagnostics[0])
    assert rendered.startswith("f.dpcl:1:")
    assert "error[missing-field]" in rendered


def test_validate_fine_call_resolves(corpus_source):
    result = check(corpus_source)
    assert result.ok


def test_validate_unknown_label():
    source = """
    borrowing(x) {
        +d1.violation => +wet
    }
    """
    result = check(source)
    assert not result.ok
    assert any(d.code == "unresolved-name" for d in result.diagnostics)


def test_validate_arity_mismatch():
    source = """
    fine(borrower, lender) {}
    power {
        holder: x
        action: #f
        consequence: +fine(borrower)
    }
    """
    result = check(source)
    # oracle: the declaration takes 2 parameters, 1 given
    assert any(d.code == "arity-mismatch" for d in result.diagnostics)


def test_validate_unknown_compound():
    result = check("power { holder: x\n action: #f\n consequence: +mystery(a) }")
    assert any(d.code == "unknown-compound" for d in result.diagnostics)


def test_validate_other_position_warns():
    result = check("claim { holder: x\n counterparty: y }")
    assert result.ok
    assert any(d.code == "no-exec-semantics" and d.severity == "warning" for d in result.diagnostics)


def test_validate_removal_conclusion_rejected():
    result = check("a -> -b")
    assert any(d.code == "bad-conclusion" for d in result.diagnostics)


def test_compound_instantiation_param_check():
    source = """
    bundle(x, y) {}
    power {
        holder: h
        action: #go
        consequence: +bundle { x: a }
    }
    """
    result = check(source)
    assert any(d.code == "arity-mismatch" and "missing parameter" in d.message
               for d in result.diagnostics)


def test_empty_source_is_valid():
    result = check("")
    assert result.ok
    assert result.program.declarations == ()


def test_parse_is_deterministic(corpus_source):
    a = parse(corpus_source)
    b = parse(corpus_source)
    assert a.program == b.program
