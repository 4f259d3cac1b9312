"""Program-to-program transformations.

The one shipped transformation replaces a duty's declarative violation
condition with a power of the counterparty to declare that violation:
the condition becomes the guard of a transformational rule whose
conclusion is the declare-power, and declaring produces the same
violation flag the condition used to raise.  This makes the monitoring
actor explicit while leaving the downstream reactions in place.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ast import (
    Atom,
    CompoundDecl,
    DottedRef,
    DutyFrame,
    EventRef,
    PowerFrame,
    ProductionEvent,
    Program,
    TransformationalRule,
)


class RewriteError(Exception):
    def __init__(self, code: str, message: str):
        self.code = code
        self.message = message
        super().__init__(f"{code}: {message}")


@dataclass(frozen=True)
class RewriteTransformation:
    name: str

    def applicable(self, node) -> bool:
        raise NotImplementedError

    def apply(self, node):
        """Return the replacement declaration list for one applicable node."""
        raise NotImplementedError


def _declare_power_rule(duty: DutyFrame) -> TransformationalRule:
    label = duty.label
    return TransformationalRule(
        condition=duty.violation,
        conclusion=PowerFrame(
            holder=DottedRef((label, "counterparty")),
            action=EventRef("declare_violation", (("target", Atom(label)),)),
            consequence=ProductionEvent("create", DottedRef((label, "violation"))),
        ),
    )


class ViolationToPower(RewriteTransformation):
    """Compile a duty's violation condition into a counterparty declare-power."""

    def __init__(self):
        super().__init__("violation-to-power")

    def applicable(self, node) -> bool:
        return (
            isinstance(node, DutyFrame)
            and node.label is not None
            and node.violation is not None
        )

    def apply(self, node: DutyFrame):
        stripped = DutyFrame(
            holder=node.holder,
            counterparty=node.counterparty,
            action=node.action,
            violation=None,
            label=node.label,
        )
        return [stripped, _declare_power_rule(node)]


TRANSFORMATIONS = {t.name: t for t in (ViolationToPower(),)}


def _get_transformation(name: str) -> RewriteTransformation:
    if name not in TRANSFORMATIONS:
        raise RewriteError("unknown-transform", f"no transformation named `{name}`")
    return TRANSFORMATIONS[name]


def _walk_sites(program: Program, transformation):
    """Yield (path, container, index) for every applicable node, source order."""
    for i, decl in enumerate(program.declarations):
        if transformation.applicable(decl):
            yield (decl.label or f"decl{i}", None, i)
        elif isinstance(decl, CompoundDecl):
            for j, member in enumerate(decl.members):
                if transformation.applicable(member):
                    label = member.label or f"member{j}"
                    yield (f"{decl.name}/{label}", decl, j)


def list_applicable(program: Program, name: str) -> list:
    """Node paths at which the named transformation applies, in source order."""
    transformation = _get_transformation(name)
    return [path for path, _, _ in _walk_sites(program, transformation)]


def _apply_at(program: Program, transformation, container, index) -> Program:
    if container is None:
        decls = list(program.declarations)
        decls[index : index + 1] = transformation.apply(decls[index])
        return Program(tuple(decls), program.source_name)
    decls = []
    for decl in program.declarations:
        if decl is container:
            members = list(decl.members)
            members[index : index + 1] = transformation.apply(members[index])
            decl = CompoundDecl(decl.name, decl.params, tuple(members))
        decls.append(decl)
    return Program(tuple(decls), program.source_name)


def apply_all(program: Program, name: str) -> Program:
    """Apply the transformation at every applicable site; idempotent."""
    transformation = _get_transformation(name)
    while True:
        sites = list(_walk_sites(program, transformation))
        if not sites:
            return program
        _, container, index = sites[0]
        program = _apply_at(program, transformation, container, index)


def rewrite_violation_to_power(program: Program, duty_label: str) -> Program:
    """Rewrite one labeled duty's violation condition into a declare-power."""
    transformation = _get_transformation("violation-to-power")
    for i, decl in enumerate(program.declarations):
        if isinstance(decl, DutyFrame) and decl.label == duty_label:
            if decl.violation is None:
                raise RewriteError(
                    "not-applicable", f"duty `{duty_label}` has no violation condition"
                )
            return _apply_at(program, transformation, None, i)
        if isinstance(decl, CompoundDecl):
            for j, member in enumerate(decl.members):
                if isinstance(member, DutyFrame) and member.label == duty_label:
                    if member.violation is None:
                        raise RewriteError(
                            "not-applicable",
                            f"duty `{duty_label}` has no violation condition",
                        )
                    return _apply_at(program, transformation, decl, j)
    raise RewriteError("label-not-found", f"no duty labeled `{duty_label}`")
