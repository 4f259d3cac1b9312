"""DPCL: a normative-specification language and its interpreter.

Parse programs written around Hohfeldian power and duty frames, simulate
institutional scenarios against them (actions, clock advancement,
violations), rewrite programs (e.g. duty violations into counterparty
declare-powers) and manage persistent what-if sessions.
"""

from importlib import resources

from .ast import (
    duration_to_ticks,
    pretty_print,
    render_term,
    Program,
)
from .parser import (
    check,
    Diagnostic,
    load_program,
    parse,
    ProgramError,
    tokenize,
    validate,
)
from .engine import (
    advance_clock,
    assert_object,
    do_action,
    enabled_actions,
    init_state,
    produce,
    query_positions,
    recompute_closure,
    run,
    Scenario,
    scenario_from_json,
    scenario_to_json,
    Trace,
)
from .runtime import (
    EngineError,
    InstitutionalState,
    StateDelta,
    state_from_json,
    state_to_json,
)
from .rewrite import apply_all, list_applicable, rewrite_violation_to_power

__version__ = "0.1.0"


def corpus_source(name: str = "library") -> str:
    """Load a bundled corpus program by name."""
    return resources.files(__name__).joinpath(f"corpus/{name}.dpcl").read_text("utf-8")
