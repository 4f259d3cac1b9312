"""Command-line entry point: check, run, rewrite, repl, serve.

Exit codes: 0 ok, 1 domain error (diagnostics, failed step, unknown
transform), 2 system error (unreadable files and the like).
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
import tempfile
from pathlib import Path

from .ast import pretty_print, ProductionEvent, render_term, term_from_json
from .engine import (
    AdvanceStep,
    AssertStep,
    DoStep,
    ProduceStep,
    enabled_actions,
    query_positions,
    run,
    scenario_from_json,
)
from .parser import check, load_program, parse_duration_text, parse_event_text, parse_term_text, ProgramError
from .rewrite import RewriteError, apply_all, list_applicable
from .runtime import EngineError, canonical_json, display_term
from .store import SessionStore, StoreError


def _read_text(path) -> str:
    return Path(path).read_text("utf-8")


def _sessions_dir(args) -> Path:
    if getattr(args, "sessions_dir", None):
        return Path(args.sessions_dir)
    env = os.environ.get("DPCL_SESSIONS_DIR")
    if env:
        return Path(env)
    return Path(tempfile.mkdtemp(prefix="dpcl-sessions-"))


def cmd_check(args) -> int:
    try:
        source = _read_text(args.path)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    result = check(source, str(args.path))
    for diag in result.diagnostics:
        print(diag, file=sys.stderr)
    return 0 if result.ok else 1


def cmd_run(args) -> int:
    try:
        source = _read_text(args.program)
        scenario_text = _read_text(args.scenario) if args.scenario else '{"steps": []}'
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        program = load_program(source, str(args.program))
    except ProgramError as exc:
        print(exc, file=sys.stderr)
        return 1
    try:
        scenario = scenario_from_json(json.loads(scenario_text))
    except (json.JSONDecodeError, EngineError) as exc:
        print(f"error: bad scenario: {exc}", file=sys.stderr)
        return 1
    trace = run(program, scenario)
    if args.trace:
        Path(args.trace).write_text(canonical_json(trace.to_json()) + "\n", "utf-8")
    if args.format == "json":
        print(canonical_json(trace.to_json()))
    else:
        _print_summary(trace)
    if trace.error is not None:
        print(f"error at step {trace.error['index']}: "
              f"{trace.error['code']}: {trace.error['message']}", file=sys.stderr)
        return 1
    return 0


def _print_summary(trace) -> None:
    final = trace.final
    print(f"program: {trace.program_name}")
    print(f"steps: {len(trace.steps)}")
    print(f"clock: {final['clock']}")
    objects = final["objects"]
    print(f"objects ({len(objects)}):")
    for obj in objects:
        descs = ", ".join(name for name, _ in obj["descriptors"])
        suffix = f" ({descs})" if descs else ""
        print(f"  {obj['name']}#{obj['id']}{suffix}")
    positions = final["positions"]
    print(f"positions ({len(positions)}):")
    for pos in positions:
        label = f" {pos['label']}" if pos["label"] else ""
        flag = "  VIOLATED" if pos["violated"] else ""
        bits = [f"{k}: {v}" for k, v in pos["display"].items()]
        print(f"  {pos['kind']}#{pos['id']}{label} {{ {', '.join(bits)} }}{flag}")
    compounds = final["compounds"]
    print(f"compound instances ({len(compounds)}):")
    for comp in compounds:
        params = ", ".join(comp["display"][k] for k, _ in comp["params"])
        print(f"  {comp['decl']}#{comp['id']}({params})")
    violated = [p for p in positions if p["violated"]]
    print(f"violations: {len(violated)}")


def cmd_rewrite(args) -> int:
    try:
        source = _read_text(args.program)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        program = load_program(source, str(args.program))
    except ProgramError as exc:
        print(exc, file=sys.stderr)
        return 1
    try:
        sites = list_applicable(program, args.transform)
        rewritten = apply_all(program, args.transform)
    except RewriteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    output = pretty_print(rewritten)
    print(f"{len(sites)} site(s) rewritten: {', '.join(sites) if sites else '-'}",
          file=sys.stderr)
    if args.in_place:
        Path(args.program).write_text(output, "utf-8")
    elif args.out:
        Path(args.out).write_text(output, "utf-8")
    else:
        sys.stdout.write(output)
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    serve(_sessions_dir(args), host=args.host, port=args.port)
    return 0


# ---------------------------------------------------------------------------
# REPL

_REPL_HELP = """commands:
  :state                     show objects and positions
  :positions [kind]          list positions (kind: power, duty, other, ...)
  :advance <duration>        advance the clock (e.g. :advance 1m)
  :assert <name> [d1,d2] [{field: value, ...}]
                             create an object with descriptors/properties
  do <actor> #<event> {field: value, ...}
                             perform an action
  :enabled <actor>           list actions the actor can perform
  :fork                      fork the session and switch to the child
  :save <path>               save the session to a file
  :load <path>               load a session from a file
  :quit                      leave
"""

_ASSERT_RE = re.compile(r"^(\w+)\s*([A-Za-z0-9_,\s]*?)\s*(\{.*\})?\s*$")


class Repl:
    def __init__(self, program, source, sessions_dir, out=sys.stdout):
        self.store = SessionStore(sessions_dir)
        self.session = self.store.create_session(program, source)
        self.out = out

    def println(self, text=""):
        print(text, file=self.out)

    @property
    def state(self):
        return self.session.state

    def dispatch(self, line: str) -> bool:
        """Handle one command; returns False when the REPL should stop."""
        line = line.strip()
        if not line:
            return True
        try:
            return self._dispatch(line)
        except (EngineError, StoreError, ProgramError, ValueError) as exc:
            self.println(f"error: {exc}")
            return True

    def _dispatch(self, line: str) -> bool:
        if line in (":quit", ":q", ":exit"):
            return False
        if line in (":help", ":h", "?"):
            self.println(_REPL_HELP)
            return True
        if line == ":state":
            self._show_state()
            return True
        if line.startswith(":positions"):
            kind = line.split(maxsplit=1)[1].strip() if " " in line else None
            self._show_positions(kind)
            return True
        if line.startswith(":advance"):
            arg = line.split(maxsplit=1)
            if len(arg) < 2:
                self.println("usage: :advance <duration>")
                return True
            duration = parse_duration_text(arg[1].strip())
            self._step(AdvanceStep(duration))
            return True
        if line.startswith(":assert"):
            self._do_assert(line[len(":assert"):].strip())
            return True
        if line.startswith("do "):
            self._do_action(line[3:].strip())
            return True
        if line.startswith(":enabled"):
            arg = line.split(maxsplit=1)
            if len(arg) < 2:
                self.println("usage: :enabled <actor>")
                return True
            self._show_enabled(arg[1].strip())
            return True
        if line == ":fork":
            child = self.store.fork_session(self.session.sid)
            self.session = child
            self.println(f"forked; now on session {child.sid} (parent {child.parent})")
            return True
        if line.startswith(":save"):
            arg = line.split(maxsplit=1)
            if len(arg) < 2:
                self.println("usage: :save <path>")
                return True
            path = self.store.save_session(self.session.sid, arg[1].strip())
            self.println(f"saved {self.session.sid} to {path}")
            return True
        if line.startswith(":load"):
            arg = line.split(maxsplit=1)
            if len(arg) < 2:
                self.println("usage: :load <path>")
                return True
            self.session = self.store.load_session(arg[1].strip())
            self.println(f"loaded session {self.session.sid}")
            return True
        if line.startswith(":produce") or line[0] in "+-":
            text = line[len(":produce"):].strip() if line.startswith(":produce") else line
            term = parse_term_text(text)
            if not isinstance(term, ProductionEvent):
                self.println("a production looks like `+target` or `-target`")
                return True
            self._step(ProduceStep(term))
            return True
        self.println(f"unknown command: {line!r} (:help for help)")
        return True

    def _step(self, step):
        self.session, delta = self.store.step(self.session.sid, step)
        self._show_delta(delta)

    def _do_assert(self, rest: str):
        m = _ASSERT_RE.match(rest)
        if not m:
            self.println("usage: :assert <name> [d1,d2] [{field: value, ...}]")
            return
        name, descs_text, body_text = m.group(1), m.group(2), m.group(3)
        descriptors = tuple(d.strip() for d in descs_text.split(",") if d.strip())
        properties = ()
        if body_text:
            obj = parse_term_text(f"{name} {body_text}")
            properties = obj.body
        self._step(AssertStep(name, descriptors, properties))

    def _do_action(self, rest: str):
        parts = rest.split(maxsplit=1)
        if len(parts) < 2:
            self.println("usage: do <actor> #<event> {field: value, ...}")
            return
        actor, event_text = parts
        event = parse_event_text(event_text)
        self._step(DoStep(actor, event))

    def _show_delta(self, delta):
        if delta.disabled:
            self.println("disabled: no matching power or duty; nothing changed")
        lines = []
        for item in delta.created_objects:
            lines.append(f"+ object {item['name']}#{item['id']}")
        for oid in delta.removed_objects:
            lines.append(f"- object #{oid}")
        for item in delta.created_positions:
            label = f" {item['label']}" if item["label"] else ""
            bits = ", ".join(f"{k}: {v}" for k, v in item["display"].items())
            lines.append(f"+ {item['kind']}#{item['id']}{label} {{ {bits} }}")
        for pid in delta.removed_positions:
            lines.append(f"- position #{pid}")
        for item in delta.created_compounds:
            params = ", ".join(item["display"][k] for k, _ in item["params"])
            lines.append(f"+ {item['decl']}#{item['id']}({params})")
        for cid in delta.removed_compounds:
            lines.append(f"- compound #{cid}")
        for oid, name, _ in delta.descriptors_added:
            obj = self.state.objects.get(oid)
            lines.append(f"  {obj.base_name if obj else oid} in {name}")
        for oid, name in delta.descriptors_removed:
            obj = self.state.objects.get(oid)
            lines.append(f"  {obj.base_name if obj else oid} out of {name}")
        for pid in delta.violations:
            pos = self.state.positions.get(pid)
            who = pos.label if pos and pos.label else f"duty#{pid}"
            lines.append(f"  {who} violated")
        for occ in delta.events:
            tag = " (disabled)" if occ["disabled"] else ""
            lines.append(f"  event {occ['display']}{tag}")
        if not lines:
            lines.append("  no changes")
        for text in lines:
            self.println(text)
        self.println(f"clock: {self.state.clock}")

    def _show_state(self):
        snap = self.session.snapshot()
        if not snap["objects"] and not snap["positions"]:
            self.println("no objects, no positions")
            return
        for obj in snap["objects"]:
            descs = ", ".join(name for name, _ in obj["descriptors"])
            props = ", ".join(f"{k}: {render_term_from_json(v)}" for k, v in obj["properties"].items())
            extras = "; ".join(x for x in (descs, props) if x)
            self.println(f"object {obj['name']}#{obj['id']}" + (f" ({extras})" if extras else ""))
        self._print_position_rows(snap["positions"])
        for comp in snap["compounds"]:
            params = ", ".join(comp["display"][k] for k, _ in comp["params"])
            self.println(f"compound {comp['decl']}#{comp['id']}({params})")
        self.println(f"clock: {snap['clock']}")

    def _print_position_rows(self, rows):
        for pos in rows:
            label = f" {pos['label']}" if pos["label"] else ""
            flag = "  VIOLATED" if pos["violated"] else ""
            bits = ", ".join(f"{k}: {v}" for k, v in pos["display"].items())
            self.println(f"{pos['kind']}#{pos['id']}{label} {{ {bits} }}{flag}")

    def _show_positions(self, kind):
        matches = query_positions(self.state, kind=kind)
        snap = self.session.snapshot()
        wanted = {p.pid for p in matches}
        rows = [p for p in snap["positions"] if p["id"] in wanted]
        if not rows:
            self.println("no positions")
        self._print_position_rows(rows)

    def _show_enabled(self, actor):
        actions = enabled_actions(self.state, actor)
        if not actions:
            self.println("no enabled actions")
            return
        for pid, event in actions:
            self.println(f"power#{pid}: {display_term(self.state, event)}")

    def loop(self):
        self.println(f"dpcl repl; session {self.session.sid} (:help for commands)")
        while True:
            try:
                line = input("dpcl> ")
            except EOFError:
                self.println()
                return
            except KeyboardInterrupt:
                self.println()
                continue
            if not self.dispatch(line):
                return


def render_term_from_json(data):
    return render_term(term_from_json(data))


def cmd_repl(args) -> int:
    try:
        source = _read_text(args.program)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        program = load_program(source, str(args.program))
    except ProgramError as exc:
        print(exc, file=sys.stderr)
        return 1
    Repl(program, source, _sessions_dir(args)).loop()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpcl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="parse and validate a program")
    p.add_argument("path")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("run", help="run a scenario and emit a trace")
    p.add_argument("program")
    p.add_argument("--scenario", help="scenario JSON file")
    p.add_argument("--trace", help="write the trace JSON here")
    p.add_argument("--format", choices=("json", "summary"), default="summary")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("rewrite", help="apply a program transformation")
    p.add_argument("program")
    p.add_argument("--transform", default="violation-to-power")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--in-place", action="store_true")
    group.add_argument("--out")
    p.set_defaults(func=cmd_rewrite)

    p = sub.add_parser("repl", help="interactively step a session")
    p.add_argument("program")
    p.add_argument("--sessions-dir")
    p.set_defaults(func=cmd_repl)

    p = sub.add_parser("serve", help="serve the HTTP API")
    p.add_argument("--port", type=int, default=8479)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--sessions-dir")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
