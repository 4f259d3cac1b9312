// View model: pure projections of server snapshots. No simulation here —
// every field is lifted straight from the wire payload.

import type {
  CompoundSnapshot,
  ObjectSnapshot,
  PositionSnapshot,
  SessionState,
  StateDelta,
  StateSnapshot,
} from "./types.js";

export interface ObjectView {
  id: number;
  name: string;
  descriptors: string[];
}

export interface PositionCard {
  id: number;
  kind: string;
  label: string | null;
  violated: boolean;
  fields: [string, string][]; // bound frame fields, rendered by the server
  compound: number | null;
}

export interface KindGroup {
  kind: string;
  cards: PositionCard[];
}

export interface CompoundView {
  id: number;
  decl: string;
  paramText: string;
}

export interface SessionView {
  sessionId: string;
  lineage: string[]; // self first, root last
  clock: number;
  clockText: string;
  objects: ObjectView[];
  groups: KindGroup[];
  compounds: CompoundView[];
  violatedCount: number;
  eventCount: number;
}

const KIND_ORDER = ["power", "duty", "claim", "liability", "liberty", "disability", "no_claim", "immunity"];

export function formatClock(ticks: number): string {
  const d = Math.floor(ticks / 86400);
  const h = Math.floor((ticks % 86400) / 3600);
  const m = Math.floor((ticks % 3600) / 60);
  const s = ticks % 60;
  return `t=${ticks}s (${d}d ${h}h ${m}m ${s}s)`;
}

function objectView(obj: ObjectSnapshot): ObjectView {
  return { id: obj.id, name: obj.name, descriptors: obj.descriptors.map(([name]) => name) };
}

function positionCard(pos: PositionSnapshot): PositionCard {
  return {
    id: pos.id,
    kind: pos.kind,
    label: pos.label,
    violated: pos.violated,
    fields: Object.entries(pos.display),
    compound: pos.compound,
  };
}

function compoundView(comp: CompoundSnapshot): CompoundView {
  const params = comp.params.map(([name]) => comp.display[name]).join(", ");
  return { id: comp.id, decl: comp.decl, paramText: `${comp.decl}#${comp.id}(${params})` };
}

export function buildSessionView(sessionId: string, lineage: string[], state: StateSnapshot): SessionView {
  const groups: KindGroup[] = [];
  for (const kind of KIND_ORDER) {
    const cards = state.positions.filter((p) => p.kind === kind).map(positionCard);
    if (cards.length) groups.push({ kind, cards });
  }
  return {
    sessionId,
    lineage,
    clock: state.clock,
    clockText: formatClock(state.clock),
    objects: state.objects.map(objectView),
    groups,
    compounds: state.compounds.map(compoundView),
    violatedCount: state.positions.filter((p) => p.violated).length,
    eventCount: state.event_log.length,
  };
}

export function sessionViewOf(payload: SessionState): SessionView {
  return buildSessionView(payload.session_id, payload.lineage, payload.state);
}

// Spec'd duration syntax: an integer immediately followed by a unit.
const DURATION_RE = /^\d+(s|min|h|d|w|m|y)$/;

export function isValidDuration(text: string): boolean {
  return DURATION_RE.test(text.trim());
}

export function describeDelta(delta: StateDelta, state: StateSnapshot): string[] {
  const lines: string[] = [];
  const objName = (id: number) => state.objects.find((o) => o.id === id)?.name ?? `object#${id}`;
  const posName = (id: number) => {
    const pos = state.positions.find((p) => p.id === id);
    return pos ? (pos.label ?? `${pos.kind}#${pos.id}`) : `position#${id}`;
  };
  if (delta.disabled) lines.push("disabled: no matching power or duty");
  for (const obj of delta.created_objects) lines.push(`+ object ${obj.name}#${obj.id}`);
  for (const id of delta.removed_objects) lines.push(`- object #${id}`);
  for (const pos of delta.created_positions) {
    const label = pos.label ? ` ${pos.label}` : "";
    lines.push(`+ ${pos.kind}#${pos.id}${label} (${pos.display["action"] ?? ""})`);
  }
  for (const id of delta.removed_positions) lines.push(`- position #${id}`);
  for (const comp of delta.created_compounds) lines.push(`+ ${comp.decl}#${comp.id}`);
  for (const id of delta.removed_compounds) lines.push(`- compound #${id}`);
  for (const [oid, name] of delta.descriptors_added) lines.push(`${objName(oid)} in ${name}`);
  for (const [oid, name] of delta.descriptors_removed) lines.push(`${objName(oid)} out of ${name}`);
  for (const id of delta.violations) lines.push(`${posName(id)} violated`);
  if (!lines.length) lines.push("no changes");
  return lines;
}
