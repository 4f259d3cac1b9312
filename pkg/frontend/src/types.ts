// Wire types for the dpcl HTTP service. The UI renders these verbatim and
// never derives institutional consequences on its own.

export interface Descriptor {
  name: string;
  provenance: string;
}

export interface ObjectSnapshot {
  id: number;
  name: string;
  origin: { kind: string };
  properties: Record<string, unknown>;
  descriptors: [string, { prov: string }][];
}

export interface PositionSnapshot {
  id: number;
  kind: string;
  label: string | null;
  compound: number | null;
  origin: { kind: string; [k: string]: unknown };
  violated: boolean;
  frame: unknown;
  display: Record<string, string>;
}

export interface CompoundSnapshot {
  id: number;
  decl: string;
  origin: { kind: string };
  params: [string, unknown][];
  display: Record<string, string>;
  member_positions: number[];
  member_rules: number[];
}

export interface RuleSnapshot {
  id: number;
  kind: "transformational" | "reactive";
  origin: { kind: string };
  rule: unknown;
  display: string;
}

export interface EventSnapshot {
  seq: number;
  at: number;
  actor: number | null;
  event: unknown;
  display: string;
  provenance: { kind: string };
  disabled: boolean;
}

export interface StateSnapshot {
  dpcl_schema: number;
  clock: number;
  next_id: number;
  next_seq: number;
  objects: ObjectSnapshot[];
  positions: PositionSnapshot[];
  compounds: CompoundSnapshot[];
  rules: RuleSnapshot[];
  event_log: EventSnapshot[];
}

export interface StateDelta {
  clock_to: number;
  counters_after: [number, number];
  created_objects: ObjectSnapshot[];
  removed_objects: number[];
  created_positions: PositionSnapshot[];
  removed_positions: number[];
  created_compounds: CompoundSnapshot[];
  removed_compounds: number[];
  created_rules: RuleSnapshot[];
  removed_rules: number[];
  descriptors_added: [number, string, { prov: string }][];
  descriptors_removed: [number, string][];
  properties_set: [number, string, unknown][];
  violations: number[];
  events: EventSnapshot[];
  disabled: boolean;
}

export interface Diagnostic {
  file: string;
  line: number;
  col: number;
  severity: "error" | "warning";
  code: string;
  message: string;
  rendered: string;
}

export interface EnabledRefinement {
  field: string;
  value: string;
  free: boolean;
}

export interface EnabledAction {
  power: number;
  name: string;
  display: string;
  refinements: EnabledRefinement[];
}

export type Step =
  | { assert: { name: string; descriptors: string[]; properties: Record<string, string | number> } }
  | { do: { actor: string; event: string; refinements: Record<string, string | number> } }
  | { advance: string }
  | { produce: string };

export interface SessionState {
  session_id: string;
  parent: string | null;
  lineage: string[];
  state: StateSnapshot;
}

export interface StepResult {
  delta: StateDelta;
  state: StateSnapshot;
  disabled: boolean;
}
