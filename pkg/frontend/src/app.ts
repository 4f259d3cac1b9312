// Application controller. Headless: holds branches and panel state, talks
// to the service, and re-renders from the snapshot the server returned to
// the most recent GET /state — never from local inference.

import { ApiError, DpclApi } from "./api.js";
import { buildSessionView, describeDelta, isValidDuration, sessionViewOf } from "./model.js";
import type { SessionView } from "./model.js";
import {
  renderActPanel,
  renderBanner,
  renderBranchTabs,
  renderDeltaLog,
  renderDiagnostics,
  renderSession,
  renderToast,
} from "./render.js";
import type { Diagnostic, EnabledAction, Step } from "./types.js";

export interface Branch {
  sessionId: string;
  view: SessionView;
}

export class App {
  api: DpclApi;
  programId: string | null = null;
  diagnostics: Diagnostic[] = [];
  banner: string | null = null;
  toast: string | null = null;
  branches: Branch[] = [];
  current = -1;
  selectedActor: string | null = null;
  enabled: EnabledAction[] = [];
  lastDelta: string[] = [];

  constructor(api: DpclApi) {
    this.api = api;
  }

  get branch(): Branch | null {
    return this.current >= 0 ? this.branches[this.current] : null;
  }

  get view(): SessionView | null {
    return this.branch?.view ?? null;
  }

  async loadProgram(source: string): Promise<boolean> {
    this.banner = null;
    this.toast = null;
    this.lastDelta = [];
    let result;
    try {
      result = await this.api.loadProgram(source);
    } catch (err) {
      this.banner = `cannot reach the service: ${(err as Error).message}`;
      return false;
    }
    this.diagnostics = result.diagnostics;
    if (!result.ok) return false;
    this.programId = result.programId;
    const session = await this.api.createSession(result.programId);
    this.branches = [];
    this.current = -1;
    this.selectedActor = null;
    this.enabled = [];
    await this.addBranch(session.sessionId);
    return true;
  }

  private async addBranch(sessionId: string): Promise<void> {
    const payload = await this.api.getState(sessionId);
    this.branches.push({ sessionId, view: sessionViewOf(payload) });
    this.current = this.branches.length - 1;
  }

  /** Re-fetch the current branch's state; the render always mirrors it. */
  async refresh(): Promise<void> {
    const branch = this.branch;
    if (!branch) return;
    const payload = await this.api.getState(branch.sessionId);
    branch.view = sessionViewOf(payload);
    if (this.selectedActor) {
      await this.loadEnabled();
    }
  }

  private async runStep(step: Step): Promise<boolean> {
    const branch = this.branch;
    if (!branch) return false;
    this.toast = null;
    try {
      const result = await this.api.step(branch.sessionId, step);
      this.lastDelta = describeDelta(result.delta, result.state);
      if (result.disabled) this.toast = "action disabled: no matching power or duty";
    } catch (err) {
      if (err instanceof ApiError) {
        this.toast = `${err.code}: ${err.message}`;
        return false; // state unchanged server-side; keep the rendered view
      }
      throw err;
    }
    await this.refresh();
    return true;
  }

  async assertActor(name: string, descriptors: string[], properties: Record<string, string | number> = {}) {
    return this.runStep({ assert: { name, descriptors, properties } });
  }

  async selectActor(name: string): Promise<void> {
    this.selectedActor = name;
    await this.loadEnabled();
  }

  private async loadEnabled(): Promise<void> {
    const branch = this.branch;
    if (!branch || !this.selectedActor) return;
    try {
      this.enabled = await this.api.getEnabled(branch.sessionId, this.selectedActor);
    } catch (err) {
      if (err instanceof ApiError) {
        this.enabled = [];
        this.toast = `${err.code}: ${err.message}`;
        return;
      }
      throw err;
    }
  }

  /** Perform an enabled action; `fills` provides values for free slots. */
  async performAction(action: EnabledAction, fills: Record<string, string> = {}) {
    if (!this.selectedActor) return false;
    const refinements: Record<string, string> = {};
    for (const r of action.refinements) {
      refinements[r.field] = r.free ? (fills[r.field] ?? r.value) : r.value;
    }
    return this.runStep({
      do: { actor: this.selectedActor, event: action.name, refinements },
    });
  }

  async advance(durationText: string): Promise<boolean> {
    const text = durationText.trim();
    if (!isValidDuration(text)) {
      this.toast = `not a duration: ${text} (use e.g. 30s, 2h, 1m)`;
      return false; // rejected client-side, nothing sent
    }
    return this.runStep({ advance: text });
  }

  async fork(): Promise<boolean> {
    const branch = this.branch;
    if (!branch) return false;
    const child = await this.api.fork(branch.sessionId);
    await this.addBranch(child.sessionId);
    this.lastDelta = [`forked ${branch.sessionId} into ${child.sessionId}`];
    return true;
  }

  async switchBranch(index: number): Promise<void> {
    if (index < 0 || index >= this.branches.length) return;
    this.current = index;
    await this.refresh();
  }

  render(): string {
    const parts = [renderBanner(this.banner), renderToast(this.toast), renderDiagnostics(this.diagnostics)];
    if (this.branches.length) {
      parts.push(renderBranchTabs(this.branches, this.current));
    }
    const view = this.view;
    if (view) {
      parts.push(renderSession(view));
      parts.push(`<h3>act as ${this.selectedActor ?? "..."}</h3>`);
      parts.push(renderActPanel(this.selectedActor, this.enabled));
      parts.push(renderDeltaLog(this.lastDelta));
    }
    return parts.join("\n");
  }
}
