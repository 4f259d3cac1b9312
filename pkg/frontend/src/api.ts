// Thin typed client over the dpcl HTTP API. Every institutional fact the
// UI shows comes back through one of these calls.

import type {
  Diagnostic,
  EnabledAction,
  SessionState,
  StateSnapshot,
  Step,
  StepResult,
} from "./types.js";

export class ApiError extends Error {
  status: number;
  code: string;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.status = status;
    this.code = code;
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export type LoadProgramResult =
  | { ok: true; programId: string; diagnostics: Diagnostic[] }
  | { ok: false; diagnostics: Diagnostic[] };

export class DpclApi {
  baseUrl: string;
  private fetchImpl: FetchLike;

  constructor(baseUrl = "http://127.0.0.1:8479", fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  private async request(method: string, path: string, body?: unknown, raw?: string) {
    const init: RequestInit = { method };
    if (raw !== undefined) {
      init.body = raw;
      init.headers = { "content-type": "text/plain" };
    } else if (body !== undefined) {
      init.body = JSON.stringify(body);
      init.headers = { "content-type": "application/json" };
    }
    const response = await this.fetchImpl(this.baseUrl + path, init);
    const payload = await response.json();
    return { status: response.status, payload };
  }

  private fail(status: number, payload: any): never {
    const err = payload?.error ?? {};
    throw new ApiError(status, err.code ?? "http-error", err.message ?? `HTTP ${status}`);
  }

  async loadProgram(source: string): Promise<LoadProgramResult> {
    const { status, payload } = await this.request("POST", "/programs", undefined, source);
    if (status === 201) {
      return { ok: true, programId: payload.program_id, diagnostics: payload.diagnostics };
    }
    if (status === 422) {
      return { ok: false, diagnostics: payload.diagnostics };
    }
    this.fail(status, payload);
  }

  async createSession(programId: string): Promise<{ sessionId: string; state: StateSnapshot }> {
    const { status, payload } = await this.request("POST", "/sessions", { program_id: programId });
    if (status !== 201) this.fail(status, payload);
    return { sessionId: payload.session_id, state: payload.state };
  }

  async step(sessionId: string, step: Step): Promise<StepResult> {
    const { status, payload } = await this.request("POST", `/sessions/${sessionId}/steps`, step);
    if (status !== 200) this.fail(status, payload);
    return payload as StepResult;
  }

  async getState(sessionId: string): Promise<SessionState> {
    const { status, payload } = await this.request("GET", `/sessions/${sessionId}/state`);
    if (status !== 200) this.fail(status, payload);
    return payload as SessionState;
  }

  async getEnabled(sessionId: string, actor: string): Promise<EnabledAction[]> {
    const { status, payload } = await this.request(
      "GET",
      `/sessions/${sessionId}/enabled?actor=${encodeURIComponent(actor)}`,
    );
    if (status !== 200) this.fail(status, payload);
    return payload.enabled as EnabledAction[];
  }

  async fork(sessionId: string): Promise<{ sessionId: string; state: StateSnapshot }> {
    const { status, payload } = await this.request("POST", `/sessions/${sessionId}/fork`);
    if (status !== 201) this.fail(status, payload);
    return { sessionId: payload.session_id, state: payload.state };
  }

  async getTrace(sessionId: string): Promise<unknown> {
    const { status, payload } = await this.request("GET", `/sessions/${sessionId}/trace`);
    if (status !== 200) this.fail(status, payload);
    return payload;
  }

  async rewrite(programId: string, transform = "violation-to-power") {
    const { status, payload } = await this.request("POST", "/rewrite", {
      program_id: programId,
      transform,
    });
    if (status !== 200) this.fail(status, payload);
    return payload as { program_id: string; source: string; sites: string[] };
  }
}
