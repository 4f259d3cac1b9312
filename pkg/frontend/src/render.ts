// HTML renderers: pure string builders over the view model, so they are
// testable without a DOM. main.ts injects the strings and wires events.

import type { Diagnostic, EnabledAction } from "./types.js";
import type { SessionView } from "./model.js";

export function esc(text: unknown): string {
  return String(text)
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderDiagnostics(diagnostics: Diagnostic[]): string {
  if (!diagnostics.length) return "";
  const rows = diagnostics
    .map(
      (d) =>
        `<li class="diag ${d.severity}"><span class="loc">${d.line}:${d.col}</span> ` +
        `<span class="code">[${esc(d.code)}]</span> ${esc(d.message)}</li>`,
    )
    .join("");
  return `<ul class="diagnostics">${rows}</ul>`;
}

export function renderBanner(message: string | null): string {
  return message ? `<div class="banner">${esc(message)}</div>` : "";
}

export function renderToast(message: string | null): string {
  return message ? `<div class="toast">${esc(message)}</div>` : "";
}

export function renderBranchTabs(branches: { sessionId: string }[], current: number): string {
  const tabs = branches
    .map((b, i) => {
      const cls = i === current ? "tab current" : "tab";
      return `<button class="${cls}" data-cmd="switch-branch" data-index="${i}">${esc(b.sessionId)}</button>`;
    })
    .join("");
  return `<nav class="branches">${tabs}</nav>`;
}

export function renderBreadcrumb(lineage: string[]): string {
  // lineage is self-first; display root -> ... -> self
  const chain = [...lineage].reverse();
  return `<div class="breadcrumb">${chain.map(esc).join(" &raquo; ")}</div>`;
}

export function renderObjects(view: SessionView): string {
  if (!view.objects.length) return `<p class="empty">no objects</p>`;
  const rows = view.objects
    .map((o) => {
      const descs = o.descriptors.map((d) => `<span class="descriptor">${esc(d)}</span>`).join(" ");
      return `<li data-cmd="select-actor" data-actor="${esc(o.name)}" class="object">` +
        `<span class="name">${esc(o.name)}</span>#${o.id} ${descs}</li>`;
    })
    .join("");
  return `<ul class="objects">${rows}</ul>`;
}

export function renderPositions(view: SessionView): string {
  if (!view.groups.length) return `<p class="empty">no positions</p>`;
  return view.groups
    .map((group) => {
      const cards = group.cards
        .map((card) => {
          const classes = card.violated ? "card violated" : "card";
          const label = card.label ? `<span class="label">${esc(card.label)}</span>` : "";
          const fields = card.fields
            .map(([k, v]) => `<div class="field"><b>${esc(k)}</b>: ${esc(v)}</div>`)
            .join("");
          const badge = card.violated ? `<span class="badge">violated</span>` : "";
          return `<div class="${classes}" data-position="${card.id}">` +
            `<header>${esc(card.kind)}#${card.id} ${label} ${badge}</header>${fields}</div>`;
        })
        .join("");
      return `<section class="kind-group"><h3>${esc(group.kind)}</h3>${cards}</section>`;
    })
    .join("");
}

export function renderCompounds(view: SessionView): string {
  if (!view.compounds.length) return "";
  const rows = view.compounds.map((c) => `<li>${esc(c.paramText)}</li>`).join("");
  return `<section class="compounds"><h3>compound instances</h3><ul>${rows}</ul></section>`;
}

export function renderActPanel(actor: string | null, actions: EnabledAction[]): string {
  if (!actor) return `<p class="empty">select an actor to see enabled actions</p>`;
  if (!actions.length) return `<p class="empty">no enabled actions for ${esc(actor)}</p>`;
  const rows = actions
    .map((a, i) => {
      return `<button class="action" data-cmd="perform-action" data-index="${i}">` +
        `${esc(a.display)}</button>`;
    })
    .join("");
  return `<div class="act-panel" data-actor="${esc(actor)}">${rows}</div>`;
}

export function renderDeltaLog(lines: string[]): string {
  if (!lines.length) return "";
  const rows = lines.map((l) => `<li>${esc(l)}</li>`).join("");
  return `<section class="delta-log"><h3>last step</h3><ul>${rows}</ul></section>`;
}

export function renderSession(view: SessionView): string {
  return (
    renderBreadcrumb(view.lineage) +
    `<div class="clock">${esc(view.clockText)}</div>` +
    `<div class="columns"><div class="col">` +
    `<h3>objects</h3>${renderObjects(view)}${renderCompounds(view)}</div>` +
    `<div class="col">${renderPositions(view)}</div></div>`
  );
}
