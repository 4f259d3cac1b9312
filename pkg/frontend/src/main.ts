// DOM bootstrap: textarea + controls on the left, the live session on the
// right. All event handling is delegated; the controller owns the state.

import { App } from "./app.js";
import { DpclApi } from "./api.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("api") ?? "http://127.0.0.1:8479";
const app = new App(new DpclApi(baseUrl));

const $ = (id: string) => document.getElementById(id) as HTMLElement;

function repaint() {
  $("session").innerHTML = app.render();
}

async function handle(cmd: string, el: HTMLElement) {
  if (cmd === "load-program") {
    const source = ($("program-source") as HTMLTextAreaElement).value;
    await app.loadProgram(source);
  } else if (cmd === "assert-actor") {
    const name = ($("actor-name") as HTMLInputElement).value.trim();
    const descs = ($("actor-descriptors") as HTMLInputElement).value
      .split(",")
      .map((s) => s.trim())
      .filter(Boolean);
    const propsRaw = ($("actor-properties") as HTMLInputElement).value.trim();
    const properties: Record<string, string> = {};
    for (const pair of propsRaw.split(",").map((s) => s.trim()).filter(Boolean)) {
      const [k, v] = pair.split(":").map((s) => s.trim());
      if (k && v) properties[k] = v;
    }
    if (name) await app.assertActor(name, descs, properties);
  } else if (cmd === "advance") {
    await app.advance(($("advance-input") as HTMLInputElement).value);
  } else if (cmd === "fork") {
    await app.fork();
  } else if (cmd === "select-actor") {
    await app.selectActor(el.dataset.actor ?? "");
  } else if (cmd === "switch-branch") {
    await app.switchBranch(Number(el.dataset.index));
  } else if (cmd === "perform-action") {
    const action = app.enabled[Number(el.dataset.index)];
    if (action) {
      const fills: Record<string, string> = {};
      for (const r of action.refinements) {
        if (r.free) {
          fills[r.field] = window.prompt(`${action.name}: value for ${r.field}`, r.value) ?? r.value;
        }
      }
      await app.performAction(action, fills);
    }
  }
  repaint();
}

document.addEventListener("click", (event) => {
  const el = (event.target as HTMLElement).closest("[data-cmd]") as HTMLElement | null;
  if (el?.dataset.cmd) {
    handle(el.dataset.cmd, el).catch((err) => {
      app.banner = String(err);
      repaint();
    });
  }
});

repaint();
