// Side panels: selection details, manifest, action buttons, chat, notices.
// Every button press issues exactly one action request through the client.

import type { WsClient } from "./net.js";
import type { FacilityView, PatientBrief, PlatformView } from "./protocol.js";
import { badgeDetail, type ClientState } from "./state.js";
import type { Pick } from "./map.js";

export interface PanelRefs {
  selection: HTMLElement;
  status: HTMLElement;
  chatLog: HTMLElement;
  chatInput: HTMLInputElement;
  notices: HTMLElement;
}

export class Panels {
  private checkedPatients = new Set<string>();
  private transferTarget: string | null = null;

  constructor(
    private refs: PanelRefs,
    private client: WsClient,
    private getState: () => ClientState,
    private getSelection: () => Pick | null,
    private setDispatchArm: (armed: boolean) => void,
  ) {
    refs.chatInput.addEventListener("keydown", (ev) => {
      if (ev.key === "Enter" && refs.chatInput.value.trim()) {
        client.send({ type: "chat", text: refs.chatInput.value.trim() });
        refs.chatInput.value = "";
      }
    });
  }

  togglePatient(id: string): void {
    if (this.checkedPatients.has(id)) this.checkedPatients.delete(id);
    else this.checkedPatients.add(id);
    this.render();
  }

  render(): void {
    const state = this.getState();
    this.renderStatus(state);
    this.renderSelection(state);
    this.renderChat(state);
  }

  private renderStatus(state: ClientState): void {
    const phaseLabel = state.view ? `${state.view.phase} (${Math.round(state.view.visibility_factor * 100)}% visibility)` : "-";
    const blackout = state.view?.blackout ? "  COMM BLACKOUT" : "";
    this.refs.status.textContent =
      `${state.role ?? "?"} | ${state.phase} | t+${state.time.toFixed(1)} min | ${phaseLabel}${blackout}`;
    this.refs.notices.innerHTML = state.notices
      .slice(-5)
      .map((n) => `<div class="notice">${escapeHtml(n)}</div>`)
      .join("");
  }

  private renderSelection(state: ClientState): void {
    const sel = this.getSelection();
    const root = this.refs.selection;
    if (!sel || !state.view) {
      root.innerHTML = "<em>select a unit or site</em>";
      return;
    }
    if (sel.kind === "platform") {
      const p = state.view.own_platforms.find((x) => x.id === sel.id)
        ?? state.view.friendly_platforms.find((x) => x.id === sel.id);
      if (!p) {
        root.innerHTML = "<em>unit lost</em>";
        return;
      }
      root.innerHTML = this.platformHtml(state, p);
      this.bindPlatformButtons(state, p);
    } else {
      const f = state.view.facilities.find((x) => x.id === sel.id);
      root.innerHTML = f ? this.facilityHtml(f) : "<em>site lost</em>";
      if (f?.patients) {
        for (const pat of f.patients) {
          const box = root.querySelector<HTMLInputElement>(`input[data-pid="${pat.id}"]`);
          box?.addEventListener("change", () => this.togglePatient(pat.id));
        }
      }
    }
  }

  private platformHtml(state: ClientState, p: PlatformView): string {
    const own = p.manifest !== undefined;
    const rows = (p.manifest ?? [])
      .map((m) => `<li>${patientLabel(m)} <input type="checkbox" data-pid="${m.id}" ${this.checkedPatients.has(m.id) ? "checked" : ""}></li>`)
      .join("");
    const buttons = own && !state.observer
      ? `<div class="actions">
           <button id="btn-dispatch">dispatch&hellip;</button>
           <button id="btn-load">load checked</button>
           <button id="btn-unload">unload checked</button>
           <button id="btn-transfer">transfer checked&hellip;</button>
           <button id="btn-casevac">request casevac</button>
         </div>`
      : "";
    return `<h3>${p.callsign ?? p.id}</h3>
      <div>${p.class} | ${p.status}${p.at ? " @ " + p.at : ""}${p.dest ? " &rarr; " + p.dest : ""}</div>
      ${own ? `<div>capacity ${p.litter_capacity}L / ${p.ambulatory_capacity}A</div>` : ""}
      <ul class="manifest">${rows || (own ? "<li><em>empty</em></li>" : "")}</ul>
      ${buttons}`;
  }

  private facilityHtml(f: FacilityView): string {
    const patientRows = f.patients === null
      ? "<em>casualty details unknown</em>"
      : f.patients
          .map((m) => `<li>${patientLabel(m)} <input type="checkbox" data-pid="${m.id}" ${this.checkedPatients.has(m.id) ? "checked" : ""}></li>`)
          .join("");
    const pads = f.pad_slots !== null
      ? `<div>pads: ${f.pad_occupied.length}/${f.pad_slots} occupied, queue [${f.pad_queue.join(", ")}]</div>`
      : "";
    return `<h3>${f.id} (${f.role})</h3>
      <div>${badgeDetail(f)}</div>
      ${pads}
      <ul class="manifest">${typeof patientRows === "string" ? patientRows : ""}</ul>`;
  }

  private bindPlatformButtons(state: ClientState, p: PlatformView): void {
    const root = this.refs.selection;
    root.querySelector("#btn-dispatch")?.addEventListener("click", () => this.setDispatchArm(true));
    root.querySelector("#btn-load")?.addEventListener("click", () => {
      const ids = [...this.checkedPatients];
      if (ids.length) this.client.action(p.id, "load", { patients: ids });
      this.checkedPatients.clear();
    });
    root.querySelector("#btn-unload")?.addEventListener("click", () => {
      const ids = [...this.checkedPatients].filter((id) => p.manifest?.some((m) => m.id === id));
      if (ids.length) this.client.action(p.id, "unload", { patients: ids });
      this.checkedPatients.clear();
    });
    root.querySelector("#btn-transfer")?.addEventListener("click", () => {
      const target = window.prompt("transfer to platform id:", this.transferTarget ?? "");
      if (!target) return;
      this.transferTarget = target;
      const ids = [...this.checkedPatients];
      if (ids.length) this.client.action(p.id, "transfer_to", { to_platform: target, patients: ids });
      this.checkedPatients.clear();
    });
    root.querySelector("#btn-casevac")?.addEventListener("click", () => {
      const details = window.prompt("casevac request details:", "need additional lift") ?? "";
      this.client.action(p.id, "request_casevac", { details });
    });
    for (const m of p.manifest ?? []) {
      const box = root.querySelector<HTMLInputElement>(`input[data-pid="${m.id}"]`);
      box?.addEventListener("change", () => this.togglePatient(m.id));
    }
  }

  private renderChat(state: ClientState): void {
    this.refs.chatLog.innerHTML = state.chat
      .slice(-12)
      .map((c) => `<div><b>${escapeHtml(c.from)}:</b> ${escapeHtml(c.text)}</div>`)
      .join("");
  }
}

function patientLabel(m: PatientBrief): string {
  const cls = m.precedence === "urgent" ? "urgent" : "priority";
  return `<span class="${cls}">${m.id}</span> ${m.precedence}/${m.kind}${m.treated ? " (treated)" : ""}`;
}

function escapeHtml(s: string): string {
  return s.replace(/[&<>"]/g, (c) => ({ "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;" }[c] as string));
}
