// Instructor console: injects, casevac grants, live score.  Rendered only
// when the bound role carries inject permission; players never see it.

import type { WsClient } from "./net.js";
import type { ClientState } from "./state.js";

export class InstructorConsole {
  private scoreTimer: number | null = null;

  constructor(
    private root: HTMLElement,
    private client: WsClient,
    private getState: () => ClientState,
  ) {}

  mount(): void {
    const state = this.getState();
    if (!state.canInject) {
      this.root.innerHTML = ""; // controls absent entirely for players
      return;
    }
    this.root.innerHTML = `
      <h3>instructor</h3>
      <div class="row">
        <input id="inj-ccp" placeholder="ccp id" size="8">
        <input id="inj-n" type="number" value="15" size="4">
        <button id="inj-mascal">MASCAL</button>
      </div>
      <div class="row">
        <button id="inj-ccp-off">CCP off</button>
        <button id="inj-ccp-on">CCP on</button>
      </div>
      <div class="row">
        <input id="inj-black" type="number" value="30" size="4"> min
        <button id="inj-blackout">blackout</button>
      </div>
      <div class="row">
        <input id="inj-req" placeholder="request id" size="8">
        <input id="inj-spec" placeholder="platform type" size="10">
        <input id="inj-node" placeholder="staging node" size="10">
        <button id="inj-grant">grant casevac</button>
      </div>
      <div class="row">
        <button id="inj-commit">commit planning</button>
        <button id="inj-pause">pause</button>
        <button id="inj-resume">resume</button>
      </div>
      <div id="live-score" class="score"></div>
      <div id="casevac-queue"></div>`;

    const val = (id: string) => (this.root.querySelector<HTMLInputElement>(`#${id}`)?.value ?? "").trim();
    const on = (id: string, fn: () => void) => this.root.querySelector(`#${id}`)?.addEventListener("click", fn);

    on("inj-mascal", () =>
      this.client.send({ type: "inject", kind: "mascal", params: { ccp: val("inj-ccp"), n: Number(val("inj-n")) } }),
    );
    on("inj-ccp-off", () =>
      this.client.send({ type: "inject", kind: "ccp_set_active", params: { ccp: val("inj-ccp"), active: false } }),
    );
    on("inj-ccp-on", () =>
      this.client.send({ type: "inject", kind: "ccp_set_active", params: { ccp: val("inj-ccp"), active: true } }),
    );
    on("inj-blackout", () => {
      const now = this.getState().time;
      this.client.send({
        type: "inject",
        kind: "comm_blackout",
        params: { start_min: now, end_min: now + Number(val("inj-black")) },
      });
    });
    on("inj-grant", () =>
      this.client.send({
        type: "inject",
        kind: "grant_casevac",
        params: { request: val("inj-req"), spec: val("inj-spec"), node: val("inj-node") },
      }),
    );
    on("inj-commit", () => this.client.send({ type: "commit_planning" }));
    on("inj-pause", () => this.client.send({ type: "pause" }));
    on("inj-resume", () => this.client.send({ type: "resume" }));

    if (this.scoreTimer === null) {
      this.scoreTimer = window.setInterval(() => {
        if (this.getState().phase === "execution") this.client.send({ type: "score_query" });
      }, 2000);
    }
  }

  render(): void {
    const state = this.getState();
    if (!state.canInject) return;
    const scoreDiv = this.root.querySelector("#live-score");
    if (scoreDiv && state.score) {
      const s = state.score;
      scoreDiv.textContent =
        `score ${s.score.toFixed(1)} | saves ${s.saves} | deaths ${s.deaths} | alive ${s.alive} | spawned ${s.spawned}`;
    }
    const queue = this.root.querySelector("#casevac-queue");
    if (queue && state.view) {
      queue.innerHTML = state.view.casevac_requests
        .map((r) => `<div>casevac ${r.id} from ${r.role}: ${r.status} — ${r.details}</div>`)
        .join("");
    }
  }
}
