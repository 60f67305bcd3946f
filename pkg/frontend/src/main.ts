// Entry point: connect, bind a role from the URL, and run the render loop.
// ?ws=ws://host:port&role=medics&team=0&observe=0

import { WsClient } from "./net.js";
import { drawMap, fitCamera, pickAt, type Camera, type Pick } from "./map.js";
import { applyServerMessage, initialState, isStale, markPending, type ClientState } from "./state.js";
import { Panels } from "./panels.js";
import { InstructorConsole } from "./instructor.js";
import { renderDebrief } from "./debrief.js";

const params = new URLSearchParams(window.location.search);
const wsUrl = params.get("ws") ?? `ws://${window.location.hostname}:8765`;
const role = params.get("role") ?? "medics";
const team = Number(params.get("team") ?? "0");
const observe = params.get("observe") === "1";

let state: ClientState = initialState();
let selection: Pick | null = null;
let dispatchArmed = false;
let camera: Camera | null = null;
let mounted = false;

const canvas = document.getElementById("map") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;

const client = new WsClient({
  url: wsUrl,
  role,
  team,
  observe,
  onMessage: (msg) => {
    state = applyServerMessage(state, msg);
    if (msg.type === "welcome" && !mounted) {
      mounted = true;
      instructor.mount();
    }
    if (msg.type === "debrief" && state.debrief) {
      document.getElementById("debrief")!.hidden = false;
      renderDebrief(document.getElementById("debrief")!, state.debrief);
    }
    if (state.phase === "debrief" && state.debrief === null) {
      client.send({ type: "get_debrief" });
    }
    scheduleRender();
  },
  onStatus: (s) => {
    document.getElementById("conn")!.textContent = s;
    scheduleRender();
  },
  onQueueWarning: (n) => {
    state = { ...state, notices: [...state.notices, `offline: ${n} message(s) queued`].slice(-20) };
    scheduleRender();
  },
});

const panels = new Panels(
  {
    selection: document.getElementById("selection")!,
    status: document.getElementById("status")!,
    chatLog: document.getElementById("chat-log")!,
    chatInput: document.getElementById("chat-input") as HTMLInputElement,
    notices: document.getElementById("notices")!,
  },
  client,
  () => state,
  () => selection,
  (armed) => {
    dispatchArmed = armed;
    canvas.style.cursor = armed ? "crosshair" : "default";
  },
);

const instructor = new InstructorConsole(document.getElementById("instructor")!, client, () => state);

canvas.addEventListener("click", (ev) => {
  if (!camera) return;
  const rect = canvas.getBoundingClientRect();
  const px = ev.clientX - rect.left;
  const py = ev.clientY - rect.top;
  const hit = pickAt(state, camera, px, py, canvas.height);
  if (dispatchArmed && selection?.kind === "platform" && hit?.kind === "facility") {
    const actionId = client.action(selection.id, "dispatch", { to: hit.id });
    state = markPending(state, { actionId, platform: selection.id, verb: "dispatch", sentAt: Date.now() });
    dispatchArmed = false;
    canvas.style.cursor = "default";
  } else {
    selection = hit;
  }
  scheduleRender();
});

let renderQueued = false;
function scheduleRender(): void {
  if (renderQueued) return;
  renderQueued = true;
  requestAnimationFrame(() => {
    renderQueued = false;
    render();
  });
}

function render(): void {
  if (state.map && !camera) camera = fitCamera(state.map, canvas.width, canvas.height);
  if (camera) drawMap(ctx, state, camera, selection, canvas.width, canvas.height);
  panels.render();
  instructor.render();
  document.getElementById("stale")!.hidden = !isStale(state, Date.now());
}

setInterval(scheduleRender, 1000); // staleness banner refresh
client.connect();
