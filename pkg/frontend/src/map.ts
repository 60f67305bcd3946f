// Top-down canvas map: roads, sea lanes, facilities with casualty badges,
// platforms with selection, threat rings, day/night shading.

import type { FacilityView, MapSummary, ObservationView, PlatformView } from "./protocol.js";
import { badgeText, type ClientState } from "./state.js";

const FACILITY_GLYPH: Record<string, string> = {
  ccp: "⊕", // circled plus: collection point
  role1: "R1",
  role2: "R2",
  role3: "R3",
  axp: "AXP",
  hlz: "HLZ",
};

const PHASE_SHADE: Record<string, string> = {
  day: "rgba(0,0,0,0)",
  dusk: "rgba(20,20,60,0.25)",
  night: "rgba(5,5,40,0.45)",
  dawn: "rgba(60,40,20,0.2)",
};

export interface Camera {
  scale: number; // px per km
  ox: number;
  oy: number;
}

export function fitCamera(map: MapSummary, w: number, h: number): Camera {
  const xs = map.nodes.map((n) => n.x);
  const ys = map.nodes.map((n) => n.y);
  const minX = Math.min(...xs) - 6;
  const maxX = Math.max(...xs) + 6;
  const minY = Math.min(...ys) - 6;
  const maxY = Math.max(...ys) + 6;
  const scale = Math.min(w / (maxX - minX), h / (maxY - minY));
  return { scale, ox: minX, oy: minY };
}

export function toScreen(cam: Camera, x: number, y: number, h: number): [number, number] {
  return [(x - cam.ox) * cam.scale, h - (y - cam.oy) * cam.scale];
}

export interface Pick {
  kind: "platform" | "facility";
  id: string;
}

export function pickAt(state: ClientState, cam: Camera, px: number, py: number, h: number): Pick | null {
  const view = state.view;
  if (!view) return null;
  const hit = (x: number, y: number, r: number) => {
    const [sx, sy] = toScreen(cam, x, y, h);
    return Math.hypot(sx - px, sy - py) <= r;
  };
  for (const p of [...view.own_platforms, ...view.friendly_platforms]) {
    if (hit(p.x, p.y, 10)) return { kind: "platform", id: p.id };
  }
  for (const f of view.facilities) {
    if (hit(f.x, f.y, 12)) return { kind: "facility", id: f.id };
  }
  return null;
}

export function drawMap(
  ctx: CanvasRenderingContext2D,
  state: ClientState,
  cam: Camera,
  selection: Pick | null,
  w: number,
  h: number,
): void {
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = "#dce9f5"; // sea
  ctx.fillRect(0, 0, w, h);
  const map = state.map;
  const view = state.view;
  if (!map) return;

  const nodeById = new Map(map.nodes.map((n) => [n.id, n]));
  const land = map.nodes.filter((n) => n.kind !== "water");
  ctx.fillStyle = "#e8e4d4";
  for (const n of land) {
    const [sx, sy] = toScreen(cam, n.x, n.y, h);
    ctx.beginPath();
    ctx.arc(sx, sy, 24, 0, Math.PI * 2);
    ctx.fill();
  }

  const edge = (a: string, b: string, style: string, dash: number[]) => {
    const na = nodeById.get(a);
    const nb = nodeById.get(b);
    if (!na || !nb) return;
    ctx.strokeStyle = style;
    ctx.setLineDash(dash);
    ctx.beginPath();
    ctx.moveTo(...toScreen(cam, na.x, na.y, h));
    ctx.lineTo(...toScreen(cam, nb.x, nb.y, h));
    ctx.stroke();
    ctx.setLineDash([]);
  };
  ctx.lineWidth = 2;
  for (const r of map.roads) edge(r.a, r.b, "#8a7f60", []);
  for (const s of map.sea_lanes) edge(s.a, s.b, "#7fa8c9", [6, 6]);

  if (!view) return;

  for (const ring of view.rings) {
    const [sx, sy] = toScreen(cam, ring.cx, ring.cy, h);
    ctx.fillStyle = "rgba(200,30,30,0.15)";
    ctx.strokeStyle = "rgba(200,30,30,0.8)";
    ctx.beginPath();
    ctx.arc(sx, sy, ring.radius_km * cam.scale, 0, Math.PI * 2);
    ctx.fill();
    ctx.stroke();
  }

  for (const f of view.facilities) drawFacility(ctx, cam, f, selection, h);
  for (const p of view.friendly_platforms) drawPlatform(ctx, cam, state, p, selection, false, h);
  for (const p of view.own_platforms) drawPlatform(ctx, cam, state, p, selection, true, h);

  ctx.fillStyle = PHASE_SHADE[view.phase] ?? "rgba(0,0,0,0)";
  ctx.fillRect(0, 0, w, h);
}

function drawFacility(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  f: FacilityView,
  selection: Pick | null,
  h: number,
): void {
  const [sx, sy] = toScreen(cam, f.x, f.y, h);
  const selected = selection?.kind === "facility" && selection.id === f.id;
  ctx.fillStyle = f.role === "ccp" ? (f.active ? "#b03030" : "#9a9a9a") : "#384d63";
  ctx.strokeStyle = selected ? "#ff9900" : "#222";
  ctx.lineWidth = selected ? 3 : 1;
  ctx.beginPath();
  ctx.rect(sx - 9, sy - 9, 18, 18);
  ctx.fill();
  ctx.stroke();
  ctx.fillStyle = "#fff";
  ctx.font = "9px sans-serif";
  ctx.textAlign = "center";
  ctx.fillText(FACILITY_GLYPH[f.role] ?? "?", sx, sy + 3);

  // casualty badge: unknown renders as "?", never as zero
  const text = badgeText(f);
  if (f.role === "ccp" || text !== "0") {
    ctx.fillStyle = f.counts === null ? "#777" : "#b03030";
    ctx.beginPath();
    ctx.arc(sx + 11, sy - 11, 8, 0, Math.PI * 2);
    ctx.fill();
    ctx.fillStyle = "#fff";
    ctx.font = "bold 9px sans-serif";
    ctx.fillText(text, sx + 11, sy - 8);
  }
  ctx.fillStyle = "#333";
  ctx.font = "9px sans-serif";
  ctx.fillText(f.id, sx, sy + 20);
}

function drawPlatform(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  state: ClientState,
  p: PlatformView,
  selection: Pick | null,
  own: boolean,
  h: number,
): void {
  const [sx, sy] = toScreen(cam, p.x, p.y, h);
  const selected = selection?.kind === "platform" && selection.id === p.id;
  const air = p.class === "rotary_wing" || p.class === "tilt_rotor";
  ctx.fillStyle = own ? (air ? "#1b6f2a" : "#2a4d1b") : "#6d8a5a";
  ctx.strokeStyle = selected ? "#ff9900" : "#111";
  ctx.lineWidth = selected ? 3 : 1;
  ctx.beginPath();
  if (air) {
    ctx.moveTo(sx, sy - 8);
    ctx.lineTo(sx + 7, sy + 6);
    ctx.lineTo(sx - 7, sy + 6);
    ctx.closePath();
  } else {
    ctx.rect(sx - 7, sy - 5, 14, 10);
  }
  ctx.fill();
  ctx.stroke();
  // optimistic actions are visually marked until the server answers
  if (own && hasPending(state, p.id)) {
    ctx.strokeStyle = "#ff9900";
    ctx.setLineDash([3, 3]);
    ctx.beginPath();
    ctx.arc(sx, sy, 12, 0, Math.PI * 2);
    ctx.stroke();
    ctx.setLineDash([]);
  }
  if (own && p.manifest && p.manifest.length > 0) {
    ctx.fillStyle = "#fff";
    ctx.font = "bold 8px sans-serif";
    ctx.textAlign = "center";
    ctx.fillText(String(p.manifest.length), sx, sy + 3);
  }
  ctx.fillStyle = "#222";
  ctx.font = "8px sans-serif";
  ctx.fillText(p.id, sx, sy + 16);
}

function hasPending(state: ClientState, platformId: string): boolean {
  for (const a of state.pending.values()) if (a.platform === platformId) return true;
  return false;
}
