// Wire types for the session server's WebSocket protocol (JSON text frames).
// Mirrors docs/protocol.md in the engine repository; protocol version 1.

export const PROTOCOL_VERSION = 1;

export interface PatientBrief {
  id: string;
  precedence: "urgent" | "priority";
  kind: "litter" | "ambulatory";
  treated: boolean;
  t0: number;
  next_role: number;
  claimed: boolean;
}

export interface NodeCounts {
  total: number;
  urgent: number;
  priority: number;
  litter: number;
  ambulatory: number;
}

export interface FacilityView {
  id: string;
  role: "ccp" | "role1" | "role2" | "role3" | "axp" | "hlz";
  node: string | null;
  x: number;
  y: number;
  active: boolean;
  mobile: boolean;
  owner: string | null;
  moving: boolean;
  pad_slots: number | null;
  pad_occupied: string[];
  pad_queue: string[];
  counts: NodeCounts | null; // null = hidden by fog, render as unknown
  patients: PatientBrief[] | null;
}

export interface PlatformView {
  id: string;
  owner: string;
  class: string;
  x: number;
  y: number;
  status: string;
  at: string | null;
  node: string | null;
  callsign?: string;
  dest?: string | null;
  eta_min?: number | null;
  manifest?: PatientBrief[];
  litter_capacity?: number;
  ambulatory_capacity?: number;
  conversion?: number;
  medevac?: boolean;
  casevac_expires?: number | null;
  busy_until?: number | null;
}

export interface RingView {
  id: string;
  cx: number;
  cy: number;
  radius_km: number;
  affects: string[];
  start_min: number;
  end_min: number;
}

export interface ScoreBoard {
  score: number;
  saves: number;
  deaths: number;
  alive: number;
  spawned: number;
}

export interface ObservationView {
  role: string;
  time: number;
  tick: number;
  phase: "day" | "dusk" | "night" | "dawn";
  visibility_factor: number;
  sees_all: boolean;
  blackout: boolean;
  own_platforms: PlatformView[];
  friendly_platforms: PlatformView[];
  facilities: FacilityView[];
  rings: RingView[];
  casevac_requests: { id: string; role: string; status: string; details: string }[];
  score: ScoreBoard | null;
}

export interface EventRecord {
  seq: number;
  time: number;
  kind: string;
  actor: string | null;
  data: Record<string, unknown>;
}

export interface MapSummary {
  nodes: { id: string; x: number; y: number; kind: string; island: string | null }[];
  roads: { a: string; b: string; km: number }[];
  sea_lanes: { a: string; b: string; km: number }[];
  observation_radius_km: number;
}

// server -> client
export type ServerMessage =
  | { type: "hello_ack"; protocol: number; engine_version: string; scenario: string; teams: number; phase: string; roles: string[] }
  | { type: "welcome"; role: string; team: number; observer: boolean; phase: string; can_inject: boolean; sees_all: boolean; map: MapSummary }
  | { type: "join_refused"; reason: string }
  | { type: "snapshot"; seq: number; tick?: number; time?: number; phase: string; view: ObservationView | null }
  | { type: "delta"; seq: number; tick: number; time: number; events: EventRecord[]; view: ObservationView }
  | { type: "action_result"; action_id: string | null; accepted: boolean; reason: string | null; input_seq?: number }
  | { type: "inject_result"; accepted: boolean; results?: { team: number; accepted: boolean; reason: string | null }[] }
  | { type: "place_result"; accepted: boolean; reason: string | null }
  | { type: "commit_result"; accepted: boolean; reason: string | null }
  | { type: "phase"; phase: string }
  | { type: "chat"; from: string; text: string }
  | { type: "chat_blocked"; reason: string }
  | { type: "score"; teams: ({ team: number } & ScoreBoard)[] }
  | { type: "debrief"; team: number; summary: Record<string, unknown> }
  | { type: "clock"; paused: boolean }
  | { type: "error"; reason: string };

// client -> server
export type ClientMessage =
  | { type: "hello"; protocol: number }
  | { type: "join"; role: string; team: number; observe?: boolean; resume_from?: number }
  | { type: "ack"; seq: number }
  | { type: "place"; placements: { kind: string; node: string; facility?: string }[] }
  | { type: "commit_planning" }
  | { type: "action"; action_id: string; platform: string; verb: string; params: Record<string, unknown> }
  | { type: "inject"; kind: string; params: Record<string, unknown>; team?: number }
  | { type: "chat"; text: string }
  | { type: "score_query" }
  | { type: "get_debrief" }
  | { type: "pause" }
  | { type: "resume" };
