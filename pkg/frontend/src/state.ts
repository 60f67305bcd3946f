// Client-side state: the last server snapshot with acknowledged deltas folded
// in, plus optimistic action bookkeeping.  The reducer is pure so it can be
// unit-tested without a socket; rendering reads only from this state, never
// from anything the server did not send (no client-side fog guessing).

import type {
  EventRecord,
  FacilityView,
  MapSummary,
  ObservationView,
  ScoreBoard,
  ServerMessage,
} from "./protocol.js";

export interface PendingAction {
  actionId: string;
  platform: string;
  verb: string;
  sentAt: number;
}

export interface ChatEntry {
  from: string;
  text: string;
}

export interface ClientState {
  connection: "idle" | "open" | "closed";
  role: string | null;
  team: number;
  observer: boolean;
  canInject: boolean;
  seesAll: boolean;
  phase: string;
  seq: number; // last applied delta/snapshot sequence
  tick: number;
  time: number;
  map: MapSummary | null;
  view: ObservationView | null;
  pending: Map<string, PendingAction>;
  chat: ChatEntry[];
  notices: string[];
  recentEvents: EventRecord[];
  score: ScoreBoard | null; // instructor live score
  debrief: Record<string, unknown> | null;
  staleSince: number | null; // wall-clock ms of last delta, for staleness banner
  lastError: string | null;
}

export function initialState(): ClientState {
  return {
    connection: "idle",
    role: null,
    team: 0,
    observer: false,
    canInject: false,
    seesAll: false,
    phase: "planning",
    seq: -1,
    tick: 0,
    time: 0,
    map: null,
    view: null,
    pending: new Map(),
    chat: [],
    notices: [],
    recentEvents: [],
    score: null,
    debrief: null,
    staleSince: null,
    lastError: null,
  };
}

const EVENT_BUFFER = 200;
const CHAT_BUFFER = 100;

export function applyServerMessage(state: ClientState, msg: ServerMessage, nowMs = Date.now()): ClientState {
  const next = { ...state };
  switch (msg.type) {
    case "welcome":
      next.role = msg.role;
      next.team = msg.team;
      next.observer = msg.observer;
      next.canInject = msg.can_inject;
      next.seesAll = msg.sees_all;
      next.phase = msg.phase;
      next.map = msg.map;
      return next;
    case "join_refused":
      next.lastError = msg.reason;
      return next;
    case "snapshot":
      next.seq = msg.seq;
      next.phase = msg.phase;
      if (msg.view) {
        next.view = msg.view;
        next.tick = msg.tick ?? next.tick;
        next.time = msg.time ?? next.time;
        next.score = msg.view.score;
      }
      next.staleSince = nowMs;
      return next;
    case "delta": {
      if (msg.seq <= state.seq) return state; // replayed or out-of-order delta
      next.seq = msg.seq;
      next.tick = msg.tick;
      next.time = msg.time;
      next.view = msg.view;
      next.score = msg.view.score;
      next.recentEvents = [...state.recentEvents, ...msg.events].slice(-EVENT_BUFFER);
      next.staleSince = nowMs;
      return next;
    }
    case "action_result": {
      if (msg.action_id) {
        const pending = new Map(state.pending);
        pending.delete(msg.action_id);
        next.pending = pending;
      }
      if (!msg.accepted) {
        next.notices = [...state.notices, `action rejected: ${msg.reason ?? "unknown"}`].slice(-20);
      }
      return next;
    }
    case "chat":
      next.chat = [...state.chat, { from: msg.from, text: msg.text }].slice(-CHAT_BUFFER);
      return next;
    case "chat_blocked":
      next.notices = [...state.notices, `chat blocked: ${msg.reason}`].slice(-20);
      return next;
    case "phase":
      next.phase = msg.phase;
      return next;
    case "score": {
      const mine = msg.teams.find((t) => t.team === state.team);
      if (mine) next.score = mine;
      return next;
    }
    case "debrief":
      next.debrief = msg.summary;
      return next;
    case "error":
      next.lastError = msg.reason;
      return next;
    default:
      return state;
  }
}

export function markPending(state: ClientState, p: PendingAction): ClientState {
  const pending = new Map(state.pending);
  pending.set(p.actionId, p);
  return { ...state, pending };
}

// --- fog-aware display helpers ---------------------------------------------

// Hidden casualty information renders as unknown, never as a zero count.
export function badgeText(fac: FacilityView): string {
  if (fac.counts === null) return "?";
  return String(fac.counts.total);
}

export function badgeDetail(fac: FacilityView): string {
  if (fac.counts === null) return "casualties unknown (outside observation range)";
  const c = fac.counts;
  return `${c.total} waiting: ${c.urgent} urgent / ${c.priority} priority, ${c.litter} litter / ${c.ambulatory} ambulatory`;
}

export function isStale(state: ClientState, nowMs: number, staleAfterMs = 5000): boolean {
  if (state.phase !== "execution" || state.staleSince === null) return false;
  return nowMs - state.staleSince > staleAfterMs;
}

export function platformIsPending(state: ClientState, platformId: string): boolean {
  for (const p of state.pending.values()) {
    if (p.platform === platformId) return true;
  }
  return false;
}
