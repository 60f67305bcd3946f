// WebSocket client: handshake, role binding, ack/resume, offline queueing.
// The socket constructor is injectable so node tests can pass the `ws`
// package while the browser uses the native WebSocket.

import { PROTOCOL_VERSION, type ClientMessage, type ServerMessage } from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface WsClientOptions {
  url: string;
  role: string;
  team?: number;
  observe?: boolean;
  makeSocket?: SocketFactory;
  reconnectDelayMs?: number;
  onMessage: (msg: ServerMessage) => void;
  onStatus?: (status: "open" | "closed" | "reconnecting") => void;
  onQueueWarning?: (queued: number) => void;
}

export class WsClient {
  private sock: SocketLike | null = null;
  private opts: Required<Pick<WsClientOptions, "url" | "role">> & WsClientOptions;
  private outbox: ClientMessage[] = [];
  private lastAckedSeq = -1;
  private joined = false;
  private closedByUser = false;
  private actionCounter = 0;

  constructor(opts: WsClientOptions) {
    this.opts = opts as WsClient["opts"];
  }

  connect(): void {
    this.closedByUser = false;
    const make: SocketFactory =
      this.opts.makeSocket ?? ((url) => new WebSocket(url) as unknown as SocketLike);
    const sock = make(this.opts.url);
    this.sock = sock;
    sock.onopen = () => {
      this.sendRaw({ type: "hello", protocol: PROTOCOL_VERSION });
    };
    sock.onmessage = (ev) => {
      const msg = JSON.parse(String(ev.data)) as ServerMessage;
      this.handle(msg);
      this.opts.onMessage(msg);
    };
    sock.onclose = () => {
      this.joined = false;
      this.sock = null;
      if (!this.closedByUser) {
        this.opts.onStatus?.("reconnecting");
        setTimeout(() => this.connect(), this.opts.reconnectDelayMs ?? 1000);
      } else {
        this.opts.onStatus?.("closed");
      }
    };
    sock.onerror = () => {
      /* onclose follows */
    };
  }

  private handle(msg: ServerMessage): void {
    if (msg.type === "hello_ack") {
      const join: ClientMessage = {
        type: "join",
        role: this.opts.role,
        team: this.opts.team ?? 0,
        observe: this.opts.observe ?? false,
      };
      if (this.lastAckedSeq >= 0) join.resume_from = this.lastAckedSeq;
      this.sendRaw(join);
    } else if (msg.type === "welcome") {
      this.joined = true;
      this.opts.onStatus?.("open");
      const backlog = this.outbox;
      this.outbox = [];
      for (const queued of backlog) this.sendRaw(queued);
    } else if (msg.type === "delta" || msg.type === "snapshot") {
      this.lastAckedSeq = msg.seq;
      this.sendRaw({ type: "ack", seq: msg.seq });
    }
  }

  // One user gesture becomes exactly one action request.
  action(platform: string, verb: string, params: Record<string, unknown>): string {
    const actionId = `a${++this.actionCounter}`;
    this.send({ type: "action", action_id: actionId, platform, verb, params });
    return actionId;
  }

  send(msg: ClientMessage): void {
    if (!this.joined || this.sock === null) {
      this.outbox.push(msg); // flushed on reconnect, caller shows a warning
      this.opts.onQueueWarning?.(this.outbox.length);
      return;
    }
    this.sendRaw(msg);
  }

  private sendRaw(msg: ClientMessage): void {
    this.sock?.send(JSON.stringify(msg));
  }

  close(): void {
    this.closedByUser = true;
    this.sock?.close();
  }
}
