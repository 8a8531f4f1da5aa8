// WebSocket session client. All inbound traffic is schema-validated, every
// message is retained for the session-log download, and a watchdog flags a
// stalled link (no tick or heartbeat for over a second) so the UI can freeze
// the cursor rather than extrapolate.

import {
  ClientMessage,
  SchemaError,
  ServerMessage,
  encodeClientMessage,
  parseServerMessage,
} from "./protocol.js";

export type MessageHandler = (msg: ServerMessage) => void;

export interface ClientEvents {
  onMessage?: MessageHandler;
  onSchemaError?: (err: SchemaError, raw: string) => void;
  onStallChange?: (stalled: boolean) => void;
  onClose?: () => void;
}

const STALL_AFTER_MS = 1200;

export class SessionClient {
  private ws: WebSocket | null = null;
  private lastSeen = 0;
  private stalled = false;
  private watchdog: ReturnType<typeof setInterval> | null = null;
  readonly received: ServerMessage[] = [];

  constructor(private events: ClientEvents = {}) {}

  connect(url: string): Promise<void> {
    return new Promise((resolve, reject) => {
      const ws = new WebSocket(url);
      this.ws = ws;
      ws.onopen = () => {
        this.lastSeen = Date.now();
        this.watchdog = setInterval(() => this.checkStall(), 250);
        resolve();
      };
      ws.onerror = () => reject(new Error(`cannot reach ${url}`));
      ws.onmessage = (ev) => this.handleRaw(String(ev.data));
      ws.onclose = () => {
        if (this.watchdog !== null) clearInterval(this.watchdog);
        this.setStalled(true);
        this.events.onClose?.();
      };
    });
  }

  private handleRaw(raw: string): void {
    this.lastSeen = Date.now();
    this.setStalled(false);
    let msg: ServerMessage;
    try {
      msg = parseServerMessage(raw);
    } catch (err) {
      if (err instanceof SchemaError) {
        this.events.onSchemaError?.(err, raw);
        return;
      }
      throw err;
    }
    this.received.push(msg);
    this.events.onMessage?.(msg);
  }

  private checkStall(): void {
    this.setStalled(Date.now() - this.lastSeen > STALL_AFTER_MS);
  }

  private setStalled(stalled: boolean): void {
    if (stalled !== this.stalled) {
      this.stalled = stalled;
      this.events.onStallChange?.(stalled);
    }
  }

  get isStalled(): boolean {
    return this.stalled;
  }

  send(msg: ClientMessage): void {
    if (!this.ws || this.ws.readyState !== WebSocket.OPEN) {
      throw new Error("not connected");
    }
    this.ws.send(encodeClientMessage(msg));
  }

  close(): void {
    this.ws?.close();
  }

  // JSONL of everything the server sent: the downloadable session log.
  logText(): string {
    return this.received.map((m) => JSON.stringify(m)).join("\n") + "\n";
  }
}
