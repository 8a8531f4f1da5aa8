// Wire protocol: one JSON object per WebSocket message, tagged by `type`.
// Mirrors the server's schema registry; every inbound message is validated
// before the UI acts on it, and outbound messages are built through typed
// constructors so malformed traffic cannot leave the client either.

export const PROTOCOL_VERSION = 1;

export type ClientMessage =
  | { type: "hello"; client?: string; protocol_version: number }
  | { type: "configure_session"; config: Record<string, unknown>; clock?: "lockstep" | "realtime" }
  | { type: "start_training" }
  | { type: "select_motion"; motion: string }
  | { type: "start_calibration" }
  | { type: "start_task" }
  | { type: "finish_study" }
  | { type: "activation_input"; a: number; motion?: string }
  | { type: "abort" };

export interface Tick {
  type: "tick";
  t: number;
  time: number;
  phase: string;
  a: number | null;
  activity: number | null;
  c: number | null;
  l: number | null;
  u: number | null;
  p: number | null;
  motion: string | null;
  rep: number | null;
  target: number | null;
  band_q: number | null;
  trial: number | null;
  time_remaining: number | null;
  stalled?: boolean;
}

export interface SessionState {
  type: "session_state";
  state: string;
  [key: string]: unknown;
}

export interface TrialResult {
  type: "trial_result";
  trial: number;
  target: number;
  acquired: boolean;
  movement_time: number | null;
  position_error: number | null;
  stability_error: number | null;
}

export interface Calibration {
  type: "calibration";
  lower: number;
  upper: number;
}

export interface TrainingSession {
  type: "training_session";
  motion: string;
  entries?: number;
}

export interface FittsSummary {
  slope: number;
  intercept: number;
  r_squared: number;
  throughput: number | null;
  points: { distance: number; band: number; difficulty: number; movement_time: number }[];
  binned: { difficulty: number; mean_movement_time: number }[];
}

export interface SessionMetricsMsg {
  type: "session_metrics";
  motion?: string;
  block?: number;
  metrics: {
    completion_rate: number;
    mean_position_error: number | null;
    mean_abs_position_error: number | null;
    mean_stability_error: number | null;
    mean_movement_time: number | null;
    trials: {
      target: number;
      acquired: boolean;
      movement_time: number | null;
      position_error: number | null;
      stability_error: number | null;
    }[];
  };
  fitts: FittsSummary | null;
}

export interface StudySummary {
  type: "study_summary";
  blocks?: string[];
  completion_rate: number;
  fitts: FittsSummary | null;
}

export interface ErrorMsg {
  type: "error";
  error: string;
  message?: string;
}

export interface Heartbeat {
  type: "heartbeat";
  seq?: number;
}

export type ServerMessage =
  | Tick
  | SessionState
  | TrialResult
  | Calibration
  | TrainingSession
  | SessionMetricsMsg
  | StudySummary
  | ErrorMsg
  | Heartbeat;

export class SchemaError extends Error {}

type FieldSpec = [name: string, kind: "number" | "string" | "boolean" | "integer" | "object", nullable?: boolean];

function requireFields(msg: Record<string, unknown>, fields: FieldSpec[]): void {
  for (const [name, kind, nullable] of fields) {
    const v = msg[name];
    if (v === undefined || v === null) {
      if (nullable) continue;
      throw new SchemaError(`${String(msg.type)}: missing field ${name}`);
    }
    if (kind === "integer") {
      if (typeof v !== "number" || !Number.isInteger(v)) {
        throw new SchemaError(`${String(msg.type)}: ${name} must be an integer`);
      }
    } else if (kind === "object") {
      if (typeof v !== "object" || Array.isArray(v)) {
        throw new SchemaError(`${String(msg.type)}: ${name} must be an object`);
      }
    } else if (typeof v !== kind) {
      throw new SchemaError(`${String(msg.type)}: ${name} must be ${kind}`);
    }
    if (kind === "number" && typeof v === "number" && !Number.isFinite(v)) {
      throw new SchemaError(`${String(msg.type)}: ${name} must be finite`);
    }
  }
}

const SERVER_FIELDS: Record<string, FieldSpec[]> = {
  session_state: [["state", "string"]],
  tick: [
    ["t", "integer"], ["time", "number"], ["phase", "string"],
    ["a", "number", true], ["activity", "number", true], ["c", "number", true],
    ["l", "number", true], ["u", "number", true], ["p", "number", true],
    ["motion", "string", true], ["rep", "integer", true],
    ["target", "number", true], ["band_q", "number", true],
    ["trial", "integer", true], ["time_remaining", "number", true],
    ["stalled", "boolean", true],
  ],
  trial_result: [
    ["trial", "integer"], ["target", "number"], ["acquired", "boolean"],
    ["movement_time", "number", true], ["position_error", "number", true],
    ["stability_error", "number", true],
  ],
  calibration: [["lower", "number"], ["upper", "number"]],
  training_session: [["motion", "string"], ["entries", "integer", true]],
  session_metrics: [["metrics", "object"], ["motion", "string", true]],
  study_summary: [["completion_rate", "number"]],
  error: [["error", "string"], ["message", "string", true]],
  heartbeat: [["seq", "integer", true]],
};

export function parseServerMessage(raw: string | Record<string, unknown>): ServerMessage {
  let msg: unknown;
  if (typeof raw === "string") {
    try {
      msg = JSON.parse(raw);
    } catch {
      throw new SchemaError("message is not valid JSON");
    }
  } else {
    msg = raw;
  }
  if (typeof msg !== "object" || msg === null || Array.isArray(msg)) {
    throw new SchemaError("message must be a JSON object");
  }
  const obj = msg as Record<string, unknown>;
  if (typeof obj.type !== "string") {
    throw new SchemaError("message has no type tag");
  }
  const fields = SERVER_FIELDS[obj.type];
  if (!fields) {
    throw new SchemaError(`unknown server message type ${obj.type}`);
  }
  requireFields(obj, fields);
  return obj as unknown as ServerMessage;
}

export function encodeClientMessage(msg: ClientMessage): string {
  switch (msg.type) {
    case "activation_input":
      if (!Number.isFinite(msg.a) || msg.a < 0 || msg.a > 1) {
        throw new SchemaError("activation must lie in [0, 1]");
      }
      break;
    case "select_motion":
      if (!msg.motion) throw new SchemaError("select_motion needs a motion id");
      break;
    case "hello":
      if (!Number.isInteger(msg.protocol_version)) {
        throw new SchemaError("hello needs an integer protocol_version");
      }
      break;
    case "configure_session":
      if (typeof msg.config !== "object" || msg.config === null) {
        throw new SchemaError("configure_session needs a config object");
      }
      break;
    default:
      break;
  }
  return JSON.stringify(msg);
}
