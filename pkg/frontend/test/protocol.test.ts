import { describe, expect, it } from "vitest";

import {
  SchemaError,
  encodeClientMessage,
  parseServerMessage,
} from "../src/protocol.js";

const goodTick = {
  type: "tick", t: 4, time: 0.266, phase: "task",
  a: 0.4, activity: null, c: 0.71, l: 0.1, u: 0.95, p: 0.72,
  motion: "PG", rep: null, target: 0.7, band_q: 0.05, trial: 2,
  time_remaining: 8.2, stalled: false,
};

describe("server message validation", () => {
  it("accepts a well-formed tick", () => {
    const msg = parseServerMessage(JSON.stringify(goodTick));
    expect(msg.type).toBe("tick");
  });

  it("accepts nullable fields as null", () => {
    const msg = { ...goodTick, p: null, target: null, motion: null };
    expect(parseServerMessage(msg).type).toBe("tick");
  });

  it("rejects invalid JSON", () => {
    expect(() => parseServerMessage("{nope")).toThrow(SchemaError);
  });

  it("rejects non-object payloads", () => {
    expect(() => parseServerMessage("[1,2]")).toThrow(SchemaError);
    expect(() => parseServerMessage("42")).toThrow(SchemaError);
  });

  it("rejects unknown message types", () => {
    expect(() => parseServerMessage({ type: "mystery" })).toThrow(SchemaError);
  });

  it("rejects a tick missing required fields", () => {
    const bad: Record<string, unknown> = { ...goodTick };
    delete bad.time;
    expect(() => parseServerMessage(bad)).toThrow(SchemaError);
  });

  it("rejects wrongly typed fields", () => {
    expect(() => parseServerMessage({ ...goodTick, t: 1.5 })).toThrow(SchemaError);
    expect(() => parseServerMessage({ ...goodTick, p: "high" })).toThrow(SchemaError);
    expect(() => parseServerMessage({ ...goodTick, time: Infinity })).toThrow(SchemaError);
  });

  it("rejects malformed trial results and errors", () => {
    expect(() => parseServerMessage({ type: "trial_result", trial: 0 })).toThrow(SchemaError);
    expect(() => parseServerMessage({ type: "error" })).toThrow(SchemaError);
    expect(parseServerMessage({ type: "error", error: "InvalidConfig" }).type).toBe("error");
  });

  it("accepts session metrics and study summaries", () => {
    expect(parseServerMessage({
      type: "session_metrics", motion: "PG",
      metrics: { completion_rate: 100 }, fitts: null,
    }).type).toBe("session_metrics");
    expect(parseServerMessage({
      type: "study_summary", completion_rate: 97.5, fitts: null,
    }).type).toBe("study_summary");
  });
});

describe("client message encoding", () => {
  it("round-trips a valid activation", () => {
    const raw = encodeClientMessage({ type: "activation_input", a: 0.25 });
    expect(JSON.parse(raw)).toEqual({ type: "activation_input", a: 0.25 });
  });

  it("refuses out-of-range activation", () => {
    expect(() => encodeClientMessage({ type: "activation_input", a: 1.5 }))
      .toThrow(SchemaError);
    expect(() => encodeClientMessage({ type: "activation_input", a: NaN }))
      .toThrow(SchemaError);
  });

  it("refuses empty motion selection", () => {
    expect(() => encodeClientMessage({ type: "select_motion", motion: "" }))
      .toThrow(SchemaError);
  });
});
