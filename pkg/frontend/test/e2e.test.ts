// End-to-end: spawn the real session service, drive a full lockstep session
// through the wire protocol, and check that the dashboard's recomputed
// metrics equal the server's session_metrics message.

import { spawn, ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocket from "ws";

import {
  blockMetrics,
  groupBlocks,
  taskSamples,
} from "../src/metrics.js";
import {
  ServerMessage,
  SessionMetricsMsg,
  StudySummary,
  Tick,
  parseServerMessage,
} from "../src/protocol.js";
import { phaseAt } from "../src/metronome.js";

const RATE = 15;
const SCHEDULE = { beat_period: 1.0, beats_per_phase: 2, repetitions: 3 };
const CONFIG = {
  session_id: "ui-e2e",
  seed: 21,
  tick_rate_hz: RATE,
  motions: ["PG", "WP"],
  metronome: SCHEDULE,
  task: { n_positions: 5, hold_time_s: 2.0, trials_per_level: 1 },
  calibration_s: 4.0,
};

let server: ChildProcess;
let port: number;

beforeAll(async () => {
  const out = mkdtempSync(join(tmpdir(), "sonoctl-ui-e2e-"));
  server = spawn("python3", ["-m", "sonoctl.cli", "serve", "--port", "0",
                             "--out", out],
                 { stdio: ["ignore", "pipe", "inherit"] });
  port = await new Promise<number>((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error("server did not start")), 20000);
    server.stdout!.on("data", (chunk: Buffer) => {
      const m = /ws:\/\/[^:]+:(\d+)/.exec(chunk.toString());
      if (m) {
        clearTimeout(timer);
        resolve(Number(m[1]));
      }
    });
    server.on("exit", () => reject(new Error("server exited early")));
  });
}, 30000);

afterAll(() => {
  server?.kill();
});

class Driver {
  ws!: WebSocket;
  received: ServerMessage[] = [];
  private waiters: (() => void)[] = [];

  async connect(): Promise<void> {
    this.ws = new WebSocket(`ws://127.0.0.1:${port}`);
    await new Promise<void>((resolve, reject) => {
      this.ws.once("open", () => resolve());
      this.ws.once("error", reject);
    });
    this.ws.on("message", (data) => {
      const msg = parseServerMessage(data.toString()); // throws on schema drift
      this.received.push(msg);
      for (const w of this.waiters.splice(0)) w();
    });
  }

  send(msg: Record<string, unknown>): void {
    this.ws.send(JSON.stringify(msg));
  }

  count(type: string): number {
    return this.received.filter((m) => m.type === type).length;
  }

  last<T extends ServerMessage>(type: string): T {
    const list = this.received.filter((m) => m.type === type);
    return list[list.length - 1] as T;
  }

  async waitFor(type: string, count = 1, timeoutMs = 30000): Promise<void> {
    const deadline = Date.now() + timeoutMs;
    while (this.count(type) < count) {
      if (Date.now() > deadline) {
        throw new Error(`timed out waiting for ${count} x ${type}`);
      }
      await new Promise<void>((resolve) => {
        const timer = setTimeout(resolve, 50);
        this.waiters.push(() => {
          clearTimeout(timer);
          resolve();
        });
      });
    }
  }

  async tick(a: number): Promise<Tick> {
    const n = this.count("tick") + 1;
    this.send({ type: "activation_input", a });
    await this.waitFor("tick", n);
    return this.last<Tick>("tick");
  }

  ticks(): Tick[] {
    return this.received.filter((m): m is Tick => m.type === "tick");
  }

  close(): void {
    this.ws.close();
  }
}

function trainingSetpoint(k: number): number {
  const t = k / RATE;
  const { kind } = phaseAt(SCHEDULE, t);
  const dur = SCHEDULE.beat_period * SCHEDULE.beats_per_phase;
  const frac = (t % dur) / dur;
  if (kind === "to_motion") return frac;
  if (kind === "hold_motion") return 1.0;
  if (kind === "to_rest") return 1.0 - frac;
  return 0.0;
}

describe("operator console end-to-end", () => {
  it("drives a session and the dashboard matches the server metrics", async () => {
    const driver = new Driver();
    await driver.connect();
    driver.send({ type: "hello", protocol_version: 1 });
    await driver.waitFor("session_state", 1);

    driver.send({ type: "configure_session", config: CONFIG, clock: "lockstep" });
    await driver.waitFor("session_state", 2);

    driver.send({ type: "start_training" });
    const trainingTicks = SCHEDULE.beat_period * SCHEDULE.beats_per_phase * 4
      * SCHEDULE.repetitions * RATE;
    for (const _motion of CONFIG.motions) {
      for (let k = 0; k < trainingTicks; k++) {
        await driver.tick(trainingSetpoint(k));
      }
    }
    await driver.waitFor("training_session", CONFIG.motions.length);

    const serverMetrics: SessionMetricsMsg[] = [];
    const calRamp = Math.floor((CONFIG.calibration_s * RATE) / 2);
    for (const motion of CONFIG.motions) {
      driver.send({ type: "select_motion", motion });
      driver.send({ type: "start_calibration" });
      for (let k = 0; k < CONFIG.calibration_s * RATE; k++) {
        const a = k < calRamp ? k / calRamp
          : Math.max(0, (CONFIG.calibration_s * RATE - 1 - k) / calRamp);
        await driver.tick(Math.min(1, a));
      }
      await driver.waitFor("calibration", serverMetrics.length + 1);

      driver.send({ type: "start_task" });
      let a = 0;
      const before = driver.count("session_metrics");
      while (driver.count("session_metrics") === before) {
        const last = driver.last<Tick>("tick");
        if (last && last.phase === "task" && last.p !== null && last.target !== null) {
          a = Math.min(1, Math.max(0, a + 0.3 * (last.target - last.p)));
        }
        await driver.tick(a);
      }
      serverMetrics.push(driver.last<SessionMetricsMsg>("session_metrics"));
    }

    driver.send({ type: "finish_study" });
    await driver.waitFor("study_summary", 1);
    const summary = driver.last<StudySummary>("study_summary");

    // dashboard-side recomputation from received ticks
    const blocks = groupBlocks(taskSamples(driver.ticks())).map(blockMetrics);
    expect(blocks.length).toBe(CONFIG.motions.length);

    const shown = (v: number | null) => (v === null ? "-" : v.toFixed(2));
    for (let i = 0; i < blocks.length; i++) {
      const ours = blocks[i];
      const theirs = serverMetrics[i].metrics;
      expect(ours.motion).toBe(serverMetrics[i].motion);
      expect(ours.trials.length).toBe(theirs.trials.length);
      // displayed precision must match exactly; numerically they agree far
      // tighter than that
      expect(shown(ours.completionRate)).toBe(shown(theirs.completion_rate));
      expect(shown(ours.meanPositionError)).toBe(shown(theirs.mean_position_error));
      expect(shown(ours.meanStabilityError)).toBe(shown(theirs.mean_stability_error));
      expect(shown(ours.meanMovementTime)).toBe(shown(theirs.mean_movement_time));
      if (ours.meanPositionError !== null && theirs.mean_position_error !== null) {
        expect(ours.meanPositionError).toBeCloseTo(theirs.mean_position_error, 9);
        expect(ours.meanStabilityError!).toBeCloseTo(theirs.mean_stability_error!, 9);
      }
      for (let j = 0; j < ours.trials.length; j++) {
        const a = ours.trials[j];
        const b = theirs.trials[j];
        expect(a.acquired).toBe(b.acquired);
        if (a.acquired) {
          expect(a.movementTime!).toBeCloseTo(b.movement_time!, 9);
          expect(a.positionError!).toBeCloseTo(b.position_error!, 9);
          expect(a.stabilityError!).toBeCloseTo(b.stability_error!, 9);
        }
      }
    }

    const allTrials = blocks.flatMap((b) => b.trials);
    const completion = (100 * allTrials.filter((t) => t.acquired).length) / allTrials.length;
    expect(completion).toBeCloseTo(summary.completion_rate, 9);

    driver.close();
  }, 180000);

  it("rejects malformed traffic with a protocol error", async () => {
    const driver = new Driver();
    await driver.connect();
    driver.ws.send("definitely not json");
    await driver.waitFor("error", 1);
    driver.send({ type: "activation_input", a: 99 });
    await driver.waitFor("error", 2);
    driver.send({ type: "who_goes_there" });
    await driver.waitFor("error", 3);
    for (const m of driver.received.filter((m) => m.type === "error")) {
      expect((m as { error: string }).error).toBe("ProtocolViolation");
    }
    driver.close();
  }, 30000);
});
