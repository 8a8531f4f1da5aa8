import { describe, expect, it } from "vitest";

import {
  blockMetrics,
  fittsFromTrials,
  groupBlocks,
  indexOfDifficulty,
  scoreTrial,
  taskSamples,
} from "../src/metrics.js";
import { Tick } from "../src/protocol.js";

const RATE = 10;

function tick(partial: Partial<Tick>, k: number): Tick {
  return {
    type: "tick", t: k, time: k / RATE, phase: "task",
    a: 0, activity: null, c: 0.5, l: 0, u: 1, p: 0.5,
    motion: "PG", rep: null, target: 0.5, band_q: 0.05, trial: 0,
    time_remaining: null, ...partial,
  };
}

function trialTicks(trial: number, target: number, ps: number[],
                    motion = "PG", offset = 0): Tick[] {
  return ps.map((p, i) => tick({ trial, target, p, motion }, offset + i));
}

describe("trial scoring", () => {
  it("perfect hold scores zero errors", () => {
    const samples = taskSamples(trialTicks(0, 0.5, Array(20).fill(0.5)));
    const t = scoreTrial(samples);
    expect(t.acquired).toBe(true);
    expect(t.movementTime).toBe(0);
    expect(t.positionError).toBeCloseTo(0, 12);
    expect(t.stabilityError).toBeCloseTo(0, 12);
  });

  it("constant offset inside the band gives signed position error", () => {
    const samples = taskSamples(trialTicks(0, 0.5, Array(20).fill(0.52)));
    const t = scoreTrial(samples);
    expect(t.positionError).toBeCloseTo(2.0, 9);
    expect(t.stabilityError).toBeCloseTo(0.0, 9);
  });

  it("sinusoidal wobble gives amplitude/sqrt(2) stability", () => {
    const n = 100;
    const ps = Array.from({ length: n }, (_, i) =>
      0.5 + 0.04 * Math.sin((2 * Math.PI * i) / n));
    const t = scoreTrial(taskSamples(trialTicks(0, 0.5, ps)));
    expect(t.positionError).toBeCloseTo(0, 6);
    expect(t.stabilityError).toBeCloseTo(4 / Math.SQRT2, 6);
  });

  it("movement time is the first band entry", () => {
    const ps = [0, 0.1, 0.2, 0.46, 0.5, 0.5];
    const t = scoreTrial(taskSamples(trialTicks(0, 0.5, ps)));
    expect(t.acquired).toBe(true);
    expect(t.movementTime).toBeCloseTo(3 / RATE, 12);
  });

  it("never entering the band leaves the trial unacquired", () => {
    const t = scoreTrial(taskSamples(trialTicks(0, 1.0, Array(30).fill(0.2))));
    expect(t.acquired).toBe(false);
    expect(t.positionError).toBeNull();
    expect(t.movementTime).toBeNull();
  });

  it("band membership is a closed inequality", () => {
    // dyadic values so the edge distance is bit-exact
    const ticks = trialTicks(0, 0.25, [0.375]).map((t) => ({ ...t, band_q: 0.125 }));
    const t = scoreTrial(taskSamples(ticks));
    expect(t.acquired).toBe(true);
  });
});

describe("block grouping and aggregation", () => {
  it("groups by motion change and trial restart", () => {
    const ticks = [
      ...trialTicks(0, 0.5, [0.5, 0.5], "PG", 0),
      ...trialTicks(1, 0.2, [0.2, 0.2], "PG", 2),
      ...trialTicks(0, 0.8, [0.8, 0.8], "WP", 4),
    ];
    const blocks = groupBlocks(taskSamples(ticks));
    expect(blocks.length).toBe(2);
    expect(blocks[0][0].motion).toBe("PG");
    expect(blocks[1][0].motion).toBe("WP");
  });

  it("completion rate counts acquired trials", () => {
    const ticks = [
      ...trialTicks(0, 0.5, Array(5).fill(0.5), "PG", 0),
      ...trialTicks(1, 1.0, Array(5).fill(0.0), "PG", 5),
    ];
    const m = blockMetrics(taskSamples(ticks));
    expect(m.completionRate).toBe(50);
    expect(m.trials.length).toBe(2);
    expect(m.meanAbsPositionError).toBeCloseTo(0, 9);
  });
});

describe("difficulty analysis", () => {
  it("matches the closed-form index", () => {
    expect(indexOfDifficulty(0.5, 0.05)).toBeCloseTo(Math.log2(6), 12);
  });

  it("fits an exact synthetic line", () => {
    const band = 0.05;
    const targets = [0.5, 1.0, 0.2];
    const blocks = [{
      motion: "PG",
      completionRate: 100,
      meanPositionError: 0, meanAbsPositionError: 0,
      meanStabilityError: 0, meanMovementTime: 0,
      trials: (() => {
        let prev = 0;
        return targets.map((target, i) => {
          const d = Math.abs(target - prev);
          prev = target;
          return {
            trial: i, target, acquired: true,
            movementTime: 0.2 + 0.5 * indexOfDifficulty(d, band),
            positionError: 0, stabilityError: 0,
          };
        });
      })(),
    }];
    const fit = fittsFromTrials(blocks, band)!;
    expect(fit.slope).toBeCloseTo(0.5, 9);
    expect(fit.intercept).toBeCloseTo(0.2, 9);
    expect(fit.r_squared).toBeCloseTo(1.0, 9);
    expect(fit.throughput).toBeCloseTo(2.0, 9);
  });

  it("returns null with fewer than two distinct difficulties", () => {
    const blocks = [{
      motion: "PG", completionRate: 100,
      meanPositionError: 0, meanAbsPositionError: 0,
      meanStabilityError: 0, meanMovementTime: 0,
      trials: [{ trial: 0, target: 0.5, acquired: true, movementTime: 1,
                 positionError: 0, stabilityError: 0 }],
    }];
    expect(fittsFromTrials(blocks, 0.05)).toBeNull();
  });
});
