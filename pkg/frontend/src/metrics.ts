// Client-side recomputation of task metrics from received ticks.
//
// The wire ticks are a lossless projection of the server's control samples,
// so every dashboard number can be rebuilt from them: trials are grouped by
// the tick's trial counter, band entry uses the same closed inequality, and
// position/stability errors cover the window from first entry to the end of
// the trial. Used both to render the dashboard and to verify the server's
// session_metrics message against what we actually saw.

import { FittsSummary, Tick } from "./protocol.js";

export interface TrialMetrics {
  trial: number;
  target: number;
  acquired: boolean;
  movementTime: number | null;
  positionError: number | null;
  stabilityError: number | null;
}

export interface BlockMetrics {
  motion: string | null;
  completionRate: number;
  meanPositionError: number | null;
  meanAbsPositionError: number | null;
  meanStabilityError: number | null;
  meanMovementTime: number | null;
  trials: TrialMetrics[];
}

export interface TickSample {
  time: number;
  p: number;
  target: number;
  band: number;
  trial: number;
  motion: string | null;
}

export function taskSamples(ticks: Tick[]): TickSample[] {
  const out: TickSample[] = [];
  for (const t of ticks) {
    if (t.phase !== "task" || t.p === null || t.target === null || t.band_q === null
        || t.trial === null) {
      continue;
    }
    out.push({ time: t.time, p: t.p, target: t.target, band: t.band_q,
               trial: t.trial, motion: t.motion });
  }
  return out;
}

export function groupBlocks(samples: TickSample[]): TickSample[][] {
  const blocks: TickSample[][] = [];
  let current: TickSample[] | null = null;
  for (const s of samples) {
    const prev = current === null ? null : current[current.length - 1];
    if (prev === null || s.motion !== prev.motion || s.trial < prev.trial) {
      current = [];
      blocks.push(current);
    }
    current!.push(s);
  }
  return blocks;
}

function mean(values: number[]): number {
  let sum = 0;
  for (const v of values) sum += v;
  return sum / values.length;
}

function populationStd(values: number[]): number {
  const m = mean(values);
  let sq = 0;
  for (const v of values) sq += (v - m) * (v - m);
  return Math.sqrt(sq / values.length);
}

export function scoreTrial(samples: TickSample[]): TrialMetrics {
  const target = samples[0].target;
  const band = samples[0].band;
  let entryIdx = -1;
  for (let i = 0; i < samples.length; i++) {
    if (Math.abs(samples[i].p - target) <= band) {
      entryIdx = i;
      break;
    }
  }
  if (entryIdx < 0) {
    return { trial: samples[0].trial, target, acquired: false,
             movementTime: null, positionError: null, stabilityError: null };
  }
  const window = samples.slice(entryIdx).map((s) => (s.p - target) * 100.0);
  return {
    trial: samples[0].trial,
    target,
    acquired: true,
    movementTime: samples[entryIdx].time - samples[0].time,
    positionError: mean(window),
    stabilityError: populationStd(window),
  };
}

export function blockMetrics(block: TickSample[]): BlockMetrics {
  const byTrial = new Map<number, TickSample[]>();
  for (const s of block) {
    let list = byTrial.get(s.trial);
    if (!list) {
      list = [];
      byTrial.set(s.trial, list);
    }
    list.push(s);
  }
  const trials = [...byTrial.keys()].sort((a, b) => a - b)
    .map((k) => scoreTrial(byTrial.get(k)!));
  const acquired = trials.filter((t) => t.acquired);
  const maybeMean = (vals: number[]) => (vals.length ? mean(vals) : null);
  return {
    motion: block[0].motion,
    completionRate: (100.0 * acquired.length) / trials.length,
    meanPositionError: maybeMean(acquired.map((t) => t.positionError!)),
    meanAbsPositionError: maybeMean(acquired.map((t) => Math.abs(t.positionError!))),
    meanStabilityError: maybeMean(acquired.map((t) => t.stabilityError!)),
    meanMovementTime: maybeMean(acquired.map((t) => t.movementTime!)),
    trials,
  };
}

export function indexOfDifficulty(distance: number, band: number): number {
  return Math.log2(distance / (2.0 * Math.abs(band)) + 1.0);
}

export function fittsFromTrials(blocks: BlockMetrics[], band: number): FittsSummary | null {
  const points: FittsSummary["points"] = [];
  for (const block of blocks) {
    let prev = 0.0;
    for (const t of block.trials) {
      const d = Math.abs(t.target - prev);
      prev = t.target;
      if (!t.acquired || t.movementTime === null) continue;
      points.push({ distance: d, band,
                    difficulty: indexOfDifficulty(d, band),
                    movement_time: t.movementTime });
    }
  }
  const bins = new Map<number, number[]>();
  for (const p of points) {
    let list = bins.get(p.difficulty);
    if (!list) {
      list = [];
      bins.set(p.difficulty, list);
    }
    list.push(p.movement_time);
  }
  if (bins.size < 2) return null;
  const binned = [...bins.entries()]
    .map(([difficulty, mts]) => ({ difficulty, mean_movement_time: mean(mts) }))
    .sort((a, b) => a.difficulty - b.difficulty);
  const xs = binned.map((b) => b.difficulty);
  const ys = binned.map((b) => b.mean_movement_time);
  const xm = mean(xs);
  const ym = mean(ys);
  let sxx = 0;
  let sxy = 0;
  let syy = 0;
  for (let i = 0; i < xs.length; i++) {
    sxx += (xs[i] - xm) * (xs[i] - xm);
    sxy += (xs[i] - xm) * (ys[i] - ym);
    syy += (ys[i] - ym) * (ys[i] - ym);
  }
  const slope = sxy / sxx;
  const intercept = ym - slope * xm;
  let ssRes = 0;
  for (let i = 0; i < xs.length; i++) {
    const r = ys[i] - (intercept + slope * xs[i]);
    ssRes += r * r;
  }
  const rSquared = syy > 0 ? 1.0 - ssRes / syy : NaN;
  return {
    slope,
    intercept,
    r_squared: rSquared,
    throughput: slope !== 0.0 ? 1.0 / slope : null,
    points,
    binned,
  };
}

export function metricsCsv(blocks: BlockMetrics[]): string {
  const lines = ["motion,trial,target,acquired,movement_time_s,position_error_pct,stability_error_pct"];
  for (const b of blocks) {
    for (const t of b.trials) {
      lines.push([
        b.motion ?? "", String(t.trial), String(t.target),
        t.acquired ? "1" : "0",
        t.movementTime === null ? "" : String(t.movementTime),
        t.positionError === null ? "" : String(t.positionError),
        t.stabilityError === null ? "" : String(t.stabilityError),
      ].join(","));
    }
  }
  return lines.join("\n") + "\n";
}
