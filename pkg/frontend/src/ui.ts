// Operator console: configuration form, training view with metronome and
// live activity trace, calibration prompt, the target-holding task screen,
// and the results dashboard. Rendered cursor and target state always come
// from server ticks; a stalled or closed connection freezes the display.

import { SessionClient } from "./client.js";
import {
  BlockMetrics,
  blockMetrics,
  fittsFromTrials,
  groupBlocks,
  metricsCsv,
  taskSamples,
} from "./metrics.js";
import { Metronome, MetronomeSchedule } from "./metronome.js";
import {
  FittsSummary,
  PROTOCOL_VERSION,
  ServerMessage,
  SessionMetricsMsg,
  Tick,
} from "./protocol.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const SCREENS = ["connect", "training", "calibrate", "task", "dashboard"] as const;
type Screen = (typeof SCREENS)[number];

export class App {
  private client: SessionClient;
  private metronome: Metronome;
  private activation = 0;
  private keyDir = 0;
  private keyRate = 0.8; // activation units per second while an arrow is held
  private inputTimer: ReturnType<typeof setInterval> | null = null;
  private lastTick: Tick | null = null;
  private schedule: MetronomeSchedule | null = null;
  private serverMetrics: SessionMetricsMsg[] = [];
  private trace: { t: number; v: number }[] = [];

  constructor() {
    this.client = new SessionClient({
      onMessage: (msg) => this.handle(msg),
      onSchemaError: (err) => this.banner(`protocol schema mismatch: ${err.message}`, true),
      onStallChange: (stalled) => this.renderStall(stalled),
      onClose: () => {
        this.banner("connection lost; session aborted", true);
        this.stopInput();
      },
    });
    this.metronome = new Metronome((kind) => this.flash(kind));
    this.bindControls();
  }

  // -- wiring -------------------------------------------------------------

  private bindControls(): void {
    el<HTMLButtonElement>("btn-connect").onclick = () => void this.connect();
    el<HTMLButtonElement>("btn-train").onclick = () => this.client.send({ type: "start_training" });
    el<HTMLButtonElement>("btn-calibrate").onclick = () => {
      this.client.send({ type: "select_motion", motion: el<HTMLSelectElement>("task-motion").value });
      this.client.send({ type: "start_calibration" });
    };
    el<HTMLButtonElement>("btn-task").onclick = () => this.client.send({ type: "start_task" });
    el<HTMLButtonElement>("btn-next-motion").onclick = () => this.show("calibrate");
    el<HTMLButtonElement>("btn-finish").onclick = () => this.client.send({ type: "finish_study" });
    el<HTMLButtonElement>("btn-abort").onclick = () => this.client.send({ type: "abort" });
    el<HTMLButtonElement>("btn-download-log").onclick = () => this.download("session.jsonl", this.client.logText());
    el<HTMLButtonElement>("btn-export-csv").onclick = () =>
      this.download("metrics.csv", metricsCsv(this.clientBlocks()));
    const slider = el<HTMLInputElement>("activation-slider");
    slider.oninput = () => {
      this.activation = Number(slider.value);
    };
    window.addEventListener("keydown", (ev) => {
      if (ev.key === "ArrowUp") this.keyDir = 1;
      if (ev.key === "ArrowDown") this.keyDir = -1;
    });
    window.addEventListener("keyup", (ev) => {
      if (ev.key === "ArrowUp" || ev.key === "ArrowDown") this.keyDir = 0;
    });
  }

  private async connect(): Promise<void> {
    const url = el<HTMLInputElement>("server-url").value;
    try {
      await this.client.connect(url);
    } catch (err) {
      this.banner(String(err), true);
      return;
    }
    this.client.send({ type: "hello", client: "operator-ui", protocol_version: PROTOCOL_VERSION });
    const motions = el<HTMLInputElement>("cfg-motions").value.split(",").map((s) => s.trim());
    const holdMode = el<HTMLSelectElement>("cfg-hold-mode").value;
    const timeout = Number(el<HTMLInputElement>("cfg-timeout").value);
    this.schedule = {
      beat_period: Number(el<HTMLInputElement>("cfg-beat").value),
      beats_per_phase: Number(el<HTMLInputElement>("cfg-beats").value),
      repetitions: Number(el<HTMLInputElement>("cfg-reps").value),
    };
    const config = {
      session_id: "ui",
      seed: Number(el<HTMLInputElement>("cfg-seed").value),
      tick_rate_hz: Number(el<HTMLInputElement>("cfg-rate").value),
      motions,
      metronome: this.schedule,
      task: {
        n_positions: Number(el<HTMLInputElement>("cfg-npos").value),
        hold_time_s: Number(el<HTMLInputElement>("cfg-hold").value),
        trials_per_level: Number(el<HTMLInputElement>("cfg-trials").value),
        hold_mode: holdMode,
        timeout_s: holdMode === "on_entry" ? timeout : null,
      },
      image: { rest_jitter_mix: Number(el<HTMLInputElement>("cfg-jitter").value) },
    };
    this.keyRate = Number(el<HTMLInputElement>("cfg-key-rate").value);
    this.client.send({ type: "configure_session", config, clock: "realtime" });
    const select = el<HTMLSelectElement>("task-motion");
    select.innerHTML = "";
    for (const m of motions) {
      const opt = document.createElement("option");
      opt.value = m;
      opt.textContent = m;
      select.appendChild(opt);
    }
  }

  // -- message handling -----------------------------------------------------

  private handle(msg: ServerMessage): void {
    switch (msg.type) {
      case "session_state":
        this.renderState(msg);
        break;
      case "tick":
        this.lastTick = msg;
        this.renderTick(msg);
        break;
      case "calibration":
        this.banner(`calibrated: bounds [${msg.lower.toFixed(3)}, ${msg.upper.toFixed(3)}]`, false);
        break;
      case "training_session":
        this.banner(`training images stored for ${msg.motion}`, false);
        break;
      case "session_metrics":
        this.serverMetrics.push(msg);
        this.renderDashboard(null);
        this.show("dashboard");
        break;
      case "study_summary":
        this.renderDashboard(msg.fitts);
        this.show("dashboard");
        break;
      case "error":
        this.banner(`${msg.error}: ${msg.message ?? ""}`, true);
        break;
      case "trial_result":
      case "heartbeat":
        break;
    }
  }

  private renderState(msg: { state: string } & Record<string, unknown>): void {
    el("phase-banner").textContent = msg.state;
    switch (msg.state) {
      case "configured":
        this.show("training");
        break;
      case "training":
        this.startInput();
        if (this.schedule) this.metronome.start(this.schedule);
        el("training-motion").textContent = String(msg.motion ?? "");
        this.trace = [];
        break;
      case "trained": {
        this.metronome.stop();
        const inc = msg.loocv_include_rest as number | undefined;
        const exc = msg.loocv_exclude_rest as number | undefined;
        if (exc !== undefined && exc !== null) {
          el("loocv-summary").textContent =
            `cross-validation: ${exc.toFixed(1)}% excluding rest, ` +
            `${(inc ?? NaN).toFixed(1)}% including rest`;
        }
        this.show("calibrate");
        break;
      }
      case "calibrated":
        this.show("task");
        break;
      case "task":
        this.startInput();
        break;
      case "done":
        this.stopInput();
        break;
      case "aborted":
        this.stopInput();
        this.metronome.stop();
        this.banner("session aborted", true);
        break;
    }
  }

  // -- input streaming ------------------------------------------------------

  private startInput(): void {
    if (this.inputTimer !== null) return;
    const dt = 1 / 30;
    this.inputTimer = setInterval(() => {
      if (this.keyDir !== 0) {
        this.activation = Math.min(1, Math.max(0, this.activation + this.keyDir * this.keyRate * dt));
        el<HTMLInputElement>("activation-slider").value = String(this.activation);
      }
      try {
        this.client.send({ type: "activation_input", a: this.activation });
      } catch {
        this.stopInput();
      }
    }, 1000 * dt);
  }

  private stopInput(): void {
    if (this.inputTimer !== null) clearInterval(this.inputTimer);
    this.inputTimer = null;
  }

  // -- rendering -------------------------------------------------------------

  private show(screen: Screen): void {
    for (const s of SCREENS) {
      el(`screen-${s}`).hidden = s !== screen;
    }
  }

  private banner(text: string, isError: boolean): void {
    const node = el("message-banner");
    node.textContent = text;
    node.className = isError ? "banner error" : "banner";
  }

  private renderStall(stalled: boolean): void {
    el("stall-banner").hidden = !stalled;
    // freeze (never extrapolate) the cursor at the last authoritative state
    if (this.lastTick && this.lastTick.phase === "task") {
      this.drawTrack(this.lastTick);
    }
  }

  private flash(kind: string): void {
    const box = el("metronome-flash");
    box.dataset.kind = kind;
    box.classList.remove("flash");
    void box.offsetWidth; // restart the animation
    box.classList.add("flash");
    el("metronome-kind").textContent = kind.replace("_", " ");
  }

  private renderTick(tick: Tick): void {
    el("tick-clock").textContent = `t=${tick.t}  ${tick.time.toFixed(2)}s`;
    if (tick.phase === "training") {
      if (tick.activity !== null) {
        this.trace.push({ t: tick.time, v: tick.activity });
        if (this.trace.length > 600) this.trace.shift();
      }
      el("training-motion").textContent = tick.motion ?? "";
      el("training-rep").textContent = tick.rep === null ? "" : `repetition ${tick.rep + 1}`;
      this.drawTrace();
    } else if (tick.phase === "calibrating") {
      el("calibrate-countdown").textContent =
        tick.time_remaining === null ? "" : `${tick.time_remaining.toFixed(1)}s left`;
      el("calibrate-c").textContent = tick.c === null ? "" : `c = ${tick.c.toFixed(3)}`;
    } else if (tick.phase === "task") {
      el("task-trial").textContent = tick.trial === null ? "" : `target ${tick.trial + 1}`;
      el("task-countdown").textContent =
        tick.time_remaining === null ? "" : `${Math.max(0, tick.time_remaining).toFixed(1)}s`;
      this.drawTrack(tick);
    }
  }

  private drawTrack(tick: Tick): void {
    const canvas = el<HTMLCanvasElement>("track-canvas");
    const ctx = canvas.getContext("2d")!;
    const { width: w, height: h } = canvas;
    ctx.clearRect(0, 0, w, h);
    const y = (v: number) => h - 20 - v * (h - 40);
    ctx.strokeStyle = "#888";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(w / 2, y(0));
    ctx.lineTo(w / 2, y(1));
    ctx.stroke();
    for (const v of [0, 0.25, 0.5, 0.75, 1]) {
      ctx.fillStyle = "#666";
      ctx.fillRect(w / 2 - 8, y(v) - 1, 16, 2);
    }
    if (tick.target !== null && tick.band_q !== null) {
      ctx.fillStyle = "rgba(80, 160, 255, 0.25)";
      const top = y(Math.min(1, tick.target + tick.band_q));
      const bottom = y(Math.max(0, tick.target - tick.band_q));
      ctx.fillRect(w / 2 - 40, top, 80, bottom - top);
      ctx.fillStyle = "#2266cc";
      ctx.fillRect(w / 2 - 40, y(tick.target) - 2, 80, 4);
    }
    if (tick.p !== null) {
      ctx.fillStyle = this.client.isStalled ? "#999" : "#cc3322";
      ctx.beginPath();
      ctx.arc(w / 2, y(tick.p), 9, 0, 2 * Math.PI);
      ctx.fill();
    }
  }

  private drawTrace(): void {
    const canvas = el<HTMLCanvasElement>("trace-canvas");
    const ctx = canvas.getContext("2d")!;
    const { width: w, height: h } = canvas;
    ctx.clearRect(0, 0, w, h);
    if (this.trace.length < 2) return;
    const t0 = this.trace[0].t;
    const t1 = this.trace[this.trace.length - 1].t;
    const span = Math.max(1e-9, t1 - t0);
    const vmax = Math.max(0.2, ...this.trace.map((p) => p.v));
    ctx.strokeStyle = "#2a9d8f";
    ctx.lineWidth = 2;
    ctx.beginPath();
    this.trace.forEach((pt, i) => {
      const x = ((pt.t - t0) / span) * w;
      const yy = h - (pt.v / vmax) * (h - 10) - 5;
      if (i === 0) ctx.moveTo(x, yy);
      else ctx.lineTo(x, yy);
    });
    ctx.stroke();
  }

  private clientBlocks(): BlockMetrics[] {
    const ticks = this.client.received.filter((m): m is Tick => m.type === "tick");
    return groupBlocks(taskSamples(ticks)).map(blockMetrics);
  }

  private renderDashboard(pooled: FittsSummary | null): void {
    const blocks = this.clientBlocks();
    const table = el("results-table");
    const fmt = (v: number | null) => (v === null ? "-" : v.toFixed(2));
    let html =
      "<tr><th>motion</th><th>position err %</th><th>stability err %</th>" +
      "<th>completion %</th><th>mean MT s</th><th>verified</th></tr>";
    for (const [i, b] of blocks.entries()) {
      const server = this.serverMetrics[i]?.metrics;
      const verified =
        server !== undefined &&
        fmt(b.meanPositionError) === fmt(server.mean_position_error) &&
        fmt(b.meanStabilityError) === fmt(server.mean_stability_error) &&
        fmt(b.completionRate) === fmt(server.completion_rate);
      html += `<tr><td>${b.motion}</td><td>${fmt(b.meanPositionError)}</td>` +
        `<td>${fmt(b.meanStabilityError)}</td><td>${fmt(b.completionRate)}</td>` +
        `<td>${fmt(b.meanMovementTime)}</td><td>${verified ? "yes" : "MISMATCH"}</td></tr>`;
    }
    table.innerHTML = html;
    const band = blocks.length && blocks[0].trials.length
      ? this.bandFromTicks() : null;
    const fit = pooled ?? (band !== null ? fittsFromTrials(blocks, band) : null);
    if (fit) {
      el("fitts-summary").textContent =
        `slope ${fit.slope.toFixed(3)} s/bit, intercept ${fit.intercept.toFixed(3)} s, ` +
        `r^2 ${fit.r_squared.toFixed(3)}, throughput ` +
        (fit.throughput === null ? "undefined" : `${fit.throughput.toFixed(2)} bits/s`);
      this.drawFitts(fit);
    }
  }

  private bandFromTicks(): number | null {
    for (const m of this.client.received) {
      if (m.type === "tick" && m.band_q !== null) return m.band_q;
    }
    return null;
  }

  private drawFitts(fit: FittsSummary): void {
    const canvas = el<HTMLCanvasElement>("fitts-canvas");
    const ctx = canvas.getContext("2d")!;
    const { width: w, height: h } = canvas;
    ctx.clearRect(0, 0, w, h);
    if (!fit.points.length) return;
    const xs = fit.points.map((p) => p.difficulty);
    const ys = fit.points.map((p) => p.movement_time);
    const xmax = Math.max(...xs) * 1.05;
    const ymax = Math.max(...ys, 0.1) * 1.05;
    const X = (v: number) => 40 + (v / xmax) * (w - 50);
    const Y = (v: number) => h - 25 - (v / ymax) * (h - 35);
    ctx.strokeStyle = "#aaa";
    ctx.strokeRect(40, 10, w - 50, h - 35);
    ctx.fillStyle = "rgba(42, 157, 143, 0.5)";
    for (const p of fit.points) {
      ctx.beginPath();
      ctx.arc(X(p.difficulty), Y(p.movement_time), 3, 0, 2 * Math.PI);
      ctx.fill();
    }
    ctx.fillStyle = "#1d3557";
    for (const b of fit.binned) {
      ctx.beginPath();
      ctx.arc(X(b.difficulty), Y(b.mean_movement_time), 5, 0, 2 * Math.PI);
      ctx.fill();
    }
    ctx.strokeStyle = "#e76f51";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(X(0), Y(fit.intercept));
    ctx.lineTo(X(xmax), Y(fit.intercept + fit.slope * xmax));
    ctx.stroke();
    ctx.fillStyle = "#333";
    ctx.font = "12px sans-serif";
    ctx.fillText("index of difficulty (bits)", w / 2 - 60, h - 8);
    ctx.save();
    ctx.translate(12, h / 2 + 40);
    ctx.rotate(-Math.PI / 2);
    ctx.fillText("movement time (s)", 0, 0);
    ctx.restore();
  }

  private download(filename: string, text: string): void {
    const blob = new Blob([text], { type: "text/plain" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = filename;
    a.click();
    URL.revokeObjectURL(a.href);
  }
}
