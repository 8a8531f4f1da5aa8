// Audible metronome with visual flash. The training cadence is cued per
// beat; phase boundaries (transition/hold changes) get an accented beep.

export interface MetronomeSchedule {
  beat_period: number;
  beats_per_phase: number;
  repetitions: number;
}

export const PHASE_KINDS = ["to_motion", "hold_motion", "to_rest", "hold_rest"] as const;
export type PhaseKind = (typeof PHASE_KINDS)[number];

export function phaseAt(schedule: MetronomeSchedule, timeS: number):
    { kind: PhaseKind; rep: number } {
  const phaseDur = schedule.beat_period * schedule.beats_per_phase;
  const total = 4 * schedule.repetitions;
  const idx = Math.min(Math.floor((timeS + 1e-9) / phaseDur), total - 1);
  return { kind: PHASE_KINDS[idx % 4], rep: Math.floor(idx / 4) };
}

export class Metronome {
  private ctx: AudioContext | null = null;
  private timer: ReturnType<typeof setInterval> | null = null;
  private startedAt = 0;
  private lastBeat = -1;

  constructor(private onFlash: (kind: PhaseKind, rep: number) => void) {}

  start(schedule: MetronomeSchedule): void {
    this.stop();
    this.ctx = new AudioContext();
    this.startedAt = performance.now();
    this.lastBeat = -1;
    this.timer = setInterval(() => {
      const elapsed = (performance.now() - this.startedAt) / 1000;
      const beat = Math.floor(elapsed / schedule.beat_period);
      if (beat !== this.lastBeat) {
        this.lastBeat = beat;
        const { kind, rep } = phaseAt(schedule, elapsed);
        const accent = beat % schedule.beats_per_phase === 0;
        this.beep(accent ? 880 : 440, accent ? 0.12 : 0.06);
        this.onFlash(kind, rep);
      }
    }, 20);
  }

  private beep(freq: number, duration: number): void {
    if (!this.ctx) return;
    const osc = this.ctx.createOscillator();
    const gain = this.ctx.createGain();
    osc.frequency.value = freq;
    osc.connect(gain);
    gain.connect(this.ctx.destination);
    gain.gain.setValueAtTime(0.2, this.ctx.currentTime);
    gain.gain.exponentialRampToValueAtTime(1e-4, this.ctx.currentTime + duration);
    osc.start();
    osc.stop(this.ctx.currentTime + duration);
  }

  stop(): void {
    if (this.timer !== null) clearInterval(this.timer);
    this.timer = null;
    this.ctx?.close();
    this.ctx = null;
  }
}
