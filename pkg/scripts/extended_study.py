#!/usr/bin/env python3
"""Extended target-holding study: 11 levels x 3 trials, every motion.

Runs the scripted subject through training, per-motion calibration and task
blocks, prints the per-motion outcome table, and saves movement-time vs
difficulty and completion figures.
"""

import argparse
from pathlib import Path

from sonoctl.config import SessionConfig
from sonoctl.session import run_scripted_session
from sonoctl.storage import SessionLogWriter
from sonoctl.taskengine import TaskConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--tick-rate", type=float, default=15.0)
    ap.add_argument("--out", default="runs/extended")
    ap.add_argument("--no-plot", action="store_true")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = SessionConfig(
        seed=args.seed,
        tick_rate_hz=args.tick_rate,
        task=TaskConfig(n_positions=11, hold_time_s=10.0, trials_per_level=3),
        task_motion=None,
    )
    with SessionLogWriter(out / "session.jsonl") as log:
        engine = run_scripted_session(cfg, log=log)

    print(f"{'motion':8s} {'pos err %':>10s} {'stab err %':>10s} "
          f"{'completion %':>13s} {'mean MT s':>10s}")
    for block in engine.completed:
        m = block["metrics"]
        print(f"{block['motion']:8s} {m.mean_position_error:+10.2f} "
              f"{m.mean_stability_error:10.2f} {m.completion_rate:13.1f} "
              f"{m.mean_movement_time:10.2f}")
    pooled = engine.study_fitts
    print(f"\npooled: completion {engine.study_completion:.1f}%  "
          f"slope {pooled.slope:.3f} s/bit  intercept {pooled.intercept:.3f} s  "
          f"r^2 {pooled.r_squared:.3f}  throughput "
          f"{pooled.throughput:.2f} bits/s")

    if args.no_plot:
        return
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not available; skipping figures")
        return

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))
    xs = [p.difficulty for b in engine.completed
          for p in _points(b)]
    ys = [p.movement_time for b in engine.completed
          for p in _points(b)]
    ax1.plot(xs, ys, ".", alpha=0.4, label="trials")
    bx = [d for d, _ in pooled.binned]
    by = [mt for _, mt in pooled.binned]
    ax1.plot(bx, by, "o", label="binned means")
    ax1.plot(bx, [pooled.intercept + pooled.slope * d for d in bx], "-",
             label=f"fit (r$^2$={pooled.r_squared:.2f})")
    ax1.set_xlabel("index of difficulty (bits)")
    ax1.set_ylabel("movement time (s)")
    ax1.legend()

    levels = sorted({r.target for b in engine.completed for r in b["records"]})
    comp = []
    for lv in levels:
        trials = [r for b in engine.completed for r in b["records"] if r.target == lv]
        comp.append(100.0 * sum(r.acquired for r in trials) / len(trials))
    ax2.bar([f"{lv:.1f}" for lv in levels], comp)
    ax2.set_xlabel("target level")
    ax2.set_ylabel("completion rate (%)")
    ax2.set_ylim(0, 105)
    fig.tight_layout()
    fig.savefig(out / "study.png", dpi=120)
    print(f"figure saved to {out / 'study.png'}")


def _points(block):
    from sonoctl.taskengine import fitts_points
    return fitts_points(block["records"], block["cfg"])


if __name__ == "__main__":
    main()
