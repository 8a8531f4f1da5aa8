#!/usr/bin/env python3
"""Pilot target-holding study: 5 levels, 15 s holds starting at band entry,
30 s timeout, one motion. Prints the outcome table and saves the cursor
trace figure.
"""

import argparse
from pathlib import Path

from sonoctl.config import SessionConfig
from sonoctl.session import run_scripted_session
from sonoctl.storage import SessionLogWriter, read_log
from sonoctl.taskengine import TaskConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--tick-rate", type=float, default=15.0)
    ap.add_argument("--motion", default="PG")
    ap.add_argument("--out", default="runs/pilot")
    ap.add_argument("--no-plot", action="store_true")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = SessionConfig(
        seed=args.seed,
        tick_rate_hz=args.tick_rate,
        task=TaskConfig(n_positions=5, hold_time_s=15.0, timeout_s=30.0,
                        trials_per_level=1, hold_mode="on_entry"),
        task_motion=args.motion,
    )
    log_path = out / "session.jsonl"
    with SessionLogWriter(log_path) as log:
        engine = run_scripted_session(cfg, log=log)

    block = engine.completed[0]
    m = block["metrics"]
    print(f"motion {block['motion']}: completion {m.completion_rate:.1f}%  "
          f"position error {m.mean_position_error:+.2f}%  "
          f"stability error {m.mean_stability_error:.2f}%")
    for i, t in enumerate(m.trials):
        mt = f"{t.movement_time:.2f}s" if t.movement_time is not None else "timeout"
        print(f"  trial {i}: target {t.target:.2f}  {mt}")

    if args.no_plot:
        return
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not available; skipping figure")
        return

    ticks = [e for e in read_log(log_path)
             if e["type"] == "tick" and e["phase"] == "task"]
    times = [e["time"] for e in ticks]
    t0 = times[0]
    times = [t - t0 for t in times]
    fig, ax = plt.subplots(figsize=(10, 4))
    ax.plot(times, [e["p"] for e in ticks], label="cursor")
    ax.step(times, [e["target"] for e in ticks], where="post",
            label="target", alpha=0.7)
    band = ticks[0]["band_q"]
    ax.fill_between(times, [e["target"] - band for e in ticks],
                    [e["target"] + band for e in ticks],
                    step="post", alpha=0.15, label="band")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("normalized position")
    ax.set_ylim(-0.05, 1.05)
    ax.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(out / "pilot.png", dpi=120)
    print(f"figure saved to {out / 'pilot.png'}")


if __name__ == "__main__":
    main()
