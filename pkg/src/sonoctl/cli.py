"""Command-line entry points.

synth     write scripted phantom training sessions as sequence files
train     build and save a training database from recorded sessions
crossval  leave-one-out accuracy and confusion matrices for a database
run       headless scripted-subject task study, logs and metrics
serve     start the websocket session service
report    recompute metrics/difficulty analysis from a session log

Exit codes: 0 success, 1 runtime failure (one JSON error line on stderr),
2 usage errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .classify import loocv
from .config import ROLE_SUBJECT, SessionConfig, derive_seed
from .errors import EngineError
from .frames import decimate
from .session import replay_metrics, run_scripted_session
from .storage import (
    SessionLogWriter,
    load_database,
    read_log,
    read_sequence,
    save_database,
    write_fitts_csv,
    write_json,
    write_sequence,
    write_summary_csv,
    write_text,
    write_trials_csv,
)
from .synthsim import (
    Phantom,
    PhantomConfig,
    draw_rep_peaks,
    draw_rest_mixes,
    metronome_setpoints,
    record_training_session,
)
from .training import REST, MetronomeSchedule, build_database


def default_out() -> str:
    return os.environ.get("SONOCTL_OUT", "out")


def load_config(args) -> SessionConfig:
    """defaults <- --config file <- explicit flags."""
    data = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    cfg = SessionConfig.from_dict(data)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "tick_rate", None) is not None:
        cfg = replace(cfg, tick_rate_hz=args.tick_rate)
    if getattr(args, "motions", None):
        cfg = replace(cfg, motions=tuple(args.motions.split(",")))
    if getattr(args, "motion", None):
        cfg = replace(cfg, task_motion=args.motion)
    if getattr(args, "all_motions", False):
        cfg = replace(cfg, task_motion=None)
    if getattr(args, "noise_sigma", None) is not None:
        cfg = replace(cfg, image=replace(cfg.image, noise_sigma=args.noise_sigma))
    if getattr(args, "rest_jitter", None) is not None:
        cfg = replace(cfg, image=replace(cfg.image, rest_jitter_mix=args.rest_jitter))
    task = cfg.task
    if getattr(args, "n_positions", None) is not None:
        task = replace(task, n_positions=args.n_positions)
    if getattr(args, "trials", None) is not None:
        task = replace(task, trials_per_level=args.trials)
    if getattr(args, "hold_time", None) is not None:
        task = replace(task, hold_time_s=args.hold_time)
    if getattr(args, "timeout", None) is not None:
        task = replace(task, timeout_s=args.timeout)
    if getattr(args, "hold_mode", None) is not None:
        task = replace(task, hold_mode=args.hold_mode)
    if task is not cfg.task:
        cfg = replace(cfg, task=task)
    if cfg.task_motion is None and not getattr(args, "all_motions", False) \
            and not getattr(args, "_study_default", False):
        cfg = replace(cfg, task_motion=cfg.motions[0])
    return cfg


def cmd_synth(args) -> int:
    cfg = load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    phantom = Phantom(PhantomConfig(
        motions=cfg.motion_classes() + (REST,),
        width=cfg.image.width, height=cfg.image.height,
        noise_sigma=cfg.image.noise_sigma, rest_jitter=cfg.image.jitter(),
        seed=derive_seed(cfg.seed, 0)))
    subject = cfg.subject.scripted(derive_seed(cfg.seed, ROLE_SUBJECT))
    subject_rng = np.random.default_rng(derive_seed(cfg.seed, ROLE_SUBJECT))
    mix_rng = np.random.default_rng(derive_seed(cfg.seed, 3))
    rate = cfg.tick_rate_hz
    for mid in cfg.motions:
        peaks = draw_rep_peaks(subject_rng, cfg.metronome.repetitions,
                               cfg.subject.peak_min, cfg.subject.peak_max)
        mixes = draw_rest_mixes(mix_rng, cfg.metronome.repetitions, phantom.rest_jitter)
        setpoints = metronome_setpoints(cfg.metronome, rate, peaks)
        tracker = subject.tracker(rate)
        activation = [tracker.step(sp) for sp in setpoints]
        frames = record_training_session(phantom, mid, cfg.metronome, rate,
                                         activation, mixes)
        write_sequence(out / f"{mid}.smgf", frames, rate, meta={
            "session_id": cfg.session_id, "motion": mid,
            "schedule": cfg.metronome.to_dict(), "seed": cfg.seed,
        })
        print(f"wrote {out / (mid + '.smgf')} ({len(frames)} frames)")
    write_json(out / "config.json", cfg.to_dict())
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args)
    data = Path(args.data)
    files = sorted(data.glob("*.smgf"))
    files = [f for f in files if not f.name.startswith("rest_reference")]
    if not files:
        raise EngineError(f"no .smgf session files in {data}")
    known = {m.id: m for m in cfg.motion_classes()}
    db = None
    for path in files:
        frames, _, sidecar = read_sequence(path)
        if cfg.image.decimation > 1:
            frames = [decimate(f, cfg.image.decimation) for f in frames]
        mid = sidecar.get("motion", path.stem)
        sched = MetronomeSchedule(**sidecar["schedule"]) if "schedule" in sidecar \
            else cfg.metronome
        motion = known.get(mid)
        if motion is None:
            from .training import MotionClass
            motion = MotionClass(mid, mid)
        db = build_database(frames, sched, motion, existing=db,
                            params=cfg.plateau, session_id=sidecar.get("session_id"))
        print(f"trained {mid}: {len(db.entries_for(mid))} entries")
    save_database(db, args.out)
    acc_ex, _ = loocv(db, include_rest=False)
    acc_in, _ = loocv(db, include_rest=True)
    print(f"saved database to {args.out}")
    print(f"loocv accuracy excluding rest: {acc_ex:.2f}%")
    print(f"loocv accuracy including rest: {acc_in:.2f}%")
    return 0


def cmd_crossval(args) -> int:
    db = load_database(args.db)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    acc_ex, m_ex = loocv(db, include_rest=False)
    acc_in, m_in = loocv(db, include_rest=True)
    write_text(out / "confusion_exclude_rest.csv", m_ex.to_csv())
    write_text(out / "confusion_include_rest.csv", m_in.to_csv())
    print(f"loocv accuracy excluding rest: {acc_ex:.2f}%")
    print(f"loocv accuracy including rest: {acc_in:.2f}%")
    print(f"confusion matrices written to {out}")
    return 0


def _write_study_outputs(out: Path, blocks, completion, pooled):
    for block in blocks:
        motion = block["motion"]
        name = "metrics.csv" if len(blocks) == 1 else f"metrics-{motion}.csv"
        write_trials_csv(out / name, block["metrics"])
    write_summary_csv(out / "summary.csv",
                      [(b["motion"], b["metrics"]) for b in blocks])
    if pooled is not None:
        write_fitts_csv(out / "fitts_points.csv", pooled)
    write_json(out / "metrics.json", {
        "completion_rate": completion,
        "fitts": pooled.to_dict() if pooled is not None else None,
        "blocks": [{"motion": b["motion"],
                    "metrics": b["metrics"].to_dict(),
                    "fitts": b["fitts"].to_dict() if b["fitts"] else None}
                   for b in blocks],
    })


def cmd_run(args) -> int:
    cfg = load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "session.jsonl"
    with SessionLogWriter(log_path) as log:
        engine = run_scripted_session(cfg, log=log)
    blocks = engine.completed
    completion, pooled = engine.study_completion, engine.study_fitts
    _write_study_outputs(out, blocks, completion, pooled)
    print(f"log written to {log_path}")
    print(f"completion rate: {completion:.1f}%")
    if pooled is not None:
        tp = "undefined" if pooled.throughput is None else f"{pooled.throughput:.2f} bits/s"
        print(f"difficulty fit: slope {pooled.slope:.3f} s/bit, "
              f"intercept {pooled.intercept:.3f} s, r^2 {pooled.r_squared:.3f}, "
              f"throughput {tp}")
    return 0


def cmd_serve(args) -> int:
    from .service import serve
    serve(args.host, args.port, args.out)
    return 0


def cmd_report(args) -> int:
    events = read_log(args.log)
    _, blocks, completion, pooled = replay_metrics(events)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_study_outputs(out, blocks, completion, pooled)
    print(f"report written to {out}")
    print(f"completion rate: {completion:.1f}%")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sonoctl",
        description="image-stream motion decoding and proportional-control engine")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default=None):
        p.add_argument("--config", help="JSON session config file")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--out", default=out_default or default_out(),
                       help="output directory")

    p = sub.add_parser("synth", help="write scripted phantom training sessions")
    common(p)
    p.add_argument("--motions", help="comma-separated motion ids")
    p.add_argument("--noise-sigma", type=float)
    p.add_argument("--rest-jitter", type=float,
                   help="max rest posture drift (0 disables)")
    p.add_argument("--tick-rate", type=float)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="build a training database from sessions")
    common(p)
    p.add_argument("--data", required=True, help="directory of .smgf sessions")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("crossval", help="LOOCV accuracy and confusion matrices")
    common(p)
    p.add_argument("--db", required=True, help="database directory")
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("run", help="headless scripted-subject task study")
    common(p)
    p.add_argument("--motions", help="comma-separated motion ids to train")
    p.add_argument("--motion", help="single task motion (default: first)")
    p.add_argument("--all-motions", action="store_true",
                   help="run one task block per motion")
    p.add_argument("--n-positions", type=int)
    p.add_argument("--trials", type=int, help="trials per target level")
    p.add_argument("--hold-time", type=float)
    p.add_argument("--timeout", type=float)
    p.add_argument("--hold-mode", choices=["on_entry", "on_presentation"])
    p.add_argument("--noise-sigma", type=float)
    p.add_argument("--rest-jitter", type=float)
    p.add_argument("--tick-rate", type=float)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("serve", help="start the websocket session service")
    common(p, out_default="sessions")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("report", help="recompute metrics from a session log")
    common(p)
    p.add_argument("--log", required=True, help="session JSONL log")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EngineError as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}),
              file=sys.stderr)
        return 1
    except OSError as e:
        print(json.dumps({"error": "IOError", "message": str(e)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
