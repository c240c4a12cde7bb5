"""Unified command-line entry point.

Every command resolves its arguments to a flat JSON-able dict, runs one
pipeline, and writes a manifest capturing that dict, so any run can be
re-executed exactly via ``argv_from_manifest``.  Exit codes: 0 success,
2 usage error, 1 runtime failure (with a machine-readable ``error:`` line
on stderr).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .config import default_out_root, load_config
from .exceptions import OdegenError
from .manifest import METRICS_NAME, MetricLogger, RunManifest

COMMANDS = (
    "simulate-pendulum",
    "train-pendulum",
    "train-stage1",
    "train-stage2",
    "sample-motion",
    "generate-video",
    "make-synth-data",
    "eval-fid",
    "selftest",
)


def _resolve_out(args_out: str | None, command: str) -> Path:
    if args_out:
        out = Path(args_out)
    else:
        stamp = datetime.now(timezone.utc).strftime("%Y%m%d-%H%M%S")
        out = Path(default_out_root()) / f"{command}-{stamp}"
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config_overrides(path: str | None) -> dict:
    """Keys explicitly present in a config file, validated, as a dict."""
    if path is None:
        return {}
    cfg = load_config(path)
    text = Path(path).read_text().strip()
    present = set(json.loads(text)) if text else set()
    return {k: getattr(cfg, k) for k in present}


def _pick(flag, config: dict, key: str, default):
    """Priority: explicit CLI flag > config-file key > command default."""
    if flag is not None:
        return flag
    if key in config:
        return config[key]
    return default


def time_grid(frames: int, fps: float) -> np.ndarray:
    """Frame i of a rate-fps clip occurs at time i/fps, starting at i=1."""
    return np.arange(1, frames + 1, dtype=np.float64) / fps


# -- command implementations ------------------------------------------------


def _cmd_simulate_pendulum(args) -> int:
    from .pendulum import sample_dataset, save_dataset_csv

    out = _resolve_out(args.out, "simulate-pendulum")
    resolved = {"n": args.n, "seed": args.seed, "dt": args.dt, "steps": args.steps,
                "out": str(out)}
    t0 = time.monotonic()
    ds = sample_dataset(n=args.n, seed=args.seed, dt=args.dt, steps=args.steps)
    paths = save_dataset_csv(ds, out / "trajectories")
    manifest = RunManifest(command="simulate-pendulum", arguments=resolved)
    manifest.wall_seconds = time.monotonic() - t0
    manifest.outputs = {"trajectory_files": len(paths), "trajectory_dir": str(out / "trajectories")}
    manifest.save(out)
    print(f"wrote {len(paths)} trajectories to {out}")
    return 0


def _cmd_train_pendulum(args) -> int:
    from .pendulum import (PendulumTrainConfig, sample_dataset,
                           save_pendulum_generator, train_pendulum_generator)

    over = _config_overrides(args.config)
    base = PendulumTrainConfig()
    cfg = PendulumTrainConfig(
        kind=args.kind,
        steps=_pick(args.steps, over, "steps", base.steps),
        batch_size=_pick(args.batch, over, "batch_size", base.batch_size),
        lr=_pick(args.lr, over, "lr", base.lr),
        d_steps_per_g=_pick(args.d_steps, over, "d_steps_per_g", base.d_steps_per_g),
        lambda_gp=_pick(None, over, "lambda_gp", base.lambda_gp),
        lambda_div_initial=_pick(None, over, "lambda_div_initial", base.lambda_div_initial),
        seed=_pick(args.seed, over, "seed", base.seed),
    )
    out = _resolve_out(args.out, "train-pendulum")
    resolved = {"kind": cfg.kind, "steps": cfg.steps, "batch": cfg.batch_size,
                "lr": cfg.lr, "d_steps": cfg.d_steps_per_g, "seed": cfg.seed,
                "data_n": args.data_n, "data_seed": args.data_seed, "out": str(out)}
    ds = sample_dataset(n=args.data_n, seed=args.data_seed)
    t0 = time.monotonic()
    with MetricLogger(out / METRICS_NAME) as ml:
        gen, info = train_pendulum_generator(ds, cfg, log_fn=ml.log)
    ckpt = out / "generator.npz"
    save_pendulum_generator(gen, ckpt)
    manifest = RunManifest(command="train-pendulum", arguments=resolved)
    manifest.wall_seconds = time.monotonic() - t0
    manifest.metrics_csv = str(out / METRICS_NAME)
    manifest.checkpoints = {"generator": str(ckpt)}
    manifest.outputs = {k: v for k, v in info.items() if not isinstance(v, np.ndarray)}
    manifest.save(out)
    print(f"trained {cfg.kind} generator ({info['generator_params']} params) -> {ckpt}")
    return 0


def _cmd_make_synth_data(args) -> int:
    from .images import write_video_frames
    from .video import make_synthetic_video_dataset, save_synthetic_dataset

    out = _resolve_out(args.out, "make-synth-data")
    resolved = {"n": args.n, "frames": args.frames, "size": args.size,
                "keypoints": args.keypoints, "seed": args.seed, "fps": args.fps,
                "style": args.style, "motion_seed": args.motion_seed,
                "appearance_seed": args.appearance_seed, "out": str(out)}
    t0 = time.monotonic()
    ds = make_synthetic_video_dataset(
        args.n, frames=args.frames, height=args.size, width=args.size,
        keypoints=args.keypoints, seed=args.seed, fps=args.fps, style=args.style,
        motion_seed=args.motion_seed, appearance_seed=args.appearance_seed)
    data_path = out / "dataset.npz"
    save_synthetic_dataset(ds, data_path)
    write_video_frames(out / "preview", ds.videos[0])
    manifest = RunManifest(command="make-synth-data", arguments=resolved)
    manifest.wall_seconds = time.monotonic() - t0
    manifest.outputs = {"dataset": str(data_path), "samples": args.n,
                        "times": ds.times.tolist()}
    manifest.save(out)
    print(f"wrote {args.n} {args.style} clips to {data_path}")
    return 0


def _dict_logger(ml: MetricLogger):
    def log(step: int, metrics: dict) -> None:
        for key in sorted(metrics):
            ml.log(step, key, metrics[key])

    return log


def _cmd_train_stage1(args) -> int:
    from .motion import Stage1Config, train_stage1
    from .motion.discriminators import DESK_BASE, DESK_CAP, REFERENCE_BASE, REFERENCE_CAP
    from .video import load_synthetic_dataset

    over = _config_overrides(args.config)
    ds = load_synthetic_dataset(args.data)
    n, frames, keypoints, _ = ds.keypoints.shape
    size = ds.videos.shape[-1]
    base = Stage1Config()
    ref = args.preset == "table-ref"
    cfg = Stage1Config(
        keypoints=keypoints, size=size, frames=frames,
        fps=float(ds.meta.get("fps", base.fps)),
        noise_dim=args.noise_dim, latent_dim=args.latent_dim,
        batch=_pick(args.batch, over, "batch_size", base.batch),
        steps=_pick(args.steps, over, "steps", base.steps),
        d_steps=_pick(args.d_steps, over, "d_steps_per_g", base.d_steps),
        lr=_pick(args.lr, over, "lr", base.lr),
        lambda_gp=_pick(None, over, "lambda_gp", base.lambda_gp),
        lambda_div=_pick(None, over, "lambda_div_initial", base.lambda_div),
        substeps=_pick(None, over, "solver_substeps", base.substeps),
        sigma=args.sigma,
        critic_base=REFERENCE_BASE if ref else DESK_BASE,
        critic_cap=REFERENCE_CAP if ref else DESK_CAP,
        seed=_pick(args.seed, over, "seed", base.seed),
    )
    out = _resolve_out(args.out, "train-stage1")
    resolved = {"data": args.data, "preset": args.preset, "steps": cfg.steps,
                "batch": cfg.batch, "d_steps": cfg.d_steps, "lr": cfg.lr,
                "noise_dim": cfg.noise_dim, "latent_dim": cfg.latent_dim,
                "sigma": args.sigma, "seed": cfg.seed, "out": str(out)}
    t0 = time.monotonic()
    with MetricLogger(out / METRICS_NAME) as ml:
        gen, info = train_stage1(ds.keypoints, cfg, log_fn=_dict_logger(ml))
    ckpt = out / "motion.npz"
    gen.save(ckpt)
    manifest = RunManifest(command="train-stage1", arguments=resolved)
    manifest.wall_seconds = time.monotonic() - t0
    manifest.metrics_csv = str(out / METRICS_NAME)
    manifest.checkpoints = {"motion": str(ckpt)}
    manifest.outputs = {"sigma": info["sigma"], "times": list(info["times"])}
    manifest.save(out)
    print(f"trained motion generator -> {ckpt}")
    return 0


def _cmd_train_stage2(args) -> int:
    from .video import Stage2Config, load_synthetic_dataset, train_stage2
    from .video.discriminators import DESK_BASE, DESK_CAP, REFERENCE_BASE, REFERENCE_CAP

    over = _config_overrides(args.config)
    ds = load_synthetic_dataset(args.data)
    n, frames, keypoints, _ = ds.keypoints.shape
    size = ds.videos.shape[-1]
    base = Stage2Config()
    ref = args.preset == "table-ref"
    cfg = Stage2Config(
        keypoints=keypoints, size=size, frames=frames,
        noise_dim=args.noise_dim,
        base_channels=args.base_channels if args.base_channels else (512 if ref else base.base_channels),
        levels=args.levels if args.levels else (4 if ref else base.levels),
        batch=_pick(args.batch, over, "batch_size", base.batch),
        steps=_pick(args.steps, over, "steps", base.steps),
        d_steps=_pick(args.d_steps, over, "d_steps_per_g", base.d_steps),
        lr=_pick(args.lr, over, "lr", base.lr),
        lambda_gp=_pick(None, over, "lambda_gp", base.lambda_gp),
        lambda_div=_pick(None, over, "lambda_div_pixel", base.lambda_div),
        sigma=args.sigma,
        critic_base=REFERENCE_BASE if ref else DESK_BASE,
        critic_cap=REFERENCE_CAP if ref else DESK_CAP,
        seed=_pick(args.seed, over, "seed", base.seed),
    )
    out = _resolve_out(args.out, "train-stage2")
    resolved = {"data": args.data, "preset": args.preset, "steps": cfg.steps,
                "batch": cfg.batch, "d_steps": cfg.d_steps, "lr": cfg.lr,
                "base_channels": cfg.base_channels, "levels": cfg.levels,
                "sigma": args.sigma, "seed": cfg.seed, "out": str(out)}
    t0 = time.monotonic()
    with MetricLogger(out / METRICS_NAME) as ml:
        gen, info = train_stage2(ds, cfg, log_fn=_dict_logger(ml))
    ckpt = out / "video.npz"
    gen.save(ckpt)
    manifest = RunManifest(command="train-stage2", arguments=resolved)
    manifest.wall_seconds = time.monotonic() - t0
    manifest.metrics_csv = str(out / METRICS_NAME)
    manifest.checkpoints = {"video": str(ckpt)}
    manifest.save(out)
    print(f"trained video generator -> {ckpt}")
    return 0


def _cmd_sample_motion(args) -> int:
    from .autodiff import Tensor, no_grad
    from .images import heatmap_grid, write_pgm
    from .motion import MotionGenerator, default_sigma, render_heatmaps
    from .ode import SolverConfig

    out = _resolve_out(args.out, "sample-motion")
    resolved = {"checkpoint": args.checkpoint, "n": args.n, "frames": args.frames,
                "fps": args.fps, "seed": args.seed, "solver": args.solver,
                "substeps": args.substeps, "size": args.size, "sigma": args.sigma,
                "out": str(out)}
    t0 = time.monotonic()
    gen = MotionGenerator.load(args.checkpoint)
    times = time_grid(args.frames, args.fps)
    rng = np.random.default_rng(args.seed)
    solver = SolverConfig(method=args.solver, substeps=args.substeps)
    with no_grad():
        z = Tensor(rng.normal(size=(args.n, gen.noise_dim)))
        coords = gen.generate_keypoints(z, times, solver=solver).data
    np.savez(out / "keypoints.npz", coords=coords, times=times)
    sigma = args.sigma if args.sigma is not None else default_sigma(args.size)
    with no_grad():
        maps = render_heatmaps(Tensor(coords[0]), args.size, args.size, sigma).data
    for t in range(min(args.frames, 4)):
        write_pgm(out / f"heatmaps_{t:04d}.pgm", heatmap_grid(maps[t]))
    with MetricLogger(out / METRICS_NAME) as ml:
        for t in range(args.frames):
            ml.log(t, "mean_x", coords[:, t, :, 0].mean())
            ml.log(t, "mean_y", coords[:, t, :, 1].mean())
    manifest = RunManifest(command="sample-motion", arguments=resolved)
    manifest.wall_seconds = time.monotonic() - t0
    manifest.metrics_csv = str(out / METRICS_NAME)
    manifest.outputs = {"keypoints": str(out / "keypoints.npz"), "times": times.tolist(),
                        "sigma": sigma}
    manifest.save(out)
    print(f"sampled {args.n} tracks of {args.frames} frames at {args.fps} fps -> {out}")
    return 0


def _cmd_generate_video(args) -> int:
    from .autodiff import Tensor
    from .images import write_video_frames
    from .motion import MotionGenerator
    from .video import VideoGenerator
    from .video.train import motion_transfer

    out = _resolve_out(args.out, "generate-video")
    resolved = {"motion": args.motion, "video": args.video, "n": args.n,
                "frames": args.frames, "fps": args.fps, "seed": args.seed,
                "motion_seed": args.motion_seed, "appearance_seed": args.appearance_seed,
                "out": str(out)}
    t0 = time.monotonic()
    motion_gen = MotionGenerator.load(args.motion)
    video_gen = VideoGenerator.load(args.video)
    times = time_grid(args.frames, args.fps)
    seq = np.random.SeedSequence(args.seed)
    child_m, child_a = seq.spawn(2)
    rng_m = np.random.default_rng(child_m if args.motion_seed is None else args.motion_seed)
    rng_a = np.random.default_rng(child_a if args.appearance_seed is None else args.appearance_seed)
    z_m = Tensor(rng_m.normal(size=(args.n, motion_gen.noise_dim)))
    z_a = Tensor(rng_a.normal(size=(args.n, video_gen.noise_dim)))
    video, coords = motion_transfer(motion_gen, video_gen, z_m, z_a, times)
    for i in range(args.n):
        write_video_frames(out / f"sample_{i:02d}", video.data[i])
    np.savez(out / "keypoints.npz", coords=coords.data, times=times)
    with MetricLogger(out / METRICS_NAME) as ml:
        for t in range(args.frames):
            ml.log(t, "frame_mean", video.data[:, t].mean())
    manifest = RunManifest(command="generate-video", arguments=resolved)
    manifest.wall_seconds = time.monotonic() - t0
    manifest.metrics_csv = str(out / METRICS_NAME)
    manifest.outputs = {"times": times.tolist(), "frames": args.frames,
                        "samples": args.n, "keypoints": str(out / "keypoints.npz")}
    manifest.save(out)
    print(f"generated {args.n} clips of {args.frames} frames at {args.fps} fps -> {out}")
    return 0


def _load_video_set(path: str) -> list:
    """A video set is an .npz with a 'videos' array, a directory holding
    dataset.npz/videos.npz, or a directory of per-video PPM frame folders."""
    from .exceptions import ContractError
    from .images import read_video_frames

    p = Path(path)
    if p.is_file() and p.suffix == ".npz":
        with np.load(p) as raw:
            if "videos" in raw.files:
                return list(raw["videos"])
            raise ContractError(f"{p}: no 'videos' array")
    if p.is_dir():
        for name in ("dataset.npz", "videos.npz"):
            if (p / name).exists():
                return _load_video_set(str(p / name))
        subdirs = sorted(d for d in p.iterdir() if d.is_dir() and list(d.glob("*.ppm")))
        if subdirs:
            return [read_video_frames(d) for d in subdirs]
        if list(p.glob("*.ppm")):
            return [read_video_frames(p)]
    raise ContractError(f"{path}: no videos found (want .npz with 'videos' or PPM frame dirs)")


def _cmd_eval_fid(args) -> int:
    from .evaluation import features_matrix, fit_stats, frechet_distance, make_extractor

    out = _resolve_out(args.out, "eval-fid")
    resolved = {"real": args.real, "fake": args.fake, "extractor": args.extractor,
                "seed": args.seed, "out": str(out)}
    t0 = time.monotonic()
    extractor = make_extractor(args.extractor, seed=args.seed)
    real = _load_video_set(args.real)
    fake = _load_video_set(args.fake)
    ref = fit_stats(features_matrix(real, extractor))
    value = frechet_distance(fit_stats(features_matrix(fake, extractor)), ref)
    report = {"fid": value, "extractor": args.extractor, "seed": args.seed,
              "n_real": len(real), "n_fake": len(fake),
              "feature_dim": extractor.feature_dim}
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    manifest = RunManifest(command="eval-fid", arguments=resolved)
    manifest.wall_seconds = time.monotonic() - t0
    manifest.outputs = report
    manifest.save(out)
    print(value)
    return 0


def _cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return 0 if run_selftest() else 1


# -- argument parsing --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="odegen",
        description="Continuous-time motion dynamics and two-stage video generation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate-pendulum", help="write an oracle trajectory dataset")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dt", type=float, default=0.1)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--out", default=None)

    p = sub.add_parser("train-pendulum", help="train an ode or rnn trajectory generator")
    p.add_argument("--kind", choices=("ode", "rnn"), default="ode")
    p.add_argument("--config", default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--d-steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--data-n", type=int, default=512)
    p.add_argument("--data-seed", type=int, default=123)
    p.add_argument("--out", default=None)

    p = sub.add_parser("make-synth-data", help="write a moving-blob video dataset")
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--size", type=int, default=16)
    p.add_argument("--keypoints", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fps", type=float, default=16.0)
    p.add_argument("--style", choices=("disks", "squares"), default="disks")
    p.add_argument("--motion-seed", type=int, default=None)
    p.add_argument("--appearance-seed", type=int, default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("train-stage1", help="train the keypoint motion generator")
    p.add_argument("--data", required=True, help="dataset .npz from make-synth-data")
    p.add_argument("--config", default=None)
    p.add_argument("--preset", choices=("desk", "table-ref"), default="desk")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--d-steps", type=int, default=None)
    p.add_argument("--noise-dim", type=int, default=128)
    p.add_argument("--latent-dim", type=int, default=128)
    p.add_argument("--sigma", type=float, default=None, help="heatmap width in px")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("train-stage2", help="train the motion-conditioned video generator")
    p.add_argument("--data", required=True, help="dataset .npz from make-synth-data")
    p.add_argument("--config", default=None)
    p.add_argument("--preset", choices=("desk", "table-ref"), default="desk")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--d-steps", type=int, default=None)
    p.add_argument("--noise-dim", type=int, default=128)
    p.add_argument("--base-channels", type=int, default=None)
    p.add_argument("--levels", type=int, default=None)
    p.add_argument("--sigma", type=float, default=None, help="heatmap width in px")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("sample-motion", help="sample keypoint tracks from a motion checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--frames", type=int, default=16)
    p.add_argument("--fps", type=float, default=16.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--solver", choices=("euler", "rk4", "dopri5"), default="rk4")
    p.add_argument("--substeps", type=int, default=4)
    p.add_argument("--size", type=int, default=16, help="heatmap render resolution")
    p.add_argument("--sigma", type=float, default=None, help="heatmap width in px")
    p.add_argument("--out", default=None)

    p = sub.add_parser("generate-video", help="drive a video checkpoint with sampled motion")
    p.add_argument("--motion", required=True, help="motion checkpoint path")
    p.add_argument("--video", required=True, help="video checkpoint path")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--fps", type=float, default=16.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--motion-seed", type=int, default=None)
    p.add_argument("--appearance-seed", type=int, default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("eval-fid", help="Frechet distance between two video sets")
    p.add_argument("--real", required=True)
    p.add_argument("--fake", required=True)
    p.add_argument("--extractor", choices=("pixels", "randproj"), default="pixels")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)

    sub.add_parser("selftest", help="run fast invariant checks for every module")

    return parser


_HANDLERS = {
    "simulate-pendulum": _cmd_simulate_pendulum,
    "train-pendulum": _cmd_train_pendulum,
    "make-synth-data": _cmd_make_synth_data,
    "train-stage1": _cmd_train_stage1,
    "train-stage2": _cmd_train_stage2,
    "sample-motion": _cmd_sample_motion,
    "generate-video": _cmd_generate_video,
    "eval-fid": _cmd_eval_fid,
    "selftest": _cmd_selftest,
}


def argv_from_manifest(manifest: RunManifest, out: str | None = None) -> list[str]:
    """Rebuild the exact command line of a recorded run.

    Passing ``out`` redirects outputs so a rerun can be compared against the
    original without overwriting it.
    """
    argv = [manifest.command]
    for key, value in manifest.arguments.items():
        if value is None:
            continue
        if key == "out" and out is not None:
            value = out
        argv += [f"--{key.replace('_', '-')}", str(value)]
    return argv


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _HANDLERS[args.command](args)
    except OdegenError as exc:
        line = json.dumps({"error": type(exc).__name__, "message": str(exc)})
        print(f"error: {line}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        line = json.dumps({"error": "FileNotFoundError", "message": str(exc)})
        print(f"error: {line}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
