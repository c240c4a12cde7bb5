"""End-to-end run on the moving-blob domain.

Makes disk and square datasets, trains the motion generator on disk tracks
and a video generator per domain, then reports keypoint-tracking error of
generated clips, pixel-extractor FID against the real set, and the
cross-domain motion-transfer tracking error.

Each training phase runs in its own process through the CLI so peak memory
stays bounded by the largest single phase.
"""

import argparse
import json
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from odegen.autodiff import Tensor, no_grad
from odegen.evaluation import (
    PixelStatsExtractor,
    extract_tracks,
    features_matrix,
    fit_stats,
    frechet_distance,
    split_half_distance,
    track_error_px,
)
from odegen.motion import MotionGenerator
from odegen.video import VideoGenerator, load_synthetic_dataset
from odegen.video.train import motion_transfer


def cli(*argv) -> None:
    cmd = [sys.executable, "-m", "odegen.cli", *map(str, argv)]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        sys.stderr.write(proc.stdout + proc.stderr)
        raise SystemExit(f"command failed ({proc.returncode}): {' '.join(cmd)}")


def generated_metrics(motion_gen, video_gen, real_videos, times, n, seed, sigma):
    rng = np.random.default_rng(seed)
    with no_grad():
        z_m = Tensor(rng.normal(size=(n, motion_gen.noise_dim)))
        z_a = Tensor(rng.normal(size=(n, video_gen.noise_dim)))
        video, coords = motion_transfer(motion_gen, video_gen, z_m, z_a, times, sigma=sigma)
    vids = video.data
    h, w = vids.shape[-2], vids.shape[-1]
    err = track_error_px(coords.data, extract_tracks(vids, coords.shape[2]), h, w)
    extractor = PixelStatsExtractor()
    ref = fit_stats(features_matrix(list(real_videos), extractor))
    fid = frechet_distance(fit_stats(features_matrix(list(vids), extractor)), ref)
    floor = split_half_distance(list(real_videos), extractor, seed=0)
    return float(np.median(err)), fid, floor, vids


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=256)
    ap.add_argument("--frames", type=int, default=8)
    ap.add_argument("--size", type=int, default=16)
    ap.add_argument("--stage1-steps", type=int, default=400)
    ap.add_argument("--stage2-steps", type=int, default=400)
    ap.add_argument("--transfer-steps", type=int, default=200,
                    help="squares-domain stage-2 budget for the transfer check")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--eval-n", type=int, default=64)
    ap.add_argument("--sigma", type=float, default=1.2,
                    help="heatmap width in px; the 64x64-proportional default is too narrow at 16x16")
    ap.add_argument("--out", default="runs/synthetic-e2e")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t_all = time.time()
    report = {}

    for name, seed in (("disks", args.seed), ("squares", args.seed + 1)):
        cli("make-synth-data", "--n", args.n, "--frames", args.frames,
            "--size", args.size, "--seed", seed, "--style", name,
            "--out", out / name)
    disks = load_synthetic_dataset(out / "disks" / "dataset.npz")
    squares = load_synthetic_dataset(out / "squares" / "dataset.npz")
    times = disks.times

    t0 = time.time()
    cli("train-stage1", "--data", out / "disks" / "dataset.npz",
        "--steps", args.stage1_steps, "--sigma", args.sigma,
        "--seed", args.seed, "--out", out / "stage1")
    report["stage1_seconds"] = time.time() - t0
    print(f"stage-1 done in {report['stage1_seconds']:.0f}s", flush=True)

    for name, steps in (("disks", args.stage2_steps), ("squares", args.transfer_steps)):
        t0 = time.time()
        cli("train-stage2", "--data", out / name / "dataset.npz",
            "--steps", steps, "--sigma", args.sigma,
            "--seed", args.seed, "--out", out / f"stage2-{name}")
        report[f"stage2_{name}_seconds"] = time.time() - t0
        print(f"stage-2 {name} done in {report[f'stage2_{name}_seconds']:.0f}s", flush=True)

    motion_gen = MotionGenerator.load(out / "stage1" / "motion.npz")
    models = {name: VideoGenerator.load(out / f"stage2-{name}" / "video.npz")
              for name in ("disks", "squares")}

    err, fid, floor, vids = generated_metrics(motion_gen, models["disks"], disks.videos,
                                              times, args.eval_n, args.seed + 7, args.sigma)
    report.update({"disks_track_error_px": err, "disks_fid": fid, "split_half_fid": floor,
                   "fid_ratio": fid / floor if floor > 0 else float("inf")})
    print(f"disks: median track error {err:.3f}px, fid {fid:.3f} (floor {floor:.3f})", flush=True)

    terr, tfid, tfloor, _ = generated_metrics(motion_gen, models["squares"], squares.videos,
                                              times, args.eval_n, args.seed + 8, args.sigma)
    report.update({"transfer_track_error_px": terr, "squares_fid": tfid})
    print(f"disks->squares transfer: median track error {terr:.3f}px", flush=True)

    report["total_seconds"] = time.time() - t_all
    (out / "e2e.json").write_text(json.dumps(report, indent=2) + "\n")
    print(f"total {report['total_seconds']:.0f}s; report at {out/'e2e.json'}")


if __name__ == "__main__":
    main()
