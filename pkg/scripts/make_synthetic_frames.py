#!/usr/bin/env python3
"""Generate the vendored synthetic house-like landmark sequence.

Writes frame_000.csv .. frame_{N-1}.csv into the output directory: 30
landmarks in pixel units undergoing a slow rigid motion (small rotation
about the centroid plus a drift) with sub-pixel tracking jitter.  The
files stand in for real tracked-landmark sequences (see
fetch_house_sequence.py) so the sequence benchmark can run offline.

Deterministic for a fixed seed; coordinates are written with three
decimals so regeneration is byte-stable.
"""

import argparse
from pathlib import Path

import numpy as np

# A house in three-quarter view (front face plus receding side face):
# 30 corner-like points, roughly a 512x480 image frame, y measured
# downward.  The view is deliberately asymmetric -- a mirror-symmetric
# layout makes the reflected labelling an equally good optimum and the
# per-vertex decode then mixes the two modes.
HOUSE_POINTS = np.array(
    [
        (96.0, 395.0),  # front face, lower-left
        (298.0, 402.0),  # front face, lower-right
        (306.0, 232.0),  # front face, upper-right
        (88.0, 246.0),  # front face, upper-left
        (193.0, 121.0),  # front gable ridge
        (64.0, 258.0),  # eave overhang, left
        (330.0, 224.0),  # eave, right
        (438.0, 390.0),  # side face, lower-rear
        (447.0, 250.0),  # side face, upper-rear
        (352.0, 130.0),  # roof ridge, rear end
        (142.0, 398.0),  # door, lower-left
        (146.0, 309.0),  # door, upper-left
        (188.0, 306.0),  # door, upper-right
        (186.0, 399.0),  # door, lower-right
        (178.0, 352.0),  # door knob
        (216.0, 262.0),  # front window corners
        (276.0, 266.0),
        (274.0, 305.0),
        (219.0, 299.0),
        (366.0, 270.0),  # side window corners (smaller, skewed)
        (402.0, 265.0),
        (406.0, 318.0),
        (370.0, 324.0),
        (296.0, 128.0),  # chimney
        (297.0, 88.0),
        (322.0, 91.0),
        (325.0, 152.0),
        (238.0, 180.0),  # gable vent
        (120.0, 352.0),  # wall lamp
        (410.0, 360.0),  # stain on side wall
    ],
    dtype=np.float64,
)

ROT_PER_FRAME = 0.012  # radians, ~0.7 degrees
DRIFT_PER_FRAME = np.array([2.6, 1.4])  # pixels
JITTER_PX = 0.18  # per-coordinate tracking noise


def make_frames(n_frames: int, seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    centroid = HOUSE_POINTS.mean(axis=0)
    frames = []
    for k in range(n_frames):
        ang = ROT_PER_FRAME * k
        c, s = np.cos(ang), np.sin(ang)
        rot = np.array([[c, -s], [s, c]])
        pts = (HOUSE_POINTS - centroid) @ rot.T + centroid + DRIFT_PER_FRAME * k
        pts = pts + rng.normal(scale=JITTER_PX, size=pts.shape)
        frames.append(pts)
    return frames


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="data/house_synthetic")
    ap.add_argument("--frames", type=int, default=5)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for k, pts in enumerate(make_frames(args.frames, args.seed)):
        lines = [f"# synthetic house landmarks, frame {k} (pixels)"]
        lines += [f"{x:.3f},{y:.3f}" for x, y in pts]
        (out / f"frame_{k:03d}.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {args.frames} frames to {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
