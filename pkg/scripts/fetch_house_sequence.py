#!/usr/bin/env python3
"""Fetch the CMU house rotation sequence (images) for local experiments.

The classic source is the CMU VASC image database:

    http://vasc.ri.cmu.edu/idb/html/motion/house/index.html

which distributes 111 greyscale frames of a toy house on a rotating
platform.  Image processing is out of scope here: the matcher consumes
per-frame *landmark* files (one CSV per frame, 30 lines of "x,y" in
pixels, same landmark order in every frame).  The widely used 30-point
tracks for this sequence circulate with several graph-matching
benchmark bundles; once you have them in any array form, writing the
CSVs is a couple of lines:

    for k, frame in enumerate(tracks):          # tracks: (111, 30, 2)
        np.savetxt(f"frame_{k:03d}.csv", frame, delimiter=",")

data/house_synthetic/ holds a 5-frame synthetic stand-in with the same
shape so the sequence benchmark runs offline.
"""

import argparse
import sys
import urllib.error
import urllib.request
from pathlib import Path

INDEX_URL = "http://vasc.ri.cmu.edu/idb/html/motion/house/index.html"
FRAME_URL = "http://vasc.ri.cmu.edu/idb/images/motion/house/house.seq{k}.png"


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="data/house_cmu")
    ap.add_argument("--frames", type=int, default=111, help="how many frames to try")
    ap.add_argument("--timeout", type=float, default=30.0)
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fetched = 0
    for k in range(args.frames):
        url = FRAME_URL.format(k=k)
        dest = out / f"house.seq{k}.png"
        if dest.exists():
            fetched += 1
            continue
        try:
            with urllib.request.urlopen(url, timeout=args.timeout) as resp:
                dest.write_bytes(resp.read())
            fetched += 1
        except (urllib.error.URLError, OSError) as e:
            print(f"failed at frame {k}: {e}", file=sys.stderr)
            print(f"see {INDEX_URL} for the dataset page", file=sys.stderr)
            break
    print(f"{fetched} frames in {out}")
    if fetched:
        print("note: these are images; the matcher needs landmark CSVs "
              "(see module docstring)")
    return 0 if fetched else 1


if __name__ == "__main__":
    raise SystemExit(main())
