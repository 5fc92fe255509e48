#!/usr/bin/env python3
"""Converts MATLAB head annotations into the point files read by `crowdclip convert`.

Writes one `<image stem>.txt` per annotation file with an "x y" pair per line.
Handles the two common layouts:

  * `annPoints` (UCF-QNRF, UCF_CC_50): an N x 2 array.
  * `image_info` (ShanghaiTech): a nested struct whose first field is N x 2.

Usage:
  mat_to_points.py ANN_DIR OUT_DIR [--strip-prefix GT_] [--strip-suffix _ann]
  crowdclip convert --images IMG_DIR --annotations OUT_DIR --out m.jsonl --split test
"""

import argparse
import pathlib
import sys

import numpy as np
import scipy.io


def load_points(path):
  mat = scipy.io.loadmat(path)
  if "annPoints" in mat:
    pts = mat["annPoints"]
  elif "image_info" in mat:
    pts = mat["image_info"][0, 0][0, 0][0]
  else:
    keys = [k for k in mat if not k.startswith("__")]
    raise ValueError(f"{path}: no annPoints or image_info (keys: {keys})")
  pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
  return pts


def image_stem(path, prefix, suffix):
  stem = path.stem
  if prefix and stem.startswith(prefix):
    stem = stem[len(prefix):]
  if suffix and stem.endswith(suffix):
    stem = stem[: -len(suffix)]
  return stem


def main(argv):
  ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
  ap.add_argument("ann_dir", type=pathlib.Path)
  ap.add_argument("out_dir", type=pathlib.Path)
  ap.add_argument("--strip-prefix", default="GT_",
                  help="removed from annotation stems (ShanghaiTech: GT_)")
  ap.add_argument("--strip-suffix", default="_ann",
                  help="removed from annotation stems (UCF-QNRF: _ann)")
  args = ap.parse_args(argv)

  args.out_dir.mkdir(parents=True, exist_ok=True)
  files = sorted(args.ann_dir.glob("*.mat"))
  if not files:
    print(f"no .mat files in {args.ann_dir}", file=sys.stderr)
    return 2
  failures = 0
  for f in files:
    try:
      pts = load_points(f)
    except (ValueError, IndexError, KeyError) as e:
      print(f"error: {e}", file=sys.stderr)
      failures += 1
      continue
    out = args.out_dir / (image_stem(f, args.strip_prefix, args.strip_suffix) + ".txt")
    with open(out, "w") as fh:
      for x, y in pts:
        fh.write(f"{float(x)!r} {float(y)!r}\n")
  print(f"wrote {len(files) - failures} point files to {args.out_dir}")
  return 1 if failures else 0


if __name__ == "__main__":
  sys.exit(main(sys.argv[1:]))
