#!/usr/bin/env python3
"""Image-level walkthrough on a manifest-backed dataset.

Runs the per-image half of the pipeline against one dataset: image-level
score tables under two metric configurations, rendered channel-mixture
heatmaps, precision-recall and relative-risk comparison against the
dataset's saliency maps, and a distribution comparison of the two score
tables.  Defaults to the miniature committed fixture so it runs offline
in seconds.

    python3 scripts/image_walkthrough.py --out runs/golden
"""

import argparse
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO / "src"))

from aismap.cli import main as aismap_main


def run_step(*argv, expect=0):
    argv = [str(a) for a in argv]
    print(f"$ aismap {' '.join(argv)}")
    code = aismap_main(argv)
    if code != expect:
        sys.exit(f"step failed with exit code {code}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--manifest",
                    default=str(REPO / "tests" / "golden" / "manifest.txt"))
    ap.add_argument("--out", default="runs/golden", help="run directory")
    ap.add_argument("--underlay",
                    default=str(REPO / "tests" / "golden"
                                / "underlay_small.npy"),
                    help="RGB underlay tensor; pass '' to render on white")
    ap.add_argument("--colormap", default="viridis")
    ap.add_argument("--images", default=None,
                    help="comma-separated image indices (default all)")
    args = ap.parse_args()

    root = Path(args.out)
    images = ["--images", args.images] if args.images else []
    underlay = ["--underlay", args.underlay] if args.underlay else []

    scores_a = root / "scores_default"
    scores_b = root / "scores_rank"
    run_step("image-ais", "--manifest", args.manifest, "--out", scores_a,
             *images)
    run_step("image-ais", "--manifest", args.manifest, "--out", scores_b,
             "--metric-variant", "spearman", *images)

    run_step("heatmap", "--manifest", args.manifest,
             "--out", root / "heatmaps", "--colormap", args.colormap,
             *images, *underlay)

    run_step("compare-saliency", "--manifest", args.manifest,
             "--out", root / "saliency", *images, *underlay)

    run_step("stats", "--ais-a", scores_a / "ais_image",
             "--ais-b", scores_b / "ais_image",
             "--out", root / "stats")

    print()
    run_step("report", root / "heatmaps", root / "saliency", root / "stats",
             "--out", root / "report.txt")
    print(f"\nartifacts under {root}/")


if __name__ == "__main__":
    main()
