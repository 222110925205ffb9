"""Command line: `aisx extract` and `aisx fixture`."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .extract import ExtractionError, run_extraction
from .fixture import write_fixture
from .recipes import MODEL_NAMES, ExtractionRecipe

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_IO = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aisx",
        description="Dump feature maps, weight bundles, reference "
                    "embeddings, and manifests from vision models.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="run a model over an image directory")
    p.add_argument("--model", required=True, choices=MODEL_NAMES)
    p.add_argument("--weights", default="imagenet",
                   help="imagenet, random, or a state-dict file path")
    p.add_argument("--images", required=True, help="image directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--image-size", type=int, default=224)
    p.add_argument("--dataset-name", default="")
    p.add_argument("--category", default="uncategorized")
    p.add_argument("--seed", type=int, default=0,
                   help="initialization seed for the random regime")
    p.add_argument("--saliency",
                   help="(n, H, W) saliency tensor to validate and "
                        "re-serialize alongside the extraction")
    p.add_argument("--batch-size", type=int, default=8)

    f = sub.add_parser("fixture",
                       help="regenerate the committed miniature fixtures")
    f.add_argument("--out", required=True, help="output directory")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "extract":
            recipe = ExtractionRecipe(
                model=args.model, weights=args.weights,
                image_dir=Path(args.images), out_dir=Path(args.out),
                image_size=args.image_size, dataset_name=args.dataset_name,
                category=args.category, seed=args.seed,
                saliency=Path(args.saliency) if args.saliency else None)
            manifest = run_extraction(recipe, batch_size=args.batch_size)
        else:
            manifest = write_fixture(Path(args.out))
    except (ExtractionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {manifest}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
