"""Model registry and extraction recipes.

Each supported architecture is described by where its deepest
post-activation feature maps live and how its reference embedding is
defined.  The two VGG variants propagate pooled, channel-major-flattened
maps through their first two fully-connected stages and read the
embedding after the second rectifier; every other architecture reads the
spatial mean of the deepest maps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path


@dataclass(frozen=True)
class ModelSpec:
    """Static description of one supported architecture.

    `feature_module` names the submodule whose output is the deepest
    post-activation channel stack; for the fc-chain models it is the
    feature trunk minus its final max pool, handled specially.
    `relu_after` covers trunks whose last stage ends in a normalization
    layer, where the forward pass applies the rectifier functionally.
    """

    name: str
    tv_name: str
    mode: str  # "fc-chain" | "global-pool"
    feature_module: str
    channels: int
    relu_after: bool = False
    classifier: bool = True


_REGISTRY = {
    spec.name: spec
    for spec in (
        ModelSpec("vgg16", "vgg16", "fc-chain", "features", 512),
        ModelSpec("vgg19", "vgg19", "fc-chain", "features", 512),
        ModelSpec("inception-v3", "inception_v3", "global-pool",
                  "Mixed_7c", 2048),
        ModelSpec("resnet-152", "resnet152", "global-pool", "layer4", 2048),
        ModelSpec("densenet-161", "densenet161", "global-pool", "features",
                  2208, relu_after=True),
        ModelSpec("efficientnet-b3", "efficientnet_b3", "global-pool",
                  "features", 1536),
        ModelSpec("regnet-y-400mf", "regnet_y_400mf", "global-pool",
                  "trunk_output", 440),
        ModelSpec("resnext-50-32x4d", "resnext50_32x4d", "global-pool",
                  "layer4", 2048),
        # Self-supervised variant: the backbone matches resnet50 but the
        # published checkpoints are third party, so weights must come
        # from a file; there is no classification head to dump.
        ModelSpec("barlow-twins-resnet50", "resnet50", "global-pool",
                  "layer4", 2048, classifier=False),
    )
}

MODEL_NAMES = tuple(sorted(_REGISTRY))


def model_recipe(name: str) -> ModelSpec:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ValueError(
            f"unknown model {name!r}; choose one of {', '.join(MODEL_NAMES)}"
        ) from None


@dataclass(frozen=True)
class ExtractionRecipe:
    """One extraction run: which model, which weights, which images.

    `weights` is ``imagenet`` (torchvision's pretrained weights),
    ``random`` (fresh initialization, deterministic under `seed`), or a
    path to a saved state dict covering other training regimes.
    """

    model: str
    weights: str
    image_dir: Path
    out_dir: Path
    image_size: int = 224
    dataset_name: str = ""
    category: str = "uncategorized"
    seed: int = 0
    saliency: Path | None = None
    spec: ModelSpec = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "spec", model_recipe(self.model))
        object.__setattr__(self, "image_dir", Path(self.image_dir))
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        if not self.dataset_name:
            object.__setattr__(self, "dataset_name",
                               self.image_dir.name or "dataset")
        if self.image_size < 32:
            raise ValueError("image_size below 32 is not supported")
