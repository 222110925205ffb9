"""Run a model over an image directory and dump interchange artifacts.

The run is staged: images are loaded, weights resolved, and every tensor
computed before anything touches the output directory, so an unresolvable
model or a bad saliency file fails cleanly with no partial artifacts.
Inference runs in eval mode with gradients off; repeated runs of the
same recipe produce bytewise-identical files.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image
from torch import nn
from torchvision import models

from .recipes import ExtractionRecipe, ModelSpec

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)
IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".tiff", ".webp")


class ExtractionError(RuntimeError):
    """Recipe cannot be executed as given."""


class WeightResolutionError(ExtractionError):
    """Model weights could not be obtained; nothing was written."""


def load_images(image_dir: Path, size: int) -> tuple[list[str], np.ndarray]:
    """Sorted directory scan to an (n, size, size, 3) float array in
    [0, 1]; ids are the file stems."""
    image_dir = Path(image_dir)
    if not image_dir.is_dir():
        raise ExtractionError(f"image directory not found: {image_dir}")
    files = sorted(p for p in image_dir.iterdir()
                   if p.suffix.lower() in IMAGE_EXTENSIONS)
    if not files:
        raise ExtractionError(f"no images under {image_dir} "
                              f"(looked for {', '.join(IMAGE_EXTENSIONS)})")
    ids, frames = [], []
    for path in files:
        stem = path.stem
        if any(ch in stem for ch in ", =\t"):
            raise ExtractionError(
                f"image name {stem!r} contains characters the manifest "
                "grammar reserves (comma, equals, whitespace)")
        ids.append(stem)
        with Image.open(path) as img:
            frame = img.convert("RGB").resize((size, size),
                                              Image.Resampling.BILINEAR)
        frames.append(np.asarray(frame, dtype=np.float32) / 255.0)
    if len(set(ids)) != len(ids):
        raise ExtractionError("duplicate image stems in the directory")
    return ids, np.stack(frames)


def resolve_model(spec: ModelSpec, weights: str, seed: int) -> nn.Module:
    """Build the network and load weights, failing before any output
    exists.  `weights` is imagenet, random, or a state-dict path."""
    torch.manual_seed(seed)
    if weights == "random":
        model = models.get_model(spec.tv_name, weights=None)
    elif weights == "imagenet":
        if not spec.classifier:
            raise WeightResolutionError(
                f"{spec.name} has no torchvision pretrained weights; pass "
                "a checkpoint file for its training regime")
        try:
            enum = models.get_model_weights(spec.tv_name).DEFAULT
            model = models.get_model(spec.tv_name, weights=enum)
        except Exception as exc:
            raise WeightResolutionError(
                f"could not resolve pretrained weights for {spec.tv_name}: "
                f"{exc}") from exc
    else:
        path = Path(weights)
        if not path.is_file():
            raise WeightResolutionError(f"weight file not found: {path}")
        model = models.get_model(spec.tv_name, weights=None)
        try:
            state = torch.load(path, map_location="cpu", weights_only=True)
        except Exception as exc:
            raise WeightResolutionError(
                f"could not read state dict {path}: {exc}") from exc
        for key in ("state_dict", "model"):
            if isinstance(state, dict) and isinstance(state.get(key), dict):
                state = state[key]
        if not isinstance(state, dict):
            raise WeightResolutionError(f"{path} does not hold a state dict")
        state = {k.removeprefix("module."): v for k, v in state.items()}
        own = model.state_dict()
        usable = {k: v for k, v in state.items()
                  if k in own and tuple(v.shape) == tuple(own[k].shape)}
        if len(usable) < sum(1 for _ in own) / 2:
            raise WeightResolutionError(
                f"{path} matches only {len(usable)} of {len(own)} tensors "
                f"of {spec.tv_name}; wrong architecture?")
        model.load_state_dict(usable, strict=False)
    model.eval()
    return model


def _check_saliency(path: Path, n_images: int, size: int) -> np.ndarray:
    try:
        sal = np.load(path)
    except Exception as exc:
        raise ExtractionError(f"could not read saliency file {path}: {exc}")
    if sal.shape != (n_images, size, size):
        raise ExtractionError(
            f"saliency must be pre-registered to ({n_images}, {size}, "
            f"{size}), got {sal.shape}")
    if not np.all(np.isfinite(sal)) or np.any(sal < 0):
        raise ExtractionError("saliency values must be finite and "
                              "nonnegative")
    return sal.astype(np.float32)


def _forward_fc_chain(model: nn.Module, batch: torch.Tensor, spec: ModelSpec):
    pool = model.features[-1]
    if not (isinstance(pool, nn.MaxPool2d) and pool.kernel_size == 2
            and pool.stride == 2):
        raise ExtractionError(
            f"{spec.name}: expected the trunk to end in a 2x2/2 max pool, "
            f"found {type(pool).__name__}")
    acts = model.features[:-1](batch)
    pooled = model.avgpool(pool(acts))
    flat = torch.flatten(pooled, 1)
    first = model.classifier[0]
    if flat.shape[1] != first.in_features:
        raise ExtractionError(
            f"flattened pooled maps have {flat.shape[1]} values but the "
            f"first fc stage expects {first.in_features}; use the native "
            "input size (224)")
    emb = model.classifier[:5](flat)
    logits = model.classifier(flat)
    return acts, emb, logits


def _forward_global_pool(model: nn.Module, batch: torch.Tensor,
                         spec: ModelSpec):
    captured = {}
    module = dict(model.named_modules()).get(spec.feature_module)
    if module is None:
        raise ExtractionError(
            f"{spec.name}: module {spec.feature_module!r} not found")
    handle = module.register_forward_hook(
        lambda m, inputs, output: captured.__setitem__("maps", output))
    try:
        logits = model(batch)
    finally:
        handle.remove()
    maps = captured["maps"]
    if spec.relu_after:
        maps = F.relu(maps)
    emb = maps.mean(dim=(2, 3))
    return maps, emb, logits if spec.classifier else None


def _run_model(spec: ModelSpec, model: nn.Module, rgb: np.ndarray,
               batch_size: int):
    mean = torch.tensor(IMAGENET_MEAN).view(1, 3, 1, 1)
    std = torch.tensor(IMAGENET_STD).view(1, 3, 1, 1)
    frames = torch.from_numpy(rgb).permute(0, 3, 1, 2)
    frames = (frames - mean) / std

    acts, embs, logits = [], [], []
    with torch.no_grad():
        for start in range(0, frames.shape[0], batch_size):
            batch = frames[start:start + batch_size]
            if spec.mode == "fc-chain":
                a, e, lg = _forward_fc_chain(model, batch, spec)
            else:
                a, e, lg = _forward_global_pool(model, batch, spec)
            acts.append(a)
            embs.append(e)
            if lg is not None:
                logits.append(lg)

    acts = torch.cat(acts).numpy().astype(np.float32)
    embs = torch.cat(embs).numpy().astype(np.float32)
    if acts.shape[1] != spec.channels:
        raise ExtractionError(
            f"{spec.name}: expected {spec.channels} feature maps, the "
            f"forward pass produced {acts.shape[1]}")
    probs = None
    if logits:
        probs = F.softmax(torch.cat(logits), dim=1).numpy().astype(np.float32)
    return acts, embs, probs


def _manifest_text(recipe: ExtractionRecipe, ids: list[str],
                   acts: np.ndarray, lines_extra: list[str]) -> str:
    spec = recipe.spec
    lines = [
        f"# extracted from {spec.name} ({recipe.weights} weights)",
        f"dataset_name = {recipe.dataset_name}",
        f"category = {recipe.category}",
        f"n_images = {len(ids)}",
        f"image_ids = {','.join(ids)}",
        f"architecture_mode = {spec.mode}",
        f"feature_map_count = {acts.shape[1]}",
        f"feature_map_height = {acts.shape[2]}",
        f"feature_map_width = {acts.shape[3]}",
        f"image_render_size = {recipe.image_size}",
    ]
    if spec.mode == "fc-chain":
        lines += ["pool_window = 2", "pool_stride = 2"]
    lines.append("activations = acts.npy")
    lines += lines_extra
    lines.append("embeddings_golden = embeddings_golden.npy")
    return "\n".join(lines) + "\n"


def run_extraction(recipe: ExtractionRecipe, batch_size: int = 8) -> Path:
    """Execute one recipe; returns the path of the written manifest."""
    spec = recipe.spec
    ids, rgb = load_images(recipe.image_dir, recipe.image_size)
    model = resolve_model(spec, recipe.weights, recipe.seed)
    saliency = None
    if recipe.saliency is not None:
        saliency = _check_saliency(Path(recipe.saliency), len(ids),
                                   recipe.image_size)
    acts, embs, probs = _run_model(spec, model, rgb, batch_size)

    out = recipe.out_dir
    out.mkdir(parents=True, exist_ok=True)
    np.save(out / "acts.npy", acts)
    np.save(out / "embeddings_golden.npy", embs)
    np.save(out / "rgb.npy", rgb.astype(np.float32))
    extra = []
    if spec.mode == "fc-chain":
        w1, w2 = model.classifier[0], model.classifier[3]
        np.savez(out / "weights.npz",
                 W1=w1.weight.detach().numpy().astype(np.float32),
                 b1=w1.bias.detach().numpy().astype(np.float32),
                 W2=w2.weight.detach().numpy().astype(np.float32),
                 b2=w2.bias.detach().numpy().astype(np.float32))
        extra.append("weights = weights.npz")
    if probs is not None:
        np.save(out / "class_probs.npy", probs)
        extra.append("class_probs = class_probs.npy")
    if saliency is not None:
        np.save(out / "saliency.npy", saliency)
        extra.append("saliency = saliency.npy")

    manifest = out / "manifest.txt"
    manifest.write_text(_manifest_text(recipe, ids, acts, extra),
                        encoding="utf-8")
    return manifest
