"""Explanation heatmaps: convex combinations of upsampled feature maps
weighted by rectified, sum-normalized image-level importance scores, plus
the cross-model match score and maxEntropy diagnostics and PNG rendering.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import IoError, NoPositiveAis, ShapeError
from .similarity import CorrResult, entropy, pearson_flagged
from .tensorio import write_tensor

DEFAULT_COLORMAP = "viridis"
UNDERLAY_ALPHA = 0.55  # weight of the colormapped layer when blending


@dataclass(eq=False)
class Heatmap:
    """Raw composed map plus the weights that built it.

    `values` stays unnormalized; display scaling happens only in
    `render`, so threshold analyses never depend on render settings.
    """

    values: np.ndarray  # (H_img, W_img)
    weights_used: np.ndarray  # (K,) nonnegative, sums to 1
    image_id: str = ""


def ais_weights(ais_row: np.ndarray) -> np.ndarray:
    """Rectified and sum-normalized weights from one score row.

    Negative scores are clamped to zero before normalizing.  A row with
    no positive entry has no defined heatmap and raises NoPositiveAis
    rather than silently falling back to uniform weights.
    """
    row = np.asarray(ais_row, dtype=np.float64).ravel()
    if row.size == 0:
        raise ShapeError("empty score row")
    clipped = np.maximum(row, 0.0)
    total = clipped.sum()
    if total == 0.0:
        raise NoPositiveAis()
    return clipped / total


def _axis_samples(n_src: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Edge-clamped source coordinates for half-pixel-center resampling."""
    scale = n_src / n_out
    centers = (np.arange(n_out) + 0.5) * scale - 0.5
    centers = np.clip(centers, 0.0, n_src - 1.0)
    lo = np.floor(centers).astype(np.intp)
    hi = np.minimum(lo + 1, n_src - 1)
    return lo, hi, centers - lo


def bilinear_upsample(channel: np.ndarray, out_size: int) -> np.ndarray:
    """Bilinear resample of one feature map to out_size x out_size.

    Sample centers follow the align-corners-false convention, clamped at
    the edges, so a constant input stays exactly constant.
    """
    src = np.asarray(channel, dtype=np.float64)
    if src.ndim != 2:
        raise ShapeError("expected a 2-D feature map", got=src.shape)
    if out_size < 1:
        raise ValueError("output size must be positive")
    ylo, yhi, fy = _axis_samples(src.shape[0], out_size)
    xlo, xhi, fx = _axis_samples(src.shape[1], out_size)
    top = src[ylo[:, None], xlo] * (1.0 - fx) + src[ylo[:, None], xhi] * fx
    bottom = src[yhi[:, None], xlo] * (1.0 - fx) + src[yhi[:, None], xhi] * fx
    return top * (1.0 - fy[:, None]) + bottom * fy[:, None]


def compose(acts_t: np.ndarray, weights: np.ndarray, out_size: int,
            image_id: str = "") -> Heatmap:
    """Pixelwise convex combination of the upsampled feature maps.

    Every output pixel is clamped into the per-pixel range of the
    upsampled channels, which makes the convex-combination bound hold
    exactly despite accumulation rounding.
    """
    acts_t = np.asarray(acts_t, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64).ravel()
    if acts_t.ndim != 3:
        raise ShapeError("expected (K, H_f, W_f) activations for one image",
                         got=acts_t.shape)
    if weights.shape[0] != acts_t.shape[0]:
        raise ShapeError("weight count does not match channel count",
                         expected=(acts_t.shape[0],), got=weights.shape)

    total = np.zeros((out_size, out_size))
    lower = np.full((out_size, out_size), np.inf)
    upper = np.full((out_size, out_size), -np.inf)
    for k in range(acts_t.shape[0]):
        up = bilinear_upsample(acts_t[k], out_size)
        np.minimum(lower, up, out=lower)
        np.maximum(upper, up, out=upper)
        if weights[k] != 0.0:
            total += weights[k] * up
    values = np.clip(total, lower, upper)
    return Heatmap(values=values, weights_used=weights, image_id=image_id)


def match_score(a: Heatmap | np.ndarray, b: Heatmap | np.ndarray) -> CorrResult:
    """Product-moment correlation of two maps over flattened pixels."""
    va = np.asarray(getattr(a, "values", a), dtype=np.float64)
    vb = np.asarray(getattr(b, "values", b), dtype=np.float64)
    if va.shape != vb.shape:
        raise ShapeError("heatmap dimensions differ", expected=va.shape, got=vb.shape)
    return pearson_flagged(va.ravel(), vb.ravel())


def max_entropy(probs_a: np.ndarray, probs_b: np.ndarray) -> float:
    """The larger of the two post-softmax entropies (nats)."""
    return max(entropy(probs_a), entropy(probs_b))


def _display_normalize(values: np.ndarray) -> np.ndarray:
    lo = float(values.min())
    hi = float(values.max())
    if hi == lo:
        return np.full_like(values, 0.5)
    return (values - lo) / (hi - lo)


def normalize_underlay(underlay: np.ndarray) -> np.ndarray:
    """Coerce an RGB tensor to (H, W, 3) floats in [0, 1].

    Accepts channel-first or channel-last layout; 0..255 data is
    rescaled.
    """
    rgb = np.asarray(underlay, dtype=np.float64)
    if rgb.ndim != 3:
        raise ShapeError("underlay must be a rank-3 RGB tensor", got=rgb.shape)
    if rgb.shape[0] == 3 and rgb.shape[2] != 3:
        rgb = np.moveaxis(rgb, 0, 2)
    if rgb.shape[2] != 3:
        raise ShapeError("underlay needs a 3-channel axis", got=rgb.shape)
    if rgb.max(initial=0.0) > 1.5:
        rgb = rgb / 255.0
    return np.clip(rgb, 0.0, 1.0)


def colorize(values: np.ndarray, colormap: str = DEFAULT_COLORMAP) -> np.ndarray:
    """Min-max display normalization through a named colormap; returns
    (H, W, 3) floats in [0, 1].  Constant maps render mid-colormap."""
    import matplotlib

    cmap = matplotlib.colormaps[colormap]
    return np.asarray(cmap(_display_normalize(values)))[..., :3]


def render(hm: Heatmap, path: str | Path, underlay: np.ndarray | None = None,
           colormap: str = DEFAULT_COLORMAP) -> None:
    """Write the display PNG and the raw-value sidecar tensor.

    The sidecar (same stem, .npy) round-trips the exact values; the PNG
    is display-only.  With an underlay the colormapped layer is alpha
    blended over it.
    """
    from PIL import Image

    path = Path(path)
    rgb = colorize(hm.values, colormap)
    if underlay is not None:
        base = normalize_underlay(underlay)
        if base.shape[:2] != rgb.shape[:2]:
            raise ShapeError("underlay dimensions differ from heatmap",
                             expected=rgb.shape[:2], got=base.shape[:2])
        rgb = UNDERLAY_ALPHA * rgb + (1.0 - UNDERLAY_ALPHA) * base
    img = Image.fromarray((np.clip(rgb, 0.0, 1.0) * 255.0).round().astype(np.uint8))
    try:
        img.save(path, format="PNG")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    write_tensor(hm.values, path.with_suffix(".npy"), dtype="<f8")
