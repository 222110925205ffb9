"""Propagation of (possibly masked) deepest-layer feature maps to the
embedding layer.

Two architecture modes are supported.  In ``fc-chain`` mode each image's
channel volume is max-pooled, flattened channel-major, and pushed through
two rectified affine stages; the embedding is the post-rectifier output of
the second stage (a pre-rectifier variant is available via
``penultimate_relu=False``).  In ``global-pool`` mode the embedding is the
spatial mean of each channel.

Masking zeroes whole channels before pooling.  Because both pools act
per-channel, masking pre-pool equals masking post-pool exactly, so only
pre-pool activations need to be stored.

`embed_masked_sweep` runs the exclude-one-channel sweep with an
incremental fast path: the first affine stage's pre-activations are
computed once and a per-channel column-slice correction is subtracted for
each mask.  The rectifier between the stages breaks pure low-rank
updates, so the second stage is re-run in full; correctness of the fast
path against naive recomputation is the module's central test property.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import EmptyMask, ShapeError
from .tensorio import WeightBundle

MODES = ("fc-chain", "global-pool")


@dataclass(frozen=True)
class MaskSpec:
    """Which channels to suppress, and for which image rows.

    kind is one of ``none``, ``exclude_one``, ``retain_set``,
    ``single_image``; the latter masks channel `channel` for image `image`
    only, leaving every other row at the unmasked embedding.
    """

    kind: str = "none"
    channel: int | None = None
    image: int | None = None
    retained: frozenset[int] | None = None

    @staticmethod
    def none() -> "MaskSpec":
        return MaskSpec("none")

    @staticmethod
    def exclude_one(channel: int) -> "MaskSpec":
        return MaskSpec("exclude_one", channel=channel)

    @staticmethod
    def retain(channels) -> "MaskSpec":
        retained = frozenset(int(c) for c in channels)
        return MaskSpec("retain_set", retained=retained)

    @staticmethod
    def single_image(image: int, channel: int) -> "MaskSpec":
        return MaskSpec("single_image", channel=channel, image=image)

    def validate(self, n_images: int, n_channels: int) -> None:
        if self.kind not in ("none", "exclude_one", "retain_set", "single_image"):
            raise ValueError(f"unknown mask kind {self.kind!r}")
        if self.kind in ("exclude_one", "single_image"):
            if not 0 <= int(self.channel) < n_channels:
                raise IndexError(f"channel {self.channel} out of range [0, {n_channels})")
        if self.kind == "single_image":
            if not 0 <= int(self.image) < n_images:
                raise IndexError(f"image {self.image} out of range [0, {n_images})")
        if self.kind == "retain_set":
            if not self.retained:
                raise EmptyMask("retain_set with no channels")
            bad = [c for c in self.retained if not 0 <= c < n_channels]
            if bad:
                raise IndexError(f"retained channels out of range: {sorted(bad)}")
        if self.kind == "exclude_one" and n_channels == 1:
            raise EmptyMask("excluding the only channel leaves an all-masked model")

    def excluded_channels(self, n_channels: int) -> np.ndarray:
        """Channel indices this mask zeroes (for single_image: in row `image`)."""
        if self.kind == "none":
            return np.empty(0, dtype=np.intp)
        if self.kind in ("exclude_one", "single_image"):
            return np.array([self.channel], dtype=np.intp)
        keep = np.zeros(n_channels, dtype=bool)
        keep[list(self.retained)] = True
        return np.flatnonzero(~keep)


def max_pool(acts: np.ndarray, window: int = 2, stride: int = 2) -> np.ndarray:
    """Per-channel spatial max pool of an (n, K, H, W) volume."""
    acts = np.asarray(acts, dtype=np.float64)
    if acts.ndim != 4:
        raise ShapeError("expected (n, K, H, W) activations", got=acts.shape)
    if acts.shape[2] < window or acts.shape[3] < window:
        raise ShapeError("feature maps smaller than the pool window", got=acts.shape)
    v = sliding_window_view(acts, (window, window), axis=(2, 3))
    v = v[:, :, ::stride, ::stride]
    return v.max(axis=(-2, -1))


def global_pool(acts: np.ndarray) -> np.ndarray:
    """Per-channel spatial mean: (n, K, H, W) -> (n, K)."""
    acts = np.asarray(acts, dtype=np.float64)
    if acts.ndim != 4:
        raise ShapeError("expected (n, K, H, W) activations", got=acts.shape)
    return acts.mean(axis=(2, 3))


def _check_fc_inputs(acts: np.ndarray, weights: WeightBundle) -> tuple[int, int]:
    n, k, hf, wf = acts.shape
    hp = (hf - weights.pool_window) // weights.pool_stride + 1
    wp = (wf - weights.pool_window) // weights.pool_stride + 1
    flat = k * hp * wp
    if weights.W1.shape[1] != flat:
        raise ShapeError(
            "W1 columns do not match channel-major flattened pooled maps",
            expected=("d1", flat), got=weights.W1.shape)
    return flat, hp * wp


def _fc_stage2(x1: np.ndarray, weights: WeightBundle, penultimate_relu: bool) -> np.ndarray:
    z2 = x1 @ weights.W2.T + weights.b2
    return np.maximum(z2, 0.0) if penultimate_relu else z2


def _fc_forward(x_flat: np.ndarray, weights: WeightBundle, penultimate_relu: bool) -> np.ndarray:
    z1 = x_flat @ weights.W1.T + weights.b1
    return _fc_stage2(np.maximum(z1, 0.0), weights, penultimate_relu)


def embed(acts: np.ndarray, weights: WeightBundle | None, mode: str,
          mask: MaskSpec = MaskSpec.none(), *,
          penultimate_relu: bool = True) -> np.ndarray:
    """Embedding matrix (n, d) for the given mask.

    fc-chain: zero masked channels, max-pool, flatten channel-major, two
    rectified affine stages.  global-pool: spatial mean per channel with
    masked channels zeroed.  d is d2 in fc-chain mode, K in global-pool.
    """
    acts = np.asarray(acts, dtype=np.float64)
    if acts.ndim != 4:
        raise ShapeError("expected (n, K, H, W) activations", got=acts.shape)
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    if mode == "fc-chain" and weights is None:
        raise ShapeError("fc-chain mode requires a weight bundle")
    n, k = acts.shape[:2]
    mask.validate(n, k)

    excluded = mask.excluded_channels(k)
    if excluded.size == k:
        raise EmptyMask("mask removes every channel")

    if excluded.size:
        masked = acts.copy()
        if mask.kind == "single_image":
            masked[mask.image, excluded] = 0.0
        else:
            masked[:, excluded] = 0.0
    else:
        masked = acts

    if mode == "global-pool":
        return global_pool(masked)

    _check_fc_inputs(acts, weights)
    pooled = max_pool(masked, weights.pool_window, weights.pool_stride)
    x = pooled.reshape(n, -1)  # C-order reshape == channel-major flatten
    return _fc_forward(x, weights, penultimate_relu)


def embed_masked_sweep(acts: np.ndarray, weights: WeightBundle | None, mode: str,
                       scope: int | None = None, *,
                       penultimate_relu: bool = True,
                       fast: bool = True) -> Iterator[tuple[int, np.ndarray]]:
    """Yield (k, embedding) for the exclude-one sweep, k ascending.

    With ``scope=None`` channel k is masked in every image and a full
    (n, d) matrix is yielded; with ``scope=t`` only image t is masked and
    the yielded array is that image's embedding row.  Each result equals
    the naive `embed` call for the same mask to within 1e-6 elementwise;
    ``fast=False`` forces the naive recomputation.
    """
    acts = np.asarray(acts, dtype=np.float64)
    if acts.ndim != 4:
        raise ShapeError("expected (n, K, H, W) activations", got=acts.shape)
    n, k_total = acts.shape[:2]
    if k_total < 2:
        raise EmptyMask("sweep needs at least 2 channels")
    if scope is not None and not 0 <= scope < n:
        raise IndexError(f"image {scope} out of range [0, {n})")

    if not fast:
        for k in range(k_total):
            mask = (MaskSpec.exclude_one(k) if scope is None
                    else MaskSpec.single_image(scope, k))
            full = embed(acts, weights, mode, mask, penultimate_relu=penultimate_relu)
            yield k, (full if scope is None else full[scope])
        return

    if mode == "global-pool":
        pooled = global_pool(acts if scope is None else acts[scope:scope + 1])
        for k in range(k_total):
            out = pooled.copy()
            out[:, k] = 0.0
            yield k, (out if scope is None else out[0])
        return

    if mode != "fc-chain":
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    if weights is None:
        raise ShapeError("fc-chain mode requires a weight bundle")
    _, per_channel = _check_fc_inputs(acts, weights)

    sub = acts if scope is None else acts[scope:scope + 1]
    pooled = max_pool(sub, weights.pool_window, weights.pool_stride)
    x = pooled.reshape(sub.shape[0], -1)
    z1 = x @ weights.W1.T + weights.b1
    for k in range(k_total):
        cols = slice(k * per_channel, (k + 1) * per_channel)
        z1_k = z1 - x[:, cols] @ weights.W1[:, cols].T
        out = _fc_stage2(np.maximum(z1_k, 0.0), weights, penultimate_relu)
        yield k, (out if scope is None else out[0])


def retain_prefix_embeddings(acts: np.ndarray, weights: WeightBundle | None,
                             mode: str, order: np.ndarray, *,
                             penultimate_relu: bool = True) -> Iterator[np.ndarray]:
    """Yield embeddings for the growing retained sets order[:1], order[:2], ...

    Incremental companion to ``MaskSpec.retain``: the first affine stage's
    pre-activations are accumulated one channel at a time, so each step
    costs one column-slice product instead of a full stage-one multiply.
    """
    acts = np.asarray(acts, dtype=np.float64)
    order = np.asarray(order, dtype=np.intp)
    n, k_total = acts.shape[:2]
    if order.size == 0 or order.size > k_total or len(set(order.tolist())) != order.size:
        raise ValueError("order must be a non-empty set of distinct channel indices")

    if mode == "global-pool":
        pooled = global_pool(acts)
        current = np.zeros_like(pooled)
        for k in order:
            current[:, k] = pooled[:, k]
            yield current.copy()
        return

    if weights is None:
        raise ShapeError("fc-chain mode requires a weight bundle")
    _, per_channel = _check_fc_inputs(acts, weights)
    pooled = max_pool(acts, weights.pool_window, weights.pool_stride)
    x = pooled.reshape(n, -1)
    z1 = np.broadcast_to(weights.b1, (n, weights.d1)).copy()
    for k in order:
        cols = slice(k * per_channel, (k + 1) * per_channel)
        z1 = z1 + x[:, cols] @ weights.W1[:, cols].T
        yield _fc_stage2(np.maximum(z1, 0.0), weights, penultimate_relu)
