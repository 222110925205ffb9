"""Regeneration of the committed miniature network fixtures.

A fixed torch seed drives every draw, so the files are reproducible
bit for bit on a given torch build.  Two fixture sets are written: a
main set whose pooled maps collapse to 1x1 (4 images, 8 channels, 3x3
maps, chain 8 -> 6 -> 5) and a wide-map set whose pooled spatial area is
4 (3 images, 5 channels, 5x5 maps, chain 20 -> 4 -> 3), which pins the
channel-major flatten order.  The draw order below is part of the
contract; reordering it changes every downstream value.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

FIXTURE_SEED = 20240811

_MAIN_MANIFEST = """\
# miniature randomly-initialized network fixture (committed)
dataset_name = golden-small
category = synthetic
n_images = 4
image_ids = img0,img1,img2,img3
architecture_mode = fc-chain
feature_map_count = 8
feature_map_height = 3
feature_map_width = 3
image_render_size = 16
pool_window = 2
pool_stride = 2
activations = acts_small.npy
weights = weights_small.npz
judgments = judgments_small.npy
class_probs = class_probs_small.npy
saliency = saliency_small.npy
embeddings_golden = embeddings_small.npy
"""

_WIDE_MANIFEST = """\
# wide-map fixture: pooled spatial area > 1, pins the flatten order
dataset_name = golden-wide
category = synthetic
n_images = 3
image_ids = w0,w1,w2
architecture_mode = fc-chain
feature_map_count = 5
feature_map_height = 5
feature_map_width = 5
image_render_size = 16
pool_window = 2
pool_stride = 2
activations = acts_wide.npy
weights = weights_wide.npz
embeddings_golden = embeddings_wide.npy
"""


def _forward(acts, w1, b1, w2, b2):
    x = F.max_pool2d(acts, kernel_size=2, stride=2)
    x = torch.flatten(x, start_dim=1)
    x1 = F.relu(F.linear(x, w1, b1))
    return F.relu(F.linear(x1, w2, b2))


def write_fixture(out_dir: Path) -> Path:
    """Write both fixture sets under `out_dir`; returns the main
    manifest path."""
    out = Path(out_dir)
    layout = out / "layout"
    layout.mkdir(parents=True, exist_ok=True)

    torch.manual_seed(FIXTURE_SEED)

    acts = F.relu(torch.randn(4, 8, 3, 3))
    w1 = torch.randn(6, 8) * 0.5
    b1 = torch.randn(6) * 0.1
    w2 = torch.randn(5, 6) * 0.5
    b2 = torch.randn(5) * 0.1
    emb = _forward(acts, w1, b1, w2, b2)

    judg = torch.rand(4, 4)
    judg = 0.5 * (judg + judg.T)
    judg.fill_diagonal_(1.0)
    probs = F.softmax(torch.randn(4, 10), dim=1)
    sal = torch.abs(torch.randn(4, 16, 16))
    underlay = torch.rand(4, 16, 16, 3)

    acts_wide = F.relu(torch.randn(3, 5, 5, 5))
    w1w = torch.randn(4, 20) * 0.5
    b1w = torch.randn(4) * 0.1
    w2w = torch.randn(3, 4) * 0.5
    b2w = torch.randn(3) * 0.1
    emb_wide = _forward(acts_wide, w1w, b1w, w2w, b2w)

    np.save(out / "acts_small.npy", acts.numpy())
    np.savez(out / "weights_small.npz", W1=w1.numpy(), b1=b1.numpy(),
             W2=w2.numpy(), b2=b2.numpy())
    np.save(out / "embeddings_small.npy", emb.numpy())
    np.save(out / "judgments_small.npy", judg.numpy())
    np.save(out / "class_probs_small.npy", probs.numpy())
    np.save(out / "saliency_small.npy", sal.numpy())
    np.save(out / "underlay_small.npy", underlay.numpy())
    (out / "manifest.txt").write_text(_MAIN_MANIFEST, encoding="utf-8")

    np.save(layout / "acts_wide.npy", acts_wide.numpy())
    np.savez(layout / "weights_wide.npz", W1=w1w.numpy(), b1=b1w.numpy(),
             W2=w2w.numpy(), b2=b2w.numpy())
    np.save(layout / "embeddings_wide.npy", emb_wide.numpy())
    (layout / "manifest.txt").write_text(_WIDE_MANIFEST, encoding="utf-8")

    return out / "manifest.txt"
