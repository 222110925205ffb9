"""Cross-referencing of importance heatmaps against external saliency
maps: per-image percentile binarization, precision-recall curves over a
sweep of predictor thresholds, and relative-risk analysis of top-percent
pixel sets.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import DegenerateMap, IoError, ShapeError
from .tensorio import write_archive

PREDICTOR_PERCENTILES = tuple(range(1, 100, 2))  # 50 thresholds
TARGET_PERCENTILES = (60, 70, 80, 90)
RR_LEVELS = (5, 10, 15)  # top-q% pixel sets


@dataclass(eq=False)
class BinaryMask:
    """Pixels strictly above the per-image percentile threshold."""

    pixels: np.ndarray  # bool (H, W)
    source_percentile: float
    threshold: float

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.pixels))


@dataclass(eq=False)
class PrCurve:
    """Precision and recall of binarized saliency predicting the
    binarized importance map, across the fixed predictor-threshold sweep.

    Empty predictor sets keep their point (precision 1.0 by convention,
    recall 0) and are marked in `empty_predictor` so curves always have
    the full 50 points.
    """

    target_percentile: float
    percentiles: np.ndarray  # (50,)
    precision: np.ndarray  # (50,)
    recall: np.ndarray  # (50,)
    empty_predictor: np.ndarray  # bool (50,)

    @property
    def points(self) -> list[tuple[float, float, float]]:
        return [(float(q), float(p), float(r)) for q, p, r in
                zip(self.percentiles, self.precision, self.recall)]


@dataclass(frozen=True)
class RrEntry:
    """Relative risk of comparison-relevant pixels inside versus outside
    the salient set, with the raw contingency counts.

    flag: "" normal, "infinite" when no outside pixel is relevant but
    some inside pixel is, "undefined" when the ratio is 0/0.
    """

    q: int
    rr: float
    sal_and_cr: int
    sal: int
    notsal_and_cr: int
    notsal: int
    flag: str = ""


@dataclass(eq=False)
class RrResult:
    entries: tuple[RrEntry, ...]

    def entry(self, q: int) -> RrEntry:
        for e in self.entries:
            if e.q == q:
                return e
        raise KeyError(q)


def _map_values(source) -> np.ndarray:
    values = np.asarray(getattr(source, "values", source), dtype=np.float64)
    if values.ndim != 2:
        raise ShapeError("expected a 2-D map", got=values.shape)
    if not np.all(np.isfinite(values)):
        raise DegenerateMap("map contains non-finite values")
    return values


def binarize(source, percentile: float) -> BinaryMask:
    """Threshold a map at its own linear-interpolation percentile.

    The comparison is strictly greater-than, so under heavy ties the
    positive set holds at most the nominal fraction of pixels.  A
    constant map has an empty positive set at every percentile and is
    rejected as degenerate.
    """
    if not 0.0 < percentile < 100.0:
        raise ValueError(f"percentile must lie in (0, 100), got {percentile}")
    values = _map_values(source)
    flat = values.ravel()
    if np.all(flat == flat[0]):
        raise DegenerateMap("constant map has no percentile structure")
    threshold = float(np.percentile(flat, percentile))
    return BinaryMask(pixels=values > threshold, source_percentile=float(percentile),
                      threshold=threshold)


def pr_curve(ais_map, sal_map, target_percentile: float) -> PrCurve:
    """PR curve with the importance mask as target and the binarized
    saliency map as predictor, swept over percentiles 1, 3, ..., 99."""
    target_values = _map_values(ais_map)
    sal_values = _map_values(sal_map)
    if target_values.shape != sal_values.shape:
        raise ShapeError("map dimensions differ", expected=target_values.shape,
                         got=sal_values.shape)
    target = binarize(target_values, target_percentile).pixels.ravel()
    n_target = int(target.sum())

    sal_flat = sal_values.ravel()
    if np.all(sal_flat == sal_flat[0]):
        raise DegenerateMap("constant saliency map")
    qs = np.asarray(PREDICTOR_PERCENTILES, dtype=np.float64)
    thresholds = np.percentile(sal_flat, qs)

    precision = np.empty(len(qs))
    recall = np.empty(len(qs))
    empty = np.zeros(len(qs), dtype=bool)
    for i, thr in enumerate(thresholds):
        predictor = sal_flat > thr
        n_pred = int(predictor.sum())
        hits = int(np.count_nonzero(predictor & target))
        if n_pred == 0:
            precision[i] = 1.0
            recall[i] = 0.0
            empty[i] = True
        else:
            precision[i] = hits / n_pred
            recall[i] = hits / n_target if n_target else 0.0
    return PrCurve(target_percentile=float(target_percentile), percentiles=qs,
                   precision=precision, recall=recall, empty_predictor=empty)


def relative_risk(ais_map, sal_map, q: int) -> RrEntry:
    """Relative risk of top-q% saliency pixels also being top-q%
    importance pixels, from the 2x2 contingency counts."""
    if q not in RR_LEVELS:
        raise ValueError(f"q must be one of {RR_LEVELS}, got {q}")
    cr_values = _map_values(ais_map)
    sal_values = _map_values(sal_map)
    if cr_values.shape != sal_values.shape:
        raise ShapeError("map dimensions differ", expected=cr_values.shape,
                         got=sal_values.shape)
    cr = binarize(cr_values, 100 - q).pixels
    sal = binarize(sal_values, 100 - q).pixels

    a = int(np.count_nonzero(sal & cr))
    b = int(np.count_nonzero(sal))
    c = int(np.count_nonzero(~sal & cr))
    d = int(np.count_nonzero(~sal))

    if b == 0 or d == 0:
        return RrEntry(q, float("nan"), a, b, c, d, flag="undefined")
    p_in = a / b
    p_out = c / d
    if p_out == 0.0:
        if p_in == 0.0:
            return RrEntry(q, float("nan"), a, b, c, d, flag="undefined")
        return RrEntry(q, float("inf"), a, b, c, d, flag="infinite")
    return RrEntry(q, p_in / p_out, a, b, c, d)


def relative_risk_all(ais_map, sal_map, levels=RR_LEVELS) -> RrResult:
    return RrResult(entries=tuple(relative_risk(ais_map, sal_map, q)
                                  for q in levels))


def mask_outline(mask: np.ndarray) -> np.ndarray:
    """Boundary pixels of a binary mask (members with a non-member
    4-neighbor, image border counting as outside)."""
    mask = np.asarray(mask, dtype=bool)
    eroded = ndimage.binary_erosion(mask, border_value=0)
    return mask & ~eroded


def _format_rr(entry: RrEntry) -> str:
    if entry.flag == "infinite":
        return "inf"
    if entry.flag == "undefined":
        return "nan"
    return f"{entry.rr:.2f}"


def overlay_contours(ais_map, sal_map, path: str | Path,
                     underlay: np.ndarray | None = None,
                     levels=RR_LEVELS) -> RrResult:
    """Render both maps' top-percent contours over the underlay.

    Importance contours draw in red, saliency in blue, smaller (more
    selective) levels with stronger color.  Per-level relative risk is
    printed in a margin strip, and the raw binary masks are dumped next
    to the PNG for quantitative follow-up.  Returns the RR entries used
    for the labels.
    """
    from PIL import Image, ImageDraw

    from .heatmap import normalize_underlay

    path = Path(path)
    cr_values = _map_values(ais_map)
    sal_values = _map_values(sal_map)
    if cr_values.shape != sal_values.shape:
        raise ShapeError("map dimensions differ", expected=cr_values.shape,
                         got=sal_values.shape)

    if underlay is None:
        canvas = np.full(cr_values.shape + (3,), 0.92)
    else:
        canvas = normalize_underlay(underlay).copy()
        if canvas.shape[:2] != cr_values.shape:
            raise ShapeError("underlay dimensions differ from maps",
                             expected=cr_values.shape, got=canvas.shape[:2])

    levels = tuple(sorted(levels, reverse=True))  # strongest color drawn last
    strengths = {q: 1.0 - i * 0.3 for i, q in enumerate(sorted(levels))}
    masks: dict[str, np.ndarray] = {}
    rr = relative_risk_all(cr_values, sal_values, levels=sorted(levels))
    for q in levels:
        cr = binarize(cr_values, 100 - q).pixels
        sal = binarize(sal_values, 100 - q).pixels
        masks[f"cr_{q:02d}"] = cr.astype(np.float64)
        masks[f"sal_{q:02d}"] = sal.astype(np.float64)
        s = strengths[q]
        canvas[mask_outline(sal)] = (1.0 - s, 1.0 - s, s)  # blue family
        canvas[mask_outline(cr)] = (s, 1.0 - s, 1.0 - s)  # red family

    margin = 18
    h, w = cr_values.shape
    out = np.ones((h + margin, w, 3))
    out[:h] = canvas
    img = Image.fromarray((np.clip(out, 0.0, 1.0) * 255.0).round().astype(np.uint8))
    draw = ImageDraw.Draw(img)
    label = "RR " + "  ".join(f"{e.q}%:{_format_rr(e)}" for e in rr.entries)
    draw.text((2, h + 2), label, fill=(0, 0, 0))
    try:
        img.save(path, format="PNG")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    write_archive(masks, path.with_suffix(".npz"))
    return rr
