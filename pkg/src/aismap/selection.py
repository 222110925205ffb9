"""Alignment-importance scoring of feature maps, greedy subset selection,
and repeated cross-validated evaluation against human similarity judgments.

A feature map's importance is the drop in second-order isomorphism caused
by masking it: score_k = rho(Z, H) - rho(Z_without_k, H), where Z is the
condensed model-similarity vector and H its human counterpart.  Positive
scores mark alignment-relevant features.  The similarity metric that
builds Z is configurable separately for the unmasked baseline and the
masked or retained variants, because mixed conventions are common in
practice; `MetricConfig.consistent` pins both to one metric.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataWarning, MaskTooSmall, ShapeError, ZeroVectorError
from .masking import MaskSpec, embed, embed_masked_sweep, retain_prefix_embeddings
from .similarity import (METRICS, CorrResult, condense, condensed_size,
                         normalized_rows, pairwise_similarity, soi_flagged,
                         spearman_flagged)
from .stats import paired_t
from .tensorio import read_archive, write_archive

FOLDS_PER_REPEAT = 5


@dataclass(frozen=True)
class MetricConfig:
    """Similarity metrics for the unmasked baseline and for masked or
    retained variants.  The defaults mirror the reference analysis:
    rank correlation for the baseline, cosine for the variants."""

    baseline: str = "spearman"
    variant: str = "cosine"

    def __post_init__(self) -> None:
        for name in (self.baseline, self.variant):
            if name not in METRICS:
                raise ValueError(f"unknown metric {name!r}; expected one of {METRICS}")

    @classmethod
    def consistent(cls, metric: str = "spearman") -> "MetricConfig":
        return cls(baseline=metric, variant=metric)

    @property
    def matched(self) -> bool:
        return self.baseline == self.variant


@dataclass(frozen=True)
class RngConfig:
    """Seed plus the documented stream-splitting scheme.

    Each repeat draws from an independent child stream keyed by the repeat
    index, so results do not depend on execution order or worker count.
    """

    seed: int = 0

    def repeat_rng(self, repeat: int) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=(repeat,))
        return np.random.default_rng(seq)


@dataclass(eq=False)
class AisTable:
    """Per-feature importance scores at dataset or image level.

    `values[k] == baseline_rho - perturbed[k]` holds exactly for every
    entry; both sides are stored so the identity stays checkable after
    serialization.  `degenerate[k]` marks features whose masked model
    collapsed (constant or zero embeddings); by convention their perturbed
    correlation is recorded as 0.0, treating total collapse as maximal
    disruption.
    """

    level: str  # "dataset" | "image"
    values: np.ndarray  # (K,) or (rows, K)
    perturbed: np.ndarray  # same shape as values
    baseline_rho: float | np.ndarray  # scalar or (rows,)
    metric_config: MetricConfig
    degenerate: np.ndarray  # bool, same shape as values
    baseline_degenerate: bool | np.ndarray = False
    images: tuple[int, ...] | None = None  # image-level row identities

    @property
    def n_features(self) -> int:
        return int(self.values.shape[-1])

    def row(self, image: int) -> np.ndarray:
        """Score vector for one image of an image-level table."""
        if self.level != "image" or self.images is None:
            raise ValueError("row() applies to image-level tables")
        return self.values[self.images.index(image)]


@dataclass(eq=False)
class SelectionResult:
    """Greedy forward-selection outcome on one training mask.

    `curve[m]` is the train-mask 2OI after retaining the top m+1 features;
    `s_star` is the smallest prefix attaining the curve maximum.
    """

    ranked_features: np.ndarray  # permutation of 0..K-1
    curve: np.ndarray  # (K,)
    curve_degenerate: np.ndarray  # bool (K,)
    s_star: np.ndarray
    s_star_size: int
    metric_config: MetricConfig

    @property
    def best_soi(self) -> float:
        return float(self.curve[self.s_star_size - 1])


@dataclass(eq=False)
class CvReport:
    """Aggregated repeated cross-validation records.

    `records` has one row per (repeat, fold) with columns
    [repeat, fold, test_full, test_retained, s_star_size, skipped];
    skipped rows carry NaN test values.  The paired two-tailed t-test
    compares retained against full test 2OI over the non-skipped rows,
    so positive t favors the retained subset.
    """

    records: np.ndarray  # (repeats*5, 6) float64
    repeats: int
    t_statistic: float
    p_value: float
    df: int
    zero_variance: bool
    mean_full: float
    mean_retained: float
    mean_sizes: float
    n_skipped: int
    seed: int
    metric_config: MetricConfig
    mode: str

    folds_per_repeat: int = FOLDS_PER_REPEAT

    COLUMNS = ("repeat", "fold", "test_full", "test_retained",
               "s_star_size", "skipped")

    @property
    def pairs(self) -> np.ndarray:
        """(m, 2) array of (test_full, test_retained) for valid folds."""
        valid = self.records[:, 5] == 0.0
        return self.records[valid][:, 2:4]


def _perturbed_soi(embeddings: np.ndarray, metric: str, hu: np.ndarray,
                   mask: np.ndarray | None) -> CorrResult:
    """2OI of a masked-model embedding, with collapse mapped to the
    flagged-zero convention instead of an exception."""
    try:
        zv = pairwise_similarity(embeddings, metric)
    except ZeroVectorError:
        return CorrResult(0.0, True)
    return soi_flagged(zv, hu, mask)


def dataset_ais(acts: np.ndarray, weights, mode: str, hu: np.ndarray,
                metric_config: MetricConfig | None = None,
                mask: np.ndarray | None = None, *,
                penultimate_relu: bool = True) -> AisTable:
    """Dataset-level importance of every feature map.

    The baseline 2OI uses the baseline metric on the full model; each
    feature's perturbed 2OI re-embeds all images with that feature masked
    and uses the variant metric.  `mask` restricts both correlations to a
    subset of condensed pairs (train-only scoring in cross-validation).
    """
    metric_config = metric_config or MetricConfig()
    acts = np.asarray(acts, dtype=np.float64)
    hu = np.asarray(hu, dtype=np.float64).ravel()
    n, k_total = acts.shape[:2]
    if hu.shape[0] != condensed_size(n):
        raise ShapeError("judgment vector does not match image count",
                         expected=(condensed_size(n),), got=hu.shape)

    z_full = embed(acts, weights, mode, penultimate_relu=penultimate_relu)
    zu = pairwise_similarity(z_full, metric_config.baseline)
    base = soi_flagged(zu, hu, mask)

    values = np.empty(k_total)
    perturbed = np.empty(k_total)
    degenerate = np.zeros(k_total, dtype=bool)
    for k, z_masked in embed_masked_sweep(acts, weights, mode,
                                          penultimate_relu=penultimate_relu):
        r = _perturbed_soi(z_masked, metric_config.variant, hu, mask)
        perturbed[k] = r.value
        degenerate[k] = r.degenerate
        values[k] = base.value - r.value

    return AisTable(level="dataset", values=values, perturbed=perturbed,
                    baseline_rho=float(base.value), metric_config=metric_config,
                    degenerate=degenerate, baseline_degenerate=base.degenerate)


def _normalize_single(row: np.ndarray, metric: str) -> np.ndarray | None:
    """Transformed single row, or None when the row is degenerate for the
    metric (zero under cosine, constant under the rank metrics)."""
    try:
        out = normalized_rows(row[None, :], metric)[0]
    except ZeroVectorError:
        return None
    if metric != "cosine" and not np.any(out):
        return None
    return out


def image_ais(acts: np.ndarray, weights, mode: str, h: np.ndarray, t: int,
              metric_config: MetricConfig | None = None, *,
              penultimate_relu: bool = True) -> np.ndarray:
    """Importance vector for a single image.

    The baseline is the rank correlation between the n-1 model
    similarities involving image t and the matching human entries; each
    feature's perturbed term re-embeds only image t with that feature
    masked and recomputes only those n-1 similarities.
    """
    table = image_ais_table(acts, weights, mode, h, images=(t,),
                            metric_config=metric_config,
                            penultimate_relu=penultimate_relu)
    return table.values[0]


def image_ais_table(acts: np.ndarray, weights, mode: str, h: np.ndarray,
                    images=None, metric_config: MetricConfig | None = None, *,
                    penultimate_relu: bool = True) -> AisTable:
    """Image-level importance table; one row per requested image
    (default: all images, ascending)."""
    metric_config = metric_config or MetricConfig()
    acts = np.asarray(acts, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    n, k_total = acts.shape[:2]
    if h.shape != (n, n):
        raise ShapeError("judgment matrix does not match image count",
                         expected=(n, n), got=h.shape)
    if n < 4:
        raise MaskTooSmall(f"image-level scores need n >= 4 images, got {n}")
    image_list = tuple(range(n)) if images is None else tuple(int(t) for t in images)
    for t in image_list:
        if not 0 <= t < n:
            raise IndexError(f"image {t} out of range [0, {n})")

    z_full = embed(acts, weights, mode, penultimate_relu=penultimate_relu)
    base_rows = normalized_rows(z_full, metric_config.baseline)
    try:
        var_rows = normalized_rows(z_full, metric_config.variant)
    except ZeroVectorError:
        var_rows = None  # every perturbed term is poisoned; flag all rows

    values = np.empty((len(image_list), k_total))
    perturbed = np.empty((len(image_list), k_total))
    baselines = np.empty(len(image_list))
    degenerate = np.zeros((len(image_list), k_total), dtype=bool)
    base_degenerate = np.zeros(len(image_list), dtype=bool)

    for r, t in enumerate(image_list):
        others = np.arange(n) != t
        h_t = h[t][others]
        s_t = base_rows[others] @ base_rows[t]
        base = spearman_flagged(s_t, h_t)
        baselines[r] = base.value
        base_degenerate[r] = base.degenerate

        for k, e_t in embed_masked_sweep(acts, weights, mode, scope=t,
                                         penultimate_relu=penultimate_relu):
            u_t = None if var_rows is None else _normalize_single(e_t, metric_config.variant)
            if u_t is None:
                res = CorrResult(0.0, True)
            else:
                s_masked = var_rows[others] @ u_t
                res = spearman_flagged(s_masked, h_t)
            perturbed[r, k] = res.value
            degenerate[r, k] = res.degenerate
            values[r, k] = base.value - res.value

    return AisTable(level="image", values=values, perturbed=perturbed,
                    baseline_rho=baselines, metric_config=metric_config,
                    degenerate=degenerate, baseline_degenerate=base_degenerate,
                    images=image_list)


def greedy_select(ais: AisTable, acts: np.ndarray, weights, mode: str,
                  hu: np.ndarray, train_mask: np.ndarray | None = None,
                  metric_config: MetricConfig | None = None, *,
                  penultimate_relu: bool = True) -> SelectionResult:
    """Grow the retained set in descending score order and keep the
    smallest prefix that maximizes train-mask 2OI.

    Ties in the ranking break by ascending feature index so the outcome
    is deterministic.  The curve's last entry is the full model, so the
    selected subset never scores below it on the training mask.
    """
    if ais.level != "dataset":
        raise ValueError("selection requires a dataset-level score table")
    metric_config = metric_config or ais.metric_config
    hu = np.asarray(hu, dtype=np.float64).ravel()
    ranked = np.argsort(-ais.values, kind="stable")

    k_total = ais.n_features
    curve = np.empty(k_total)
    curve_degenerate = np.zeros(k_total, dtype=bool)
    for m, z_prefix in enumerate(retain_prefix_embeddings(
            acts, weights, mode, ranked, penultimate_relu=penultimate_relu)):
        r = _perturbed_soi(z_prefix, metric_config.variant, hu, train_mask)
        curve[m] = r.value
        curve_degenerate[m] = r.degenerate

    best = int(np.argmax(curve))
    return SelectionResult(ranked_features=ranked, curve=curve,
                           curve_degenerate=curve_degenerate,
                           s_star=ranked[:best + 1].copy(),
                           s_star_size=best + 1,
                           metric_config=metric_config)


def _fold_masks(order: np.ndarray, m: int) -> list[np.ndarray]:
    """Partition `order` (a permutation of condensed indices) into 5 test
    masks; the first m % 5 folds carry the extra indices."""
    base, extra = divmod(m, FOLDS_PER_REPEAT)
    masks = []
    start = 0
    for f in range(FOLDS_PER_REPEAT):
        size = base + (1 if f < extra else 0)
        test = np.zeros(m, dtype=bool)
        test[order[start:start + size]] = True
        masks.append(test)
        start += size
    return masks


def _constant(x: np.ndarray) -> bool:
    return x.size == 0 or bool(np.all(x == x[0]))


def crossval(acts: np.ndarray, weights, mode: str, h: np.ndarray,
             metric_config: MetricConfig | None = None,
             rng: RngConfig | None = None, repeats: int = 8,
             workers: int = 1, *, penultimate_relu: bool = True) -> CvReport:
    """Repeated 5-fold cross-validation of retained-subset alignment.

    Per repeat, the condensed pair indices are shuffled into five disjoint
    20% test folds.  Per fold, scores and the greedy subset come from the
    80% training mask only; the full model and the retained subset are
    then evaluated on the held-out mask, and the resulting pairs feed a
    paired two-tailed t-test.  Folds whose training or test human entries
    are constant are skipped with a warning and recorded as such.

    The fold tasks are pure and their outputs land in preassigned slots,
    so any `workers` count gives bitwise-identical reports.
    """
    metric_config = metric_config or MetricConfig()
    rng = rng or RngConfig()
    acts = np.asarray(acts, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    n = acts.shape[0]
    if h.shape != (n, n):
        raise ShapeError("judgment matrix does not match image count",
                         expected=(n, n), got=h.shape)
    hu = condense(h)
    m = hu.shape[0]
    if m < 10:
        raise ShapeError(f"cross-validation needs at least 10 pairs, got {m}")
    if repeats < 1:
        raise ValueError("repeats must be positive")

    z_full = embed(acts, weights, mode, penultimate_relu=penultimate_relu)
    zv_full = pairwise_similarity(z_full, metric_config.variant)

    test_masks = [_fold_masks(rng.repeat_rng(r).permutation(m), m)
                  for r in range(repeats)]

    def run_fold(slot: int) -> tuple[float, float, float, bool, str]:
        r, f = divmod(slot, FOLDS_PER_REPEAT)
        test = test_masks[r][f]
        train = ~test
        if int(test.sum()) < 3 or int(train.sum()) < 3:
            return (np.nan, np.nan, 0.0, True, "fold too small")
        if _constant(hu[train]) or _constant(hu[test]):
            return (np.nan, np.nan, 0.0, True, "constant judgments")
        ais = dataset_ais(acts, weights, mode, hu, metric_config, mask=train,
                          penultimate_relu=penultimate_relu)
        sel = greedy_select(ais, acts, weights, mode, hu, train_mask=train,
                            penultimate_relu=penultimate_relu)
        z_star = embed(acts, weights, mode, MaskSpec.retain(sel.s_star),
                       penultimate_relu=penultimate_relu)
        test_retained = _perturbed_soi(z_star, metric_config.variant, hu, test)
        test_full = soi_flagged(zv_full, hu, test)
        return (test_full.value, test_retained.value,
                float(sel.s_star_size), False, "")

    slots = list(range(repeats * FOLDS_PER_REPEAT))
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(run_fold, slots))

    records = np.empty((len(slots), 6))
    skip_notes = []
    for slot, (full, retained, size, skipped, note) in zip(slots, results):
        r, f = divmod(slot, FOLDS_PER_REPEAT)
        records[slot] = (r, f, full, retained, size, float(skipped))
        if skipped:
            skip_notes.append(f"repeat {r} fold {f}: {note}")
    for note in skip_notes:
        warnings.warn(f"skipped degenerate fold ({note})", DataWarning,
                      stacklevel=2)

    valid = records[:, 5] == 0.0
    full_vals = records[valid, 2]
    retained_vals = records[valid, 3]
    sizes = records[valid, 4]
    if full_vals.size >= 2:
        tt = paired_t(retained_vals, full_vals)
        t_stat, p_val, df, zero_var = tt.t, tt.p, tt.df, tt.zero_variance
    else:
        t_stat, p_val, df, zero_var = 0.0, 1.0, 0, True
    mean = (lambda x: float(x.mean()) if x.size else float("nan"))

    return CvReport(records=records, repeats=repeats, t_statistic=t_stat,
                    p_value=p_val, df=df, zero_variance=zero_var,
                    mean_full=mean(full_vals), mean_retained=mean(retained_vals),
                    mean_sizes=mean(sizes), n_skipped=len(skip_notes),
                    seed=rng.seed, metric_config=metric_config, mode=mode)


# ---------------------------------------------------------------------------
# serialization: tensor archive + key = value text summary


def _write_summary(path: Path, entries: list[tuple[str, object]]) -> None:
    lines = [f"{key} = {value}" for key, value in entries]
    path.write_text("\n".join(lines) + "\n")


def _read_summary(path: Path) -> dict[str, str]:
    out: dict[str, str] = {}
    for raw in path.read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def _fmt(x: float) -> str:
    return repr(float(x))


def save_ais_table(table: AisTable, stem: str | Path) -> None:
    """Write `<stem>.npz` (values, perturbed, baselines, flags) and
    `<stem>.txt` (human-readable summary)."""
    stem = Path(stem)
    members = {
        "values": np.atleast_2d(table.values),
        "perturbed": np.atleast_2d(table.perturbed),
        "baseline_rho": np.atleast_1d(np.asarray(table.baseline_rho, dtype=np.float64)),
        "degenerate": np.atleast_2d(table.degenerate.astype(np.float64)),
        "baseline_degenerate": np.atleast_1d(
            np.asarray(table.baseline_degenerate, dtype=np.float64)),
    }
    if table.images is not None:
        members["images"] = np.asarray(table.images, dtype=np.float64)
    write_archive(members, stem.with_suffix(".npz"))

    entries: list[tuple[str, object]] = [
        ("kind", "ais_table"),
        ("level", table.level),
        ("metric_baseline", table.metric_config.baseline),
        ("metric_variant", table.metric_config.variant),
        ("features", table.n_features),
        ("degenerate_count", int(np.count_nonzero(table.degenerate))),
    ]
    if table.level == "dataset":
        order = np.argsort(-table.values, kind="stable")
        entries.append(("baseline_rho", _fmt(table.baseline_rho)))
        entries.append(("ranked_features", ",".join(str(int(k)) for k in order)))
    else:
        entries.append(("images", ",".join(str(t) for t in (table.images or ()))))
    _write_summary(stem.with_suffix(".txt"), entries)


def load_ais_table(stem: str | Path) -> AisTable:
    stem = Path(stem)
    members = read_archive(stem.with_suffix(".npz"))
    meta = _read_summary(stem.with_suffix(".txt"))
    level = meta.get("level", "dataset")
    mc = MetricConfig(baseline=meta.get("metric_baseline", "spearman"),
                      variant=meta.get("metric_variant", "cosine"))
    values = members["values"]
    perturbed = members["perturbed"]
    degenerate = members["degenerate"].astype(bool)
    baseline = members["baseline_rho"]
    base_degen = members["baseline_degenerate"].astype(bool)
    images = None
    if "images" in members:
        images = tuple(int(t) for t in members["images"])
    if level == "dataset":
        return AisTable(level=level, values=values[0], perturbed=perturbed[0],
                        baseline_rho=float(baseline[0]), metric_config=mc,
                        degenerate=degenerate[0],
                        baseline_degenerate=bool(base_degen[0]))
    return AisTable(level=level, values=values, perturbed=perturbed,
                    baseline_rho=baseline, metric_config=mc,
                    degenerate=degenerate, baseline_degenerate=base_degen,
                    images=images)


def save_selection(result: SelectionResult, stem: str | Path) -> None:
    stem = Path(stem)
    write_archive({
        "ranked_features": result.ranked_features.astype(np.float64),
        "curve": result.curve,
        "curve_degenerate": result.curve_degenerate.astype(np.float64),
    }, stem.with_suffix(".npz"))
    _write_summary(stem.with_suffix(".txt"), [
        ("kind", "selection"),
        ("metric_baseline", result.metric_config.baseline),
        ("metric_variant", result.metric_config.variant),
        ("features", len(result.ranked_features)),
        ("s_star_size", result.s_star_size),
        ("s_star", ",".join(str(int(k)) for k in result.s_star)),
        ("best_soi", _fmt(result.best_soi)),
        ("full_soi", _fmt(result.curve[-1])),
    ])


def load_selection(stem: str | Path) -> SelectionResult:
    stem = Path(stem)
    members = read_archive(stem.with_suffix(".npz"))
    meta = _read_summary(stem.with_suffix(".txt"))
    mc = MetricConfig(baseline=meta.get("metric_baseline", "spearman"),
                      variant=meta.get("metric_variant", "cosine"))
    ranked = members["ranked_features"].astype(np.intp)
    curve = members["curve"]
    size = int(meta.get("s_star_size", int(np.argmax(curve)) + 1))
    return SelectionResult(ranked_features=ranked, curve=curve,
                           curve_degenerate=members["curve_degenerate"].astype(bool),
                           s_star=ranked[:size].copy(), s_star_size=size,
                           metric_config=mc)


def save_cv_report(report: CvReport, stem: str | Path) -> None:
    stem = Path(stem)
    write_archive({"records": report.records}, stem.with_suffix(".npz"))
    _write_summary(stem.with_suffix(".txt"), [
        ("kind", "cv_report"),
        ("mode", report.mode),
        ("metric_baseline", report.metric_config.baseline),
        ("metric_variant", report.metric_config.variant),
        ("seed", report.seed),
        ("repeats", report.repeats),
        ("folds_per_repeat", report.folds_per_repeat),
        ("n_skipped", report.n_skipped),
        ("mean_full", _fmt(report.mean_full)),
        ("mean_retained", _fmt(report.mean_retained)),
        ("mean_sizes", _fmt(report.mean_sizes)),
        ("t_statistic", _fmt(report.t_statistic)),
        ("p_value", _fmt(report.p_value)),
        ("df", report.df),
        ("zero_variance", int(report.zero_variance)),
    ])


def load_cv_report(stem: str | Path) -> CvReport:
    stem = Path(stem)
    records = read_archive(stem.with_suffix(".npz"))["records"]
    meta = _read_summary(stem.with_suffix(".txt"))
    mc = MetricConfig(baseline=meta.get("metric_baseline", "spearman"),
                      variant=meta.get("metric_variant", "cosine"))
    return CvReport(records=records,
                    repeats=int(meta.get("repeats", 8)),
                    t_statistic=float(meta["t_statistic"]),
                    p_value=float(meta["p_value"]),
                    df=int(meta.get("df", 0)),
                    zero_variance=bool(int(meta.get("zero_variance", 0))),
                    mean_full=float(meta["mean_full"]),
                    mean_retained=float(meta["mean_retained"]),
                    mean_sizes=float(meta["mean_sizes"]),
                    n_skipped=int(meta.get("n_skipped", 0)),
                    seed=int(meta.get("seed", 0)),
                    metric_config=mc,
                    mode=meta.get("mode", "fc-chain"))
