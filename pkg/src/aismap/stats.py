"""Statistical battery: paired t-tests, two-sample KS tests, mean absolute
deviation summaries, and paired-comparison-adjusted standard errors.

p-values use closed-form survival functions: the regularized incomplete
beta for Student's t and the asymptotic Kolmogorov distribution with
effective-n scaling for KS (accurate at the 100-to-500 sample sizes this
engine sees; exact small-sample KS is out of scope).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc

from .errors import EmptySample, ShapeError
from .similarity import CorrResult, pearson_flagged


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    df: int
    zero_variance: bool = False


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float
    n1: int
    n2: int


@dataclass(frozen=True)
class MadSummary:
    axis: str  # "per_feature" | "per_image"
    values: np.ndarray


def student_t_sf(t: float, df: int) -> float:
    """P(T > t) for Student's t with df degrees of freedom."""
    if t < 0:
        return 1.0 - student_t_sf(-t, df)
    tt = t * t
    if tt <= df:
        # Complementary form: x = df/(df+t*t) quantizes near 1 for small t
        # and the integrand's endpoint singularity amplifies that error.
        y = tt / (df + tt)
        return 0.5 * float(1.0 - betainc(0.5, df / 2.0, y))
    x = df / (df + tt)
    return 0.5 * float(betainc(df / 2.0, 0.5, x))


def paired_t(a: np.ndarray, b: np.ndarray) -> TTestResult:
    """Paired two-tailed t-test on a - b.

    Zero-variance differences leave the statistic undefined; by convention
    the result is reported as t=0, p=1 with the zero_variance flag set
    (the degenerate identical-performance case, not evidence of an effect).
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ShapeError("paired samples differ in length", expected=a.shape, got=b.shape)
    if len(a) < 2:
        raise ShapeError(f"need at least 2 pairs, got {len(a)}")
    d = a - b
    df = len(d) - 1
    sd = d.std(ddof=1)
    if sd == 0.0:
        return TTestResult(t=0.0, p=1.0, df=df, zero_variance=True)
    t = float(d.mean() / (sd / np.sqrt(len(d))))
    p = 2.0 * student_t_sf(abs(t), df)
    return TTestResult(t=t, p=min(1.0, p), df=df)


def kolmogorov_sf(lam: float) -> float:
    """Survival function of the limiting Kolmogorov distribution."""
    if lam <= 0.05:
        # sf(0.05) differs from 1 by less than 1e-300
        return 1.0
    if lam < 1.18:
        # The direct alternating series cancels badly here; the
        # theta-transformed complement converges in a few terms.
        t = np.pi * np.pi / (8.0 * lam * lam)
        total = 0.0
        for k in range(1, 21):
            term = np.exp(-((2 * k - 1) ** 2) * t)
            total += term
            if term < 1e-18:
                break
        cdf = np.sqrt(2.0 * np.pi) / lam * total
        return float(min(1.0, max(0.0, 1.0 - cdf)))
    total = 0.0
    for j in range(1, 101):
        term = 2.0 * (-1.0) ** (j - 1) * np.exp(-2.0 * j * j * lam * lam)
        total += term
        if abs(term) < 1e-16:
            break
    return float(min(1.0, max(0.0, total)))


def ks_two_sample(a: np.ndarray, b: np.ndarray) -> KsResult:
    """Two-sided two-sample KS test: exact D, asymptotic p."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if len(a) == 0 or len(b) == 0:
        raise EmptySample("KS test requires non-empty samples")
    n1, n2 = len(a), len(b)
    sa, sb = np.sort(a), np.sort(b)
    pooled = np.concatenate([sa, sb])
    cdf1 = np.searchsorted(sa, pooled, side="right") / n1
    cdf2 = np.searchsorted(sb, pooled, side="right") / n2
    d = float(np.max(np.abs(cdf1 - cdf2)))
    en = n1 * n2 / (n1 + n2)
    p = kolmogorov_sf(np.sqrt(en) * d)
    return KsResult(statistic=d, p_value=p, n1=n1, n2=n2)


def mad(matrix: np.ndarray, axis: str) -> MadSummary:
    """Mean absolute deviation from the mean, per feature or per image."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ShapeError("expected an (images, features) matrix", got=matrix.shape)
    if axis == "per_feature":
        dev = np.abs(matrix - matrix.mean(axis=0, keepdims=True))
        values = dev.mean(axis=0)
    elif axis == "per_image":
        dev = np.abs(matrix - matrix.mean(axis=1, keepdims=True))
        values = dev.mean(axis=1)
    else:
        raise ValueError(f"axis must be 'per_feature' or 'per_image', got {axis!r}")
    return MadSummary(axis=axis, values=values)


def loftus_masson_se(matrix: np.ndarray) -> np.ndarray:
    """Per-condition standard errors adjusted for paired comparisons.

    Each subject's (row's) mean is removed and the grand mean restored, so
    between-subject offsets do not inflate the error bars of
    within-subject condition differences.
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 2 or m.shape[1] < 2:
        raise ShapeError("need at least a 2x2 (subjects x conditions) matrix",
                         got=m.shape)
    normalized = m - m.mean(axis=1, keepdims=True) + m.mean()
    return normalized.std(axis=0, ddof=1) / np.sqrt(m.shape[0])


@dataclass
class HistPanel:
    """One paired histogram: the raw panel values for two models plus
    shared bin edges, counts, and the KS comparison."""

    name: str
    data_a: np.ndarray
    data_b: np.ndarray
    bin_edges: np.ndarray
    counts_a: np.ndarray
    counts_b: np.ndarray
    ks: KsResult
    excluded_a: int = 0
    excluded_b: int = 0


@dataclass
class AisHistogramSummary:
    panels: list[HistPanel] = field(default_factory=list)

    def panel(self, name: str) -> HistPanel:
        for p in self.panels:
            if p.name == name:
                return p
        raise KeyError(name)


def _make_panel(name: str, data_a: np.ndarray, data_b: np.ndarray, bins: int,
                excluded_a: int = 0, excluded_b: int = 0) -> HistPanel:
    combined = np.concatenate([data_a, data_b])
    if combined.size == 0:
        edges = np.linspace(0.0, 1.0, bins + 1)
    else:
        edges = np.histogram_bin_edges(combined, bins=bins)
    counts_a, _ = np.histogram(data_a, bins=edges)
    counts_b, _ = np.histogram(data_b, bins=edges)
    ks = ks_two_sample(data_a, data_b) if data_a.size and data_b.size else \
        KsResult(statistic=0.0, p_value=1.0, n1=len(data_a), n2=len(data_b))
    return HistPanel(name=name, data_a=data_a, data_b=data_b, bin_edges=edges,
                     counts_a=counts_a, counts_b=counts_b, ks=ks,
                     excluded_a=excluded_a, excluded_b=excluded_b)


def ais_histograms(ais_a: np.ndarray, ais_b: np.ndarray, bins: int = 30) -> AisHistogramSummary:
    """Distribution comparison of two image-level score matrices.

    Three paired panels: log10 of the positive per-feature means (features
    with non-positive means are excluded and counted, not offset), MAD per
    feature, and MAD per image, each with a two-sample KS test.
    """
    a = np.asarray(ais_a, dtype=np.float64)
    b = np.asarray(ais_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2:
        raise ShapeError("score matrices must share an (images, features) shape",
                         expected=a.shape, got=b.shape)

    mean_a = a.mean(axis=0)
    mean_b = b.mean(axis=0)
    pos_a = mean_a[mean_a > 0]
    pos_b = mean_b[mean_b > 0]
    panels = [
        _make_panel("log10_feature_mean", np.log10(pos_a), np.log10(pos_b), bins,
                    excluded_a=int((mean_a <= 0).sum()),
                    excluded_b=int((mean_b <= 0).sum())),
        _make_panel("mad_per_feature", mad(a, "per_feature").values,
                    mad(b, "per_feature").values, bins),
        _make_panel("mad_per_image", mad(a, "per_image").values,
                    mad(b, "per_image").values, bins),
    ]
    return AisHistogramSummary(panels=panels)


def match_maxentropy_correlation(match: np.ndarray, maxent: np.ndarray) -> CorrResult:
    """Product-moment correlation between heatmap match scores and the
    per-image maximum classification entropy."""
    return pearson_flagged(match, maxent)
