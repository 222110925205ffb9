"""Feature-map importance against human similarity judgments.

The package scores convolutional feature maps by how much masking each
one disturbs the second-order isomorphism between model and human
pairwise similarities, selects aligned subsets, and turns image-level
scores into explanation heatmaps comparable with external saliency maps.
"""

from .errors import (AismapError, DataWarning, DegenerateMap, DomainError,
                     EmptyMask, EmptySample, FormatError, IoError,
                     ManifestError, MaskTooSmall, MissingArtifact,
                     NoPositiveAis, OrderError, ShapeError, UnsupportedDtype,
                     ZeroVectorError)
from .heatmap import (Heatmap, ais_weights, bilinear_upsample, compose,
                      match_score, max_entropy, render)
from .masking import (MaskSpec, embed, embed_masked_sweep, global_pool,
                      max_pool, retain_prefix_embeddings)
from .saliency import (BinaryMask, PrCurve, RrEntry, RrResult, binarize,
                       overlay_contours, pr_curve, relative_risk,
                       relative_risk_all)
from .selection import (AisTable, CvReport, MetricConfig, RngConfig,
                        SelectionResult, crossval, dataset_ais, greedy_select,
                        image_ais, image_ais_table, load_ais_table,
                        load_cv_report, load_selection, save_ais_table,
                        save_cv_report, save_selection)
from .similarity import (CorrResult, condense, condensed_index,
                         condensed_size, cosine, entropy, pairwise_similarity,
                         pearson, rank_average, soi, soi_flagged, spearman)
from .stats import (AisHistogramSummary, KsResult, MadSummary, TTestResult,
                    ais_histograms, ks_two_sample, loftus_masson_se, mad,
                    paired_t)
from .tensorio import (Dataset, DatasetManifest, WeightBundle, load_dataset,
                       load_manifest, read_archive, read_tensor,
                       write_archive, write_tensor)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
