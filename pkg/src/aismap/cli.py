"""Command-line pipeline driver.

Every subcommand reads validated manifests, writes byte-reproducible
outputs (tensor archives, key = value summaries, PNGs) into an output
directory, and drops a resolved-config snapshot beside them so runs can
be replayed exactly.  No output embeds a timestamp.

Exit codes: 0 success, 2 input error, 3 numerical degeneracy that
prevented any output, 4 I/O failure.  Failures additionally emit one
machine-readable JSON line on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (DegenerateMap, DomainError, EmptyMask, EmptySample,
                     FormatError, IoError, ManifestError, MaskTooSmall,
                     MissingArtifact, NoPositiveAis, OrderError, ShapeError,
                     UnsupportedDtype, ZeroVectorError)
from .heatmap import ais_weights, compose, match_score, max_entropy, render
from .masking import embed, max_pool
from .saliency import (RR_LEVELS, TARGET_PERCENTILES, overlay_contours,
                       pr_curve, relative_risk_all)
from .selection import (MetricConfig, RngConfig, crossval, dataset_ais,
                        greedy_select, image_ais_table, load_ais_table,
                        save_ais_table, save_cv_report, save_selection)
from .similarity import condense, pearson_flagged
from .stats import ais_histograms, loftus_masson_se
from .tensorio import load_dataset, load_manifest, read_tensor, write_archive, write_tensor

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DEGENERATE = 3
EXIT_IO = 4

_INPUT_ERRORS = (FormatError, UnsupportedDtype, ShapeError, MissingArtifact,
                 ManifestError, OrderError, ValueError, KeyError,
                 json.JSONDecodeError)
_DEGENERATE_ERRORS = (ZeroVectorError, MaskTooSmall, DomainError, EmptyMask,
                      NoPositiveAis, DegenerateMap, EmptySample)


def _fmt(x: float) -> str:
    return repr(float(x))


def _parse_indices(text: str | None) -> list[int] | None:
    if text is None or text == "":
        return None
    return [int(tok) for tok in text.split(",") if tok.strip() != ""]


def _metric_config(args) -> MetricConfig:
    return MetricConfig(baseline=args.metric_baseline, variant=args.metric_variant)


def _workers(args) -> int:
    if getattr(args, "workers", None) is not None:
        return max(1, int(args.workers))
    return max(1, int(os.environ.get("AISMAP_WORKERS", "1")))


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _snapshot(args, outdir: Path) -> None:
    """Resolved-config snapshot: the final argument values after config
    overrides, written deterministically beside the outputs."""
    resolved = {}
    for key, value in vars(args).items():
        if key in ("func", "config"):
            continue
        resolved[key] = str(value) if isinstance(value, Path) else value
    text = json.dumps(resolved, indent=2, sort_keys=True)
    (outdir / "config.json").write_text(text + "\n", encoding="utf-8")


def _apply_config(args) -> None:
    """A JSON config file overrides command-line flags."""
    if not getattr(args, "config", None):
        return
    cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if not isinstance(cfg, dict):
        raise ValueError("config file must hold a JSON object")
    for raw_key, value in cfg.items():
        key = raw_key.replace("-", "_")
        if key in ("func", "command", "config") or not hasattr(args, key):
            raise ValueError(f"unknown config key {raw_key!r}")
        setattr(args, key, value)


def _load(args, manifest_attr: str = "manifest"):
    return load_dataset(load_manifest(getattr(args, manifest_attr)))


def _require(ds, role: str):
    value = getattr(ds, role)
    if value is None:
        raise MissingArtifact(role, "required by this command")
    return value


def _write_lines(path: Path, lines: list[str]) -> None:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# subcommands


def cmd_dataset_ais(args) -> int:
    ds = _load(args)
    hu = condense(_require(ds, "judgments"))
    table = dataset_ais(ds.activations, ds.weights, ds.manifest.architecture_mode,
                        hu, _metric_config(args),
                        penultimate_relu=args.penultimate == "post-relu")
    out = _outdir(args)
    save_ais_table(table, out / "ais_dataset")
    if args.dump_embeddings:
        z = embed(ds.activations, ds.weights, ds.manifest.architecture_mode,
                  penultimate_relu=args.penultimate == "post-relu")
        write_tensor(z, out / "embeddings.npy", dtype="<f8")
    _snapshot(args, out)
    print(f"ais_dataset: K={table.n_features} "
          f"baseline_rho={_fmt(table.baseline_rho)} "
          f"degenerate={int(np.count_nonzero(table.degenerate))}")
    return EXIT_OK


def cmd_image_ais(args) -> int:
    ds = _load(args)
    h = _require(ds, "judgments")
    table = image_ais_table(ds.activations, ds.weights,
                            ds.manifest.architecture_mode, h,
                            images=_parse_indices(args.images),
                            metric_config=_metric_config(args),
                            penultimate_relu=args.penultimate == "post-relu")
    out = _outdir(args)
    save_ais_table(table, out / "ais_image")
    _snapshot(args, out)
    print(f"ais_image: rows={table.values.shape[0]} K={table.n_features}")
    return EXIT_OK


def cmd_select(args) -> int:
    ds = _load(args)
    hu = condense(_require(ds, "judgments"))
    mode = ds.manifest.architecture_mode
    relu = args.penultimate == "post-relu"
    table = dataset_ais(ds.activations, ds.weights, mode, hu,
                        _metric_config(args), penultimate_relu=relu)
    result = greedy_select(table, ds.activations, ds.weights, mode, hu,
                           penultimate_relu=relu)
    out = _outdir(args)
    save_ais_table(table, out / "ais_dataset")
    save_selection(result, out / "selection")
    _snapshot(args, out)
    print(f"selection: s_star_size={result.s_star_size} "
          f"best_soi={_fmt(result.best_soi)} full_soi={_fmt(result.curve[-1])}")
    return EXIT_OK


def cmd_crossval(args) -> int:
    ds = _load(args)
    h = _require(ds, "judgments")
    report = crossval(ds.activations, ds.weights, ds.manifest.architecture_mode,
                      h, _metric_config(args), RngConfig(args.seed),
                      repeats=args.repeats, workers=_workers(args),
                      penultimate_relu=args.penultimate == "post-relu")
    out = _outdir(args)
    save_cv_report(report, out / "cv_report")

    pairs = report.pairs
    if pairs.shape[0] >= 2:
        ses = loftus_masson_se(pairs)
    else:
        ses = np.array([np.nan, np.nan])
    write_archive({
        "means": np.array([report.mean_full, report.mean_retained]),
        "adjusted_se": ses,
        "pairs": pairs,
    }, out / "barplot.npz")
    _write_lines(out / "barplot.txt", [
        "kind = crossval_barplot",
        f"category = {ds.manifest.category}",
        "conditions = full,retained",
        f"mean_full = {_fmt(report.mean_full)}",
        f"mean_retained = {_fmt(report.mean_retained)}",
        f"se_full = {_fmt(ses[0])}",
        f"se_retained = {_fmt(ses[1])}",
        f"t_statistic = {_fmt(report.t_statistic)}",
        f"p_value = {_fmt(report.p_value)}",
        f"df = {report.df}",
        f"zero_variance = {int(report.zero_variance)}",
        f"n_pairs = {pairs.shape[0]}",
        f"n_skipped = {report.n_skipped}",
    ])
    _render_barplot(out / "barplot.png", ds.manifest.category,
                    (report.mean_full, report.mean_retained),
                    (float(ses[0]), float(ses[1])))
    _snapshot(args, out)
    print(f"crossval: mean_full={_fmt(report.mean_full)} "
          f"mean_retained={_fmt(report.mean_retained)} "
          f"p={_fmt(report.p_value)} skipped={report.n_skipped}")
    return EXIT_OK


def _render_barplot(path: Path, category: str, means, ses) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(3.2, 3.2), dpi=100)
    xs = np.arange(2)
    finite_ses = [0.0 if not np.isfinite(s) else s for s in ses]
    ax.bar(xs, means, yerr=finite_ses, capsize=4,
           color=("#888888", "#4477aa"))
    ax.set_xticks(xs, ["Full", "Retained"])
    ax.set_ylabel("test 2OI")
    ax.set_title(category)
    fig.tight_layout()
    fig.savefig(path, format="png")
    plt.close(fig)


def _underlay_rows(args, n: int) -> np.ndarray | None:
    if not getattr(args, "underlay", None):
        return None
    rgb = read_tensor(args.underlay)
    if rgb.ndim != 4 or rgb.shape[0] != n:
        raise ShapeError("underlay tensor must be (n, H, W, 3) or (n, 3, H, W)",
                         got=rgb.shape)
    return rgb


def _compose_maps(ds, table, indices, args):
    """Per-image heatmaps from an image-level table; NoPositiveAis rows
    are reported as failed statuses rather than aborting the batch."""
    mode_maps = ds.activations
    if args.maps == "post-pool":
        if ds.manifest.architecture_mode != "fc-chain":
            raise ValueError("post-pool maps require fc-chain mode")
        mode_maps = max_pool(ds.activations, ds.manifest.pool_window,
                             ds.manifest.pool_stride)
    size = ds.manifest.image_render_size
    maps = {}
    statuses = {}
    for row, t in enumerate(table.images):
        image_id = ds.manifest.image_ids[t]
        try:
            w = ais_weights(table.values[row])
        except NoPositiveAis:
            statuses[image_id] = "no_positive_scores"
            continue
        maps[t] = compose(mode_maps[t], w, size, image_id=image_id)
        statuses[image_id] = "ok"
    return maps, statuses


def cmd_heatmap(args) -> int:
    ds = _load(args)
    h = _require(ds, "judgments")
    relu = args.penultimate == "post-relu"
    mc = _metric_config(args)
    indices = _parse_indices(args.images)
    table = image_ais_table(ds.activations, ds.weights,
                            ds.manifest.architecture_mode, h, images=indices,
                            metric_config=mc, penultimate_relu=relu)
    out = _outdir(args)
    underlay = _underlay_rows(args, ds.n_images)

    if not args.both_models:
        save_ais_table(table, out / "ais_image")
        maps, statuses = _compose_maps(ds, table, indices, args)
        for t, hm in maps.items():
            under = underlay[t] if underlay is not None else None
            render(hm, out / f"heatmap_{hm.image_id}.png", underlay=under,
                   colormap=args.colormap)
        _write_lines(out / "heatmaps.txt",
                     ["kind = heatmap_run"] +
                     [f"{image_id} = {status}"
                      for image_id, status in statuses.items()])
        _snapshot(args, out)
        n_ok = sum(1 for s in statuses.values() if s == "ok")
        print(f"heatmap: rendered={n_ok} failed={len(statuses) - n_ok}")
        if n_ok == 0:
            raise NoPositiveAis()
        return EXIT_OK

    ds_b = _load(args, "both_models")
    if ds_b.manifest.image_ids != ds.manifest.image_ids:
        raise ValueError("the two manifests list different images")
    h_b = _require(ds_b, "judgments")
    table_b = image_ais_table(ds_b.activations, ds_b.weights,
                              ds_b.manifest.architecture_mode, h_b,
                              images=indices, metric_config=mc,
                              penultimate_relu=relu)
    save_ais_table(table, out / "ais_image_a")
    save_ais_table(table_b, out / "ais_image_b")
    maps_a, statuses_a = _compose_maps(ds, table, indices, args)
    maps_b, statuses_b = _compose_maps(ds_b, table_b, indices, args)
    for tag, maps in (("a", maps_a), ("b", maps_b)):
        for t, hm in maps.items():
            under = underlay[t] if underlay is not None else None
            render(hm, out / f"heatmap_{tag}_{hm.image_id}.png", underlay=under,
                   colormap=args.colormap)
    _write_lines(out / "heatmaps.txt",
                 ["kind = heatmap_run"] +
                 [f"{image_id} = {statuses_a[image_id]},{statuses_b[image_id]}"
                  for image_id in statuses_a])

    probs_a = _require(ds, "class_probs")
    probs_b = _require(ds_b, "class_probs")
    rows = []
    match_vals = []
    match_bad = []
    maxent_vals = []
    for t in table.images:
        image_id = ds.manifest.image_ids[t]
        if t in maps_a and t in maps_b:
            r = match_score(maps_a[t], maps_b[t])
            m, bad = r.value, r.degenerate
        else:
            # a side without a composable map: recorded as the flagged
            # zero, same convention as a degenerate correlation
            m, bad = 0.0, True
        e = max_entropy(probs_a[t], probs_b[t])
        match_vals.append(m)
        match_bad.append(bad)
        maxent_vals.append(e)
        rows.append(f"{image_id} = {_fmt(m)},{_fmt(e)},{int(bad)}")
    match_arr = np.array(match_vals)
    bad_arr = np.array(match_bad, dtype=bool)
    maxent_arr = np.array(maxent_vals)
    ok = ~bad_arr
    if int(ok.sum()) >= 2:
        corr = pearson_flagged(match_arr[ok], maxent_arr[ok])
        corr_line = f"match_vs_maxentropy_r = {_fmt(corr.value)}"
        degen_line = f"correlation_degenerate = {int(corr.degenerate)}"
    else:
        corr_line = "match_vs_maxentropy_r = nan"
        degen_line = "correlation_degenerate = 1"
    write_archive({"match": match_arr,
                   "match_degenerate": bad_arr.astype(np.float64),
                   "max_entropy": maxent_arr}, out / "match.npz")
    _write_lines(out / "match.txt",
                 ["kind = match_table",
                  "columns = match,max_entropy,degenerate",
                  corr_line, degen_line,
                  f"excluded = {int(bad_arr.sum())}"] + rows)
    _snapshot(args, out)
    print(f"heatmap both-models: images={len(rows)} "
          f"excluded={int(bad_arr.sum())}")
    return EXIT_OK


def cmd_compare_saliency(args) -> int:
    ds = _load(args)
    h = _require(ds, "judgments")
    saliency = _require(ds, "saliency")
    indices = _parse_indices(args.images)
    table = image_ais_table(ds.activations, ds.weights,
                            ds.manifest.architecture_mode, h, images=indices,
                            metric_config=_metric_config(args),
                            penultimate_relu=args.penultimate == "post-relu")
    out = _outdir(args)
    underlay = _underlay_rows(args, ds.n_images)
    maps, statuses = _compose_maps(ds, table, indices, args)

    targets = [int(q) for q in args.targets.split(",")]
    levels = sorted(int(q) for q in args.levels.split(","))
    pr_members = {}
    rr_rows = {}
    for t in sorted(maps):
        hm = maps[t]
        image_id = hm.image_id
        sal_t = saliency[t]
        for q in targets:
            curve = pr_curve(hm, sal_t, q)
            pr_members[f"pr_{image_id}_t{q}"] = np.column_stack([
                curve.percentiles, curve.precision, curve.recall,
                curve.empty_predictor.astype(np.float64)])
        if args.render_overlays:
            under = underlay[t] if underlay is not None else None
            rr = overlay_contours(hm, sal_t, out / f"overlay_{image_id}.png",
                                  underlay=under, levels=levels)
        else:
            rr = relative_risk_all(hm, sal_t, levels=levels)
        rr_rows[image_id] = rr

    if not maps:
        raise NoPositiveAis()
    write_archive(pr_members, out / "pr_curves.npz")

    flag_code = {"": 0.0, "infinite": 1.0, "undefined": 2.0}
    ids = sorted(rr_rows)
    rr_matrix = np.array([[rr_rows[i].entry(q).rr for q in levels] for i in ids])
    rr_flags = np.array([[flag_code[rr_rows[i].entry(q).flag] for q in levels]
                         for i in ids])
    write_archive({"rr": rr_matrix, "rr_flags": rr_flags}, out / "rr.npz")

    lines = ["kind = rr_table",
             f"category = {ds.manifest.category}",
             "levels = " + ",".join(str(q) for q in levels),
             "# per level: finite-mean, finite-sd, excluded_count"]
    for j, q in enumerate(levels):
        col = rr_matrix[:, j]
        finite = np.isfinite(col)
        if int(finite.sum()):
            mean = float(col[finite].mean())
            sd = float(col[finite].std(ddof=1)) if int(finite.sum()) > 1 else 0.0
        else:
            mean, sd = float("nan"), float("nan")
        lines.append(f"q{q} = {_fmt(mean)},{_fmt(sd)},{int((~finite).sum())}")
    lines.append("statuses = " + ",".join(
        f"{image_id}:{status}" for image_id, status in statuses.items()))
    _write_lines(out / "rr_table.txt", lines)
    _snapshot(args, out)
    print(f"compare-saliency: images={len(maps)} targets={targets} "
          f"levels={levels}")
    return EXIT_OK


def cmd_stats(args) -> int:
    table_a = load_ais_table(Path(args.ais_a))
    table_b = load_ais_table(Path(args.ais_b))
    summary = ais_histograms(table_a.values, table_b.values, bins=args.bins)
    out = _outdir(args)

    members = {}
    lines = ["kind = ais_histograms", f"bins = {args.bins}"]
    for panel in summary.panels:
        members[f"{panel.name}_a"] = panel.data_a
        members[f"{panel.name}_b"] = panel.data_b
        members[f"{panel.name}_edges"] = panel.bin_edges
        members[f"{panel.name}_counts_a"] = panel.counts_a.astype(np.float64)
        members[f"{panel.name}_counts_b"] = panel.counts_b.astype(np.float64)
        lines.append(f"{panel.name}_ks_d = {_fmt(panel.ks.statistic)}")
        lines.append(f"{panel.name}_ks_p = {_fmt(panel.ks.p_value)}")
        lines.append(f"{panel.name}_excluded = "
                     f"{panel.excluded_a},{panel.excluded_b}")
    write_archive(members, out / "histograms.npz")
    _write_lines(out / "stats.txt", lines)
    _render_histograms(out / "histograms.png", summary)
    _snapshot(args, out)
    print(f"stats: panels={len(summary.panels)}")
    return EXIT_OK


def _render_histograms(path: Path, summary) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, len(summary.panels),
                             figsize=(3.0 * len(summary.panels), 2.8), dpi=100)
    if len(summary.panels) == 1:
        axes = [axes]
    for ax, panel in zip(axes, summary.panels):
        ax.stairs(panel.counts_a, panel.bin_edges, label="a", alpha=0.7)
        ax.stairs(panel.counts_b, panel.bin_edges, label="b", alpha=0.7)
        ax.set_title(panel.name, fontsize=8)
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="png")
    plt.close(fig)


def cmd_report(args) -> int:
    """Collate saved plain-text summaries (and any barplot/rr tables)."""
    paths: list[Path] = []
    for raw in args.inputs:
        p = Path(raw)
        if p.is_dir():
            paths.extend(sorted(p.glob("*.txt")))
        elif p.exists():
            paths.append(p)
        else:
            raise IoError(f"no such input: {p}")
    sections = []
    for p in paths:
        text = p.read_text(encoding="utf-8")
        if "kind = " not in text:
            continue
        sections.append(f"== {p.name} ==\n{text.rstrip()}")
    if not sections:
        raise ValueError("no artifact summaries found in the given inputs")
    body = "\n\n".join(sections) + "\n"
    sys.stdout.write(body)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(body, encoding="utf-8")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_common(p: argparse.ArgumentParser, *, manifest: bool = True) -> None:
    if manifest:
        p.add_argument("--manifest", required=True, help="dataset manifest path")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="JSON config file; its keys override flags")
    p.add_argument("--metric-baseline", default="spearman",
                   choices=("spearman", "pearson", "cosine"),
                   help="similarity metric for the unmasked baseline")
    p.add_argument("--metric-variant", default="cosine",
                   choices=("spearman", "pearson", "cosine"),
                   help="similarity metric for masked/retained variants")
    p.add_argument("--penultimate", default="post-relu",
                   choices=("post-relu", "pre-relu"),
                   help="embedding read-out point in the fc chain")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aismap",
        description="Feature-map importance scoring against human "
                    "similarity judgments.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dataset-ais", help="dataset-level importance table")
    _add_common(p)
    p.add_argument("--dump-embeddings", action="store_true",
                   help="also write the full-model embedding matrix")
    p.set_defaults(func=cmd_dataset_ais)

    p = sub.add_parser("image-ais", help="image-level importance table")
    _add_common(p)
    p.add_argument("--images", help="comma-separated image indices (default all)")
    p.set_defaults(func=cmd_image_ais)

    p = sub.add_parser("select", help="greedy retained-subset selection")
    _add_common(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("crossval", help="repeated cross-validated evaluation")
    _add_common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=8)
    p.add_argument("--workers", type=int, default=None,
                   help="fold worker threads (default: AISMAP_WORKERS or 1)")
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("heatmap", help="per-image explanation heatmaps")
    _add_common(p)
    p.add_argument("--images", help="comma-separated image indices (default all)")
    p.add_argument("--colormap", default="viridis")
    p.add_argument("--underlay", help="RGB tensor file (n, H, W, 3) to render under maps")
    p.add_argument("--maps", default="pre-pool", choices=("pre-pool", "post-pool"),
                   help="feature-map resolution used for composition")
    p.add_argument("--both-models", metavar="MANIFEST_B",
                   help="second manifest; adds match scores and maxEntropy")
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("compare-saliency",
                       help="PR curves and relative risk against saliency maps")
    _add_common(p)
    p.add_argument("--images", help="comma-separated image indices (default all)")
    p.add_argument("--targets", default=",".join(str(q) for q in TARGET_PERCENTILES),
                   help="importance-mask percentiles for PR curves")
    p.add_argument("--levels", default=",".join(str(q) for q in RR_LEVELS),
                   help="top-percent levels for relative risk")
    p.add_argument("--underlay", help="RGB tensor file for overlay rendering")
    p.add_argument("--maps", default="pre-pool", choices=("pre-pool", "post-pool"))
    p.add_argument("--no-render-overlays", dest="render_overlays",
                   action="store_false", help="skip overlay PNGs")
    p.set_defaults(func=cmd_compare_saliency)

    p = sub.add_parser("stats", help="distribution comparison of two score tables")
    p.add_argument("--ais-a", required=True, help="saved table stem (model a)")
    p.add_argument("--ais-b", required=True, help="saved table stem (model b)")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON config file; its keys override flags")
    p.add_argument("--bins", type=int, default=30)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("report", help="collate saved plain-text summaries")
    p.add_argument("inputs", nargs="+", help="artifact directories or files")
    p.add_argument("--out", help="also write the collated report here")
    p.set_defaults(func=cmd_report)

    return parser


def _fail(exc: BaseException, code: int) -> int:
    line = json.dumps({"error": type(exc).__name__, "message": str(exc),
                       "exit_code": code}, sort_keys=True)
    print(line, file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args)
        return args.func(args)
    except _DEGENERATE_ERRORS as exc:
        return _fail(exc, EXIT_DEGENERATE)
    except IoError as exc:
        return _fail(exc, EXIT_IO)
    except _INPUT_ERRORS as exc:
        return _fail(exc, EXIT_INPUT)
    except OSError as exc:
        return _fail(exc, EXIT_IO)


if __name__ == "__main__":
    sys.exit(main())
