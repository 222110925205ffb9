"""Command-line interface tests, run in-process through main(argv).

Exit codes: 0 success, 2 invalid input, 3 degenerate data, 4 I/O failure.
"""

import json
import subprocess
import sys
import warnings
from pathlib import Path

import numpy as np
import pytest

from _synth import planted_dataset
from aismap.cli import main
from aismap.errors import DataWarning
from aismap.selection import load_ais_table, load_cv_report, load_selection
from aismap.tensorio import write_archive, write_tensor

GOLDEN = Path(__file__).parent / "golden"
MANIFEST = str(GOLDEN / "manifest.txt")


def run(*argv):
    return main([str(a) for a in argv])


def write_planted_fixture(root, n=12, k=8, n_planted=3, name="planted"):
    """Materialize a synthetic dataset through the public file interface."""
    acts, h, planted = planted_dataset(n=n, k=k, n_planted=n_planted)
    d = root / name
    d.mkdir()
    write_tensor(acts, d / "acts.npy")
    write_tensor(h, d / "judgments.npy")
    ids = ",".join(f"im{i}" for i in range(n))
    (d / "manifest.txt").write_text("\n".join([
        f"dataset_name = {name}",
        "category = synthetic",
        f"n_images = {n}",
        f"image_ids = {ids}",
        "architecture_mode = global-pool",
        f"feature_map_count = {k}",
        "feature_map_height = 2",
        "feature_map_width = 2",
        "activations = acts.npy",
        "judgments = judgments.npy",
    ]) + "\n")
    return d / "manifest.txt", planted


# ---------------------------------------------------------------------------
# happy paths on the committed fixture


def test_dataset_ais_command(tmp_path):
    out = tmp_path / "o"
    assert run("dataset-ais", "--manifest", MANIFEST, "--out", out) == 0
    table = load_ais_table(out / "ais_dataset")
    assert table.level == "dataset"
    assert table.values.shape == (8,)
    cfg = json.loads((out / "config.json").read_text())
    assert cfg["command"] == "dataset-ais"
    assert cfg["metric_baseline"] == "spearman"


def test_dataset_ais_dump_embeddings(tmp_path):
    out = tmp_path / "o"
    assert run("dataset-ais", "--manifest", MANIFEST, "--out", out,
               "--dump-embeddings") == 0
    from aismap.tensorio import read_tensor
    emb = read_tensor(out / "embeddings.npy")
    assert emb.shape == (4, 5)


def test_image_ais_command_subset(tmp_path):
    out = tmp_path / "o"
    assert run("image-ais", "--manifest", MANIFEST, "--out", out,
               "--images", "0,2") == 0
    table = load_ais_table(out / "ais_image")
    assert table.level == "image"
    assert table.images == (0, 2)
    assert table.values.shape == (2, 8)


def test_select_command(tmp_path):
    out = tmp_path / "o"
    assert run("select", "--manifest", MANIFEST, "--out", out) == 0
    sel = load_selection(out / "selection")
    assert 1 <= sel.s_star_size <= 8
    assert (out / "ais_dataset.npz").exists()


def test_crossval_command(tmp_path):
    manifest, _ = write_planted_fixture(tmp_path)
    out = tmp_path / "o"
    assert run("crossval", "--manifest", manifest, "--out", out,
               "--repeats", "2", "--seed", "5") == 0
    report = load_cv_report(out / "cv_report")
    assert report.repeats == 2
    assert report.seed == 5
    with np.load(out / "barplot.npz") as z:
        assert z["means"].shape == (2,)
        assert z["adjusted_se"].shape == (2,)
        assert z["pairs"].shape[1] == 2
    assert (out / "barplot.png").exists()
    text = (out / "barplot.txt").read_text()
    assert "conditions = full,retained" in text


def test_crossval_worker_flag_is_bitwise_stable(tmp_path):
    manifest, _ = write_planted_fixture(tmp_path)
    outs = []
    for i, workers in enumerate((1, 4)):
        out = tmp_path / f"o{i}"
        assert run("crossval", "--manifest", manifest, "--out", out,
                   "--repeats", "2", "--seed", "3",
                   "--workers", workers) == 0
        outs.append(out)
    assert (outs[0] / "cv_report.npz").read_bytes() == (outs[1] / "cv_report.npz").read_bytes()
    assert (outs[0] / "cv_report.txt").read_bytes() == (outs[1] / "cv_report.txt").read_bytes()


def test_workers_env_variable(tmp_path, monkeypatch):
    manifest, _ = write_planted_fixture(tmp_path)
    monkeypatch.setenv("AISMAP_WORKERS", "4")
    out_env = tmp_path / "env"
    assert run("crossval", "--manifest", manifest, "--out", out_env,
               "--repeats", "1") == 0
    monkeypatch.delenv("AISMAP_WORKERS")
    out_one = tmp_path / "one"
    assert run("crossval", "--manifest", manifest, "--out", out_one,
               "--repeats", "1") == 0
    assert (out_env / "cv_report.npz").read_bytes() == (out_one / "cv_report.npz").read_bytes()


def test_heatmap_command(tmp_path):
    out = tmp_path / "o"
    assert run("heatmap", "--manifest", MANIFEST, "--out", out) == 0
    statuses = dict(line.split(" = ") for line in
                    (out / "heatmaps.txt").read_text().splitlines()
                    if " = " in line)
    rendered = [i for i, s in statuses.items() if s == "ok"]
    assert rendered, "no heatmap rendered on the fixture"
    for image_id in rendered:
        assert (out / f"heatmap_{image_id}.png").exists()
        assert (out / f"heatmap_{image_id}.npy").exists()


def test_heatmap_run_twice_identical_bytes(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert run("heatmap", "--manifest", MANIFEST, "--out", out) == 0
        outs.append(out)
    pngs = sorted(p.name for p in outs[0].glob("*.png"))
    assert pngs
    for name in pngs:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_heatmap_with_underlay_and_postpool(tmp_path):
    out = tmp_path / "o"
    assert run("heatmap", "--manifest", MANIFEST, "--out", out,
               "--underlay", GOLDEN / "underlay_small.npy",
               "--maps", "post-pool") == 0
    assert list(out.glob("heatmap_*.png"))


def test_heatmap_both_models(tmp_path):
    out = tmp_path / "o"
    assert run("heatmap", "--manifest", MANIFEST, "--out", out,
               "--both-models", MANIFEST) == 0
    assert (out / "ais_image_a.npz").exists()
    assert (out / "ais_image_b.npz").exists()
    with np.load(out / "match.npz") as z:
        match = z["match"]
        degenerate = z["match_degenerate"].astype(bool)
        maxent = z["max_entropy"]
    # same manifest on both sides: identical maps, perfect correlation
    assert np.all(np.isfinite(match))
    assert np.allclose(match[~degenerate], 1.0, atol=1e-12)
    assert np.all(match[degenerate] == 0.0)
    assert np.all(maxent >= 0)
    text = (out / "match.txt").read_text()
    assert "match_vs_maxentropy_r" in text


def test_compare_saliency_command(tmp_path):
    out = tmp_path / "o"
    assert run("compare-saliency", "--manifest", MANIFEST, "--out", out,
               "--targets", "80,90", "--levels", "5,10") == 0
    with np.load(out / "pr_curves.npz") as z:
        names = sorted(z.files)
        assert any(n.endswith("_t80") for n in names)
        first = z[names[0]]
        assert first.shape == (50, 4)
    with np.load(out / "rr.npz") as z:
        assert z["rr"].shape[1] == 2  # one column per level
    assert (out / "rr_table.txt").exists()
    assert list(out.glob("overlay_*.png"))


def test_compare_saliency_no_render(tmp_path):
    out = tmp_path / "o"
    assert run("compare-saliency", "--manifest", MANIFEST, "--out", out,
               "--no-render-overlays") == 0
    assert not list(out.glob("overlay_*.png"))
    assert (out / "rr_table.txt").exists()


def test_stats_command(tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert run("image-ais", "--manifest", MANIFEST, "--out", out_a) == 0
    assert run("image-ais", "--manifest", MANIFEST, "--out", out_b,
               "--metric-variant", "pearson") == 0
    out = tmp_path / "stats"
    assert run("stats", "--ais-a", out_a / "ais_image",
               "--ais-b", out_b / "ais_image", "--out", out) == 0
    with np.load(out / "histograms.npz") as z:
        assert any(k.startswith("log10_feature_mean") for k in z.files)
    text = (out / "stats.txt").read_text()
    assert "ks_p" in text
    assert (out / "histograms.png").exists()


def test_report_command(tmp_path, capsys):
    out = tmp_path / "o"
    run("dataset-ais", "--manifest", MANIFEST, "--out", out)
    capsys.readouterr()  # drop the first command's status line
    collated = tmp_path / "report.txt"
    assert run("report", out, "--out", collated) == 0
    printed = capsys.readouterr().out
    assert "== " in printed
    assert collated.read_text() == printed


def test_report_rejects_empty_input(tmp_path):
    empty = tmp_path / "nothing"
    empty.mkdir()
    assert run("report", empty) == 2


# ---------------------------------------------------------------------------
# config file and snapshot behavior


def test_config_file_overrides_flags(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"metric_variant": "pearson"}))
    out = tmp_path / "o"
    assert run("dataset-ais", "--manifest", MANIFEST, "--out", out,
               "--metric-variant", "cosine", "--config", cfg) == 0
    table = load_ais_table(out / "ais_dataset")
    assert table.metric_config.variant == "pearson"
    snapshot = json.loads((out / "config.json").read_text())
    assert snapshot["metric_variant"] == "pearson"


def test_config_file_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"metric_variabt": "pearson"}))
    out = tmp_path / "o"
    assert run("dataset-ais", "--manifest", MANIFEST, "--out", out,
               "--config", cfg) == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["exit_code"] == 2
    assert "metric_variabt" in err["message"]


def test_config_snapshot_contains_no_callables(tmp_path):
    out = tmp_path / "o"
    run("select", "--manifest", MANIFEST, "--out", out)
    snapshot = json.loads((out / "config.json").read_text())
    assert "func" not in snapshot
    assert all(isinstance(v, (str, int, float, bool, type(None)))
               for v in snapshot.values())


# ---------------------------------------------------------------------------
# failure modes and exit codes


def test_missing_manifest_file_is_io_error(tmp_path, capsys):
    assert run("dataset-ais", "--manifest", tmp_path / "absent.txt",
               "--out", tmp_path / "o") == 4
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["exit_code"] == 4
    assert err["error"] == "IoError"


def test_invalid_manifest_is_input_error(tmp_path, capsys):
    bad = tmp_path / "manifest.txt"
    bad.write_text("dataset_name = x\nwat = 1\n")
    assert run("dataset-ais", "--manifest", bad, "--out", tmp_path / "o") == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "ManifestError"


def test_missing_judgments_is_input_error(tmp_path, capsys):
    d = tmp_path / "d"
    d.mkdir()
    write_tensor(np.abs(np.random.default_rng(0).normal(size=(4, 3, 2, 2))),
                 d / "acts.npy")
    (d / "manifest.txt").write_text("\n".join([
        "dataset_name = nojudge",
        "category = synthetic",
        "n_images = 4",
        "image_ids = a,b,c,d",
        "architecture_mode = global-pool",
        "feature_map_count = 3",
        "feature_map_height = 2",
        "feature_map_width = 2",
        "activations = acts.npy",
    ]) + "\n")
    assert run("dataset-ais", "--manifest", d / "manifest.txt",
               "--out", tmp_path / "o") == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "MissingArtifact"
    assert "judgments" in err["message"]


def test_too_few_images_is_degenerate(tmp_path, capsys):
    manifest, _ = write_planted_fixture(tmp_path, n=3, k=6, name="tiny")
    assert run("image-ais", "--manifest", manifest,
               "--out", tmp_path / "o") == 3
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["exit_code"] == 3


def test_stats_on_missing_tables_is_io_error(tmp_path):
    assert run("stats", "--ais-a", tmp_path / "nope",
               "--ais-b", tmp_path / "nada", "--out", tmp_path / "o") == 4


def test_error_line_is_json_on_stderr(tmp_path, capsys):
    run("dataset-ais", "--manifest", tmp_path / "absent.txt",
        "--out", tmp_path / "o")
    lines = capsys.readouterr().err.strip().splitlines()
    parsed = json.loads(lines[-1])
    assert set(parsed) == {"error", "message", "exit_code"}


# ---------------------------------------------------------------------------
# console entry point


def test_console_script_runs():
    proc = subprocess.run([sys.executable, "-m", "aismap.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0


def test_console_script_end_to_end(tmp_path):
    out = tmp_path / "o"
    proc = subprocess.run(
        ["aismap", "dataset-ais", "--manifest", MANIFEST, "--out", str(out)],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (out / "ais_dataset.npz").exists()
