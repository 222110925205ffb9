"""Interchange-format and manifest tests.

numpy's own reader/writer serves as the independent format oracle: files
we write must load through np.load, files np.save writes must load
through our reader, with bitwise-equal payloads.
"""

import io
import struct
import zipfile
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aismap.errors import (DataWarning, DomainError, FormatError, IoError,
                           ManifestError, MissingArtifact, ShapeError,
                           UnsupportedDtype)
from aismap.tensorio import (MAGIC, TensorInfo, load_dataset, load_manifest,
                             read_archive, read_header, read_tensor,
                             symmetrize_judgments, write_archive, write_tensor)

GOLDEN = Path(__file__).parent / "golden"


# ---------------------------------------------------------------------------
# format oracle: interop with numpy's reader/writer


@settings(max_examples=60, deadline=None)
@given(
    shape=st.lists(st.integers(0, 5), min_size=0, max_size=4).map(tuple),
    use_f4=st.booleans(),
    seed=st.integers(0, 2**32 - 1),
)
def test_round_trip_matches_numpy(tmp_path_factory, shape, use_f4, seed):
    rng = np.random.default_rng(seed)
    dtype = np.float32 if use_f4 else np.float64
    arr = rng.normal(size=shape).astype(dtype)
    d = tmp_path_factory.mktemp("rt")

    ours = d / "ours.npy"
    write_tensor(arr, ours)
    via_numpy = np.load(ours)
    assert via_numpy.dtype == dtype
    assert via_numpy.shape == shape
    assert np.array_equal(via_numpy, arr)

    theirs = d / "theirs.npy"
    np.save(theirs, arr)
    back = read_tensor(theirs)
    assert back.dtype == np.float64  # promoted internally
    assert np.array_equal(back, arr.astype(np.float64))


def test_simple_round_trip(tmp_path):
    arr = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
    p = tmp_path / "t.npy"
    write_tensor(arr, p)
    back = read_tensor(p)
    assert back.shape == (2, 2)
    assert np.array_equal(back, arr.astype(np.float64))


def test_degenerate_shapes_round_trip(tmp_path):
    for arr in (np.zeros((0, 3)), np.array([[0.5]]), np.float64(2.5).reshape(())):
        p = tmp_path / "d.npy"
        write_tensor(np.asarray(arr), p)
        back = read_tensor(p)
        assert back.shape == np.asarray(arr).shape
        assert np.array_equal(back, np.asarray(arr, dtype=np.float64))


def test_write_is_deterministic(tmp_path):
    arr = np.random.default_rng(0).normal(size=(7, 3))
    a, b = tmp_path / "a.npy", tmp_path / "b.npy"
    write_tensor(arr, a)
    write_tensor(arr, b)
    assert a.read_bytes() == b.read_bytes()


def test_header_peek(tmp_path):
    p = tmp_path / "h.npy"
    write_tensor(np.zeros((3, 4), dtype=np.float32), p)
    info = read_header(p)
    assert info == TensorInfo("<f4", (3, 4), (1, 0))


def test_write_rejects_non_finite(tmp_path):
    with pytest.raises(DomainError):
        write_tensor(np.array([1.0, np.nan]), tmp_path / "bad.npy")


def test_read_missing_file_is_io_error(tmp_path):
    with pytest.raises(IoError):
        read_tensor(tmp_path / "absent.npy")


# ---------------------------------------------------------------------------
# malformed headers report byte offsets


def _write_raw(tmp_path, payload: bytes) -> Path:
    p = tmp_path / "raw.npy"
    p.write_bytes(payload)
    return p


def _v1_file(header: bytes, payload: bytes = b"") -> bytes:
    return MAGIC + bytes((1, 0)) + struct.pack("<H", len(header)) + header + payload


def test_bad_magic_offset_zero(tmp_path):
    with pytest.raises(FormatError) as err:
        read_tensor(_write_raw(tmp_path, b"NOTNPYXX" + b"\x00" * 16))
    assert err.value.offset == 0


def test_short_file(tmp_path):
    with pytest.raises(FormatError) as err:
        read_tensor(_write_raw(tmp_path, MAGIC[:4]))
    assert err.value.offset == 0


def test_unsupported_version_offset(tmp_path):
    with pytest.raises(FormatError) as err:
        read_tensor(_write_raw(tmp_path, MAGIC + bytes((3, 0)) + b"\x00" * 8))
    assert err.value.offset == 6


def test_truncated_header_dict(tmp_path):
    raw = MAGIC + bytes((1, 0)) + struct.pack("<H", 500) + b"{'descr'"
    with pytest.raises(FormatError) as err:
        read_tensor(_write_raw(tmp_path, raw))
    assert err.value.offset == 10


def test_header_not_a_dict(tmp_path):
    with pytest.raises(FormatError) as err:
        read_tensor(_write_raw(tmp_path, _v1_file(b"[1, 2, 3]")))
    assert err.value.offset == 10


def test_unsupported_dtype(tmp_path):
    hdr = b"{'descr': '<i8', 'fortran_order': False, 'shape': (2,)}"
    with pytest.raises(UnsupportedDtype) as err:
        read_tensor(_write_raw(tmp_path, _v1_file(hdr, b"\x00" * 16)))
    assert err.value.descr == "<i8"


def test_fortran_order_rejected(tmp_path):
    hdr = b"{'descr': '<f8', 'fortran_order': True, 'shape': (2,)}"
    with pytest.raises(FormatError):
        read_tensor(_write_raw(tmp_path, _v1_file(hdr, b"\x00" * 16)))


def test_payload_length_mismatch(tmp_path):
    hdr = b"{'descr': '<f8', 'fortran_order': False, 'shape': (3,)}"
    with pytest.raises(FormatError):
        read_tensor(_write_raw(tmp_path, _v1_file(hdr, b"\x00" * 16)))


def test_reads_version_two_headers(tmp_path):
    hdr = b"{'descr': '<f8', 'fortran_order': False, 'shape': (2,)}"
    raw = MAGIC + bytes((2, 0)) + struct.pack("<I", len(hdr)) + hdr
    raw += struct.pack("<2d", 1.5, -2.5)
    back = read_tensor(_write_raw(tmp_path, raw))
    assert np.array_equal(back, [1.5, -2.5])


# ---------------------------------------------------------------------------
# archives


def test_archive_round_trip_and_determinism(tmp_path):
    rng = np.random.default_rng(3)
    members = {"alpha": rng.normal(size=(2, 3)),
               "beta": rng.normal(size=(4,)).astype(np.float32)}
    a, b = tmp_path / "a.npz", tmp_path / "b.npz"
    write_archive(members, a)
    write_archive(members, b)
    assert a.read_bytes() == b.read_bytes()

    back = read_archive(a)
    assert set(back) == {"alpha", "beta"}
    assert np.array_equal(back["alpha"], members["alpha"])
    assert np.array_equal(back["beta"], members["beta"].astype(np.float64))


def test_archive_reads_numpy_savez(tmp_path):
    p = tmp_path / "z.npz"
    np.savez(p, W1=np.eye(2), b1=np.zeros(2))
    back = read_archive(p)
    assert set(back) == {"W1", "b1"}
    assert np.array_equal(back["W1"], np.eye(2))


def test_archive_loads_through_numpy(tmp_path):
    p = tmp_path / "z.npz"
    write_archive({"m": np.arange(6, dtype=np.float64).reshape(2, 3)}, p)
    with np.load(p) as z:
        assert np.array_equal(z["m"], np.arange(6).reshape(2, 3))


def test_archive_member_corruption_reports_offset(tmp_path):
    p = tmp_path / "z.npz"
    with zipfile.ZipFile(p, "w") as zf:
        zf.writestr("bad.npy", b"JUNKJUNKJUNK")
    with pytest.raises(FormatError):
        read_archive(p)


# ---------------------------------------------------------------------------
# manifests


def test_golden_manifest_loads(golden_manifest):
    m = golden_manifest
    assert m.n_images == 4
    assert m.image_ids == ["img0", "img1", "img2", "img3"]
    assert m.architecture_mode == "fc-chain"
    assert m.feature_map_count == 8
    assert m.pooled_height == 1 and m.pooled_width == 1


def test_golden_fixture_shapes(golden_dataset):
    ds = golden_dataset
    assert ds.activations.shape == (4, 8, 3, 3)
    assert ds.weights.W1.shape == (6, 8)
    assert ds.embeddings_golden.shape == (4, 5)
    assert ds.judgments.shape == (4, 4)
    assert ds.class_probs.shape == (4, 10)
    assert ds.saliency.shape == (4, 16, 16)


def _manifest_text(**overrides) -> str:
    fields = {
        "dataset_name": "t", "category": "synthetic", "n_images": 2,
        "image_ids": "a,b", "architecture_mode": "global-pool",
        "feature_map_count": 3, "feature_map_height": 2,
        "feature_map_width": 2, "activations": "acts.npy",
    }
    fields.update(overrides)
    return "\n".join(f"{k} = {v}" for k, v in fields.items() if v is not None)


def _write_manifest(tmp_path, text: str, acts_shape=(2, 3, 2, 2)) -> Path:
    write_tensor(np.abs(np.random.default_rng(0).normal(size=acts_shape)),
                 tmp_path / "acts.npy")
    p = tmp_path / "manifest.txt"
    p.write_text(text)
    return p


def test_manifest_shape_mismatch(tmp_path):
    p = _write_manifest(tmp_path, _manifest_text(n_images=5, image_ids="a,b,c,d,e"))
    with pytest.raises(ShapeError):
        load_manifest(p)


def test_manifest_fc_chain_requires_weights(tmp_path):
    p = _write_manifest(tmp_path, _manifest_text(architecture_mode="fc-chain"))
    with pytest.raises(MissingArtifact) as err:
        load_manifest(p)
    assert err.value.role == "weights"


def test_manifest_collects_all_violations(tmp_path):
    text = _manifest_text(architecture_mode="fc-chain", n_images=3,
                          image_ids="a,b,c")
    p = _write_manifest(tmp_path, text)
    with pytest.raises(ManifestError) as err:
        load_manifest(p)
    # missing weights and wrong activation leading dim, reported together
    assert len(err.value.violations) >= 2


def test_manifest_unknown_key(tmp_path):
    p = _write_manifest(tmp_path, _manifest_text() + "\nwhatnot = 3")
    with pytest.raises(ManifestError):
        load_manifest(p)


def test_manifest_duplicate_key(tmp_path):
    p = _write_manifest(tmp_path, _manifest_text() + "\nn_images = 2")
    with pytest.raises(ManifestError):
        load_manifest(p)


def test_manifest_global_pool_forbids_weights(tmp_path):
    p = _write_manifest(tmp_path, _manifest_text(weights="w.npz"))
    with pytest.raises(ManifestError):
        load_manifest(p)


def test_manifest_missing_tensor_file(tmp_path):
    p = tmp_path / "manifest.txt"
    p.write_text(_manifest_text())
    with pytest.raises(MissingArtifact) as err:
        load_manifest(p)
    assert err.value.role == "activations"


# ---------------------------------------------------------------------------
# dataset loading invariants


def test_symmetrize_warns_on_asymmetry():
    h = np.array([[1.0, 0.2], [0.4, 1.0]])
    with pytest.warns(DataWarning):
        out = symmetrize_judgments(h)
    assert np.allclose(out, [[1.0, 0.3], [0.3, 1.0]])
    assert np.array_equal(out, out.T)


def test_symmetrize_quiet_when_symmetric(recwarn):
    h = np.array([[1.0, 0.5], [0.5, 1.0]])
    out = symmetrize_judgments(h)
    assert np.array_equal(out, h)
    assert not [w for w in recwarn if issubclass(w.category, DataWarning)]


def test_load_dataset_rejects_bad_probability_rows(tmp_path):
    write_tensor(np.abs(np.random.default_rng(0).normal(size=(2, 3, 2, 2))),
                 tmp_path / "acts.npy")
    write_tensor(np.array([[0.9, 0.3], [0.5, 0.5]]), tmp_path / "probs.npy")
    p = tmp_path / "manifest.txt"
    p.write_text(_manifest_text(class_probs="probs.npy"))
    with pytest.raises(DomainError):
        load_dataset(load_manifest(p))


def test_load_dataset_warns_on_negative_activations(tmp_path):
    write_tensor(np.full((2, 3, 2, 2), -1.0), tmp_path / "acts.npy")
    p = tmp_path / "manifest.txt"
    p.write_text(_manifest_text())
    with pytest.warns(DataWarning):
        load_dataset(load_manifest(p))


def test_load_dataset_rejects_negative_saliency(tmp_path):
    write_tensor(np.abs(np.random.default_rng(0).normal(size=(2, 3, 2, 2))),
                 tmp_path / "acts.npy")
    write_tensor(np.full((2, 4, 4), -0.5), tmp_path / "sal.npy")
    p = tmp_path / "manifest.txt"
    p.write_text(_manifest_text(saliency="sal.npy", image_render_size=4))
    with pytest.raises(DomainError):
        load_dataset(load_manifest(p))
