"""Tensor interchange files and the dataset manifest.

The on-disk tensor format is the versioned binary layout with the
``\\x93NUMPY`` magic string: version (1,0) or (2,0), little-endian header
length, then a header dict declaring ``descr`` (``<f4`` or ``<f8``),
``fortran_order`` (must be False) and ``shape``, followed by the raw C-order
payload.  Archives are plain ZIP containers of such files, one member per
tensor role.  Files written here load with any conforming reader and vice
versa.

The manifest is a ``key = value`` text file (``#`` comments) binding the
tensors of one experiment together; `load_manifest` validates every
cross-shape invariant eagerly and reports all violations at once.
"""

from __future__ import annotations

import ast
import io
import struct
import warnings
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DataWarning,
    DomainError,
    FormatError,
    IoError,
    ManifestError,
    MissingArtifact,
    ShapeError,
    UnsupportedDtype,
)

MAGIC = b"\x93NUMPY"
_SUPPORTED_DESCRS = ("<f4", "<f8")

ARTIFACT_ROLES = (
    "activations",
    "weights",
    "judgments",
    "class_probs",
    "saliency",
    "embeddings_golden",
)

# Timestamp frozen so archives are byte-identical across runs.
_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


@dataclass(frozen=True)
class TensorInfo:
    """Header of a tensor file: on-disk dtype descriptor, shape, version."""

    descr: str
    shape: tuple[int, ...]
    version: tuple[int, int]


def _parse_header(buf: bytes, origin: int = 0) -> tuple[TensorInfo, int]:
    """Parse magic + version + header dict; return info and payload offset.

    `origin` shifts reported byte offsets when the buffer is an archive
    member rather than a whole file.
    """
    if len(buf) < 8:
        raise FormatError("file too short for magic header", origin)
    if buf[:6] != MAGIC:
        raise FormatError("bad magic string", origin)
    version = (buf[6], buf[7])
    if version not in ((1, 0), (2, 0)):
        raise FormatError(f"unsupported format version {version}", origin + 6)
    if version == (1, 0):
        if len(buf) < 10:
            raise FormatError("truncated header length field", origin + 8)
        (hlen,) = struct.unpack("<H", buf[8:10])
        hstart = 10
    else:
        if len(buf) < 12:
            raise FormatError("truncated header length field", origin + 8)
        (hlen,) = struct.unpack("<I", buf[8:12])
        hstart = 12
    hend = hstart + hlen
    if len(buf) < hend:
        raise FormatError("truncated header dict", origin + hstart)
    try:
        header = ast.literal_eval(buf[hstart:hend].decode("latin1"))
    except (ValueError, SyntaxError):
        raise FormatError("header dict does not parse", origin + hstart) from None
    if not isinstance(header, dict):
        raise FormatError("header is not a dict", origin + hstart)
    for key in ("descr", "fortran_order", "shape"):
        if key not in header:
            raise FormatError(f"header missing key {key!r}", origin + hstart)
    descr = header["descr"]
    if not isinstance(descr, str) or descr not in _SUPPORTED_DESCRS:
        raise UnsupportedDtype(str(descr))
    if header["fortran_order"] is not False:
        raise FormatError("fortran_order must be False", origin + hstart)
    shape = header["shape"]
    if not (isinstance(shape, tuple) and all(isinstance(s, int) and s >= 0 for s in shape)):
        raise FormatError("invalid shape tuple", origin + hstart)
    return TensorInfo(descr, shape, version), hend


def _read_tensor_bytes(buf: bytes, origin: int = 0) -> tuple[np.ndarray, TensorInfo]:
    info, start = _parse_header(buf, origin)
    count = int(np.prod(info.shape, dtype=np.int64))
    itemsize = 4 if info.descr == "<f4" else 8
    expected = count * itemsize
    payload = buf[start:]
    if len(payload) != expected:
        raise FormatError(
            f"payload length {len(payload)} != expected {expected}", origin + start
        )
    data = np.frombuffer(payload, dtype=np.dtype(info.descr)).reshape(info.shape)
    # All internal arithmetic is float64 regardless of on-disk dtype; astype
    # always copies, so the result is writable and not a view of the buffer.
    return data.astype(np.float64, order="C"), info


def read_tensor(path: str | Path) -> np.ndarray:
    """Read a tensor file into a C-order float64 array (f4 promoted)."""
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    data, _ = _read_tensor_bytes(buf)
    return data


def read_header(path: str | Path) -> TensorInfo:
    """Peek at a tensor file header without loading the payload."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            head = fh.read(4096 + 12)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    info, _ = _parse_header(head)
    return info


def _tensor_bytes(tensor: np.ndarray, dtype: str) -> bytes:
    # np.ascontiguousarray would promote 0-d arrays to 1-d; asarray keeps them.
    arr = np.asarray(tensor, dtype=np.dtype(dtype), order="C")
    header = (
        "{'descr': '%s', 'fortran_order': False, 'shape': %s, }"
        % (dtype, str(arr.shape))
    )
    # Pad so magic + version + length field + header align to 64 bytes.
    for version, lenfmt, lensize in (((1, 0), "<H", 2), ((2, 0), "<I", 4)):
        base = len(MAGIC) + 2 + lensize
        hlen = len(header) + 1
        pad = (-(base + hlen)) % 64
        hlen += pad
        if version == (1, 0) and hlen > 0xFFFF:
            continue
        blob = header.encode("latin1") + b" " * pad + b"\n"
        return (
            MAGIC
            + bytes(version)
            + struct.pack(lenfmt, hlen)
            + blob
            + arr.tobytes(order="C")
        )
    raise IoError("header does not fit either format version")


def write_tensor(tensor: np.ndarray, path: str | Path, dtype: str | None = None) -> None:
    """Write `tensor` to `path` in the interchange format.

    `dtype` may be ``"<f4"`` or ``"<f8"``; by default the array's own float
    width is kept (anything else is stored as f8).
    """
    arr = np.asarray(tensor)
    if arr.size and not np.all(np.isfinite(arr)):
        raise DomainError("refusing to write non-finite tensor")
    if dtype is None:
        dtype = "<f4" if arr.dtype == np.float32 else "<f8"
    if dtype not in _SUPPORTED_DESCRS:
        raise UnsupportedDtype(dtype)
    blob = _tensor_bytes(arr, dtype)
    try:
        Path(path).write_bytes(blob)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_archive(path: str | Path) -> dict[str, np.ndarray]:
    """Read a ZIP archive of tensor files; keys are member stems (roles)."""
    path = Path(path)
    out: dict[str, np.ndarray] = {}
    try:
        with zipfile.ZipFile(path) as zf:
            for name in zf.namelist():
                role = name[:-4] if name.endswith(".npy") else name
                data, _ = _read_tensor_bytes(zf.read(name))
                out[role] = data
    except (OSError, zipfile.BadZipFile) as exc:
        raise IoError(f"cannot read archive {path}: {exc}") from exc
    return out


def write_archive(tensors: dict[str, np.ndarray], path: str | Path,
                  dtype: str | None = None) -> None:
    """Write tensors as a ZIP of interchange files, one member per role.

    Members are sorted by role and timestamps are frozen, so identical
    content produces identical archive bytes.
    """
    try:
        with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
            for role in sorted(tensors):
                arr = np.asarray(tensors[role])
                member_dtype = dtype
                if member_dtype is None:
                    member_dtype = "<f4" if arr.dtype == np.float32 else "<f8"
                if arr.size and not np.all(np.isfinite(arr)):
                    raise DomainError(f"refusing to write non-finite tensor {role!r}")
                info = zipfile.ZipInfo(role + ".npy", date_time=_ZIP_EPOCH)
                info.external_attr = 0o644 << 16
                zf.writestr(info, _tensor_bytes(arr, member_dtype))
    except OSError as exc:
        raise IoError(f"cannot write archive {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

_MODES = ("fc-chain", "global-pool")
_INT_KEYS = (
    "n_images",
    "feature_map_count",
    "feature_map_height",
    "feature_map_width",
    "image_render_size",
    "pool_window",
    "pool_stride",
)
_TEXT_KEYS = ("dataset_name", "category", "architecture_mode")


@dataclass
class DatasetManifest:
    """Parsed, validated description of one experiment's artifacts."""

    dataset_name: str
    category: str
    n_images: int
    image_ids: list[str]
    architecture_mode: str
    feature_map_count: int
    feature_map_height: int
    feature_map_width: int
    image_render_size: int = 224
    pool_window: int = 2
    pool_stride: int = 2
    paths: dict[str, Path] = field(default_factory=dict)
    base_dir: Path = Path(".")

    @property
    def pooled_height(self) -> int:
        return (self.feature_map_height - self.pool_window) // self.pool_stride + 1

    @property
    def pooled_width(self) -> int:
        return (self.feature_map_width - self.pool_window) // self.pool_stride + 1

    def path(self, role: str) -> Path:
        if role not in self.paths:
            raise MissingArtifact(role)
        return self.paths[role]


def _parse_manifest_text(text: str, base_dir: Path) -> dict:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ManifestError([f"line {lineno}: expected 'key = value'"])
        key, value = (part.strip() for part in line.split("=", 1))
        if key in raw:
            raise ManifestError([f"line {lineno}: duplicate key {key!r}"])
        raw[key] = value

    known = set(_INT_KEYS) | set(_TEXT_KEYS) | set(ARTIFACT_ROLES) | {"image_ids"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ManifestError([f"unknown manifest key {k!r}" for k in unknown])

    fields: dict = {"paths": {}, "base_dir": base_dir}
    problems: list[str] = []
    for key in ("dataset_name", "category"):
        fields[key] = raw.get(key, "")
    for key in _INT_KEYS:
        if key in raw:
            try:
                fields[key] = int(raw[key])
            except ValueError:
                problems.append(f"key {key!r} is not an integer: {raw[key]!r}")
    fields.setdefault("image_render_size", 224)
    fields.setdefault("pool_window", 2)
    fields.setdefault("pool_stride", 2)
    for key in ("n_images", "feature_map_count", "feature_map_height", "feature_map_width"):
        if key not in fields:
            problems.append(f"required key {key!r} missing")
    mode = raw.get("architecture_mode", "")
    if mode not in _MODES:
        problems.append(f"architecture_mode must be one of {_MODES}, got {mode!r}")
    fields["architecture_mode"] = mode
    if "image_ids" in raw:
        ids = [s.strip() for s in raw["image_ids"].split(",") if s.strip()]
    else:
        ids = []
        problems.append("required key 'image_ids' missing")
    fields["image_ids"] = ids
    for role in ARTIFACT_ROLES:
        if role in raw:
            fields["paths"][role] = (base_dir / raw[role]).resolve()
    if problems:
        raise ManifestError(problems)
    return fields


def load_manifest(path: str | Path) -> DatasetManifest:
    """Load and validate a manifest, shape-checking every referenced tensor.

    All violations are collected before failing; a single violation is
    raised as its own error type, several as a ManifestError listing them.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read manifest {path}: {exc}") from exc
    fields = _parse_manifest_text(text, path.parent)
    m = DatasetManifest(**fields)

    violations: list[Exception] = []
    n, k = m.n_images, m.feature_map_count
    hf, wf = m.feature_map_height, m.feature_map_width

    if len(m.image_ids) != n:
        violations.append(ShapeError("image_ids count", role="image_ids",
                                     expected=n, got=len(m.image_ids)))
    if len(set(m.image_ids)) != len(m.image_ids):
        violations.append(ManifestError(["image_ids are not unique"]))
    if m.architecture_mode == "fc-chain" and "weights" not in m.paths:
        violations.append(MissingArtifact("weights", "required in fc-chain mode"))
    if m.architecture_mode == "global-pool" and "weights" in m.paths:
        violations.append(ManifestError(["weights path forbidden in global-pool mode"]))
    if hf < m.pool_window or wf < m.pool_window:
        violations.append(ManifestError(["feature maps smaller than the pool window"]))

    def peek(role: str) -> TensorInfo | None:
        p = m.paths[role]
        if not p.exists():
            violations.append(MissingArtifact(role, f"file not found: {p}"))
            return None
        try:
            return read_header(p)
        except (FormatError, UnsupportedDtype, IoError) as exc:
            violations.append(type(exc)(*exc.args) if not isinstance(exc, FormatError)
                              else exc)
            return None

    if "activations" not in m.paths:
        violations.append(MissingArtifact("activations"))
    else:
        info = peek("activations")
        if info is not None and info.shape != (n, k, hf, wf):
            violations.append(ShapeError("activations shape", role="activations",
                                         expected=(n, k, hf, wf), got=info.shape))

    if "judgments" in m.paths:
        info = peek("judgments")
        if info is not None and info.shape != (n, n):
            violations.append(ShapeError("judgments shape", role="judgments",
                                         expected=(n, n), got=info.shape))

    if "class_probs" in m.paths:
        info = peek("class_probs")
        if info is not None and (len(info.shape) != 2 or info.shape[0] != n):
            violations.append(ShapeError("class_probs shape", role="class_probs",
                                         expected=(n, "num_classes"), got=info.shape))

    if "saliency" in m.paths:
        s = m.image_render_size
        info = peek("saliency")
        if info is not None and info.shape != (n, s, s):
            violations.append(ShapeError("saliency shape", role="saliency",
                                         expected=(n, s, s), got=info.shape))

    d_embed = k  # global-pool embedding width
    if "weights" in m.paths and m.architecture_mode == "fc-chain":
        p = m.paths["weights"]
        if not p.exists():
            violations.append(MissingArtifact("weights", f"file not found: {p}"))
        else:
            try:
                members = read_archive(p)
            except (IoError, FormatError, UnsupportedDtype) as exc:
                violations.append(exc)
                members = {}
            if members:
                missing = sorted({"W1", "b1", "W2", "b2"} - set(members))
                if missing:
                    violations.append(MissingArtifact(
                        "weights", f"archive lacks member(s) {missing}"))
                else:
                    w1, b1 = members["W1"], members["b1"]
                    w2, b2 = members["W2"], members["b2"]
                    flat = k * m.pooled_height * m.pooled_width
                    if w1.ndim != 2 or w1.shape[1] != flat:
                        violations.append(ShapeError(
                            "W1 columns must equal channels x pooled area",
                            role="weights", expected=("d1", flat),
                            got=w1.shape))
                    if b1.shape != (w1.shape[0],):
                        violations.append(ShapeError("b1 length", role="weights",
                                                     expected=(w1.shape[0],), got=b1.shape))
                    if w2.ndim != 2 or w2.shape[1] != w1.shape[0]:
                        violations.append(ShapeError("W2 columns", role="weights",
                                                     expected=("d2", w1.shape[0]),
                                                     got=w2.shape))
                    if b2.shape != (w2.shape[0],):
                        violations.append(ShapeError("b2 length", role="weights",
                                                     expected=(w2.shape[0],), got=b2.shape))
                    d_embed = w2.shape[0]

    if "embeddings_golden" in m.paths:
        info = peek("embeddings_golden")
        if info is not None and info.shape != (n, d_embed):
            violations.append(ShapeError("golden embeddings shape",
                                         role="embeddings_golden",
                                         expected=(n, d_embed), got=info.shape))

    if len(violations) == 1:
        raise violations[0]
    if violations:
        raise ManifestError(violations)
    return m


# ---------------------------------------------------------------------------
# Loaded dataset bundles
# ---------------------------------------------------------------------------


@dataclass
class WeightBundle:
    """Fully-connected chain weights for engine-side forward propagation."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    pool_window: int = 2
    pool_stride: int = 2

    @property
    def d1(self) -> int:
        return self.W1.shape[0]

    @property
    def d2(self) -> int:
        return self.W2.shape[0]


@dataclass
class Dataset:
    """All tensors of one manifest loaded into float64 arrays."""

    manifest: DatasetManifest
    activations: np.ndarray
    weights: WeightBundle | None = None
    judgments: np.ndarray | None = None
    class_probs: np.ndarray | None = None
    saliency: np.ndarray | None = None
    embeddings_golden: np.ndarray | None = None

    @property
    def n_images(self) -> int:
        return self.manifest.n_images


def symmetrize_judgments(values: np.ndarray) -> np.ndarray:
    """Average a judgment matrix with its transpose; warn if asymmetric.

    Human data collection often yields directionally noisy pairs, so
    asymmetry is repaired rather than rejected.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise ShapeError("judgment matrix must be square", got=values.shape)
    asym = np.max(np.abs(values - values.T)) if values.size else 0.0
    if asym > 1e-9:
        warnings.warn(
            f"judgment matrix asymmetric (max |H - H.T| = {asym:g}); "
            "symmetrized by averaging", DataWarning, stacklevel=2)
    return 0.5 * (values + values.T)


def load_dataset(manifest: DatasetManifest) -> Dataset:
    """Load every tensor a validated manifest references, enforcing value
    invariants (finiteness, probability rows, non-negative saliency)."""
    acts = read_tensor(manifest.path("activations"))
    if not np.all(np.isfinite(acts)):
        raise DomainError("activations contain non-finite values")
    if np.any(acts < 0):
        warnings.warn("activations contain negative values; expected post-"
                      "rectifier maps", DataWarning, stacklevel=2)

    weights = None
    if "weights" in manifest.paths:
        members = read_archive(manifest.path("weights"))
        weights = WeightBundle(
            W1=members["W1"], b1=members["b1"],
            W2=members["W2"], b2=members["b2"],
            pool_window=manifest.pool_window,
            pool_stride=manifest.pool_stride,
        )

    judgments = None
    if "judgments" in manifest.paths:
        judgments = symmetrize_judgments(read_tensor(manifest.path("judgments")))

    probs = None
    if "class_probs" in manifest.paths:
        probs = read_tensor(manifest.path("class_probs"))
        if np.any(probs < -1e-9) or np.any(probs > 1 + 1e-9):
            raise DomainError("class probabilities outside [0, 1]")
        sums = probs.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-5):
            bad = int(np.argmax(np.abs(sums - 1.0)))
            raise DomainError(
                f"class probability row {bad} sums to {sums[bad]:.8f}, not 1")
        probs = np.clip(probs, 0.0, 1.0)

    saliency = None
    if "saliency" in manifest.paths:
        saliency = read_tensor(manifest.path("saliency"))
        if not np.all(np.isfinite(saliency)):
            raise DomainError("saliency maps contain non-finite values")
        if np.any(saliency < 0):
            raise DomainError("saliency maps must be non-negative")

    golden = None
    if "embeddings_golden" in manifest.paths:
        golden = read_tensor(manifest.path("embeddings_golden"))

    return Dataset(
        manifest=manifest,
        activations=acts,
        weights=weights,
        judgments=judgments,
        class_probs=probs,
        saliency=saliency,
        embeddings_golden=golden,
    )
