"""Exception hierarchy and warning categories for the engine.

Every error raised on purpose by this package derives from AismapError so
callers (and the CLI) can map failures to exit codes without matching on
message strings.
"""

from __future__ import annotations


class AismapError(Exception):
    """Base class for all engine errors."""


class FormatError(AismapError):
    """Malformed tensor file; `offset` is the byte position of the defect."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class UnsupportedDtype(AismapError):
    """Tensor file declares a dtype the engine does not accept."""

    def __init__(self, descr: str):
        super().__init__(f"unsupported dtype descriptor {descr!r}; expected '<f4' or '<f8'")
        self.descr = descr


class IoError(AismapError):
    """Read/write failure on a tensor or report file."""


class ShapeError(AismapError):
    """Dimension mismatch between two artifacts or vectors."""

    def __init__(self, message: str, role: str | None = None,
                 expected=None, got=None):
        if expected is not None or got is not None:
            message = f"{message}: expected {expected}, got {got}"
        if role is not None:
            message = f"[{role}] {message}"
        super().__init__(message)
        self.role = role
        self.expected = expected
        self.got = got


class MissingArtifact(AismapError):
    """A manifest-referenced file is absent or a required role is unset."""

    def __init__(self, role: str, detail: str = ""):
        msg = f"missing artifact for role '{role}'"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.role = role


class ManifestError(AismapError):
    """Manifest failed validation; `violations` lists every defect found."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"{len(self.violations)} manifest violation(s): {lines}")


class OrderError(AismapError):
    """Pair indices supplied out of canonical order (requires i < j)."""


class ZeroVectorError(AismapError):
    """Cosine similarity requested for an all-zero vector."""

    def __init__(self, index: int | None = None, pair=None):
        loc = ""
        if pair is not None:
            loc = f" for pair {pair}"
        elif index is not None:
            loc = f" for row {index}"
        super().__init__(f"zero vector{loc}: cosine similarity undefined")
        self.index = index
        self.pair = pair


class MaskTooSmall(AismapError):
    """Pair mask selects fewer than 3 entries; rank correlation undefined."""


class DomainError(AismapError):
    """Value outside its mathematical domain (negative probability, etc.)."""


class EmptyMask(AismapError):
    """Mask removes every channel; an all-masked model is meaningless."""


class NoPositiveAis(AismapError):
    """All importance scores non-positive; heatmap undefined for the image."""

    def __init__(self, image_id: str = ""):
        tag = f" for image {image_id!r}" if image_id else ""
        super().__init__(f"no positive importance scores{tag}; heatmap weights undefined")
        self.image_id = image_id


class DegenerateMap(AismapError):
    """Constant-valued map: percentile binarization has no positive set."""


class EmptySample(AismapError):
    """Statistical test invoked with an empty sample."""


class DataWarning(UserWarning):
    """Non-fatal data irregularity (asymmetry, negative activations, ...)."""
