"""Grid data types, PGM/PPM I/O, and segmentation metrics.

On-disk rasters are plain or raw PGM/PPM with maxval 255. Writers always
emit the raw variants (P5/P6) with round-half-up quantization, so a
save/load round trip is bit-exact for 8-bit data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyLabelsError,
    LabelDomainError,
    RasterFormatError,
)

UNLABELED = 255


@dataclass(frozen=True)
class ImageRaster:
    """Pixel grid of 1 or 3 channels with intensities in [0, 1]."""

    width: int
    height: int
    channels: int
    data: np.ndarray  # (height, width, channels) float64

    def __post_init__(self):
        if self.channels not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {self.channels}")
        if self.data.shape != (self.height, self.width, self.channels):
            raise ValueError(
                f"data shape {self.data.shape} != {(self.height, self.width, self.channels)}"
            )
        if self.data.size and (self.data.min() < 0.0 or self.data.max() > 1.0):
            raise ValueError("intensities must lie in [0, 1]")
        self.data.setflags(write=False)


@dataclass(frozen=True)
class PaletteClass:
    id: int
    name: str
    color: tuple[int, int, int]


@dataclass(frozen=True)
class LabelPalette:
    """Ordered class table. Ids are 0..C-1; 255 is the UNLABELED sentinel."""

    classes: tuple[PaletteClass, ...]

    def __post_init__(self):
        ids = [c.id for c in self.classes]
        if ids != list(range(len(ids))):
            raise ValueError(f"class ids must be 0..C-1 without gaps, got {ids}")
        if len(ids) > UNLABELED:
            raise ValueError("at most 255 classes (255 is reserved)")
        names = [c.name for c in self.classes]
        if len(set(names)) != len(names):
            raise ValueError("class names must be unique")

    def __len__(self) -> int:
        return len(self.classes)

    def name_of(self, class_id: int) -> str:
        return self.classes[class_id].name

    def color_of(self, class_id: int) -> tuple[int, int, int]:
        return self.classes[class_id].color

    def with_class(self, name: str, color: tuple[int, int, int]) -> "LabelPalette":
        """New palette with one class appended (id = current count)."""
        return LabelPalette(
            self.classes + (PaletteClass(len(self.classes), name, tuple(color)),)
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "classes": [
                    {"id": c.id, "name": c.name, "color": list(c.color)}
                    for c in self.classes
                ]
            },
            indent=2,
        )

    @staticmethod
    def from_json(text: str) -> "LabelPalette":
        doc = json.loads(text)
        return LabelPalette(
            tuple(
                PaletteClass(int(c["id"]), str(c["name"]), tuple(int(v) for v in c["color"]))
                for c in doc["classes"]
            )
        )


@dataclass(frozen=True)
class SemanticRaster:
    """Fully labeled class-id grid."""

    width: int
    height: int
    data: np.ndarray  # (height, width) uint8

    def __post_init__(self):
        if self.data.shape != (self.height, self.width):
            raise ValueError(f"data shape {self.data.shape} != {(self.height, self.width)}")
        self.data.setflags(write=False)


@dataclass(frozen=True)
class SparseLabelRaster:
    """Class-id grid where UNLABELED marks pixels without ground truth."""

    width: int
    height: int
    data: np.ndarray  # (height, width) uint8, 255 = unlabeled

    def __post_init__(self):
        if self.data.shape != (self.height, self.width):
            raise ValueError(f"data shape {self.data.shape} != {(self.height, self.width)}")
        self.data.setflags(write=False)

    @property
    def labeled_fraction(self) -> float:
        return float(np.count_nonzero(self.data != UNLABELED)) / self.data.size

    @property
    def labeled_count(self) -> int:
        return int(np.count_nonzero(self.data != UNLABELED))


@dataclass(frozen=True)
class BinaryMask:
    width: int
    height: int
    data: np.ndarray  # (height, width) bool

    def __post_init__(self):
        if self.data.shape != (self.height, self.width):
            raise ValueError(f"data shape {self.data.shape} != {(self.height, self.width)}")
        self.data.setflags(write=False)

    @property
    def foreground_count(self) -> int:
        return int(np.count_nonzero(self.data))


@dataclass(frozen=True)
class Metrics:
    overall_accuracy: float
    per_class_iou: dict[int, float] = field(default_factory=dict)
    mean_iou: float = 0.0


# ---------------------------------------------------------------------------
# PGM / PPM parsing
# ---------------------------------------------------------------------------

_RAW_MAGICS = {b"P5": 1, b"P6": 3}
_PLAIN_MAGICS = {b"P2": 1, b"P3": 3}
_WHITESPACE = b" \t\n\r\x0b\x0c"


def _header_tokens(data: bytes):
    """Yield (token, start_offset, end_offset) skipping whitespace and # comments."""
    i = 0
    n = len(data)
    while i < n:
        b = data[i : i + 1]
        if b in (b"#",):
            while i < n and data[i : i + 1] != b"\n":
                i += 1
            continue
        if b in _WHITESPACE or b == b"":
            i += 1
            continue
        start = i
        while i < n and data[i : i + 1] not in _WHITESPACE and data[i : i + 1] != b"#":
            i += 1
        yield data[start:i], start, i


def _parse_header(data: bytes) -> tuple[bytes, int, int, int, int]:
    """Return (magic, width, height, channels, payload_offset)."""
    tokens = _header_tokens(data)

    def next_token(what: str):
        try:
            return next(tokens)
        except StopIteration:
            raise RasterFormatError(f"missing {what} in header", len(data)) from None

    magic, start, end = next_token("magic number")
    if magic not in _RAW_MAGICS and magic not in _PLAIN_MAGICS:
        raise RasterFormatError(f"unsupported magic {magic!r}", start)
    channels = (_RAW_MAGICS | _PLAIN_MAGICS)[magic]

    dims = []
    for what in ("width", "height", "maxval"):
        tok, start, end = next_token(what)
        try:
            value = int(tok)
        except ValueError:
            raise RasterFormatError(f"non-integer {what} {tok!r}", start) from None
        if what != "maxval" and value <= 0:
            raise RasterFormatError(f"{what} must be positive, got {value}", start)
        dims.append((value, start, end))

    (width, _, _), (height, _, _), (maxval, mstart, mend) = dims
    if maxval != 255:
        raise RasterFormatError(f"maxval must be 255, got {maxval}", mstart)
    return magic, width, height, channels, mend


def _read_values(data: bytes, magic: bytes, count: int, payload_offset: int) -> np.ndarray:
    if magic in _RAW_MAGICS:
        # Exactly one whitespace byte separates the maxval from raw samples.
        if payload_offset >= len(data) or data[payload_offset : payload_offset + 1] not in _WHITESPACE:
            raise RasterFormatError("expected whitespace before raw payload", payload_offset)
        start = payload_offset + 1
        payload = data[start : start + count]
        if len(payload) < count:
            raise RasterFormatError(
                f"payload truncated: expected {count} bytes, got {len(payload)}", len(data)
            )
        return np.frombuffer(payload, dtype=np.uint8).astype(np.int64)

    values = np.empty(count, dtype=np.int64)
    seen = 0
    for tok, start, _end in _header_tokens(data[payload_offset:]):
        try:
            v = int(tok)
        except ValueError:
            raise RasterFormatError(
                f"non-integer sample {tok!r}", payload_offset + start
            ) from None
        if not 0 <= v <= 255:
            raise RasterFormatError(f"sample {v} outside 0..255", payload_offset + start)
        if seen >= count:
            raise RasterFormatError("trailing samples beyond raster size", payload_offset + start)
        values[seen] = v
        seen += 1
    if seen < count:
        raise RasterFormatError(
            f"payload truncated: expected {count} samples, got {seen}", len(data)
        )
    return values


def load_image(data: bytes) -> ImageRaster:
    """Decode PGM (P2/P5) or PPM (P3/P6) bytes into intensities v/255."""
    magic, width, height, channels, payload_offset = _parse_header(data)
    values = _read_values(data, magic, width * height * channels, payload_offset)
    grid = values.reshape(height, width, channels).astype(np.float64) / 255.0
    return ImageRaster(width=width, height=height, channels=channels, data=grid)


def _quantize(data: np.ndarray) -> np.ndarray:
    # Round half up; np.round would round half to even.
    return np.floor(data * 255.0 + 0.5).astype(np.uint8)


def save_image(raster: ImageRaster) -> bytes:
    """Encode as raw PGM/PPM, maxval 255, round-half-up quantization."""
    magic = b"P5" if raster.channels == 1 else b"P6"
    header = b"%s\n%d %d\n255\n" % (magic, raster.width, raster.height)
    return header + _quantize(raster.data).tobytes()


def _save_id_grid(data: np.ndarray) -> bytes:
    height, width = data.shape
    return b"P5\n%d %d\n255\n" % (width, height) + data.astype(np.uint8).tobytes()


def save_semantic(raster: SemanticRaster) -> bytes:
    """Class ids stored verbatim as P5 samples."""
    return _save_id_grid(raster.data)


def save_sparse_labels(raster: SparseLabelRaster) -> bytes:
    return _save_id_grid(raster.data)


def save_mask(mask: BinaryMask) -> bytes:
    """Foreground as 255, background as 0."""
    return _save_id_grid(np.where(mask.data, 255, 0).astype(np.uint8))


def _load_id_grid(data: bytes) -> tuple[int, int, np.ndarray]:
    magic, width, height, channels, payload_offset = _parse_header(data)
    if channels != 1:
        raise RasterFormatError("label rasters must be single-channel PGM", 0)
    values = _read_values(data, magic, width * height, payload_offset)
    return width, height, values.reshape(height, width)


def load_sparse_labels(data: bytes, palette: LabelPalette) -> SparseLabelRaster:
    """Decode a PGM of class ids; every value must be a palette id or 255."""
    width, height, grid = _load_id_grid(data)
    valid = (grid < len(palette)) | (grid == UNLABELED)
    if not valid.all():
        index = int(np.flatnonzero(~valid.ravel())[0])
        value = int(grid.ravel()[index])
        raise LabelDomainError(
            f"value {value} at pixel {index} is neither a class id (0..{len(palette) - 1}) "
            f"nor the UNLABELED sentinel 255"
        )
    return SparseLabelRaster(width=width, height=height, data=grid.astype(np.uint8))


def load_semantic(data: bytes, palette: LabelPalette) -> SemanticRaster:
    """Decode a fully labeled PGM; the sentinel is not allowed."""
    width, height, grid = _load_id_grid(data)
    if (grid >= len(palette)).any():
        index = int(np.flatnonzero((grid >= len(palette)).ravel())[0])
        raise LabelDomainError(
            f"value {int(grid.ravel()[index])} at pixel {index} is not a class id"
        )
    return SemanticRaster(width=width, height=height, data=grid.astype(np.uint8))


def load_mask(data: bytes) -> BinaryMask:
    """Any nonzero sample counts as foreground."""
    width, height, grid = _load_id_grid(data)
    return BinaryMask(width=width, height=height, data=grid != 0)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def compute_metrics(pred: SemanticRaster, truth: SparseLabelRaster) -> Metrics:
    """Accuracy and IoU over labeled ground-truth pixels only."""
    if (pred.width, pred.height) != (truth.width, truth.height):
        raise DimensionMismatchError(
            f"prediction {pred.width}x{pred.height} vs truth {truth.width}x{truth.height}"
        )
    labeled = truth.data != UNLABELED
    total = int(np.count_nonzero(labeled))
    if total == 0:
        raise EmptyLabelsError("ground truth has no labeled pixels")

    p = pred.data[labeled].astype(np.int64)
    t = truth.data[labeled].astype(np.int64)
    accuracy = float(np.count_nonzero(p == t)) / total

    per_class: dict[int, float] = {}
    for c in sorted(int(v) for v in np.unique(t)):
        inter = int(np.count_nonzero((p == c) & (t == c)))
        union = int(np.count_nonzero((p == c) | (t == c)))
        per_class[c] = inter / union
    mean_iou = float(np.mean(list(per_class.values())))
    return Metrics(overall_accuracy=accuracy, per_class_iou=per_class, mean_iou=mean_iou)
