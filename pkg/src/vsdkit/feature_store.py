"""Binary feature-file contract between feature extraction and the numerics.

File layout (little-endian throughout):

    magic "VSDF" | version u16 | flags u16 | n_rows u64 | dim u64 |
    layout descriptor 4 x u32 (n_architectures, bins_per_view, views,
    per_bin_dim; zeros when absent) | id table (u32 byte length + UTF-8
    bytes per id) | row-major float32 payload

Rows are stored as 32-bit floats; all in-core arithmetic downstream promotes
to 64-bit. flags bit 0 marks a meaningful layout descriptor.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, FormatError, LayoutError

MAGIC = b"VSDF"
VERSION = 1
FLAG_HAS_LAYOUT = 0x0001

_HEADER = struct.Struct("<4sHHQQIIII")


@dataclass(frozen=True)
class LayoutDescriptor:
    """Factorization of the feature dimension for pyramid/flip features."""

    n_architectures: int
    bins_per_view: int = 14
    views: int = 2
    per_bin_dim: int = 4096

    def __post_init__(self) -> None:
        for name in ("n_architectures", "bins_per_view", "views", "per_bin_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"layout field {name} must be >= 1")

    @property
    def dim(self) -> int:
        return self.n_architectures * self.bins_per_view * self.views * self.per_bin_dim


@dataclass
class FeatureMatrix:
    ids: list[str]
    rows: np.ndarray  # (n, dim) float32
    layout: LayoutDescriptor | None = None
    _id_index: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self.rows = np.ascontiguousarray(self.rows, dtype=np.float32)
        if self.rows.ndim != 2:
            raise ConfigError(f"rows must be 2-D, got shape {self.rows.shape}")
        if len(self.ids) != self.rows.shape[0]:
            raise ConfigError(
                f"{len(self.ids)} ids for {self.rows.shape[0]} rows"
            )
        self._id_index = {}
        for i, image_id in enumerate(self.ids):
            if image_id in self._id_index:
                raise FormatError(f"duplicate id {image_id!r}")
            self._id_index[image_id] = i

    @property
    def dim(self) -> int:
        return int(self.rows.shape[1])

    def __len__(self) -> int:
        return int(self.rows.shape[0])

    def row(self, image_id: str) -> np.ndarray:
        return self.rows[self._id_index[image_id]]

    def subset(self, ids: Sequence[str]) -> "FeatureMatrix":
        idx = [self._id_index[i] for i in ids]
        return FeatureMatrix(list(ids), self.rows[idx].copy(), self.layout)


def write_features(matrix: FeatureMatrix, path: str | Path) -> None:
    layout = matrix.layout
    flags = FLAG_HAS_LAYOUT if layout is not None else 0
    desc = (
        (layout.n_architectures, layout.bins_per_view, layout.views, layout.per_bin_dim)
        if layout is not None
        else (0, 0, 0, 0)
    )
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(MAGIC, VERSION, flags, len(matrix), matrix.dim, *desc)
        )
        for image_id in matrix.ids:
            raw = image_id.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
        fh.write(np.ascontiguousarray(matrix.rows, dtype="<f4").tobytes())


def read_features(path: str | Path) -> FeatureMatrix:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"file too short for header: {len(data)} bytes")
    magic, version, flags, n_rows, dim, n_arch, bins, views, per_bin = _HEADER.unpack(
        data[: _HEADER.size]
    )
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}, expected {VERSION}")
    offset = _HEADER.size
    ids: list[str] = []
    for _ in range(n_rows):
        if offset + 4 > len(data):
            raise FormatError("truncated id table")
        (length,) = struct.unpack_from("<I", data, offset)
        offset += 4
        if offset + length > len(data):
            raise FormatError("truncated id table")
        ids.append(data[offset : offset + length].decode("utf-8"))
        offset += length
    expected = n_rows * dim * 4
    actual = len(data) - offset
    if actual != expected:
        raise FormatError(
            f"payload truncated or padded: expected {expected} bytes, got {actual}"
        )
    rows = np.frombuffer(data, dtype="<f4", count=n_rows * dim, offset=offset)
    rows = rows.reshape(n_rows, dim).copy()
    layout = None
    if flags & FLAG_HAS_LAYOUT:
        layout = LayoutDescriptor(n_arch, bins, views, per_bin)
    return FeatureMatrix(ids, rows, layout)


def l2_normalize(vector: np.ndarray) -> np.ndarray:
    """Scale a vector to unit Euclidean norm (computed in float64)."""
    v = np.asarray(vector, dtype=np.float64)
    if v.ndim != 1:
        raise ConfigError(f"expected 1-D vector, got shape {v.shape}")
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ConfigError("cannot normalize the zero vector")
    return v / norm


def l2_normalize_rows(rows: np.ndarray) -> np.ndarray:
    x = np.asarray(rows, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ConfigError(f"zero rows cannot be normalized: indices {zero.tolist()}")
    return x / norms[:, None]


def validate_layout(
    matrix: FeatureMatrix, expected: LayoutDescriptor | None = None
) -> LayoutDescriptor:
    """Check that the matrix dim matches its layout factorization.

    On mismatch, raises a LayoutError naming the factor whose value would
    reconcile the dimensions, when a single factor explains the gap.
    """
    descriptor = expected if expected is not None else matrix.layout
    if descriptor is None:
        raise ConfigError("no layout descriptor to validate against")
    if matrix.dim == descriptor.dim:
        return descriptor
    detail = _diagnose_factor(matrix.dim, descriptor)
    raise LayoutError(
        f"dim {matrix.dim} does not match layout "
        f"{descriptor.n_architectures} arch x {descriptor.bins_per_view} bins x "
        f"{descriptor.views} views x {descriptor.per_bin_dim} = {descriptor.dim}"
        + (f" ({detail})" if detail else "")
    )


def _diagnose_factor(actual_dim: int, descriptor: LayoutDescriptor) -> str:
    expected = descriptor.dim
    factors = {
        "views": descriptor.views,
        "n_architectures": descriptor.n_architectures,
        "bins_per_view": descriptor.bins_per_view,
        "per_bin_dim": descriptor.per_bin_dim,
    }
    for name, value in factors.items():
        if value > 1 and actual_dim * value == expected:
            hint = " - flip view missing?" if name == "views" else ""
            return f"factor {name}={value} disagrees: dim is missing it{hint}"
        if actual_dim == expected * value:
            return f"factor {name}={value} disagrees: dim has an extra one"
    return ""
