"""Graph-based image segmentation (greedy region merging over a grid graph).

The image is an 8-connected grid graph with edge weights equal to the
Euclidean color distance between Gaussian-smoothed pixels. Edges are swept in
ascending weight order; two components merge when the edge weight does not
exceed either component's internal difference plus k/|C|. Segments smaller
than min_size are merged into a neighbor in a final pass.

Determinism: edges are ordered by (weight, construction index) via a stable
sort, and union-by-size breaks ties toward the first argument, so identical
inputs always produce identical label maps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.ndimage import gaussian_filter

from .errors import ConfigError


@dataclass
class SegmentationResult:
    labels: np.ndarray  # (H, W) int32, contiguous ids 0..n_segments-1
    n_segments: int
    k: float
    min_size: int
    sigma: float


@njit(cache=True)
def _find(parent: np.ndarray, x: int) -> int:
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(cache=True)
def _union(parent: np.ndarray, size: np.ndarray, a: int, b: int) -> int:
    if size[a] < size[b]:
        a, b = b, a
    parent[b] = a
    size[a] += size[b]
    return a


@njit(cache=True)
def _merge_components(
    edge_a: np.ndarray,
    edge_b: np.ndarray,
    weights: np.ndarray,
    order: np.ndarray,
    n: int,
    k: float,
    min_size: int,
) -> tuple[np.ndarray, int]:
    parent = np.arange(n, dtype=np.int64)
    size = np.ones(n, dtype=np.int64)
    threshold = np.full(n, k, dtype=np.float64)

    for t in range(order.size):
        e = order[t]
        a = _find(parent, edge_a[e])
        b = _find(parent, edge_b[e])
        if a != b and weights[e] <= threshold[a] and weights[e] <= threshold[b]:
            root = _union(parent, size, a, b)
            threshold[root] = weights[e] + k / size[root]

    # Small-component cleanup: one sweep suffices because component sizes only
    # grow, so any final undersized component would have merged when its edge
    # was visited.
    for t in range(order.size):
        e = order[t]
        a = _find(parent, edge_a[e])
        b = _find(parent, edge_b[e])
        if a != b and (size[a] < min_size or size[b] < min_size):
            _union(parent, size, a, b)

    root_label = np.full(n, -1, dtype=np.int32)
    labels = np.empty(n, dtype=np.int32)
    next_id = 0
    for i in range(n):
        r = _find(parent, i)
        if root_label[r] < 0:
            root_label[r] = next_id
            next_id += 1
        labels[i] = root_label[r]
    return labels, next_id


def _grid_edges(height: int, width: int) -> tuple[np.ndarray, np.ndarray, list[tuple]]:
    """8-connectivity edge endpoints plus the index slices pairing them."""
    idx = np.arange(height * width, dtype=np.int64).reshape(height, width)
    pairs = [
        (idx[:, :-1], idx[:, 1:]),       # right
        (idx[:-1, :], idx[1:, :]),       # down
        (idx[:-1, :-1], idx[1:, 1:]),    # down-right
        (idx[1:, :-1], idx[:-1, 1:]),    # up-right
    ]
    a = np.concatenate([p[0].ravel() for p in pairs])
    b = np.concatenate([p[1].ravel() for p in pairs])
    return a, b, pairs


def fh_segment(
    image: np.ndarray,
    k: float = 500.0,
    min_size: int = 20,
    sigma: float = 0.5,
) -> SegmentationResult:
    """Segment an 8-bit image; intensities are used on their native 0..255 scale."""
    if k <= 0:
        raise ConfigError("k must be > 0")
    if min_size < 1:
        raise ConfigError("min_size must be >= 1")
    if sigma < 0:
        raise ConfigError("sigma must be >= 0")
    img = np.asarray(image)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3:
        raise ConfigError(f"expected 2-D or 3-D image, got shape {img.shape}")
    height, width, channels = img.shape
    smooth = img.astype(np.float64)
    if sigma > 0:
        for c in range(channels):
            smooth[:, :, c] = gaussian_filter(smooth[:, :, c], sigma=sigma)

    n = height * width
    if n == 1:
        return SegmentationResult(
            labels=np.zeros((1, 1), dtype=np.int32),
            n_segments=1, k=k, min_size=min_size, sigma=sigma,
        )

    edge_a, edge_b, pairs = _grid_edges(height, width)
    flat = smooth.reshape(n, channels)
    weights = np.concatenate(
        [
            np.sqrt(((smooth_a - smooth_b) ** 2).sum(axis=-1)).ravel()
            for smooth_a, smooth_b in (
                (smooth[:, :-1], smooth[:, 1:]),
                (smooth[:-1, :], smooth[1:, :]),
                (smooth[:-1, :-1], smooth[1:, 1:]),
                (smooth[1:, :-1], smooth[:-1, 1:]),
            )
        ]
    )
    assert weights.size == edge_a.size
    del flat
    order = np.argsort(weights, kind="stable").astype(np.int64)
    labels, n_segments = _merge_components(
        edge_a, edge_b, weights, order, n, float(k), int(min_size)
    )
    return SegmentationResult(
        labels=labels.reshape(height, width),
        n_segments=int(n_segments),
        k=k,
        min_size=min_size,
        sigma=sigma,
    )


def fh_segment_count(
    image: np.ndarray, k: float = 500.0, min_size: int = 20, sigma: float = 0.5
) -> int:
    return fh_segment(image, k=k, min_size=min_size, sigma=sigma).n_segments
