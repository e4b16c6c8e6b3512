"""Difficulty baselines computable from pixels or file bytes.

Four signals: image area, compressed file size, summed gradient magnitude,
and the number of graph-based segments. The gradient-magnitude edge score
stands in for a learned edge detector; it serves the same role (a relative
ranking signal) and removes a trained-model dependency, which every report
should state.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ConfigError
from .segmentation import fh_segment_count


@dataclass(frozen=True)
class BaselineScores:
    image_id: str
    area: float
    filesize: float
    edge_density: float
    n_segments: int


def read_image(path: str | Path) -> np.ndarray:
    """Load a raster image as uint8, (H, W) for grayscale or (H, W, 3) otherwise.

    Portable pixmaps/graymaps (PPM/PGM) are the primary interchange format;
    anything else the imaging library can decode also works.
    """
    with Image.open(path) as img:
        if img.mode == "L":
            return np.asarray(img, dtype=np.uint8)
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def write_image(array: np.ndarray, path: str | Path) -> None:
    Image.fromarray(np.asarray(array, dtype=np.uint8)).save(path)


def area_score(image: np.ndarray) -> float:
    """Pixel count of the image (width times height)."""
    if image.ndim not in (2, 3):
        raise ConfigError(f"expected 2-D or 3-D image, got shape {image.shape}")
    return float(image.shape[0] * image.shape[1])


def filesize_score(path: str | Path) -> float:
    """Byte count of the (compressed) image file."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"not a readable file: {p}")
    return float(p.stat().st_size)


def luminance(image: np.ndarray) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        return img
    if img.ndim == 3 and img.shape[2] == 3:
        return img[:, :, 0] * 0.299 + img[:, :, 1] * 0.587 + img[:, :, 2] * 0.114
    raise ConfigError(f"expected grayscale or RGB image, got shape {image.shape}")


def edge_density(image: np.ndarray, normalize: bool = False) -> float:
    """Sum over pixels of Sobel gradient magnitude on the luminance channel.

    Gradients use periodic (wrap) boundaries, so constant images score exactly
    zero and tileable patterns are shift-invariant. `normalize` divides by the
    pixel count.
    """
    lum = luminance(image)
    up = np.roll(lum, 1, axis=0)
    down = np.roll(lum, -1, axis=0)
    left = np.roll(lum, 1, axis=1)
    right = np.roll(lum, -1, axis=1)
    row_smear = up + 2.0 * lum + down
    col_smear = left + 2.0 * lum + right
    gx = np.roll(row_smear, -1, axis=1) - np.roll(row_smear, 1, axis=1)
    gy = np.roll(col_smear, -1, axis=0) - np.roll(col_smear, 1, axis=0)
    total = float(np.hypot(gx, gy).sum())
    if normalize:
        total /= lum.size
    return total


def baseline_scores(
    path: str | Path,
    image_id: str | None = None,
    k: float = 500.0,
    min_size: int = 20,
    sigma: float = 0.5,
    normalize_edges: bool = False,
) -> BaselineScores:
    p = Path(path)
    image = read_image(p)
    return BaselineScores(
        image_id=image_id if image_id is not None else p.stem,
        area=area_score(image),
        filesize=filesize_score(p),
        edge_density=edge_density(image, normalize=normalize_edges),
        n_segments=fh_segment_count(image, k=k, min_size=min_size, sigma=sigma),
    )


def baselines_to_csv(rows: list[BaselineScores]) -> str:
    lines = ["image_id,area,filesize,edge_density,n_segments"]
    for r in rows:
        lines.append(
            f"{r.image_id},{r.area!r},{r.filesize!r},{r.edge_density!r},{r.n_segments}"
        )
    return "\n".join(lines) + "\n"
