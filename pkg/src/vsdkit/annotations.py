"""Timed-annotation log processing: from raw yes/no response times to
per-image difficulty scores.

The cleanup recipe: drop very long responses, z-score each annotator's times,
drop unreliable annotators (too few answers, slow with thin evidence, or
inaccurate), aggregate per image with a geometric mean of shifted z-scores,
and add a penalty proportional to the fraction of wrong answers.

The geometric mean is undefined for non-positive values, so it is computed on
globally shifted values (shift = 1 + max(0, -min(z)) across the dataset) and
the shift is subtracted afterwards. The shift is part of every output manifest.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, ParseError
from .metrics import Box

LOG_HEADER = (
    "annotator_id",
    "image_id",
    "question_class",
    "question_polarity",
    "answer",
    "response_time_s",
)

BOX_HEADER = (
    "image_id",
    "class",
    "xmin",
    "ymin",
    "xmax",
    "ymax",
    "truncated",
    "occluded",
    "difficult",
)

SIZE_HEADER = ("image_id", "width", "height")


@dataclass(frozen=True)
class ResponseRecord:
    """One annotator's timed yes/no answer about one image."""

    annotator_id: str
    image_id: str
    question_class: str
    question_polarity: str  # "positive" | "negative": whether the class is present
    answer: str  # "yes" | "no"
    response_time: float

    @property
    def correct(self) -> bool:
        return (self.answer == "yes") == (self.question_polarity == "positive")


@dataclass(frozen=True)
class AnnotatorStats:
    annotator_id: str
    count: int
    mean_time: float
    std_time: float
    accuracy: float
    degenerate: bool  # a single record: std is 0 by convention, not evidence


@dataclass(frozen=True)
class DifficultyScore:
    image_id: str
    score: float
    n_retained: int
    n_wrong: int


@dataclass(frozen=True)
class ImageProperties:
    """Ground-truth-derived image properties used in the difficulty analysis."""

    image_id: str
    n_objects: int
    mean_area_fraction: float
    non_centeredness: float
    n_classes: int
    n_truncated: int
    n_occluded: int
    n_difficult: int


@dataclass(frozen=True)
class ObjectBox:
    image_id: str
    class_name: str
    box: Box
    truncated: bool
    occluded: bool
    difficult: bool


PROPERTY_NAMES = (
    "n_objects",
    "mean_area_fraction",
    "non_centeredness",
    "n_classes",
    "n_truncated",
    "n_occluded",
    "n_difficult",
)


def parse_annotation_log(
    stream: io.TextIOBase | Iterable[str],
) -> tuple[list[ResponseRecord], list[str]]:
    """Parse a comma-separated annotation log.

    Returns (records, diagnostics); malformed data rows are skipped and
    reported with their 1-based line numbers. A missing or wrong header is a
    hard parse error.
    """
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty annotation log: missing header row") from None
    if tuple(h.strip() for h in header) != LOG_HEADER:
        raise ParseError(
            f"bad header: expected {','.join(LOG_HEADER)}, got {','.join(header)}"
        )
    records: list[ResponseRecord] = []
    diagnostics: list[str] = []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not field.strip() for field in row):
            continue
        if len(row) != len(LOG_HEADER):
            diagnostics.append(f"line {line_no}: expected 6 fields, got {len(row)}")
            continue
        annotator_id, image_id, qclass, polarity, answer, time_s = (
            field.strip() for field in row
        )
        if polarity not in ("positive", "negative"):
            diagnostics.append(f"line {line_no}: bad question_polarity {polarity!r}")
            continue
        if answer not in ("yes", "no"):
            diagnostics.append(f"line {line_no}: bad answer {answer!r}")
            continue
        try:
            t = float(time_s)
        except ValueError:
            diagnostics.append(f"line {line_no}: bad response_time_s {time_s!r}")
            continue
        if not math.isfinite(t) or t <= 0.0:
            diagnostics.append(f"line {line_no}: non-positive response time {time_s}")
            continue
        records.append(
            ResponseRecord(annotator_id, image_id, qclass, polarity, answer, t)
        )
    return records, diagnostics


def filter_long_times(
    records: Sequence[ResponseRecord], max_time: float = 20.0
) -> list[ResponseRecord]:
    """Drop responses slower than max_time seconds, preserving order."""
    return [r for r in records if r.response_time <= max_time]


def annotator_stats(
    records: Sequence[ResponseRecord],
) -> dict[str, AnnotatorStats]:
    """Per-annotator time statistics (sample std) and answer accuracy."""
    grouped: dict[str, list[ResponseRecord]] = {}
    for r in records:
        grouped.setdefault(r.annotator_id, []).append(r)
    stats: dict[str, AnnotatorStats] = {}
    for annotator_id in sorted(grouped):
        rs = grouped[annotator_id]
        times = np.array([r.response_time for r in rs])
        n = times.size
        mean_time = float(times.mean())
        std_time = float(times.std(ddof=1)) if n > 1 else 0.0
        accuracy = sum(r.correct for r in rs) / n
        stats[annotator_id] = AnnotatorStats(
            annotator_id=annotator_id,
            count=n,
            mean_time=mean_time,
            std_time=std_time,
            accuracy=accuracy,
            degenerate=n < 2,
        )
    return stats


def filter_annotators(
    stats: Mapping[str, AnnotatorStats],
    min_count: int = 3,
    slow_mean: float = 10.0,
    slow_count: int = 10,
    min_accuracy: float = 0.90,
) -> list[str]:
    """Retained annotator ids after the three exclusion rules.

    Drops: fewer than min_count answers; fewer than slow_count answers with a
    mean time above slow_mean (the slow-mean rule only applies below the count
    threshold); accuracy below min_accuracy.
    """
    retained = []
    for annotator_id in sorted(stats):
        s = stats[annotator_id]
        if s.count < min_count:
            continue
        if s.count < slow_count and s.mean_time > slow_mean:
            continue
        if s.accuracy < min_accuracy:
            continue
        retained.append(annotator_id)
    return retained


def normalize_times(
    records: Sequence[ResponseRecord],
    stats: Mapping[str, AnnotatorStats],
) -> tuple[list[ResponseRecord], list[str]]:
    """Z-score each record's time with its annotator's mean/std.

    Annotators with zero time variance cannot be normalized and are excluded
    with a diagnostic. Records must belong to annotators present in stats.
    """
    diagnostics: list[str] = []
    zero_std = {a for a, s in stats.items() if s.std_time == 0.0}
    for annotator_id in sorted(zero_std):
        if any(r.annotator_id == annotator_id for r in records):
            diagnostics.append(
                f"annotator {annotator_id}: zero time variance, excluded"
            )
    out: list[ResponseRecord] = []
    for r in records:
        if r.annotator_id not in stats:
            raise ConfigError(f"no stats for annotator {r.annotator_id}")
        if r.annotator_id in zero_std:
            continue
        s = stats[r.annotator_id]
        out.append(replace(r, response_time=(r.response_time - s.mean_time) / s.std_time))
    return out, diagnostics


def compute_shift(z_values: Sequence[float]) -> float:
    """Global shift making every z + shift strictly positive: 1 + max(0, -min z)."""
    z = np.asarray(z_values, dtype=np.float64)
    if z.size == 0:
        raise ConfigError("cannot compute shift over zero values")
    return float(1.0 + max(0.0, -z.min()))


def image_difficulty(
    records: Sequence[ResponseRecord], shift: float
) -> dict[str, DifficultyScore]:
    """Geometric mean of shifted normalized times per image, shift removed.

    score = exp(mean(ln(z_i + shift))) - shift. Order-independent: records are
    grouped by image and reduced with a mean of logs.
    """
    grouped: dict[str, list[ResponseRecord]] = {}
    for r in records:
        grouped.setdefault(r.image_id, []).append(r)
    scores: dict[str, DifficultyScore] = {}
    for image_id in sorted(grouped):
        rs = grouped[image_id]
        z = np.array([r.response_time for r in rs])
        shifted = z + shift
        if np.any(shifted <= 0.0):
            raise ConfigError(
                f"shift {shift} leaves non-positive values for image {image_id}"
            )
        score = float(np.exp(np.mean(np.log(shifted))) - shift)
        n_wrong = sum(not r.correct for r in rs)
        scores[image_id] = DifficultyScore(
            image_id=image_id, score=score, n_retained=len(rs), n_wrong=n_wrong
        )
    return scores


def apply_wrong_answer_penalty(
    score: float, n_wrong: int, n_total: int, penalty_weight: float = 0.5
) -> float:
    """score + penalty_weight * n_wrong / n_total."""
    if n_total <= 0:
        raise ConfigError("penalty needs n_total > 0")
    if not 0 <= n_wrong <= n_total:
        raise ConfigError(f"n_wrong {n_wrong} outside [0, {n_total}]")
    if penalty_weight < 0:
        raise ConfigError("penalty_weight must be >= 0")
    return score + penalty_weight * n_wrong / n_total


def per_class_difficulty(
    scores: Mapping[str, float],
    image_classes: Mapping[str, Sequence[str]],
    all_classes: Sequence[str] | None = None,
) -> tuple[list[tuple[str, float]], list[str]]:
    """Mean score per class over images containing the class, easiest first.

    Every image in the class map must have a score. Classes without any image
    (possible when all_classes names them explicitly) are omitted with a
    diagnostic.
    """
    by_class: dict[str, list[float]] = {c: [] for c in (all_classes or ())}
    for image_id in sorted(image_classes):
        if image_id not in scores:
            raise ConfigError(f"image {image_id} has no difficulty score")
        for c in set(image_classes[image_id]):
            by_class.setdefault(c, []).append(scores[image_id])
    diagnostics = []
    table = []
    for c in sorted(by_class):
        if not by_class[c]:
            diagnostics.append(f"class {c}: no images, omitted")
            continue
        table.append((c, float(np.mean(by_class[c]))))
    table.sort(key=lambda item: (item[1], item[0]))
    return table, diagnostics


def image_properties(
    boxes: Sequence[ObjectBox],
    image_sizes: Mapping[str, tuple[int, int]],
) -> tuple[list[ImageProperties], list[str]]:
    """Derive the seven analysis properties from box metadata.

    non_centeredness is the mean distance of box centers to the image center,
    normalized by sqrt(image area); mean_area_fraction is the mean box area
    over the image area. Images lacking a size entry are excluded with a
    diagnostic, as are sized images without any boxes.
    """
    grouped: dict[str, list[ObjectBox]] = {}
    for b in boxes:
        grouped.setdefault(b.image_id, []).append(b)
    diagnostics: list[str] = []
    out: list[ImageProperties] = []
    for image_id in sorted(set(grouped) | set(image_sizes)):
        if image_id not in image_sizes:
            diagnostics.append(f"image {image_id}: no size metadata, excluded")
            continue
        if image_id not in grouped:
            diagnostics.append(f"image {image_id}: no box metadata, excluded")
            continue
        width, height = image_sizes[image_id]
        if width <= 0 or height <= 0:
            raise ConfigError(f"image {image_id}: bad size {width}x{height}")
        area = float(width * height)
        objs = grouped[image_id]
        cx, cy = width / 2.0, height / 2.0
        dists = []
        fracs = []
        for o in objs:
            bx = (o.box.xmin + o.box.xmax) / 2.0
            by = (o.box.ymin + o.box.ymax) / 2.0
            dists.append(math.hypot(bx - cx, by - cy))
            fracs.append(o.box.area / area)
        out.append(
            ImageProperties(
                image_id=image_id,
                n_objects=len(objs),
                mean_area_fraction=float(np.mean(fracs)),
                non_centeredness=float(np.mean(dists)) / math.sqrt(area),
                n_classes=len({o.class_name for o in objs}),
                n_truncated=sum(o.truncated for o in objs),
                n_occluded=sum(o.occluded for o in objs),
                n_difficult=sum(o.difficult for o in objs),
            )
        )
    return out, diagnostics


def property_scores(
    properties: Sequence[ImageProperties],
) -> tuple[list[str], dict[str, np.ndarray]]:
    """Seven aligned per-image score vectors, keyed by property name."""
    ids = [p.image_id for p in properties]
    vectors = {
        name: np.array([getattr(p, name) for p in properties], dtype=np.float64)
        for name in PROPERTY_NAMES
    }
    return ids, vectors


@dataclass(frozen=True)
class PipelineConfig:
    max_time: float = 20.0
    min_count: int = 3
    slow_mean: float = 10.0
    slow_count: int = 10
    min_accuracy: float = 0.90
    penalty_weight: float = 0.5


@dataclass
class PipelineResult:
    scores: list[DifficultyScore]
    shift: float
    config: PipelineConfig
    retained_annotators: list[str]
    diagnostics: list[str]


def score_annotation_log(
    records: Sequence[ResponseRecord], config: PipelineConfig = PipelineConfig()
) -> PipelineResult:
    """Full cleanup pipeline from parsed records to penalized difficulty scores.

    Filter order: long-time filter, annotator exclusion rules, zero-variance
    exclusion during normalization, then per-image aggregation and the wrong
    answer penalty. Deterministic: output is sorted by image id.
    """
    diagnostics: list[str] = []
    kept = filter_long_times(records, config.max_time)
    dropped_long = len(records) - len(kept)
    if dropped_long:
        diagnostics.append(f"dropped {dropped_long} responses over {config.max_time}s")
    stats = annotator_stats(kept)
    retained_ids = filter_annotators(
        stats,
        min_count=config.min_count,
        slow_mean=config.slow_mean,
        slow_count=config.slow_count,
        min_accuracy=config.min_accuracy,
    )
    dropped_annotators = sorted(set(stats) - set(retained_ids))
    for annotator_id in dropped_annotators:
        diagnostics.append(f"annotator {annotator_id}: excluded by filter rules")
    kept = [r for r in kept if r.annotator_id in set(retained_ids)]
    retained_stats = {a: stats[a] for a in retained_ids}
    z_records, norm_diags = normalize_times(kept, retained_stats)
    diagnostics.extend(norm_diags)
    if not z_records:
        raise ConfigError("no records survive filtering; cannot score")
    shift = compute_shift([r.response_time for r in z_records])
    raw_scores = image_difficulty(z_records, shift)
    scored_images = set(raw_scores)
    lost_images = {r.image_id for r in records} - scored_images
    for image_id in sorted(lost_images):
        diagnostics.append(f"image {image_id}: zero retained records, no score emitted")
    final = [
        DifficultyScore(
            image_id=s.image_id,
            score=apply_wrong_answer_penalty(
                s.score, s.n_wrong, s.n_retained, config.penalty_weight
            ),
            n_retained=s.n_retained,
            n_wrong=s.n_wrong,
        )
        for s in (raw_scores[i] for i in sorted(raw_scores))
    ]
    return PipelineResult(
        scores=final,
        shift=shift,
        config=config,
        retained_annotators=retained_ids,
        diagnostics=diagnostics,
    )


def scores_to_csv(scores: Sequence[DifficultyScore]) -> str:
    lines = ["image_id,score,n_retained,n_wrong"]
    for s in scores:
        lines.append(f"{s.image_id},{s.score!r},{s.n_retained},{s.n_wrong}")
    return "\n".join(lines) + "\n"


def scores_from_csv(text: str) -> list[DifficultyScore]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != (
        "image_id",
        "score",
        "n_retained",
        "n_wrong",
    ):
        raise ParseError("bad score file header")
    out = []
    for row in reader:
        if not row:
            continue
        out.append(DifficultyScore(row[0], float(row[1]), int(row[2]), int(row[3])))
    return out


def parse_box_metadata(
    stream: io.TextIOBase | Iterable[str],
) -> tuple[list[ObjectBox], list[str]]:
    """Parse the object-box metadata table (one row per annotated box)."""
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != BOX_HEADER:
        raise ParseError(f"bad box metadata header: expected {','.join(BOX_HEADER)}")
    boxes: list[ObjectBox] = []
    diagnostics: list[str] = []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not f.strip() for f in row):
            continue
        if len(row) != len(BOX_HEADER):
            diagnostics.append(f"line {line_no}: expected 9 fields, got {len(row)}")
            continue
        try:
            box = Box(float(row[2]), float(row[3]), float(row[4]), float(row[5]))
            boxes.append(
                ObjectBox(
                    image_id=row[0].strip(),
                    class_name=row[1].strip(),
                    box=box,
                    truncated=bool(int(row[6])),
                    occluded=bool(int(row[7])),
                    difficult=bool(int(row[8])),
                )
            )
        except ValueError as exc:
            diagnostics.append(f"line {line_no}: {exc}")
    return boxes, diagnostics


def parse_size_table(
    stream: io.TextIOBase | Iterable[str],
) -> dict[str, tuple[int, int]]:
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != SIZE_HEADER:
        raise ParseError(f"bad size table header: expected {','.join(SIZE_HEADER)}")
    sizes: dict[str, tuple[int, int]] = {}
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not f.strip() for f in row):
            continue
        if len(row) != 3:
            raise ParseError(f"line {line_no}: expected 3 fields, got {len(row)}")
        sizes[row[0].strip()] = (int(row[1]), int(row[2]))
    return sizes
