"""Train/validation/test splits: proportional random and class-disjoint."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError

RANDOM_50_25_25 = "random_50_25_25"
CLASS_DISJOINT = "class_disjoint"


@dataclass(frozen=True)
class SplitSpec:
    kind: str
    seed: int = 0
    train_classes: tuple[str, ...] = ()
    test_classes: tuple[str, ...] = ()
    val_fraction_of_train: float = 1.0 / 3.0  # keeps the global 2:1 train:val ratio

    def __post_init__(self) -> None:
        if self.kind not in (RANDOM_50_25_25, CLASS_DISJOINT):
            raise ConfigError(f"unknown split kind {self.kind!r}")
        if self.kind == CLASS_DISJOINT:
            if not self.train_classes or not self.test_classes:
                raise ConfigError("class_disjoint needs both class partitions")
            if set(self.train_classes) & set(self.test_classes):
                raise ConfigError("class partitions overlap")
        if not 0.0 < self.val_fraction_of_train < 1.0:
            raise ConfigError("val_fraction_of_train must be in (0, 1)")


@dataclass
class SplitResult:
    train: list[str]
    val: list[str]
    test: list[str]
    excluded: list[str] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)


def make_splits(
    ids: Sequence[str],
    spec: SplitSpec,
    image_classes: Mapping[str, Sequence[str]] | None = None,
) -> SplitResult:
    """Produce disjoint train/val/test id lists.

    random_50_25_25 shuffles (seeded) and takes floor(n/2) and floor(n/4) for
    train and val, rounding remainders into the later sets. class_disjoint
    excludes images containing classes from both partitions (their count is
    reported) and carves validation out of the training side.
    """
    unique = sorted(set(ids))
    if len(unique) != len(ids):
        raise ConfigError("duplicate ids in split input")
    rng = np.random.default_rng(spec.seed)
    if spec.kind == RANDOM_50_25_25:
        order = [unique[i] for i in rng.permutation(len(unique))]
        n = len(order)
        n_train = n // 2
        n_val = n // 4
        result = SplitResult(
            train=order[:n_train],
            val=order[n_train : n_train + n_val],
            test=order[n_train + n_val :],
        )
    else:
        if image_classes is None:
            raise ConfigError("class_disjoint needs an image -> classes map")
        train_set = set(spec.train_classes)
        test_set = set(spec.test_classes)
        train_side: list[str] = []
        test_side: list[str] = []
        excluded: list[str] = []
        diagnostics: list[str] = []
        for image_id in unique:
            classes = set(image_classes.get(image_id, ()))
            has_train = bool(classes & train_set)
            has_test = bool(classes & test_set)
            if has_train and has_test:
                excluded.append(image_id)
            elif has_train:
                train_side.append(image_id)
            elif has_test:
                test_side.append(image_id)
            else:
                excluded.append(image_id)
                diagnostics.append(
                    f"image {image_id}: no classes from either partition, excluded"
                )
        diagnostics.insert(
            0, f"excluded {len(excluded)} images (classes from both or neither side)"
        )
        shuffled = [train_side[i] for i in rng.permutation(len(train_side))]
        n_val = int(len(shuffled) * spec.val_fraction_of_train)
        result = SplitResult(
            train=shuffled[n_val:],
            val=shuffled[:n_val],
            test=test_side,
            excluded=excluded,
            diagnostics=diagnostics,
        )
    for name, part in (("train", result.train), ("val", result.val), ("test", result.test)):
        if not part:
            raise ConfigError(f"empty {name} split")
    return result
