"""Semi-supervised self-training with candidate-selection heuristics.

The loop: train a linear SVM on the labeled set L, pick k samples from the
unlabeled pool U with a heuristic, pseudo-label them with the current
classifier, move them into L, and repeat until L has grown to a multiple of
its initial size. Test-set average precision is recorded after every
training step. Pseudo-labels are never revised.

Heuristics: random, lowest ground-truth or predicted difficulty, highest or
lowest classifier confidence, and the two-stage filter (K least confident,
then k easiest by predicted difficulty).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError
from .regression import RegressionModel, linear_svc_fit, predict
from .metrics import average_precision

HEURISTIC_KINDS = (
    "RAND",
    "GTdifficulty",
    "PRdifficulty",
    "HIconfidence",
    "LOconfidence",
    "LOconfidence+PRdifficulty",
)


@dataclass(frozen=True)
class HeuristicSpec:
    kind: str
    k: int = 50
    big_k: int = 2000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in HEURISTIC_KINDS:
            raise ConfigError(f"unknown heuristic {self.kind!r}")
        if not 0 < self.k <= self.big_k:
            raise ConfigError(f"need 0 < k <= K, got k={self.k}, K={self.big_k}")


@dataclass
class SampleSplit:
    labeled: dict[str, int]  # id -> label in {-1, +1}
    unlabeled: list[str]
    test: dict[str, int]

    def __post_init__(self) -> None:
        l_ids = set(self.labeled)
        u_ids = set(self.unlabeled)
        t_ids = set(self.test)
        if len(u_ids) != len(self.unlabeled):
            raise ConfigError("duplicate ids in unlabeled pool")
        if l_ids & u_ids or l_ids & t_ids or u_ids & t_ids:
            raise ConfigError("L, U, T must be pairwise disjoint")


def select_candidates(
    spec: HeuristicSpec,
    unlabeled: Sequence[str],
    decision_values: Mapping[str, float] | None = None,
    difficulty_gt: Mapping[str, float] | None = None,
    difficulty_pred: Mapping[str, float] | None = None,
    rng: np.random.Generator | None = None,
) -> list[str]:
    """Pick k candidate ids from U according to the heuristic. Ties by id order."""
    ids = sorted(unlabeled)
    if len(ids) < spec.k:
        raise ConfigError(f"|U|={len(ids)} smaller than k={spec.k}")
    kind = spec.kind
    if kind == "RAND":
        if rng is None:
            rng = np.random.default_rng(spec.seed)
        chosen = rng.choice(len(ids), size=spec.k, replace=False)
        return [ids[i] for i in sorted(chosen)]
    if kind == "GTdifficulty":
        _require(difficulty_gt, "ground-truth difficulty scores")
        return sorted(ids, key=lambda i: (difficulty_gt[i], i))[: spec.k]
    if kind == "PRdifficulty":
        _require(difficulty_pred, "predicted difficulty scores")
        return sorted(ids, key=lambda i: (difficulty_pred[i], i))[: spec.k]
    _require(decision_values, "classifier decision values")
    if kind == "HIconfidence":
        return sorted(ids, key=lambda i: (-abs(decision_values[i]), i))[: spec.k]
    if kind == "LOconfidence":
        return sorted(ids, key=lambda i: (abs(decision_values[i]), i))[: spec.k]
    # LOconfidence+PRdifficulty
    _require(difficulty_pred, "predicted difficulty scores")
    stage1 = sorted(ids, key=lambda i: (abs(decision_values[i]), i))[: spec.big_k]
    return sorted(stage1, key=lambda i: (difficulty_pred[i], i))[: spec.k]


def _require(value, what: str) -> None:
    if value is None:
        raise ConfigError(f"heuristic requires {what}")


def pseudo_label(
    model: RegressionModel, ids: Sequence[str], features: Mapping[str, np.ndarray]
) -> dict[str, int]:
    """Sign of the decision value; exactly zero maps to negative."""
    if not ids:
        return {}
    x = np.vstack([features[i] for i in ids])
    values = predict(model, x)
    return {i: (1 if v > 0 else -1) for i, v in zip(ids, values)}


@dataclass
class SelfTrainResult:
    ap_per_iteration: list[float]  # index 0 is the classifier trained on L0
    final_labeled_size: int
    diagnostics: list[str]
    models: list[RegressionModel] = field(default_factory=list, repr=False)


def selftrain_run(
    split: SampleSplit,
    spec: HeuristicSpec,
    features: Mapping[str, np.ndarray],
    difficulty_gt: Mapping[str, float] | None = None,
    difficulty_pred: Mapping[str, float] | None = None,
    stop_multiple: int = 3,
    c: float = 1.0,
    tol: float = 1e-3,
    keep_models: bool = False,
) -> SelfTrainResult:
    """One self-training run; AP on T is recorded after every training step."""
    if stop_multiple < 1:
        raise ConfigError("stop_multiple must be >= 1")
    labeled = dict(split.labeled)
    unlabeled = sorted(split.unlabeled)
    initial_size = len(labeled)
    target_size = stop_multiple * initial_size
    test_ids = sorted(split.test)
    x_test = np.vstack([features[i] for i in test_ids])
    test_labels = np.array([1 if split.test[i] > 0 else 0 for i in test_ids])
    rng = np.random.default_rng(spec.seed)
    diagnostics: list[str] = []
    aps: list[float] = []
    models: list[RegressionModel] = []

    def train() -> RegressionModel:
        ids = sorted(labeled)
        x = np.vstack([features[i] for i in ids])
        y = np.array([labeled[i] for i in ids])
        model = linear_svc_fit(x, y, c=c, tol=tol)
        aps.append(average_precision(predict(model, x_test), test_labels))
        if keep_models:
            models.append(model)
        return model

    model = train()
    while len(labeled) < target_size:
        if len(unlabeled) < spec.k:
            diagnostics.append(
                f"unlabeled pool exhausted at |L|={len(labeled)} "
                f"(need {spec.k}, have {len(unlabeled)})"
            )
            break
        decision_values = None
        if spec.kind in ("HIconfidence", "LOconfidence", "LOconfidence+PRdifficulty"):
            values = predict(model, np.vstack([features[i] for i in unlabeled]))
            decision_values = dict(zip(unlabeled, values))
        chosen = select_candidates(
            spec,
            unlabeled,
            decision_values=decision_values,
            difficulty_gt=difficulty_gt,
            difficulty_pred=difficulty_pred,
            rng=rng,
        )
        labels = pseudo_label(model, chosen, features)
        for i in chosen:
            labeled[i] = labels[i]
        chosen_set = set(chosen)
        unlabeled = [i for i in unlabeled if i not in chosen_set]
        model = train()
    return SelfTrainResult(
        ap_per_iteration=aps,
        final_labeled_size=len(labeled),
        diagnostics=diagnostics,
        models=models,
    )


@dataclass
class RepeatedRuns:
    mean: np.ndarray  # per-iteration mean AP
    std: np.ndarray
    trajectories: list[list[float]]


def repeat_runs(trajectories: Sequence[Sequence[float]]) -> RepeatedRuns:
    """Aggregate per-iteration AP across repeated seeded runs."""
    if not trajectories:
        raise ConfigError("no runs to aggregate")
    lengths = {len(t) for t in trajectories}
    if len(lengths) != 1:
        raise ConfigError(f"trajectories have differing lengths: {sorted(lengths)}")
    arr = np.array([list(t) for t in trajectories], dtype=np.float64)
    std = arr.std(axis=0, ddof=1) if arr.shape[0] > 1 else np.zeros(arr.shape[1])
    return RepeatedRuns(mean=arr.mean(axis=0), std=std, trajectories=[list(t) for t in trajectories])


@dataclass(frozen=True)
class SyntheticSelfTrainConfig:
    n_labeled: int = 60
    n_unlabeled: int = 400
    n_test: int = 200
    dim: int = 8
    separation: float = 2.0
    difficulty_noise: float = 0.15
    k: int = 20
    big_k: int = 80
    stop_multiple: int = 3


def generate_synthetic_selftrain(
    config: SyntheticSelfTrainConfig, seed: int
) -> tuple[SampleSplit, dict[str, np.ndarray], dict[str, float], dict[str, float]]:
    """Two Gaussian class clusters with margin-based difficulty scores.

    Difficulty is built in: a sample's ground-truth difficulty decreases with
    its distance to the true class boundary, and the predicted difficulty is
    the ground truth plus seeded noise.
    """
    rng = np.random.default_rng(seed)
    direction = np.zeros(config.dim)
    direction[0] = 1.0
    half = config.separation / 2.0

    def sample(n: int, prefix: str):
        labels = np.where(rng.random(n) < 0.5, 1, -1)
        points = rng.standard_normal((n, config.dim))
        points[:, 0] += labels * half
        ids = [f"{prefix}{i:05d}" for i in range(n)]
        return ids, points, labels

    l_ids, l_x, l_y = sample(config.n_labeled, "l")
    u_ids, u_x, u_y = sample(config.n_unlabeled, "u")
    t_ids, t_x, t_y = sample(config.n_test, "t")
    if len(set(l_y)) < 2 or len(set(t_y.tolist()) | {1, -1}) < 2:
        raise ConfigError("degenerate draw: a split is single-class")

    features: dict[str, np.ndarray] = {}
    difficulty_gt: dict[str, float] = {}
    difficulty_pred: dict[str, float] = {}
    for ids, xs in ((l_ids, l_x), (u_ids, u_x), (t_ids, t_x)):
        for i, row in zip(ids, xs):
            features[i] = row
            margin = abs(float(row @ direction))
            gt = -margin
            difficulty_gt[i] = gt
            difficulty_pred[i] = gt + float(rng.normal(0.0, config.difficulty_noise))
    split = SampleSplit(
        labeled=dict(zip(l_ids, (int(v) for v in l_y))),
        unlabeled=list(u_ids),
        test=dict(zip(t_ids, (int(v) for v in t_y))),
    )
    return split, features, difficulty_gt, difficulty_pred


@dataclass
class SelfTrainBenchmarkResult:
    seeds: list[int]
    final_map: dict[str, list[float]]  # heuristic -> per-seed final AP
    baseline: list[float]  # per-seed AP of the L0-only classifier

    def mean_final(self, kind: str) -> float:
        return float(np.mean(self.final_map[kind]))


def run_selftrain_benchmark(
    config: SyntheticSelfTrainConfig,
    seeds: Sequence[int],
    kinds: Sequence[str] = ("RAND", "PRdifficulty"),
) -> SelfTrainBenchmarkResult:
    """Per-seed comparison of selection heuristics on the synthetic task."""
    final: dict[str, list[float]] = {kind: [] for kind in kinds}
    baseline: list[float] = []
    for seed in seeds:
        split, features, gt, pred = generate_synthetic_selftrain(config, seed)
        recorded_baseline = False
        for kind in kinds:
            spec = HeuristicSpec(kind=kind, k=config.k, big_k=config.big_k, seed=seed)
            result = selftrain_run(
                split,
                spec,
                features,
                difficulty_gt=gt,
                difficulty_pred=pred,
                stop_multiple=config.stop_multiple,
            )
            final[kind].append(result.ap_per_iteration[-1])
            if not recorded_baseline:
                baseline.append(result.ap_per_iteration[0])
                recorded_baseline = True
    return SelfTrainBenchmarkResult(
        seeds=list(seeds), final_map=final, baseline=baseline
    )
