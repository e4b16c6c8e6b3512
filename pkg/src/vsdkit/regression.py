"""Kernel regression and linear SVM solvers, grid search, and persistence.

Three solvers, all linear-kernel and written here rather than wrapped:

* Kernel Ridge Regression: dual system (K + lambda I) alpha = y solved by
  Cholesky factorization; targets are centered so the bias is their mean.
* nu-SVR: the paired dual (alpha, alpha*) with box constraints [0, C],
  sum(alpha - alpha*) = 0 and sum(alpha + alpha*) = C * nu * l, optimized by
  sequential two-variable steps. Each block's sum is individually conserved,
  so working pairs are chosen inside one block by the maximal-violating-pair
  rule. The tube width epsilon is recovered from the KKT conditions.
* Linear SVC: L1 hinge-loss dual coordinate descent with the bias folded into
  the weight vector through a constant feature.

The hot loops are compiled with numba; iteration order is fixed, so fits are
deterministic for identical inputs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numba import njit
from scipy.linalg import cho_factor, cho_solve

from .errors import ConfigError, FormatError, SolverError
from .metrics import kendall_tau, mse

KIND_KRR = "krr"
KIND_NU_SVR = "nu_svr"
KIND_LINEAR_SVC = "linear_svc"


@dataclass
class RegressionModel:
    kind: str
    kernel: str
    weights: np.ndarray  # primal weight vector (linear kernel)
    bias: float
    hyperparameters: dict[str, float]
    training_ids: list[str] | None = None
    dual_coef: np.ndarray | None = None  # net per-example coefficient
    l2_normalized_inputs: bool = False
    feature_means: np.ndarray | None = None  # column standardization (combiner)
    feature_stds: np.ndarray | None = None
    kept_columns: list[int] | None = None
    diagnostics: dict = field(default_factory=dict)


def predict(model: RegressionModel, features: np.ndarray) -> np.ndarray:
    """Linear-kernel decision values for a batch of feature rows."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if model.kept_columns is not None:
        if x.shape[1] < max(model.kept_columns) + 1:
            raise ConfigError(
                f"feature dim {x.shape[1]} too small for combiner columns"
            )
        x = x[:, model.kept_columns]
    if model.feature_means is not None:
        x = (x - model.feature_means) / model.feature_stds
    if x.shape[1] != model.weights.size:
        raise ConfigError(
            f"feature dim {x.shape[1]} does not match model dim {model.weights.size}"
        )
    return x @ model.weights + model.bias


def _check_training_inputs(x: np.ndarray, y: np.ndarray) -> None:
    if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.size:
        raise ConfigError(f"bad training shapes: X {x.shape}, y {y.shape}")
    if x.shape[0] < 1:
        raise ConfigError("need at least one training example")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ConfigError("training inputs must be finite")


def krr_fit(
    features: np.ndarray,
    targets: np.ndarray,
    lam: float,
    ids: Sequence[str] | None = None,
    residual_tol: float = 1e-8,
) -> RegressionModel:
    """Kernel ridge regression with a linear kernel, solved in the dual.

    Targets are centered before solving; the mean is restored as the bias.
    The fit fails if the relative residual of the linear system exceeds
    residual_tol.
    """
    if lam <= 0:
        raise ConfigError("lambda must be > 0")
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    _check_training_inputs(x, y)
    n = y.size
    y_mean = float(y.mean())
    yc = y - y_mean
    gram = x @ x.T
    gram[np.diag_indices(n)] += lam
    alpha = cho_solve(cho_factor(gram, lower=True), yc)
    residual_vec = gram @ alpha - yc
    y_norm = float(np.linalg.norm(yc))
    residual = float(np.linalg.norm(residual_vec)) / y_norm if y_norm > 0 else 0.0
    if residual > residual_tol:
        raise SolverError(
            f"KRR solve residual {residual:.3e} exceeds {residual_tol:.1e}"
        )
    return RegressionModel(
        kind=KIND_KRR,
        kernel="linear",
        weights=x.T @ alpha,
        bias=y_mean,
        hyperparameters={"lambda": float(lam)},
        training_ids=list(ids) if ids is not None else None,
        dual_coef=alpha,
        diagnostics={"residual": residual},
    )


@njit(cache=True)
def _nu_svr_smo(
    gram: np.ndarray,
    y: np.ndarray,
    c: float,
    nu: float,
    tol: float,
    max_updates: int,
):
    l = y.size
    alpha = np.zeros(l)
    alpha_star = np.zeros(l)
    # Greedy fill to sum C*nu*l/2 per block keeps both linear constraints
    # satisfied from the start.
    remaining = c * nu * l / 2.0
    for i in range(l):
        a = c if remaining > c else remaining
        alpha[i] = a
        alpha_star[i] = a
        remaining -= a
        if remaining <= 0.0:
            break
    # g = K (alpha - alpha_star) - y; identically -y at the symmetric start.
    g = -y.copy()

    updates = 0
    violation = np.inf
    while updates < max_updates:
        up1 = -1
        low1 = -1
        up2 = -1
        low2 = -1
        up1v = -np.inf
        low1v = np.inf
        up2v = -np.inf
        low2v = np.inf
        for i in range(l):
            gi = g[i]
            if alpha[i] < c and -gi > up1v:
                up1v = -gi
                up1 = i
            if alpha[i] > 0.0 and -gi < low1v:
                low1v = -gi
                low1 = i
            if alpha_star[i] < c and gi > up2v:
                up2v = gi
                up2 = i
            if alpha_star[i] > 0.0 and gi < low2v:
                low2v = gi
                low2 = i
        v1 = up1v - low1v if (up1 >= 0 and low1 >= 0) else -np.inf
        v2 = up2v - low2v if (up2 >= 0 and low2 >= 0) else -np.inf
        violation = v1 if v1 > v2 else v2
        if violation <= tol:
            break
        if v1 >= v2:
            i, j = up1, low1
            quad = gram[i, i] + gram[j, j] - 2.0 * gram[i, j]
            if quad < 1e-12:
                quad = 1e-12
            delta = (g[j] - g[i]) / quad
            room = c - alpha[i]
            if delta > room:
                delta = room
            if delta > alpha[j]:
                delta = alpha[j]
            alpha[i] += delta
            alpha[j] -= delta
            for t in range(l):
                g[t] += delta * (gram[t, i] - gram[t, j])
        else:
            i, j = up2, low2
            quad = gram[i, i] + gram[j, j] - 2.0 * gram[i, j]
            if quad < 1e-12:
                quad = 1e-12
            delta = (g[i] - g[j]) / quad
            room = c - alpha_star[i]
            if delta > room:
                delta = room
            if delta > alpha_star[j]:
                delta = alpha_star[j]
            alpha_star[i] += delta
            alpha_star[j] -= delta
            for t in range(l):
                g[t] -= delta * (gram[t, i] - gram[t, j])
        updates += 1
    return alpha, alpha_star, g, updates, violation


def _block_multiplier(
    g: np.ndarray, a: np.ndarray, c: float, at_upper_sign: int
) -> float:
    """KKT multiplier for one dual block, from free variables or bound gaps.

    For the alpha block (at_upper_sign=+1) the multiplier r satisfies
    g >= r at a=0, g <= r at a=C, g = r when free. The alpha* block has the
    inequalities reversed (at_upper_sign=-1).
    """
    bound_eps = 1e-12 * max(c, 1.0)
    free = (a > bound_eps) & (a < c - bound_eps)
    if free.any():
        return float(g[free].mean())
    at_zero = a <= bound_eps
    at_cap = a >= c - bound_eps
    if at_upper_sign > 0:
        lo = g[at_cap].max() if at_cap.any() else None
        hi = g[at_zero].min() if at_zero.any() else None
    else:
        lo = g[at_zero].max() if at_zero.any() else None
        hi = g[at_cap].min() if at_cap.any() else None
    if lo is None:
        return float(hi)
    if hi is None:
        return float(lo)
    return float((lo + hi) / 2.0)


def nu_svr_fit(
    features: np.ndarray,
    targets: np.ndarray,
    c: float = 1.0,
    nu: float = 0.5,
    tol: float = 1e-3,
    max_updates: int = 10_000_000,
    ids: Sequence[str] | None = None,
) -> RegressionModel:
    """nu-SVR with a linear kernel, solved by two-variable SMO steps.

    nu bounds the fraction of margin errors from above and the fraction of
    support vectors from below; the tube width is a byproduct of the solution.
    """
    if c <= 0:
        raise ConfigError("C must be > 0")
    if not 0 < nu <= 1:
        raise ConfigError("nu must be in (0, 1]")
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    _check_training_inputs(x, y)
    n = y.size
    gram = x @ x.T
    alpha, alpha_star, g, updates, violation = _nu_svr_smo(
        gram, y, float(c), float(nu), float(tol), int(max_updates)
    )
    if violation > tol:
        raise SolverError(
            f"nu-SVR did not converge in {max_updates} pair updates; "
            f"final KKT violation {violation:.3e}"
        )
    net = alpha - alpha_star
    drift = abs(float(net.sum()))
    if drift > 1e-8 * c:
        raise SolverError(f"equality constraint drift {drift:.3e} exceeds 1e-8*C")
    # Free alpha variables sit at g = -eps - b (under-prediction constraint);
    # free alpha* variables at g = eps - b. Their gap recovers the tube width.
    r1 = _block_multiplier(g, alpha, c, +1)
    r2 = _block_multiplier(g, alpha_star, c, -1)
    epsilon = (r2 - r1) / 2.0
    bias = -(r1 + r2) / 2.0
    sv_eps = 1e-9 * c
    return RegressionModel(
        kind=KIND_NU_SVR,
        kernel="linear",
        weights=x.T @ net,
        bias=bias,
        hyperparameters={"C": float(c), "nu": float(nu), "tol": float(tol)},
        training_ids=list(ids) if ids is not None else None,
        dual_coef=net,
        diagnostics={
            "epsilon": float(epsilon),
            "pair_updates": int(updates),
            "kkt_violation": float(violation),
            "n_support": int(np.sum(np.abs(net) > sv_eps)),
            "n_examples": int(n),
        },
    )


def nu_svr_dual_objective(
    features: np.ndarray, targets: np.ndarray, net_coef: np.ndarray
) -> float:
    """Dual objective 0.5 d' K d - y' d for net coefficients d = alpha - alpha*."""
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    d = np.asarray(net_coef, dtype=np.float64)
    xd = x.T @ d
    return float(0.5 * xd @ xd - y @ d)


@njit(cache=True)
def _svc_dual_cd(
    x: np.ndarray,
    y: np.ndarray,
    c_bound: np.ndarray,
    tol: float,
    max_epochs: int,
    seed: int,
):
    l, dim = x.shape
    alpha = np.zeros(l)
    w = np.zeros(dim)
    q_diag = np.empty(l)
    for i in range(l):
        s = 0.0
        for t in range(dim):
            s += x[i, t] * x[i, t]
        q_diag[i] = s
    objective = np.empty(max_epochs)
    epochs = 0
    violation = np.inf
    # Coordinates are visited in a per-epoch pseudo-random permutation (fixed
    # xorshift stream, so the iteration order is deterministic per seed).
    rng_state = np.uint64(seed) * np.uint64(6364136223846793005) + np.uint64(
        1442695040888963407
    )
    perm = np.arange(l)
    for ep in range(max_epochs):
        for idx in range(l - 1, 0, -1):
            rng_state ^= rng_state >> np.uint64(12)
            rng_state ^= rng_state << np.uint64(25)
            rng_state ^= rng_state >> np.uint64(27)
            draw = rng_state * np.uint64(2685821657736338717)
            j = int(draw % np.uint64(idx + 1))
            tmp = perm[idx]
            perm[idx] = perm[j]
            perm[j] = tmp
        max_pg = 0.0
        for pos in range(l):
            i = perm[pos]
            ci = c_bound[i]
            wx = 0.0
            for t in range(dim):
                wx += w[t] * x[i, t]
            grad = y[i] * wx - 1.0
            if alpha[i] <= 0.0:
                pg = grad if grad < 0.0 else 0.0
            elif alpha[i] >= ci:
                pg = grad if grad > 0.0 else 0.0
            else:
                pg = grad
            apg = -pg if pg < 0.0 else pg
            if apg > max_pg:
                max_pg = apg
            if apg > 0.0 and q_diag[i] > 0.0:
                new_alpha = alpha[i] - grad / q_diag[i]
                if new_alpha < 0.0:
                    new_alpha = 0.0
                elif new_alpha > ci:
                    new_alpha = ci
                delta = new_alpha - alpha[i]
                if delta != 0.0:
                    alpha[i] = new_alpha
                    step = delta * y[i]
                    for t in range(dim):
                        w[t] += step * x[i, t]
        ssw = 0.0
        for t in range(dim):
            ssw += w[t] * w[t]
        ssa = 0.0
        for i in range(l):
            ssa += alpha[i]
        objective[ep] = 0.5 * ssw - ssa
        epochs = ep + 1
        violation = max_pg
        if max_pg <= tol:
            break
    return alpha, w, epochs, violation, objective[:epochs]


def linear_svc_fit(
    features: np.ndarray,
    labels: np.ndarray,
    c: float = 1.0,
    tol: float = 1e-3,
    max_epochs: int = 10000,
    ids: Sequence[str] | None = None,
    seed: int = 0,
    class_weight: str | None = None,
) -> RegressionModel:
    """L1 hinge-loss linear SVM via dual coordinate descent.

    Labels may be {-1, +1} or {0, 1}; both classes must be present. The bias
    is learned through an appended constant feature (so it is regularized,
    which is the usual trade for a single-constraint-free dual). `seed` fixes
    the per-epoch coordinate order; fits are deterministic per seed.
    class_weight="balanced" scales each example's cost by l / (2 * n_class),
    equalizing the total hinge mass of the two classes.
    """
    if c <= 0:
        raise ConfigError("C must be > 0")
    x = np.asarray(features, dtype=np.float64)
    y_raw = np.asarray(labels)
    uniques = set(np.unique(y_raw).tolist())
    if uniques == {0, 1}:
        y = np.where(y_raw == 1, 1.0, -1.0)
    elif uniques == {-1, 1}:
        y = y_raw.astype(np.float64)
    elif len(uniques) < 2:
        raise ConfigError("both classes must be present")
    else:
        raise ConfigError(f"labels must be binary, got values {sorted(uniques)}")
    _check_training_inputs(x, y)
    if class_weight is None:
        c_bound = np.full(y.size, float(c))
    elif class_weight == "balanced":
        n_pos = int(np.sum(y > 0))
        n_neg = y.size - n_pos
        c_bound = np.where(
            y > 0, c * y.size / (2.0 * n_pos), c * y.size / (2.0 * n_neg)
        )
    else:
        raise ConfigError(f"unknown class_weight {class_weight!r}")
    augmented = np.ascontiguousarray(np.hstack([x, np.ones((x.shape[0], 1))]))
    alpha, w, epochs, violation, objective = _svc_dual_cd(
        augmented, y, c_bound, float(tol), int(max_epochs), int(seed)
    )
    if violation > tol:
        raise SolverError(
            f"linear SVC did not converge in {max_epochs} epochs; "
            f"final KKT violation {violation:.3e}"
        )
    return RegressionModel(
        kind=KIND_LINEAR_SVC,
        kernel="linear",
        weights=w[:-1].copy(),
        bias=float(w[-1]),
        hyperparameters={"C": float(c), "tol": float(tol)},
        training_ids=list(ids) if ids is not None else None,
        dual_coef=alpha * y,
        diagnostics={
            "epochs": int(epochs),
            "kkt_violation": float(violation),
            "dual_objective": [float(v) for v in objective],
        },
    )


@dataclass(frozen=True)
class Dataset:
    ids: tuple[str, ...]
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        if len(self.ids) != self.x.shape[0] or len(self.ids) != self.y.size:
            raise ConfigError("dataset ids, features, and targets must align")


@dataclass(frozen=True)
class GridPoint:
    params: dict
    tau: float
    mse: float


@dataclass
class GridSearchReport:
    points: list[GridPoint]
    selected: dict
    seed: int | None = None


def default_grid(kind: str) -> list[dict]:
    if kind == KIND_KRR:
        return [{"lambda": 10.0**e} for e in range(-4, 3)]
    if kind == KIND_NU_SVR:
        return [
            {"C": 2.0**e, "nu": nu}
            for e in range(-6, 7, 2)
            for nu in (0.2, 0.4, 0.5, 0.6, 0.8)
        ]
    raise ConfigError(f"no default grid for kind {kind!r}")


def _fit_at(kind: str, train: Dataset, params: dict) -> RegressionModel:
    if kind == KIND_KRR:
        return krr_fit(train.x, train.y, lam=params["lambda"], ids=train.ids)
    if kind == KIND_NU_SVR:
        return nu_svr_fit(
            train.x, train.y, c=params["C"], nu=params["nu"], ids=train.ids
        )
    raise ConfigError(f"grid search supports krr and nu_svr, not {kind!r}")


def _selection_key(point: GridPoint) -> tuple:
    tau = point.tau if np.isfinite(point.tau) else -np.inf
    # Higher tau wins; ties prefer smaller C, then larger lambda, then smaller nu.
    return (
        -tau,
        point.params.get("C", 0.0),
        -point.params.get("lambda", 0.0),
        point.params.get("nu", 0.0),
    )


def grid_search(
    train: Dataset,
    val: Dataset,
    kind: str,
    grid: Sequence[dict] | None = None,
    seed: int | None = None,
) -> tuple[GridSearchReport, RegressionModel]:
    """Fit one model per grid point on train and select by validation tau.

    Grid points whose predictions are completely tied have no defined tau and
    are never selected. Returns the report and the winning model (fit on the
    training set).
    """
    overlap = set(train.ids) & set(val.ids)
    if overlap:
        raise ConfigError(f"train/val overlap: {sorted(overlap)[:5]}")
    grid = list(grid) if grid is not None else default_grid(kind)
    if not grid:
        raise ConfigError("empty grid")
    points: list[GridPoint] = []
    models: list[RegressionModel] = []
    for params in grid:
        model = _fit_at(kind, train, params)
        pred = predict(model, val.x)
        try:
            tau = kendall_tau(pred, val.y).tau
        except ConfigError:
            tau = float("nan")
        points.append(GridPoint(params=dict(params), tau=tau, mse=mse(pred, val.y)))
        models.append(model)
    best_idx = min(range(len(points)), key=lambda i: _selection_key(points[i]))
    if not np.isfinite(points[best_idx].tau):
        raise ConfigError("no grid point produced a defined validation tau")
    report = GridSearchReport(points=points, selected=dict(points[best_idx].params), seed=seed)
    return report, models[best_idx]


def combine_predictors(
    columns: np.ndarray,
    targets: np.ndarray,
    ids: Sequence[str] | None = None,
    c: float = 1.0,
    nu: float = 0.5,
    tol: float = 1e-3,
) -> tuple[RegressionModel, list[str]]:
    """Combine aligned score columns into one predictor via nu-SVR.

    Each column is standardized with its training mean/std; constant columns
    carry no ranking signal and are dropped with a diagnostic.
    """
    x = np.asarray(columns, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ConfigError("combine_predictors needs >= 2 aligned score columns")
    _check_training_inputs(x, y)
    means = x.mean(axis=0)
    stds = x.std(axis=0)
    kept = [int(i) for i in np.flatnonzero(stds > 0.0)]
    diagnostics = [
        f"column {i}: constant, dropped" for i in np.flatnonzero(stds == 0.0)
    ]
    if not kept:
        raise ConfigError("all columns constant; nothing to combine")
    xs = (x[:, kept] - means[kept]) / stds[kept]
    model = nu_svr_fit(xs, y, c=c, nu=nu, tol=tol, ids=ids)
    model.feature_means = means[kept]
    model.feature_stds = stds[kept]
    model.kept_columns = kept
    return model, diagnostics


def _array_field(value: np.ndarray | None) -> list | None:
    return None if value is None else [float(v) for v in np.asarray(value).ravel()]


def _model_payload(model: RegressionModel) -> dict:
    return {
        "kind": model.kind,
        "kernel": model.kernel,
        "weights": _array_field(model.weights),
        "bias": float(model.bias),
        "hyperparameters": {k: float(v) for k, v in model.hyperparameters.items()},
        "training_ids": model.training_ids,
        "dual_coef": _array_field(model.dual_coef),
        "l2_normalized_inputs": bool(model.l2_normalized_inputs),
        "feature_means": _array_field(model.feature_means),
        "feature_stds": _array_field(model.feature_stds),
        "kept_columns": model.kept_columns,
    }


def _payload_hash(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def save_model(model: RegressionModel, path: str | Path) -> None:
    payload = _model_payload(model)
    document = dict(payload)
    document["content_hash"] = _payload_hash(payload)
    Path(path).write_text(json.dumps(document, indent=2, sort_keys=True) + "\n")


def load_model(path: str | Path) -> RegressionModel:
    document = json.loads(Path(path).read_text())
    stored_hash = document.pop("content_hash", None)
    if stored_hash is None:
        raise FormatError("model file missing content hash")
    if _payload_hash(document) != stored_hash:
        raise FormatError("model file content hash mismatch")

    def arr(key):
        return None if document[key] is None else np.array(document[key], dtype=np.float64)

    return RegressionModel(
        kind=document["kind"],
        kernel=document["kernel"],
        weights=arr("weights"),
        bias=document["bias"],
        hyperparameters=document["hyperparameters"],
        training_ids=document["training_ids"],
        dual_coef=arr("dual_coef"),
        l2_normalized_inputs=document["l2_normalized_inputs"],
        feature_means=arr("feature_means"),
        feature_stds=arr("feature_stds"),
        kept_columns=document["kept_columns"],
    )
