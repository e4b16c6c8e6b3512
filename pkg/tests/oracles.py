"""Independent reference implementations used only to check the real ones.

Everything here is deliberately slow and simple: quadratic pair counting,
dense matrix inversion, projected-gradient QP, and full-batch subgradient
descent. None of it shares code with the package's solvers.
"""

from __future__ import annotations

import numpy as np


def kendall_tau_brute(a, b):
    """All-pairs tau-b: returns (concordant, discordant, ties_a, ties_b, tau)."""
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    n = av.size
    da = np.sign(av[:, None] - av[None, :])
    db = np.sign(bv[:, None] - bv[None, :])
    iu = np.triu_indices(n, k=1)
    prod = da[iu] * db[iu]
    concordant = int(np.sum(prod > 0))
    discordant = int(np.sum(prod < 0))
    ties_a = int(np.sum(da[iu] == 0))
    ties_b = int(np.sum(db[iu] == 0))
    n0 = n * (n - 1) // 2
    denom = np.sqrt(float(n0 - ties_a) * float(n0 - ties_b))
    tau = (concordant - discordant) / denom
    return concordant, discordant, ties_a, ties_b, tau


def krr_dense_predictions(x_train, y_train, lam, x_test):
    """KRR predictions through an explicit matrix inverse (linear kernel)."""
    x_train = np.asarray(x_train, dtype=np.float64)
    y = np.asarray(y_train, dtype=np.float64)
    y_mean = y.mean()
    gram = x_train @ x_train.T
    inv = np.linalg.inv(gram + lam * np.eye(gram.shape[0]))
    alpha = inv @ (y - y_mean)
    return np.asarray(x_test, dtype=np.float64) @ x_train.T @ alpha + y_mean


def _project_box_sum(v, cap, total, iterations=80):
    """Project v onto {0 <= x <= cap, sum(x) = total} by bisection on the shift."""
    lo = float(v.min()) - cap - 1.0
    hi = float(v.max()) + 1.0
    for _ in range(iterations):
        theta = 0.5 * (lo + hi)
        s = np.clip(v - theta, 0.0, cap).sum()
        if s > total:
            lo = theta
        else:
            hi = theta
    return np.clip(v - 0.5 * (lo + hi), 0.0, cap)


def nu_svr_reference_objective(x, y, c, nu, iterations=20000):
    """High-precision dual objective via accelerated projected gradient.

    Solves min 0.5 d'Kd - y'd over alpha, alpha* in [0, C]^l with
    sum(alpha) = sum(alpha*) = C*nu*l/2 (the equality form of the paired
    constraints), using FISTA with objective-restart.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    l = y.size
    gram = x @ x.T
    lip = 2.0 * float(np.linalg.eigvalsh(gram).max()) + 1e-12
    target = c * nu * l / 2.0

    def objective(a, a_star):
        d = a - a_star
        return 0.5 * d @ gram @ d - y @ d

    def gradient(a, a_star):
        g = gram @ (a - a_star) - y
        return g, -g

    a = _project_box_sum(np.zeros(l), c, target)
    a_star = a.copy()
    xa, xa_star = a.copy(), a_star.copy()
    t = 1.0
    best = objective(a, a_star)
    prev = best
    for _ in range(iterations):
        ga, gs = gradient(a, a_star)
        new_a = _project_box_sum(a - ga / lip, c, target)
        new_s = _project_box_sum(a_star - gs / lip, c, target)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        beta = (t - 1.0) / t_next
        a = new_a + beta * (new_a - xa)
        a_star = new_s + beta * (new_s - xa_star)
        xa, xa_star = new_a, new_s
        t = t_next
        value = objective(new_a, new_s)
        if value > prev:  # restart momentum when the objective backslides
            a, a_star = new_a.copy(), new_s.copy()
            t = 1.0
        prev = value
        if value < best:
            best = value
    return best


def svc_subgradient_weights(x, y, c, iterations=200000):
    """Full-batch deterministic subgradient descent on the primal SVM.

    Operates on bias-augmented features (to match the solver under test) and
    returns the averaged second-half iterate.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xa = np.hstack([x, np.ones((x.shape[0], 1))])
    w = np.zeros(xa.shape[1])
    accum = np.zeros_like(w)
    count = 0
    for t in range(1, iterations + 1):
        margins = y * (xa @ w)
        violators = margins < 1.0
        grad = w - c * (y[violators] @ xa[violators])
        w = w - grad / t
        if t > iterations // 2:
            accum += w
            count += 1
    return accum / count
