"""Independent oracles used by the test suite.

Everything here is deliberately written without reference to the package's
solvers: objectives are evaluated directly, minima are found by exhaustive
sign-pattern enumeration or grid-restricted coordinate refinement, and the
optimality check recomputes the standardization from scratch.  Keep it that
way — these are the second route the implementations are checked against.
"""

from __future__ import annotations

from itertools import product

import numpy as np


def l1_objective(x: np.ndarray, y: np.ndarray, beta: np.ndarray, lam: float) -> float:
    """Raw L1-penalized least squares: ||y - X b||^2 + lam * ||b||_1."""
    r = y - x @ beta
    return float(r @ r + lam * np.abs(beta).sum())


def orthant_lasso_minimum(x: np.ndarray, y: np.ndarray, lam: float) -> tuple[np.ndarray, float]:
    """Exact minimizer of the raw L1 objective by sign-pattern enumeration.

    For every sign pattern in {-1, 0, +1}^p the penalty is linear, so the
    restricted problem is a quadratic solved in closed form; candidates that
    are not stationary or violate their own sign pattern are discarded.
    Feasible for small p only (3^p patterns).
    """
    m, p = x.shape
    best_beta = np.zeros(p)
    best_obj = l1_objective(x, y, best_beta, lam)
    for signs in product((-1, 0, 1), repeat=p):
        support = [j for j, s in enumerate(signs) if s != 0]
        if not support:
            continue
        s_vec = np.array([signs[j] for j in support], dtype=float)
        xs = x[:, support]
        gram = 2.0 * xs.T @ xs
        rhs = 2.0 * xs.T @ y - lam * s_vec
        sol, *_ = np.linalg.lstsq(gram, rhs, rcond=None)
        scale = max(1.0, float(np.abs(rhs).max()))
        if np.abs(gram @ sol - rhs).max() > 1e-8 * scale:
            continue  # no stationary point in this orthant
        if np.any(sol * s_vec < -1e-12):
            continue  # leaves its own orthant
        beta = np.zeros(p)
        beta[support] = sol
        obj = l1_objective(x, y, beta, lam)
        if obj < best_obj:
            best_obj = obj
            best_beta = beta
    return best_beta, best_obj


def grid_refined_lasso(
    x: np.ndarray,
    y: np.ndarray,
    lam: float,
    lo: float = -5.0,
    hi: float = 5.0,
    step: float = 0.01,
    max_rounds: int = 200,
) -> tuple[np.ndarray, float]:
    """Coordinate refinement restricted to the grid {lo, lo+step, ..., hi}.

    Each pass exhaustively minimizes the raw L1 objective one coordinate at
    a time over the full grid; stops when a pass changes nothing.
    """
    m, p = x.shape
    grid = np.round(np.arange(round(lo / step), round(hi / step) + 1) * step, 10)
    beta = np.zeros(p)
    residual = y - x @ beta
    for _ in range(max_rounds):
        changed = False
        for j in range(p):
            partial = residual + x[:, j] * beta[j]
            # ||partial - x_j t||^2 + lam|t| over every grid value t
            quad = (partial[:, None] - np.outer(x[:, j], grid)) ** 2
            scores = quad.sum(axis=0) + lam * np.abs(grid)
            t = grid[int(np.argmin(scores))]
            if t != beta[j]:
                beta[j] = t
                changed = True
            residual = partial - x[:, j] * beta[j]
        if not changed:
            break
    return beta, l1_objective(x, y, beta, lam)


def ista_lasso(
    x: np.ndarray, y: np.ndarray, lam: float, iters: int = 200_000
) -> tuple[np.ndarray, float]:
    """Proximal-gradient descent on the raw L1 objective (cross-check only)."""
    m, p = x.shape
    lip = 2.0 * np.linalg.eigvalsh(x.T @ x).max()
    if lip <= 0:
        return np.zeros(p), l1_objective(x, y, np.zeros(p), lam)
    eta = 1.0 / lip
    beta = np.zeros(p)
    for _ in range(iters):
        grad = -2.0 * x.T @ (y - x @ beta)
        z = beta - eta * grad
        beta_next = np.sign(z) * np.maximum(np.abs(z) - eta * lam, 0.0)
        if np.abs(beta_next - beta).max() < 1e-12:
            beta = beta_next
            break
        beta = beta_next
    return beta, l1_objective(x, y, beta, lam)


def standardized_kkt_violation(
    x: np.ndarray, y: np.ndarray, beta_original: np.ndarray, lam: float
) -> float:
    """Max KKT violation for the standardized mean-scaled lasso objective.

    The model under test centers y, scales columns to unit variance and
    minimizes (1/2m)||y~ - X~ b~||^2 + lam ||b~||_1, reporting coefficients
    on the original scale.  This check independently rebuilds that problem:
    for active coordinates | |g_j| - lam | must vanish and for inactive ones
    |g_j| <= lam, where g_j = (1/m) <x~_j, r~>.  Columns with zero variance
    (dropped by the solver) are skipped.  Returns the violation in units of
    lam (i.e. already divided by lam) so tests can compare against 1e-4.
    """
    m = x.shape[0]
    mu = x.mean(axis=0)
    sigma = x.std(axis=0)
    keep = sigma > 0
    xs = (x[:, keep] - mu[keep]) / sigma[keep]
    ys = y - y.mean()
    beta_std = beta_original[keep] * sigma[keep]
    r = ys - xs @ beta_std
    g = xs.T @ r / m
    if lam <= 0:
        return float(np.abs(g).max()) if g.size else 0.0
    worst = 0.0
    for gj, bj in zip(g, beta_std):
        if bj != 0.0:
            worst = max(worst, abs(abs(gj) - lam) / lam)
        else:
            worst = max(worst, max(0.0, (abs(gj) - lam) / lam))
    return worst


def raw_kkt_violation(
    x: np.ndarray, y: np.ndarray, beta: np.ndarray, lam: float
) -> float:
    """Max KKT violation (in units of lam) for the raw L1 objective.

    Stationarity requires |dRSS/db_j| = |2 <x_j, r>| to equal lam on the
    active set and not exceed it elsewhere.
    """
    r = y - x @ beta
    g = 2.0 * x.T @ r
    if lam <= 0:
        return float(np.abs(g).max()) if g.size else 0.0
    worst = 0.0
    for gj, bj in zip(g, beta):
        if bj != 0.0:
            worst = max(worst, abs(abs(gj) - lam) / lam)
        else:
            worst = max(worst, max(0.0, (abs(gj) - lam) / lam))
    return worst
