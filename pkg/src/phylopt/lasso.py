"""L1-penalized least squares over gene-inclusion configurations.

The design matrix holds one 0/1 row per evaluated configuration and the
response is a branch's bootstrap support across those configurations.
Sweeping the penalty from its all-zero threshold downwards, the order and
sign with which genes' coefficients become nonzero rank how strongly each
gene raises or lowers that branch's support.

Two solver modes share one coordinate-descent core:

* the default mode centers the response, scales columns to unit variance
  and minimizes ``(1/2m) ||y~ - X~ b||^2 + lam ||b||_1`` with an unpenalized
  intercept, reporting coefficients on the original scale (signs and entry
  order are unaffected by the positive rescaling);
* raw mode minimizes ``||y - X b||^2 + lam ||b||_1`` exactly as given, with
  no intercept — the form used for oracle comparisons.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .journal import JournalRecord
from .newick import Bipartition, branch_support, parse_newick

logger = logging.getLogger(__name__)

NEGATIVE = "negative"
POSITIVE = "positive"


class InsufficientDataError(ValueError):
    """Too few journal entries to pose a regression problem."""


def soft_threshold(z: float, lam: float) -> float:
    """sign(z) * max(|z| - lam, 0), the scalar L1 proximal step."""
    if lam < 0:
        raise ValueError("threshold must be >= 0")
    if z > lam:
        return z - lam
    if z < -lam:
        return z + lam
    return 0.0


@dataclass
class LassoProblem:
    """0/1 design over genes against one branch's support values."""

    x: np.ndarray
    y: np.ndarray
    labels: tuple[int, ...]

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.ndim != 2:
            raise ValueError("design matrix must be 2-D")
        m, p = self.x.shape
        if m < 2:
            raise InsufficientDataError(f"need at least 2 rows, got {m}")
        if p < 1:
            raise ValueError("need at least one column")
        if self.y.shape != (m,):
            raise ValueError(f"response shape {self.y.shape} != ({m},)")
        if not np.all((self.x == 0) | (self.x == 1)):
            raise ValueError("design entries must be 0 or 1")
        if np.any(self.y < 0) or np.any(self.y > 100):
            raise ValueError("responses must lie in [0, 100]")
        if len(self.labels) != p:
            raise ValueError("one label per column required")

    @property
    def shape(self) -> tuple[int, int]:
        return self.x.shape

    def dump_tsv(self) -> str:
        lines = []
        for yi, row in zip(self.y, self.x):
            lines.append("\t".join([f"{yi:.6g}"] + [str(int(v)) for v in row]))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class CoordinateDescentResult:
    beta: np.ndarray  # original scale, full column count
    intercept: float
    converged: bool
    sweeps: int


@dataclass(frozen=True)
class EntryEvent:
    """First appearance of a gene on the penalty path."""

    label: int
    grid_index: int
    lam: float
    sign: int  # +1 or -1 at entry
    strength: float  # |standardized coefficient| at entry (tie-break only)


@dataclass
class LassoPathResult:
    lambdas: np.ndarray
    coefs: np.ndarray  # (len(lambdas), p), original scale
    intercepts: np.ndarray
    entries: list[EntryEvent]
    dropped: tuple[int, ...]  # labels of constant columns (undetermined effect)
    nonconverged: tuple[int, ...] = ()
    labels: tuple[int, ...] = field(default_factory=tuple)

    def dump_tsv(self) -> str:
        lines = []
        for lam, row in zip(self.lambdas, self.coefs):
            lines.append("\t".join([f"{lam:.10g}"] + [f"{v:.10g}" for v in row]))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class GeneEffect:
    """One gene's effect on a branch: direction plus entry-order strength."""

    label: int
    direction: str  # POSITIVE | NEGATIVE
    rank: int  # 0 = strongest (earliest entry)
    grid_index: int
    lam: float


# ── core sweeps ──────────────────────────────────────────────────────────


def _sweep_until_converged(
    xs: np.ndarray,
    ys: np.ndarray,
    lam_eff: float,
    inv_norms: np.ndarray,
    beta: np.ndarray,
    tol: float,
    max_sweeps: int,
) -> tuple[np.ndarray, bool, int]:
    """Cyclic coordinate descent with a maintained residual.

    Minimizes ``0.5 * ||ys - xs b||^2 + lam_eff * ||b||_1`` up to a positive
    overall factor: callers encode their scaling in ``lam_eff`` and
    ``inv_norms`` (1 / ||x_j||^2, or m-scaled variants).
    """
    residual = ys - xs @ beta
    p = xs.shape[1]
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        delta = 0.0
        for j in range(p):
            if inv_norms[j] == 0.0:
                continue
            old = beta[j]
            if old != 0.0:
                residual += xs[:, j] * old
            z = float(xs[:, j] @ residual)
            new = soft_threshold(z, lam_eff) * inv_norms[j]
            beta[j] = new
            if new != 0.0:
                residual -= xs[:, j] * new
            step = abs(new - old)
            if step > delta:
                delta = step
        if delta < tol:
            return beta, True, sweeps
    return beta, False, sweeps


class _Standardized:
    """Centered response and unit-variance columns; constant columns dropped."""

    def __init__(self, problem: LassoProblem):
        x, y = problem.x, problem.y
        self.m = x.shape[0]
        self.mu = x.mean(axis=0)
        self.sigma = x.std(axis=0)
        self.keep = np.flatnonzero(self.sigma > 0)
        self.dropped = tuple(
            problem.labels[j] for j in np.flatnonzero(self.sigma == 0)
        )
        self.xs = (x[:, self.keep] - self.mu[self.keep]) / self.sigma[self.keep]
        self.y_mean = float(y.mean())
        self.ys = y - self.y_mean

    @property
    def lam_max(self) -> float:
        if self.keep.size == 0:
            return 0.0
        return float(np.abs(self.xs.T @ self.ys).max() / self.m)

    def to_original(self, beta_std: np.ndarray, p: int) -> tuple[np.ndarray, float]:
        beta = np.zeros(p)
        beta[self.keep] = beta_std / self.sigma[self.keep]
        intercept = self.y_mean - float(beta[self.keep] @ self.mu[self.keep])
        return beta, intercept


def coordinate_descent(
    problem: LassoProblem,
    lam: float,
    warm_start: Optional[np.ndarray] = None,
    *,
    standardize: bool = True,
    tol: float = 1e-6,
    max_sweeps: int = 10_000,
) -> CoordinateDescentResult:
    """Solve one penalty value; non-convergence is flagged, never silent."""
    if lam < 0:
        raise ValueError("penalty must be >= 0")
    m, p = problem.shape
    if standardize:
        std = _Standardized(problem)
        beta_std = np.zeros(std.keep.size)
        if warm_start is not None:
            beta_std = np.asarray(warm_start, dtype=float)[std.keep] * std.sigma[std.keep]
        # unit-variance columns: ||x~_j||^2 = m, objective (1/2m)RSS + lam|b|
        inv_norms = np.full(std.keep.size, 1.0 / m)
        beta_std, converged, sweeps = _sweep_until_converged(
            std.xs, std.ys, lam * m, inv_norms, beta_std, tol, max_sweeps
        )
        beta, intercept = std.to_original(beta_std, p)
    else:
        beta = np.zeros(p) if warm_start is None else np.asarray(warm_start, dtype=float).copy()
        norms = (problem.x**2).sum(axis=0)
        inv_norms = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
        beta, converged, sweeps = _sweep_until_converged(
            problem.x, problem.y, lam / 2.0, inv_norms, beta, tol, max_sweeps
        )
        intercept = 0.0
    if not converged:
        logger.warning("coordinate descent did not converge at lam=%g after %d sweeps", lam, sweeps)
    return CoordinateDescentResult(beta=beta, intercept=intercept, converged=converged, sweeps=sweeps)


def lasso_path(
    problem: LassoProblem,
    n_lambdas: int = 100,
    floor_ratio: float = 1e-3,
    tol: float = 1e-6,
    max_sweeps: int = 10_000,
) -> LassoPathResult:
    """Warm-started solves over a geometric penalty grid.

    The grid starts at the smallest penalty nulling every coefficient
    (``max_j |<x~_j, y - mean(y)>| / m``) and decreases geometrically to
    ``floor_ratio`` times that; per-gene entry events are recorded on the
    way down.
    """
    m, p = problem.shape
    std = _Standardized(problem)
    lam_max = std.lam_max
    if lam_max <= 0.0:
        grid = np.array([0.0])
    else:
        grid = np.geomspace(lam_max, floor_ratio * lam_max, n_lambdas)

    coefs = np.zeros((grid.size, p))
    intercepts = np.zeros(grid.size)
    entries: dict[int, EntryEvent] = {}
    nonconverged: list[int] = []
    beta_std = np.zeros(std.keep.size)
    inv_norms = np.full(std.keep.size, 1.0 / m)
    for gi, lam in enumerate(grid):
        # Optimality must hold relative to lam, so small path points get a
        # proportionally tighter sweep tolerance than the 1e-6 ceiling.
        eff_tol = tol if lam <= 0 else min(tol, float(lam) * 1e-4 / max(4 * p, 4))
        beta_std, converged, _ = _sweep_until_converged(
            std.xs, std.ys, float(lam) * m, inv_norms, beta_std, eff_tol, max_sweeps
        )
        if not converged:
            nonconverged.append(gi)
            logger.warning("path point %d (lam=%g) did not converge", gi, lam)
        beta, intercept = std.to_original(beta_std, p)
        coefs[gi] = beta
        intercepts[gi] = intercept
        for k, j in enumerate(std.keep):
            label = problem.labels[j]
            if label not in entries and beta_std[k] != 0.0:
                entries[label] = EntryEvent(
                    label=label,
                    grid_index=gi,
                    lam=float(lam),
                    sign=1 if beta_std[k] > 0 else -1,
                    strength=abs(float(beta_std[k])),
                )
    return LassoPathResult(
        lambdas=grid,
        coefs=coefs,
        intercepts=intercepts,
        entries=sorted(entries.values(), key=lambda e: (e.grid_index, -e.strength, e.label)),
        dropped=std.dropped,
        nonconverged=tuple(nonconverged),
        labels=problem.labels,
    )


def rank_genes(path: LassoPathResult) -> list[GeneEffect]:
    """Genes ordered by path entry (earliest first), each with its sign.

    Genes that never enter, and constant columns dropped before solving,
    are omitted.
    """
    effects = []
    for rank, event in enumerate(path.entries):
        effects.append(
            GeneEffect(
                label=event.label,
                direction=POSITIVE if event.sign > 0 else NEGATIVE,
                rank=rank,
                grid_index=event.grid_index,
                lam=event.lam,
            )
        )
    return effects


def negative_genes(effects: Iterable[GeneEffect]) -> list[int]:
    return [e.label for e in effects if e.direction == NEGATIVE]


# ── from journal to problem ──────────────────────────────────────────────


def build_problem(
    records: Sequence[JournalRecord],
    topology: str,
    branch: Bipartition,
) -> LassoProblem:
    """One row per successful record of ``topology``; Y is the support of
    ``branch`` in that record's tree.

    Records of the same topology share a bipartition set, so a missing
    branch can only mean journal corruption and is rejected loudly.
    """
    rows: list[list[int]] = []
    supports: list[float] = []
    n = None
    for rec in records:
        if not rec.ok or rec.topology != topology:
            continue
        if n is None:
            n = len(rec.word)
        elif len(rec.word) != n:
            raise ValueError("journal mixes word lengths")
        tree = parse_newick(rec.newick)
        y = branch_support(tree, branch)
        if y is None:
            raise ValueError(
                f"branch {branch!r} absent from a tree journaled under its own topology"
            )
        rows.append([int(c) for c in rec.word])
        supports.append(float(y))
    if len(rows) < 2:
        raise InsufficientDataError(
            f"only {len(rows)} journaled evaluation(s) for this topology; need >= 2"
        )
    return LassoProblem(
        x=np.array(rows, dtype=float),
        y=np.array(supports, dtype=float),
        labels=tuple(range(n)),
    )


def kkt_max_violation(problem: LassoProblem, beta: np.ndarray, lam: float) -> float:
    """Optimality residual (in units of lam) of a standardized-mode solution.

    Rebuilds the internal centered/standardized objective; for active
    coordinates ``| |g_j| - lam |`` must vanish, for inactive ones
    ``|g_j| <= lam``, with ``g_j = (1/m) <x~_j, r~>``.
    """
    std = _Standardized(problem)
    beta_std = np.asarray(beta, dtype=float)[std.keep] * std.sigma[std.keep]
    residual = std.ys - std.xs @ beta_std
    g = std.xs.T @ residual / std.m
    if lam <= 0:
        return float(np.abs(g).max()) if g.size else 0.0
    worst = 0.0
    for gj, bj in zip(g, beta_std):
        if bj != 0.0:
            worst = max(worst, abs(abs(gj) - lam) / lam)
        else:
            worst = max(worst, max(0.0, (abs(gj) - lam) / lam))
    return worst
