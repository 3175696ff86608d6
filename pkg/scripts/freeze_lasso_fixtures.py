#!/usr/bin/env python3
"""Generate the frozen L1-solver oracle fixtures used by the test suite.

Builds 25 random small problems (m <= 8, p <= 4, 0/1 design, responses in
[0, 100]) plus one 6x4 problem sized for the +-5 coefficient grid, computes
reference objectives with the sign-pattern enumeration oracle, cross-checks
them against grid refinement and proximal gradient, and writes everything
to tests/data/lasso_oracle.json.  Run from the repository root; rerunning
with the same seed reproduces the file bit for bit.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from oracles import grid_refined_lasso, ista_lasso, l1_objective, orthant_lasso_minimum

SEED = 20240817
OUT = ROOT / "tests" / "data" / "lasso_oracle.json"


def random_problem(rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    m = int(rng.integers(3, 9))
    p = int(rng.integers(1, 5))
    while True:
        x = rng.integers(0, 2, size=(m, p)).astype(float)
        if not np.any(x.sum(axis=0) == 0):  # avoid degenerate all-zero columns
            break
    scale = float(rng.choice([3.0, 30.0, 100.0]))
    y = rng.uniform(0.0, scale, size=m)
    return x, y


def main() -> None:
    rng = np.random.default_rng(SEED)
    problems = []
    for pid in range(25):
        x, y = random_problem(rng)
        lam0 = 2.0 * float(np.abs(x.T @ y).max())  # raw all-zero threshold
        lams = [0.0, round(0.02 * lam0, 6), round(0.3 * lam0, 6)]
        cases = []
        for lam in lams:
            beta, obj = orthant_lasso_minimum(x, y, lam)
            _, obj_ista = ista_lasso(x, y, lam)
            if obj_ista < obj - 1e-7:
                raise SystemExit(f"problem {pid}: ISTA beat orthant oracle ({obj_ista} < {obj})")
            if abs(obj_ista - obj) > 1e-5 * max(1.0, obj):
                raise SystemExit(f"problem {pid} lam={lam}: oracle disagreement {obj} vs {obj_ista}")
            cases.append({"lam": lam, "objective": obj, "beta": [round(b, 12) for b in beta]})
        problems.append(
            {
                "id": pid,
                "x": x.astype(int).tolist(),
                "y": [round(v, 10) for v in y],
                "cases": cases,
            }
        )
        print(f"problem {pid}: m={x.shape[0]} p={x.shape[1]} objectives "
              + ", ".join(f"{c['objective']:.6f}" for c in cases))

    # One 6x4 problem whose minimizer fits the +-5 grid, for the grid oracle.
    grid_example = None
    for attempt in range(100):
        x = rng.integers(0, 2, size=(6, 4)).astype(float)
        if np.any(x.sum(axis=0) == 0):
            continue
        y = rng.uniform(0.0, 2.5, size=6)
        lam = 0.3
        beta_exact, obj_exact = orthant_lasso_minimum(x, y, lam)
        if np.abs(beta_exact).max() > 4.0:
            continue
        beta_grid, obj_grid = grid_refined_lasso(x, y, lam)
        gap = obj_grid - obj_exact
        if gap < -1e-9:
            raise SystemExit("grid oracle below exact minimum; bug")
        if gap <= 5e-5:  # headroom under the 1e-4 comparison tolerance
            grid_example = {
                "x": x.astype(int).tolist(),
                "y": [round(v, 10) for v in y],
                "lam": lam,
                "grid_objective": obj_grid,
                "exact_objective": obj_exact,
                "attempt": attempt,
            }
            print(f"grid example: attempt={attempt} gap={gap:.3e} objective={obj_grid:.8f}")
            break
    if grid_example is None:
        raise SystemExit("no grid example with a small enough refinement gap found")

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(
        json.dumps({"seed": SEED, "problems": problems, "grid_example": grid_example}, indent=1)
        + "\n",
        encoding="utf-8",
    )
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
