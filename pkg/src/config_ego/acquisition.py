"""Per-step auxiliary problem: minimize the objective LCB subject to all
constraint LCBs being nonpositive, over a discretized box domain.

The search set is a regular grid; infeasibility is declared when some
constraint's LCB is strictly positive at every grid point.  Ties between
grid minimizers break toward the lowest grid index (lexicographic in the
grid's row-major enumeration), which makes every outcome deterministic.

An optional bounded multi-start coordinate search refines the incumbent for
higher-dimensional boxes; a refined point is accepted only if it still
satisfies every constraint LCB and strictly improves the objective LCB.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DomainBox:
    """Compact box domain with a regular evaluation grid.

    ``grid_per_dim`` defaults to 100 points per dimension for d <= 2 and 30
    for d = 3; higher dimensions must set it explicitly.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    grid_per_dim: int

    def __post_init__(self):
        if len(self.lower) != len(self.upper) or not self.lower:
            raise ValueError("lower and upper must be nonempty and equal length")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("need lower < upper componentwise")
        if self.grid_per_dim < 2:
            raise ValueError(f"grid_per_dim must be >= 2, got {self.grid_per_dim}")

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @property
    def spacing(self) -> np.ndarray:
        return (np.asarray(self.upper) - np.asarray(self.lower)) / (
            self.grid_per_dim - 1
        )

    def grid_points(self) -> np.ndarray:
        """Row-major regular grid, shape (grid_per_dim**d, d); cached."""
        return _grid_for(self)


def make_domain(lower, upper, grid_per_dim: int | None = None) -> DomainBox:
    """DomainBox constructor resolving the dimension-dependent grid default."""
    lower = tuple(float(v) for v in np.atleast_1d(lower))
    upper = tuple(float(v) for v in np.atleast_1d(upper))
    if grid_per_dim is None:
        d = len(lower)
        if d <= 2:
            grid_per_dim = 100
        elif d == 3:
            grid_per_dim = 30
        else:
            raise ValueError("grid_per_dim must be given explicitly for d > 3")
    return DomainBox(lower=lower, upper=upper, grid_per_dim=int(grid_per_dim))


_GRID_CACHE: dict = {}
_GRID_LOCK = threading.Lock()


def _grid_for(box: DomainBox) -> np.ndarray:
    with _GRID_LOCK:
        hit = _GRID_CACHE.get(box)
        if hit is not None:
            return hit
    axes = [
        np.linspace(lo, hi, box.grid_per_dim)
        for lo, hi in zip(box.lower, box.upper)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    grid = np.stack([m.reshape(-1) for m in mesh], axis=1)
    grid.setflags(write=False)
    with _GRID_LOCK:
        _GRID_CACHE[box] = grid
    return grid


@dataclass(frozen=True, eq=False)
class AuxiliaryResult:
    """Outcome of one auxiliary solve: either a sample point or a declaration.

    When a point is returned it satisfies every constraint LCB <= 0 as
    evaluated, unless ``fallback`` is set (no grid point satisfied all
    constraint LCBs simultaneously yet no single constraint was positive
    everywhere; the least-violating point is returned instead).
    """

    point: np.ndarray | None = None
    lcb_value: float | None = None
    infeasible_index: int | None = None
    infeasible_min_lcb: float | None = None
    fallback: bool = False

    @property
    def declared_infeasible(self) -> bool:
        return self.infeasible_index is not None


def check_lcb_feasibility(constraint_lcbs, domain: DomainBox):
    """First constraint whose LCB is positive on the whole grid, if any.

    Returns ``(index, min_lcb)`` for the lowest such constraint index, or
    ``None`` when every constraint LCB is nonpositive somewhere.
    """
    grid = domain.grid_points()
    for i, fn in enumerate(constraint_lcbs):
        vals = np.asarray(fn(grid))
        m = float(vals.min())
        if m > 0:
            return i, m
    return None


def least_violating_point(objective_vals, constraint_vals) -> int:
    """Grid index minimizing total positive constraint LCB, ties by objective
    LCB then by index.  Used when no LCB-feasible point exists."""
    penalty = np.clip(constraint_vals, 0.0, None).sum(axis=0)
    order = np.lexsort((objective_vals, penalty))
    return int(order[0])


def solve_auxiliary(
    objective_lcb,
    constraint_lcbs,
    domain: DomainBox,
    refine: bool = False,
) -> AuxiliaryResult:
    """Solve min objective_lcb(x) s.t. constraint_lcbs(x) <= 0 over the grid.

    The evaluator callables must accept an (n, d) array and return (n,).
    Declares infeasibility when some constraint LCB is positive everywhere
    (lowest index wins).  Otherwise returns the best LCB-feasible grid point,
    optionally refined by a bounded multi-start coordinate search.
    """
    grid = domain.grid_points()
    cons = np.stack([np.asarray(fn(grid), dtype=float) for fn in constraint_lcbs])
    for i in range(cons.shape[0]):
        m = float(cons[i].min())
        if m > 0:
            return AuxiliaryResult(infeasible_index=i, infeasible_min_lcb=m)

    obj = np.asarray(objective_lcb(grid), dtype=float)
    feasible = np.all(cons <= 0.0, axis=0)
    if not feasible.any():
        j = least_violating_point(obj, cons)
        return AuxiliaryResult(
            point=grid[j].copy(), lcb_value=float(obj[j]), fallback=True
        )

    masked = np.where(feasible, obj, np.inf)
    j = int(np.argmin(masked))
    best_x = grid[j].copy()
    best_val = float(obj[j])

    if refine:
        best_x, best_val = _refine_candidates(
            objective_lcb, constraint_lcbs, domain, masked, best_x, best_val
        )
    return AuxiliaryResult(point=best_x, lcb_value=best_val)


def _refine_candidates(objective_lcb, constraint_lcbs, domain, masked, best_x, best_val):
    """Coordinate-search refinement from the top-5 feasible grid candidates."""
    n_seeds = min(5, int(np.isfinite(masked).sum()))
    seeds = np.argsort(masked, kind="stable")[:n_seeds]
    grid = domain.grid_points()
    for j in seeds:
        x, val = _coordinate_search(
            objective_lcb, constraint_lcbs, domain, grid[j], float(masked[j])
        )
        if val < best_val:
            best_x, best_val = x, val
    return best_x, best_val


def _feasible_at(constraint_lcbs, x_row) -> bool:
    return all(float(fn(x_row)[0]) <= 0.0 for fn in constraint_lcbs)


def _coordinate_search(objective_lcb, constraint_lcbs, domain, x0, v0, rounds=12):
    """Projected coordinate descent; only feasible improving moves accepted."""
    lower = np.asarray(domain.lower)
    upper = np.asarray(domain.upper)
    step = domain.spacing.copy()
    x, v = x0.astype(float).copy(), v0
    for _ in range(rounds):
        moved = False
        for k in range(domain.dimension):
            for sign in (-1.0, 1.0):
                cand = x.copy()
                cand[k] = min(max(cand[k] + sign * step[k], lower[k]), upper[k])
                if cand[k] == x[k]:
                    continue
                row = cand[None, :]
                val = float(objective_lcb(row)[0])
                if val < v and _feasible_at(constraint_lcbs, row):
                    x, v = cand, val
                    moved = True
        if not moved:
            step *= 0.5
    return x, v
