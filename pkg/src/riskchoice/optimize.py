"""Derivative-free optimization: Nelder-Mead with tabu-search initialization.

All calibration in the toolkit goes through `global_minimize`: an iterated
tabu search over a coarse grid proposes diverse starting points, and a
bounded Nelder-Mead simplex polishes each one. Bounds are enforced with a
barrier (+inf outside), everything is deterministic for a fixed seed, and the
best restart wins ties by restart index.

The simplex is hand-rolled rather than delegated because the configuration
contract exposes the reflection/expansion/contraction/shrink coefficients,
which library implementations hard-code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class OptimizeError(ValueError):
    """Raised for invalid optimizer configuration or unusable objectives."""


@dataclass
class Objective:
    """Bounded scalar objective with a barrier outside the box.

    ``fn`` must be deterministic. ``closed`` marks each bound side as
    inclusive (the default) or exclusive.
    """

    dimension: int
    fn: Callable[[np.ndarray], float]
    bounds: list[tuple[float, float]]
    closed: list[tuple[bool, bool]] | None = None

    def __post_init__(self):
        if len(self.bounds) != self.dimension:
            raise OptimizeError("bounds length must equal dimension")
        for lo, hi in self.bounds:
            if not (lo < hi):
                raise OptimizeError(f"invalid bound ({lo}, {hi})")
        if self.closed is None:
            self.closed = [(True, True)] * self.dimension

    def in_bounds(self, x: np.ndarray) -> bool:
        for i, (lo, hi) in enumerate(self.bounds):
            lo_closed, hi_closed = self.closed[i]
            v = x[i]
            if (v < lo) or (v == lo and not lo_closed):
                return False
            if (v > hi) or (v == hi and not hi_closed):
                return False
        return True

    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if not self.in_bounds(x):
            return math.inf
        val = self.fn(x)
        return math.inf if (val is None or math.isnan(val)) else float(val)


@dataclass
class SimplexConfig:
    x_tolerance: float = 1e-6
    f_tolerance: float = 1e-9
    max_evaluations: int = 20_000
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5

    def __post_init__(self):
        if min(self.reflection, self.expansion, self.contraction, self.shrink) <= 0:
            raise OptimizeError("simplex coefficients must be positive")
        if self.expansion <= 1:
            raise OptimizeError("expansion coefficient must exceed 1")
        if not (0 < self.contraction < 1 and 0 < self.shrink < 1):
            raise OptimizeError("contraction and shrink must lie in (0, 1)")


@dataclass
class TabuConfig:
    restarts: int = 50
    neighborhood_radius: float = 0.1
    tabu_tenure: int = 10
    grid_resolution: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.restarts <= 0:
            raise OptimizeError("restarts must be positive")
        if self.tabu_tenure <= 0 or self.grid_resolution <= 0:
            raise OptimizeError("tabu tenure and grid resolution must be positive")
        if self.neighborhood_radius <= 0:
            raise OptimizeError("neighborhood radius must be positive")


@dataclass
class OptimResult:
    best_point: np.ndarray
    best_value: float
    evaluations: int
    converged: bool
    restart_trace: list[tuple[np.ndarray, float]] = field(default_factory=list)


def _initial_simplex(start: np.ndarray) -> np.ndarray:
    # fminsearch-style: 5% bump per coordinate, absolute step at zeros
    n = start.size
    simplex = np.tile(start, (n + 1, 1))
    for i in range(n):
        if simplex[i + 1, i] != 0.0:
            simplex[i + 1, i] *= 1.05
        else:
            simplex[i + 1, i] = 0.00025
    return simplex


def nelder_mead(obj: Objective, start, cfg: SimplexConfig | None = None) -> OptimResult:
    """Minimize with the Nelder-Mead simplex from one starting point.

    Stops when the simplex collapses below ``x_tolerance`` and the value
    spread falls below ``f_tolerance``, or when ``max_evaluations`` is
    exhausted (then ``converged`` is False and the best vertex is returned).
    """
    cfg = cfg or SimplexConfig()
    start = np.asarray(start, dtype=float)
    if start.size != obj.dimension:
        raise OptimizeError("start dimension mismatch")
    if not obj.in_bounds(start):
        raise OptimizeError(f"start {start} outside bounds")

    simplex = _initial_simplex(start)
    values = np.array([obj.evaluate(v) for v in simplex])
    evals = simplex.shape[0]
    n = obj.dimension
    rho, chi, psi, sigma = cfg.reflection, cfg.expansion, cfg.contraction, cfg.shrink

    converged = False
    while evals < cfg.max_evaluations:
        order = np.argsort(values, kind="stable")
        simplex = simplex[order]
        values = values[order]

        if (
            np.max(np.abs(simplex[1:] - simplex[0])) <= cfg.x_tolerance
            and np.max(np.abs(values[1:] - values[0])) <= cfg.f_tolerance
        ):
            converged = True
            break

        centroid = np.mean(simplex[:-1], axis=0)
        worst = simplex[-1]
        reflected = centroid + rho * (centroid - worst)
        f_reflected = obj.evaluate(reflected)
        evals += 1

        if f_reflected < values[0]:
            expanded = centroid + chi * (reflected - centroid)
            f_expanded = obj.evaluate(expanded)
            evals += 1
            if f_expanded < f_reflected:
                simplex[-1], values[-1] = expanded, f_expanded
            else:
                simplex[-1], values[-1] = reflected, f_reflected
        elif f_reflected < values[-2]:
            simplex[-1], values[-1] = reflected, f_reflected
        else:
            if f_reflected < values[-1]:
                contracted = centroid + psi * (reflected - centroid)
                f_contracted = obj.evaluate(contracted)
                evals += 1
                accept = f_contracted <= f_reflected
            else:
                contracted = centroid - psi * (centroid - worst)
                f_contracted = obj.evaluate(contracted)
                evals += 1
                accept = f_contracted < values[-1]
            if accept:
                simplex[-1], values[-1] = contracted, f_contracted
            else:
                for i in range(1, n + 1):
                    simplex[i] = simplex[0] + sigma * (simplex[i] - simplex[0])
                    values[i] = obj.evaluate(simplex[i])
                evals += n

    best = int(np.argmin(values))
    result = OptimResult(
        best_point=simplex[best].copy(),
        best_value=float(values[best]),
        evaluations=evals,
        converged=converged,
    )
    result.restart_trace = [(start.copy(), result.best_value)]
    return result


def _cell_center(obj: Objective, cell: tuple, resolution: int) -> np.ndarray:
    pt = np.empty(obj.dimension)
    for i, (lo, hi) in enumerate(obj.bounds):
        width = (hi - lo) / resolution
        pt[i] = lo + (cell[i] + 0.5) * width
    return pt


def iterated_tabu_search(obj: Objective, cfg: TabuConfig | None = None) -> list[np.ndarray]:
    """Propose diverse starting points for the simplex, best first.

    Each restart walks the cell grid: move to the best non-tabu neighboring
    cell (accepting uphill moves), marking visited cells tabu for
    ``tabu_tenure`` steps. Candidate points are the cell centers plus a
    bounded jitter so restarts explore within cells too. Deterministic for a
    fixed seed.
    """
    cfg = cfg or TabuConfig()
    for lo, hi in obj.bounds:
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise OptimizeError("tabu search requires finite bounds")

    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 0x7AB0)))
    res = cfg.grid_resolution
    n = obj.dimension
    steps = max(2 * res, 8)
    widths = np.array([(hi - lo) / res for lo, hi in obj.bounds])

    def candidate_point(cell):
        center = _cell_center(obj, cell, res)
        jitter = rng.uniform(-1.0, 1.0, size=n) * cfg.neighborhood_radius * widths
        pt = center + jitter
        for i, (lo, hi) in enumerate(obj.bounds):
            pt[i] = min(max(pt[i], lo), hi)
        return pt

    tabu_until: dict[tuple, int] = {}
    clock = 0
    results = []
    for restart in range(cfg.restarts):
        cell = tuple(int(c) for c in rng.integers(0, res, size=n))
        point = candidate_point(cell)
        val = obj.evaluate(point)
        best_point, best_val = point, val
        for _ in range(steps):
            clock += 1
            tabu_until[cell] = clock + cfg.tabu_tenure
            neighbors = []
            for dim in range(n):
                for delta in (-1, 1):
                    c = list(cell)
                    c[dim] += delta
                    if 0 <= c[dim] < res:
                        neighbors.append(tuple(c))
            open_cells = [c for c in neighbors if tabu_until.get(c, 0) < clock]
            if not open_cells:
                open_cells = neighbors  # all tabu: aspiration, take the best anyway
            if not open_cells:
                break
            scored = []
            for c in open_cells:
                pt = candidate_point(c)
                scored.append((obj.evaluate(pt), c, pt))
            scored.sort(key=lambda t: (t[0], t[1]))
            val, cell, point = scored[0]
            if val < best_val:
                best_point, best_val = point, val
        results.append((best_val, restart, best_point))

    results.sort(key=lambda t: (t[0], t[1]))
    return [pt for _, _, pt in results]


def global_minimize(
    obj: Objective,
    tabu_cfg: TabuConfig | None = None,
    simplex_cfg: SimplexConfig | None = None,
) -> OptimResult:
    """Nelder-Mead from every tabu-search candidate; returns the global best.

    ``restart_trace`` records (start, final value) per restart. The best
    value is never a barrier point: if every restart lands on +inf the
    objective is unusable and an error is raised.
    """
    candidates = iterated_tabu_search(obj, tabu_cfg)
    best: OptimResult | None = None
    trace = []
    total_evals = 0
    for idx, start in enumerate(candidates):
        run = nelder_mead(obj, start, simplex_cfg)
        total_evals += run.evaluations
        trace.append((start.copy(), run.best_value))
        if best is None or run.best_value < best.best_value:
            best = run
    assert best is not None
    if math.isinf(best.best_value):
        raise OptimizeError("no restart found a finite objective value")
    return OptimResult(
        best_point=best.best_point,
        best_value=best.best_value,
        evaluations=total_evals,
        converged=best.converged,
        restart_trace=trace,
    )
