"""Preconditioner placement: greedy count selection plus location-allocation.

Given a finite set of solve targets and an iteration-count metric m over
parameter shifts, the planner decides how many preconditioners to build,
where to put them, and which target uses which.  The objective is the
modeled strategy cost

    cost_ratio * (#preconditioners to build) + sum_i m(y_i - yhat(y_i)),

i.e. build cost expressed in iteration units plus the total iterations of
the assigned solves.  Already-built (fixed) preconditioners are sunk cost:
they participate in assignment but are neither charged nor moved.

The count comes from greedy insertion at the currently worst target until
the cost rises twice in a row (the last two insertions are then discarded);
locations are refined by alternating generalized-Voronoi allocation with
per-cell Weber re-centering, and preconditioners whose removal lowers the
cost are pruned at the end.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .param_space import ParamBox, ParamSet

__all__ = [
    "PlacementPlan",
    "strategy_cost",
    "allocate",
    "locate",
    "greedy_init",
    "plan_placement",
]


@dataclass
class PlacementPlan:
    """Preconditioner locations, target assignment and modeled cost."""

    pc_locations: np.ndarray  # (k, N)
    fixed_mask: np.ndarray  # (k,) bool, True = supplied prebuilt
    assignment: np.ndarray  # (n,) pc index per target
    point_indices: np.ndarray  # (n,) stable indices of the targets
    assigned_m: np.ndarray  # (n,) m of each target to its pc
    estimated_cost: float
    greedy_cost_trace: list[float] = field(default_factory=list)
    sigma_m_trace: list[float] = field(default_factory=list)
    la_iterations: int = 0

    @property
    def n_pc(self) -> int:
        return self.pc_locations.shape[0]

    @property
    def n_charged(self) -> int:
        return int((~self.fixed_mask).sum())

    def to_json_dict(self) -> dict:
        return {
            "format_version": 1,
            "pc_locations": self.pc_locations.tolist(),
            "fixed_mask": self.fixed_mask.astype(bool).tolist(),
            "assignment": self.assignment.tolist(),
            "point_indices": self.point_indices.tolist(),
            "assigned_m": self.assigned_m.tolist(),
            "estimated_cost": self.estimated_cost,
            "greedy_cost_trace": list(self.greedy_cost_trace),
            "sigma_m_trace": list(self.sigma_m_trace),
            "la_iterations": self.la_iterations,
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=1, sort_keys=True)

    @classmethod
    def from_json_dict(cls, doc: dict) -> "PlacementPlan":
        if doc.get("format_version") != 1:
            raise ValueError("unsupported placement document version")
        return cls(
            pc_locations=np.asarray(doc["pc_locations"], dtype=float),
            fixed_mask=np.asarray(doc["fixed_mask"], dtype=bool),
            assignment=np.asarray(doc["assignment"], dtype=int),
            point_indices=np.asarray(doc["point_indices"], dtype=int),
            assigned_m=np.asarray(doc["assigned_m"], dtype=float),
            estimated_cost=float(doc["estimated_cost"]),
            greedy_cost_trace=list(doc.get("greedy_cost_trace", [])),
            sigma_m_trace=list(doc.get("sigma_m_trace", [])),
            la_iterations=int(doc.get("la_iterations", 0)),
        )


def strategy_cost(plan: PlacementPlan, cost_ratio: float) -> float:
    """Build cost of the chargeable preconditioners plus total iterations."""
    return cost_ratio * plan.n_charged + float(plan.assigned_m.sum())


def _metric_table(points: np.ndarray, locations: np.ndarray, m) -> np.ndarray:
    """m(y_i - yhat_k) for every target/preconditioner pair, (n, k)."""
    n, k = points.shape[0], locations.shape[0]
    table = np.empty((n, k))
    for j in range(k):
        table[:, j] = m(points - locations[j])
    return table


def allocate(points: np.ndarray, locations: np.ndarray, m) -> tuple[np.ndarray, np.ndarray]:
    """Assign each target to its iteration-minimal preconditioner.

    Ties break to the lowest preconditioner index.  Returns the assignment
    and the per-target m values.
    """
    locations = np.atleast_2d(locations)
    if locations.shape[0] == 0:
        raise ValueError("cannot allocate against an empty preconditioner set")
    table = _metric_table(np.atleast_2d(points), locations, m)
    assignment = np.argmin(table, axis=1)
    return assignment, table[np.arange(table.shape[0]), assignment]


def locate(
    cell: np.ndarray,
    m,
    box: ParamBox,
    incumbent: np.ndarray,
    rng: np.random.Generator | None = None,
    n_restarts: int = 5,
) -> tuple[np.ndarray, bool]:
    """Weber step: a box-constrained minimizer of the cell's total m.

    Runs a quasi-Newton optimizer (numeric gradients, box bounds) from the
    incumbent, the cell centroid, a few cell members and random restarts,
    and returns the best candidate seen, never worse than the incumbent.
    """
    cell = np.atleast_2d(np.asarray(cell, dtype=float))
    if cell.shape[0] == 0:
        raise ValueError("cannot locate for an empty cell")
    if rng is None:
        rng = np.random.default_rng(0)

    def objective(yhat):
        return float(np.sum(m(cell - yhat)))

    starts = [np.asarray(incumbent, dtype=float), cell.mean(axis=0)]
    member_picks = {0, cell.shape[0] // 2, cell.shape[0] - 1}
    starts.extend(cell[i] for i in sorted(member_picks))
    starts.extend(
        rng.uniform(box.lo, box.hi, size=(n_restarts, box.dims))
    )

    bounds = list(zip(box.lo, box.hi))
    candidates = [(objective(s), s) for s in starts]
    for s in starts:
        res = minimize(objective, s, method="L-BFGS-B", bounds=bounds)
        candidates.append((float(res.fun), box.clip(res.x)))
    values = np.array([v for v, _ in candidates])
    best = int(np.argmin(values))
    incumbent_value = candidates[0][0]
    improved = values[best] < incumbent_value - 1e-12
    return candidates[best][1], improved


def greedy_init(
    points: np.ndarray,
    m,
    cost_ratio: float,
    fixed_locations: np.ndarray,
    box: ParamBox,
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Greedy insertion until the strategy cost rises twice in a row.

    Starts from the fixed locations (or the box center when none are
    given), repeatedly adds a preconditioner at the target with the
    current-highest m, and finally discards the last two insertions.
    Returns (locations, fixed_mask, cost trace); the trace's first entry
    is the pre-insertion cost.
    """
    fixed_locations = np.atleast_2d(np.asarray(fixed_locations, dtype=float))
    if fixed_locations.size == 0:
        locations = [box.center.copy()]
        fixed_mask = [False]
    else:
        locations = [loc.copy() for loc in fixed_locations]
        fixed_mask = [True] * len(locations)

    _, vals = allocate(points, np.vstack(locations), m)

    def current_cost(values):
        charged = sum(1 for f in fixed_mask if not f)
        return cost_ratio * charged + float(values.sum())

    trace = [current_cost(vals)]
    costs = [np.inf, trace[0]]
    added = 0
    cap = points.shape[0] + 2
    while added < cap:
        if len(costs) >= 3 and costs[-1] > costs[-2] > costs[-3]:
            break
        pick = int(np.argmax(vals))
        locations.append(points[pick].copy())
        fixed_mask.append(False)
        added += 1
        vals = np.minimum(vals, m(points - points[pick]))
        costs.append(current_cost(vals))
        trace.append(costs[-1])
    drop = min(2, added)
    if drop:
        locations = locations[:-drop]
        fixed_mask = fixed_mask[:-drop]
    return np.vstack(locations), np.asarray(fixed_mask, dtype=bool), trace


def plan_placement(
    targets: ParamSet,
    m,
    cost_ratio: float,
    pc_fixed=(),
    seed: int = 0,
    mode: str = "synthetic",
    tau_krylov: float | None = None,
    la_max_iter: int = 50,
    rel_improvement_floor: float = 1e-4,
    time_gain_kappa: float = 1.0,
    n_restarts: int = 5,
) -> PlacementPlan:
    """Full placement: greedy count selection, location-allocation, pruning.

    ``m`` maps parameter shifts (rows) to iteration counts.  ``mode``
    picks the stopping rule of the location-allocation loop: synthetic
    runs a fixed iteration budget with a relative-improvement floor;
    measured stops once the modeled gain of an iteration falls below its
    own wall-clock cost expressed in iterations (requires ``tau_krylov``).
    A final pruning pass drops chargeable preconditioners whose removal
    lowers the strategy cost (an unused one always qualifies).
    """
    if len(targets) == 0:
        raise ValueError("cannot place preconditioners for an empty target set")
    if mode not in ("synthetic", "measured"):
        raise ValueError("mode must be 'synthetic' or 'measured'")
    if mode == "measured" and (tau_krylov is None or tau_krylov <= 0):
        raise ValueError("measured mode needs a positive tau_krylov")
    rng = np.random.default_rng(seed)
    points = targets.points
    box = targets.box

    fixed_arr = (
        np.asarray(list(pc_fixed), dtype=float).reshape(-1, box.dims)
        if len(list(pc_fixed))
        else np.empty((0, box.dims))
    )
    locations, fixed_mask, trace = greedy_init(points, m, cost_ratio, fixed_arr, box)

    m_floor = float(m(np.zeros((1, box.dims)))[0])
    assignment, per_m = allocate(points, locations, m)
    sigma_trace = [float(per_m.sum())]
    la_iters = 0
    for _ in range(la_max_iter):
        tick = time.perf_counter()
        prev_total = float(per_m.sum())
        prev_assignment = assignment

        # Re-seed chargeable preconditioners that lost their whole cell:
        # move each to the currently worst target, once per sweep, and
        # only when that strictly gains over the metric floor.
        moved = False
        present = set(assignment.tolist())
        for k in range(locations.shape[0]):
            if k in present or fixed_mask[k]:
                continue
            worst = int(np.argmax(per_m))
            if per_m[worst] > m_floor + 1e-12:
                locations[k] = points[worst].copy()
                moved = True
                assignment, per_m = allocate(points, locations, m)
                present = set(assignment.tolist())

        shifted = 0.0
        for k in range(locations.shape[0]):
            if fixed_mask[k]:
                continue
            members = points[assignment == k]
            if members.shape[0] == 0:
                continue
            new_loc, _ = locate(members, m, box, locations[k], rng, n_restarts)
            shifted = max(shifted, float(np.max(np.abs(new_loc - locations[k]))))
            locations[k] = new_loc

        assignment, per_m = allocate(points, locations, m)
        la_iters += 1
        sigma_trace.append(float(per_m.sum()))
        gain = prev_total - float(per_m.sum())
        stable = (
            not moved
            and shifted <= 1e-12
            and np.array_equal(assignment, prev_assignment)
        )
        if stable:
            break
        if mode == "synthetic":
            if gain < rel_improvement_floor * max(prev_total, 1.0):
                break
        else:
            step_cost = time_gain_kappa * (time.perf_counter() - tick) / tau_krylov
            if gain < step_cost:
                break

    # Pruning: drop chargeable preconditioners that do not pay for
    # themselves (their cell reassigns more cheaply than one build).
    while locations.shape[0] > 1:
        current = cost_ratio * int((~fixed_mask).sum()) + float(per_m.sum())
        best_k, best_cost, best_state = -1, current, None
        for k in range(locations.shape[0]):
            if fixed_mask[k]:
                continue
            keep = np.arange(locations.shape[0]) != k
            trial_assignment, trial_m = allocate(points, locations[keep], m)
            trial_cost = cost_ratio * int((~fixed_mask[keep]).sum()) + float(
                trial_m.sum()
            )
            if trial_cost < best_cost - 1e-12:
                best_k, best_cost = k, trial_cost
                best_state = (keep, trial_assignment, trial_m)
        if best_k < 0:
            break
        keep, assignment, per_m = best_state
        locations = locations[keep]
        fixed_mask = fixed_mask[keep]

    cost = cost_ratio * int((~fixed_mask).sum()) + float(per_m.sum())
    return PlacementPlan(
        pc_locations=locations,
        fixed_mask=fixed_mask,
        assignment=assignment,
        point_indices=targets.indices.copy(),
        assigned_m=per_m,
        estimated_cost=cost,
        greedy_cost_trace=trace,
        sigma_m_trace=sigma_trace,
        la_iterations=la_iters,
    )
