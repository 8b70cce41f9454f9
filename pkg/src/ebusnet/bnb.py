"""Branch-and-bound MILP solver on top of the simplex core.

Nodes are LP relaxations with tightened bounds on binary columns. The
search dives depth-first until a first incumbent exists, then switches
to best-bound selection. Branching picks the most fractional binary,
ties broken by the lowest column index. Children inherit the parent
basis as a warm start. Everything is deterministic.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .lp import Basis, SimplexWorkspace, STATUS_INFEASIBLE, STATUS_OPTIMAL, STATUS_UNBOUNDED

MILP_OPTIMAL = "optimal"
MILP_INFEASIBLE = "infeasible"
MILP_NODE_LIMIT = "node-limit"


@dataclass
class SolveResult:
    status: str
    objective: float
    x: Optional[np.ndarray]
    bound: float
    nodes: int
    wall_s: float
    iterations: int = 0

    @property
    def gap(self) -> float:
        if self.x is None or not np.isfinite(self.objective):
            return np.inf
        return (self.objective - self.bound) / max(1.0, abs(self.objective))

    def log_line(self) -> str:
        gap = self.gap
        gap_txt = f"{gap:.3e}" if np.isfinite(gap) else "inf"
        return (f"status={self.status} nodes={self.nodes} obj={self.objective:.6f} "
                f"bound={self.bound:.6f} gap={gap_txt} time_s={self.wall_s:.3f}")


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    lb: np.ndarray = field(compare=False)
    ub: np.ndarray = field(compare=False)
    basis: Optional[Basis] = field(compare=False, default=None)
    x: Optional[np.ndarray] = field(compare=False, default=None)
    depth: int = field(compare=False, default=0)


def _rounding_fix(problem, x, binary_cols):
    """Bounds that pin every binary to a rounded/ordering-derived value.

    For scheduling problems built by the MILP assembler, pair-order
    binaries follow the relaxation's charger start times instead of plain
    rounding, which keeps the fixed assignment mutually consistent.
    """
    lb = np.asarray(problem.lb, dtype=float).copy()
    ub = np.asarray(problem.ub, dtype=float).copy()
    vals = np.round(x[binary_cols])
    lb[binary_cols] = vals
    ub[binary_cols] = vals
    meta = problem.meta
    if meta is not None and hasattr(meta, "pairs"):
        for pair in meta.pairs:
            va = meta.buses[pair.first[:2]].visits[pair.first[2]]
            vb = meta.buses[pair.second[:2]].visits[pair.second[2]]
            after = 1.0 if x[va.tchar_col] > x[vb.tchar_col] else 0.0
            lb[pair.psi_col] = after
            ub[pair.psi_col] = after
    lb[binary_cols] = np.maximum(lb[binary_cols], problem.lb[binary_cols])
    ub[binary_cols] = np.minimum(ub[binary_cols], problem.ub[binary_cols])
    bad = lb > ub
    lb[bad] = problem.lb[bad]
    ub[bad] = problem.ub[bad]
    return lb, ub


def solve_milp(
    problem,
    node_limit: int = 200_000,
    rel_gap: float = 1e-6,
    int_tol: float = 1e-6,
    workspace: Optional[SimplexWorkspace] = None,
) -> SolveResult:
    """Solve a :class:`~ebusnet.milp.MilpProblem` to proven optimality."""
    start = time.perf_counter()
    ws = workspace if workspace is not None else problem.workspace()
    binary_cols = np.flatnonzero(np.asarray(problem.is_binary))

    lb0 = np.asarray(problem.lb, dtype=float).copy()
    ub0 = np.asarray(problem.ub, dtype=float).copy()

    total_iters = 0
    nodes = 0
    root = ws.solve(lb=lb0, ub=ub0)
    total_iters += root.iterations
    nodes += 1
    if root.status == STATUS_INFEASIBLE:
        return SolveResult(MILP_INFEASIBLE, np.inf, None, np.inf, nodes,
                           time.perf_counter() - start, total_iters)
    if root.status == STATUS_UNBOUNDED:
        raise RuntimeError("MILP relaxation is unbounded; builder bounds are broken")

    incumbent_obj = np.inf
    incumbent_x: Optional[np.ndarray] = None
    tree_bound = root.objective   # nondecreasing lower bound on the optimum

    seq = 0
    heap: list[_Node] = []   # best-bound frontier
    dive: list[_Node] = []   # depth-first stack used before the first incumbent
    heapq.heappush(heap, _Node(root.objective, seq, lb0, ub0, root.basis, root.x, 0))

    root_frac = binary_cols.size and float(
        np.max(np.abs(root.x[binary_cols] - np.round(root.x[binary_cols])))) > int_tol
    if root_frac:
        # rounding heuristic: an early incumbent so tight node limits and
        # bound pruning always have something to work against
        lb_h, ub_h = _rounding_fix(problem, root.x, binary_cols)
        heur = ws.solve(lb=lb_h, ub=ub_h, basis=root.basis)
        nodes += 1
        total_iters += heur.iterations
        if heur.status == STATUS_OPTIMAL:
            frac = np.abs(heur.x[binary_cols] - np.round(heur.x[binary_cols]))
            if not binary_cols.size or float(np.max(frac)) <= int_tol:
                incumbent_obj = heur.objective
                incumbent_x = heur.x

    def fractional(x):
        if binary_cols.size == 0:
            return None
        vals = x[binary_cols]
        frac = np.abs(vals - np.round(vals))
        worst = int(np.argmax(frac))
        if frac[worst] <= int_tol:
            return None
        return int(binary_cols[worst])

    def open_minimum(extra=None):
        vals = [n.bound for n in heap] + [n.bound for n in dive]
        if extra is not None:
            vals.append(extra)
        return min(vals) if vals else incumbent_obj

    def cutoff():
        return incumbent_obj - rel_gap * max(1.0, abs(incumbent_obj))

    status = MILP_OPTIMAL
    while heap or dive:
        if dive and incumbent_x is None:
            node = dive.pop()
        else:
            while dive:
                heapq.heappush(heap, dive.pop())
            node = heapq.heappop(heap)

        tree_bound = max(tree_bound, min(incumbent_obj, open_minimum(extra=node.bound)))
        if node.bound >= cutoff():
            continue

        branch_col = fractional(node.x)
        if branch_col is None:
            if node.bound < incumbent_obj:
                incumbent_obj = node.bound
                incumbent_x = node.x
            continue

        if nodes >= node_limit:
            status = MILP_NODE_LIMIT
            break

        frac_val = node.x[branch_col]
        children = []
        order = (1.0, 0.0) if frac_val >= 0.5 else (0.0, 1.0)
        for fix in order:
            lb_c = node.lb.copy()
            ub_c = node.ub.copy()
            lb_c[branch_col] = fix
            ub_c[branch_col] = fix
            res = ws.solve(lb=lb_c, ub=ub_c, basis=node.basis)
            total_iters += res.iterations
            nodes += 1
            if res.status == STATUS_INFEASIBLE:
                continue
            if res.status != STATUS_OPTIMAL:
                raise RuntimeError(f"unexpected LP status {res.status} in search tree")
            child_bound = max(res.objective, node.bound)
            if child_bound >= cutoff():
                continue
            seq += 1
            children.append(_Node(child_bound, seq, lb_c, ub_c, res.basis, res.x, node.depth + 1))

        if incumbent_x is None:
            # push the more promising child last so the dive pops it first
            for child in sorted(children, key=lambda nd: (-nd.bound, -nd.seq)):
                dive.append(child)
        else:
            for child in children:
                heapq.heappush(heap, child)

        if incumbent_x is not None and incumbent_obj - tree_bound <= rel_gap * max(1.0, abs(incumbent_obj)):
            break

    wall = time.perf_counter() - start
    if incumbent_x is None:
        if status == MILP_NODE_LIMIT:
            return SolveResult(MILP_NODE_LIMIT, np.inf, None, tree_bound, nodes, wall, total_iters)
        return SolveResult(MILP_INFEASIBLE, np.inf, None, np.inf, nodes, wall, total_iters)
    tree_bound = max(tree_bound, min(incumbent_obj, open_minimum()))
    return SolveResult(status, incumbent_obj, incumbent_x, tree_bound, nodes, wall, total_iters)
