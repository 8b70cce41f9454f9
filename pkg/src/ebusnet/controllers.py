"""Decision layers: receding-horizon MPC and the first-come-first-served
reactive baseline, sharing the simulator-facing surface."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .bnb import MILP_INFEASIBLE, MILP_NODE_LIMIT, solve_milp
from .builder import ControlPlan, build_problem, extract_plan
from .horizon import build_horizons, predict_arrival
from .model import NetworkConfig, WorldState, charge_seconds_for, soc_target

CTX_LINK_DEPARTURE = "link_departure"
CTX_TERMINAL_READY = "terminal_ready"
CTX_CHARGE_START = "charge_start"
CTX_DISPATCH_READY = "dispatch_ready"


@dataclass
class EventContext:
    kind: str
    line: int
    bus: int
    t: float
    stop: Optional[int] = None


@dataclass
class ControllerDecision:
    travel_s: Optional[float] = None
    charge_on: Optional[bool] = None
    charge_s: Optional[float] = None
    dispatch_at: Optional[float] = None


def fcfs_travel_time(pred_arrival_next: float, headway_s: float, t_now: float,
                     dwell_s: float, t_min: float, t_max: float) -> float:
    """Reactive travel command: hit the predecessor's arrival plus one
    headway at the next stop as closely as the speed bounds allow."""
    wanted = pred_arrival_next + headway_s - t_now - dwell_s
    return min(max(wanted, t_min), t_max)


def predecessor_of(n_buses: int, bus: int) -> tuple[int, int]:
    """(preceding bus, round shift): bus 0 follows the last bus one round back."""
    return (bus - 1, 0) if bus > 0 else (n_buses - 1, 1)


class FcfsController:
    """Charge on arrival until the day target, drive and dispatch for
    headway adherence; purely reactive and charger-queue FIFO."""

    def __init__(self, config: NetworkConfig):
        self.config = config

    # -- rules ---------------------------------------------------------------

    def travel_command(self, world: WorldState, line_idx: int, bus_idx: int,
                       from_stop: int, t_depart: float) -> float:
        line = self.config.lines[line_idx]
        next_stop = line.next_stop(from_stop)
        snap = world.bus(line_idx, bus_idx)
        lifetime = len(snap.arrivals.get(next_stop, [])) + 1
        pred, shift = predecessor_of(line.n_buses, bus_idx)
        target = lifetime - shift
        pred_times = world.bus(line_idx, pred).arrivals.get(next_stop, [])
        if 1 <= target <= len(pred_times):
            pred_arrival = pred_times[target - 1]
        else:
            pred_arrival = predict_arrival(world, self.config, line_idx, pred,
                                           next_stop, target)
        return fcfs_travel_time(pred_arrival, line.headway_s, t_depart, 0.0,
                                line.t_min_s[from_stop], line.t_max_s[from_stop])

    def wants_charge(self, line_idx: int, soc: float, t: float) -> bool:
        line = self.config.lines[line_idx]
        return soc < soc_target(t, self.config.params, line.soc_min) - 1e-9

    def charge_command(self, line_idx: int, soc: float, t_start: float) -> float:
        """Charge until the current day target, never beyond a full battery."""
        params = self.config.params
        line = self.config.lines[line_idx]
        target = soc_target(t_start, params, line.soc_min)
        want = max(0.0, target - soc)
        cap = max(0.0, 1.0 - soc)
        return charge_seconds_for(min(want, cap), params.charger_kw, params.battery_kwh)

    def dispatch_time(self, world: WorldState, line_idx: int, bus_idx: int,
                      ready_at: float) -> float:
        """Dispatch one headway after the preceding bus whenever possible."""
        line = self.config.lines[line_idx]
        pred, _ = predecessor_of(line.n_buses, bus_idx)
        pred_dispatch = world.last_dispatch.get((line_idx, pred))
        if pred_dispatch is None:
            return ready_at
        return max(ready_at, pred_dispatch + line.headway_s)

    # -- spec surface ----------------------------------------------------------

    def decide(self, world: WorldState, ctx: EventContext) -> ControllerDecision:
        if ctx.kind == CTX_LINK_DEPARTURE:
            return ControllerDecision(
                travel_s=self.travel_command(world, ctx.line, ctx.bus, ctx.stop, ctx.t))
        if ctx.kind == CTX_TERMINAL_READY:
            snap = world.bus(ctx.line, ctx.bus)
            return ControllerDecision(charge_on=self.wants_charge(ctx.line, snap.soc, ctx.t))
        if ctx.kind == CTX_CHARGE_START:
            snap = world.bus(ctx.line, ctx.bus)
            return ControllerDecision(charge_on=True,
                                      charge_s=self.charge_command(ctx.line, snap.soc, ctx.t))
        if ctx.kind == CTX_DISPATCH_READY:
            return ControllerDecision(
                dispatch_at=self.dispatch_time(world, ctx.line, ctx.bus, ctx.t))
        raise ValueError(f"unknown event context {ctx.kind!r}")


def fcfs_step(world: WorldState, config: NetworkConfig, ctx: EventContext) -> ControllerDecision:
    """Stateless one-shot evaluation of the baseline's rules."""
    return FcfsController(config).decide(world, ctx)


class MpcController:
    """Assemble, solve and cache one MILP per control interval.

    Control-loop solves accept a looser optimality gap than the solver
    default: the plan is re-made every interval anyway, and near-ties
    between holding and slow driving otherwise force deep search trees.
    """

    def __init__(self, config: NetworkConfig, node_limit: int = 200_000,
                 rel_gap: float = 1e-4, capture: Optional[list] = None):
        self.config = config
        self.node_limit = node_limit
        self.rel_gap = rel_gap
        self.capture = capture
        self.stats: list[dict] = []

    def step(self, world: WorldState) -> ControlPlan:
        hset = build_horizons(world, self.config)
        problem = build_problem(hset, world, self.config)
        result = solve_milp(problem, node_limit=self.node_limit, rel_gap=self.rel_gap)
        if result.status == MILP_INFEASIBLE:
            raise RuntimeError(
                f"control problem infeasible at t={world.t_now}: "
                "the soft charge window should make this impossible"
            )
        flagged = result.status == MILP_NODE_LIMIT
        if flagged and result.x is None:
            raise RuntimeError(f"node limit hit with no incumbent at t={world.t_now}")
        plan = extract_plan(problem, result.x, flagged=flagged)
        self.stats.append({
            "t": world.t_now,
            "columns": problem.n_cols,
            "rows": problem.n_rows,
            "binaries": int(problem.is_binary.sum()),
            "nodes": result.nodes,
            "status": result.status,
            "wall_s": result.wall_s,
            "objective": result.objective,
            "lp_iterations": result.iterations,
        })
        if self.capture is not None:
            self.capture.append((problem, result.x.copy()))
        return plan


def mpc_step(world: WorldState, config: NetworkConfig,
             node_limit: int = 200_000) -> ControlPlan:
    """One-shot receding-horizon step (builds horizons, solves, extracts)."""
    return MpcController(config, node_limit=node_limit).step(world)
