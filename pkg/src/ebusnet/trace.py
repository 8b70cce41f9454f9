"""Episode traces: event logs, realized costs, and invariant checking."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

from .model import NetworkConfig, Params, SECONDS_PER_HOUR

EVENT_COLUMNS = ("time_s", "line", "bus", "event_kind", "stop", "value")


@dataclass
class Event:
    time: float
    line: int
    bus: int
    kind: str      # arrive depart hold_start hold_end charge_start charge_end abort
    stop: int
    value: float   # state of charge at the event, unless noted otherwise


@dataclass
class TerminalVisit:
    line: int
    bus: int
    arrive: float
    boarding_s: float
    charge_on: bool
    charge_s: float
    depart: Optional[float]
    depart_soc: Optional[float]


@dataclass
class EpisodeTrace:
    controller: str
    seed: int
    line_ids: list[str]
    events: list[Event] = field(default_factory=list)
    headway_devs: list[tuple[float, int, int, int, float]] = field(default_factory=list)
    charge_intervals: list[tuple[int, int, float, float]] = field(default_factory=list)
    terminal_visits: list[TerminalVisit] = field(default_factory=list)
    initial_arrivals: dict[tuple[int, int], dict[int, list[float]]] = field(default_factory=dict)
    initial_round_base: dict[tuple[int, int], dict[int, int]] = field(default_factory=dict)
    link_energies: dict[tuple[int, int], list[float]] = field(default_factory=dict)
    charge_energies: dict[tuple[int, int], list[float]] = field(default_factory=dict)
    soc_start: dict[tuple[int, int], float] = field(default_factory=dict)
    soc_end: dict[tuple[int, int], float] = field(default_factory=dict)
    solver_stats: list[dict] = field(default_factory=list)
    fallback_count: int = 0
    aborted: bool = False
    abort_reason: Optional[str] = None
    final_t: float = 0.0

    # -- realized cost accounting -----------------------------------------

    def costs(self, params: Params) -> tuple[float, float, float]:
        return accumulate_costs(self, params)

    def waiting_stats(self, params: Params) -> dict:
        """Waiting-without-charging and cumulative dwell at the terminal,
        restricted to visits that began after warmup."""
        waits = []
        dwell_total = 0.0
        for tv in self.terminal_visits:
            if tv.depart is None or tv.arrive < params.warmup_s:
                continue
            span = tv.depart - tv.arrive
            overhead = tv.charge_s + (2.0 * params.charger_setup_s if tv.charge_on else 0.0)
            waits.append(max(0.0, span - overhead))
            dwell_total += span
        mean_wait = sum(waits) / len(waits) if waits else 0.0
        return {
            "terminal_visits": len(waits),
            "mean_wait_no_charge_s": mean_wait,
            "cumulative_terminal_dwell_s": dwell_total,
        }

    # -- exports ------------------------------------------------------------

    def events_csv(self) -> str:
        lines = [",".join(EVENT_COLUMNS)]
        for ev in self.events:
            line_id = self.line_ids[ev.line]
            lines.append(
                f"{ev.time:.6f},{line_id},{ev.bus},{ev.kind},{ev.stop},{ev.value:.9g}"
            )
        return "\n".join(lines) + "\n"

    def summary(self, params: Params) -> dict:
        service, charging, total = self.costs(params)
        stats = self.waiting_stats(params)
        solver = {}
        if self.solver_stats:
            n = len(self.solver_stats)
            solver = {
                "solves": n,
                "mean_columns": sum(s["columns"] for s in self.solver_stats) / n,
                "mean_rows": sum(s["rows"] for s in self.solver_stats) / n,
                "mean_binaries": sum(s["binaries"] for s in self.solver_stats) / n,
                "mean_nodes": sum(s["nodes"] for s in self.solver_stats) / n,
                "mean_solve_s": sum(s["wall_s"] for s in self.solver_stats) / n,
                "node_limit_hits": sum(1 for s in self.solver_stats if s["status"] == "node-limit"),
            }
        return {
            "controller": self.controller,
            "seed": self.seed,
            "aborted": self.aborted,
            "abort_reason": self.abort_reason,
            "final_t": self.final_t,
            "events": len(self.events),
            "service_cost": service,
            "charging_cost": charging,
            "total_cost": total,
            "waiting": stats,
            "charged_kwh": sum(sum(v) for v in self.charge_energies.values()),
            "consumed_kwh": sum(sum(v) for v in self.link_energies.values()),
            "fallback_count": self.fallback_count,
            "solver": solver,
        }

    def summary_json(self, params: Params) -> str:
        return json.dumps(self.summary(params), sort_keys=True, indent=2) + "\n"


def accumulate_costs(trace: EpisodeTrace, params: Params) -> tuple[float, float, float]:
    """Realized (service, charging, total) euros, counted after warmup."""
    t0, t1 = params.warmup_s, params.day_s
    service = params.price_per_wait_s * math.fsum(
        abs(dev) for when, _, _, _, dev in trace.headway_devs if t0 <= when <= t1
    )
    charge_s = math.fsum(
        max(0.0, min(end, t1) - max(start, t0))
        for _, _, start, end in trace.charge_intervals
    )
    charging = params.price_per_kwh * params.charger_kw * charge_s / SECONDS_PER_HOUR
    return service, charging, service + charging


def check_trace_invariants(trace: EpisodeTrace, config: NetworkConfig) -> list[str]:
    """Empty list iff the realized trajectories satisfy every model rule:
    ordered events, no overtaking, exclusive charger use, terminal
    departures inside the state-of-charge window, exact energy books."""
    violations: list[str] = []
    params = config.params

    for a, b in zip(trace.events, trace.events[1:]):
        if b.time < a.time - 1e-12:
            violations.append(f"events out of order at {a.time} -> {b.time}")
            break

    # no overtaking: every arrival must not precede the matching arrival of
    # the preceding bus (bus 0 follows the line's last bus, one round back)
    full: dict[tuple[int, int], dict[int, list[float]]] = {}
    base: dict[tuple[int, int], dict[int, int]] = {}
    for key, hist in trace.initial_arrivals.items():
        full[key] = {stop: list(times) for stop, times in hist.items()}
        base[key] = dict(trace.initial_round_base.get(key, {}))
    seeded_len = {
        (key, stop): len(times)
        for key, hist in trace.initial_arrivals.items() for stop, times in hist.items()
    }
    for ev in trace.events:
        if ev.kind == "arrive":
            full.setdefault((ev.line, ev.bus), {}).setdefault(ev.stop, []).append(ev.time)
    for (li, bi), per_stop in full.items():
        line = config.lines[li]
        pred = bi - 1 if bi > 0 else line.n_buses - 1
        shift = 0 if bi > 0 else 1
        for stop, times in per_stop.items():
            start = seeded_len.get(((li, bi), stop), 0)
            my_base = base.get((li, bi), {}).get(stop, 0)
            pred_base = base.get((li, pred), {}).get(stop, 0)
            pred_times = full.get((li, pred), {}).get(stop, [])
            for i in range(start, len(times)):
                target = my_base + i - shift
                idx = target - pred_base
                if idx < 0:
                    continue
                if idx >= len(pred_times):
                    violations.append(
                        f"line {li} bus {bi} stop {stop} round {my_base + i}: "
                        "predecessor arrival missing"
                    )
                    continue
                if times[i] < pred_times[idx] - 1e-9:
                    violations.append(
                        f"overtaking at line {li} stop {stop}: bus {bi} round {my_base + i} "
                        f"arrived {times[i]:.3f} before bus {pred} at {pred_times[idx]:.3f}"
                    )

    # charger exclusivity on realized intervals
    intervals = sorted(trace.charge_intervals, key=lambda iv: (iv[2], iv[3], iv[0], iv[1]))
    for (l1, b1, s1, e1), (l2, b2, s2, e2) in zip(intervals, intervals[1:]):
        if s2 < e1 - 1e-9:
            violations.append(
                f"charger overlap: line {l1} bus {b1} until {e1:.3f} vs "
                f"line {l2} bus {b2} from {s2:.3f}"
            )

    # terminal departures must leave inside the allowed charge window
    for tv in trace.terminal_visits:
        if tv.depart is None or tv.depart_soc is None:
            continue
        soc_min = config.lines[tv.line].soc_min
        if tv.depart_soc < soc_min - 1e-9 or tv.depart_soc > 1.0 + 1e-9:
            violations.append(
                f"line {tv.line} bus {tv.bus} departed terminal at soc "
                f"{tv.depart_soc:.6f} outside [{soc_min}, 1]"
            )

    # charge intervals must fall inside a terminal visit of the same bus
    for li, bi, start, end in trace.charge_intervals:
        ok = any(
            tv.line == li and tv.bus == bi and tv.arrive - 1e-9 <= start
            and (tv.depart is None or end <= tv.depart + 1e-9)
            for tv in trace.terminal_visits
        )
        if not ok:
            violations.append(
                f"charge interval [{start:.3f}, {end:.3f}] of line {li} bus {bi} "
                "lies outside its terminal visits"
            )

    # exact energy bookkeeping
    for key in trace.soc_start:
        li, bi = key
        q = params.battery_kwh
        expected = (trace.soc_start[key]
                    - math.fsum(trace.link_energies.get(key, [])) / q
                    + math.fsum(trace.charge_energies.get(key, [])) / q)
        got = trace.soc_end[key]
        if abs(expected - got) > 1e-9:
            violations.append(
                f"energy books of line {li} bus {bi} drift: expected soc "
                f"{expected:.12f}, recorded {got:.12f}"
            )

    return violations
