"""Discrete-event stochastic simulator of one day of bus operations.

Events are stop arrivals, departures, terminal phase transitions, charge
start/end and control-interval boundaries, so there is no discretization
error. Stochasticity enters through per-link traffic floors (log-normal,
median at the free-flow time: samples limit the top speed actually
achievable) and Poisson passenger boarding. Every random draw comes from
its own counter-keyed Philox stream derived from the episode seed and
the drawing entity, so the traffic and demand a bus experiences on its
n-th link or visit is identical across controllers run with the same
seed (common random numbers), and traces are a pure function of the
episode configuration.

The physical charger is a mutex owned by the simulator: controllers only
plan, and any plan shifted by realized randomness still queues here, so
charger exclusivity holds on every trace.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .controllers import (
    CTX_DISPATCH_READY,
    CTX_LINK_DEPARTURE,
    CTX_TERMINAL_READY,
    EventContext,
    FcfsController,
    MpcController,
    predecessor_of,
)
from .horizon import nominal_visit_step
from .model import (
    AtStop,
    BusSnapshot,
    LineSpec,
    NetworkConfig,
    OnLink,
    PHASE_BOARDING,
    PHASE_CHARGING,
    PHASE_CONNECTING,
    PHASE_DRAINING,
    PHASE_HOLDING,
    SECONDS_PER_HOUR,
    WorldState,
    charge_seconds_for,
    link_energy,
)
from .trace import EpisodeTrace, Event, TerminalVisit

TERMINAL = 0

_DOM_TRAFFIC = 1
_DOM_BOARDING = 2

CONTROLLER_MPC = "mpc"
CONTROLLER_FCFS = "fcfs"


@dataclass(frozen=True)
class EpisodeConfig:
    network: NetworkConfig
    controller: str
    seed: int
    traffic_cov: float = 0.1
    spacing: str = "even"
    deterministic_boarding: bool = False
    node_limit: int = 200_000

    def validate(self) -> None:
        if self.controller not in (CONTROLLER_MPC, CONTROLLER_FCFS):
            raise ValueError(f"unknown controller {self.controller!r}")
        if self.spacing != "even":
            raise ValueError(f"unknown initial spacing rule {self.spacing!r}")
        if self.traffic_cov < 0:
            raise ValueError("traffic_cov must be nonnegative")
        self.network.validate()


def _stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def sample_traffic_floor(line: LineSpec, link: int, cov: float,
                         rng: np.random.Generator) -> float:
    """Log-normal traffic floor with median at the free-flow link time.

    The realized link time is the maximum of the commanded time and this
    floor: traffic limits how fast a bus can actually drive.
    """
    t_min = line.t_min_s[link]
    if cov <= 0.0:
        return t_min
    sigma = math.sqrt(math.log(1.0 + cov * cov))
    return t_min * math.exp(sigma * rng.standard_normal())


def sample_boarding(rate_pax_s: float, gap_s: float, rng: np.random.Generator) -> int:
    """Poisson passenger accumulation since the preceding bus passed."""
    if gap_s < 0:
        raise ValueError(f"gap_s must be nonnegative (got {gap_s})")
    mean = rate_pax_s * gap_s
    if mean <= 0.0:
        return 0
    return int(rng.poisson(mean))


class _BusState:
    __slots__ = (
        "line", "bus", "soc", "arrivals", "round_base", "at_stop", "arrived_at",
        "boarding_s", "departs_at", "phase", "soc_at_arrival", "hold_s",
        "planned_b", "planned_c", "planned_start", "charge_started_at",
        "charge_s", "on_link", "gen", "link_draws", "tau_ptr", "term_ptr",
    )

    def __init__(self, line: int, bus: int):
        self.line = line
        self.bus = bus
        self.soc = 1.0
        self.arrivals: dict[int, list[float]] = {}
        self.round_base: dict[int, int] = {}
        self.at_stop: Optional[int] = None
        self.arrived_at = 0.0
        self.boarding_s = 0.0
        self.departs_at: Optional[float] = None
        self.phase: Optional[str] = None
        self.soc_at_arrival: Optional[float] = None
        self.hold_s: Optional[float] = None
        self.planned_b = False
        self.planned_c = 0.0
        self.planned_start = 0.0
        self.charge_started_at: Optional[float] = None
        self.charge_s: Optional[float] = None
        self.on_link: Optional[tuple[int, float, float, float]] = None
        self.gen = 0
        self.link_draws = 0
        self.tau_ptr = 0
        self.term_ptr = 0

    @property
    def key(self) -> tuple[int, int]:
        return (self.line, self.bus)

    def next_round(self, stop: int) -> int:
        return self.round_base.get(stop, 0) + len(self.arrivals.get(stop, []))


class _Abort(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class _Simulation:
    def __init__(self, cfg: EpisodeConfig, capture: Optional[list] = None):
        cfg.validate()
        self.cfg = cfg
        self.net = cfg.network
        self.params = cfg.network.params
        self.trace = EpisodeTrace(cfg.controller, cfg.seed,
                                  [ln.line_id for ln in self.net.lines])
        self.buses: list[_BusState] = []
        self.by_key: dict[tuple[int, int], _BusState] = {}
        self.heap: list[tuple[float, int, str, int, int, int]] = []
        self._seq = 0
        self.t = 0.0
        self.last_dispatch: dict[tuple[int, int], float] = {}
        self.blocked: dict[tuple[int, int], list[tuple[int, int]]] = {}
        self.charger_active: Optional[tuple[int, int]] = None
        self.charger_free_at = 0.0
        self.charge_queue: list[tuple[int, int]] = []
        self.board_draws: dict[tuple[int, int], int] = {}
        self.fcfs = FcfsController(self.net)
        self.mpc = (MpcController(self.net, node_limit=cfg.node_limit, capture=capture)
                    if cfg.controller == CONTROLLER_MPC else None)
        self.plan = None

    # -- plumbing -------------------------------------------------------------

    def push(self, when: float, kind: str, bus: Optional[_BusState]) -> None:
        self._seq += 1
        if bus is None:
            heapq.heappush(self.heap, (when, self._seq, kind, -1, -1, 0))
        else:
            heapq.heappush(self.heap, (when, self._seq, kind, bus.line, bus.bus, bus.gen))

    def emit(self, kind: str, bus: _BusState, stop: int, value: float) -> None:
        self.trace.events.append(Event(self.t, bus.line, bus.bus, kind, stop, value))

    def line_of(self, bus: _BusState) -> LineSpec:
        return self.net.lines[bus.line]

    def world(self) -> WorldState:
        snaps = []
        for b in self.buses:
            if b.on_link is not None:
                state = OnLink(b.on_link[0], b.on_link[1], b.on_link[2])
            elif b.at_stop == TERMINAL:
                state = AtStop(TERMINAL, b.arrived_at, b.boarding_s, None,
                               b.phase or PHASE_BOARDING, b.soc_at_arrival,
                               b.hold_s, b.charge_started_at, b.charge_s)
            else:
                state = AtStop(b.at_stop, b.arrived_at, b.boarding_s, b.departs_at,
                               PHASE_BOARDING, None, None, None, None)
            snaps.append(BusSnapshot(b.line, b.bus, b.soc, state,
                                     b.arrivals, b.round_base))
        return WorldState(self.t, snaps, self.charger_free_at, dict(self.last_dispatch))

    # -- random draws (one counter-keyed stream per draw) ----------------------

    def draw_floor(self, bus: _BusState, link: int) -> float:
        rng = _stream(self.cfg.seed, _DOM_TRAFFIC, bus.line, bus.bus, bus.link_draws)
        bus.link_draws += 1
        return sample_traffic_floor(self.line_of(bus), link, self.cfg.traffic_cov, rng)

    def draw_boarding(self, line_idx: int, stop: int, rate: float, gap: float) -> float:
        if self.cfg.deterministic_boarding:
            return self.params.board_s_per_pax * rate * gap
        count = self.board_draws.get((line_idx, stop), 0)
        self.board_draws[(line_idx, stop)] = count + 1
        rng = _stream(self.cfg.seed, _DOM_BOARDING, line_idx, stop, count)
        pax = sample_boarding(rate, gap, rng)
        return self.params.board_s_per_pax * pax

    # -- seeding ----------------------------------------------------------------

    def seed_world(self) -> None:
        """Evenly spaced start: every bus is placed on the nominal schedule
        with two rounds of arrival history back-filled consistently."""
        params = self.params
        for li, line in enumerate(self.net.lines):
            offsets = [0.0]
            for j in range(line.n_stops):
                offsets.append(offsets[-1] + nominal_visit_step(line, params, j))
            loop = offsets[line.n_stops]
            for bi in range(line.n_buses):
                bus = _BusState(li, bi)
                self.buses.append(bus)
                self.by_key[bus.key] = bus
                best: tuple[float, int] = (-math.inf, -1)
                for j in range(line.n_stops):
                    v = bi * line.headway_s + offsets[j]
                    r_star = math.floor(-v / loop)
                    t_latest = v + r_star * loop
                    bus.round_base[j] = r_star - 1
                    bus.arrivals[j] = [t_latest - loop, t_latest]
                    if t_latest > best[0] or (t_latest == best[0] and best[1] < 0):
                        best = (t_latest, j)
                stop, when = best[1], best[0]
                bus.at_stop = stop
                bus.arrived_at = when
                term_arrs = bus.arrivals[TERMINAL]
                term_time = term_arrs[-2] if stop == TERMINAL else term_arrs[-1]
                dwell0 = params.board_s_per_pax * line.arrival_rate_pax_s[TERMINAL] \
                    * line.headway_s
                self.last_dispatch[bus.key] = term_time + dwell0
        self.trace.initial_arrivals = {
            b.key: {s: list(ts) for s, ts in b.arrivals.items()} for b in self.buses
        }
        self.trace.initial_round_base = {
            b.key: dict(b.round_base) for b in self.buses
        }
        for b in self.buses:
            self.trace.soc_start[b.key] = b.soc
            self.trace.link_energies[b.key] = []
            self.trace.charge_energies[b.key] = []

        if self.cfg.controller == CONTROLLER_MPC:
            t = 0.0
            while t < self.params.day_s:
                self.push(t, "control", None)
                t += self.params.control_interval_s

        # boarding for the initial occupancy, then first departures
        for bus in self.buses:
            line = self.line_of(bus)
            stop = bus.at_stop
            pred, shift = predecessor_of(line.n_buses, bus.bus)
            my_round = bus.next_round(stop) - 1
            pa = self.by_key[(bus.line, pred)].arrivals[stop][
                my_round - shift - self.by_key[(bus.line, pred)].round_base[stop]]
            gap = max(0.0, bus.arrived_at - pa)
            bus.boarding_s = self.draw_boarding(bus.line, stop, line.arrival_rate_pax_s[stop], gap)
            ready = max(bus.arrived_at + bus.boarding_s, 0.0)
            if stop == TERMINAL:
                bus.phase = PHASE_BOARDING
                bus.soc_at_arrival = bus.soc
                self.emit("hold_start", bus, TERMINAL, bus.soc)
                self.push(ready, "term_ready", bus)
            else:
                bus.departs_at = ready
                self.push(ready, "depart", bus)

    # -- command sources ---------------------------------------------------------

    def _tau_command(self, bus: _BusState, from_stop: int) -> float:
        line = self.line_of(bus)
        if self.mpc is not None and self.plan is not None:
            taus = self.plan.tau_s.get(bus.key, [])
            if bus.tau_ptr < len(taus):
                tau = taus[bus.tau_ptr]
                bus.tau_ptr += 1
                return tau
            self.trace.fallback_count += 1
        return self.fcfs.travel_command(self.world(), bus.line, bus.bus, from_stop, self.t)

    def _terminal_command(self, bus: _BusState):
        if self.mpc is not None and self.plan is not None:
            cmds = self.plan.terminal.get(bus.key, [])
            if bus.term_ptr < len(cmds):
                return cmds[bus.term_ptr]
            self.trace.fallback_count += 1
        return None

    # -- event handlers ------------------------------------------------------------

    def on_depart(self, bus: _BusState) -> None:
        """Departure from any stop (terminal dispatch routes through here)."""
        stop = bus.at_stop
        line = self.line_of(bus)
        tau = self._tau_command(bus, stop)
        tau = min(max(tau, line.t_min_s[stop]), line.t_max_s[stop])
        floor = self.draw_floor(bus, stop)
        realized = max(tau, floor)
        bus.on_link = (stop, self.t, tau, realized)
        bus.at_stop = None
        bus.departs_at = None
        bus.phase = None
        self.emit("depart", bus, stop, bus.soc)
        bus.gen += 1
        self.push(self.t + realized, "arrive", bus)

    def on_dispatch(self, bus: _BusState) -> None:
        """Terminal departure: close the visit record, then depart."""
        visit = TerminalVisit(
            line=bus.line, bus=bus.bus, arrive=bus.arrived_at,
            boarding_s=bus.boarding_s,
            charge_on=bus.charge_s is not None,
            charge_s=bus.charge_s or 0.0,
            depart=self.t, depart_soc=bus.soc,
        )
        self.trace.terminal_visits.append(visit)
        self.last_dispatch[bus.key] = self.t
        self.emit("hold_end", bus, TERMINAL, bus.soc)
        if self.mpc is not None:
            bus.term_ptr += 1
        bus.hold_s = None
        bus.charge_started_at = None
        bus.charge_s = None
        bus.planned_b = False
        self.on_depart(bus)

    def on_arrive(self, bus: _BusState) -> None:
        from_stop, dep_t, cmd, realized = bus.on_link
        line = self.line_of(bus)
        stop = line.next_stop(from_stop)
        pred, shift = predecessor_of(line.n_buses, bus.bus)
        target = bus.next_round(stop) - shift
        pred_state = self.by_key[(bus.line, pred)]
        idx = target - pred_state.round_base.get(stop, 0)
        pred_times = pred_state.arrivals.get(stop, [])
        if idx < 0:
            raise RuntimeError(
                f"seeded history too short for line {bus.line} bus {bus.bus} "
                f"at stop {stop} round {target}"
            )
        if idx >= len(pred_times):
            # would overtake: wait for the preceding bus to arrive first
            self.blocked.setdefault((bus.line, stop), []).append((bus.bus, bus.gen))
            return

        drive_s = min(max(realized, line.t_min_s[from_stop]), line.t_max_s[from_stop])
        energy = link_energy(line, from_stop, drive_s)
        bus.soc -= energy / self.params.battery_kwh
        self.trace.link_energies[bus.key].append(energy)
        if bus.soc < -1e-12:
            self.emit("abort", bus, stop, bus.soc)
            raise _Abort(
                f"battery of line {bus.line} bus {bus.bus} depleted on link "
                f"{from_stop} at t={self.t:.1f}"
            )

        bus.arrivals.setdefault(stop, []).append(self.t)
        bus.on_link = None
        bus.at_stop = stop
        bus.arrived_at = self.t
        self.emit("arrive", bus, stop, bus.soc)

        pa = pred_times[idx]
        self.trace.headway_devs.append(
            (self.t, bus.line, bus.bus, stop, (self.t - pa) - line.headway_s))
        gap = max(0.0, self.t - pa)
        bus.boarding_s = self.draw_boarding(bus.line, stop, line.arrival_rate_pax_s[stop], gap)

        if stop == TERMINAL:
            bus.phase = PHASE_BOARDING
            bus.soc_at_arrival = bus.soc
            bus.hold_s = None
            bus.charge_started_at = None
            bus.charge_s = None
            self.emit("hold_start", bus, TERMINAL, bus.soc)
            self.push(self.t + bus.boarding_s, "term_ready", bus)
        else:
            bus.departs_at = self.t + bus.boarding_s
            self.push(bus.departs_at, "depart", bus)

        # release any follower that was held back waiting for this arrival
        waiting = self.blocked.get((bus.line, stop))
        if waiting:
            self.blocked[(bus.line, stop)] = []
            for fb_idx, gen in waiting:
                fb = self.by_key[(bus.line, fb_idx)]
                if fb.gen == gen and fb.on_link is not None:
                    self.push(self.t, "arrive", fb)

    def on_term_ready(self, bus: _BusState) -> None:
        """Boarding finished at the terminal: decide hold/charge/dispatch."""
        bus.phase = PHASE_HOLDING
        if self.mpc is not None:
            self._apply_terminal_plan(bus)
            return
        # reactive baseline: charge as soon as possible, else dispatch on headway
        if self.fcfs.wants_charge(bus.line, bus.soc, self.t):
            bus.phase = PHASE_CONNECTING
            bus.hold_s = max(self.t - bus.arrived_at, 0.0)
            bus.planned_b = True
            self.push(self.t + self.params.charger_setup_s, "connect_done", bus)
        else:
            when = self.fcfs.dispatch_time(self.world(), bus.line, bus.bus, self.t)
            self.push(when, "dispatch", bus)

    def _apply_terminal_plan(self, bus: _BusState) -> None:
        """(Re)schedule the terminal timeline of a holding bus from the plan."""
        cmd = self._terminal_command(bus)
        if cmd is None:
            # declared safety net: behave like the baseline, loudly counted
            if self.fcfs.wants_charge(bus.line, bus.soc, self.t):
                bus.phase = PHASE_CONNECTING
                bus.hold_s = max(self.t - bus.arrived_at, 0.0)
                bus.planned_b = True
                self.push(self.t + self.params.charger_setup_s, "connect_done", bus)
            else:
                self.push(self.t, "dispatch", bus)
            return
        hold_end = max(bus.arrived_at + cmd.hold_s, bus.arrived_at + bus.boarding_s, self.t)
        bus.planned_b = cmd.charge_on
        bus.planned_c = cmd.charge_s
        bus.planned_start = cmd.planned_start
        if cmd.charge_on:
            self.push(hold_end, "hold_done", bus)
        else:
            self.push(hold_end, "dispatch", bus)

    def on_hold_done(self, bus: _BusState) -> None:
        """Planned hold is over and the plan says charge: begin setup."""
        bus.phase = PHASE_CONNECTING
        bus.hold_s = self.t - bus.arrived_at
        self.push(self.t + self.params.charger_setup_s, "connect_done", bus)

    def on_connect_done(self, bus: _BusState) -> None:
        if self.charger_active is None:
            self._start_charge(bus)
        else:
            self.charge_queue.append(bus.key)

    def _queue_priority(self, key: tuple[int, int]) -> tuple[float, int, int]:
        bus = self.by_key[key]
        if self.mpc is not None:
            return (bus.planned_start, key[0], key[1])
        return (bus.arrived_at, key[0], key[1])

    def _grant_charger(self) -> None:
        while self.charger_active is None and self.charge_queue:
            key = min(self.charge_queue, key=self._queue_priority)
            self.charge_queue.remove(key)
            self._start_charge(self.by_key[key])

    def _start_charge(self, bus: _BusState) -> None:
        params = self.params
        if self.mpc is not None:
            c = bus.planned_c
        else:
            c = self.fcfs.charge_command(bus.line, bus.soc, self.t)
        c = min(c, charge_seconds_for(max(0.0, 1.0 - bus.soc),
                                      params.charger_kw, params.battery_kwh))
        c = max(c, 0.0)
        if c <= 1e-9:
            bus.phase = PHASE_DRAINING
            bus.charge_s = 0.0
            self.push(self.t + params.charger_setup_s, "drain_done", bus)
            return
        bus.phase = PHASE_CHARGING
        bus.charge_started_at = self.t
        self.charger_active = bus.key
        self.charger_free_at = self.t + c
        self.emit("charge_start", bus, TERMINAL, bus.soc)
        self.push(self.t + c, "charge_end", bus)

    def on_charge_end(self, bus: _BusState) -> None:
        c = self.t - bus.charge_started_at
        energy = self.params.charger_kw * c / SECONDS_PER_HOUR
        bus.soc += energy / self.params.battery_kwh
        self.trace.charge_energies[bus.key].append(energy)
        self.trace.charge_intervals.append(
            (bus.line, bus.bus, bus.charge_started_at, self.t))
        bus.charge_s = c
        bus.phase = PHASE_DRAINING
        self.emit("charge_end", bus, TERMINAL, bus.soc)
        self.charger_active = None
        self.charger_free_at = self.t
        self._grant_charger()
        self.push(self.t + self.params.charger_setup_s, "drain_done", bus)

    def on_drain_done(self, bus: _BusState) -> None:
        if self.mpc is not None:
            self.push(self.t, "dispatch", bus)
        else:
            when = self.fcfs.dispatch_time(self.world(), bus.line, bus.bus, self.t)
            self.push(when, "dispatch", bus)

    def on_control(self) -> None:
        if self.mpc is None:
            return
        plan = self.mpc.step(self.world())
        self.plan = plan
        for b in self.buses:
            b.tau_ptr = 0
            b.term_ptr = 0
        for b in self.buses:
            if b.at_stop != TERMINAL or b.phase is None:
                continue
            if b.phase == PHASE_HOLDING:
                b.gen += 1
                self._apply_terminal_plan(b)
            elif b.phase == PHASE_CONNECTING:
                cmd = self._terminal_command(b)
                if cmd is not None:
                    b.planned_c = cmd.charge_s
                    b.planned_start = cmd.planned_start
            elif b.phase == PHASE_CHARGING:
                cmd = self._terminal_command(b)
                if cmd is not None:
                    new_end = b.charge_started_at + max(
                        cmd.charge_s, self.t - b.charge_started_at)
                    b.gen += 1
                    self.charger_free_at = new_end
                    self.push(new_end, "charge_end", b)

    # -- main loop ---------------------------------------------------------------

    def run(self) -> EpisodeTrace:
        self.seed_world()
        day = self.params.day_s
        try:
            while self.heap:
                when, _, kind, li, bi, gen = heapq.heappop(self.heap)
                if when > day:
                    break
                self.t = when
                if kind == "control":
                    self.on_control()
                    continue
                bus = self.by_key[(li, bi)]
                if gen != bus.gen:
                    continue
                handler = getattr(self, f"on_{kind}")
                handler(bus)
        except _Abort as abort:
            self.trace.aborted = True
            self.trace.abort_reason = abort.reason
        if not self.trace.aborted:
            self.t = day
            # close an interval still open at the end of the day
            if self.charger_active is not None:
                bus = self.by_key[self.charger_active]
                c = day - bus.charge_started_at
                if c > 0:
                    energy = self.params.charger_kw * c / SECONDS_PER_HOUR
                    bus.soc += energy / self.params.battery_kwh
                    self.trace.charge_energies[bus.key].append(energy)
                    self.trace.charge_intervals.append(
                        (bus.line, bus.bus, bus.charge_started_at, day))
                    self.emit("charge_end", bus, TERMINAL, bus.soc)
                    bus.charge_s = c
                self.charger_active = None
            # record terminal visits still in progress as open-ended
            for bus in self.buses:
                if bus.at_stop == TERMINAL and bus.phase is not None:
                    self.trace.terminal_visits.append(TerminalVisit(
                        line=bus.line, bus=bus.bus, arrive=bus.arrived_at,
                        boarding_s=bus.boarding_s,
                        charge_on=bus.charge_s is not None,
                        charge_s=bus.charge_s or 0.0,
                        depart=None, depart_soc=None,
                    ))
        for b in self.buses:
            self.trace.soc_end[b.key] = b.soc
        self.trace.final_t = self.t
        if self.mpc is not None:
            self.trace.solver_stats = self.mpc.stats
        return self.trace


def initial_world(config: NetworkConfig, controller: str = CONTROLLER_FCFS,
                  seed: int = 0) -> WorldState:
    """The seeded world state at t=0 (useful for one-shot MILP debugging)."""
    sim = _Simulation(EpisodeConfig(config, controller, seed))
    sim.seed_world()
    return sim.world()


def run_episode(cfg: EpisodeConfig, capture: Optional[list] = None) -> EpisodeTrace:
    """Simulate one full day under the configured controller and seed."""
    return _Simulation(cfg, capture=capture).run()
