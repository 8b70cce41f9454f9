"""Per-bus spatial planning horizons.

The common time horizon is mapped, for every bus, to the ordered list of
stop visits the bus is expected to make within it, rolling a nominal
clock (free-flow link times plus expected dwell at the design headway)
forward from the bus's current position. Repeat visits to the same stop
get increasing visit indices; every horizon contains at least one
terminal visit so charging stays decidable.

Visits carry service-round numbers that align headway coupling across
buses: the round-``r`` arrival of bus ``b`` is preceded by the round-``r``
arrival of bus ``b - 1``, and bus 0 follows the line's last bus one round
back. A predecessor arrival resolves to a recorded constant when it
already happened, to the matching visit inside the predecessor's horizon
when it is planned, and to nothing (skipped coupling) when it lies beyond
that horizon.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .model import (
    AtStop,
    BusSnapshot,
    LineSpec,
    MissingHistoryError,
    NetworkConfig,
    OnLink,
    Params,
    WorldState,
    dwell_time,
    link_energy,
    PHASE_BOARDING,
    PHASE_HOLDING,
    PHASE_CONNECTING,
    PHASE_CHARGING,
    PHASE_DRAINING,
)

TERMINAL_STOP = 0
MAX_LOOPS = 3  # hard cap on horizon length, in full loops per bus

ANCHOR_ON_LINK = "on_link"
ANCHOR_AT_STOP = "at_stop"
ANCHOR_AT_TERMINAL = "at_terminal"


@dataclass(frozen=True)
class PredVisit:
    """Predecessor reference into another horizon (a decision variable)."""

    line: int
    bus: int
    seq: int


@dataclass(frozen=True)
class PredTime:
    """Predecessor reference to a recorded arrival time (a constant)."""

    time: float


@dataclass
class StopVisit:
    line: int
    bus: int
    stop: int
    seq: int                # position in the owning bus's horizon
    visit_k: int            # 1-based repeat count of this stop in the horizon
    round_no: int           # service round of this arrival (aligned across buses)
    nominal_arrival: float
    is_terminal: bool
    pred: Union[PredVisit, PredTime, None] = None


@dataclass
class Anchor:
    """Where the horizon attaches to reality.

    ``on_link``: the bus is driving; the first visit's arrival time and
    state of charge are constants predicted from the commanded travel
    time. ``at_stop``: the bus stands at a regular stop with a known
    departure time; the link it is about to enter is still commandable.
    ``at_terminal``: the current terminal visit itself is part of the
    horizon and its holding/charging decisions remain open, narrowed by
    whatever has already been committed (the ``*_fixed`` fields).
    """

    kind: str
    stop: int               # current stop, or the link origin when on_link
    time_const: float       # eta / known departure / recorded terminal arrival
    soc_const: float
    hold_lb: float = 0.0
    hold_fixed: Optional[float] = None
    charge_on_fixed: Optional[int] = None
    charge_lb: float = 0.0
    charge_fixed: Optional[float] = None


@dataclass
class BusHorizon:
    line: int
    bus: int
    anchor: Anchor
    visits: list[StopVisit]

    @property
    def terminal_seqs(self) -> list[int]:
        return [v.seq for v in self.visits if v.is_terminal]


@dataclass
class HorizonSet:
    t_now: float
    horizon_s: float
    buses: dict[tuple[int, int], BusHorizon] = field(default_factory=dict)

    def lookup(self, line: int, bus: int, stop: int, round_no: int) -> Optional[int]:
        bh = self.buses.get((line, bus))
        if bh is None:
            return None
        for v in bh.visits:
            if v.stop == stop and v.round_no == round_no:
                return v.seq
        return None


def nominal_visit_step(line: LineSpec, params: Params, stop: int) -> float:
    """Nominal time from arrival at ``stop`` to arrival at the next stop."""
    dwell = dwell_time(line.headway_s, line.arrival_rate_pax_s[stop], params.board_s_per_pax)
    return dwell + line.t_min_s[stop]


def _make_anchor(snapshot: BusSnapshot, line: LineSpec, params: Params, t_now: float) -> Anchor:
    state = snapshot.state
    if isinstance(state, OnLink):
        eta = max(state.departed_at + state.commanded_s, t_now)
        energy = link_energy(line, state.from_stop, state.commanded_s)
        soc = snapshot.soc - energy / params.battery_kwh
        return Anchor(ANCHOR_ON_LINK, state.from_stop, eta, soc)
    assert isinstance(state, AtStop)
    if state.stop != TERMINAL_STOP:
        departs = state.departs_at
        if departs is None:
            departs = state.arrived_at + state.boarding_s
        return Anchor(ANCHOR_AT_STOP, state.stop, departs, snapshot.soc)

    soc_arr = state.soc_at_arrival if state.soc_at_arrival is not None else snapshot.soc
    anchor = Anchor(ANCHOR_AT_TERMINAL, TERMINAL_STOP, state.arrived_at, soc_arr)
    elapsed = max(0.0, t_now - state.arrived_at)
    if state.phase in (PHASE_BOARDING, PHASE_HOLDING):
        anchor.hold_lb = max(elapsed, state.boarding_s)
    elif state.phase == PHASE_CONNECTING:
        anchor.hold_fixed = state.hold_s
        anchor.charge_on_fixed = 1
    elif state.phase == PHASE_CHARGING:
        anchor.hold_fixed = state.hold_s
        anchor.charge_on_fixed = 1
        anchor.charge_lb = max(0.0, t_now - state.charge_started_at)
    elif state.phase == PHASE_DRAINING:
        anchor.hold_fixed = state.hold_s
        anchor.charge_on_fixed = 1
        anchor.charge_fixed = state.charge_s
    else:
        raise ValueError(f"unknown terminal phase {state.phase!r}")
    return anchor


def build_horizon(snapshot: BusSnapshot, line: LineSpec, params: Params,
                  t_now: float) -> BusHorizon:
    """Roll the nominal clock forward and list the visits inside the horizon.

    Visits are included while their nominal arrival lies within the
    horizon; the list is then extended to the next terminal visit if none
    was reached, and truncated at :data:`MAX_LOOPS` full loops.
    """
    if t_now < 0:
        raise ValueError(f"t_now must be nonnegative (got {t_now})")
    anchor = _make_anchor(snapshot, line, params, t_now)
    cap = MAX_LOOPS * line.n_stops

    next_round = {s: snapshot.next_round(s) for s in range(line.n_stops)}

    visits: list[StopVisit] = []
    k_count: dict[int, int] = {}

    def append(stop: int, when: float, round_no: Optional[int] = None) -> None:
        if round_no is None:
            round_no = next_round[stop]
            next_round[stop] += 1
        k_count[stop] = k_count.get(stop, 0) + 1
        visits.append(StopVisit(
            line=snapshot.line, bus=snapshot.bus, stop=stop, seq=len(visits),
            visit_k=k_count[stop], round_no=round_no,
            nominal_arrival=when, is_terminal=stop == TERMINAL_STOP,
        ))

    if anchor.kind == ANCHOR_AT_TERMINAL:
        if not snapshot.arrivals.get(TERMINAL_STOP):
            raise MissingHistoryError(
                f"bus {snapshot.line}/{snapshot.bus}: standing at the terminal "
                "with no recorded arrival"
            )
        stop, when = TERMINAL_STOP, anchor.time_const
        append(stop, when, round_no=next_round[TERMINAL_STOP] - 1)
    elif anchor.kind == ANCHOR_AT_STOP:
        stop = line.next_stop(anchor.stop)
        when = anchor.time_const + line.t_min_s[anchor.stop]
        append(stop, when)
    else:
        stop = line.next_stop(anchor.stop)
        when = anchor.time_const
        append(stop, when)

    deadline = t_now + params.horizon_s
    while len(visits) < cap:
        when = when + nominal_visit_step(line, params, stop)
        stop = line.next_stop(stop)
        if when <= deadline:
            append(stop, when)
        else:
            break

    if not any(v.is_terminal for v in visits):
        while len(visits) < cap + line.n_stops:
            append(stop, when)
            if stop == TERMINAL_STOP:
                break
            when = when + nominal_visit_step(line, params, stop)
            stop = line.next_stop(stop)

    return BusHorizon(snapshot.line, snapshot.bus, anchor, visits)


def build_horizons(world: WorldState, config: NetworkConfig) -> HorizonSet:
    """Build and link the horizons of every bus in the network."""
    hset = HorizonSet(world.t_now, config.params.horizon_s)
    for snap in world.buses:
        line = config.lines[snap.line]
        hset.buses[(snap.line, snap.bus)] = build_horizon(snap, line, config.params, world.t_now)
    return link_predecessors(hset, world, config)


def link_predecessors(hset: HorizonSet, world: WorldState,
                      config: NetworkConfig) -> HorizonSet:
    """Resolve each visit's predecessor to an in-horizon visit or a recorded
    arrival-time constant."""
    for (line_idx, bus_idx), bh in hset.buses.items():
        line = config.lines[line_idx]
        pred_bus = bus_idx - 1 if bus_idx > 0 else line.n_buses - 1
        shift = 0 if bus_idx > 0 else 1
        pred_snap = world.bus(line_idx, pred_bus)
        for visit in bh.visits:
            target = visit.round_no - shift
            recorded = pred_snap.recorded_arrival(visit.stop, target)
            if recorded is not None:
                visit.pred = PredTime(recorded)
            elif target < pred_snap.round_base.get(visit.stop, 0):
                raise MissingHistoryError(
                    f"bus {line_idx}/{bus_idx}: predecessor arrival for stop "
                    f"{visit.stop} round {target} predates the seeded history"
                )
            else:
                seq = hset.lookup(line_idx, pred_bus, visit.stop, target)
                visit.pred = PredVisit(line_idx, pred_bus, seq) if seq is not None else None
    return hset


def predict_arrival(world: WorldState, config: NetworkConfig, line_idx: int,
                    bus_idx: int, stop: int, round_no: int) -> float:
    """Nominal forward-rolled arrival time of a bus at a future visit.

    Used by the reactive baseline when the needed predecessor arrival has
    not been recorded yet.
    """
    snap = world.bus(line_idx, bus_idx)
    line = config.lines[line_idx]
    params = config.params
    state = snap.state
    if isinstance(state, OnLink):
        cur = line.next_stop(state.from_stop)
        when = max(state.departed_at + state.commanded_s, world.t_now)
    else:
        departs = state.departs_at
        if departs is None:
            departs = max(state.arrived_at + state.boarding_s, world.t_now)
        cur = line.next_stop(state.stop)
        when = departs + line.t_min_s[state.stop]
    counters = {s: snap.next_round(s) for s in range(line.n_stops)}
    for _ in range((MAX_LOOPS + 2) * line.n_stops):
        idx = counters[cur]
        counters[cur] += 1
        if cur == stop and idx >= round_no:
            return when
        when += nominal_visit_step(line, params, cur)
        cur = line.next_stop(cur)
    raise MissingHistoryError(
        f"bus {line_idx}/{bus_idx}: visit round {round_no} to stop {stop} unreachable "
        f"within {MAX_LOOPS + 2} loops"
    )
