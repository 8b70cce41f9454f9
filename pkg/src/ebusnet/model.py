"""Domain types and deterministic dynamics of the electric bus network.

Conventions used across the package:

* durations are seconds, energies kWh, powers kW,
* state of charge (soc) is a fraction of the battery capacity,
* stop 0 of every line is the shared terminal that hosts the charger,
* link ``j`` runs from stop ``j`` to stop ``(j + 1) % n_stops``,
* buses are indexed 0..n_buses-1; bus ``b`` follows bus ``b - 1``, and
  bus 0 follows bus ``n_buses - 1`` (circular order).

The kW*s -> kWh conversion lives in :func:`soc_after_charge` so the 3600
factor appears in exactly one place.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

SECONDS_PER_HOUR = 3600.0


class ConfigError(ValueError):
    """A network description violates a structural invariant."""


class MissingHistoryError(RuntimeError):
    """A predecessor arrival time was needed but never recorded/seeded."""


# ---------------------------------------------------------------------------
# Static configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Params:
    """Economic and physical parameters shared by the whole network."""

    battery_kwh: float            # usable battery capacity of every bus
    charger_kw: float             # power delivered by the fast charger
    board_s_per_pax: float        # mean boarding time per passenger
    charger_setup_s: float        # time to begin or end a charging operation
    price_per_kwh: float          # electricity price
    price_per_wait_s: float       # cost of one second of headway deviation
    reserve_price_per_kwh: float  # price on end-of-horizon charge shortfall
    big_m: float                  # big-M constant for disjunctive rows
    horizon_s: float              # planning horizon length
    day_s: float                  # total simulated service duration
    control_interval_s: float     # time between plan recomputations
    warmup_s: float               # costs are not counted before this time
    max_hold_s: float = 1800.0    # cap on a single holding period

    def validate(self) -> None:
        for name in (
            "battery_kwh", "charger_kw", "board_s_per_pax", "charger_setup_s",
            "price_per_kwh", "price_per_wait_s", "reserve_price_per_kwh",
            "big_m", "horizon_s", "day_s", "control_interval_s", "warmup_s",
            "max_hold_s",
        ):
            value = getattr(self, name)
            if not value > 0.0:
                raise ConfigError(f"params.{name}: must be strictly positive (got {value})")
        if self.reserve_price_per_kwh < self.price_per_kwh:
            raise ConfigError(
                "params.reserve_price_per_kwh: must be >= price_per_kwh "
                f"(got {self.reserve_price_per_kwh} < {self.price_per_kwh})"
            )
        if self.horizon_s > self.day_s:
            raise ConfigError(
                f"params.horizon_s: must not exceed day_s (got {self.horizon_s} > {self.day_s})"
            )
        if self.control_interval_s > self.horizon_s:
            raise ConfigError(
                "params.control_interval_s: must not exceed horizon_s "
                f"(got {self.control_interval_s} > {self.horizon_s})"
            )


@dataclass(frozen=True)
class LineSpec:
    """One circular bus line: topology, demand, travel-time and energy data.

    Index ``j`` of the per-stop tuples refers to stop ``j`` (arrival rate)
    and to the link leaving stop ``j`` (travel-time bounds and energy
    coefficients). Link energy is ``energy_base_kwh[j] -
    energy_slope_kwh_per_s[j] * travel_s``: driving a link faster consumes
    more energy.
    """

    line_id: str
    n_buses: int
    headway_s: float
    soc_min: float
    arrival_rate_pax_s: tuple[float, ...]
    t_min_s: tuple[float, ...]
    t_max_s: tuple[float, ...]
    energy_base_kwh: tuple[float, ...]
    energy_slope_kwh_per_s: tuple[float, ...]

    @property
    def n_stops(self) -> int:
        return len(self.arrival_rate_pax_s)

    def next_stop(self, stop: int) -> int:
        return (stop + 1) % self.n_stops

    def validate(self, prefix: str = "line") -> None:
        if self.n_buses < 1:
            raise ConfigError(f"{prefix}.n_buses: need at least one bus (got {self.n_buses})")
        if self.n_stops < 2:
            raise ConfigError(f"{prefix}: need at least two stops (got {self.n_stops})")
        if not self.headway_s > 0:
            raise ConfigError(f"{prefix}.headway_s: must be positive (got {self.headway_s})")
        if not 0.0 < self.soc_min < 1.0:
            raise ConfigError(f"{prefix}.soc_min: must lie strictly inside (0, 1) (got {self.soc_min})")
        lengths = {
            "arrival_rate_pax_s": len(self.arrival_rate_pax_s),
            "t_min_s": len(self.t_min_s),
            "t_max_s": len(self.t_max_s),
            "energy_base_kwh": len(self.energy_base_kwh),
            "energy_slope_kwh_per_s": len(self.energy_slope_kwh_per_s),
        }
        if len(set(lengths.values())) != 1:
            raise ConfigError(f"{prefix}: per-stop arrays have mismatched lengths {lengths}")
        for j in range(self.n_stops):
            loc = f"{prefix}.stops[{j}]"
            lam = self.arrival_rate_pax_s[j]
            tmin, tmax = self.t_min_s[j], self.t_max_s[j]
            e0, e1 = self.energy_base_kwh[j], self.energy_slope_kwh_per_s[j]
            if lam < 0:
                raise ConfigError(f"{loc}.arrival_rate_pax_s: must be nonnegative (got {lam})")
            if not 0 < tmin <= tmax:
                raise ConfigError(f"{loc}: need 0 < t_min_s <= t_max_s (got {tmin}, {tmax})")
            if e1 < 0:
                raise ConfigError(f"{loc}.energy_slope_kwh_per_s: must be nonnegative (got {e1})")
            if not e0 - e1 * tmin > 0 or not e0 - e1 * tmax > 0:
                raise ConfigError(
                    f"{loc}: link energy must stay positive over [t_min_s, t_max_s] "
                    f"(got {e0 - e1 * tmin:.6g} at t_min, {e0 - e1 * tmax:.6g} at t_max)"
                )


@dataclass(frozen=True)
class NetworkConfig:
    """Static description of the whole network (lines share one terminal)."""

    lines: tuple[LineSpec, ...]
    params: Params
    charger_count: int = 1

    def validate(self) -> None:
        if not self.lines:
            raise ConfigError("network: need at least one line")
        if self.charger_count != 1:
            raise ConfigError(
                f"network.charger_count: only a single shared charger is supported (got {self.charger_count})"
            )
        ids = [line.line_id for line in self.lines]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"network: duplicate line_id in {ids}")
        self.params.validate()
        for idx, line in enumerate(self.lines):
            line.validate(prefix=f"lines[{idx}]")

    @property
    def n_buses_total(self) -> int:
        return sum(line.n_buses for line in self.lines)


# ---------------------------------------------------------------------------
# Dynamic state
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OnLink:
    """Bus is driving the link that leaves ``from_stop``."""

    from_stop: int
    departed_at: float
    commanded_s: float


# Terminal phases, in chronological order of a visit.
PHASE_BOARDING = "boarding"    # passenger exchange in progress
PHASE_HOLDING = "holding"      # held at the stop, charging not begun
PHASE_CONNECTING = "connecting"  # charger setup in progress (committed)
PHASE_CHARGING = "charging"    # drawing power
PHASE_DRAINING = "draining"    # charger teardown before dispatch


@dataclass(frozen=True)
class AtStop:
    """Bus is standing at ``stop``; extra fields apply to terminal visits."""

    stop: int
    arrived_at: float
    boarding_s: float = 0.0
    departs_at: Union[float, None] = None   # known for regular stops
    phase: str = PHASE_BOARDING
    soc_at_arrival: Union[float, None] = None
    hold_s: Union[float, None] = None       # committed once charging begins
    charge_started_at: Union[float, None] = None
    charge_s: Union[float, None] = None     # committed once charging ends


@dataclass
class BusSnapshot:
    """Dynamic state of one bus plus its recorded arrival history.

    ``arrivals[stop]`` lists every recorded arrival time of this bus at
    ``stop`` in visit order, including the synthetic pre-episode history
    seeded by the simulator. Entry ``i`` belongs to service round
    ``round_base[stop] + i``; rounds give headway coupling an alignment
    that survives loop-boundary wraps (bus ``b`` round ``r`` follows bus
    ``b - 1`` round ``r``; bus 0 follows the last bus at round ``r - 1``).
    ``soc`` is the current bookkeeping value; for a bus standing at the
    terminal mid-charge the arrival value is kept in
    ``state.soc_at_arrival``.
    """

    line: int
    bus: int
    soc: float
    state: Union[OnLink, AtStop]
    arrivals: dict[int, list[float]] = field(default_factory=dict)
    round_base: dict[int, int] = field(default_factory=dict)

    def recorded_arrival(self, stop: int, round_no: int) -> Union[float, None]:
        times = self.arrivals.get(stop, [])
        idx = round_no - self.round_base.get(stop, 0)
        if 0 <= idx < len(times):
            return times[idx]
        return None

    def next_round(self, stop: int) -> int:
        """Service round of this bus's next (unrecorded) arrival at ``stop``."""
        return self.round_base.get(stop, 0) + len(self.arrivals.get(stop, []))

    def validate(self) -> None:
        if not -1e-9 <= self.soc <= 1.0 + 1e-9:
            raise ValueError(f"bus {self.line}/{self.bus}: soc {self.soc} outside [0, 1]")
        for stop, times in self.arrivals.items():
            if any(b < a for a, b in zip(times, times[1:])):
                raise ValueError(
                    f"bus {self.line}/{self.bus}: arrival history at stop {stop} not nondecreasing"
                )


@dataclass
class WorldState:
    """Everything a controller may look at when deciding."""

    t_now: float
    buses: list[BusSnapshot]
    charger_free_at: float = 0.0
    last_dispatch: dict[tuple[int, int], float] = field(default_factory=dict)

    def bus(self, line: int, bus: int) -> BusSnapshot:
        for snap in self.buses:
            if snap.line == line and snap.bus == bus:
                return snap
        raise KeyError((line, bus))


# ---------------------------------------------------------------------------
# Deterministic formulas
# ---------------------------------------------------------------------------


def dwell_time(gap_s: float, rate_pax_s: float, board_s_per_pax: float) -> float:
    """Planning-form dwell: boarding time for passengers accumulated over ``gap_s``."""
    if gap_s < 0:
        raise ValueError(f"gap_s must be nonnegative (got {gap_s})")
    return board_s_per_pax * rate_pax_s * gap_s


def link_energy(line: LineSpec, link: int, travel_s: float) -> float:
    """Energy (kWh) consumed on ``link`` when driven in ``travel_s`` seconds."""
    tmin, tmax = line.t_min_s[link], line.t_max_s[link]
    if not tmin - 1e-9 <= travel_s <= tmax + 1e-9:
        raise ValueError(
            f"travel_s {travel_s} outside [{tmin}, {tmax}] on link {link} of line {line.line_id}"
        )
    return line.energy_base_kwh[link] - line.energy_slope_kwh_per_s[link] * travel_s


def soc_after_link(soc: float, energy_kwh: float, battery_kwh: float) -> float:
    """State of charge after consuming ``energy_kwh``; may go negative here,
    battery-empty detection is the simulator's job."""
    return soc - energy_kwh / battery_kwh


def soc_after_charge(soc: float, charge_s: float, charger_kw: float, battery_kwh: float) -> float:
    """State of charge after ``charge_s`` seconds on a ``charger_kw`` charger."""
    return soc + (charger_kw * charge_s / SECONDS_PER_HOUR) / battery_kwh


def charge_seconds_for(delta_soc: float, charger_kw: float, battery_kwh: float) -> float:
    """Inverse of :func:`soc_after_charge`: seconds needed to add ``delta_soc``."""
    return delta_soc * battery_kwh * SECONDS_PER_HOUR / charger_kw


def soc_target(t_s: float, params: Params, soc_min: float) -> float:
    """Day-long state-of-charge target: starts near full, decreases linearly,
    and is clamped at ``soc_min`` once within one horizon of the day end."""
    raw = soc_min + ((params.day_s - params.horizon_s - t_s) / params.day_s) * (1.0 - soc_min)
    return max(raw, soc_min)
