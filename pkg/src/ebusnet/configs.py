"""Bundled network configurations.

The case-study network mirrors the published scenario shape: two lines
sharing one terminal charger, 24 and 30 stops, 5 and 6 buses, 5-minute
headways, a 14-hour day and a 60-minute horizon. Travel-time and energy
coefficients are synthetic (the underlying fleet data is not public):
per-link values are generated deterministically so that driving a link
at the minimum travel time consumes 20-40% more energy than at the
maximum, and so that the nominal loop time matches the fleet size times
the headway.

The desk network is a shrunk variant sized so that the in-repo solver
can run full receding-horizon comparisons in seconds per episode.
"""

from __future__ import annotations

import math

from .model import LineSpec, NetworkConfig, Params


def synthetic_line(
    line_id: str,
    n_buses: int,
    n_stops: int,
    headway_s: float,
    soc_min: float,
    board_s_per_pax: float,
    mean_draw_kw: float,
    base_rate_pax_s: float = 0.02,
    terminal_reserve_s: float = 150.0,
) -> LineSpec:
    """Deterministic per-link data for a circular line.

    The per-stop nominal step (mid-range driving time plus expected dwell
    at the design headway) sums to ``n_buses * headway_s`` minus a
    terminal reserve that absorbs boarding, charger setup and typical
    charging time, so the fleet can hold the headway; energy coefficients
    target ``mean_draw_kw`` average traction power at mid-range speed.
    """
    step = (n_buses * headway_s - terminal_reserve_s) / n_stops
    rates = []
    t_min = []
    t_max = []
    e0s = []
    e1s = []
    for j in range(n_stops):
        rate = base_rate_pax_s * (1.0 + 0.5 * math.sin(2.0 * math.pi * j / n_stops + 0.7))
        dwell = board_s_per_pax * rate * headway_s
        t_mid = step - dwell
        if t_mid <= 0:
            raise ValueError(f"{line_id}: stop {j} leaves no driving time in the nominal step")
        tmin = round(0.75 * t_mid, 1)
        tmax = round(1.3 * t_mid, 1)
        # fast/slow consumption ratio inside 1.2-1.4
        ratio = 1.36 + 0.035 * math.cos(2.0 * math.pi * j / n_stops + 1.3)
        e_mid = mean_draw_kw * t_mid / 3600.0
        e_base = e_mid / (1.0 + (ratio - 1.0) * (tmax - t_mid) / (tmax - tmin))
        e1 = e_base * (ratio - 1.0) / (tmax - tmin)
        e0 = e_base + e1 * tmax
        rates.append(round(rate, 6))
        t_min.append(tmin)
        t_max.append(tmax)
        e0s.append(round(e0, 6))
        e1s.append(round(e1, 8))
    return LineSpec(
        line_id=line_id,
        n_buses=n_buses,
        headway_s=headway_s,
        soc_min=soc_min,
        arrival_rate_pax_s=tuple(rates),
        t_min_s=tuple(t_min),
        t_max_s=tuple(t_max),
        energy_base_kwh=tuple(e0s),
        energy_slope_kwh_per_s=tuple(e1s),
    )


def case_study() -> NetworkConfig:
    """Two-line network at the published scale (build-only for the in-repo
    solver; use :func:`desk` for full closed-loop runs)."""
    params = Params(
        battery_kwh=264.0,
        charger_kw=300.0,
        board_s_per_pax=1.5,
        charger_setup_s=10.0,
        price_per_kwh=0.08,
        price_per_wait_s=0.0025,
        reserve_price_per_kwh=0.4,
        big_m=1e5,
        horizon_s=3600.0,
        day_s=50400.0,
        control_interval_s=300.0,
        warmup_s=1800.0,
        max_hold_s=1800.0,
    )
    lines = (
        synthetic_line("north", n_buses=5, n_stops=24, headway_s=300.0,
                       soc_min=0.3, board_s_per_pax=params.board_s_per_pax,
                       mean_draw_kw=30.0),
        synthetic_line("south", n_buses=6, n_stops=30, headway_s=300.0,
                       soc_min=0.3, board_s_per_pax=params.board_s_per_pax,
                       mean_draw_kw=30.0),
    )
    config = NetworkConfig(lines=lines, params=params)
    config.validate()
    return config


def desk() -> NetworkConfig:
    """Shrunk two-line network for closed-loop experiments on one core."""
    params = Params(
        battery_kwh=90.0,
        charger_kw=150.0,
        board_s_per_pax=1.5,
        charger_setup_s=10.0,
        price_per_kwh=0.08,
        price_per_wait_s=0.0025,
        reserve_price_per_kwh=0.4,
        big_m=1e5,
        horizon_s=1500.0,
        day_s=14400.0,
        control_interval_s=300.0,
        warmup_s=1800.0,
        max_hold_s=600.0,
    )
    lines = (
        synthetic_line("a", n_buses=2, n_stops=5, headway_s=360.0,
                       soc_min=0.3, board_s_per_pax=params.board_s_per_pax,
                       mean_draw_kw=36.0),
        synthetic_line("b", n_buses=2, n_stops=7, headway_s=360.0,
                       soc_min=0.3, board_s_per_pax=params.board_s_per_pax,
                       mean_draw_kw=36.0),
    )
    config = NetworkConfig(lines=lines, params=params)
    config.validate()
    return config
