"""Assembles the receding-horizon control problem as a MILP.

One problem couples every bus of every line over its spatial horizon:
travel-time commands per link, holding/charging decisions per terminal
visit, pairwise charger-exclusion disjunctions, and an objective made of
charging cost, headway-deviation penalties and an end-of-horizon charge
shortfall penalty (the last two reformulated with slack columns).

All time columns are expressed relative to the planning instant so the
big-M rows stay well scaled. Per-visit arrival-time windows are
propagated from the travel-time bounds in a few tightening sweeps; they
provide finite column bounds, per-row tightened big-M values, and the
pruning of exclusion pairs whose windows can never overlap. Exclusion
pairs between visits of the same bus are omitted entirely: the time
dynamics already order them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .horizon import (
    ANCHOR_AT_STOP,
    ANCHOR_AT_TERMINAL,
    ANCHOR_ON_LINK,
    HorizonSet,
    PredTime,
    PredVisit,
    TERMINAL_STOP,
    nominal_visit_step,
)
from .milp import MilpProblem, ModelBuilder
from .model import (
    NetworkConfig,
    SECONDS_PER_HOUR,
    WorldState,
    charge_seconds_for,
    soc_target,
)

_FEAS_TOL = 1e-6
_WINDOW_SWEEPS = 3


@dataclass
class VisitCols:
    stop: int
    seq: int
    is_terminal: bool
    t_col: int
    soc_col: int
    t_fixed: bool
    window: tuple[float, float]
    tau_col: Optional[int] = None       # outgoing link command
    w_col: Optional[int] = None
    b_col: Optional[int] = None
    c_col: Optional[int] = None
    tchar_col: Optional[int] = None
    slack_col: Optional[int] = None
    eta_col: Optional[int] = None       # headway-deviation slack
    pred_col: Optional[int] = None      # predecessor arrival column, if variable
    pred_time: Optional[float] = None   # predecessor arrival (shifted), if constant


@dataclass
class BusCols:
    line: int
    bus: int
    pre_tau_col: Optional[int] = None
    visits: list[VisitCols] = field(default_factory=list)
    nu_col: int = -1
    soc_min: float = 0.0
    sigma_bar: float = 0.0


@dataclass
class PairCols:
    psi_col: int
    first: tuple[int, int, int]    # (line, bus, seq)
    second: tuple[int, int, int]


@dataclass
class ProblemMeta:
    t_now: float
    config: NetworkConfig
    buses: dict[tuple[int, int], BusCols] = field(default_factory=dict)
    pairs: list[PairCols] = field(default_factory=list)


@dataclass
class TerminalCommand:
    hold_s: float
    charge_on: bool
    charge_s: float
    planned_start: float    # absolute planned charger-use start time


@dataclass
class ControlPlan:
    t_plan: float
    tau_s: dict[tuple[int, int], list[float]]
    terminal: dict[tuple[int, int], list[TerminalCommand]]
    objective: float
    flagged: bool = False   # produced under a node-limited solve


@dataclass
class _Frame:
    """Per-visit bound data shared by the window sweeps and column pass."""

    e: float = 0.0
    l: float = 0.0
    fixed_t: bool = False
    soc_floor: float = 1.0
    w_lb: float = 0.0
    w_ub: float = 0.0
    b_lb: float = 0.0
    b_ub: float = 1.0
    c_lb: float = 0.0
    c_ub: float = 0.0

    @property
    def tchar_lo(self) -> float:
        return self.e + self.w_lb

    @property
    def tchar_hi(self) -> float:
        return self.l + self.w_ub


def _sweep_frames(hset: HorizonSet, config: NetworkConfig,
                  frames: dict, order: list) -> None:
    """One tightening sweep of arrival windows and charge caps. Uses the
    frames of other buses in place (values only ever shrink, and any valid
    window stays valid)."""
    params = config.params
    t0 = hset.t_now
    q = params.battery_kwh
    setup = params.charger_setup_s
    c_full = min(params.big_m, charge_seconds_for(1.0, params.charger_kw, q))

    loop_s = {li: sum(nominal_visit_step(line, params, s) for s in range(line.n_stops))
              for li, line in enumerate(config.lines)}

    def pred_window(li, hvisit) -> tuple[float, float]:
        if isinstance(hvisit.pred, PredTime):
            p = hvisit.pred.time - t0
            return p, p
        if isinstance(hvisit.pred, PredVisit):
            pk = (hvisit.pred.line, hvisit.pred.bus)
            fl = frames.get(pk)
            if fl is not None and hvisit.pred.seq < len(fl):
                fr = fl[hvisit.pred.seq]
                return fr.e, fr.l
        return (-2.0 * loop_s[li],
                params.horizon_s + 3.0 * (loop_s[li] + params.max_hold_s + c_full))

    for key in order:
        bh = hset.buses[key]
        li, _ = key
        line = config.lines[li]
        anchor = bh.anchor
        out = frames.setdefault(key, [_Frame() for _ in bh.visits])

        if anchor.kind == ANCHOR_AT_STOP:
            j = anchor.stop
            dep = anchor.time_const - t0
            e_v, l_v = dep + line.t_min_s[j], dep + line.t_max_s[j]
            soc_floor = anchor.soc_const - line.energy_base_kwh[j] / q
        else:
            start = max(anchor.time_const, t0) if anchor.kind == ANCHOR_ON_LINK else anchor.time_const
            e_v = l_v = start - t0
            soc_floor = anchor.soc_const

        for v in bh.visits:
            fr = out[v.seq]
            if v.seq > 0:
                prev = out[v.seq - 1]
                hprev = bh.visits[v.seq - 1]
                j = hprev.stop
                e_v = prev.e + line.t_min_s[j]
                l_v = prev.l + line.t_max_s[j]
                if hprev.is_terminal:
                    e_v += prev.w_lb + prev.c_lb + 2.0 * params.charger_setup_s * prev.b_lb
                    l_v += prev.w_ub + prev.c_ub + 2.0 * params.charger_setup_s * prev.b_ub
                else:
                    dlp = params.board_s_per_pax * line.arrival_rate_pax_s[j]
                    if dlp > 0.0:
                        p_lo, p_hi = pred_window(li, hprev)
                        e_v += dlp * max(0.0, prev.e - p_hi)
                        l_v += dlp * max(0.0, prev.l - p_lo)
            fr.fixed_t = v.seq == 0 and anchor.kind in (ANCHOR_ON_LINK, ANCHOR_AT_TERMINAL)
            if not fr.fixed_t and v.pred is not None:
                # the preceding bus arrives first, so its earliest arrival
                # is also a valid floor here
                p_lo, _ = pred_window(li, v)
                e_v = max(e_v, p_lo)
            l_v = max(l_v, e_v)
            fr.e, fr.l = e_v, l_v
            fr.soc_floor = soc_floor

            if v.is_terminal:
                committed = v.seq == 0 and anchor.kind == ANCHOR_AT_TERMINAL
                fr.w_lb, fr.w_ub = 0.0, params.max_hold_s
                fr.b_lb, fr.b_ub = 0.0, 1.0
                fr.c_lb = 0.0
                fr.c_ub = min(c_full,
                              charge_seconds_for(min(1.0, 1.0 - soc_floor),
                                                 params.charger_kw, q))
                if committed:
                    if anchor.hold_fixed is not None:
                        fr.w_lb = fr.w_ub = anchor.hold_fixed
                    else:
                        fr.w_lb = min(anchor.hold_lb, params.max_hold_s)
                    if anchor.charge_on_fixed is not None:
                        fr.b_lb = fr.b_ub = float(anchor.charge_on_fixed)
                    if anchor.charge_fixed is not None:
                        fr.c_lb = fr.c_ub = anchor.charge_fixed
                    else:
                        fr.c_lb = min(anchor.charge_lb, fr.c_ub)
            else:
                fr.w_lb = fr.w_ub = 0.0
                fr.b_lb = fr.b_ub = 0.0
                fr.c_lb = fr.c_ub = 0.0
            soc_floor -= line.energy_base_kwh[v.stop] / q
            e_prev, l_prev = e_v, l_v


def build_problem(hset: HorizonSet, world: WorldState, config: NetworkConfig) -> MilpProblem:
    """Translate linked horizons into a sparse standard-form MILP."""
    if not hset.buses:
        raise ValueError("empty horizon set")
    params = config.params
    t0 = hset.t_now
    q = params.battery_kwh
    alpha = params.charger_kw / (SECONDS_PER_HOUR * q)
    charge_cost = params.price_per_kwh * params.charger_kw / SECONDS_PER_HOUR
    slack_cost = 100.0 * params.reserve_price_per_kwh * q
    setup = params.charger_setup_s

    mb = ModelBuilder()
    meta = ProblemMeta(t_now=t0, config=config)
    order = sorted(hset.buses)

    frames: dict[tuple[int, int], list[_Frame]] = {}
    for _ in range(_WINDOW_SWEEPS):
        _sweep_frames(hset, config, frames, order)

    # ---- pass A: columns ----------------------------------------------------
    for key in order:
        bh = hset.buses[key]
        li, bi = key
        line = config.lines[li]
        tag = f"l{li}b{bi}"
        anchor = bh.anchor
        bc = BusCols(li, bi, soc_min=line.soc_min,
                     sigma_bar=soc_target(t0, params, line.soc_min))
        meta.buses[key] = bc

        if anchor.kind == ANCHOR_AT_STOP:
            j = anchor.stop
            bc.pre_tau_col = mb.add_col(f"tt_{tag}_pre", line.t_min_s[j], line.t_max_s[j])

        for v, fr in zip(bh.visits, frames[key]):
            t_col = mb.add_col(f"arr_{tag}_v{v.seq}", fr.e, fr.e if fr.fixed_t else fr.l)
            if fr.fixed_t:
                soc_col = mb.add_col(f"soc_{tag}_v{v.seq}", anchor.soc_const, anchor.soc_const)
            else:
                soc_col = mb.add_col(f"soc_{tag}_v{v.seq}", fr.soc_floor - 0.5, 1.0)
            vc = VisitCols(v.stop, v.seq, v.is_terminal, t_col, soc_col,
                           fr.fixed_t, (fr.e, fr.l))
            if isinstance(v.pred, PredTime):
                vc.pred_time = v.pred.time - t0

            if v.is_terminal:
                vc.w_col = mb.add_col(f"hold_{tag}_v{v.seq}", fr.w_lb, fr.w_ub)
                vc.b_col = mb.add_col(f"chgon_{tag}_v{v.seq}", fr.b_lb, fr.b_ub, binary=True)
                vc.c_col = mb.add_col(f"chgs_{tag}_v{v.seq}", fr.c_lb, fr.c_ub, obj=charge_cost)
                vc.tchar_col = mb.add_col(f"chstart_{tag}_v{v.seq}",
                                          fr.tchar_lo + setup, fr.tchar_hi + setup)
                vc.slack_col = mb.add_col(f"socslack_{tag}_v{v.seq}", 0.0,
                                          max(2.0, line.soc_min - fr.soc_floor + 1.5),
                                          obj=slack_cost)
            if v.seq + 1 < len(bh.visits):
                vc.tau_col = mb.add_col(f"tt_{tag}_v{v.seq}",
                                        line.t_min_s[v.stop], line.t_max_s[v.stop])
            bc.visits.append(vc)

        bc.nu_col = mb.add_col(f"short_{tag}", 0.0, 8.0,
                               obj=params.reserve_price_per_kwh * q)

    # ---- pass B: rows ---------------------------------------------------------
    for key in order:
        bh = hset.buses[key]
        li, bi = key
        line = config.lines[li]
        tag = f"l{li}b{bi}"
        anchor = bh.anchor
        bc = meta.buses[key]
        visits = bc.visits

        def pred_cols(hvisit) -> tuple[Optional[int], Optional[float]]:
            if isinstance(hvisit.pred, PredVisit):
                pvc = meta.buses[(hvisit.pred.line, hvisit.pred.bus)].visits[hvisit.pred.seq]
                return pvc.t_col, None
            if isinstance(hvisit.pred, PredTime):
                return None, hvisit.pred.time - t0
            return None, None

        def pred_frame_window(hvisit) -> tuple[float, float]:
            if isinstance(hvisit.pred, PredTime):
                p = hvisit.pred.time - t0
                return p, p
            pfr = frames[(hvisit.pred.line, hvisit.pred.bus)][hvisit.pred.seq]
            return pfr.e, pfr.l

        if anchor.kind == ANCHOR_AT_STOP:
            j = anchor.stop
            v0 = visits[0]
            mb.add_row(f"tdyn_{tag}_pre", {v0.t_col: 1.0, bc.pre_tau_col: -1.0},
                       "=", anchor.time_const - t0)
            mb.add_row(
                f"socdyn_{tag}_pre",
                {v0.soc_col: 1.0, bc.pre_tau_col: -line.energy_slope_kwh_per_s[j] / q},
                "=", anchor.soc_const - line.energy_base_kwh[j] / q,
            )

        for idx, vc in enumerate(visits):
            hvisit = bh.visits[idx]
            p_col, p_const = pred_cols(hvisit)

            # no-overtaking: the preceding bus arrives first
            if not vc.t_fixed:
                if p_col is not None and p_col != vc.t_col:
                    mb.add_row(f"noovk_{tag}_v{vc.seq}",
                               {p_col: 1.0, vc.t_col: -1.0}, "<", 0.0)
                elif p_const is not None:
                    mb.add_row(f"noovk_{tag}_v{vc.seq}", {vc.t_col: -1.0}, "<", -p_const)

            # headway-deviation slacks feed the service-regularity objective
            if not vc.t_fixed and hvisit.pred is not None:
                h = line.headway_s
                p_lo, p_hi = pred_frame_window(hvisit)
                eta_ub = max(abs(vc.window[1] - p_lo - h), abs(h - vc.window[0] + p_hi)) + 10.0
                vc.eta_col = mb.add_col(f"hdev_{tag}_v{vc.seq}", 0.0, eta_ub,
                                        obj=params.price_per_wait_s)
                if p_col is not None:
                    vc.pred_col = p_col
                    mb.add_row(f"hdevlo_{tag}_v{vc.seq}",
                               {vc.t_col: 1.0, p_col: -1.0, vc.eta_col: -1.0}, "<", h)
                    mb.add_row(f"hdevhi_{tag}_v{vc.seq}",
                               {vc.t_col: -1.0, p_col: 1.0, vc.eta_col: -1.0}, "<", -h)
                else:
                    mb.add_row(f"hdevlo_{tag}_v{vc.seq}",
                               {vc.t_col: 1.0, vc.eta_col: -1.0}, "<", h + p_const)
                    mb.add_row(f"hdevhi_{tag}_v{vc.seq}",
                               {vc.t_col: -1.0, vc.eta_col: -1.0}, "<", -h - p_const)

            if vc.is_terminal:
                # holding covers the passenger exchange; for the committed
                # current visit the realized boarding already bounds w
                if not (vc.seq == 0 and anchor.kind == ANCHOR_AT_TERMINAL):
                    dl0 = params.board_s_per_pax * line.arrival_rate_pax_s[TERMINAL_STOP]
                    if dl0 > 0.0:
                        if p_col is not None:
                            mb.add_row(f"holdlb_{tag}_v{vc.seq}",
                                       {vc.w_col: -1.0, vc.t_col: dl0, p_col: -dl0},
                                       "<", 0.0)
                        elif p_const is not None:
                            if vc.t_fixed:
                                dwell = dl0 * max(0.0, mb.col_lb(vc.t_col) - p_const)
                                mb.add_row(f"holdlb_{tag}_v{vc.seq}",
                                           {vc.w_col: -1.0}, "<", -dwell)
                            else:
                                mb.add_row(f"holdlb_{tag}_v{vc.seq}",
                                           {vc.w_col: -1.0, vc.t_col: dl0}, "<", dl0 * p_const)
                        else:
                            mb.add_row(f"holdlb_{tag}_v{vc.seq}", {vc.w_col: -1.0},
                                       "<", -dl0 * line.headway_s)
                # big-M charge link, tightened to the visit's charge cap
                # (same feasible set, far stronger relaxation)
                m6 = min(params.big_m, max(1.0, mb.col_ub(vc.c_col)))
                mb.add_row(f"bigm_{tag}_v{vc.seq}",
                           {vc.c_col: 1.0, vc.b_col: -m6}, "<", 0.0)
                mb.add_row(f"socwinlo_{tag}_v{vc.seq}",
                           {vc.soc_col: -1.0, vc.c_col: -alpha, vc.slack_col: -1.0},
                           "<", -line.soc_min)
                mb.add_row(f"socwinhi_{tag}_v{vc.seq}",
                           {vc.soc_col: 1.0, vc.c_col: alpha}, "<", 1.0)
                mb.add_row(f"chstart_{tag}_v{vc.seq}",
                           {vc.tchar_col: 1.0, vc.t_col: -1.0, vc.w_col: -1.0},
                           "=", setup)

            # dynamics to the next visit
            if idx + 1 < len(visits):
                nxt = visits[idx + 1]
                j = vc.stop
                e1q = line.energy_slope_kwh_per_s[j] / q
                e0q = line.energy_base_kwh[j] / q
                if vc.is_terminal:
                    mb.add_row(
                        f"tdyn_{tag}_v{vc.seq}",
                        {nxt.t_col: 1.0, vc.t_col: -1.0, vc.w_col: -1.0, vc.c_col: -1.0,
                         vc.b_col: -2.0 * setup, vc.tau_col: -1.0},
                        "=", 0.0)
                    mb.add_row(
                        f"socdyn_{tag}_v{vc.seq}",
                        {nxt.soc_col: 1.0, vc.soc_col: -1.0, vc.c_col: -alpha,
                         vc.tau_col: -e1q},
                        "=", -e0q)
                else:
                    dl = params.board_s_per_pax * line.arrival_rate_pax_s[vc.stop]
                    terms = {nxt.t_col: 1.0, vc.tau_col: -1.0}
                    rhs = 0.0
                    if dl > 0.0 and p_col is not None:
                        terms[vc.t_col] = -1.0 - dl
                        terms[p_col] = terms.get(p_col, 0.0) + dl
                    elif dl > 0.0 and p_const is not None:
                        if vc.t_fixed:
                            terms[vc.t_col] = -1.0
                            rhs = dl * max(0.0, mb.col_lb(vc.t_col) - p_const)
                        else:
                            terms[vc.t_col] = -1.0 - dl
                            rhs = -dl * p_const
                    elif dl > 0.0:
                        terms[vc.t_col] = -1.0
                        rhs = dl * line.headway_s
                    else:
                        terms[vc.t_col] = -1.0
                    mb.add_row(f"tdyn_{tag}_v{vc.seq}", terms, "=", rhs)
                    mb.add_row(
                        f"socdyn_{tag}_v{vc.seq}",
                        {nxt.soc_col: 1.0, vc.soc_col: -1.0, vc.tau_col: -e1q},
                        "=", -e0q)

        # end-of-horizon charge shortfall (includes the last visit's charge
        # when the horizon ends at the terminal)
        last = visits[-1]
        terms = {last.soc_col: -1.0, bc.nu_col: -1.0}
        if last.is_terminal:
            terms[last.c_col] = -alpha
        mb.add_row(f"short_{tag}", terms, "<", -bc.sigma_bar)

    # ---- charger-exclusion pairs ------------------------------------------
    # (pairs within one bus are ordered by the dynamics already)
    terminals: list[tuple[tuple[int, int, int], VisitCols, _Frame]] = []
    for key in order:
        for vc in meta.buses[key].visits:
            if vc.is_terminal:
                terminals.append(((key[0], key[1], vc.seq), vc, frames[key][vc.seq]))

    for a in range(len(terminals)):
        for b in range(a + 1, len(terminals)):
            ref_a, va, fa = terminals[a]
            ref_b, vb, fb = terminals[b]
            if ref_a[:2] == ref_b[:2]:
                continue
            lo_a, hi_a = fa.tchar_lo + setup, fa.tchar_hi + setup
            lo_b, hi_b = fb.tchar_lo + setup, fb.tchar_hi + setup
            end_a = hi_a + fa.c_ub
            end_b = hi_b + fb.c_ub
            if end_a < lo_b or end_b < lo_a:
                continue  # windows can never overlap: no ordering decision
            if fa.b_ub == 0.0 or fb.b_ub == 0.0:
                continue
            m_a = min(params.big_m, max(1.0, end_a - lo_b))
            m_b = min(params.big_m, max(1.0, end_b - lo_a))
            ptag = f"l{ref_a[0]}b{ref_a[1]}v{ref_a[2]}_l{ref_b[0]}b{ref_b[1]}v{ref_b[2]}"
            psi = mb.add_col(f"order_{ptag}", 0.0, 1.0, binary=True)
            mb.add_row(
                f"excla_{ptag}",
                {va.tchar_col: 1.0, va.c_col: 1.0, vb.tchar_col: -1.0,
                 va.b_col: m_a, vb.b_col: m_a, psi: -m_a},
                "<", 2.0 * m_a)
            mb.add_row(
                f"exclb_{ptag}",
                {vb.tchar_col: 1.0, vb.c_col: 1.0, va.tchar_col: -1.0,
                 va.b_col: m_b, vb.b_col: m_b, psi: m_b},
                "<", 3.0 * m_b)
            meta.pairs.append(PairCols(psi, ref_a, ref_b))

    problem = mb.finish(meta=meta)
    problem.validate()
    return problem


# ---------------------------------------------------------------------------
# Solution handling
# ---------------------------------------------------------------------------


def extract_plan(problem: MilpProblem, x: np.ndarray, flagged: bool = False) -> ControlPlan:
    """Read a feasible integral solution back into per-bus commands."""
    meta: ProblemMeta = problem.meta
    viol = problem.max_violation(x)
    if viol > _FEAS_TOL:
        raise RuntimeError(f"solution violates the problem by {viol:.3e} > {_FEAS_TOL}")
    binaries = np.flatnonzero(problem.is_binary)
    if binaries.size:
        frac = np.abs(x[binaries] - np.round(x[binaries]))
        if float(np.max(frac)) > _FEAS_TOL:
            raise RuntimeError(f"solution not integral within {_FEAS_TOL}")

    tau_s: dict[tuple[int, int], list[float]] = {}
    terminal: dict[tuple[int, int], list[TerminalCommand]] = {}
    intervals = []
    for key in sorted(meta.buses):
        bc = meta.buses[key]
        line = meta.config.lines[bc.line]

        def clip_tau(value: float, stop: int) -> float:
            lo, hi = line.t_min_s[stop], line.t_max_s[stop]
            if value < lo - _FEAS_TOL or value > hi + _FEAS_TOL:
                raise RuntimeError(f"travel command {value} outside [{lo}, {hi}]")
            return min(max(value, lo), hi)

        taus: list[float] = []
        if bc.pre_tau_col is not None:
            stop = (bc.visits[0].stop - 1) % line.n_stops
            taus.append(clip_tau(float(x[bc.pre_tau_col]), stop))
        cmds: list[TerminalCommand] = []
        for vc in bc.visits:
            if vc.tau_col is not None:
                taus.append(clip_tau(float(x[vc.tau_col]), vc.stop))
            if vc.is_terminal:
                on = int(round(float(x[vc.b_col]))) == 1
                c = max(0.0, float(x[vc.c_col])) if on else 0.0
                w = max(0.0, float(x[vc.w_col]))
                start = float(x[vc.tchar_col]) + meta.t_now
                cmds.append(TerminalCommand(w, on, c, start))
                if on and c > 0.0:
                    intervals.append((start, start + c))
        tau_s[key] = taus
        terminal[key] = cmds

    intervals.sort()
    for (_, e1), (s2, _) in zip(intervals, intervals[1:]):
        if s2 < e1 - _FEAS_TOL:
            raise RuntimeError(
                f"extracted charger intervals overlap: one ends {e1:.3f}, next starts {s2:.3f}"
            )
    return ControlPlan(meta.t_now, tau_s, terminal,
                       objective=problem.objective_value(x), flagged=flagged)


def recompute_objective(problem: MilpProblem, x: np.ndarray) -> float:
    """Objective recomputed in absolute-value/max form from the raw vector,
    bypassing the slack columns. Equals the solver objective at any optimum."""
    meta: ProblemMeta = problem.meta
    params = meta.config.params
    alpha = params.charger_kw / (SECONDS_PER_HOUR * params.battery_kwh)
    charge_cost = params.price_per_kwh * params.charger_kw / SECONDS_PER_HOUR
    total = 0.0
    for key in sorted(meta.buses):
        bc = meta.buses[key]
        line = meta.config.lines[bc.line]
        h = line.headway_s
        for vc in bc.visits:
            if vc.is_terminal:
                total += charge_cost * float(x[vc.c_col])
                depart_soc = float(x[vc.soc_col]) + alpha * float(x[vc.c_col])
                total += 100.0 * params.reserve_price_per_kwh * params.battery_kwh \
                    * max(0.0, bc.soc_min - depart_soc)
            if vc.eta_col is not None:
                pred = float(x[vc.pred_col]) if vc.pred_col is not None else vc.pred_time
                total += params.price_per_wait_s * abs(float(x[vc.t_col]) - pred - h)
        last = bc.visits[-1]
        soc_end = float(x[last.soc_col])
        if last.is_terminal:
            soc_end += alpha * float(x[last.c_col])
        total += params.reserve_price_per_kwh * params.battery_kwh \
            * max(0.0, bc.sigma_bar - soc_end)
    return total
