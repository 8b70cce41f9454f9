"""Sweep desk-config variants for the criterion directions."""
import sys
import time
from dataclasses import replace

from ebusnet.configs import desk, synthetic_line
from ebusnet.model import NetworkConfig
from ebusnet.sim import EpisodeConfig, run_episode
from ebusnet.trace import accumulate_costs, check_trace_invariants


def variant(draw, charger_kw, reserve, hold, rate=0.02):
    base = desk()
    p = replace(base.params, charger_kw=charger_kw, max_hold_s=hold)
    lines = (
        synthetic_line("a", 2, 5, 360.0, 0.3, p.board_s_per_pax, draw,
                       base_rate_pax_s=rate, terminal_reserve_s=reserve),
        synthetic_line("b", 2, 7, 360.0, 0.3, p.board_s_per_pax, draw,
                       base_rate_pax_s=rate, terminal_reserve_s=reserve),
    )
    cfg = NetworkConfig(lines=lines, params=p)
    cfg.validate()
    return cfg


def evaluate(cfg, seeds, node_limit=80):
    rows = []
    for seed in seeds:
        out = {}
        for ctrl in ("fcfs", "mpc"):
            t0 = time.perf_counter()
            tr = run_episode(EpisodeConfig(cfg, ctrl, seed=seed, node_limit=node_limit))
            el = time.perf_counter() - t0
            s, c, tot = accumulate_costs(tr, cfg.params)
            w = tr.waiting_stats(cfg.params)
            out[ctrl] = dict(
                service=s, charging=c, total=tot,
                wait=w["mean_wait_no_charge_s"],
                dwell=w["cumulative_terminal_dwell_s"],
                arrivals=sum(1 for e in tr.events if e.kind == "arrive"),
                consumed=sum(sum(v) for v in tr.link_energies.values()),
                soc_end=sum(tr.soc_end.values()),
                viol=len(check_trace_invariants(tr, cfg)),
                aborted=tr.aborted, wall=el,
            )
        rows.append((seed, out))
    return rows


def report(tag, rows):
    ok_total = sum(1 for _, o in rows if o["mpc"]["total"] < o["fcfs"]["total"])
    ok_chg = sum(1 for _, o in rows if o["mpc"]["charging"] <= o["fcfs"]["charging"])
    ok_wait = sum(1 for _, o in rows if o["mpc"]["wait"] < o["fcfs"]["wait"])
    viol = sum(o[c]["viol"] for _, o in rows for c in o)
    aborts = sum(o[c]["aborted"] for _, o in rows for c in o)
    walls = [o["mpc"]["wall"] for _, o in rows]
    n = len(rows)
    print(f"== {tag}: total {ok_total}/{n}  charging {ok_chg}/{n}  wait {ok_wait}/{n}  "
          f"viol={viol} aborts={aborts} mpc_wall={sum(walls)/n:.0f}s")
    for seed, o in rows:
        f, m = o["fcfs"], o["mpc"]
        print(f"  seed {seed}: svc {m['service']:.1f}/{f['service']:.1f} "
              f"chg {m['charging']:.2f}/{f['charging']:.2f} wait {m['wait']:.0f}/{f['wait']:.0f} "
              f"arr {m['arrivals']}/{f['arrivals']} cons {m['consumed']:.0f}/{f['consumed']:.0f} "
              f"soc {m['soc_end']:.2f}/{f['soc_end']:.2f}")


if __name__ == "__main__":
    seeds = [1, 2, 3]
    cases = {
        "base36_150kw_r150_h360": variant(36, 150, 150, 360),
        "draw40_120kw_r160_h360": variant(40, 120, 160, 360),
        "draw38_135kw_r150_h360_rate025": variant(38, 135, 150, 360, rate=0.025),
    }
    pick = sys.argv[1:] or list(cases)
    for tag in pick:
        report(tag, evaluate(cases[tag], seeds))
