"""Scratch harness: random LPs vs scipy, random MILPs vs enumeration."""
import numpy as np
from scipy.optimize import linprog

from ebusnet.lp import solve_lp, SimplexWorkspace
from ebusnet.milp import ModelBuilder
from ebusnet.bnb import solve_milp


def random_lp(rng, m, n):
    a = rng.normal(size=(m, n)) * (rng.random(size=(m, n)) < 0.4)
    # ensure no empty rows
    for i in range(m):
        if not np.any(a[i]):
            a[i, rng.integers(n)] = rng.normal()
    c = rng.normal(size=n)
    lb = rng.uniform(-5, 0, size=n)
    ub = lb + rng.uniform(0.5, 8, size=n)
    x0 = rng.uniform(lb, ub)
    senses = ["<" if rng.random() < 0.7 else "=" for _ in range(m)]
    slack = rng.uniform(0, 2, size=m)
    act = a @ x0
    rhs = np.where([s == "<" for s in senses], act + slack, act)
    return c, a, senses, rhs, lb, ub


def scipy_solve(c, a, senses, rhs, lb, ub):
    le = np.array([s == "<" for s in senses])
    a_ub = a[le] if le.any() else None
    b_ub = rhs[le] if le.any() else None
    a_eq = a[~le] if (~le).any() else None
    b_eq = rhs[~le] if (~le).any() else None
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                  bounds=list(zip(lb, ub)), method="highs")
    return res


def main():
    rng = np.random.default_rng(12345)
    bad = 0
    worst = 0.0
    max_it = 0
    import time
    t0 = time.perf_counter()
    for trial in range(500):
        m = int(rng.integers(3, 26))
        n = int(rng.integers(max(4, m // 2), 51))
        c, a, senses, rhs, lb, ub = random_lp(rng, m, n)
        mine = solve_lp(c, a, senses, rhs, lb, ub)
        ref = scipy_solve(c, a, senses, rhs, lb, ub)
        max_it = max(max_it, mine.iterations)
        if ref.status == 0 and mine.status == "optimal":
            diff = abs(mine.objective - ref.fun) / max(1, abs(ref.fun))
            worst = max(worst, diff)
            if diff > 1e-7:
                bad += 1
                print(f"trial {trial}: obj mismatch mine={mine.objective:.9f} scipy={ref.fun:.9f}")
        elif (ref.status == 2) != (mine.status == "infeasible"):
            bad += 1
            print(f"trial {trial}: status mismatch mine={mine.status} scipy={ref.status}")
    print(f"LP: 500 trials, bad={bad}, worst rel diff={worst:.2e}, max iters={max_it}, "
          f"time={time.perf_counter()-t0:.1f}s")

    # --- MILP vs enumeration ---
    t0 = time.perf_counter()
    bad = 0
    total_nodes = 0
    for trial in range(120):
        nb = int(rng.integers(1, 9))
        nc = int(rng.integers(2, 31))
        n = nb + nc
        m = int(rng.integers(2, 16))
        c, a, senses, rhs, lb, ub = random_lp(rng, m, n)
        lb[:nb] = 0.0
        ub[:nb] = 1.0
        mb = ModelBuilder()
        for j in range(n):
            mb.add_col(f"x{j}", lb[j], ub[j], obj=c[j], binary=j < nb)
        for i in range(m):
            terms = {j: a[i, j] for j in range(n) if a[i, j] != 0.0}
            mb.add_row(f"r{i}", terms, senses[i], rhs[i])
        prob = mb.finish()
        res = solve_milp(prob)
        total_nodes += res.nodes
        # enumeration oracle with scipy
        best = np.inf
        for mask in range(2 ** nb):
            fix = [(mask >> k) & 1 for k in range(nb)]
            lbe = lb.copy(); ube = ub.copy()
            lbe[:nb] = fix; ube[:nb] = fix
            ref = scipy_solve(c, a, senses, rhs, lbe, ube)
            if ref.status == 0:
                best = min(best, ref.fun)
        if res.status == "optimal" and np.isfinite(best):
            if abs(res.objective - best) / max(1, abs(best)) > 1e-6:
                bad += 1
                print(f"milp trial {trial}: mine={res.objective:.9f} enum={best:.9f}")
        elif (res.status == "infeasible") != (not np.isfinite(best)):
            bad += 1
            print(f"milp trial {trial}: status mine={res.status} enum_best={best}")
    print(f"MILP: 120 trials, bad={bad}, nodes={total_nodes}, time={time.perf_counter()-t0:.1f}s")


if __name__ == "__main__":
    main()
