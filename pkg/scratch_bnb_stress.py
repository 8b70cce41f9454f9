"""Stress B&B with knapsack-flavoured MILPs that force real branching."""
import time
import numpy as np
from scipy.optimize import linprog

from ebusnet.milp import ModelBuilder
from ebusnet.bnb import solve_milp


def scipy_solve(c, a, senses, rhs, lb, ub):
    le = np.array([s == "<" for s in senses])
    a_ub = a[le] if le.any() else None
    b_ub = rhs[le] if le.any() else None
    a_eq = a[~le] if (~le).any() else None
    b_eq = rhs[~le] if (~le).any() else None
    return linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                   bounds=list(zip(lb, ub)), method="highs")


rng = np.random.default_rng(777)
bad = 0
total_nodes = 0
t0 = time.perf_counter()
for trial in range(150):
    nb = int(rng.integers(4, 9))
    nc = int(rng.integers(2, 12))
    n = nb + nc
    # knapsack rows over binaries + random coupling with continuous part
    m = int(rng.integers(2, 8))
    a = np.zeros((m, n))
    a[:, :nb] = rng.uniform(0.2, 3.0, size=(m, nb))
    a[:, nb:] = rng.normal(size=(m, nc)) * (rng.random((m, nc)) < 0.6)
    c = np.concatenate([-rng.uniform(0.5, 4.0, size=nb), rng.normal(size=nc) * 0.3])
    lb = np.concatenate([np.zeros(nb), rng.uniform(-3, 0, size=nc)])
    ub = np.concatenate([np.ones(nb), rng.uniform(0.5, 5, size=nc) + 0.5])
    senses = ["<"] * m
    rhs = a[:, :nb].sum(axis=1) * rng.uniform(0.3, 0.7, size=m) + np.maximum(a[:, nb:], 0) @ ub[nb:] * 0.3
    mb = ModelBuilder()
    for j in range(n):
        mb.add_col(f"x{j}", lb[j], ub[j], obj=c[j], binary=j < nb)
    for i in range(m):
        mb.add_row(f"r{i}", {j: a[i, j] for j in range(n) if a[i, j] != 0.0}, senses[i], rhs[i])
    prob = mb.finish()
    res = solve_milp(prob)
    res2 = solve_milp(prob)
    assert res.nodes == res2.nodes and res.status == res2.status, "determinism broken"
    if res.x is not None and res2.x is not None:
        assert np.array_equal(res.x, res2.x), "determinism broken (solution)"
    total_nodes += res.nodes
    best = np.inf
    for mask in range(2 ** nb):
        fix = np.array([(mask >> k) & 1 for k in range(nb)], dtype=float)
        lbe = lb.copy(); ube = ub.copy()
        lbe[:nb] = fix; ube[:nb] = fix
        ref = scipy_solve(c, a, senses, rhs, lbe, ube)
        if ref.status == 0:
            best = min(best, ref.fun)
    if res.status == "optimal" and np.isfinite(best):
        if abs(res.objective - best) / max(1, abs(best)) > 1e-6:
            bad += 1
            print(f"trial {trial}: mine={res.objective:.9f} enum={best:.9f} nodes={res.nodes}")
        # check bound sanity
        assert res.bound <= res.objective + 1e-9
        assert (res.objective - res.bound) / max(1, abs(res.objective)) <= 1e-6 + 1e-12
    elif (res.status == "infeasible") != (not np.isfinite(best)):
        bad += 1
        print(f"trial {trial}: status mine={res.status} enum={best}")
print(f"stress: 150 trials, bad={bad}, nodes={total_nodes}, time={time.perf_counter()-t0:.1f}s")
