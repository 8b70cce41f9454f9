"""Bounded-variable primal simplex solver.

Solves  min c'x  s.t.  A_le x <= b_le,  A_eq x = b_eq,  lb <= x <= ub.

Internals: rows are equilibrated, slack columns turn inequalities into
equalities, and artificial columns complete the crash basis (two-phase
method; rows whose slack can absorb the start residual skip phase 1).
The constraint matrix is stored sparse, the basis inverse is kept
explicitly (dense) and updated with rank-one eta operations, with
periodic refactorization. Pricing is Dantzig's rule, falling back to
Bland's rule after a stall threshold so cycling can never surface as an
error. Warm starts reuse a caller-provided basis (and its inverse, when
available) and repair bound violations with a composite phase-1 sweep;
any numerical trouble falls back to a cold solve, so warm starting never
affects the result.

Everything is deterministic: identical inputs give identical pivots,
iteration counts and solutions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.linalg.blas import dger

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_UNBOUNDED = "unbounded"

_DTOL = 1e-9        # reduced-cost tolerance
_PIVTOL = 2e-7      # smallest usable pivot element (rows are equilibrated)
_SNAP = 1e-11       # tiny bound violations are snapped away
_ROW_TOL = 1e-7     # feasibility tolerance on original rows
_BOUND_TOL = 1e-9   # feasibility tolerance on bounds


@dataclass
class Basis:
    """Warm-start token: basic column set plus nonbasic bound sides.

    ``b_inv`` optionally carries the matching basis inverse so a warm
    start skips refactorization; it is shared by reference and copied
    before mutation.
    """

    basic: np.ndarray      # int indices into internal columns, len m
    at_upper: np.ndarray   # bool per internal column
    b_inv: Optional[np.ndarray] = None
    updates: int = 0       # eta updates accumulated since the last factorization


@dataclass
class LpResult:
    status: str
    objective: float
    x: np.ndarray            # structural variables only
    iterations: int
    basis: Optional[Basis] = None


class SimplexError(RuntimeError):
    """Unrecoverable numerical failure (should not happen in practice)."""


class SimplexWorkspace:
    """Reusable solver state for one constraint matrix.

    Bounds may vary between :meth:`solve` calls (that is how the
    branch-and-bound layer fixes binaries); the matrix may not.
    """

    def __init__(
        self,
        c: np.ndarray,
        a_matrix,
        senses: Sequence[str],
        rhs: np.ndarray,
        lb: np.ndarray,
        ub: np.ndarray,
    ) -> None:
        a_csr = sparse.csr_matrix(a_matrix)
        m, n = a_csr.shape
        if len(rhs) != m or len(c) != n or len(lb) != n or len(ub) != n:
            raise ValueError("inconsistent LP dimensions")
        self.m, self.n = m, n
        self.le_rows = np.array([s == "<" for s in senses], dtype=bool)
        if not all(s in ("<", "=") for s in senses):
            raise ValueError(f"unsupported row sense in {set(senses)}")

        # Row equilibration keeps pivots well scaled; slacks and
        # artificials are appended after scaling so their column is e_i.
        scale = np.zeros(m)
        absolute = abs(a_csr)
        for i in range(m):
            seg = absolute.data[absolute.indptr[i]:absolute.indptr[i + 1]]
            scale[i] = seg.max() if seg.size else 1.0
        scale[scale == 0.0] = 1.0
        self.row_scale = scale
        self.a_orig = a_csr
        self.rhs_orig = np.asarray(rhs, dtype=float)
        self.rhs_scaled = self.rhs_orig / scale

        a_scaled = sparse.diags(1.0 / scale) @ a_csr
        self.slack_rows = np.flatnonzero(self.le_rows)
        s = len(self.slack_rows)
        n_int = n + s + m
        self.n_int = n_int
        self.n_slack = s
        eye_cols = sparse.csc_matrix(
            (np.ones(s), (self.slack_rows, np.arange(s))), shape=(m, s))
        art_cols = sparse.identity(m, format="csc")
        self.a_int = sparse.hstack(
            [sparse.csc_matrix(a_scaled), eye_cols, art_cols], format="csc")
        self.a_int_t = self.a_int.T.tocsr()
        self.c_struct = np.asarray(c, dtype=float)
        self.lb_struct = np.asarray(lb, dtype=float)
        self.ub_struct = np.asarray(ub, dtype=float)

    def col(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """(row indices, values) of internal column ``j``."""
        sl = slice(self.a_int.indptr[j], self.a_int.indptr[j + 1])
        return self.a_int.indices[sl], self.a_int.data[sl]

    # -- bound/cost templates -------------------------------------------------

    def _full_bounds(self, lb, ub):
        n, s = self.n, self.n_slack
        lo = np.empty(self.n_int)
        hi = np.empty(self.n_int)
        lo[:n] = self.lb_struct if lb is None else lb
        hi[:n] = self.ub_struct if ub is None else ub
        lo[n:n + s] = 0.0
        hi[n:n + s] = np.inf
        lo[n + s:] = 0.0
        hi[n + s:] = 0.0
        return lo, hi

    def _full_cost(self):
        cost = np.zeros(self.n_int)
        cost[:self.n] = self.c_struct
        return cost

    # -- public entry ----------------------------------------------------------

    def solve(self, lb=None, ub=None, basis: Optional[Basis] = None,
              max_iter: int = 200_000) -> LpResult:
        lo, hi = self._full_bounds(lb, ub)
        if np.any(lo > hi + 1e-12):
            return LpResult(STATUS_INFEASIBLE, np.inf, np.zeros(self.n), 0)

        if basis is not None:
            try:
                result = self._try_warm(lo, hi, basis, max_iter)
            except SimplexError:
                result = None
            if result is not None:
                return result
        try:
            return self._cold(lo, hi, max_iter)
        except SimplexError:
            # last-resort careful mode: Bland pivoting, frequent refactoring
            return self._cold(lo, hi, max_iter, paranoid=True)

    # -- cold start: two-phase with artificials --------------------------------

    def _cold(self, lo, hi, max_iter, paranoid: bool = False):
        st = _State(self, lo.copy(), hi.copy())
        if paranoid:
            st.refactor_every = 25
            st.force_bland = True
        n, s, m = self.n, self.n_slack, self.m

        # Nonbasic structurals at the bound closest to zero.
        st.at_upper[:] = False
        finite_ub = np.isfinite(hi[:n])
        st.at_upper[:n] = finite_ub & (np.abs(hi[:n]) < np.abs(lo[:n]))
        st.basic = np.arange(n + s, n + s + m)

        # Crash: rows whose slack can absorb the start residual get the
        # slack as the basic column; the rest start on an artificial whose
        # open bound side matches the residual sign (phase 1 drives |a|
        # to zero).
        vals = st.nonbasic_values()
        vals[n:] = 0.0
        residual = self.rhs_scaled - self.a_int @ vals
        art_cost = np.zeros(self.n_int)
        slack_of_row = {int(row): n + k for k, row in enumerate(self.slack_rows)}
        for i in range(m):
            j = n + s + i
            slack = slack_of_row.get(i)
            if slack is not None and residual[i] >= 0.0:
                st.basic[i] = slack
            elif residual[i] >= 0.0:
                st.lo[j], st.hi[j] = 0.0, np.inf
                art_cost[j] = 1.0
            else:
                st.lo[j], st.hi[j] = -np.inf, 0.0
                art_cost[j] = -1.0
        st.set_basis_identity(residual)

        if not np.any(art_cost):
            phase1_obj, iters1 = 0.0, 0
        else:
            phase1_obj, iters1 = st.run(art_cost, max_iter, target=1e-10)
        if st.unbounded:
            raise SimplexError("phase-1 objective reported unbounded")
        if phase1_obj > 1e-8:
            return LpResult(STATUS_INFEASIBLE, np.inf, np.zeros(self.n), iters1)
        # Pin artificials at zero for phase 2.
        st.lo[n + s:] = 0.0
        st.hi[n + s:] = 0.0
        st.x[n + s:][np.abs(st.x[n + s:]) < 1e-8] = 0.0

        return self._phase2(st, max_iter, iters1)

    # -- warm start ------------------------------------------------------------

    def _try_warm(self, lo, hi, basis, max_iter):
        if len(basis.basic) != self.m or len(basis.at_upper) != self.n_int:
            return None
        st = _State(self, lo.copy(), hi.copy())
        st.basic = basis.basic.copy()
        st.at_upper = basis.at_upper.copy()
        if basis.b_inv is not None and basis.b_inv.shape == (self.m, self.m):
            st.reuse_inverse(basis.b_inv, basis.updates)
        elif not st.refactor():
            return None
        restored, iters = st.restore_feasibility(max_iter)
        if not restored:
            return None
        return self._phase2(st, max_iter, iters, strict=False)

    def _phase2(self, st, max_iter, start_iters, strict: bool = True):
        cost = self._full_cost()
        obj, iters = st.run(cost, max_iter, count_from=start_iters)
        if st.unbounded:
            return LpResult(STATUS_UNBOUNDED, -np.inf, np.zeros(self.n), iters)
        x = st.x[: self.n].copy()
        if not self._verify(x, st.lo, st.hi):
            # One shot at recovering through a fresh factorization.
            if st.refactor():
                obj, iters = st.run(cost, max_iter, count_from=iters)
                x = st.x[: self.n].copy()
            if not self._verify(x, st.lo, st.hi):
                if strict:
                    raise SimplexError("primal solution failed the feasibility check")
                return None  # warm path: give up, the caller falls back cold
        obj = float(self.c_struct @ x)
        return LpResult(STATUS_OPTIMAL, obj, x, iters,
                        Basis(st.basic.copy(), st.at_upper.copy(), st.b_inv, st._updates))

    def _verify(self, x, lo, hi) -> bool:
        act = self.a_orig @ x
        resid = act - self.rhs_orig
        scale = np.maximum(1.0, np.abs(self.rhs_orig))
        ok_rows = np.all(
            np.where(self.le_rows, resid <= _ROW_TOL * scale, np.abs(resid) <= _ROW_TOL * scale)
        )
        ok_bounds = np.all(x >= lo[: self.n] - _BOUND_TOL) and np.all(x <= hi[: self.n] + _BOUND_TOL)
        return bool(ok_rows and ok_bounds)


class _State:
    """Mutable simplex state: basis, values, and the pivoting loops."""

    def __init__(self, ws: SimplexWorkspace, lo, hi):
        self.ws = ws
        self.lo, self.hi = lo, hi
        self.m, self.n_int = ws.m, ws.n_int
        self.basic = np.zeros(self.m, dtype=np.int64)
        self.at_upper = np.zeros(self.n_int, dtype=bool)
        self.x = np.zeros(self.n_int)
        self.b_inv = np.eye(self.m)
        self.unbounded = False
        self._updates = 0
        self.refactor_every = 100
        self.force_bland = False

    # -- basis bookkeeping ------------------------------------------------

    def nonbasic_values(self) -> np.ndarray:
        vals = np.where(self.at_upper, self.hi, self.lo)
        return np.where(np.isfinite(vals), vals, 0.0)

    def set_basis_identity(self, residual):
        self.b_inv = np.eye(self.m)
        vals = self.nonbasic_values()
        vals[self.basic] = residual
        self.x = vals

    def refactor(self) -> bool:
        b_mat = np.zeros((self.m, self.m))
        for k, j in enumerate(self.basic):
            idx, val = self.ws.col(int(j))
            b_mat[idx, k] = val
        try:
            self.b_inv = np.linalg.inv(b_mat)
        except np.linalg.LinAlgError:
            return False
        if not np.all(np.isfinite(self.b_inv)):
            return False
        self._recompute_values()
        self._updates = 0
        return True

    def reuse_inverse(self, b_inv: np.ndarray, updates: int = 0) -> None:
        """Adopt a caller-provided inverse matching the current basis. The
        eta-update age travels with it so refactorization keeps its cadence
        across warm-start lineages."""
        if updates >= self.refactor_every and self.refactor():
            return
        self.b_inv = b_inv.copy()
        self._recompute_values()
        self._updates = updates

    def _recompute_values(self) -> None:
        vals = self.nonbasic_values()
        vals[self.basic] = 0.0
        rhs_eff = self.ws.rhs_scaled - self.ws.a_int @ vals
        vals[self.basic] = self.b_inv @ rhs_eff
        self.x = vals

    def ftran(self, j: int) -> np.ndarray:
        idx, val = self.ws.col(int(j))
        return self.b_inv[:, idx] @ val

    def _apply_pivot(self, entering, leaving_pos, w, theta, direction, leave_to_upper):
        leaving = self.basic[leaving_pos]
        new_val = (self.hi[entering] if self.at_upper[entering] else self.lo[entering]) + direction * theta
        self.x[self.basic] -= direction * theta * w
        self.x[entering] = new_val
        self.x[leaving] = self.hi[leaving] if leave_to_upper else self.lo[leaving]
        self.basic[leaving_pos] = entering
        self.at_upper[leaving] = leave_to_upper
        # eta update of the explicit inverse (in-place rank-1 BLAS update
        # on the transposed view, which is Fortran-ordered)
        piv = w[leaving_pos]
        row = self.b_inv[leaving_pos] / piv
        corr = w.copy()
        corr[leaving_pos] = 0.0
        dger(-1.0, row, corr, a=self.b_inv.T, overwrite_a=1)
        self.b_inv[leaving_pos] = row
        self._updates += 1
        if self._updates >= self.refactor_every:
            if not self.refactor():
                raise SimplexError("basis became singular")

    def max_basic_violation(self) -> float:
        bx = self.x[self.basic]
        lo_v = float(np.max(self.lo[self.basic] - bx, initial=0.0))
        hi_v = float(np.max(bx - self.hi[self.basic], initial=0.0))
        return max(lo_v, hi_v)

    def _snap(self):
        bx = self.x[self.basic]
        blo = self.lo[self.basic]
        bhi = self.hi[self.basic]
        below = bx < blo
        near = below & (blo - bx < _SNAP)
        bx[near] = blo[near]
        above = bx > bhi
        near = above & (bx - bhi < _SNAP)
        bx[near] = bhi[near]
        self.x[self.basic] = bx

    # -- main pivoting loop -------------------------------------------------

    def run(self, cost, max_iter, count_from: int = 0, target: float = -np.inf):
        """Minimize ``cost`` from the current (feasible) point. Returns
        (objective, total_iterations); stops early once ``target`` is hit."""
        iters = count_from
        stall = 0
        bland = self.force_bland
        stall_limit = 10 * (self.m + self.n_int)
        last_obj = np.inf
        self.unbounded = False
        if target > -np.inf and float(cost @ self.x) <= target:
            return float(cost @ self.x), iters
        in_basis = np.zeros(self.n_int, dtype=bool)
        fixed = self.lo == self.hi
        heals = 0
        while iters - count_from < max_iter:
            in_basis[:] = False
            in_basis[self.basic] = True
            y = self.b_inv.T @ cost[self.basic]
            d = cost - self.ws.a_int_t @ y
            can_rise = ~in_basis & ~fixed & ~self.at_upper & (d < -_DTOL)
            can_fall = ~in_basis & ~fixed & self.at_upper & (d > _DTOL)
            eligible = can_rise | can_fall
            if not eligible.any():
                # claim optimality only from a genuinely feasible point
                if self.max_basic_violation() > 1e-8 and heals < 3:
                    heals += 1
                    self.refactor()
                    ok, extra = self.restore_feasibility(max_iter)
                    iters += extra
                    if ok:
                        continue
                    raise SimplexError("feasibility lost and not recoverable")
                self._snap()
                return float(cost @ self.x), iters
            if bland:
                entering = int(np.flatnonzero(eligible)[0])
            else:
                score = np.where(eligible, np.abs(d), -1.0)
                entering = int(np.argmax(score))
            direction = 1.0 if can_rise[entering] else -1.0

            w = self.ftran(entering)
            theta, leaving_pos, leave_to_upper = self._ratio(entering, w, direction, bland)
            if leaving_pos is None and theta is None:
                self.unbounded = True
                return -np.inf, iters
            iters += 1
            if leaving_pos is None:
                # bound flip: entering travels its whole range
                span = self.hi[entering] - self.lo[entering]
                self.x[self.basic] -= direction * span * w
                self.at_upper[entering] = not self.at_upper[entering]
                self.x[entering] = self.hi[entering] if self.at_upper[entering] else self.lo[entering]
            else:
                self._apply_pivot(entering, leaving_pos, w, theta, direction, leave_to_upper)
                # a refactorization just revealed the true basic values;
                # repair any drift it uncovered before pivoting on
                if self._updates == 0 and self.max_basic_violation() > 1e-7:
                    heals += 1
                    if heals > 6:
                        raise SimplexError("feasibility lost and not recoverable")
                    ok, extra = self.restore_feasibility(max_iter)
                    iters += extra
                    if not ok:
                        raise SimplexError("feasibility lost and not recoverable")
            # objective tracking for stall detection and early exit
            obj = float(cost @ self.x)
            if obj <= target:
                self._snap()
                return obj, iters
            if obj < last_obj - 1e-12:
                stall = 0
                last_obj = obj
            else:
                stall += 1
                if stall > stall_limit:
                    bland = True
        raise SimplexError(f"iteration limit {max_iter} exceeded")

    def _ratio(self, entering, w, direction, bland):
        """Bounded-variable ratio test. Returns (theta, leaving_pos, to_upper);
        (None, None, _) means unbounded, theta with leaving_pos None means a
        bound flip."""
        g = -direction * w  # change of basic values per unit step
        bx = self.x[self.basic]
        blo = self.lo[self.basic]
        bhi = self.hi[self.basic]

        floor = max(_PIVTOL, 1e-10 * float(np.max(np.abs(w))) if w.size else _PIVTOL)
        rising = g > floor
        falling = g < -floor
        with np.errstate(divide="ignore", invalid="ignore"):
            t_up = np.where(rising & np.isfinite(bhi), (bhi - bx) / g, np.inf)
            t_dn = np.where(falling & np.isfinite(blo), (blo - bx) / g, np.inf)
        t_up = np.maximum(t_up, 0.0)
        t_dn = np.maximum(t_dn, 0.0)
        cand = np.minimum(t_up, t_dn)
        theta_row = float(np.min(cand)) if cand.size else np.inf

        span = self.hi[entering] - self.lo[entering]
        if theta_row >= span - 1e-12 and np.isfinite(span):
            return span, None, False
        if not np.isfinite(theta_row):
            return None, None, False

        ties = np.flatnonzero(cand <= theta_row + 1e-9)
        if bland:
            # lowest variable index among ties
            pos = int(ties[np.argmin(self.basic[ties])])
        else:
            # largest pivot magnitude among ties, then lowest variable index
            mags = np.abs(w[ties])
            best = mags.max()
            close = ties[mags >= best - 1e-12]
            pos = int(close[np.argmin(self.basic[close])])
        to_upper = bool(t_up[pos] <= t_dn[pos])
        return float(cand[pos]), pos, to_upper

    # -- warm-start feasibility restoration ---------------------------------

    def restore_feasibility(self, max_iter):
        """Composite phase 1 from an arbitrary basis: drive basic bound
        violations to zero without artificial columns. Returns
        (success, iterations)."""
        iters = 0
        stall = 0
        bland = self.force_bland
        stall_limit = 10 * (self.m + self.n_int)
        last_inf = np.inf
        in_basis = np.zeros(self.n_int, dtype=bool)
        fixed = self.lo == self.hi
        while iters < max_iter:
            bx = self.x[self.basic]
            blo = self.lo[self.basic]
            bhi = self.hi[self.basic]
            below = bx < blo - _BOUND_TOL
            above = bx > bhi + _BOUND_TOL
            total_inf = float(np.sum(np.where(below, blo - bx, 0.0))
                              + np.sum(np.where(above, bx - bhi, 0.0)))
            if not below.any() and not above.any():
                return True, iters
            c1_b = np.where(below, -1.0, np.where(above, 1.0, 0.0))
            y = self.b_inv.T @ c1_b
            d = -(self.ws.a_int_t @ y)
            in_basis[:] = False
            in_basis[self.basic] = True
            can_rise = ~in_basis & ~fixed & ~self.at_upper & (d < -_DTOL)
            can_fall = ~in_basis & ~fixed & self.at_upper & (d > _DTOL)
            eligible = can_rise | can_fall
            if not eligible.any():
                return False, iters
            if bland:
                entering = int(np.flatnonzero(eligible)[0])
            else:
                score = np.where(eligible, np.abs(d), -1.0)
                entering = int(np.argmax(score))
            direction = 1.0 if can_rise[entering] else -1.0
            w = self.ftran(entering)
            if not self._restore_step(entering, w, direction, below, above, bland):
                return False, iters
            iters += 1
            if total_inf < last_inf - 1e-12:
                stall = 0
                last_inf = total_inf
            else:
                stall += 1
                if stall > stall_limit:
                    bland = True
        return False, iters

    def _restore_step(self, entering, w, direction, below, above, bland):
        g = -direction * w
        bx = self.x[self.basic]
        blo = self.lo[self.basic]
        bhi = self.hi[self.basic]

        floor = max(_PIVTOL, 1e-10 * float(np.max(np.abs(w))) if w.size else _PIVTOL)
        rising = g > floor
        falling = g < -floor
        feas = ~below & ~above
        with np.errstate(divide="ignore", invalid="ignore"):
            t_lo = (blo - bx) / g   # step at which a basic meets its lower bound
            t_hi = (bhi - bx) / g   # step at which a basic meets its upper bound
        theta = np.full(len(bx), np.inf)
        to_upper = np.zeros(len(bx), dtype=bool)
        # violated-below basics rising block at the lower bound
        mask = below & rising
        theta[mask] = t_lo[mask]
        # violated-above basics falling block at the upper bound
        mask = above & falling
        theta[mask] = t_hi[mask]
        to_upper[mask] = True
        # feasible basics block at whichever finite bound they move toward
        mask = feas & rising & np.isfinite(bhi)
        theta[mask] = t_hi[mask]
        to_upper[mask] = True
        mask = feas & falling & np.isfinite(blo)
        theta[mask] = t_lo[mask]
        theta = np.maximum(theta, 0.0)
        theta_row = float(np.min(theta)) if theta.size else np.inf

        span = self.hi[entering] - self.lo[entering]
        if theta_row >= span - 1e-12 and np.isfinite(span):
            self.x[self.basic] -= direction * span * w
            self.at_upper[entering] = not self.at_upper[entering]
            self.x[entering] = self.hi[entering] if self.at_upper[entering] else self.lo[entering]
            return True
        if not np.isfinite(theta_row):
            return False
        ties = np.flatnonzero(theta <= theta_row + 1e-9)
        if bland:
            pos = int(ties[np.argmin(self.basic[ties])])
        else:
            mags = np.abs(w[ties])
            best = mags.max()
            close = ties[mags >= best - 1e-12]
            pos = int(close[np.argmin(self.basic[close])])
        self._apply_pivot(entering, pos, w, float(theta[pos]), direction, bool(to_upper[pos]))
        return True


def solve_lp(
    c,
    a_matrix,
    senses,
    rhs,
    lb,
    ub,
    basis: Optional[Basis] = None,
    max_iter: int = 200_000,
) -> LpResult:
    """One-shot convenience wrapper around :class:`SimplexWorkspace`."""
    ws = SimplexWorkspace(np.asarray(c, dtype=float), a_matrix,
                          senses, np.asarray(rhs, dtype=float),
                          np.asarray(lb, dtype=float), np.asarray(ub, dtype=float))
    return ws.solve(basis=basis, max_iter=max_iter)
