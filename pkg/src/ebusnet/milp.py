"""Sparse standard-form mixed-integer linear program container.

A :class:`MilpProblem` is ``min c'x`` subject to named rows with sense
``<`` or ``=``, finite variable bounds, and a binary mask. Rows are kept
as triplets; the simplex workspace densifies once per solve session.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .lp import SimplexWorkspace


@dataclass
class MilpProblem:
    obj: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    is_binary: np.ndarray
    col_names: list[str]
    row_starts: np.ndarray     # CSR pointers, len n_rows + 1
    row_cols: np.ndarray
    row_vals: np.ndarray
    senses: list[str]          # "<" or "=" per row
    rhs: np.ndarray
    row_names: list[str]
    meta: Any = None           # builder-specific extraction data

    @property
    def n_cols(self) -> int:
        return len(self.obj)

    @property
    def n_rows(self) -> int:
        return len(self.rhs)

    def column(self, name: str) -> int:
        try:
            return self._col_index[name]
        except AttributeError:
            self._col_index = {n: i for i, n in enumerate(self.col_names)}
            return self._col_index[name]

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.n_rows, self.n_cols))
        for r in range(self.n_rows):
            sl = slice(self.row_starts[r], self.row_starts[r + 1])
            a[r, self.row_cols[sl]] = self.row_vals[sl]
        return a

    def to_sparse(self):
        from scipy import sparse

        return sparse.csr_matrix(
            (self.row_vals, self.row_cols, self.row_starts),
            shape=(self.n_rows, self.n_cols))

    def workspace(self) -> SimplexWorkspace:
        return SimplexWorkspace(self.obj, self.to_sparse(), self.senses, self.rhs,
                                self.lb, self.ub)

    def row_activity(self, x: np.ndarray) -> np.ndarray:
        act = np.zeros(self.n_rows)
        for r in range(self.n_rows):
            sl = slice(self.row_starts[r], self.row_starts[r + 1])
            act[r] = float(self.row_vals[sl] @ x[self.row_cols[sl]])
        return act

    def max_violation(self, x: np.ndarray) -> float:
        """Largest constraint/bound violation of ``x`` (0 when feasible)."""
        act = self.row_activity(x)
        worst = 0.0
        for r in range(self.n_rows):
            resid = act[r] - self.rhs[r]
            worst = max(worst, resid if self.senses[r] == "<" else abs(resid))
        worst = max(worst, float(np.max(self.lb - x, initial=0.0)))
        worst = max(worst, float(np.max(x - self.ub, initial=0.0)))
        return worst

    def objective_value(self, x: np.ndarray) -> float:
        return float(self.obj @ x)

    def validate(self) -> None:
        """Structural sanity: binary bounds, no empty rows, no orphan columns."""
        binaries = np.flatnonzero(self.is_binary)
        if not np.all(self.lb[binaries] >= -1e-12) or not np.all(self.ub[binaries] <= 1.0 + 1e-12):
            raise ValueError("binary column with bounds outside [0, 1]")
        if np.any(np.diff(self.row_starts) == 0):
            empty = int(np.flatnonzero(np.diff(self.row_starts) == 0)[0])
            raise ValueError(f"empty constraint row {self.row_names[empty]}")
        touched = np.zeros(self.n_cols, dtype=bool)
        touched[self.row_cols] = True
        touched[np.abs(self.obj) > 0] = True
        if not touched.all():
            orphan = int(np.flatnonzero(~touched)[0])
            raise ValueError(f"column {self.col_names[orphan]} appears nowhere")
        if not np.all(np.isfinite(self.lb)) or not np.all(np.isfinite(self.ub)):
            raise ValueError("all variable bounds must be finite")

    # -- MPS export (free format) -------------------------------------------

    def to_mps(self, name: str = "EBUSNET") -> str:
        """Debug export for cross-checking against external solvers."""
        lines = [f"NAME {name}", "ROWS", " N  COST"]
        for sense, rname in zip(self.senses, self.row_names):
            tag = "L" if sense == "<" else "E"
            lines.append(f" {tag}  {rname}")
        lines.append("COLUMNS")
        entries_by_col: list[list[tuple[str, float]]] = [[] for _ in range(self.n_cols)]
        for r in range(self.n_rows):
            sl = slice(self.row_starts[r], self.row_starts[r + 1])
            for cc, vv in zip(self.row_cols[sl], self.row_vals[sl]):
                entries_by_col[int(cc)].append((self.row_names[r], float(vv)))
        in_integer = False
        marker = 0
        for c in range(self.n_cols):
            binary = bool(self.is_binary[c])
            if binary and not in_integer:
                lines.append(f" MARKER{marker} 'MARKER' 'INTORG'")
                marker += 1
                in_integer = True
            elif not binary and in_integer:
                lines.append(f" MARKER{marker} 'MARKER' 'INTEND'")
                marker += 1
                in_integer = False
            cname = self.col_names[c]
            if self.obj[c] != 0.0:
                lines.append(f" {cname} COST {self.obj[c]:.17g}")
            for rname, val in entries_by_col[c]:
                lines.append(f" {cname} {rname} {val:.17g}")
        if in_integer:
            lines.append(f" MARKER{marker} 'MARKER' 'INTEND'")
        lines.append("RHS")
        for r in range(self.n_rows):
            if self.rhs[r] != 0.0:
                lines.append(f" RHS {self.row_names[r]} {self.rhs[r]:.17g}")
        lines.append("BOUNDS")
        for c in range(self.n_cols):
            cname = self.col_names[c]
            if self.lb[c] == self.ub[c]:
                lines.append(f" FX BND {cname} {self.lb[c]:.17g}")
            else:
                lines.append(f" LO BND {cname} {self.lb[c]:.17g}")
                lines.append(f" UP BND {cname} {self.ub[c]:.17g}")
        lines.append("ENDATA")
        return "\n".join(lines) + "\n"


class ModelBuilder:
    """Incremental construction of a :class:`MilpProblem`."""

    def __init__(self) -> None:
        self._obj: list[float] = []
        self._lb: list[float] = []
        self._ub: list[float] = []
        self._bin: list[bool] = []
        self._col_names: list[str] = []
        self._row_cols: list[int] = []
        self._row_vals: list[float] = []
        self._row_starts: list[int] = [0]
        self._senses: list[str] = []
        self._rhs: list[float] = []
        self._row_names: list[str] = []

    @property
    def n_cols(self) -> int:
        return len(self._obj)

    def col_lb(self, col: int) -> float:
        return self._lb[col]

    def col_ub(self, col: int) -> float:
        return self._ub[col]

    def add_col(self, name: str, lb: float, ub: float, obj: float = 0.0,
                binary: bool = False) -> int:
        if lb > ub:
            raise ValueError(f"column {name}: lb {lb} > ub {ub}")
        self._col_names.append(name)
        self._lb.append(float(lb))
        self._ub.append(float(ub))
        self._obj.append(float(obj))
        self._bin.append(binary)
        return len(self._col_names) - 1

    def set_obj(self, col: int, coeff: float) -> None:
        self._obj[col] = float(coeff)

    def add_row(self, name: str, terms: dict[int, float], sense: str, rhs: float) -> int:
        cleaned = {c: v for c, v in terms.items() if v != 0.0}
        if not cleaned:
            raise ValueError(f"row {name}: no nonzero coefficients")
        if sense not in ("<", "="):
            raise ValueError(f"row {name}: bad sense {sense!r}")
        for col in sorted(cleaned):
            self._row_cols.append(col)
            self._row_vals.append(float(cleaned[col]))
        self._row_starts.append(len(self._row_cols))
        self._senses.append(sense)
        self._rhs.append(float(rhs))
        self._row_names.append(name)
        return len(self._rhs) - 1

    def finish(self, meta: Any = None) -> MilpProblem:
        problem = MilpProblem(
            obj=np.asarray(self._obj, dtype=float),
            lb=np.asarray(self._lb, dtype=float),
            ub=np.asarray(self._ub, dtype=float),
            is_binary=np.asarray(self._bin, dtype=bool),
            col_names=list(self._col_names),
            row_starts=np.asarray(self._row_starts, dtype=np.int64),
            row_cols=np.asarray(self._row_cols, dtype=np.int64),
            row_vals=np.asarray(self._row_vals, dtype=float),
            senses=list(self._senses),
            rhs=np.asarray(self._rhs, dtype=float),
            row_names=list(self._row_names),
            meta=meta,
        )
        return problem
