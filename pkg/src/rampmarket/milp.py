"""Thin solver-agnostic layer over scipy's HiGHS interface.

ModelBuilder accumulates variables and sparse linear constraints; solve()
hands the model to scipy.optimize.milp, and fix_and_relax_duals() performs
the standard pricing pass: fix every integer variable at its incumbent
value, relax integrality, re-solve the continuous problem with linprog,
and read constraint duals off the optimal basis.

Dual sign convention, used everywhere downstream: for a minimization,
duals of ">= rhs" and "<= rhs" rows are reported nonnegative when binding;
duals of "= rhs" rows are the signed sensitivity d(objective)/d(rhs).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, linprog
from scipy.optimize import milp as _scipy_milp

LE, GE, EQ = "<=", ">=", "="

DEFAULT_GAP = 1e-6
FEASIBILITY_TOL = 1e-6


class BackendError(Exception):
    """Solver crashed or returned an unrecognized status."""


class RelaxationInfeasible(Exception):
    """Fixed-binary LP infeasible; indicates numerical trouble upstream."""


@dataclass
class Solution:
    status: str  # "optimal" | "infeasible" | "unbounded" | "time_limit" | "failed"
    objective_value: float
    x: np.ndarray

    @property
    def optimal(self):
        return self.status == "optimal"


class ModelBuilder:
    """Incrementally built linear/mixed-integer minimization model.

    Variable and constraint handles are dense integer indices, stable for
    the life of the builder.  Constraints can be appended one at a time or
    as vectorized blocks of COO triplets, which is what the market models
    use to stay fast at hundreds of thousands of rows.
    """

    def __init__(self):
        self._lb = []
        self._ub = []
        self._integer = []
        self._obj_chunks = []  # (var_idx_array, coef_array)
        self._row_i = []  # per-block local row offsets already globalized
        self._col_j = []
        self._vals = []
        self._sense = []
        self._rhs = []
        self._n_rows = 0

    # -- variables ----------------------------------------------------

    @property
    def n_vars(self):
        return len(self._lb)

    @property
    def n_constrs(self):
        return self._n_rows

    def add_var(self, lb=0.0, ub=np.inf, integer=False):
        self._lb.append(lb)
        self._ub.append(ub)
        self._integer.append(bool(integer))
        return len(self._lb) - 1

    def add_binary(self):
        return self.add_var(0.0, 1.0, integer=True)

    def add_vars(self, count, lb=0.0, ub=np.inf, integer=False):
        """Block of ``count`` variables; returns an index array.

        ``lb``/``ub`` may be scalars or arrays of length ``count``.
        """
        start = len(self._lb)
        self._lb.extend(np.broadcast_to(lb, (count,)).tolist())
        self._ub.extend(np.broadcast_to(ub, (count,)).tolist())
        self._integer.extend([bool(integer)] * count)
        return np.arange(start, start + count)

    def set_var_bounds(self, idx, lb, ub):
        for i, lo, hi in zip(np.atleast_1d(idx),
                             np.broadcast_to(lb, np.shape(np.atleast_1d(idx))),
                             np.broadcast_to(ub, np.shape(np.atleast_1d(idx)))):
            self._lb[i] = lo
            self._ub[i] = hi

    # -- constraints --------------------------------------------------

    def add_constr(self, var_idx, coefs, sense, rhs):
        """Single row: sum(coefs * x[var_idx]) <sense> rhs.  Returns handle."""
        var_idx = np.asarray(var_idx, dtype=np.int64).ravel()
        coefs = np.asarray(coefs, dtype=float).ravel()
        return int(self.add_constr_block(
            np.zeros(var_idx.size, dtype=np.int64), var_idx, coefs,
            [sense], [rhs])[0])

    def add_constr_block(self, local_rows, cols, vals, senses, rhs):
        """Append a block of rows given as COO triplets.

        ``local_rows`` is 0-based within the block; ``senses`` and ``rhs``
        have one entry per block row.  Returns the handle array.
        """
        local_rows = np.asarray(local_rows, dtype=np.int64)
        senses = list(senses)
        rhs = np.asarray(rhs, dtype=float)
        if rhs.size != len(senses):
            raise ValueError("senses and rhs length mismatch")
        cols = np.asarray(cols, dtype=np.int64)
        if cols.size and cols.max() >= self.n_vars:
            raise ValueError("constraint references unregistered variable")
        self._row_i.append(local_rows + self._n_rows)
        self._col_j.append(cols)
        self._vals.append(np.asarray(vals, dtype=float))
        self._sense.extend(senses)
        self._rhs.append(rhs)
        handles = np.arange(self._n_rows, self._n_rows + rhs.size)
        self._n_rows += rhs.size
        return handles

    def add_objective_terms(self, var_idx, coefs):
        """Accumulate linear objective terms (minimization)."""
        self._obj_chunks.append((np.asarray(var_idx, dtype=np.int64).ravel(),
                                 np.asarray(coefs, dtype=float).ravel()))

    # -- assembly -----------------------------------------------------

    def _matrix(self):
        if self._n_rows == 0:
            return sp.csr_matrix((0, self.n_vars))
        rows = np.concatenate(self._row_i) if self._row_i else np.zeros(0, dtype=np.int64)
        cols = np.concatenate(self._col_j) if self._col_j else np.zeros(0, dtype=np.int64)
        vals = np.concatenate(self._vals) if self._vals else np.zeros(0)
        return sp.coo_matrix((vals, (rows, cols)), shape=(self._n_rows, self.n_vars)).tocsr()

    def _objective(self):
        c = np.zeros(self.n_vars)
        for idx, coef in self._obj_chunks:
            np.add.at(c, idx, coef)
        return c

    def _row_bounds(self):
        rhs = np.concatenate(self._rhs) if self._rhs else np.zeros(0)
        sense = np.array(self._sense)
        lo = np.where(sense == LE, -np.inf, rhs)
        hi = np.where(sense == GE, np.inf, rhs)
        return lo, hi, rhs, sense


def _milp_status(code):
    return {0: "optimal", 1: "time_limit", 2: "infeasible", 3: "unbounded"}.get(code, "failed")


def solve(model, gap=DEFAULT_GAP, time_limit=None):
    """Solve the model as a MILP (HiGHS).  Status is reported truthfully."""
    c = model._objective()
    a = model._matrix()
    lo, hi, _, _ = model._row_bounds()
    constraints = [LinearConstraint(a, lo, hi)] if a.shape[0] else []
    options = {"mip_rel_gap": gap, "presolve": True}
    if time_limit is not None:
        options["time_limit"] = float(time_limit)
    try:
        res = _scipy_milp(
            c=c,
            constraints=constraints,
            integrality=np.array(model._integer, dtype=np.uint8),
            bounds=Bounds(np.array(model._lb), np.array(model._ub)),
            options=options,
        )
    except Exception as exc:  # pragma: no cover - backend crash path
        raise BackendError(str(exc)) from exc
    status = _milp_status(res.status)
    x = res.x if res.x is not None else np.full(model.n_vars, np.nan)
    obj = float(res.fun) if res.fun is not None else np.nan
    return Solution(status=status, objective_value=obj, x=x)


def _solve_lp_with_duals(model, lb, ub):
    """Continuous solve via linprog; returns (Solution, dual array per row)."""
    c = model._objective()
    a = model._matrix()
    _, _, rhs, sense = model._row_bounds()

    eq_mask = sense == EQ
    le_mask = sense == LE
    ge_mask = sense == GE
    a_eq = a[np.flatnonzero(eq_mask)]
    b_eq = rhs[eq_mask]
    a_ub = sp.vstack([a[np.flatnonzero(le_mask)], -a[np.flatnonzero(ge_mask)]]) \
        if (le_mask.any() or ge_mask.any()) else sp.csr_matrix((0, model.n_vars))
    b_ub = np.concatenate([rhs[le_mask], -rhs[ge_mask]])

    res = linprog(
        c=c,
        A_ub=a_ub if a_ub.shape[0] else None,
        b_ub=b_ub if a_ub.shape[0] else None,
        A_eq=a_eq if a_eq.shape[0] else None,
        b_eq=b_eq if a_eq.shape[0] else None,
        bounds=np.column_stack([lb, ub]),
        method="highs",
    )
    status = {0: "optimal", 1: "time_limit", 2: "infeasible", 3: "unbounded"}.get(
        res.status, "failed")
    duals = np.zeros(len(sense))
    if status == "optimal":
        n_le = int(le_mask.sum())
        if a_eq.shape[0]:
            duals[eq_mask] = res.eqlin.marginals
        if a_ub.shape[0]:
            # HiGHS marginals are d(obj)/d(b_ub); binding rows of a
            # minimization have nonpositive marginals, so negate to get
            # conventional nonnegative multipliers for both <= and >=.
            m = res.ineqlin.marginals
            duals[le_mask] = -m[:n_le]
            duals[ge_mask] = -m[n_le:]
        sol = Solution(status=status, objective_value=float(res.fun), x=res.x)
    else:
        sol = Solution(status=status, objective_value=np.nan,
                       x=np.full(model.n_vars, np.nan))
    return sol, duals


def solve_lp(model, marked_constraints=()):
    """Solve a purely continuous model and return marked-constraint duals."""
    lb = np.array(model._lb)
    ub = np.array(model._ub)
    sol, duals = _solve_lp_with_duals(model, lb, ub)
    if not sol.optimal:
        raise RelaxationInfeasible(f"LP solve ended with status {sol.status}")
    return sol, {int(h): float(duals[int(h)]) for h in np.asarray(marked_constraints).ravel()}


def fix_and_relax_duals(model, milp_solution, marked_constraints=(), rel_tol=1e-5):
    """Pricing pass: freeze integers at their incumbent values, solve the LP.

    Returns (lp_solution, {handle: dual}).  The LP objective must agree
    with the MILP objective; a large discrepancy or an infeasible LP is
    raised as RelaxationInfeasible since fixing to a feasible MILP point
    cannot legitimately cut off the incumbent.
    """
    if not milp_solution.optimal:
        raise ValueError("fix_and_relax_duals requires an optimal MILP solution")
    lb = np.array(model._lb, dtype=float)
    ub = np.array(model._ub, dtype=float)
    integer = np.array(model._integer)
    fixed = np.round(milp_solution.x[integer])
    lb[integer] = fixed
    ub[integer] = fixed
    sol, duals = _solve_lp_with_duals(model, lb, ub)
    if not sol.optimal:
        raise RelaxationInfeasible(f"fixed-integer LP status {sol.status}")
    scale = 1.0 + abs(milp_solution.objective_value)
    if abs(sol.objective_value - milp_solution.objective_value) > rel_tol * scale:
        raise RelaxationInfeasible(
            f"LP objective {sol.objective_value} drifted from MILP "
            f"objective {milp_solution.objective_value}"
        )
    return sol, {int(h): float(duals[int(h)]) for h in np.asarray(marked_constraints).ravel()}
