"""Two-stage stochastic unit commitment, solved in extensive form.

First stage: three-binary commitment trajectories (commit/startup/shutdown)
per DG per subperiod, blocked to be constant within each hour.  Second
stage: one dispatch block per sampled net-load realization, sharing the
first-stage binaries directly.  Costs are duration-weighted: dispatch,
curtailment, and no-load costs carry the subperiod length in hours (1/K);
startup costs are charged once per startup event.

The printed form of the downward ramp constraints reuses the startup-rate
symbol inside the shutdown term; the corrected coefficient uses the
shutdown rate and the down-ramp rate instead.  ``verbatim_ramp_down=True``
reproduces the original coefficients for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import milp
from .network import active_line_indices
from .scenario import IN_SAMPLE


class DimensionMismatch(Exception):
    pass


class InfeasibleSuc(Exception):
    """The extensive-form MILP failed to solve to optimality.

    With the curtailment slack in every balance row this can only happen
    through inconsistent initial conditions or a genuine bug, so it is
    surfaced loudly instead of being swallowed.
    """


@dataclass(eq=False)
class SucModel:
    """Built extensive-form model plus the variable index bookkeeping."""

    builder: milp.ModelBuilder
    instance: object
    scenarios: object
    u_idx: np.ndarray  # (G, T)
    v_idx: np.ndarray
    w_idx: np.ndarray
    p_idx: np.ndarray  # (I, G, T)
    ps_idx: np.ndarray  # (I, G, S, T)
    pc_idx: np.ndarray  # (I, N, T)
    seg_costs: np.ndarray  # (G, S), padded with zeros
    seg_widths: np.ndarray  # (G, S)


@dataclass(eq=False)
class SucSolution:
    u: np.ndarray  # (G, T) in {0,1}
    v: np.ndarray
    w: np.ndarray
    p: np.ndarray  # (I, G, T) MW above minimum
    ps: np.ndarray  # (I, G, S, T)
    pc: np.ndarray  # (I, N, T) curtailment MW
    expected_total_cost: float
    first_stage_cost: float
    per_scenario_stage2_cost: np.ndarray  # (I,)

    def hourly_commitment(self, k_per_hour):
        """Commitment per hour, read off the last subperiod of each hour."""
        return self.u[:, k_per_hour - 1 :: k_per_hour]


def _rows(builder, col_arrays, val_arrays, sense, rhs):
    """Vectorized block of rows.

    Each column array contributes a fixed number of entries per row; its
    raveled order must be row-major by row.  Scalar values broadcast over
    all entries of their column array.
    """
    rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
    m = rhs.size
    if m == 0:
        return np.zeros(0, dtype=np.int64)
    local, cols, vals = [], [], []
    for c, vv in zip(col_arrays, val_arrays):
        c = np.asarray(c).ravel()
        if c.size % m:
            raise ValueError("column array size not a multiple of row count")
        local.append(np.repeat(np.arange(m), c.size // m))
        cols.append(c)
        if np.ndim(vv) == 0:
            vals.append(np.full(c.size, float(vv)))
        else:
            vv = np.asarray(vv, dtype=float).ravel()
            if vv.size != c.size:
                raise ValueError("value array size mismatch")
            vals.append(vv)
    return builder.add_constr_block(
        np.concatenate(local), np.concatenate(cols), np.concatenate(vals),
        [sense] * m, rhs)


def _padded_segments(instance):
    gmax = max((len(g.segments) for g in instance.dgs), default=1)
    costs = np.zeros((instance.n_dgs, gmax))
    widths = np.zeros((instance.n_dgs, gmax))
    for gi, g in enumerate(instance.dgs):
        costs[gi, : len(g.segments)] = g.segment_costs
        widths[gi, : len(g.segments)] = g.segment_widths
    return costs, widths


def add_commitment_logic(builder, instance, u, v, w, steps_per_hour=None):
    """Three-binary logic, min up/down times, and initial-condition windows.

    Shared by the stochastic model (subperiod granularity) and the
    day-ahead clearing model (hourly granularity, ``steps_per_hour=1``).
    """
    kk = steps_per_hour if steps_per_hour is not None else instance.time_grid.subperiods_per_hour
    t_total = instance.time_grid.hours_count * kk
    gcount = instance.n_dgs
    u0 = np.array([g.init_committed for g in instance.dgs], dtype=float)

    # u[t] - u[t-1] = v[t] - w[t]; t=0 against the initial status.
    _rows(builder, [u[:, 0], v[:, 0], w[:, 0]], [1.0, -1.0, 1.0], milp.EQ, u0)
    if t_total > 1:
        m = gcount * (t_total - 1)
        _rows(
            builder,
            [u[:, 1:], u[:, :-1], v[:, 1:], w[:, 1:]],
            [np.ones(m), -np.ones(m), -np.ones(m), np.ones(m)],
            milp.EQ,
            np.zeros(m),
        )

    for gi, g in enumerate(instance.dgs):
        t_up = g.min_up * kk
        t_dn = g.min_down * kk
        for t in range(t_up - 1, t_total):
            win = v[gi, t - t_up + 1 : t + 1]
            builder.add_constr(
                np.append(win, u[gi, t]), np.append(np.ones(win.size), -1.0),
                milp.LE, 0.0)
        for t in range(t_dn - 1, t_total):
            win = w[gi, t - t_dn + 1 : t + 1]
            builder.add_constr(
                np.append(win, u[gi, t]), np.append(np.ones(win.size), 1.0),
                milp.LE, 1.0)
        lock_on = min(g.init_committed * (g.min_up - g.init_hours_on) * kk, t_total)
        if lock_on > 0:
            builder.add_constr(w[gi, :lock_on], np.ones(lock_on), milp.EQ, 0.0)
        lock_off = min((1 - g.init_committed) * (g.min_down - g.init_hours_off) * kk,
                       t_total)
        if lock_off > 0:
            builder.add_constr(v[gi, :lock_off], np.ones(lock_off), milp.EQ, 0.0)


def build_suc(instance, isf, scenarios, hour_blocking=True, verbatim_ramp_down=False):
    """Assemble the extensive-form MILP over the sampled realizations."""
    if scenarios.purpose_tag != IN_SAMPLE:
        raise DimensionMismatch("stochastic commitment expects in-sample scenarios")
    grid = instance.time_grid
    t_total = grid.total_subperiods
    kk = grid.subperiods_per_hour
    gcount, ncount = instance.n_dgs, instance.n_nodes
    xi = scenarios.realizations
    if xi.shape[1:] != (ncount, t_total):
        raise DimensionMismatch(
            f"scenario array {xi.shape} does not match instance ({ncount}, {t_total})")
    icount = xi.shape[0]

    b = milp.ModelBuilder()
    seg_costs, seg_widths = _padded_segments(instance)
    scount = seg_costs.shape[1]

    u = b.add_vars(gcount * t_total, 0.0, 1.0, integer=True).reshape(gcount, t_total)
    v = b.add_vars(gcount * t_total, 0.0, 1.0, integer=True).reshape(gcount, t_total)
    w = b.add_vars(gcount * t_total, 0.0, 1.0, integer=True).reshape(gcount, t_total)

    add_commitment_logic(b, instance, u, v, w)

    if hour_blocking:
        # Commitment constant across each hour's subperiods.
        for h in range(grid.hours_count):
            anchor = u[:, (h + 1) * kk - 1]
            for t in range(h * kk, (h + 1) * kk - 1):
                m = gcount
                _rows(b, [u[:, t], anchor], [np.ones(m), -np.ones(m)], milp.EQ,
                      np.zeros(m))

    p_min = np.array([g.p_min for g in instance.dgs])
    p_span = np.array([g.p_max - g.p_min for g in instance.dgs])
    ru = np.array([g.ramp_up for g in instance.dgs]) / kk
    rd = np.array([g.ramp_down for g in instance.dgs]) / kk
    su = np.array([g.startup_rate for g in instance.dgs])
    sd = np.array([g.shutdown_rate for g in instance.dgs])
    u0 = np.array([float(g.init_committed) for g in instance.dgs])
    p0 = np.array([g.init_power_above_min for g in instance.dgs])
    if verbatim_ramp_down:
        cw = su - ru - p_min
    else:
        cw = sd - rd - p_min

    node_of = np.array([instance.node_index(g.node) for g in instance.dgs])
    monitored = active_line_indices(isf, instance, xi)
    psi = isf.psi[monitored]  # (L', N)
    lcount = psi.shape[0]
    fmax = np.array([ln.flow_max for ln in instance.lines])[monitored]
    fmin = np.array([ln.flow_min for ln in instance.lines])[monitored]
    psi_g = psi[:, node_of] if lcount else np.zeros((0, gcount))

    p_idx = np.empty((icount, gcount, t_total), dtype=np.int64)
    ps_idx = np.empty((icount, gcount, scount, t_total), dtype=np.int64)
    pc_idx = np.empty((icount, ncount, t_total), dtype=np.int64)

    for i in range(icount):
        p = b.add_vars(gcount * t_total).reshape(gcount, t_total)
        ps = b.add_vars(
            gcount * scount * t_total,
            ub=np.repeat(seg_widths.ravel(), t_total),
        ).reshape(gcount, scount, t_total)
        pc_ub = np.maximum(0.0, xi[i]).ravel()  # curtailment cannot exceed load
        pc = b.add_vars(ncount * t_total, ub=pc_ub).reshape(ncount, t_total)
        p_idx[i], ps_idx[i], pc_idx[i] = p, ps, pc

        # Capacity above minimum, gated by commitment.
        m = gcount * t_total
        _rows(b, [p, u], [np.ones(m), np.repeat(-p_span, t_total)], milp.LE,
              np.zeros(m))

        # Ramping, subperiod granularity; startup/shutdown rates at events.
        _rows(b, [p[:, 0], v[:, 0]], [np.ones(gcount), -(su - p_min)], milp.LE,
              p0 + ru * u0)
        _rows(b, [p[:, 0], w[:, 0]], [np.ones(gcount), cw], milp.GE,
              p0 - rd * u0)
        m = gcount * (t_total - 1)
        _rows(
            b,
            [p[:, 1:], p[:, :-1], u[:, :-1], v[:, 1:]],
            [np.ones(m), -np.ones(m), np.repeat(-ru, t_total - 1),
             np.repeat(-(su - p_min), t_total - 1)],
            milp.LE, np.zeros(m))
        _rows(
            b,
            [p[:, 1:], p[:, :-1], u[:, :-1], w[:, 1:]],
            [np.ones(m), -np.ones(m), np.repeat(rd, t_total - 1),
             np.repeat(cw, t_total - 1)],
            milp.GE, np.zeros(m))

        # Segment linking; segment caps live on the variable bounds.
        m = gcount * t_total
        _rows(b, [p] + [ps[:, s, :] for s in range(scount)],
              [np.ones(m)] + [-np.ones(m)] * scount, milp.EQ, np.zeros(m))

        # System balance: total generation plus curtailment meets net load.
        _rows(
            b,
            [p.T, u.T, pc.T],
            [1.0, np.tile(p_min, (t_total, 1)), 1.0],
            milp.EQ, xi[i].sum(axis=0))

        # Line flows through shift factors, both directions.
        if lcount:
            flow_off = psi @ xi[i]  # (L, T) contribution of withdrawals
            for sense, lim in ((milp.LE, fmax), (milp.GE, fmin)):
                m = lcount * t_total
                _rows(
                    b,
                    [np.broadcast_to(p, (lcount, gcount, t_total)).transpose(0, 2, 1),
                     np.broadcast_to(u, (lcount, gcount, t_total)).transpose(0, 2, 1),
                     np.broadcast_to(pc, (lcount, ncount, t_total)).transpose(0, 2, 1)],
                    [np.repeat(psi_g, t_total, axis=0).reshape(lcount, t_total, gcount),
                     np.repeat(psi_g * p_min, t_total, axis=0).reshape(lcount, t_total, gcount),
                     np.repeat(psi, t_total, axis=0).reshape(lcount, t_total, ncount)],
                    sense,
                    (lim[:, None] + flow_off).ravel())

        # Stage-2 costs, averaged over scenarios and duration weighted.
        b.add_objective_terms(ps, np.repeat(seg_costs.ravel(), t_total) / (icount * kk))
        b.add_objective_terms(
            pc, np.full(pc.size, instance.curtailment_penalty / (icount * kk)))

    # First-stage commitment and startup costs.
    alpha_u = np.array([g.no_load_cost for g in instance.dgs])
    alpha_v = np.array([g.startup_cost for g in instance.dgs])
    b.add_objective_terms(u, np.repeat(alpha_u / kk, t_total))
    b.add_objective_terms(v, np.repeat(alpha_v, t_total))

    return SucModel(
        builder=b, instance=instance, scenarios=scenarios,
        u_idx=u, v_idx=v, w_idx=w,
        p_idx=p_idx, ps_idx=ps_idx, pc_idx=pc_idx,
        seg_costs=seg_costs, seg_widths=seg_widths,
    )


def solve_suc(model, gap=milp.DEFAULT_GAP, time_limit=None):
    """Solve the extensive form and unpack the solution arrays."""
    sol = milp.solve(model.builder, gap=gap, time_limit=time_limit)
    if not sol.optimal:
        raise InfeasibleSuc(f"stochastic commitment solve ended {sol.status}")
    inst = model.instance
    kk = inst.time_grid.subperiods_per_hour
    x = sol.x
    u = np.round(x[model.u_idx]).astype(int)
    v = np.round(x[model.v_idx]).astype(int)
    w = np.round(x[model.w_idx]).astype(int)
    p = x[model.p_idx]
    ps = x[model.ps_idx]
    pc = x[model.pc_idx]

    alpha_u = np.array([g.no_load_cost for g in inst.dgs])
    alpha_v = np.array([g.startup_cost for g in inst.dgs])
    first_stage = float((alpha_u / kk) @ u.sum(axis=1) + alpha_v @ v.sum(axis=1))
    stage2 = (
        np.einsum("igst,gs->i", ps, model.seg_costs)
        + inst.curtailment_penalty * pc.sum(axis=(1, 2))
    ) / kk
    expected = first_stage + stage2.mean()
    return SucSolution(
        u=u, v=v, w=w, p=p, ps=ps, pc=pc,
        expected_total_cost=float(expected),
        first_stage_cost=first_stage,
        per_scenario_stage2_cost=stage2,
    )
