"""Rolling real-time dispatch against a fixed day-ahead commitment.

Twenty-four sequential dispatch LPs per realization: each run starts at
the top of an hour, sees a two-hour window of eight 15-minute subperiods
with the realized net load (perfect short-horizon foresight), and only
its first four subperiods are binding.  Commitments are frozen to the
day-ahead schedule; the window past hour 24 reuses hour 24's commitment
and repeats the final realized hour.  Nodal prices come from the duals of
the demand-fixing equalities of each pure LP.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import milp
from .network import active_line_indices
from .suc import _padded_segments, _rows

K_FMM = 4
WINDOW = 8
BINDING = 4


class DimensionMismatch(Exception):
    pass


class InfeasibleFmm(Exception):
    """Dispatch LP infeasible despite curtailment slack; bug signal."""


@dataclass(eq=False)
class FmmRun:
    start_hour: int  # 1-based
    commitment: np.ndarray  # (G, 8)
    dispatch: np.ndarray  # (G, 8) total MW incl. minimum-load output
    p_above: np.ndarray  # (G, 8)
    curtailment: np.ndarray  # (N, 8)
    lmp: np.ndarray  # (N, 8) $/MWh
    objective: float
    binding_subperiods: int = BINDING
    horizon_subperiods: int = WINDOW


@dataclass(eq=False)
class FmmTrace:
    realization_id: int
    runs: list
    dispatch: np.ndarray  # (G, 96) binding total MW
    p_above: np.ndarray  # (G, 96)
    curtailment: np.ndarray  # (N, 96) binding MW
    lmp: np.ndarray  # (N, 96) binding $/MWh
    commitment: np.ndarray  # (G, 96)


def _subperiod_commitment(dam):
    """Expand hourly commitments to subperiods, padding one advisory hour."""
    gcount, hcount = dam.u.shape
    horizon = (hcount + 1) * K_FMM
    hours = np.minimum(np.arange(horizon) // K_FMM, hcount - 1)
    u = dam.u[:, hours].astype(float)
    v = np.zeros((gcount, horizon))
    w = np.zeros((gcount, horizon))
    # Startup/shutdown events land on the first subperiod of their hour.
    for h in range(hcount):
        v[:, h * K_FMM] = dam.v[:, h]
        w[:, h * K_FMM] = dam.w[:, h]
    return u, v, w


def run_fmm_sequence(instance, isf, dam, realization, realization_id=0,
                     verbatim_ramp_down=False):
    """Execute the 24 rolling dispatch runs for one realized trajectory."""
    ncount, gcount = instance.n_nodes, instance.n_dgs
    hcount = instance.time_grid.hours_count
    t_total = hcount * K_FMM
    realization = np.asarray(realization, dtype=float)
    if realization.shape != (ncount, t_total):
        raise DimensionMismatch(
            f"realization must be ({ncount}, {t_total}), got {realization.shape}")

    # Pad the advisory hour past the horizon with the last realized hour.
    xi = np.concatenate([realization, realization[:, -K_FMM:]], axis=1)
    u_sub, v_sub, w_sub = _subperiod_commitment(dam)

    seg_costs, seg_widths = _padded_segments(instance)
    scount = seg_costs.shape[1]
    p_min = np.array([g.p_min for g in instance.dgs])
    p_span = np.array([g.p_max - g.p_min for g in instance.dgs])
    ru = np.array([g.ramp_up for g in instance.dgs]) / K_FMM
    rd = np.array([g.ramp_down for g in instance.dgs]) / K_FMM
    su = np.array([g.startup_rate for g in instance.dgs])
    sd = np.array([g.shutdown_rate for g in instance.dgs])
    cw = (su - ru - p_min) if verbatim_ramp_down else (sd - rd - p_min)
    node_of = np.array([instance.node_index(g.node) for g in instance.dgs])
    monitored = active_line_indices(isf, instance, xi)
    psi = isf.psi[monitored]
    lcount = psi.shape[0]
    psi_g = psi[:, node_of] if lcount else None
    fmax = np.array([ln.flow_max for ln in instance.lines])[monitored]
    fmin = np.array([ln.flow_min for ln in instance.lines])[monitored]
    duration = 1.0 / K_FMM

    p_prev = np.array([g.init_power_above_min for g in instance.dgs])
    u_prev = np.array([float(g.init_committed) for g in instance.dgs])

    runs = []
    bind_p = np.zeros((gcount, t_total))
    bind_c = np.zeros((ncount, t_total))
    bind_lmp = np.zeros((ncount, t_total))

    for h0 in range(hcount):
        k0 = h0 * K_FMM
        sl = slice(k0, k0 + WINDOW)
        uw, vw, ww = u_sub[:, sl], v_sub[:, sl], w_sub[:, sl]
        xw = xi[:, sl]

        b = milp.ModelBuilder()
        p_ub = p_span[:, None] * uw
        # First-subperiod ramp limits fold into the bounds of p[:, 0].
        up0 = p_prev + ru * u_prev + (su - p_min) * vw[:, 0]
        lo0 = p_prev - rd * u_prev - cw * ww[:, 0]
        p_lb = np.zeros((gcount, WINDOW))
        p_ub = p_ub.copy()
        p_ub[:, 0] = np.minimum(p_ub[:, 0], up0)
        p_lb[:, 0] = np.maximum(0.0, lo0)
        p = b.add_vars(gcount * WINDOW, lb=p_lb.ravel(), ub=p_ub.ravel()
                       ).reshape(gcount, WINDOW)
        ps = b.add_vars(gcount * scount * WINDOW,
                        ub=np.repeat(seg_widths.ravel(), WINDOW)
                        ).reshape(gcount, scount, WINDOW)
        pc = b.add_vars(ncount * WINDOW, ub=np.maximum(0.0, xw).ravel()
                        ).reshape(ncount, WINDOW)
        d = b.add_vars(ncount * WINDOW, lb=-np.inf).reshape(ncount, WINDOW)

        m = gcount * (WINDOW - 1)
        _rows(b, [p[:, 1:], p[:, :-1]], [1.0, -1.0], milp.LE,
              (ru[:, None] * uw[:, :-1] + (su - p_min)[:, None] * vw[:, 1:]).ravel())
        _rows(b, [p[:, 1:], p[:, :-1]], [1.0, -1.0], milp.GE,
              (-rd[:, None] * uw[:, :-1] - cw[:, None] * ww[:, 1:]).ravel())
        m = gcount * WINDOW
        _rows(b, [p] + [ps[:, s, :] for s in range(scount)],
              [1.0] + [-1.0] * scount, milp.EQ, np.zeros(m))
        _rows(b, [p.T, pc.T, d.T], [1.0, 1.0, -1.0], milp.EQ,
              -(p_min[:, None] * uw).sum(axis=0))
        lmp_handles = _rows(b, [d], [1.0], milp.EQ, xw.ravel()).reshape(ncount, WINDOW)
        if lcount:
            fixed = psi_g @ (p_min[:, None] * uw)  # (L, 8) committed-minimum flows
            for sense, lim in ((milp.LE, fmax), (milp.GE, fmin)):
                _rows(
                    b,
                    [np.broadcast_to(p, (lcount, gcount, WINDOW)).transpose(0, 2, 1),
                     np.broadcast_to(pc, (lcount, ncount, WINDOW)).transpose(0, 2, 1),
                     np.broadcast_to(d, (lcount, ncount, WINDOW)).transpose(0, 2, 1)],
                    [np.repeat(psi_g, WINDOW, axis=0).reshape(lcount, WINDOW, gcount),
                     np.repeat(psi, WINDOW, axis=0).reshape(lcount, WINDOW, ncount),
                     np.repeat(-psi, WINDOW, axis=0).reshape(lcount, WINDOW, ncount)],
                    sense, (lim[:, None] - fixed).ravel())

        b.add_objective_terms(ps, duration * np.repeat(seg_costs.ravel(), WINDOW))
        b.add_objective_terms(
            pc, np.full(pc.size, duration * instance.curtailment_penalty))

        try:
            sol, duals = milp.solve_lp(b, lmp_handles.ravel())
        except milp.RelaxationInfeasible as exc:
            raise InfeasibleFmm(
                f"dispatch LP for hour {h0 + 1} failed: {exc}") from exc

        x = sol.x
        p_val = x[p]
        pc_val = x[pc]
        lmp = np.array([[duals[int(hh)] for hh in row] for row in lmp_handles])
        lmp /= duration  # duals are $ per MW-subperiod; report $/MWh
        dispatch = p_val + p_min[:, None] * uw

        runs.append(FmmRun(
            start_hour=h0 + 1, commitment=uw.copy(), dispatch=dispatch,
            p_above=p_val, curtailment=pc_val, lmp=lmp,
            objective=sol.objective_value,
        ))
        bind = slice(k0, k0 + BINDING)
        bind_p[:, bind] = p_val[:, :BINDING]
        bind_c[:, bind] = pc_val[:, :BINDING]
        bind_lmp[:, bind] = lmp[:, :BINDING]

        p_prev = p_val[:, BINDING - 1]
        u_prev = uw[:, BINDING - 1]

    commitment = u_sub[:, :t_total]
    return FmmTrace(
        realization_id=realization_id,
        runs=runs,
        dispatch=bind_p + p_min[:, None] * commitment,
        p_above=bind_p,
        curtailment=bind_c,
        lmp=bind_lmp,
        commitment=commitment,
    )
