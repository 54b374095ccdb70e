"""DC power flow linearization via injection shift factors.

The shift factor psi[l, n] is the MW flow induced on line l by injecting
1 MW at node n and withdrawing it at the reference node, under the usual
DC assumptions (unit voltage magnitudes, small angles, lossless lines).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BALANCE_TOL_MW = 1e-6


class SingularNetworkError(Exception):
    """Reduced susceptance matrix is singular (disconnected graph)."""


class UnbalancedInjectionError(Exception):
    """Injection vector does not sum to zero."""


@dataclass(frozen=True, eq=False)
class IsfMatrix:
    psi: np.ndarray  # (n_lines, n_nodes); reference column is all zeros
    reference_node: str
    nodes: tuple
    line_ids: tuple


def compute_isf(instance):
    """Dense shift-factor matrix for the instance's network.

    Builds the nodal susceptance matrix B, removes the reference row and
    column, factorizes, and maps the angle sensitivities through the line
    susceptances.  Dense linear algebra is deliberate: the target systems
    have at most a few hundred nodes.
    """
    nodes = instance.nodes
    n = len(nodes)
    lines = instance.lines
    idx = {name: i for i, name in enumerate(nodes)}
    ref = idx[instance.reference_node]

    if not lines:
        psi = np.zeros((0, n))
        return IsfMatrix(psi=psi, reference_node=instance.reference_node,
                         nodes=nodes, line_ids=())

    b = np.array([1.0 / ln.reactance for ln in lines])
    frm = np.array([idx[ln.from_node] for ln in lines])
    to = np.array([idx[ln.to_node] for ln in lines])

    bmat = np.zeros((n, n))
    np.add.at(bmat, (frm, frm), b)
    np.add.at(bmat, (to, to), b)
    np.add.at(bmat, (frm, to), -b)
    np.add.at(bmat, (to, frm), -b)

    keep = [i for i in range(n) if i != ref]
    b_red = bmat[np.ix_(keep, keep)]
    # Bf[l, i]: flow on l per unit angle, oriented from -> to.
    bf = np.zeros((len(lines), n))
    bf[np.arange(len(lines)), frm] += b
    bf[np.arange(len(lines)), to] -= b
    try:
        theta_sens = np.linalg.solve(b_red, np.eye(len(keep)))
    except np.linalg.LinAlgError:
        raise SingularNetworkError("reduced susceptance matrix is singular") from None
    if np.linalg.cond(b_red) > 1e12:
        raise SingularNetworkError("network is effectively disconnected")

    psi = np.zeros((len(lines), n))
    psi[:, keep] = bf[:, keep] @ theta_sens
    return IsfMatrix(
        psi=psi,
        reference_node=instance.reference_node,
        nodes=nodes,
        line_ids=tuple(ln.id for ln in lines),
    )


def active_line_indices(isf, instance, net_load, margin=1e-6):
    """Indices of lines whose flow limits could conceivably bind.

    Screens each line against a conservative interval bound on its flow:
    every generator's total output ranges over [0, p_max] at its node,
    nodal curtailment over [0, max(net_load, 0)], and withdrawals take the
    given net-load values.  A line whose bound stays strictly inside
    [flow_min, flow_max] can never have a binding (or dual-carrying)
    constraint, so the market models skip its rows; on uncongested systems
    this removes the bulk of the constraint matrix without changing any
    solution or price.

    ``net_load`` is an array whose last two axes are (nodes, periods);
    leading axes (e.g. scenarios) are allowed.
    """
    psi = isf.psi
    lcount = psi.shape[0]
    if lcount == 0:
        return np.zeros(0, dtype=np.int64)
    load = np.asarray(net_load, dtype=float)
    flat = load.reshape(-1, load.shape[-2], load.shape[-1])
    node_of = [instance.node_index(g.node) for g in instance.dgs]
    p_max = np.array([g.p_max for g in instance.dgs])
    pc_max = np.maximum(flat, 0.0).max(axis=(0, 2))
    psi_g = psi[:, node_of] if node_of else np.zeros((lcount, 0))
    hi = np.clip(psi_g, 0.0, None) @ p_max + np.clip(psi, 0.0, None) @ pc_max
    lo = np.clip(psi_g, None, 0.0) @ p_max + np.clip(psi, None, 0.0) @ pc_max
    off = np.einsum("ln,int->lit", psi, flat)
    off_min = off.min(axis=(1, 2))
    off_max = off.max(axis=(1, 2))
    f_max = np.array([ln.flow_max for ln in instance.lines])
    f_min = np.array([ln.flow_min for ln in instance.lines])
    inactive = (hi - off_min <= f_max - margin) & (lo - off_max >= f_min + margin)
    return np.flatnonzero(~inactive)


def line_flows(isf, injections):
    """Line flows for a balanced nodal injection vector (MW)."""
    injections = np.asarray(injections, dtype=float)
    imbalance = injections.sum()
    if abs(imbalance) > BALANCE_TOL_MW:
        raise UnbalancedInjectionError(
            f"injections sum to {imbalance:.3e} MW, expected 0"
        )
    return isf.psi @ injections
