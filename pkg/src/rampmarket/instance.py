"""System instance data model, file ingestion, and validation.

An instance bundles the network topology, the dispatchable generator (DG)
fleet, the per-node mean net-load trajectory at subperiod granularity, and
the penalty prices.  Instances are read from a single self-describing JSON
document (see ``load_instance`` for the schema) and are treated as immutable
after validation, so one instance can be shared across concurrent solver
runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

SCHEMA_VERSION = 1

HOURS = 24


class ParseError(Exception):
    """Instance file is malformed (bad JSON or missing sections)."""


class ValidationError(Exception):
    """Instance parsed but violates a structural invariant."""


@dataclass(frozen=True)
class TimeGrid:
    """Horizon discretization: hourly periods split into K equal subperiods.

    The scheduling horizon is a day (24 hours); shorter horizons are
    allowed for desk-scale fixtures and exhaustive oracles.
    """

    subperiods_per_hour: int
    hours_count: int = HOURS

    def __post_init__(self):
        k = self.subperiods_per_hour
        if k < 1 or 60 % k != 0:
            raise ValidationError(f"subperiods_per_hour must divide 60, got {k}")
        if not 1 <= self.hours_count <= HOURS:
            raise ValidationError(f"hours_count must be in 1..24, got {self.hours_count}")

    @property
    def zeta_minutes(self):
        return 60 // self.subperiods_per_hour

    @property
    def total_subperiods(self):
        return self.hours_count * self.subperiods_per_hour

    def hour_of(self, k):
        """Hour (1-based) containing 1-based subperiod ``k``."""
        return (k - 1) // self.subperiods_per_hour + 1

    def subperiods_of(self, h):
        """1-based subperiod indices belonging to 1-based hour ``h``."""
        kk = self.subperiods_per_hour
        return range((h - 1) * kk + 1, h * kk + 1)


@dataclass(frozen=True)
class Dg:
    """Dispatchable generator with commitment, ramping, and cost data.

    ``segments`` is the convex piecewise-linear cost curve above minimum:
    ordered (cumulative_cap_upper_mw, marginal_cost) pairs, with the last
    cap equal to p_max and an implicit zeroth cap at p_min.  Power variables
    elsewhere are measured *above minimum*; running at minimum costs
    ``no_load_cost`` per hour.
    """

    id: str
    node: str
    p_max: float
    p_min: float
    segments: tuple  # ((cap_upper_mw, cost_per_mwh), ...)
    no_load_cost: float
    startup_cost: float
    ramp_up: float  # MW/h
    ramp_down: float  # MW/h
    startup_rate: float  # MW, cap on total output in the startup subperiod
    shutdown_rate: float  # MW, cap on total output before shutdown
    min_up: int  # hours
    min_down: int  # hours
    init_committed: int
    init_power_above_min: float
    init_hours_on: int
    init_hours_off: int

    def __post_init__(self):
        if self.p_min < 0 or self.p_max < self.p_min:
            raise ValidationError(f"dg {self.id}: need 0 <= p_min <= p_max")
        if not self.segments:
            raise ValidationError(f"dg {self.id}: at least one cost segment required")
        caps = [c for c, _ in self.segments]
        costs = [a for _, a in self.segments]
        prev = self.p_min
        for c in caps:
            if c <= prev:
                raise ValidationError(f"dg {self.id}: segment caps must increase from p_min")
            prev = c
        if abs(caps[-1] - self.p_max) > 1e-9:
            raise ValidationError(f"dg {self.id}: last segment cap must equal p_max")
        if any(b < a for a, b in zip(costs, costs[1:])):
            raise ValidationError(f"dg {self.id}: non-convex cost curve")
        if self.startup_rate < self.p_min or self.shutdown_rate < self.p_min:
            raise ValidationError(f"dg {self.id}: startup/shutdown rate below p_min")
        for name in ("no_load_cost", "startup_cost", "ramp_up", "ramp_down"):
            if getattr(self, name) < 0:
                raise ValidationError(f"dg {self.id}: {name} must be nonnegative")
        if self.min_up < 0 or self.min_down < 0:
            raise ValidationError(f"dg {self.id}: min up/down times must be nonnegative")
        if self.init_committed not in (0, 1):
            raise ValidationError(f"dg {self.id}: init_committed must be 0 or 1")
        if self.init_committed == 1 and self.init_hours_on < 1:
            raise ValidationError(f"dg {self.id}: online unit needs init_hours_on >= 1")
        if self.init_committed == 0 and self.init_hours_off < 1:
            raise ValidationError(f"dg {self.id}: offline unit needs init_hours_off >= 1")
        if self.init_committed == 0 and self.init_power_above_min != 0:
            raise ValidationError(f"dg {self.id}: offline unit cannot have initial power")

    @property
    def segment_widths(self):
        caps = np.array([self.p_min] + [c for c, _ in self.segments])
        return np.diff(caps)

    @property
    def segment_costs(self):
        return np.array([a for _, a in self.segments])


@dataclass(frozen=True)
class Line:
    id: str
    from_node: str
    to_node: str
    reactance: float
    flow_min: float
    flow_max: float

    def __post_init__(self):
        if self.reactance <= 0:
            raise ValidationError(f"line {self.id}: reactance must be positive")
        if not (self.flow_min <= 0 <= self.flow_max):
            raise ValidationError(f"line {self.id}: need flow_min <= 0 <= flow_max")


@dataclass(frozen=True, eq=False)
class SystemInstance:
    """Validated, immutable description of one study system."""

    time_grid: TimeGrid
    nodes: tuple
    lines: tuple
    dgs: tuple
    mean_net_load: np.ndarray  # (n_nodes, 24*K) MW, may be negative
    sigma_fraction: float
    curtailment_penalty: float  # alpha_c, $/MWh
    frp_shortfall_penalty: float  # alpha_r, $/MWh
    reference_node: str

    def __post_init__(self):
        names = list(self.nodes)
        if len(set(names)) != len(names):
            raise ValidationError("duplicate node ids")
        node_set = set(names)
        if self.reference_node not in node_set:
            raise ValidationError(f"reference node {self.reference_node!r} not a node")
        for ln in self.lines:
            if ln.from_node not in node_set or ln.to_node not in node_set:
                raise ValidationError(f"line {ln.id}: endpoint not a node")
        for g in self.dgs:
            if g.node not in node_set:
                raise ValidationError(f"dg {g.id}: node {g.node!r} not a node")
        if len({g.id for g in self.dgs}) != len(self.dgs):
            raise ValidationError("duplicate dg ids")
        if len(names) > 1 and not self._connected():
            raise ValidationError("network is not connected")
        t = self.time_grid.total_subperiods
        if self.mean_net_load.shape != (len(names), t):
            raise ValidationError(
                f"mean_net_load must be {len(names)}x{t}, got {self.mean_net_load.shape}"
            )
        if not np.all(np.isfinite(self.mean_net_load)):
            raise ValidationError("mean_net_load contains non-finite entries")
        if self.sigma_fraction < 0:
            raise ValidationError("sigma_fraction must be nonnegative")
        if self.frp_shortfall_penalty <= 0:
            raise ValidationError("frp_shortfall_penalty must be positive")
        max_cost = max((a for g in self.dgs for _, a in g.segments), default=0.0)
        if self.curtailment_penalty <= max_cost:
            raise ValidationError("curtailment_penalty must exceed every segment cost")

    def _connected(self):
        adj = {n: set() for n in self.nodes}
        for ln in self.lines:
            adj[ln.from_node].add(ln.to_node)
            adj[ln.to_node].add(ln.from_node)
        seen = {self.nodes[0]}
        stack = [self.nodes[0]]
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return len(seen) == len(self.nodes)

    def node_index(self, name):
        return self.nodes.index(name)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_dgs(self):
        return len(self.dgs)

    def dgs_at(self, node):
        return [g for g in self.dgs if g.node == node]


@dataclass(frozen=True, eq=False)
class HourlyBidDemand:
    """Bid-in hourly net demand per node, d_hat (n_nodes, 24) MW."""

    d_hat: np.ndarray

    @property
    def system_total(self):
        return self.d_hat.sum(axis=0)


def compute_hourly_bid_demand(instance):
    """Average each node's mean net load over the K subperiods of each hour."""
    k = instance.time_grid.subperiods_per_hour
    means = instance.mean_net_load
    hours = instance.time_grid.hours_count
    d_hat = means.reshape(instance.n_nodes, hours, k).mean(axis=2)
    return HourlyBidDemand(d_hat=d_hat)


def _require(mapping, key, where):
    if key not in mapping:
        raise ParseError(f"missing field {key!r} in {where}")
    return mapping[key]


def instance_from_dict(doc):
    """Build a validated SystemInstance from a parsed schema document."""
    if not isinstance(doc, dict):
        raise ParseError("instance document must be a JSON object")
    version = _require(doc, "schema_version", "document")
    if version != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {version}")
    grid_doc = _require(doc, "grid", "document")
    grid = TimeGrid(
        subperiods_per_hour=int(_require(grid_doc, "subperiods_per_hour", "grid")),
        hours_count=int(grid_doc.get("hours", HOURS)),
    )
    nodes = tuple(str(n) for n in _require(doc, "nodes", "document"))
    lines = tuple(
        Line(
            id=str(_require(ln, "id", "line")),
            from_node=str(_require(ln, "from", "line")),
            to_node=str(_require(ln, "to", "line")),
            reactance=float(_require(ln, "reactance", "line")),
            flow_min=float(_require(ln, "flow_min", "line")),
            flow_max=float(_require(ln, "flow_max", "line")),
        )
        for ln in doc.get("lines", [])
    )
    dgs = tuple(
        Dg(
            id=str(_require(g, "id", "dg")),
            node=str(_require(g, "node", "dg")),
            p_max=float(_require(g, "p_max", "dg")),
            p_min=float(_require(g, "p_min", "dg")),
            segments=tuple((float(c), float(a)) for c, a in _require(g, "segments", "dg")),
            no_load_cost=float(_require(g, "no_load_cost", "dg")),
            startup_cost=float(_require(g, "startup_cost", "dg")),
            ramp_up=float(_require(g, "ramp_up", "dg")),
            ramp_down=float(_require(g, "ramp_down", "dg")),
            startup_rate=float(_require(g, "startup_rate", "dg")),
            shutdown_rate=float(_require(g, "shutdown_rate", "dg")),
            min_up=int(_require(g, "min_up", "dg")),
            min_down=int(_require(g, "min_down", "dg")),
            init_committed=int(_require(g, "init_committed", "dg")),
            init_power_above_min=float(g.get("init_power_above_min", 0.0)),
            init_hours_on=int(g.get("init_hours_on", 0)),
            init_hours_off=int(g.get("init_hours_off", 0)),
        )
        for g in doc.get("dgs", [])
    )
    raw_load = _require(doc, "mean_net_load", "document")
    try:
        mean_net_load = np.array([raw_load[n] for n in nodes], dtype=float)
    except KeyError as exc:
        raise ParseError(f"mean_net_load missing node {exc.args[0]!r}") from None
    penalties = _require(doc, "penalties", "document")
    return SystemInstance(
        time_grid=grid,
        nodes=nodes,
        lines=lines,
        dgs=dgs,
        mean_net_load=mean_net_load,
        sigma_fraction=float(doc.get("sigma_fraction", 0.01)),
        curtailment_penalty=float(_require(penalties, "alpha_c", "penalties")),
        frp_shortfall_penalty=float(_require(penalties, "alpha_r", "penalties")),
        reference_node=str(doc.get("reference_node", nodes[0])),
    )


def load_instance(path):
    """Read and validate an instance file.

    Raises ParseError on malformed input and ValidationError naming the
    first violated invariant.
    """
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ParseError(f"instance file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"instance file is not valid JSON: {exc}") from None
    return instance_from_dict(doc)


def instance_to_dict(instance):
    """Serialize to the schema document form; round-trips with load."""
    return {
        "schema_version": SCHEMA_VERSION,
        "grid": {
            "subperiods_per_hour": instance.time_grid.subperiods_per_hour,
            "hours": instance.time_grid.hours_count,
        },
        "nodes": list(instance.nodes),
        "reference_node": instance.reference_node,
        "lines": [
            {
                "id": ln.id,
                "from": ln.from_node,
                "to": ln.to_node,
                "reactance": ln.reactance,
                "flow_min": ln.flow_min,
                "flow_max": ln.flow_max,
            }
            for ln in instance.lines
        ],
        "dgs": [
            {
                "id": g.id,
                "node": g.node,
                "p_max": g.p_max,
                "p_min": g.p_min,
                "segments": [list(s) for s in g.segments],
                "no_load_cost": g.no_load_cost,
                "startup_cost": g.startup_cost,
                "ramp_up": g.ramp_up,
                "ramp_down": g.ramp_down,
                "startup_rate": g.startup_rate,
                "shutdown_rate": g.shutdown_rate,
                "min_up": g.min_up,
                "min_down": g.min_down,
                "init_committed": g.init_committed,
                "init_power_above_min": g.init_power_above_min,
                "init_hours_on": g.init_hours_on,
                "init_hours_off": g.init_hours_off,
            }
            for g in instance.dgs
        ],
        "mean_net_load": {n: instance.mean_net_load[i].tolist() for i, n in enumerate(instance.nodes)},
        "sigma_fraction": instance.sigma_fraction,
        "penalties": {
            "alpha_c": instance.curtailment_penalty,
            "alpha_r": instance.frp_shortfall_penalty,
        },
    }


def save_instance(instance, path):
    with open(path, "w") as fh:
        json.dump(instance_to_dict(instance), fh, indent=1, sort_keys=True)
        fh.write("\n")
