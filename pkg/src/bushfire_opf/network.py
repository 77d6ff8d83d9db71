"""Power network embedded in the fire grid.

Buses sit on grid nodes; every transmission line follows a king-move path of
grid nodes between its two end buses.  A bus is functional when no fire lies
within ``d_bar`` of it, and a line is functional when none of its interior
path nodes burns.

Each line ``e = (a, b)`` carries one flow variable ``beta[e]``; a positive
value means power moves from ``a`` to ``b``.  ``incidence[e, i]`` is ``+1``
for the receiving end ``b`` and ``-1`` for ``a``, so the inflow into bus
``i`` is ``incidence[:, i] @ beta``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .fire import SpreadParams
from .grid import GridMap, NodeId, neighbor_table

GENERATOR = "generator"
CONSUMER = "consumer"
DEFAULT_DEGREE_CAP = 12


class NetworkError(ValueError):
    pass


@dataclass(frozen=True)
class Bus:
    id: int
    node: NodeId
    kind: str = CONSUMER
    load: float = 0.0
    capacity: float = 0.0
    cost: float = 0.0
    subkind: str = ""

    @property
    def is_generator(self) -> bool:
        return self.kind == GENERATOR


@dataclass(frozen=True)
class Line:
    a: int                      # bus index (position in PowerNetwork.buses)
    b: int
    reactance: float
    flow_cap: float
    path: tuple[NodeId, ...]    # includes both end nodes
    line_cost: float = 0.0

    @property
    def interior(self) -> tuple[NodeId, ...]:
        return self.path[1:-1]


@dataclass(eq=False)
class PowerNetwork:
    buses: list[Bus]
    lines: list[Line]
    d_bar: int
    degree_cap: int = DEFAULT_DEGREE_CAP
    incidence: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        nb = len(self.buses)
        if nb == 0:
            raise NetworkError("network has no buses")
        if self.d_bar < 0:
            raise NetworkError("d_bar must be nonnegative")
        for bus in self.buses:
            if bus.kind not in (GENERATOR, CONSUMER):
                raise NetworkError(f"bus {bus.id}: unknown kind {bus.kind!r}")
            if bus.kind == CONSUMER and bus.capacity != 0:
                raise NetworkError(f"bus {bus.id}: consumers cannot have generation capacity")
            if bus.load < 0 or bus.capacity < 0:
                raise NetworkError(f"bus {bus.id}: negative load or capacity")
        nodes = [b.node for b in self.buses]
        if len(set(nodes)) != nb:
            raise NetworkError("two buses share a grid node")
        bus_nodes = set(nodes)
        inc = np.zeros((len(self.lines), nb))
        for e, ln in enumerate(self.lines):
            if ln.a == ln.b or not (0 <= ln.a < nb and 0 <= ln.b < nb):
                raise NetworkError(f"line {e}: bad end buses")
            if ln.reactance <= 0:
                raise NetworkError(f"line {e}: reactance must be positive")
            if ln.flow_cap < 0:
                raise NetworkError(f"line {e}: negative flow cap")
            if ln.path[0] != self.buses[ln.a].node or ln.path[-1] != self.buses[ln.b].node:
                raise NetworkError(f"line {e}: path must start and end at its buses")
            for p, q in zip(ln.path, ln.path[1:]):
                if max(abs(p[0] - q[0]), abs(p[1] - q[1])) != 1:
                    raise NetworkError(f"line {e}: consecutive path nodes {p}, {q} are not adjacent")
            if bus_nodes & set(ln.interior):
                raise NetworkError(f"line {e}: path passes through a bus node")
            inc[e, ln.a] = -1.0
            inc[e, ln.b] = 1.0
        self.incidence = inc
        self._adj = [[] for _ in range(nb)]
        for e, ln in enumerate(self.lines):
            self._adj[ln.a].append(e)
            self._adj[ln.b].append(e)
        worst = max(len(a) for a in self._adj)
        if worst > self.degree_cap:
            raise NetworkError(
                f"a bus has {worst} incident lines; scenario enumeration needs 2^degree subsets. "
                f"Raise degree_cap (currently {self.degree_cap}) only if that is affordable."
            )

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def n_lines(self) -> int:
        return len(self.lines)

    @property
    def loads(self) -> np.ndarray:
        return np.array([b.load for b in self.buses])

    @property
    def capacities(self) -> np.ndarray:
        return np.array([b.capacity for b in self.buses])

    @property
    def costs(self) -> np.ndarray:
        return np.array([b.cost for b in self.buses])

    @property
    def flow_caps(self) -> np.ndarray:
        return np.array([ln.flow_cap for ln in self.lines])

    @property
    def reactances(self) -> np.ndarray:
        return np.array([ln.reactance for ln in self.lines])

    def incident_lines(self, i: int) -> list[int]:
        """Lines touching bus ``i`` in a fixed order; this order indexes scenario subsets."""
        return self._adj[i]

    def neighbor_bus(self, e: int, i: int) -> int:
        ln = self.lines[e]
        return ln.b if ln.a == i else ln.a

    def interior_count(self, i: int) -> int:
        """Number of distinct interior path nodes over all lines incident to ``i``."""
        nodes = set()
        for e in self._adj[i]:
            nodes.update(self.lines[e].interior)
        return len(nodes)

    def check_grid(self, g: GridMap) -> None:
        for b in self.buses:
            g.check(b.node)


def king_path(start: NodeId, end: NodeId, straight_first: bool = False) -> list[NodeId]:
    """A shortest king-move route: diagonal steps, then straight (or the reverse)."""
    x, y = start
    dx, dy = end[0] - x, end[1] - y
    diag = min(abs(dx), abs(dy))
    sx, sy = int(np.sign(dx)), int(np.sign(dy))
    steps = [(sx, sy)] * diag
    rest = abs(dx) - diag if abs(dx) > abs(dy) else abs(dy) - diag
    straight = [(sx, 0)] * rest if abs(dx) > abs(dy) else [(0, sy)] * rest
    steps = straight + steps if straight_first else steps + straight
    out = [start]
    for ox, oy in steps:
        x, y = x + ox, y + oy
        out.append((x, y))
    return out


def _auto_path(start: NodeId, end: NodeId, bus_nodes: set) -> list[NodeId]:
    for straight_first in (False, True):
        p = king_path(start, end, straight_first)
        if not bus_nodes & set(p[1:-1]):
            return p
    raise NetworkError(f"automatic route {start} -> {end} crosses a bus; give the path explicitly")


def load_network(path: str | Path, degree_cap: int = DEFAULT_DEGREE_CAP) -> PowerNetwork:
    """Read a JSON network file.

    ``buses``: records with ``id, x, y, kind, load, capacity, cost`` (and an
    optional ``subkind``).  ``lines``: records with ``from, to, reactance,
    flow_cap, line_cost`` and ``path``, either ``"auto"`` or a list of
    ``[x, y]`` pairs including both ends.
    """
    data = json.loads(Path(path).read_text())
    return network_from_dict(data, degree_cap)


def network_from_dict(data: dict, degree_cap: int = DEFAULT_DEGREE_CAP) -> PowerNetwork:
    try:
        buses = [
            Bus(int(r["id"]), (int(r["x"]), int(r["y"])), r.get("kind", CONSUMER), float(r.get("load", 0.0)),
                float(r.get("capacity", 0.0)), float(r.get("cost", 0.0)), r.get("subkind", ""))
            for r in data["buses"]
        ]
        pos = {b.id: k for k, b in enumerate(buses)}
        if len(pos) != len(buses):
            raise NetworkError("duplicate bus ids")
        bus_nodes = {b.node for b in buses}
        lines = []
        for r in data["lines"]:
            a, b = pos[int(r["from"])], pos[int(r["to"])]
            p = r.get("path", "auto")
            if p == "auto":
                p = _auto_path(buses[a].node, buses[b].node, bus_nodes)
            path = tuple((int(x), int(y)) for x, y in p)
            lines.append(Line(a, b, float(r["reactance"]), float(r["flow_cap"]), path, float(r.get("line_cost", 0.0))))
        return PowerNetwork(buses, lines, int(data["d_bar"]), degree_cap)
    except KeyError as exc:
        raise NetworkError(f"network file is missing field {exc}") from None


def network_to_dict(net: PowerNetwork) -> dict:
    return {
        "d_bar": net.d_bar,
        "buses": [dict(id=b.id, x=b.node[0], y=b.node[1], kind=b.kind, subkind=b.subkind, load=b.load,
                       capacity=b.capacity, cost=b.cost) for b in net.buses],
        "lines": [{"from": net.buses[ln.a].id, "to": net.buses[ln.b].id, "reactance": ln.reactance,
                   "flow_cap": ln.flow_cap, "line_cost": ln.line_cost, "path": [list(p) for p in ln.path]}
                  for ln in net.lines],
    }


# ---------------------------------------------------------------- failures

def functional_indicator(net: PowerNetwork, g: GridMap, burning: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(bus_ok, line_ok)``: buses need every fire farther than ``d_bar``; lines need unburnt interiors."""
    r = net.d_bar
    bus_ok = np.empty(net.n_buses, dtype=bool)
    for k, b in enumerate(net.buses):
        x, y = b.node
        win = burning[max(0, y - 1 - r):y + r, max(0, x - 1 - r):x + r]
        bus_ok[k] = not win.any()
    line_ok = np.array([not any(burning[y - 1, x - 1] for x, y in ln.interior) for ln in net.lines], dtype=bool)
    return bus_ok, line_ok


def realized_capacities(net: PowerNetwork, bus_ok, line_ok):
    """Loads, generation caps and flow caps that survive the failures."""
    return (np.where(bus_ok, net.loads, 0.0), np.where(bus_ok, net.capacities, 0.0),
            np.where(line_ok, net.flow_caps, 0.0))


# -------------------------------------------------------------------- PTDF

@dataclass(frozen=True)
class PTDF:
    matrix: np.ndarray   # (n_lines, n_buses)
    island: np.ndarray   # island label per bus, -1 for removed buses
    slack: tuple[int, ...]
    line_active: np.ndarray
    bus_active: np.ndarray

    def flows(self, injection) -> np.ndarray:
        return self.matrix @ np.asarray(injection, dtype=float)


def compute_ptdf(net: PowerNetwork, failed_lines=None, failed_buses=None) -> PTDF:
    """DC injection shift factors, one slack (lowest bus index) per connected island.

    Failed buses and every line touching them are removed first.  Entries
    linking a line to a bus in another island are zero.
    """
    nb, nl = net.n_buses, net.n_lines
    bus_on = np.ones(nb, dtype=bool) if failed_buses is None else ~np.asarray(failed_buses, dtype=bool)
    line_on = np.ones(nl, dtype=bool) if failed_lines is None else ~np.asarray(failed_lines, dtype=bool)
    ends = np.array([[ln.a, ln.b] for ln in net.lines], dtype=int).reshape(nl, 2)
    if nl:
        line_on &= bus_on[ends[:, 0]] & bus_on[ends[:, 1]]
    act = np.flatnonzero(line_on)
    adj = coo_matrix((np.ones(act.size), (ends[act, 0], ends[act, 1])), shape=(nb, nb))
    _, labels = connected_components(adj, directed=False)
    island = np.where(bus_on, labels, -1)

    susc = 1.0 / net.reactances if nl else np.zeros(0)
    Bfull = np.zeros((nb, nb))
    for e in act:
        a, b = ends[e]
        Bfull[a, a] += susc[e]
        Bfull[b, b] += susc[e]
        Bfull[a, b] -= susc[e]
        Bfull[b, a] -= susc[e]

    X = np.zeros((nb, nb))
    slacks = []
    for lab in sorted(set(island[bus_on].tolist())):
        members = np.flatnonzero(island == lab)
        slack = int(members[0])
        slacks.append(slack)
        rest = members[1:]
        if rest.size == 0:
            continue
        Br = Bfull[np.ix_(rest, rest)]
        try:
            X[np.ix_(rest, rest)] = np.linalg.inv(Br)
        except np.linalg.LinAlgError:
            raise NetworkError(f"singular susceptance matrix on island with slack bus {slack}") from None
    M = np.zeros((nl, nb))
    for e in act:
        a, b = ends[e]
        M[e] = (X[a] - X[b]) * susc[e]
        M[e, island != island[a]] = 0.0
    return PTDF(M, island, tuple(slacks), line_on, bus_on)


# ---------------------------------------------------- functional probability

@dataclass(frozen=True)
class FireExposure:
    """Parameter-free exponents of the functional probabilities given ``B_{t-1}``.

    For any per-area parameters,
    ``P_bus = prod_h (1 - p_plus[h]) ** bus_plus[:, h] * p_minus[h] ** bus_minus[:, h]``
    and likewise for lines.
    """

    bus_plus: np.ndarray
    bus_minus: np.ndarray
    line_plus: np.ndarray
    line_minus: np.ndarray
    bus_ok: np.ndarray      # functional indicator under B_{t-1}
    line_ok: np.ndarray

    def probabilities(self, params: SpreadParams) -> tuple[np.ndarray, np.ndarray]:
        lq = _safe_log(1.0 - params.p_plus)
        lm = _safe_log(params.p_minus)
        return (_combine(self.bus_plus, lq, self.bus_minus, lm),
                _combine(self.line_plus, lq, self.line_minus, lm))

    @property
    def key(self) -> bytes:
        """Hashable summary; equal keys give equal probabilities for every parameter set."""
        parts = (self.bus_plus, self.bus_minus, self.line_plus, self.line_minus, self.bus_ok, self.line_ok)
        return b"|".join(np.ascontiguousarray(p).tobytes() for p in parts)


def _safe_log(p):
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(p, dtype=float))


def _combine(E, lq, F, lm):
    # 0 * log(0) counts as 0: a factor raised to the power zero is one
    terms = np.where(E > 0, E * lq, 0.0).sum(axis=1) + np.where(F > 0, F * lm, 0.0).sum(axis=1)
    return np.exp(terms)


class ExposureModel:
    """Precomputes grid lookups for one network so exposures are cheap per step."""

    def __init__(self, net: PowerNetwork, g: GridMap, include_center: bool = False):
        net.check_grid(g)
        self.net = net
        self.g = g
        self.include_center = include_center
        self.pad = net.d_bar + 1
        area_flat = g.area_of.ravel()
        self.n_areas = g.n_areas

        # bus balls
        r = net.d_bar
        offs = [(dx, dy) for dy in range(-r, r + 1) for dx in range(-r, r + 1)
                if include_center or (dx, dy) != (0, 0)]
        self._ball_offsets = np.array(offs, dtype=int).reshape(-1, 2)
        self._bus_xy = np.array([b.node for b in net.buses], dtype=int).reshape(-1, 2)
        self._king = np.array([(dx, dy) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dx, dy) != (0, 0)])
        # area of ball nodes, -1 off-grid
        P = self.pad
        self._area_pad = np.full((g.height + 2 * P, g.width + 2 * P), -1, dtype=np.int32)
        self._area_pad[P:-P, P:-P] = g.area_of
        bx = self._bus_xy[:, 0][:, None] + self._ball_offsets[None, :, 0]  # (nb, K)
        by = self._bus_xy[:, 1][:, None] + self._ball_offsets[None, :, 1]
        self._ball_y = by - 1 + P
        self._ball_x = bx - 1 + P
        self._ball_area = self._area_pad[self._ball_y, self._ball_x]
        self._nbr_y = self._ball_y[:, :, None] + self._king[None, None, :, 1]
        self._nbr_x = self._ball_x[:, :, None] + self._king[None, None, :, 0]
        self._nbr_area = self._area_pad[self._nbr_y, self._nbr_x]

        # line interiors
        flat, owner = [], []
        for e, ln in enumerate(net.lines):
            for nd in dict.fromkeys(ln.interior):
                flat.append(g.index(nd))
                owner.append(e)
        self._int_flat = np.array(flat, dtype=np.int64)
        self._int_owner = np.array(owner, dtype=np.int64)
        self._int_area = area_flat[self._int_flat] if flat else np.zeros(0, np.int64)
        self._int_nbrs = neighbor_table(g, self._int_flat) if flat else np.zeros((0, 8), np.int64)

    def exposure(self, burning: np.ndarray) -> FireExposure:
        net, H = self.net, self.n_areas
        nb, nl = net.n_buses, net.n_lines
        P = self.pad
        bpad = np.zeros(self._area_pad.shape, dtype=bool)
        bpad[P:-P, P:-P] = burning

        lit = bpad[self._ball_y, self._ball_x]                  # (nb, K)
        valid = self._ball_area >= 0
        nbr_lit = bpad[self._nbr_y, self._nbr_x]                # (nb, K, 8)
        same = (nbr_lit & (self._nbr_area == self._ball_area[:, :, None])).sum(axis=2)
        bus_plus = np.zeros((nb, H))
        bus_minus = np.zeros((nb, H))
        rows = np.repeat(np.arange(nb), lit.shape[1]).reshape(lit.shape)
        sel = valid & ~lit
        np.add.at(bus_plus, (rows[sel], self._ball_area[sel]), same[sel])
        sel = valid & lit
        np.add.at(bus_minus, (rows[sel], self._ball_area[sel]), 1.0)

        line_plus = np.zeros((nl, H))
        line_minus = np.zeros((nl, H))
        if self._int_flat.size:
            flat_b = burning.ravel()
            on = flat_b[self._int_flat]
            nbrs = self._int_nbrs
            m = np.where(nbrs >= 0, flat_b[np.maximum(nbrs, 0)], False).sum(axis=1)
            np.add.at(line_plus, (self._int_owner[~on], self._int_area[~on]), m[~on])
            np.add.at(line_minus, (self._int_owner[on], self._int_area[on]), 1.0)

        bus_ok, line_ok = functional_indicator(net, self.g, burning)
        return FireExposure(bus_plus, bus_minus, line_plus, line_minus, bus_ok, line_ok)


def functional_probability_bus(net: PowerNetwork, g: GridMap, burning: np.ndarray, params: SpreadParams,
                               include_center: bool = False) -> np.ndarray:
    """One-step probability that each bus is functional, given the current fire.

    Every non-burning node within ``d_bar`` must escape ignition from its
    burning neighbours in the same area, and every burning node within
    ``d_bar`` must be extinguished.  The bus's own node is left out unless
    ``include_center`` is set.
    """
    return ExposureModel(net, g, include_center).exposure(burning).probabilities(params)[0]


def functional_probability_line(net: PowerNetwork, g: GridMap, burning: np.ndarray,
                                params: SpreadParams) -> np.ndarray:
    """One-step probability that every interior node of each line stays unburnt."""
    return ExposureModel(net, g).exposure(burning).probabilities(params)[1]


# ------------------------------------------------------------------ scenarios

def subset_bits(k: int) -> np.ndarray:
    """``(2^k, k)`` boolean table; row ``s`` marks the members of subset ``s`` (bit ``j`` = element ``j``)."""
    s = np.arange(2 ** k)
    return ((s[:, None] >> np.arange(k)[None, :]) & 1).astype(bool)


def scenario_weights(net: PowerNetwork, p_line: np.ndarray, i: int) -> np.ndarray:
    """Probability of every subset of bus ``i``'s incident lines being the functional set.

    Subset ``s`` contains the ``j``-th incident line iff bit ``j`` of ``s`` is set.
    """
    lines = net.incident_lines(i)
    k = len(lines)
    if k > net.degree_cap:
        raise NetworkError(f"bus {i} has {k} incident lines, above the cap of {net.degree_cap}")
    p = np.asarray(p_line, dtype=float)[lines]
    bits = subset_bits(k)
    return np.prod(np.where(bits, p[None, :], 1.0 - p[None, :]), axis=1)


def all_scenario_weights(net: PowerNetwork, p_line: np.ndarray) -> list[np.ndarray]:
    return [scenario_weights(net, p_line, i) for i in range(net.n_buses)]


# ------------------------------------------------------------------ constants

def lipschitz_constants(net: PowerNetwork, shed_cost: float) -> tuple[float, float]:
    """Lipschitz constants ``(K_plus, K_minus)`` of the expected cost in the spread/containment estimates."""
    ball = (2 * net.d_bar + 1) ** 2
    kp = km = 0.0
    for i, bus in enumerate(net.buses):
        lines = net.incident_lines(i)
        n_sub = 2 ** len(lines)
        delta = net.interior_count(i)
        scale = bus.capacity + bus.load + sum(net.lines[e].flow_cap for e in lines)
        kp += (n_sub + 3) * (delta + 2 * ball) * scale
        km += n_sub * (ball + delta) * scale
    return 2 * shed_cost * kp, 2 * shed_cost * km


def enumerate_scenarios(k: int):
    """Iterate over subsets of ``range(k)`` in the same order as :func:`subset_bits`."""
    for s in range(2 ** k):
        yield tuple(j for j in range(k) if s >> j & 1)

