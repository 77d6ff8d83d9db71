"""Static and stochastic DC optimal power flow, and cost evaluation.

The stochastic problem plans ``(alpha, beta)`` one period ahead.  For every
bus ``i`` and every subset ``s`` of its incident lines (the lines that stay
up), an auxiliary ``H[i, s] >= max(L_i - alpha_i - inflow_i(s), 0)`` carries
the load that would be shed, weighted by the probability that the bus works
and exactly the lines in ``s`` work.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .lp import LinearProgram, LpSolution, SimplexSolver, solve_highs
from .network import PTDF, PowerNetwork, compute_ptdf, subset_bits

log = logging.getLogger(__name__)


class InfeasibleError(RuntimeError):
    pass


@dataclass(frozen=True)
class Strategy:
    alpha: np.ndarray   # generation per bus
    beta: np.ndarray    # flow per line, positive from its first bus to its second

    def inflow(self, net: PowerNetwork) -> np.ndarray:
        return net.incidence.T @ self.beta

    def flow(self, net: PowerNetwork, j: int, i: int) -> float:
        """Directed flow from bus ``j`` to bus ``i`` (antisymmetric)."""
        for e in net.incident_lines(i):
            ln = net.lines[e]
            if {ln.a, ln.b} == {i, j}:
                return float(self.beta[e]) if ln.a == j else -float(self.beta[e])
        raise KeyError(f"no line between buses {j} and {i}")

    def generation_cost(self, net: PowerNetwork) -> float:
        return float(net.costs @ self.alpha)


@dataclass(frozen=True)
class ScenarioLayout:
    """Column offsets of the shedding auxiliaries, one block of ``2^deg`` per bus."""

    offsets: np.ndarray
    bits: list[np.ndarray]
    lines: list[list[int]]

    @classmethod
    def of(cls, net: PowerNetwork) -> "ScenarioLayout":
        lines = [list(net.incident_lines(i)) for i in range(net.n_buses)]
        bits = [subset_bits(len(ls)) for ls in lines]
        sizes = [b.shape[0] for b in bits]
        return cls(np.concatenate([[0], np.cumsum(sizes)]).astype(int), bits, lines)

    @property
    def size(self) -> int:
        return int(self.offsets[-1])


def scenario_inflow(net: PowerNetwork, layout: ScenarioLayout, beta: np.ndarray) -> list[np.ndarray]:
    """For every bus, inflow through each line subset (rows follow the subset order)."""
    out = []
    for i in range(net.n_buses):
        ls = layout.lines[i]
        per_line = net.incidence[ls, i] * beta[ls]
        out.append(layout.bits[i] @ per_line if ls else np.zeros(1))
    return out


def expected_cost(net: PowerNetwork, strategy: Strategy, p_bus, rho, shed_cost: float,
                  layout: ScenarioLayout | None = None) -> float:
    """Generation cost plus expected shedding penalty of any strategy."""
    layout = layout or ScenarioLayout.of(net)
    loads = net.loads
    total = strategy.generation_cost(net)
    flows = scenario_inflow(net, layout, strategy.beta)
    shed = 0.0
    for i in range(net.n_buses):
        if p_bus[i] == 0.0:
            continue
        short = np.maximum(loads[i] - strategy.alpha[i] - flows[i], 0.0)
        shed += p_bus[i] * float(np.asarray(rho[i]) @ short)
    return total + shed_cost * shed


def realized_shedding(net: PowerNetwork, strategy: Strategy, bus_ok, line_ok,
                      shed_cost: float) -> tuple[np.ndarray, float]:
    """Shed load per bus once failures are known, and the realised total cost.

    A failed bus has no load to serve and sheds nothing.  Generation is paid
    for in full even at failed buses.
    """
    bus_ok = np.asarray(bus_ok, dtype=bool)
    cap_p = np.where(bus_ok, net.capacities, 0.0)
    cap_f = np.where(line_ok, net.flow_caps, 0.0)
    delivered = np.sign(strategy.beta) * np.minimum(np.abs(strategy.beta), cap_f)
    inflow = net.incidence.T @ delivered
    ls = np.maximum(net.loads - np.minimum(strategy.alpha, cap_p) - inflow, 0.0)
    ls = np.where(bus_ok, ls, 0.0)
    return ls, strategy.generation_cost(net) + shed_cost * float(ls.sum())


def last_resort(net: PowerNetwork, bus_failed=None) -> Strategy:
    """Generators at a common fraction of capacity covering total load; no flows."""
    caps = net.capacities.copy()
    if bus_failed is not None:
        caps[np.asarray(bus_failed, dtype=bool)] = 0.0
    total = caps.sum()
    frac = min(1.0, net.loads.sum() / total) if total > 0 else 0.0
    return Strategy(caps * frac, np.zeros(net.n_lines))


class _Solver:
    def __init__(self, method: str):
        self.method = method
        self._simplex = SimplexSolver()

    def __call__(self, lp: LinearProgram, warm=None) -> LpSolution:
        if self.method == "highs":
            return solve_highs(lp)
        if self.method != "simplex":
            raise ValueError(f"unknown LP method {self.method!r}")
        return self._simplex.solve(lp, warm)


def static_opf(net: PowerNetwork, ptdf: PTDF | None = None, method: str = "simplex") -> tuple[Strategy, LpSolution]:
    """Cheapest dispatch serving every load with all assets in service."""
    ptdf = ptdf or compute_ptdf(net)
    nb, nl = net.n_buses, net.n_lines
    loads = net.loads
    # balance: alpha_i + inflow_i = L_i
    A_bal = np.hstack([np.eye(nb), net.incidence.T])
    # flow identity: beta - PTDF alpha = -PTDF L
    A_ptdf = np.hstack([-ptdf.matrix, np.eye(nl)])
    A_eq = np.vstack([A_bal, A_ptdf])
    b_eq = np.concatenate([loads, -ptdf.matrix @ loads])
    caps = net.flow_caps
    lp = LinearProgram(
        np.concatenate([net.costs, np.zeros(nl)]), A_eq, b_eq,
        lower=np.concatenate([np.zeros(nb), -caps]),
        upper=np.concatenate([net.capacities, caps]),
    )
    sol = _Solver(method)(lp)
    if not sol.ok:
        raise InfeasibleError(f"static dispatch problem is {sol.status}; generation or line capacity is insufficient")
    return Strategy(sol.x[:nb].copy(), sol.x[nb:].copy()), sol


class StochasticOPF:
    """Builds and solves the extensive-form planning LP for one network.

    Constraint data depend only on which assets failed in the previous
    period, so they are cached per failure pattern together with the last
    optimal basis; new objective vectors then start from that basis.
    """

    def __init__(self, net: PowerNetwork, shed_cost: float, method: str = "simplex", cache_size: int = 4096):
        self.net = net
        self.shed_cost = shed_cost
        self.layout = ScenarioLayout.of(net)
        self.solve_lp = _Solver(method)
        self._structures: dict[bytes, tuple] = {}
        self._solutions: dict[tuple[bytes, bytes], Strategy] = {}
        self._reduced_cache: dict[bytes, tuple] = {}
        self.cache_size = cache_size
        self.incidents = 0
        self.lp_solves = 0

    def _structure(self, bus_failed: np.ndarray, line_failed: np.ndarray):
        key = bus_failed.tobytes() + line_failed.tobytes()
        hit = self._structures.get(key)
        if hit is not None:
            return key, hit
        net, lay = self.net, self.layout
        nb, nl, ns = net.n_buses, net.n_lines, lay.size
        ptdf = compute_ptdf(net, line_failed, bus_failed)
        # loads enter the flow identity only where the bus is up and its island can generate
        has_gen = {lab: net.capacities[(ptdf.island == lab) & ptdf.bus_active].sum() > 0
                   for lab in set(ptdf.island[ptdf.bus_active].tolist())}
        inj_load = np.array([net.loads[i] if ptdf.bus_active[i] and has_gen[ptdf.island[i]] else 0.0
                             for i in range(nb)])
        nvar = nb + nl + ns
        A_ub = np.zeros((ns, nvar))
        b_ub = np.zeros(ns)
        for i in range(nb):
            o0, o1 = lay.offsets[i], lay.offsets[i + 1]
            rows = np.arange(o0, o1)
            A_ub[rows, i] = -1.0
            for k, e in enumerate(lay.lines[i]):
                A_ub[rows, nb + e] = -net.incidence[e, i] * lay.bits[i][:, k]
            A_ub[rows, nb + nl + rows] = -1.0
            b_ub[rows] = -net.loads[i]
        A_eq = np.zeros((nl, nvar))
        A_eq[:, :nb] = -ptdf.matrix
        A_eq[:, nb:nb + nl] = np.eye(nl)
        b_eq = -ptdf.matrix @ inj_load
        caps = np.where(ptdf.line_active, net.flow_caps, 0.0)
        lower = np.concatenate([np.zeros(nb), -caps, np.zeros(ns)])
        upper = np.concatenate([np.where(ptdf.bus_active, net.capacities, 0.0), caps, np.full(ns, np.inf)])
        struct = (A_eq, b_eq, A_ub, b_ub, lower, upper, None)
        if len(self._structures) >= self.cache_size:
            self._structures.clear()
            self._solutions.clear()
            self._reduced_cache.clear()
        self._structures[key] = struct
        return key, struct

    def objective(self, p_bus, rho) -> np.ndarray:
        net, lay = self.net, self.layout
        c = np.zeros(net.n_buses + net.n_lines + lay.size)
        c[:net.n_buses] = net.costs
        w = np.concatenate([p_bus[i] * np.asarray(rho[i]) for i in range(net.n_buses)])
        c[net.n_buses + net.n_lines:] = self.shed_cost * w
        return c

    def _reduced(self, key: bytes, struct, keep: np.ndarray):
        """Constraint data restricted to the shedding auxiliaries with positive weight.

        An auxiliary with zero objective weight can absorb any shortfall for
        free, so its row never binds and both can be dropped.
        """
        rkey = key + b"|" + keep.tobytes()
        hit = self._reduced_cache.get(rkey)
        if hit is not None:
            return hit
        A_eq, b_eq, A_ub, b_ub, lower, upper, _ = struct
        nbl = self.net.n_buses + self.net.n_lines
        cols = np.concatenate([np.arange(nbl), nbl + keep])
        red = (A_eq[:, cols], b_eq, A_ub[np.ix_(keep, cols)], b_ub[keep], lower[cols], upper[cols], cols, [None])
        if len(self._reduced_cache) >= self.cache_size:
            self._reduced_cache.clear()
        self._reduced_cache[rkey] = red
        return red

    def solve(self, p_bus, rho, bus_failed=None, line_failed=None) -> Strategy:
        net = self.net
        bf = np.zeros(net.n_buses, bool) if bus_failed is None else np.asarray(bus_failed, bool)
        lf = np.zeros(net.n_lines, bool) if line_failed is None else np.asarray(line_failed, bool)
        key, struct = self._structure(bf, lf)
        c = self.objective(p_bus, rho)
        ck = (key, c.tobytes())
        hit = self._solutions.get(ck)
        if hit is not None:
            return hit
        nbl = net.n_buses + net.n_lines
        keep = np.flatnonzero(c[nbl:] > 0)
        A_eq, b_eq, A_ub, b_ub, lower, upper, cols, warm = self._reduced(key, struct, keep)
        lp = LinearProgram(c[cols], A_eq, b_eq, A_ub, b_ub, lower, upper)
        sol = self.solve_lp(lp, warm[0])
        self.lp_solves += 1
        if sol.ok:
            warm[0] = sol.basis
            nb, nl = net.n_buses, net.n_lines
            strat = Strategy(sol.x[:nb].copy(), sol.x[nb:nb + nl].copy())
        else:
            self.incidents += 1
            log.warning("planning LP %s; falling back to proportional dispatch", sol.status)
            strat = last_resort(net, bf)
        if len(self._solutions) >= self.cache_size:
            self._solutions.clear()
        self._solutions[ck] = strat
        return strat

    def build_lp(self, p_bus, rho, bus_failed=None, line_failed=None) -> LinearProgram:
        net = self.net
        bf = np.zeros(net.n_buses, bool) if bus_failed is None else np.asarray(bus_failed, bool)
        lf = np.zeros(net.n_lines, bool) if line_failed is None else np.asarray(line_failed, bool)
        _, (A_eq, b_eq, A_ub, b_ub, lower, upper, _) = self._structure(bf, lf)
        return LinearProgram(self.objective(p_bus, rho), A_eq, b_eq, A_ub, b_ub, lower, upper)

    def expected_cost(self, strategy: Strategy, p_bus, rho) -> float:
        return expected_cost(self.net, strategy, p_bus, rho, self.shed_cost, self.layout)


def stochastic_opf(net: PowerNetwork, p_bus, rho, shed_cost: float, bus_failed=None, line_failed=None,
                   method: str = "simplex") -> tuple[Strategy, float]:
    """Plan one period ahead; returns the strategy and its expected cost."""
    model = StochasticOPF(net, shed_cost, method)
    strat = model.solve(p_bus, rho, bus_failed, line_failed)
    return strat, model.expected_cost(strat, p_bus, rho)


def write_strategies_csv(net: PowerNetwork, rows, path: str | Path) -> None:
    """``rows`` is an iterable of ``(t, Strategy)``; writes alpha and beta records."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "kind", "element", "value"])
        for t, s in rows:
            for i, a in enumerate(s.alpha):
                w.writerow([t, "alpha", net.buses[i].id, f"{a:.10g}"])
            for e, b in enumerate(s.beta):
                ln = net.lines[e]
                w.writerow([t, "beta", f"{net.buses[ln.a].id}-{net.buses[ln.b].id}", f"{b:.10g}"])
