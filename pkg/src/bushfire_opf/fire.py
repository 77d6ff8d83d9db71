"""Stochastic bushfire spread and containment on a :class:`~bushfire_opf.grid.GridMap`.

One period of the model runs in two phases.  Every node that is not burning
ignites independently with probability ``1 - (1 - p_plus[h]) ** m`` where
``m`` counts its burning king-move neighbours; then every node that was
burning at the start of the period is extinguished independently with
probability ``p_minus[h]``.  Nodes ignited during the period are not
extinguished in the same period, and extinguished nodes may burn again later.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from . import _kernels
from .grid import GridMap, NodeId


@dataclass(frozen=True)
class SpreadParams:
    """Per-area spread and containment probabilities (length ``H`` each)."""

    p_plus: np.ndarray
    p_minus: np.ndarray

    def __post_init__(self):
        pp = np.atleast_1d(np.asarray(self.p_plus, dtype=float))
        pm = np.atleast_1d(np.asarray(self.p_minus, dtype=float))
        if pp.shape != pm.shape:
            raise ValueError("p_plus and p_minus must have one entry per area")
        if np.any((pp < 0) | (pp > 1)) or np.any((pm < 0) | (pm > 1)):
            raise ValueError("probabilities must lie in [0, 1]")
        object.__setattr__(self, "p_plus", pp)
        object.__setattr__(self, "p_minus", pm)

    @property
    def n_areas(self) -> int:
        return len(self.p_plus)

    @classmethod
    def constant(cls, p_plus: float, p_minus: float, n_areas: int = 1) -> "SpreadParams":
        return cls(np.full(n_areas, p_plus), np.full(n_areas, p_minus))


@dataclass(frozen=True)
class FireState:
    burning: np.ndarray
    t: int

    @property
    def count(self) -> int:
        return int(self.burning.sum())


@dataclass(frozen=True)
class ParamSchedule:
    """Piecewise-constant parameter paths.

    ``plus[t - 1, h]`` is the spread probability governing the transition from
    period ``t`` to ``t + 1``; likewise ``minus``.  ``change_times_plus[h]``
    lists the periods at which area ``h``'s spread probability jumps.
    """

    plus: np.ndarray
    minus: np.ndarray
    change_times_plus: tuple[tuple[int, ...], ...]
    change_times_minus: tuple[tuple[int, ...], ...]

    @property
    def horizon(self) -> int:
        return self.plus.shape[0]

    @property
    def n_areas(self) -> int:
        return self.plus.shape[1]

    def at(self, t: int) -> SpreadParams:
        return SpreadParams(self.plus[t - 1], self.minus[t - 1])

    @classmethod
    def constant(cls, params: SpreadParams, horizon: int) -> "ParamSchedule":
        h = params.n_areas
        return cls(
            np.tile(params.p_plus, (horizon, 1)),
            np.tile(params.p_minus, (horizon, 1)),
            tuple(() for _ in range(h)),
            tuple(() for _ in range(h)),
        )

    @classmethod
    def from_segments(cls, horizon: int, plus: Sequence[tuple[int, float]],
                      minus: Sequence[tuple[int, float]]) -> "ParamSchedule":
        """Single-area schedule from ``(start_time, value)`` segments; the first starts at 1."""
        def path(segs):
            if not segs or segs[0][0] != 1:
                raise ValueError("first segment must start at t=1")
            out = np.empty(horizon)
            for k, (start, val) in enumerate(segs):
                stop = segs[k + 1][0] - 1 if k + 1 < len(segs) else horizon
                out[start - 1:stop] = val
            return out[:, None], (tuple(s for s, _ in segs[1:]),)

        p, cp = path(list(plus))
        m, cm = path(list(minus))
        return cls(p, m, cp, cm)


def ignition_probability(m, p_plus):
    """Probability that a non-burning node with ``m`` burning neighbours ignites."""
    return 1.0 - (1.0 - np.asarray(p_plus, dtype=float)) ** np.asarray(m)


def ignition_table(p_plus) -> np.ndarray:
    """``table[h, m]``: ignition probability in area ``h`` with ``m`` burning neighbours."""
    return ignition_probability(np.arange(9)[None, :], np.asarray(p_plus, dtype=float)[:, None])


def advance_fire(g: GridMap, burning: np.ndarray, params: SpreadParams, rng: np.random.Generator):
    """One period; returns the next burning set and per-area transition counts.

    The counts are ``(ignited, spared, extinguished, survived)`` with the
    first two indexed ``[area, burning neighbours]``.  Exactly one uniform
    number is drawn per node, in row-major order; a burning node keeps
    burning when its draw is at least ``p_minus`` and a non-burning node
    ignites when its draw is below its ignition probability.  The result is
    therefore a deterministic function of the generator state.
    """
    burning = np.ascontiguousarray(burning, dtype=bool)
    counts = _kernels.neighbour_counts(burning)
    u = rng.random(g.shape)
    out = np.empty(g.shape, dtype=bool)
    stats = np.zeros((g.n_areas, 20), np.int64)
    _kernels.advance(burning, counts, g.area_of, ignition_table(params.p_plus), params.p_minus, u, out, stats)
    ign = stats[:, 0:18:2].copy()
    spr = stats[:, 1:18:2].copy()
    ign[:, 0] = 0
    spr[:, 0] = 0
    return out, (ign, spr, stats[:, 18].copy(), stats[:, 19].copy())


def step_fire(g: GridMap, burning: np.ndarray, params: SpreadParams,
              rng: np.random.Generator) -> np.ndarray:
    """Draw the next burning set (see :func:`advance_fire` for the draw order)."""
    return advance_fire(g, burning, params, rng)[0]


def generate_schedule(n_areas: int, horizon: int, n_changes: int, plus_range: tuple[float, float],
                      minus_range: tuple[float, float], rng: np.random.Generator,
                      n_changes_minus: int | None = None) -> ParamSchedule:
    """Random piecewise-constant schedule.

    For every area, the spread and containment streams get their own change
    times, drawn uniformly without replacement from ``{2, ..., T}``.  The
    initial values and the value after every change are uniform on the
    configured ranges.
    """
    n_minus = n_changes if n_changes_minus is None else n_changes_minus
    if max(n_changes, n_minus) >= horizon or min(n_changes, n_minus) < 0:
        raise ValueError(f"number of change points must lie in [0, T) with T={horizon}")

    def stream(k, lo_hi):
        path = np.empty((horizon, n_areas))
        times = []
        for h in range(n_areas):
            cps = np.sort(rng.choice(np.arange(2, horizon + 1), size=k, replace=False)) if k else np.array([], int)
            vals = rng.uniform(lo_hi[0], lo_hi[1], size=k + 1)
            seg = np.searchsorted(cps, np.arange(1, horizon + 1), side="right")
            path[:, h] = vals[seg]
            times.append(tuple(int(c) for c in cps))
        return path, tuple(times)

    plus, cp = stream(n_changes, plus_range)
    minus, cm = stream(n_minus, minus_range)
    return ParamSchedule(plus, minus, cp, cm)


def random_origins(g: GridMap, count: int, rng: np.random.Generator) -> list[NodeId]:
    """Fire origins.

    With one area, ``count`` distinct nodes uniformly over the grid.  With
    several areas, ``count`` distinct areas are chosen uniformly and one node
    is drawn uniformly inside each.
    """
    if g.n_areas == 1 or count > g.n_areas:
        flat = rng.choice(g.size, size=count, replace=False)
        return [g.node(i) for i in flat]
    areas = rng.choice(g.n_areas, size=count, replace=False)
    out = []
    for h in sorted(int(a) for a in areas):
        members = np.flatnonzero(g.area_of.ravel() == h)
        out.append(g.node(members[rng.integers(members.size)]))
    return out


def iter_trajectory(g: GridMap, origins, schedule: ParamSchedule, horizon: int,
                    rng: np.random.Generator) -> Iterator[FireState]:
    """Yield ``B_1, ..., B_T``; ``B_1`` is the origin set."""
    if not origins:
        raise ValueError("need at least one fire origin")
    burning = g.mask(origins)
    yield FireState(burning, 1)
    for t in range(1, horizon):
        burning = step_fire(g, burning, schedule.at(t), rng)
        yield FireState(burning, t + 1)


def simulate_trajectory(g: GridMap, origins, schedule: ParamSchedule, horizon: int,
                        rng: np.random.Generator) -> list[FireState]:
    return list(iter_trajectory(g, origins, schedule, horizon, rng))


def write_trajectory_csv(g: GridMap, states, path: str | Path) -> None:
    """Columns ``t, count, coordinates`` with coordinates as ``x,y`` pairs joined by ``;``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "count", "coordinates"])
        for st in states:
            ys, xs = np.nonzero(st.burning)
            coords = ";".join(f"{x + 1},{y + 1}" for y, x in sorted(zip(ys, xs)))
            w.writerow([st.t, len(xs), coords])


def read_trajectory_csv(g: GridMap, path: str | Path) -> list[FireState]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            nodes = []
            if row["coordinates"]:
                for pair in row["coordinates"].split(";"):
                    x, y = pair.split(",")
                    nodes.append((int(x), int(y)))
            out.append(FireState(g.mask(nodes), int(row["t"])))
    return out
