"""Grid geometry: king-move neighbourhoods, Chebyshev distance and area partitions.

Nodes are 1-based ``(x, y)`` tuples with ``1 <= x <= M`` (columns) and
``1 <= y <= N`` (rows).  Node sets used in the hot simulation loop are boolean
arrays of shape ``(N, M)`` indexed ``[y - 1, x - 1]``, i.e. the row-major
index ``(y - 1) * M + (x - 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

NodeId = tuple[int, int]

#: Returned by :func:`distance_to_set` when the target set is empty.
INF_DISTANCE = math.inf

KING_OFFSETS = tuple((dx, dy) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dx, dy) != (0, 0))


class GridError(ValueError):
    """Raised for nodes outside the grid or malformed partitions."""


@dataclass(frozen=True, eq=False)
class GridMap:
    """Rectangular lattice with a partition of its nodes into ``H`` areas.

    Attributes
    ----------
    width, height : int
        ``M`` columns and ``N`` rows.
    area_of : ndarray of int, shape (N, M)
        Zero-based area index of every node.
    n_areas : int
        ``H``.  Areas that own no node are allowed; see :attr:`empty_areas`.
    """

    width: int
    height: int
    area_of: np.ndarray
    n_areas: int
    empty_areas: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise GridError("grid dimensions must be positive")
        if self.n_areas < 1:
            raise GridError("need at least one area")
        area = np.asarray(self.area_of, dtype=np.int32)
        if area.shape != (self.height, self.width):
            raise GridError(f"area map has shape {area.shape}, expected {(self.height, self.width)}")
        if area.min() < 0 or area.max() >= self.n_areas:
            raise GridError("area indices must lie in [0, H)")
        area.setflags(write=False)
        object.__setattr__(self, "area_of", area)
        counts = np.bincount(area.ravel(), minlength=self.n_areas)
        object.__setattr__(self, "empty_areas", tuple(int(h) for h in np.flatnonzero(counts == 0)))

    @classmethod
    def uniform(cls, width: int, height: int) -> "GridMap":
        return cls(width, height, np.zeros((height, width), dtype=np.int32), 1)

    @classmethod
    def blocks(cls, width: int, height: int, n_areas: int) -> "GridMap":
        """Partition into a near-square arrangement of rectangular blocks.

        ``H = 4`` gives quadrants (area 0 bottom-left, 1 bottom-right,
        2 top-left, 3 top-right, with ``y`` growing upwards).
        """
        rows = int(math.isqrt(n_areas))
        while n_areas % rows:
            rows -= 1
        cols = n_areas // rows
        ys = np.minimum(np.arange(height) * rows // height, rows - 1)
        xs = np.minimum(np.arange(width) * cols // width, cols - 1)
        area = ys[:, None] * cols + xs[None, :]
        return cls(width, height, area, n_areas)

    @classmethod
    def from_file(cls, path: str | Path, n_areas: int | None = None) -> "GridMap":
        """Load an explicit assignment: ``N`` whitespace-separated rows of ``M`` 1-based area ids.

        The first text row is ``y = 1``.
        """
        area = np.loadtxt(path, dtype=np.int32, ndmin=2) - 1
        h = int(area.max()) + 1 if n_areas is None else n_areas
        return cls(area.shape[1], area.shape[0], area, h)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def size(self) -> int:
        return self.width * self.height

    def contains(self, node: NodeId) -> bool:
        x, y = node
        return 1 <= x <= self.width and 1 <= y <= self.height

    def check(self, node: NodeId) -> None:
        if not self.contains(node):
            raise GridError(f"node {node} outside {self.width}x{self.height} grid")

    def area(self, node: NodeId) -> int:
        self.check(node)
        return int(self.area_of[node[1] - 1, node[0] - 1])

    def index(self, node: NodeId) -> int:
        """Row-major flat index of ``node``."""
        self.check(node)
        return (node[1] - 1) * self.width + (node[0] - 1)

    def node(self, index: int) -> NodeId:
        y, x = divmod(int(index), self.width)
        return (x + 1, y + 1)

    def mask(self, nodes: Iterable[NodeId]) -> np.ndarray:
        """Boolean ``(N, M)`` array marking ``nodes``."""
        out = np.zeros(self.shape, dtype=bool)
        for nd in nodes:
            self.check(nd)
            out[nd[1] - 1, nd[0] - 1] = True
        return out

    def nodes_of(self, mask: np.ndarray) -> set[NodeId]:
        ys, xs = np.nonzero(mask)
        return {(int(x) + 1, int(y) + 1) for x, y in zip(xs, ys)}


def neighbors1(g: GridMap, i: NodeId) -> set[NodeId]:
    """In-grid king-move neighbours of ``i`` (3, 5 or 8 nodes on grids of size >= 2)."""
    g.check(i)
    x, y = i
    return {(x + dx, y + dy) for dx, dy in KING_OFFSETS if g.contains((x + dx, y + dy))}


def k_neighbors(g: GridMap, i: NodeId, k: int) -> set[NodeId]:
    """Nodes at Chebyshev distance exactly ``k`` from ``i`` (clipped to the grid)."""
    g.check(i)
    if k < 1:
        raise ValueError("k must be >= 1")
    x, y = i
    shell = set()
    for dx in range(-k, k + 1):
        for dy in (-k, k):
            shell.add((x + dx, y + dy))
    for dy in range(-k + 1, k):
        shell.add((x - k, y + dy))
        shell.add((x + k, y + dy))
    return {nd for nd in shell if g.contains(nd)}


def k_neighbors_recursive(g: GridMap, i: NodeId, k: int) -> set[NodeId]:
    """k-neighbours built by expanding 1-neighbourhoods shell by shell.

    Slow; kept as an independent cross-check of :func:`k_neighbors`.
    """
    g.check(i)
    seen = {i}
    shell = {i}
    for _ in range(k):
        nxt = set()
        for j in shell:
            nxt |= neighbors1(g, j)
        shell = nxt - seen
        seen |= shell
    return shell


def distance(g: GridMap, i: NodeId, j: NodeId) -> int:
    g.check(i)
    g.check(j)
    return max(abs(i[0] - j[0]), abs(i[1] - j[1]))


def distance_to_set(g: GridMap, i: NodeId, nodes) -> float:
    """Minimum distance from ``i`` to a set of nodes or a boolean mask; ``inf`` if empty."""
    g.check(i)
    if isinstance(nodes, np.ndarray):
        ys, xs = np.nonzero(nodes)
        if xs.size == 0:
            return INF_DISTANCE
        return int(np.max(np.stack([np.abs(xs + 1 - i[0]), np.abs(ys + 1 - i[1])]), axis=0).min())
    best = INF_DISTANCE
    for j in nodes:
        best = min(best, distance(g, i, j))
    return best


def neighbor_count(mask: np.ndarray) -> np.ndarray:
    """Number of king-move neighbours of every node that are set in ``mask``."""
    n, m = mask.shape
    pad = np.zeros((n + 2, m + 2), dtype=np.uint8)
    pad[1:-1, 1:-1] = mask
    out = np.zeros((n, m), dtype=np.uint8)
    for dx, dy in KING_OFFSETS:
        out += pad[1 + dy:1 + dy + n, 1 + dx:1 + dx + m]
    return out


def dilate(mask: np.ndarray) -> np.ndarray:
    """``mask`` together with all king-move neighbours of its nodes."""
    return mask | (neighbor_count(mask) > 0)


def window_indices(g: GridMap, centre: NodeId, radius: int, include_centre: bool = True) -> np.ndarray:
    """Flat indices of the in-grid nodes within Chebyshev ``radius`` of ``centre``."""
    g.check(centre)
    x, y = centre
    xs = np.arange(max(1, x - radius), min(g.width, x + radius) + 1)
    ys = np.arange(max(1, y - radius), min(g.height, y + radius) + 1)
    xx, yy = np.meshgrid(xs, ys)
    keep = np.ones(xx.shape, dtype=bool) if include_centre else ~((xx == x) & (yy == y))
    return ((yy - 1) * g.width + (xx - 1))[keep].ravel()


def neighbor_table(g: GridMap, flat: np.ndarray) -> np.ndarray:
    """For each flat index, the flat indices of its 8 neighbours (``-1`` when off-grid)."""
    y, x = np.divmod(np.asarray(flat), g.width)
    out = np.full((len(flat), 8), -1, dtype=np.int64)
    for k, (dx, dy) in enumerate(KING_OFFSETS):
        xx, yy = x + dx, y + dy
        ok = (xx >= 0) & (xx < g.width) & (yy >= 0) & (yy < g.height)
        out[ok, k] = yy[ok] * g.width + xx[ok]
    return out
