"""Masked uniform grids for bounded planar domains.

A domain is represented by the lattice nodes ``origin + h*(i, j)`` that lie
strictly inside it. Nodes on or outside the boundary are deleted, which is how
the homogeneous Dirichlet condition enters every operator built on the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import EmptyMask, InvalidSpec, ResolutionTooCoarse

# Nodes closer than this (in units of h) to the boundary count as on it.
BOUNDARY_TOL = 1e-9

Inside = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class DomainSpec:
    """Geometry of a bounded open planar domain.

    ``kind`` is one of ``rectangle``, ``disc``, ``annulus`` or ``predicate``.
    Use the classmethod constructors rather than filling ``params`` by hand.
    """

    kind: str
    params: tuple = ()
    inside: Inside | None = field(default=None, compare=False, repr=False)
    bbox: tuple[float, float, float, float] | None = None

    @classmethod
    def rectangle(cls, x0: float, x1: float, y0: float, y1: float) -> "DomainSpec":
        if not (x0 < x1 and y0 < y1):
            raise InvalidSpec(f"rectangle needs x0 < x1 and y0 < y1, got {(x0, x1, y0, y1)}")
        return cls("rectangle", (float(x0), float(x1), float(y0), float(y1)),
                   bbox=(x0, x1, y0, y1))

    @classmethod
    def disc(cls, center: Sequence[float] = (0.0, 0.0), radius: float = 1.0) -> "DomainSpec":
        if not radius > 0:
            raise InvalidSpec(f"disc radius must be positive, got {radius}")
        cx, cy = map(float, center)
        return cls("disc", (cx, cy, float(radius)),
                   bbox=(cx - radius, cx + radius, cy - radius, cy + radius))

    @classmethod
    def annulus(cls, center: Sequence[float] = (0.0, 0.0), r_inner: float = 0.5,
                r_outer: float = 1.0) -> "DomainSpec":
        if not 0 < r_inner < r_outer:
            raise InvalidSpec(f"annulus needs 0 < r_inner < r_outer, got {(r_inner, r_outer)}")
        cx, cy = map(float, center)
        return cls("annulus", (cx, cy, float(r_inner), float(r_outer)),
                   bbox=(cx - r_outer, cx + r_outer, cy - r_outer, cy + r_outer))

    @classmethod
    def predicate(cls, inside: Inside, bbox: Sequence[float] | None) -> "DomainSpec":
        if bbox is None:
            raise InvalidSpec("predicate domains need an explicit bounding box")
        x0, x1, y0, y1 = map(float, bbox)
        if not (x0 < x1 and y0 < y1):
            raise InvalidSpec(f"degenerate bounding box {tuple(bbox)}")
        return cls("predicate", (), inside=inside, bbox=(x0, x1, y0, y1))

    def contains(self, x: np.ndarray, y: np.ndarray, tol: float = 0.0) -> np.ndarray:
        """Strict membership test; points within ``tol`` of the boundary are rejected."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "rectangle":
            x0, x1, y0, y1 = self.params
            return (x > x0 + tol) & (x < x1 - tol) & (y > y0 + tol) & (y < y1 - tol)
        if self.kind == "disc":
            cx, cy, r = self.params
            return np.hypot(x - cx, y - cy) < r - tol
        if self.kind == "annulus":
            cx, cy, r0, r1 = self.params
            rho = np.hypot(x - cx, y - cy)
            return (rho > r0 + tol) & (rho < r1 - tol)
        if self.kind == "predicate":
            out = np.asarray(self.inside(x, y), dtype=bool)
            return np.broadcast_to(out, x.shape).copy()
        raise InvalidSpec(f"unknown domain kind {self.kind!r}")

    def area(self) -> float:
        """Exact area where a closed form exists, else ``nan``."""
        if self.kind == "rectangle":
            x0, x1, y0, y1 = self.params
            return (x1 - x0) * (y1 - y0)
        if self.kind == "disc":
            return math.pi * self.params[2] ** 2
        if self.kind == "annulus":
            return math.pi * (self.params[3] ** 2 - self.params[2] ** 2)
        return float("nan")


@dataclass(frozen=True)
class CompactSetSpec:
    """A compact set K given through its distance function.

    ``kind`` is ``point``, ``segment``, ``closed_disc`` or ``finite_union``.
    """

    kind: str
    params: tuple = ()
    parts: tuple["CompactSetSpec", ...] = ()

    @classmethod
    def point(cls, p: Sequence[float]) -> "CompactSetSpec":
        return cls("point", tuple(map(float, p)))

    @classmethod
    def segment(cls, p: Sequence[float], q: Sequence[float]) -> "CompactSetSpec":
        p, q = tuple(map(float, p)), tuple(map(float, q))
        if p == q:
            return cls.point(p)
        return cls("segment", p + q)

    @classmethod
    def closed_disc(cls, center: Sequence[float], radius: float) -> "CompactSetSpec":
        if not radius > 0:
            raise InvalidSpec(f"closed_disc radius must be positive, got {radius}")
        return cls("closed_disc", tuple(map(float, center)) + (float(radius),))

    @classmethod
    def finite_union(cls, parts: Sequence["CompactSetSpec"]) -> "CompactSetSpec":
        if not parts:
            raise InvalidSpec("finite_union needs at least one part")
        return cls("finite_union", (), tuple(parts))

    def dist(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "point":
            px, py = self.params
            return np.hypot(x - px, y - py)
        if self.kind == "segment":
            px, py, qx, qy = self.params
            dx, dy = qx - px, qy - py
            s = np.clip(((x - px) * dx + (y - py) * dy) / (dx * dx + dy * dy), 0.0, 1.0)
            return np.hypot(x - (px + s * dx), y - (py + s * dy))
        if self.kind == "closed_disc":
            cx, cy, r = self.params
            return np.maximum(np.hypot(x - cx, y - cy) - r, 0.0)
        if self.kind == "finite_union":
            return np.minimum.reduce([part.dist(x, y) for part in self.parts])
        raise InvalidSpec(f"unknown compact set kind {self.kind!r}")

    def bbox(self) -> tuple[float, float, float, float]:
        if self.kind == "point":
            px, py = self.params
            return px, px, py, py
        if self.kind == "segment":
            px, py, qx, qy = self.params
            return min(px, qx), max(px, qx), min(py, qy), max(py, qy)
        if self.kind == "closed_disc":
            cx, cy, r = self.params
            return cx - r, cx + r, cy - r, cy + r
        boxes = np.array([p.bbox() for p in self.parts])
        return boxes[:, 0].min(), boxes[:, 1].max(), boxes[:, 2].min(), boxes[:, 3].max()


@dataclass(frozen=True, eq=False)
class GridDomain:
    """Interior lattice nodes of a domain at spacing ``h``.

    ``ij`` holds the integer node coordinates in index order (sorted by row
    ``j``, then column ``i``); ``index_of`` inverts that map.
    """

    h: float
    ij: np.ndarray
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.h > 0:
            raise InvalidSpec(f"spacing must be positive, got {self.h}")
        ij = np.asarray(self.ij, dtype=np.int64).reshape(-1, 2)
        if len(ij) == 0:
            raise EmptyMask("grid has no interior nodes")
        order = np.lexsort((ij[:, 0], ij[:, 1]))
        ij = ij[order]
        if len(ij) > 1 and np.any(np.all(ij[1:] == ij[:-1], axis=1)):
            raise InvalidSpec("duplicate nodes in mask")
        ij.setflags(write=False)
        object.__setattr__(self, "ij", ij)
        lo = ij.min(axis=0)
        shape = ij.max(axis=0) - lo + 1
        lookup = np.full(tuple(shape), -1, dtype=np.int64)
        lookup[ij[:, 0] - lo[0], ij[:, 1] - lo[1]] = np.arange(len(ij))
        lookup.setflags(write=False)
        object.__setattr__(self, "_lo", lo)
        object.__setattr__(self, "_lookup", lookup)

    @property
    def N(self) -> int:
        return len(self.ij)

    def __len__(self) -> int:
        return self.N

    def points(self) -> np.ndarray:
        """Physical coordinates of the nodes, shape ``(N, 2)``."""
        return np.asarray(self.origin) + self.h * self.ij

    def index(self, i, j) -> np.ndarray:
        """Node index for integer coordinates, ``-1`` where not in the mask."""
        i = np.asarray(i) - self._lo[0]
        j = np.asarray(j) - self._lo[1]
        nx, ny = self._lookup.shape
        ok = (i >= 0) & (i < nx) & (j >= 0) & (j < ny)
        out = np.full(np.broadcast(i, j).shape, -1, dtype=np.int64)
        out[ok] = self._lookup[np.broadcast_to(i, out.shape)[ok], np.broadcast_to(j, out.shape)[ok]]
        return out

    def links(self, direction: str) -> tuple[np.ndarray, np.ndarray]:
        """Pairs ``(p, q)`` of node indices with ``q`` the ``+x`` or ``+y`` neighbour of ``p``."""
        di, dj = {"x": (1, 0), "y": (0, 1)}[direction]
        q = self.index(self.ij[:, 0] + di, self.ij[:, 1] + dj)
        p = np.flatnonzero(q >= 0)
        return p, q[p]

    def neighbor(self, di: int, dj: int) -> np.ndarray:
        """Index of the node shifted by ``(di, dj)`` for every node (``-1`` if absent)."""
        return self.index(self.ij[:, 0] + di, self.ij[:, 1] + dj)

    def area(self) -> float:
        return area(self)

    def is_connected(self) -> bool:
        px, qx = self.links("x")
        py, qy = self.links("y")
        rows = np.concatenate([px, py])
        cols = np.concatenate([qx, qy])
        adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(self.N, self.N))
        ncomp, _ = connected_components(adj, directed=False)
        return ncomp == 1

    def node_set(self) -> set[tuple[int, int]]:
        return {(int(a), int(b)) for a, b in self.ij}

    def physical_set(self) -> set[tuple[float, float]]:
        return {(float(a), float(b)) for a, b in self.points()}


def _lattice_box(bbox, h, origin):
    x0, x1, y0, y1 = bbox
    ox, oy = origin
    i = np.arange(math.floor((x0 - ox) / h), math.ceil((x1 - ox) / h) + 1)
    j = np.arange(math.floor((y0 - oy) / h), math.ceil((y1 - oy) / h) + 1)
    I, J = np.meshgrid(i, j, indexing="xy")
    return I.ravel(), J.ravel()


def _masked_grid(test, bbox, h, origin) -> GridDomain:
    I, J = _lattice_box(bbox, h, origin)
    keep = test(origin[0] + h * I, origin[1] + h * J)
    if not np.any(keep):
        raise EmptyMask(f"no grid point lies inside the domain at h={h}")
    return GridDomain(h=float(h), ij=np.column_stack([I[keep], J[keep]]), origin=tuple(origin))


def build_grid(spec: DomainSpec, h: float, origin: Sequence[float] = (0.0, 0.0)) -> GridDomain:
    """Grid of all lattice points strictly inside ``spec``."""
    if not (isinstance(h, (int, float, np.floating)) and h > 0 and math.isfinite(h)):
        raise InvalidSpec(f"spacing must be a positive finite number, got {h!r}")
    if spec.bbox is None:
        raise InvalidSpec("domain has no bounding box")
    tol = BOUNDARY_TOL * h
    return _masked_grid(lambda x, y: spec.contains(x, y, tol), spec.bbox, h,
                        tuple(map(float, origin)))


def neighborhood_grid(K: CompactSetSpec, r: float, h: float,
                      origin: Sequence[float] = (0.0, 0.0)) -> GridDomain:
    """Grid for the open neighbourhood ``{dist(., K) < r}``.

    Requires ``h <= r/4`` so that the neighbourhood is several cells wide.
    """
    if not (r > 0 and h > 0):
        raise InvalidSpec(f"need r > 0 and h > 0, got r={r}, h={h}")
    if h > r / 4:
        raise ResolutionTooCoarse(f"h={h} exceeds r/4={r / 4}")
    x0, x1, y0, y1 = K.bbox()
    tol = BOUNDARY_TOL * h
    return _masked_grid(lambda x, y: K.dist(x, y) < r - tol, (x0 - r, x1 + r, y0 - r, y1 + r),
                        h, tuple(map(float, origin)))


def area(g: GridDomain) -> float:
    """Discrete area ``N * h**2``."""
    return g.N * g.h ** 2
