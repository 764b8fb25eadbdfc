"""Finite metric measure spaces: balls, doubling constants, nets and coverings.

A :class:`Space` is a finite point set ``0..n-1`` with a distance matrix and
strictly positive point masses.  Balls are closed (``d(c, x) <= r``); every
comparison between distances uses the absolute tolerance :data:`TOL`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Mapping

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path

TOL = 1e-9


class SpaceError(ValueError):
    """Raised when a space document or matrix does not define a metric measure space."""


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Space:
    dist: np.ndarray
    mass: np.ndarray
    scale_unit: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "dist", _frozen(self.dist))
        object.__setattr__(self, "mass", _frozen(self.mass))
        _validate(self.dist, self.mass, self.scale_unit)

    @property
    def n(self) -> int:
        return self.mass.shape[0]

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())

    @cached_property
    def order(self) -> np.ndarray:
        """Row ``x`` lists all points sorted by distance from ``x`` (stable, so ``x`` first)."""
        o = np.argsort(self.dist, axis=1, kind="stable")
        o.setflags(write=False)
        return o

    @cached_property
    def sorted_dist(self) -> np.ndarray:
        s = np.take_along_axis(self.dist, self.order, axis=1)
        s.setflags(write=False)
        return s

    @cached_property
    def cum_mass(self) -> np.ndarray:
        """``cum_mass[x, k]`` is the mass of the ``k + 1`` points closest to ``x``."""
        c = np.cumsum(self.mass[self.order], axis=1)
        c.setflags(write=False)
        return c

    @cached_property
    def diameter(self) -> float:
        return float(self.dist.max()) if self.n else 0.0

    @cached_property
    def min_positive_distance(self) -> float:
        off = self.dist[~np.eye(self.n, dtype=bool)]
        return float(off.min()) if off.size else np.inf

    def prefix_len(self, center: int, radius: float) -> int:
        """Number of points in the closed ball ``B(center, radius)``."""
        return int(np.searchsorted(self.sorted_dist[center], radius + TOL, side="right"))

    def ball_ends(self, center: int, radius: float) -> np.ndarray:
        """Prefix lengths of the distinct closed balls ``B(center, r)``, ``0 <= r <= radius``.

        Only member sets matter on a finite space, so the family of centred balls
        of radius at most ``radius`` is exactly this list of prefixes of
        :attr:`order`.
        """
        d = self.sorted_dist[center]
        k = self.prefix_len(center, radius)
        d = d[:k]
        # a prefix ends where the next distance is strictly larger
        breaks = np.nonzero(np.diff(d) > TOL)[0] + 1
        return np.append(breaks, k)

    def restrict(self, points) -> "Space":
        """The subspace on ``points`` with the induced metric and measure."""
        idx = np.asarray(sorted(points), dtype=int)
        return Space(self.dist[np.ix_(idx, idx)], self.mass[idx], self.scale_unit)

    def to_document(self) -> dict:
        return {
            "n": self.n,
            "metric": {"type": "dense", "data": self.dist.tolist()},
            "mass": self.mass.tolist(),
            "scale_unit": self.scale_unit,
        }


def _validate(dist: np.ndarray, mass: np.ndarray, scale_unit: float) -> None:
    n = mass.shape[0]
    if mass.ndim != 1 or n == 0:
        raise SpaceError("mass must be a nonempty vector")
    if dist.shape != (n, n):
        raise SpaceError(f"distance matrix has shape {dist.shape}, expected ({n}, {n})")
    if not np.all(np.isfinite(dist)):
        raise SpaceError("distances must be finite (disconnected graph?)")
    if not np.all(np.isfinite(mass)) or np.any(mass <= 0):
        i = int(np.argmax(~(mass > 0)))
        raise SpaceError(f"nonpositive mass at point {i}")
    if not scale_unit > 0:
        raise SpaceError("scale_unit must be positive")
    if np.any(np.abs(np.diag(dist)) > TOL):
        raise SpaceError("distance matrix must have zero diagonal")
    if np.any(dist < -TOL):
        raise SpaceError("distances must be nonnegative")
    asym = np.abs(dist - dist.T) > TOL
    if asym.any():
        i, j = np.argwhere(asym)[0]
        raise SpaceError(f"asymmetric distance between {i} and {j}")
    off = dist + np.eye(n)
    if np.any(off <= TOL):
        i, j = np.argwhere(off <= TOL)[0]
        raise SpaceError(f"distinct points {i} and {j} at distance zero")
    for i in range(n):
        # viol[k, j]: d(i, j) > d(i, k) + d(k, j)
        viol = dist[i][None, :] > dist[i][:, None] + dist + TOL
        if viol.any():
            k, j = min((int(j), int(k)) for k, j in np.argwhere(viol))[::-1]
            raise SpaceError(f"triangle violation ({i},{k},{j})")


def load_space(doc: str | Mapping[str, Any]) -> Space:
    """Build a :class:`Space` from a JSON document (text or already-parsed mapping).

    ``metric.type`` is ``"dense"`` (``data`` an ``n x n`` matrix) or ``"graph"``
    (``data`` a list of ``[i, j, weight]`` edges, closed under shortest paths).
    """
    if isinstance(doc, str):
        doc = json.loads(doc)
    try:
        n = int(doc["n"])
        metric = doc["metric"]
        kind = metric["type"]
        data = metric["data"]
    except (KeyError, TypeError) as exc:
        raise SpaceError(f"malformed space document: missing {exc}") from None
    mass = np.asarray(doc.get("mass", np.ones(n)), dtype=float)
    if mass.shape != (n,):
        raise SpaceError(f"mass has length {mass.size}, expected {n}")
    if kind == "dense":
        dist = np.asarray(data, dtype=float)
    elif kind == "graph":
        dist = graph_metric(n, data)
    else:
        raise SpaceError(f"unknown metric type {kind!r}")
    return Space(dist, mass, float(doc.get("scale_unit", 1.0)))


def read_space(path) -> Space:
    with open(path) as fh:
        return load_space(fh.read())


def graph_metric(n: int, edges) -> np.ndarray:
    """All-pairs shortest-path distances of an undirected weighted graph."""
    edges = np.asarray(edges, dtype=float).reshape(-1, 3)
    if edges.size and np.any(edges[:, 2] <= 0):
        raise SpaceError("edge weights must be positive")
    i = edges[:, 0].astype(int)
    j = edges[:, 1].astype(int)
    if edges.size and (min(i.min(), j.min()) < 0 or max(i.max(), j.max()) >= n):
        raise SpaceError("edge endpoint out of range")
    # duplicate edges: keep the lightest
    w = {}
    for a, b, c in zip(i, j, edges[:, 2]):
        key = (min(a, b), max(a, b))
        w[key] = min(c, w.get(key, np.inf))
    rows = [k[0] for k in w] + [k[1] for k in w]
    cols = [k[1] for k in w] + [k[0] for k in w]
    vals = list(w.values()) * 2
    g = coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    return shortest_path(g, method="D", directed=False)


@dataclass(frozen=True, eq=False)
class Ball:
    center: int
    radius: float
    members: tuple[int, ...]
    measure: float

    def mask(self, n: int) -> np.ndarray:
        m = np.zeros(n, dtype=bool)
        m[list(self.members)] = True
        return m

    def __contains__(self, x) -> bool:
        return x in self.members


def ball(space: Space, center: int, radius: float) -> Ball:
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    k = space.prefix_len(center, radius)
    members = tuple(sorted(int(i) for i in space.order[center, :k]))
    return Ball(int(center), float(radius), members, float(space.cum_mass[center, k - 1]))


def subset_ball(space: Space, center: int, radius: float, members) -> Ball:
    """A ball object whose member set is ``B(center, radius)`` intersected with ``members``."""
    keep = set(int(i) for i in members)
    full = ball(space, center, radius)
    mem = tuple(i for i in full.members if i in keep)
    return Ball(int(center), float(radius), mem, float(space.mass[list(mem)].sum()) if mem else 0.0)


# --------------------------------------------------------------------------
# doubling constants


@dataclass(frozen=True)
class DoublingReport:
    tau: float
    s: float
    value: float
    witness: tuple[Ball, Ball] | None = None
    mode: str = "grid"


def doubling_constant(space: Space, tau: float, s: float, mode: str = "grid") -> DoublingReport:
    """Smallest ``C`` with ``mu(B') <= C mu(B)`` for ``B`` of radius ``<= s``,
    ``B' ⊇ B`` of radius ``<= tau * r_B``.

    ``mode="grid"`` draws the radii of ``B`` from the pairwise distance values
    not exceeding ``s`` together with ``s`` itself.  This grid is not monotone
    in ``s`` (a radius can drop out when ``s`` grows).  ``mode="sup"`` takes
    the supremum over all real radii: on each interval on which the member set
    of ``B(x, r)`` is constant the ratio increases with ``r``, so the supremum
    is reached at the right end, where ``B'`` becomes an open ball.
    """
    if tau < 1:
        raise ValueError("tau must be >= 1")
    if not s > 0:
        raise ValueError("s must be positive")
    if mode not in ("grid", "sup"):
        raise ValueError(f"unknown mode {mode!r}")
    n = space.n
    if np.isinf(s):
        s = space.diameter
    # grid radii: every pairwise distance up to s, and s itself
    grid = np.unique(np.append(space.dist[space.dist <= s + TOL], s))
    # candidate B' radii (with open/closed flag) and the B prefix they pair with.
    # While B(x, r) keeps its members the ratio only grows with r, so each
    # member set needs just the largest admissible radius.
    cand_x, cand_k, cand_r, cand_R, cand_open = [], [], [], [], []
    for x in range(n):
        d = space.sorted_dist[x]
        for e in space.ball_ends(x, s):
            nxt = d[e] if e < n else np.inf
            if mode == "grid":
                r, is_open = float(grid[np.searchsorted(grid, nxt - TOL, side="left") - 1]), False
            elif nxt <= s + TOL:
                r, is_open = float(nxt), True
            else:
                r, is_open = float(s), False
            cand_x.append(x)
            cand_k.append(e)
            cand_r.append(r)
            cand_R.append(tau * r)
            cand_open.append(is_open)
    cand_R = np.asarray(cand_R)
    cand_open = np.asarray(cand_open)
    # measure of B(y, R) (closed) / {d(y, .) < R} (open) for every y and candidate
    thresh = np.where(cand_open, cand_R - TOL, cand_R + TOL)
    meas = np.empty((n, len(cand_R)))
    for y in range(n):
        closed_idx = np.searchsorted(space.sorted_dist[y], cand_R + TOL, side="right")
        open_idx = np.searchsorted(space.sorted_dist[y], cand_R - TOL, side="left")
        idx = np.where(cand_open, open_idx, closed_idx)
        cm = np.concatenate([[0.0], space.cum_mass[y]])
        meas[y] = cm[idx]
    best, wit = 1.0, None
    j = 0
    for x in range(n):
        # farthest[y, k-1]: max distance from y to the k points nearest x
        farthest = np.maximum.accumulate(space.dist[:, space.order[x]], axis=1)
        while j < len(cand_x) and cand_x[j] == x:
            k = cand_k[j]
            if cand_open[j]:
                inside = farthest[:, k - 1] < thresh[j]
            else:
                inside = farthest[:, k - 1] <= thresh[j]
            ratio = meas[inside, j].max() / space.cum_mass[x, k - 1]
            if ratio > best + TOL:
                y = int(np.flatnonzero(inside)[np.argmax(meas[inside, j])])
                best = float(ratio)
                wit = (x, cand_r[j], y, cand_R[j], bool(cand_open[j]), k)
            j += 1
    witness = None
    if wit is not None:
        x, r, y, R, is_open, k = wit
        outer_r = R
        if is_open:
            # largest distance from y strictly below R realises the open ball
            dy = space.sorted_dist[y]
            below = dy[dy < R - TOL]
            outer_r = float(below.max())
            r = max(space.sorted_dist[x, k - 1], outer_r / tau, float(space.dist[y, space.order[x, :k]].max()) / tau)
        witness = (ball(space, x, r), ball(space, y, outer_r))
    return DoublingReport(float(tau), float(s), best, witness, mode)


# --------------------------------------------------------------------------
# midpoint property


@dataclass(frozen=True)
class MidpointReport:
    beta: float
    R0: float
    holds: bool
    violating_pair: tuple[int, int] | None = None


def check_midpoint(space: Space, beta: float, R0: float = 0.0) -> MidpointReport:
    """Approximate midpoint property: every pair farther apart than ``R0`` has a
    point ``z`` with ``d(x, z) < beta d(x, y)`` and ``d(y, z) < beta d(x, y)``."""
    d = space.dist
    for x in range(space.n):
        for y in range(x + 1, space.n):
            dxy = d[x, y]
            if dxy <= R0 + TOL:
                continue
            lim = beta * dxy - TOL
            if not np.any((d[x] < lim) & (d[y] < lim)):
                return MidpointReport(beta, R0, False, (x, y))
    return MidpointReport(beta, R0, True)


# --------------------------------------------------------------------------
# discretisations


@dataclass(frozen=True, eq=False)
class Net:
    eta: float
    centers: tuple[int, ...]
    mult_point: np.ndarray = field(repr=False)

    def mult_set(self, space: Space, points) -> int:
        """Number of centres ``z`` with ``B_{2 eta}(z)`` meeting ``points``."""
        pts = list(points)
        if not pts:
            return 0
        near = space.dist[np.ix_(list(self.centers), pts)].min(axis=1)
        return int(np.sum(near <= 2 * self.eta + TOL))

    def centers_meeting(self, space: Space, points) -> list[int]:
        pts = list(points)
        near = space.dist[np.ix_(list(self.centers), pts)].min(axis=1)
        return [z for z, dz in zip(self.centers, near) if dz <= 2 * self.eta + TOL]


def build_net(space: Space, eta: float, seed_centers=()) -> Net:
    """Greedy maximal ``eta``-separated set, scanning points in ascending index.

    ``seed_centers`` (already ``eta``-separated) are accepted first; this is how
    nested nets are built for dyadic cubes.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    centers = list(seed_centers)
    mind = space.dist[centers].min(axis=0) if centers else np.full(space.n, np.inf)
    for x in range(space.n):
        if mind[x] > eta + TOL:
            centers.append(x)
            mind = np.minimum(mind, space.dist[x])
    centers = tuple(centers)
    mult = np.sum(space.dist[list(centers)] <= 2 * eta + TOL, axis=0)
    mult.setflags(write=False)
    return Net(float(eta), centers, mult)


@dataclass(frozen=True)
class CoveringReport:
    mult_point: np.ndarray
    bound: float
    holds: bool


def covering_multiplicity(space: Space, net: Net, c: float) -> CoveringReport:
    """Point multiplicities of the cover ``{B_c(z)}`` against ``D_{12, c/4}``."""
    if abs(net.eta - c / 2) > TOL:
        raise ValueError(f"net has eta={net.eta}, expected c/2={c / 2}")
    bound = doubling_constant(space, 12.0, c / 4).value
    return CoveringReport(net.mult_point, bound, bool(net.mult_point.max() <= bound + TOL))


@dataclass(frozen=True)
class BallCountReport:
    count: int
    bound: float
    holds: bool


def ball_multiplicity(space: Space, net: Net, c: float, center: int, b: float) -> BallCountReport:
    """``#M_B`` for ``B = B(center, b)`` against ``D_{4(b/c)+8, c/4} D_{12, c/4}``."""
    if abs(net.eta - c / 2) > TOL:
        raise ValueError(f"net has eta={net.eta}, expected c/2={c / 2}")
    count = net.mult_set(space, ball(space, center, b).members)
    bound = (doubling_constant(space, 4 * b / c + 8, c / 4).value
             * doubling_constant(space, 12.0, c / 4).value)
    return BallCountReport(count, bound, count <= bound + TOL)


def lp_norm(space: Space, f, p: float) -> float:
    """``(sum |f|^p mass)^{1/p}``; the max-norm at ``p = inf``."""
    f = np.abs(np.asarray(f, dtype=float))
    if p < 1:
        raise ValueError("p must be >= 1")
    if np.isinf(p):
        return float(f.max()) if f.size else 0.0
    return float((f ** p @ space.mass) ** (1.0 / p))


def dual_exponent_inv(p: float) -> float:
    """``1/p'`` for the conjugate exponent ``p'`` of ``p``."""
    return 1.0 if np.isinf(p) else 1.0 - 1.0 / p
