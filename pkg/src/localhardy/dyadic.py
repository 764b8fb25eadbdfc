"""Christ-style dyadic cubes on a finite space and Whitney coverings inside a cube."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .mmspace import TOL, Ball, Space, build_net, doubling_constant, subset_ball


@dataclass(frozen=True, eq=False)
class Cube:
    level: int
    center: int
    members: tuple[int, ...]
    measure: float

    def __contains__(self, x) -> bool:
        return x in self.member_set

    @cached_property
    def member_set(self) -> frozenset:
        return frozenset(self.members)


@dataclass(frozen=True, eq=False)
class CubeSystem:
    space: Space
    delta: float
    a0: float
    a1: float
    levels: dict[int, tuple[Cube, ...]]
    link: dict[tuple[int, int], int] = field(default_factory=dict)

    @property
    def k_min(self) -> int:
        return min(self.levels)

    @property
    def k_max(self) -> int:
        return max(self.levels)

    def cube_of(self, k: int, x: int) -> Cube:
        for q in self.levels[k]:
            if x in q:
                return q
        raise KeyError(f"point {x} lies in no cube of level {k}")

    def parent(self, k: int, index: int) -> Cube:
        """Level ``k - 1`` cube containing cube ``index`` of level ``k``."""
        return self.levels[k - 1][self.link[(k, index)]]

    def to_document(self) -> dict:
        return {
            "delta": self.delta,
            "a0": self.a0,
            "a1": self.a1,
            "levels": {
                str(k): [{"center": q.center, "members": list(q.members)} for q in cubes]
                for k, cubes in sorted(self.levels.items())
            },
        }


def cube_system_from_document(space: Space, doc: dict) -> CubeSystem:
    levels = {}
    for k, cubes in doc["levels"].items():
        levels[int(k)] = tuple(
            Cube(int(k), int(c["center"]), tuple(sorted(c["members"])),
                 float(space.mass[c["members"]].sum()))
            for c in cubes
        )
    return CubeSystem(space, float(doc["delta"]), float(doc["a0"]), float(doc["a1"]),
                      levels, _links(levels))


def default_levels(space: Space, delta: float) -> tuple[int, int]:
    """Smallest level range whose top is one cube and whose bottom is all singletons."""
    diam = max(space.diameter, TOL)
    k_min = math.floor(math.log(diam) / math.log(delta))
    while delta ** k_min < diam:
        k_min -= 1
    dmin = space.min_positive_distance if space.n > 1 else 1.0
    k_max = math.ceil(math.log(dmin) / math.log(delta))
    while delta ** k_max >= dmin:
        k_max += 1
    return k_min, max(k_max, k_min)


def build_cubes(space: Space, delta: float, k_min: int | None = None,
                k_max: int | None = None) -> CubeSystem:
    """Nested partitions from nested nets.

    Level ``k`` uses a ``delta**k``-net containing the level ``k - 1`` net.  The
    finest level is the preliminary nearest-centre partition; each coarser cube
    is the union of the finer cubes whose centres are nearest to its own centre
    (ties to the lowest centre index), so nesting is exact.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    lo, hi = default_levels(space, delta)
    k_min = lo if k_min is None else k_min
    k_max = hi if k_max is None else k_max
    if k_max < k_min:
        raise ValueError("k_max must be >= k_min")
    nets = {}
    seed: tuple[int, ...] = ()
    for k in range(k_min, k_max + 1):
        seed = build_net(space, delta ** k, seed_centers=seed).centers
        nets[k] = seed

    def nearest(centers, pts):
        cs = sorted(centers)
        # argmin returns the first minimum, so ties go to the lowest centre index
        return [cs[i] for i in np.argmin(space.dist[np.ix_(cs, list(pts))], axis=0)]

    owner = dict(zip(range(space.n), nearest(nets[k_max], range(space.n))))
    groups: dict[int, list[int]] = {}
    for x, z in owner.items():
        groups.setdefault(z, []).append(x)
    levels: dict[int, tuple[Cube, ...]] = {}
    levels[k_max] = _cubes(space, k_max, groups)
    for k in range(k_max - 1, k_min - 1, -1):
        finer = levels[k + 1]
        up = nearest(nets[k], [q.center for q in finer])
        groups = {}
        for q, z in zip(finer, up):
            groups.setdefault(z, []).extend(q.members)
        levels[k] = _cubes(space, k, groups)
    a0, a1 = _realized_constants(space, delta, levels)
    return CubeSystem(space, float(delta), a0, a1, levels, _links(levels))


def _cubes(space: Space, k: int, groups: dict[int, list[int]]) -> tuple[Cube, ...]:
    out = []
    for z in sorted(groups):
        mem = tuple(sorted(groups[z]))
        out.append(Cube(k, int(z), mem, float(space.mass[list(mem)].sum())))
    return tuple(out)


def _links(levels) -> dict[tuple[int, int], int]:
    link = {}
    for k in sorted(levels)[1:]:
        if k - 1 not in levels:
            continue
        where = {}
        for j, p in enumerate(levels[k - 1]):
            for x in p.members:
                where[x] = j
        for i, q in enumerate(levels[k]):
            link[(k, i)] = where.get(q.center, -1)
    return link


def inner_radius(space: Space, q: Cube) -> float:
    """A radius ``rho`` with ``B(z, rho) ⊆ Q``, just below the distance to the complement."""
    outside = np.ones(space.n, dtype=bool)
    outside[list(q.members)] = False
    if not outside.any():
        return math.inf
    gap = float(space.dist[q.center, outside].min())
    return gap * (1 - 1e-6)


def outer_radius(space: Space, q: Cube) -> float:
    return float(space.dist[q.center, list(q.members)].max())


def cube_diameter(space: Space, q: Cube) -> float:
    m = list(q.members)
    return float(space.dist[np.ix_(m, m)].max())


def _realized_constants(space, delta, levels) -> tuple[float, float]:
    a0, a1 = math.inf, 0.0
    for k, cubes in levels.items():
        for q in cubes:
            a0 = min(a0, inner_radius(space, q) / delta ** k)
            a1 = max(a1, max(outer_radius(space, q), cube_diameter(space, q)) / delta ** k)
    if math.isinf(a0):
        a0 = 1.0  # single-point space: every ball is the whole space
    if a1 <= 0:
        a1 = a0
    return float(a0), float(a1)


# --------------------------------------------------------------------------
# axioms


@dataclass(frozen=True)
class AxiomRow:
    axiom: str
    holds: bool
    detail: str = ""


def verify_cube_axioms(sys: CubeSystem) -> list[AxiomRow]:
    """Check the five dyadic-cube axioms; one row per axiom, failures carry a witness."""
    space = sys.space
    rows = []
    # (i) partition
    bad = ""
    for k, cubes in sorted(sys.levels.items()):
        count = np.zeros(space.n, dtype=int)
        for q in cubes:
            count[list(q.members)] += 1
        if np.any(count != 1):
            x = int(np.flatnonzero(count != 1)[0])
            bad = f"level {k}: point {x} lies in {count[x]} cubes"
            break
    rows.append(AxiomRow("partition", not bad, bad))
    # (ii) nesting and (iii) unique ancestor
    bad_nest, bad_parent = "", ""
    ks = sorted(sys.levels)
    for i, k in enumerate(ks):
        for l in ks[i + 1:]:
            for qf in sys.levels[l]:
                fs = set(qf.members)
                hits = 0
                for qc in sys.levels[k]:
                    cs = set(qc.members)
                    inter = fs & cs
                    if inter and not fs <= cs and not bad_nest:
                        bad_nest = f"level {l} cube at {qf.center} straddles level {k} cube at {qc.center}"
                    if fs <= cs:
                        hits += 1
                if hits != 1 and not bad_parent:
                    bad_parent = f"level {l} cube at {qf.center} has {hits} ancestors at level {k}"
    rows.append(AxiomRow("nesting", not bad_nest, bad_nest))
    rows.append(AxiomRow("unique_parent", not bad_parent, bad_parent))
    # (iv) diameter, (v) inner/outer balls
    bad_diam, bad_ball = "", ""
    for k, cubes in sorted(sys.levels.items()):
        scale = sys.delta ** k
        for q in cubes:
            if cube_diameter(space, q) > sys.a1 * scale + TOL and not bad_diam:
                bad_diam = f"level {k} cube at {q.center}: diameter {cube_diameter(space, q):.6g} > {sys.a1 * scale:.6g}"
            if q.center not in q and not bad_ball:
                bad_ball = f"level {k} cube does not contain its centre {q.center}"
                continue
            dz = space.dist[q.center]
            inner = set(np.flatnonzero(dz <= sys.a0 * scale + TOL).tolist())
            if not inner <= set(q.members) and not bad_ball:
                bad_ball = f"level {k} cube at {q.center}: inner ball leaves the cube"
            if np.any(dz[list(q.members)] > sys.a1 * scale + TOL) and not bad_ball:
                bad_ball = f"level {k} cube at {q.center}: cube leaves the outer ball"
    rows.append(AxiomRow("diameter", not bad_diam, bad_diam))
    rows.append(AxiomRow("inner_outer_balls", not bad_ball, bad_ball))
    return rows


# --------------------------------------------------------------------------
# cubes against balls


@dataclass(frozen=True)
class CubeBallReport:
    branch: str
    lhs: float
    rhs: float
    holds: bool
    constant: float = 1.0


def cube_ball_bounds(space: Space, sys: CubeSystem, q: Cube, b: Ball) -> CubeBallReport:
    """Compare ``mu(B ∩ Q)`` with ``mu(Q)`` (large balls) or ``D^{-1} mu(B)`` (small ones).

    The doubling constant ``D_{a1/(a0 delta), delta^k}`` is taken in ``sup``
    mode because ``B`` may have any real radius.
    """
    if b.center not in q:
        raise ValueError(f"ball centre {b.center} is not in the cube")
    k = q.level
    inter = float(space.mass[[x for x in b.members if x in q]].sum())
    if b.radius >= sys.a1 * sys.delta ** k - TOL:
        return CubeBallReport("equality", inter, q.measure, abs(inter - q.measure) <= TOL * max(1, q.measure))
    D = doubling_constant(space, sys.a1 / (sys.a0 * sys.delta), sys.delta ** k, mode="sup").value
    rhs = b.measure / D
    return CubeBallReport("lower", rhs, inter, rhs <= inter + TOL * max(1, inter), D)


# --------------------------------------------------------------------------
# Whitney covering


@dataclass(frozen=True, eq=False)
class WhitneyCover:
    cube: Cube
    open_set: tuple[int, ...]
    balls: tuple[Ball, ...]
    multiplicity: int

    def check(self, space: Space) -> dict[str, bool]:
        e = set(self.open_set)
        rest = set(self.cube.members) - e
        union = set().union(*(set(b.members) for b in self.balls)) if self.balls else set()
        meets = all(
            any(space.dist[b.center, y] <= 3 * b.radius + TOL for y in rest) for b in self.balls
        )
        return {"union": union == e, "meets_complement": meets}


def whitney_cover(space: Space, sys: CubeSystem, q: Cube, e) -> WhitneyCover:
    """Cover a proper subset ``E`` of ``Q`` by balls ``B(x, d(x, Q∖E)/3) ∩ Q``.

    Points are scanned in ascending index and a ball is kept only when its
    centre is not yet covered, so the union is exactly ``E``.
    """
    e = tuple(sorted(set(int(x) for x in e)))
    qs = set(q.members)
    if not e:
        raise ValueError("E must be nonempty")
    if not set(e) <= qs:
        raise ValueError("E must lie inside the cube")
    rest = sorted(qs - set(e))
    if not rest:
        raise ValueError("E must be a proper subset of the cube")
    covered = np.zeros(space.n, dtype=int)
    balls = []
    for x in e:
        if covered[x]:
            continue
        r = float(space.dist[x, rest].min()) / 3
        bq = subset_ball(space, x, r, qs)
        balls.append(bq)
        covered[list(bq.members)] += 1
    return WhitneyCover(q, e, tuple(balls), int(covered.max()))
