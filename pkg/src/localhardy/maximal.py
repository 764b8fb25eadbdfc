"""Maximal operators on a finite space, computed exactly by enumerating balls.

A function on the space is a plain float vector indexed by point.  "Supremum
over balls of radius at most b" is a maximum over the distinct centred balls
``B(x, r)``, ``0 <= r <= b``; the singleton ball is always one of them.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dyadic import Cube, CubeSystem, whitney_cover
from .mmspace import TOL, Space, doubling_constant

GOLDEN_TOL = 1e-10


def _radius(space: Space, b):
    return space.scale_unit if b is None else b


def _prefix_matrix(ends: np.ndarray, n: int) -> np.ndarray:
    return np.arange(n)[None, :] < ends[:, None]


def _ball_averages(space: Space, x: int, values: np.ndarray, radius: float):
    ends = space.ball_ends(x, radius)
    o = space.order[x]
    w = space.mass[o]
    cw = np.cumsum(w)
    cv = np.cumsum(values[o] * w)
    return ends, cv[ends - 1] / cw[ends - 1]


def _ball_oscillations(space: Space, x: int, f: np.ndarray, radius: float, q: float):
    """``(avg_B |f - f_B|^q)^{1/q}`` for each distinct centred ball ``B``."""
    ends = space.ball_ends(x, radius)
    o = space.order[x][: ends[-1]]
    v, w = f[o], space.mass[o]
    T = _prefix_matrix(ends, len(o))
    mu = T @ w
    mean = (T @ (v * w)) / mu
    dev = np.abs(v[None, :] - mean[:, None]) ** q
    return ends, ((T * dev) @ w / mu) ** (1.0 / q)


def hl_maximal_local(space: Space, f, radius=None) -> np.ndarray:
    """Centred maximal function of ``|f|`` over balls of radius at most ``radius``."""
    f = np.abs(np.asarray(f, dtype=float))
    r = _radius(space, radius)
    return np.array([_ball_averages(space, x, f, r)[1].max() for x in range(space.n)])


def sharp_maximal(space: Space, f, b=None, q: float = 1.0) -> np.ndarray:
    """Local sharp maximal function ``f^{#,q}_b``."""
    if q < 1:
        raise ValueError("q must be >= 1")
    f = np.asarray(f, dtype=float)
    r = _radius(space, b)
    return np.array([_ball_oscillations(space, x, f, r, q)[1].max() for x in range(space.n)])


def ball_power_average(space: Space, f, b=None, q: float = 1.0) -> np.ndarray:
    """``(avg_{B_b(x)} |f|^q)^{1/q}`` at every point."""
    f = np.abs(np.asarray(f, dtype=float)) ** q
    r = _radius(space, b)
    out = np.empty(space.n)
    for x in range(space.n):
        k = space.prefix_len(x, r)
        o = space.order[x][:k]
        out[x] = (f[o] @ space.mass[o] / space.cum_mass[x, k - 1]) ** (1.0 / q)
    return out


def n0(space: Space, f, b=None) -> np.ndarray:
    """Average of ``|f|`` over ``B_b(x)``."""
    return ball_power_average(space, f, b, 1.0)


def n_operator(space: Space, f) -> np.ndarray:
    """``Nf = f^# + N_0 f`` at the space's unit scale."""
    return sharp_maximal(space, f) + n0(space, f)


def modified_sharp_maximal(space: Space, f, q: float = 1.0, b=None) -> np.ndarray:
    """``N^q_b f = f^{#,q}_b + (avg_{B_b(x)} |f|^q)^{1/q}``."""
    return sharp_maximal(space, f, b, q) + ball_power_average(space, f, b, q)


def _best_constant_deviation(v: np.ndarray, w: np.ndarray, q: float) -> float:
    """``min_c (sum w |v - c|^q / sum w)^{1/q}``."""
    mu = w.sum()

    def obj(c):
        return (w @ np.abs(v - c) ** q) / mu

    mean = (v @ w) / mu
    if q == 1:
        s = np.argsort(v, kind="stable")
        cw = np.cumsum(w[s])
        c = v[s][np.searchsorted(cw, mu / 2 - TOL * mu)]
        return float(min(obj(c), obj(mean)))
    if q == 2:
        return float(np.sqrt(obj(mean)))
    lo, hi = float(v.min()), float(v.max())
    g = (np.sqrt(5) - 1) / 2
    a, b = hi - g * (hi - lo), lo + g * (hi - lo)
    fa, fb = obj(a), obj(b)
    while hi - lo > GOLDEN_TOL:
        if fa < fb:
            hi, b, fb = b, a, fa
            a = hi - g * (hi - lo)
            fa = obj(a)
        else:
            lo, a, fa = a, b, fb
            b = lo + g * (hi - lo)
            fb = obj(b)
    best = min(fa, fb, obj(mean), obj((lo + hi) / 2))
    return float(best ** (1.0 / q))


def s_sharp(space: Space, f, q: float = 1.0, b=None) -> np.ndarray:
    """``f^{s,q}``: like the sharp function but with the best constant in each ball."""
    if q < 1:
        raise ValueError("q must be >= 1")
    f = np.asarray(f, dtype=float)
    r = _radius(space, b)
    out = np.empty(space.n)
    for x in range(space.n):
        o = space.order[x]
        best = 0.0
        for e in space.ball_ends(x, r):
            best = max(best, _best_constant_deviation(f[o[:e]], space.mass[o[:e]], q))
        out[x] = best
    return out


# --------------------------------------------------------------------------
# operators restricted to a cube


def _noncentred(sub: Space, per_ball) -> np.ndarray:
    """Spread per-ball values to every member: ``sup`` over balls containing the point."""
    out = np.zeros(sub.n)
    for y in range(sub.n):
        ends, vals = per_ball(y)
        suffix = np.maximum.accumulate(vals[::-1])[::-1]
        pos = np.arange(ends[-1])
        got = suffix[np.searchsorted(ends, pos, side="right")]
        o = sub.order[y][: ends[-1]]
        out[o] = np.maximum(out[o], got)
    return out


def _cube_space(space: Space, q: Cube) -> Space:
    return space.restrict(q.members)


def cube_maximal(space: Space, q: Cube, f) -> np.ndarray:
    """Noncentred maximal function on ``Q``; values aligned with ``q.members``."""
    sub = _cube_space(space, q)
    fq = np.abs(np.asarray(f, dtype=float)[list(q.members)])
    return _noncentred(sub, lambda y: _ball_averages(sub, y, fq, np.inf))


def cube_maximal_centred(space: Space, q: Cube, f) -> np.ndarray:
    """Centred maximal function on ``Q`` (all radii); values aligned with ``q.members``."""
    sub = _cube_space(space, q)
    fq = np.abs(np.asarray(f, dtype=float)[list(q.members)])
    return np.array([_ball_averages(sub, y, fq, np.inf)[1].max() for y in range(sub.n)])


def cube_sharp(space: Space, q: Cube, f) -> np.ndarray:
    """Noncentred sharp maximal function on ``Q``; values aligned with ``q.members``."""
    sub = _cube_space(space, q)
    fq = np.asarray(f, dtype=float)[list(q.members)]
    return _noncentred(sub, lambda y: _ball_oscillations(sub, y, fq, np.inf, 1.0))


def cube_doubling(space: Space, q: Cube, tau: float = 2.0) -> float:
    """Doubling constant ``D^Q_{tau, inf}`` of the cube as a space in its own right."""
    sub = _cube_space(space, q)
    if sub.n == 1:
        return 1.0
    return doubling_constant(sub, tau, np.inf).value


def level_doubling(space: Space, sys: CubeSystem, k: int, tau: float = 2.0) -> float:
    """``C_{tau,k}``: the largest cube doubling constant among level-``k`` cubes."""
    return max(cube_doubling(space, q, tau) for q in sys.levels[k])


def product_level_constant(space: Space, sys: CubeSystem, k: int, tau: float = 2.0) -> float:
    """The product bound ``D_{tau, a1 delta^k} D_{a1/(a0 delta), delta^k}``."""
    s = sys.delta ** k
    return (doubling_constant(space, tau, sys.a1 * s, mode="sup").value
            * doubling_constant(space, sys.a1 / (sys.a0 * sys.delta), s, mode="sup").value)


def weak_type_ratio(space: Space, q: Cube, f) -> float:
    """``sup_lambda lambda mu{M^Q f > lambda} / ||f||_{L^1(Q)}`` for one function."""
    fq = np.asarray(f, dtype=float)[list(q.members)]
    w = space.mass[list(q.members)]
    l1 = np.abs(fq) @ w
    if l1 <= 0:
        return 0.0
    m = cube_maximal(space, q, f)
    # lambda just below each value v of M^Q f sees the set {M^Q f >= v}
    best = 0.0
    for v in np.unique(m):
        best = max(best, v * w[m >= v - TOL * max(1, v)].sum())
    return float(best / l1)


def weak_type_constant(space: Space, q: Cube, family) -> float:
    """Measured weak-type (1,1) constant of ``M^Q`` over a family of functions."""
    return max([1.0] + [weak_type_ratio(space, q, f) for f in family])


def weak_type_family(space: Space, q: Cube) -> list[np.ndarray]:
    """Spikes at every point of ``Q`` and indicators of ``Q`` itself."""
    fam = []
    for x in q.members:
        e = np.zeros(space.n)
        e[x] = 1.0
        fam.append(e)
    ind = np.zeros(space.n)
    ind[list(q.members)] = 1.0
    fam.append(ind)
    return fam


# --------------------------------------------------------------------------
# good-lambda


@dataclass(frozen=True, eq=False)
class LevelSets:
    lambdas: np.ndarray
    beta: float
    gamma: float
    lambda0: float
    weak_constant: float
    level_constant: float
    E: list = field(repr=False)          # E_lambda as boolean masks over q.members
    E_beta: list = field(repr=False)     # E_{beta lambda}
    F_gamma: list = field(repr=False)    # F_{gamma lambda}
    lhs: np.ndarray = field(repr=False)  # mu(E_{beta lambda} ∩ F_{gamma lambda})
    base: np.ndarray = field(repr=False)  # mu(E_lambda)
    A: float = 0.0
    whitney_multiplicity: int = 0

    def holds(self) -> bool:
        rhs = self.A * (self.gamma / self.beta) * self.base
        return bool(np.all(self.lhs <= rhs + TOL * np.maximum(1, rhs)))


def good_lambda_sets(space: Space, sys: CubeSystem, q: Cube, f, beta: float, gamma: float,
                     grid=None, family=None) -> LevelSets:
    """Level sets of ``M^Q f`` and ``f^{#,Q}`` and the smallest ``A`` with
    ``mu(E_{beta l} ∩ F_{gamma l}) <= A (gamma/beta) mu(E_l)`` on the grid."""
    f = np.asarray(f, dtype=float)
    C2 = cube_doubling(space, q, 2.0)
    if not beta > 2 * C2:
        raise ValueError(f"beta={beta} must exceed 2 C_2 = {2 * C2}")
    w = space.mass[list(q.members)]
    m = cube_maximal(space, q, f)
    sh = cube_sharp(space, q, f)
    fam = list(weak_type_family(space, q)) if family is None else list(family)
    C0 = weak_type_constant(space, q, fam + [f])
    l1 = float(np.abs(f[list(q.members)]) @ w)
    lam0 = C0 * l1 / q.measure
    if grid is None:
        grid = default_lambda_grid(m, sh, beta, gamma, lam0)
    grid = np.asarray([g for g in np.asarray(grid, dtype=float) if g > lam0 * (1 + 1e-12)])
    if grid.size == 0:
        raise ValueError("no grid point lies above lambda_0")
    E, Eb, Fg, lhs, base = [], [], [], [], []
    A, K0 = 0.0, 0
    for lam in grid:
        e = m > lam
        eb = m > beta * lam
        fg = sh <= gamma * lam
        E.append(e)
        Eb.append(eb)
        Fg.append(fg)
        lhs.append(float(w[eb & fg].sum()))
        base.append(float(w[e].sum()))
        if base[-1] > 0:
            A = max(A, lhs[-1] * beta / (gamma * base[-1]))
            if e.sum() < len(e):
                pts = [x for x, t in zip(q.members, e) if t]
                K0 = max(K0, whitney_cover(space, sys, q, pts).multiplicity)
    return LevelSets(grid, beta, gamma, lam0, C0, C2, E, Eb, Fg,
                     np.asarray(lhs), np.asarray(base), float(A), K0)


def default_lambda_grid(m, sh, beta, gamma, lam0) -> np.ndarray:
    """Grid points where one of the three level sets changes, plus a geometric sweep."""
    pts = [v / beta * (1 - 1e-9) for v in np.unique(m)]
    pts += [v * (1 - 1e-9) for v in np.unique(m)]
    pts += [v / gamma for v in np.unique(sh) if v > 0]
    top = max(float(np.max(m)), lam0 * 2, TOL)
    pts += list(np.geomspace(max(lam0, TOL) * (1 + 1e-6), top, 16))
    return np.unique(np.asarray(pts))
