"""Lebesgue, bmo and local Hardy norms.

The h1 norm is the gauge of the convex hull of the ``inf``-atoms at the unit
scale.  By finite-dimensional duality it equals ``max int f g`` over the ``g``
whose pairing with every atom is at most one, which is a linear program.
"""
from __future__ import annotations

import itertools
import weakref
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from . import atoms as _atoms
from .lp import LpError, LpProblem, solve
from .maximal import ball_power_average, sharp_maximal
from .mmspace import Space, lp_norm

__all__ = [
    "lp_norm", "BmoReport", "bmo_norm", "dual_constraint_balls", "h1_dual_problem",
    "h1_norm_dual", "dual_gauge", "h1_norm_oracle", "H1Report", "duality_sandwich",
    "h1_norm_p",
]


@dataclass(frozen=True, eq=False)
class BmoReport:
    q: float
    b: float
    norm: float
    argmax: int
    values: np.ndarray


def bmo_norm(space: Space, f, q: float = 1.0, b: float | None = None) -> BmoReport:
    """``max_x [f^{#,q}_b(x) + (avg_{B_b(x)} |f|^q)^{1/q}]``."""
    if q < 1:
        raise ValueError("q must be >= 1")
    b = space.scale_unit if b is None else b
    if not b > 0:
        raise ValueError("b must be positive")
    vals = sharp_maximal(space, f, b, q) + ball_power_average(space, f, b, q)
    i = int(np.argmax(vals))
    return BmoReport(q, b, float(vals[i]), i, vals)


# --------------------------------------------------------------------------
# the atom gauge as a linear program


_BALLS: "weakref.WeakKeyDictionary[Space, dict]" = weakref.WeakKeyDictionary()


def _ball_tables(space: Space, b: float | None):
    """Cached ``(standard, glob, membership matrix of standard)`` for scale ``b``."""
    b = space.scale_unit if b is None else b
    per = _BALLS.setdefault(space, {})
    if b not in per:
        seen = {}
        for x in range(space.n):
            o = space.order[x]
            for e in space.ball_ends(x, b):
                if e >= 2:
                    seen.setdefault(tuple(sorted(int(v) for v in o[:e])), None)
        standard = sorted(seen)
        glob = [tuple(sorted(int(v) for v in space.order[x][: space.prefix_len(x, b)]))
                for x in range(space.n)]
        masks = np.zeros((len(standard), space.n), dtype=bool)
        for k, members in enumerate(standard):
            masks[k, list(members)] = True
        per[b] = (standard, glob, masks)
    return per[b]


def dual_constraint_balls(space: Space, b: float | None = None):
    """Distinct member sets of balls of radius ``<= b`` with two or more points,
    and the balls ``B(x, b)`` (one per point, possibly repeated)."""
    standard, glob, _ = _ball_tables(space, b)
    return list(standard), list(glob)


def h1_dual_problem(space: Space, f, b: float | None = None, standard=None) -> LpProblem:
    """``max sum f g mass`` over ``g`` pairing to at most one with every ``inf``-atom.

    Variables: ``g`` (free), ``u >= |g|``, and per standard ball a free centre
    ``c_B`` with ``t_{B,x} >= |g_x - c_B|``.  ``standard`` restricts the
    standard balls to a working subset.
    """
    f = np.asarray(f, dtype=float)
    n, m = space.n, space.mass
    all_standard, glob = dual_constraint_balls(space, b)
    standard = all_standard if standard is None else list(standard)
    nv = 2 * n + sum(1 + len(s) for s in standard)
    ri, ci, vals, rhs = [], [], [], []

    def add_row(cols, coefs, value):
        r = len(rhs)
        ri.extend([r] * len(cols))
        ci.extend(cols)
        vals.extend(coefs)
        rhs.append(value)

    for x in range(n):  # |g_x| <= u_x
        add_row([x, n + x], [1.0, -1.0], 0.0)
        add_row([x, n + x], [-1.0, -1.0], 0.0)
    for members in dict.fromkeys(glob):
        idx = list(members)
        add_row([n + y for y in idx], m[idx].tolist(), float(m[idx].sum()))
    k = 2 * n
    bounds = [(None, None)] * n + [(0.0, None)] * n
    for members in standard:
        idx = list(members)
        cb, ts = k, list(range(k + 1, k + 1 + len(idx)))
        for y, t in zip(idx, ts):  # |g_y - c_B| <= t
            add_row([y, cb, t], [1.0, -1.0, -1.0], 0.0)
            add_row([y, cb, t], [-1.0, 1.0, -1.0], 0.0)
        add_row(ts, m[idx].tolist(), float(m[idx].sum()))
        bounds += [(None, None)] + [(0.0, None)] * len(idx)
        k += 1 + len(idx)
    A = sparse.coo_matrix((vals, (ri, ci)), shape=(len(rhs), nv)).tocsr()
    c = np.zeros(nv)
    c[:n] = f * m
    return LpProblem(c, A, ("<=",) * len(rhs), np.array(rhs), tuple(bounds), True)


@dataclass(frozen=True, eq=False)
class GaugeResult:
    value: float
    g: np.ndarray


def _solve_dual(space, f, backend, b, standard):
    prob = h1_dual_problem(space, f, b, standard)
    res = solve(prob, backend)
    if not res.optimal:
        raise LpError(f"h1 dual problem reported {res.status} "
                      f"(size {prob.shape}, |f|_inf={np.abs(f).max():.3g})")
    return res.value, np.asarray(res.x[: space.n])


def h1_norm_dual_full(space: Space, f, backend: str = "highs", b: float | None = None,
                      generate: bool | None = None) -> GaugeResult:
    """Solve the dual program.

    With ``generate`` (the default for HiGHS) the standard-ball constraints are
    added lazily: solve on a working set, add every ball the current ``g``
    violates, repeat.  The final ``g`` is feasible for all balls, so the value
    is the optimum of the full program.
    """
    f = np.asarray(f, dtype=float)
    if not np.any(f):
        return GaugeResult(0.0, np.zeros(space.n))
    if generate is None:
        generate = backend == "highs"
    if not generate:
        return GaugeResult(*_solve_dual(space, f, backend, b, None))
    standard, _ = dual_constraint_balls(space, b)
    work: list = []
    active = np.zeros(len(standard), dtype=bool)
    while True:
        value, g = _solve_dual(space, f, backend, b, work)
        osc = _standard_oscillations(space, g, b)
        new = np.flatnonzero((osc > 1 + GEN_TOL) & ~active)
        if new.size == 0:
            return GaugeResult(value, g)
        # the worst offenders first keeps the working programs small
        new = new[np.argsort(-osc[new], kind="stable")][:GEN_BATCH]
        active[new] = True
        work = [standard[i] for i in np.flatnonzero(active)]


def h1_norm_dual(space: Space, f, backend: str = "highs", b: float | None = None) -> float:
    """The ``inf``-atom gauge of ``f`` at scale ``b`` (default the unit scale)."""
    return h1_norm_dual_full(space, f, backend, b).value


GEN_TOL = 1e-10
GEN_BATCH = 50


def _standard_oscillations(space: Space, g, b: float | None) -> np.ndarray:
    """``min_c avg_B |g - c|`` per standard member set (attained at a weighted median)."""
    _, _, masks = _ball_tables(space, b)
    if not len(masks):
        return np.zeros(0)
    m = space.mass
    g = np.asarray(g, dtype=float)
    order = np.argsort(g, kind="stable")
    w = masks[:, order] * m[order]
    total = w.sum(axis=1)
    first = np.argmax(np.cumsum(w, axis=1) >= (total / 2)[:, None], axis=1)
    med = g[order][first]
    return (masks * np.abs(g[None, :] - med[:, None])) @ m / total


def dual_gauge(space: Space, g, b: float | None = None) -> float:
    """``sup |int a g|`` over ``inf``-atoms at scale ``b``; ``g`` is dual-feasible iff this is ``<= 1``."""
    g = np.asarray(g, dtype=float)
    m = space.mass
    standard, glob = dual_constraint_balls(space, b)
    best = 0.0
    for members in set(glob):
        idx = list(members)
        best = max(best, float(np.abs(g[idx]) @ m[idx] / m[idx].sum()))
    if standard:
        best = max(best, float(_standard_oscillations(space, g, b).max()))
    return best


# --------------------------------------------------------------------------
# independent oracle: enumerate atom-hull vertices, solve the primal


def atom_vertices(space: Space, b: float | None = None) -> np.ndarray:
    """Vertices of every standard and global ``inf``-atom polytope at scale ``b``."""
    b = space.scale_unit if b is None else b
    n, m = space.n, space.mass
    standard, glob = dual_constraint_balls(space, b)
    verts = []
    for members in set(glob):
        idx = list(members)
        h = 1.0 / m[idx].sum()
        for signs in itertools.product((-1.0, 1.0), repeat=len(idx)):
            v = np.zeros(n)
            v[idx] = h * np.array(signs)
            verts.append(v)
    for members in standard:
        idx = list(members)
        h = 1.0 / m[idx].sum()
        # box vertices cut by the zero-integral hyperplane: all but one coordinate at a bound
        for j in range(len(idx)):
            others = idx[:j] + idx[j + 1:]
            for signs in itertools.product((-1.0, 1.0), repeat=len(others)):
                val = -h * (np.array(signs) @ m[others]) / m[idx[j]]
                if abs(val) <= h * (1 + 1e-12):
                    v = np.zeros(n)
                    v[others] = h * np.array(signs)
                    v[idx[j]] = val
                    verts.append(v)
    return np.unique(np.round(np.array(verts), 15), axis=0)


def h1_norm_oracle(space: Space, f, b: float | None = None) -> float:
    """``min sum |lambda|`` with ``f = sum lambda_v v`` over atom-hull vertices ``v``.

    Exponential in the ball sizes; meant for spaces of at most four points.
    """
    if space.n > 6:
        raise ValueError("vertex enumeration is limited to tiny spaces")
    f = np.asarray(f, dtype=float)
    V = atom_vertices(space, b).T
    k = V.shape[1]
    res = linprog(np.ones(2 * k), A_eq=np.hstack([V, -V]), b_eq=f,
                  bounds=[(0, None)] * (2 * k), method="highs")
    if res.status != 0:
        raise LpError(f"oracle primal failed: {res.message}")
    return float(res.fun)


# --------------------------------------------------------------------------
# sandwich between the dual value and a constructive decomposition


@dataclass(frozen=True, eq=False)
class H1Report:
    dual_value: float
    primal_upper: float
    sandwich_ok: bool
    exact_ok: bool
    ratio: float
    decomposition: _atoms.Decomposition


def duality_sandwich(space: Space, f, backend: str = "highs") -> H1Report:
    """``L(f)`` from the dual program, ``U(f)`` from the greedy decomposition.

    ``sandwich_ok`` is the pairing-constant claim ``L <= 4 U``; ``exact_ok`` the
    finite-dimensional fact ``L <= U`` (every decomposition bounds the gauge).
    """
    f = np.asarray(f, dtype=float)
    L = h1_norm_dual(space, f, backend)
    dec = _atoms.greedy_atomic_decomposition(space, f, np.inf)
    U = dec.coefficient_sum
    tol = 1e-7 * max(1.0, U)
    ratio = U / L if L > 0 else (1.0 if U == 0 else float("inf"))
    return H1Report(L, U, bool(np.isfinite(U) and L <= 4 * U + tol),
                    bool(L <= U + tol), ratio, dec)


# --------------------------------------------------------------------------
# finite-p gauges (recorded only)


def h1_norm_p(space: Space, f, p: float, b: float | None = None) -> float:
    """Gauge of the ``p``-atoms at scale ``b`` through its convex dual, solved with cvxpy."""
    import cvxpy as cp

    if not 1 < p < np.inf:
        raise ValueError("p must be finite and > 1")
    f = np.asarray(f, dtype=float)
    if not np.any(f):
        return 0.0
    pp = p / (p - 1)
    ip = 1 - 1 / p
    m = space.mass
    standard, glob = dual_constraint_balls(space, b)
    g = cp.Variable(space.n)
    cons = []
    for members in set(glob):
        idx = list(members)
        w = m[idx] ** (1 / pp)
        cons.append(cp.pnorm(cp.multiply(w, g[idx]), pp) <= m[idx].sum() ** ip)
    for members in standard:
        idx = list(members)
        w = m[idx] ** (1 / pp)
        c = cp.Variable()
        cons.append(cp.pnorm(cp.multiply(w, g[idx] - c), pp) <= m[idx].sum() ** ip)
    prob = cp.Problem(cp.Maximize((f * m) @ g), cons)
    prob.solve(solver=cp.CLARABEL)
    if prob.status not in ("optimal", "optimal_inaccurate"):
        raise LpError(f"p-gauge program reported {prob.status}")
    return float(prob.value)
