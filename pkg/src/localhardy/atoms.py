"""Atoms, ions and their explicit decompositions.

Norms and integrals are taken against the point masses of the space.  An atom
at scale ``b`` is *standard* (support ball of radius at most ``b``, zero
integral) or *global* (support ball of radius exactly ``b``, no cancellation).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .mmspace import (TOL, Ball, Space, ball, build_net, doubling_constant,
                      dual_exponent_inv, lp_norm)

CANCEL_TOL = 1e-9

Kind = Literal["standard", "global"]


@dataclass(frozen=True, eq=False)
class Atom:
    values: np.ndarray
    support: Ball
    p: float
    scale: float
    kind: Kind = "standard"


@dataclass(frozen=True, eq=False)
class Ion:
    values: np.ndarray
    support: Ball
    p: float
    alpha: float


@dataclass(frozen=True)
class Certificate:
    holds: bool
    slack: dict[str, float]

    def __bool__(self) -> bool:
        return self.holds


@dataclass(eq=False)
class Decomposition:
    terms: list[tuple[float, Atom]]
    target: np.ndarray
    info: dict = field(default_factory=dict)

    @property
    def coefficient_sum(self) -> float:
        return float(sum(abs(lam) for lam, _ in self.terms))

    def reconstruct(self) -> np.ndarray:
        out = np.zeros_like(self.target, dtype=float)
        for lam, a in self.terms:
            out = out + lam * a.values
        return out

    def residual(self) -> float:
        return float(np.max(np.abs(self.reconstruct() - self.target), initial=0.0))

    def to_document(self) -> list[dict]:
        return [
            {
                "lambda": lam,
                "center": a.support.center,
                "radius": a.support.radius,
                "kind": a.kind,
                "values": {int(i): float(a.values[i]) for i in np.flatnonzero(a.values)},
            }
            for lam, a in self.terms
        ]


def size_bound(b: Ball, p: float) -> float:
    """``mu(B)^{-1/p'}`` (``mu(B)^{-1}`` when ``p = inf``)."""
    return b.measure ** -dual_exponent_inv(p)


def _support_and_size(space: Space, values, b: Ball, p: float) -> dict[str, float]:
    v = np.asarray(values, dtype=float)
    outside = ~b.mask(space.n)
    scale = max(1.0, float(np.abs(v).max(initial=0.0)))
    bound = size_bound(b, p)
    return {
        "support": -float(np.abs(v[outside]).max(initial=0.0)) / scale,
        "size": (bound - lp_norm(space, v, p)) / max(1.0, bound),
    }


def validate_atom(space: Space, values, b: Ball, p: float, scale: float,
                  kind: Kind = "standard") -> Certificate:
    """Check support, size, radius and (standard atoms) cancellation.

    Each slack is nonnegative exactly when its condition holds.
    """
    if not (p > 1):
        raise ValueError("p must lie in (1, inf]")
    slack = _support_and_size(space, values, b, p)
    if kind == "standard":
        slack["radius"] = scale - b.radius
        v = np.asarray(values, dtype=float)
        l1 = float(np.abs(v) @ space.mass)
        slack["cancellation"] = CANCEL_TOL * l1 - abs(float(v @ space.mass))
    elif kind == "global":
        slack["radius"] = -abs(b.radius - scale)
    else:
        raise ValueError(f"unknown atom kind {kind!r}")
    holds = all(s >= -TOL for s in slack.values())
    return Certificate(holds, slack)


def validate_ion(space: Space, values, b: Ball, p: float, alpha: float) -> Certificate:
    """Size condition plus ``|int g| <= r_B^alpha``."""
    if not (p > 1):
        raise ValueError("p must lie in (1, inf]")
    slack = _support_and_size(space, values, b, p)
    integral = abs(float(np.asarray(values, dtype=float) @ space.mass))
    slack["integral"] = b.radius ** alpha - integral
    return Certificate(all(s >= -TOL for s in slack.values()), slack)


def make_atom(space: Space, values, b: Ball, p: float, scale: float,
              kind: Kind) -> tuple[float, Atom]:
    """Normalise ``values`` (supported in ``b``) to an atom; returns ``(lambda, atom)``."""
    v = np.asarray(values, dtype=float)
    lam = lp_norm(space, v, p) / size_bound(b, p)
    if lam == 0:
        return 0.0, Atom(v, b, p, scale, kind)
    return lam, Atom(v / lam, b, p, scale, kind)


def _require(cert: Certificate, what: str) -> None:
    if not cert.holds:
        bad = {k: v for k, v in cert.slack.items() if v < -TOL}
        raise ValueError(f"invalid {what}: {bad}")


def validate(space: Space, a: Atom) -> Certificate:
    return validate_atom(space, a.values, a.support, a.p, a.scale, a.kind)


# --------------------------------------------------------------------------
# economical decomposition


def economical_decompose(space: Space, a: Atom, c: float) -> Decomposition:
    """Split an atom at scale ``b`` into global atoms at the smaller scale ``c``.

    Uses the partition of unity ``psi_j = 1_{B_j} / sum_k 1_{B_k}`` over the
    radius-``c`` balls centred at the points of a ``c/2``-net near the support.
    """
    if not c > 0:
        raise ValueError("c must be positive")
    _require(validate(space, a), "atom")
    B = a.support
    net = build_net(space, c / 2)
    centers = net.centers_meeting(space, B.members)
    balls = [ball(space, z, c) for z in centers]
    ind = np.array([bj.mask(space.n) for bj in balls], dtype=float)
    cover = ind.sum(axis=0)
    bmask = B.mask(space.n)
    if np.any(cover[bmask] == 0):
        raise AssertionError("net balls fail to cover the support ball")
    cover[cover == 0] = 1.0
    terms = []
    for bj, row in zip(balls, ind):
        piece = a.values * row / cover
        lam, atom = make_atom(space, piece, bj, a.p, c, "global")
        if lam > 0:
            terms.append((lam, atom))
    ip = dual_exponent_inv(a.p)
    D12 = doubling_constant(space, 12.0, c / 4).value
    big = ball(space, B.center, B.radius + 2 * c)
    ratio = big.measure / B.measure
    info = {
        "multiplicity": int(cover[bmask].max()),
        "covering_constant": D12,
        "bound": (D12 * ratio) ** ip,
    }
    if B.radius > 0:
        D = doubling_constant(space, (B.radius + 2 * c) / B.radius, a.scale, mode="sup").value
        info["bound_D"] = (D12 * D) ** ip
    return Decomposition(terms, np.array(a.values, dtype=float), info)


# --------------------------------------------------------------------------
# change of scale


def rescale_atom(space: Space, a: Atom, b: float) -> tuple[Atom, float]:
    """View an atom at scale ``c`` as ``coefficient * (atom at scale b)``, ``b >= c``."""
    c = a.scale
    if b < c - TOL:
        raise ValueError("target scale must not be smaller than the atom's scale")
    _require(validate(space, a), "atom")
    B = a.support
    big = ball(space, B.center, B.radius * b / c)
    coef = (big.measure / B.measure) ** dual_exponent_inv(a.p)
    return Atom(a.values / coef, big, a.p, b, a.kind), float(coef)


def rescale_bound(space: Space, c: float, b: float, p: float) -> float:
    """``D_{b/c, c}^{1/p'}``."""
    return doubling_constant(space, b / c, c, mode="sup").value ** dual_exponent_inv(p)


# --------------------------------------------------------------------------
# ions


def ion_to_atoms(space: Space, g: Ion, b: float) -> Decomposition:
    """Write a ``(p, alpha)``-ion supported in a ball of radius ``<= b`` as atoms at scale ``b``.

    ``g = a + h`` with ``a`` of zero integral and ``h = 1_B/mu(B) int g``; when
    ``r_B < b`` the second part telescopes over the dilates ``2^i B``.
    """
    _require(validate_ion(space, g.values, g.support, g.p, g.alpha), "ion")
    B = g.support
    if B.radius > b + TOL:
        raise ValueError("ion support radius exceeds the scale")
    p, ip = g.p, dual_exponent_inv(g.p)
    v = np.asarray(g.values, dtype=float)
    integral = float(v @ space.mass)
    if abs(integral) <= 1e-12 * float(np.abs(v) @ space.mass):
        integral = 0.0
    bmask = B.mask(space.n).astype(float)
    h = bmask / B.measure * integral
    terms: list[tuple[float, Atom]] = []
    bounds = {}

    def add(lam_atom):
        lam, atom = lam_atom
        if lam > 0:
            terms.append((lam, atom))
        return lam

    def weight(piece, bb):
        return lp_norm(space, piece, p) * bb.measure ** ip

    lam_a, atom_a = make_atom(space, v - h, B, p, b, "standard")
    rest = np.zeros(space.n)
    if lam_a > 0 and validate(space, atom_a).holds:
        add((lam_a, atom_a))
    else:
        # g is constant on B up to rounding; the remainder rides on the global piece below
        rest, lam_a = v - h, 0.0
    bounds["a"] = 1 + B.radius ** g.alpha
    info = {"N": None, "piece_checks": [], "absorbed": bool(np.any(rest))}
    r_alpha = B.radius ** g.alpha
    if integral == 0:
        pass
    elif B.radius == 0 or abs(B.radius - b) <= TOL:
        # a one-point ball only admits a rounding-level integral; it is parked on B(c, b)
        bb = ball(space, B.center, b)
        add(make_atom(space, h + rest, bb, p, b, "global"))
        bounds["h"] = weight(h, bb) + weight(rest, bb)
    else:
        N = math.floor(math.log2(b / B.radius))
        info["N"] = N
        dil = [ball(space, B.center, 2 ** i * B.radius) for i in range(N + 2)]
        ind = [d.mask(space.n) / d.measure for d in dil]
        D2 = doubling_constant(space, 2.0, b / 2, mode="sup").value
        for i in range(1, N + 1):
            hi = (ind[i - 1] - ind[i]) * integral
            lim = 2 ** (1 / p if not np.isinf(p) else 0) * D2 ** ip * r_alpha * dil[i].measure ** -ip
            info["piece_checks"].append((i, lp_norm(space, hi, p), lim))
            add(make_atom(space, hi, dil[i], p, b, "standard"))
            bounds[f"h{i}"] = lim * dil[i].measure ** ip
        # the last two pieces live at scale 2b; bring them down to scale b
        last = (ind[N] - ind[N + 1]) * integral
        top = ind[N + 1] * integral
        big = ball(space, B.center, 2 * b)
        for name, piece, extra, bb, kind in (("h_last", last, np.zeros(space.n), dil[N + 1], "standard"),
                                             ("h_top", top, rest, big, "global")):
            lam, atom = make_atom(space, piece + extra, bb, p, 2 * b, kind)
            if lam == 0:
                continue
            sub = economical_decompose(space, atom, b)
            for mu, at in sub.terms:
                terms.append((lam * mu, at))
            bounds[name] = (weight(piece, bb) + weight(extra, bb)) * sub.info["bound"]
    info["bounds"] = bounds
    info["bound"] = float(sum(bounds.values()))
    info["lambda_a"] = lam_a
    return Decomposition(terms, v.copy(), info)


# --------------------------------------------------------------------------
# constructive decomposition of an arbitrary function


def greedy_atomic_decomposition(space: Space, f, p: float = np.inf) -> Decomposition:
    """An explicit decomposition of ``f`` into ``p``-atoms at the unit scale.

    Candidates: ``f`` itself as one standard atom (zero integral, support in a
    ball of radius ``<= 1``), as one global atom on some ``B(x, 1)``, or as a
    global atom on the smallest ball of radius ``>= 1`` around its support,
    split by :func:`economical_decompose`.  The cheapest candidate wins.
    """
    f = np.asarray(f, dtype=float)
    one = space.scale_unit
    supp = np.flatnonzero(f)
    if supp.size == 0:
        return Decomposition([], f.copy(), {"route": "zero"})
    reach = space.dist[:, supp].max(axis=1)
    l1 = float(np.abs(f) @ space.mass)
    candidates = []
    if abs(float(f @ space.mass)) <= CANCEL_TOL * l1 and reach.min() <= one + TOL:
        for x in np.flatnonzero(reach <= one + TOL):
            b = ball(space, int(x), float(reach[x]))
            lam, a = make_atom(space, f, b, p, one, "standard")
            candidates.append((lam, "standard", [(lam, a)]))
    if reach.min() <= one + TOL:
        for x in np.flatnonzero(reach <= one + TOL):
            b = ball(space, int(x), one)
            lam, a = make_atom(space, f, b, p, one, "global")
            candidates.append((lam, "global", [(lam, a)]))
    else:
        x = int(np.argmin(reach))
        r0 = float(reach[x])
        lam, a = make_atom(space, f, ball(space, x, r0), p, r0, "global")
        sub = economical_decompose(space, a, one)
        terms = [(lam * mu, at) for mu, at in sub.terms]
        candidates.append((sum(abs(t[0]) for t in terms), "economical", terms))
    total, route, terms = min(candidates, key=lambda c: c[0])
    return Decomposition(terms, f.copy(), {"route": route})


# --------------------------------------------------------------------------
# random samples


def _random_ball(space: Space, rng: np.random.Generator, b: float, exact: bool) -> Ball:
    x = int(rng.integers(space.n))
    if exact:
        return ball(space, x, b)
    radii = np.unique(space.dist[x][space.dist[x] <= b + TOL])
    r = float(rng.choice(np.append(radii, b))) if rng.random() < 0.7 else float(rng.uniform(0, b))
    return ball(space, x, min(r, b))


def random_atom(space: Space, rng: np.random.Generator, p: float = np.inf, b: float = 1.0,
                kind: Kind | None = None, fill: float | None = None) -> Atom:
    """A random atom; ``fill`` is the fraction of the size bound used (random if omitted)."""
    kind = kind or ("standard" if rng.random() < 0.6 else "global")
    for _ in range(100):
        B = _random_ball(space, rng, b, kind == "global")
        if kind == "global" or len(B.members) >= 2:
            break
    else:
        kind, B = "global", ball(space, int(rng.integers(space.n)), b)
    idx = list(B.members)
    v = np.zeros(space.n)
    v[idx] = rng.normal(size=len(idx))
    if kind == "standard":
        w = space.mass[idx]
        v[idx] -= (v[idx] @ w) / w.sum()
    norm = lp_norm(space, v, p)
    if norm == 0:
        return random_atom(space, rng, p, b, kind, fill)
    frac = fill if fill is not None else (1.0 if rng.random() < 0.5 else float(rng.uniform(0.1, 1)))
    v *= frac * size_bound(B, p) / norm
    return Atom(v, B, p, b, kind)


def random_ion(space: Space, rng: np.random.Generator, p: float = np.inf, b: float = 1.0,
               alpha: float = 1.0) -> Ion:
    """A random ion: random values under the size bound with the integral clipped to ``r_B^alpha``."""
    B = _random_ball(space, rng, b, rng.random() < 0.3)
    idx = list(B.members)
    v = np.zeros(space.n)
    v[idx] = rng.normal(size=len(idx)) + rng.normal()
    v *= float(rng.uniform(0.2, 1)) * size_bound(B, p) / max(lp_norm(space, v, p), 1e-300)
    integral = float(v @ space.mass)
    cap = B.radius ** alpha * float(rng.uniform(0, 1))
    if abs(integral) > cap:
        w = space.mass[idx]
        # move the integral toward the cap by removing a constant, then restore the size bound
        v[idx] -= (integral - np.sign(integral) * cap) / w.sum()
        norm = lp_norm(space, v, p)
        if norm > size_bound(B, p):
            v *= size_bound(B, p) / norm
    return Ion(v, B, p, alpha)
