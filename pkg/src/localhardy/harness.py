"""Experiment harness: generate spaces, run named checks, write reports.

Every check returns rows ``(item, lhs, rhs, constant, exact)``.  A row holds
when ``lhs <= rhs + tol * max(1, |rhs|)``.  Exact rows encode inequalities
with explicit constants and fail the run; recorded rows estimate a constant
that is only known to exist, and their ``constant`` column carries the largest
ratio seen on the instance.
"""
from __future__ import annotations

import csv
import io
import json
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import __version__
from . import atoms as at
from . import maximal as mx
from . import norms as nm
from .dyadic import (build_cubes, cube_ball_bounds, cube_diameter, verify_cube_axioms,
                     whitney_cover)
from .mmspace import (TOL, Space, ball, ball_multiplicity, build_net, covering_multiplicity,
                      doubling_constant, graph_metric, load_space, lp_norm, read_space)

FAMILIES = ("cycle", "path", "random-geometric", "grid", "file")

DEFAULT_PARAMS = {
    "delta": 0.5,
    "p": 2.0,
    "q": 1.0,
    "gammas": [0.05, 0.1],
    "alpha": 1.0,
    "pool": 200,
    "pairs": 20,
}


# --------------------------------------------------------------------------
# spaces


def gen_space(family: str, n: int, seed: int = 0, scale_unit: float = 1.0) -> Space:
    """Deterministic instance of a named family."""
    if n < 1:
        raise ValueError("size must be at least 1")
    if family == "cycle":
        edges = [(i, (i + 1) % n, 1.0) for i in range(n)] if n > 1 else []
        return Space(graph_metric(n, edges), np.ones(n), scale_unit)
    if family == "path":
        return Space(graph_metric(n, [(i, i + 1, 1.0) for i in range(n - 1)]), np.ones(n), scale_unit)
    if family == "random-geometric":
        pts = np.random.default_rng(seed).uniform(size=(n, 2))
        dist = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=-1))
        return Space(dist, np.ones(n), scale_unit)
    if family == "grid":
        rows = max(1, math.isqrt(n))
        cols = -(-n // rows)
        edges = []
        for v in range(n):
            r, c = divmod(v, cols)
            if c + 1 < cols and v + 1 < n:
                edges.append((v, v + 1, 1.0))
            if v + cols < n:
                edges.append((v, v + cols, 1.0))
        return Space(graph_metric(n, edges), np.ones(n), scale_unit)
    raise ValueError(f"unknown space family {family!r}")


def write_space(space: Space, path) -> None:
    with open(path, "w") as fh:
        json.dump(space.to_document(), fh, indent=1, sort_keys=True)
        fh.write("\n")


# --------------------------------------------------------------------------
# configuration and rows


@dataclass
class ExperimentConfig:
    seed: int = 0
    family: str = "cycle"
    sizes: list[int] = field(default_factory=lambda: [6])
    trials: int = 1
    checks: list[str] = field(default_factory=list)
    tol: float = 1e-9
    out: str | None = None
    space_file: str | None = None
    scale_unit: float = 1.0
    params: dict = field(default_factory=dict)
    timing: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown space family {self.family!r}")
        if self.family == "file" and not self.space_file:
            raise ValueError("family 'file' needs space_file")
        unknown = [c for c in self.checks if c not in CHECKS]
        if unknown:
            raise ValueError(f"unknown check(s): {', '.join(unknown)}")
        if self.trials < 0:
            raise ValueError("trials must be nonnegative")
        self.params = {**DEFAULT_PARAMS, **(self.params or {})}

    @classmethod
    def from_document(cls, doc: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown config keys: {', '.join(sorted(extra))}")
        return cls(**doc)


@dataclass(frozen=True)
class ReportRow:
    check: str
    instance: str
    trial: int
    item: str
    lhs: float
    rhs: float
    constant: float
    holds: bool
    exact: bool
    runtime_ms: float = 0.0


@dataclass
class Instance:
    id: str
    space: Space
    cache: dict = field(default_factory=dict)

    def get(self, key, make: Callable):
        if key not in self.cache:
            self.cache[key] = make()
        return self.cache[key]


# A row before bookkeeping: (item, lhs, rhs, constant, exact).
Raw = tuple[str, float, float, float, bool]


def _random_function(space: Space, rng: np.random.Generator) -> np.ndarray:
    """Gaussian values, a spike, or a ball indicator (with a random sign)."""
    kind = rng.integers(4)
    if kind <= 1:
        return rng.normal(size=space.n)
    f = np.zeros(space.n)
    x = int(rng.integers(space.n))
    if kind == 2:
        f[x] = rng.normal() or 1.0
    else:
        r = float(rng.uniform(0, max(space.diameter, TOL)))
        f[list(ball(space, x, r).members)] = 1.0
        f += 0.1 * rng.normal(size=space.n) * (rng.random() < 0.5)
    return f


def _cubes(inst: Instance, params):
    return inst.get(("cubes", params["delta"]),
                    lambda: build_cubes(inst.space, params["delta"]))


def _random_cube(inst: Instance, rng, params, min_size=1, max_diam=math.inf, big=0.0):
    """A random cube; with probability ``big`` the largest eligible one.

    Falls back to smaller cubes when no cube of ``min_size`` points fits ``max_diam``.
    """
    sys = _cubes(inst, params)
    cands = []
    for size in range(min_size, 0, -1):
        cands = [q for k in sorted(sys.levels) for q in sys.levels[k]
                 if len(q.members) >= size and cube_diameter(inst.space, q) <= max_diam + TOL]
        if cands:
            break
    if not cands:
        return sys, None
    pick = int(rng.integers(len(cands)))
    if rng.random() < big:
        pick = max(range(len(cands)), key=lambda i: (len(cands[i].members), -i))
    return sys, cands[pick]


# --------------------------------------------------------------------------
# checks


def check_covering(inst, rng, params) -> list[Raw]:
    sp = inst.space
    c = float(rng.choice([0.5, 1.0]))
    net = inst.get(("net", c / 2), lambda: build_net(sp, c / 2))
    rep = covering_multiplicity(sp, net, c)
    x = int(rng.integers(sp.n))
    b = float(rng.uniform(c, 4 * c))
    cnt = ball_multiplicity(sp, net, c, x, b)
    return [(f"point c={c:g}", float(rep.mult_point.max()), rep.bound, rep.bound, True),
            (f"ball c={c:g} b={b:.6g} x={x}", float(cnt.count), cnt.bound, cnt.bound, True)]


def check_cube_axioms(inst, rng, params) -> list[Raw]:
    delta = params["delta"] if rng.random() < 0.5 else float(rng.uniform(0.2, 0.6))
    sys = build_cubes(inst.space, delta)
    return [(f"{r.axiom} delta={delta:.6g}", 0.0 if r.holds else 1.0, 0.0, float(sys.a1), True)
            for r in verify_cube_axioms(sys)]


def check_cube_ball(inst, rng, params) -> list[Raw]:
    sp = inst.space
    out = []
    for _ in range(params["pairs"]):
        sys, q = _random_cube(inst, rng, params)
        x = int(rng.choice(q.members))
        r = float(rng.uniform(0, 2 * sys.a1 * sys.delta ** q.level))
        rep = cube_ball_bounds(sp, sys, q, ball(sp, x, r))
        if rep.branch == "equality":
            out.append((f"equality k={q.level} x={x}", abs(rep.lhs - rep.rhs), 0.0, 1.0, True))
        else:
            out.append((f"lower k={q.level} x={x}", rep.lhs, rep.rhs, rep.constant, True))
    return out


def check_whitney(inst, rng, params) -> list[Raw]:
    sp = inst.space
    sys, q = _random_cube(inst, rng, params, min_size=2)
    if q is None or len(q.members) < 2:
        return []
    mem = np.array(q.members)
    k = int(rng.integers(1, len(mem)))
    e = rng.choice(mem, size=k, replace=False)
    wc = whitney_cover(sp, sys, q, e)
    chk = wc.check(sp)
    return [(f"{name} k={q.level}", 0.0 if ok else 1.0, 0.0, float(wc.multiplicity), True)
            for name, ok in sorted(chk.items())]


def check_good_lambda(inst, rng, params) -> list[Raw]:
    sp = inst.space
    sys, q = _random_cube(inst, rng, params, min_size=2, big=0.5)
    if q is None or len(q.members) < 2:
        return []
    f = _random_function(sp, rng)
    C2 = mx.cube_doubling(sp, q, 2.0)
    out = []
    for gamma in params["gammas"]:
        try:
            ls = mx.good_lambda_sets(sp, sys, q, f, 3 * C2, gamma)
        except ValueError:
            continue
        ratio = float(ls.A)
        for lam, lhs, base in zip(ls.lambdas, ls.lhs, ls.base):
            out.append((f"gamma={gamma:g} lambda={lam:.6g}", float(lhs),
                        (gamma / ls.beta) * float(base), ratio, False))
    return out


def check_lp_l1_cube(inst, rng, params) -> list[Raw]:
    sp = inst.space
    p = float(params["p"])
    sys, q = _random_cube(inst, rng, params)
    f = _random_function(sp, rng)
    idx = list(q.members)
    w = sp.mass[idx]
    fq = f[idx]
    sh = mx.cube_sharp(sp, q, f)
    lhs = float(np.abs(fq) ** p @ w)
    rhs = float(sh ** p @ w + q.measure ** (1 - p) * (np.abs(fq) @ w) ** p)
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
    return [(f"k={q.level} p={p:g}", lhs, rhs, ratio, False)]


def check_n0_cube(inst, rng, params) -> list[Raw]:
    sp = inst.space
    sys, q = _random_cube(inst, rng, params, max_diam=sp.scale_unit)
    f = _random_function(sp, rng)
    idx = list(q.members)
    w = sp.mass[idx]
    s = sys.a0 * sys.delta ** q.level
    D = doubling_constant(sp, (sp.scale_unit + sys.a1 * sys.delta ** q.level) / s, s,
                          mode="sup").value
    lhs = float(np.abs(f[idx]) @ w)
    rhs = float(mx.n0(sp, f)[idx] @ w)
    return [(f"k={q.level}", lhs, D * rhs, D, True)]


def check_cube_sharp(inst, rng, params) -> list[Raw]:
    sp = inst.space
    sys, q = _random_cube(inst, rng, params, min_size=2, max_diam=sp.scale_unit / 2)
    f = _random_function(sp, rng)
    idx = list(q.members)
    local = mx.cube_sharp(sp, q, f)
    glob = mx.sharp_maximal(sp, f)[idx]
    out = []
    for x, a, b in zip(idx, local, glob):
        ratio = a / b if b > 0 else (0.0 if a <= TOL else math.inf)
        out.append((f"k={q.level} x={x}", float(a), float(b), ratio, False))
    return out


def check_n_theorem(inst, rng, params) -> list[Raw]:
    sp = inst.space
    p = float(params["p"])
    f = _random_function(sp, rng)
    lhs = lp_norm(sp, f, p)
    rhs = lp_norm(sp, mx.n_operator(sp, f), p)
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
    return [(f"p={p:g}", lhs, rhs, ratio, False)]


def check_sandwich(inst, rng, params) -> list[Raw]:
    """One row per point; ``lhs = max(f^s - f^#, f^# - 2 f^s)`` against ``0``."""
    sp = inst.space
    qq = float(params["q"])
    f = rng.normal(size=sp.n)
    fs = mx.s_sharp(sp, f, qq)
    fsh = mx.sharp_maximal(sp, f, None, qq)
    return [(f"x={x} q={qq:g}", float(max(a - b, b - 2 * a)), 0.0, 2.0, True)
            for x, (a, b) in enumerate(zip(fs, fsh))]


def check_abs_bmo(inst, rng, params) -> list[Raw]:
    sp = inst.space
    qq = float(params["q"])
    f = _random_function(sp, rng)
    a = mx.modified_sharp_maximal(sp, np.abs(f), qq)
    b = mx.modified_sharp_maximal(sp, f, qq)
    x = int(np.argmax(a - 2 * b))
    return [(f"pointwise x={x} q={qq:g}", float(a[x]), float(2 * b[x]), 2.0, True)]


def check_duality(inst, rng, params) -> list[Raw]:
    sp = inst.space
    f = _random_function(sp, rng)
    rep = nm.duality_sandwich(sp, f)
    out = [("L<=4U", rep.dual_value, 4 * rep.primal_upper, 4.0, True),
           ("L<=U", rep.dual_value, rep.primal_upper, 1.0, True)]
    g = rng.normal(size=sp.n)
    G = nm.dual_gauge(sp, g)
    bmo = nm.bmo_norm(sp, g, 1.0).norm
    out.append(("pairing<=4bmo", G, 4 * bmo, 4.0, True))
    out.append(("bmo<=3pairing", bmo, 3 * G, 3.0, True))
    if G > 0:
        g = g / G
    worst = 0.0
    for _ in range(params["pairs"]):
        a = at.random_atom(sp, rng, np.inf, sp.scale_unit)
        worst = max(worst, abs(float(a.values * g @ sp.mass)))
    out.append(("atom pairing", worst, 1.0, 1.0, True))
    return out


def check_ion_equiv(inst, rng, params) -> list[Raw]:
    sp = inst.space
    p = float(rng.choice([np.inf, 2.0, float(params["p"])]))
    b = float(rng.uniform(0.5, 2.0)) * sp.scale_unit
    ion = at.random_ion(sp, rng, p, b, float(params["alpha"]))
    dec = at.ion_to_atoms(sp, ion, b)
    bad = sum(not at.validate(sp, a).holds for _, a in dec.terms)
    out = [("reconstruction", dec.residual(), 0.0, 1.0, True),
           ("atoms valid", float(bad), 0.0, 1.0, True),
           ("coefficients", dec.coefficient_sum, dec.info["bound"], dec.info["bound"], True)]
    for i, norm, lim in dec.info["piece_checks"]:
        out.append((f"h{i}", norm, lim, lim, True))
    # the converse direction: atoms are ions
    a = at.random_atom(sp, rng, p, b)
    coef = 1.0 if a.kind == "standard" or b >= 1 else b ** params["alpha"]
    ok = at.validate_ion(sp, coef * a.values, a.support, p, params["alpha"]).holds
    out.append((f"{a.kind} atom is ion", 0.0 if ok else 1.0, 0.0, coef, True))
    return out


def check_scale_equiv(inst, rng, params) -> list[Raw]:
    sp = inst.space
    qq = float(params["q"])
    c = float(rng.uniform(0.25, 1.0)) * sp.scale_unit
    b = c * float(rng.uniform(1.0, 4.0))
    f = _random_function(sp, rng)
    D = doubling_constant(sp, b / c, c, mode="sup").value
    nc = mx.modified_sharp_maximal(sp, f, qq, c)
    nb = mx.modified_sharp_maximal(sp, f, qq, b)
    x = int(np.argmax(nc - D ** (1 / qq) * nb))
    p = float(rng.choice([np.inf, float(params["p"])]))
    a = at.random_atom(sp, rng, p, c)
    big, coef = at.rescale_atom(sp, a, b)
    lim = at.rescale_bound(sp, c, b, p)
    return [(f"bmo x={x} c={c:.6g} b={b:.6g}", float(nc[x]), float(D ** (1 / qq) * nb[x]), D, True),
            ("rescale coefficient", coef, lim, lim, True),
            ("rescaled atom valid", 0.0 if at.validate(sp, big).holds else 1.0, 0.0, coef, True)]


def ball_average_operator(space: Space) -> np.ndarray:
    """Matrix of ``(Tf)(x) = avg_{B(x,1)} f``."""
    m = space.mass
    inside = space.dist <= space.scale_unit + TOL
    return inside * m[None, :] / (inside @ m)[:, None]


OPERATOR_CONSTANT = 4.0


def check_operator_atoms(inst, rng, params) -> list[Raw]:
    """``||Tf||_1 <= 3 C A U(f)`` with ``A`` the largest ``||Ta||_1`` seen."""
    sp = inst.space
    T = inst.get("T", lambda: ball_average_operator(sp))

    def t_norm(v):
        return float(np.abs(T @ v) @ sp.mass)

    def pool():
        prng = np.random.default_rng([int(params.get("_seed", 0)), 7919, sp.n])
        return max(t_norm(at.random_atom(sp, prng, np.inf, sp.scale_unit).values)
                   for _ in range(params["pool"]))

    A = inst.get("A", pool)
    f = _random_function(sp, rng)
    dec = at.greedy_atomic_decomposition(sp, f, np.inf)
    A = max([A] + [t_norm(a.values) for _, a in dec.terms])
    U = dec.coefficient_sum
    C = OPERATOR_CONSTANT
    return [("A", A, math.inf, A, True),
            ("||Tf||_1", t_norm(f), 3 * C * A * U, 3 * C * A, True)]


CHECKS: dict[str, Callable[[Instance, np.random.Generator, dict], list[Raw]]] = {
    "covering": check_covering,
    "cube-axioms": check_cube_axioms,
    "cube-ball": check_cube_ball,
    "whitney": check_whitney,
    "good-lambda": check_good_lambda,
    "lp-l1-cube": check_lp_l1_cube,
    "n0-cube": check_n0_cube,
    "cube-sharp": check_cube_sharp,
    "n-theorem": check_n_theorem,
    "sandwich": check_sandwich,
    "abs-bmo": check_abs_bmo,
    "duality": check_duality,
    "ion-equiv": check_ion_equiv,
    "scale-equiv": check_scale_equiv,
    "operator-atoms": check_operator_atoms,
}
CHECK_NAMES = tuple(CHECKS)


# --------------------------------------------------------------------------
# orchestration


def _holds(lhs: float, rhs: float, tol: float) -> bool:
    if math.isnan(lhs) or math.isnan(rhs):
        return False
    if math.isinf(rhs) and rhs > 0:
        return math.isfinite(lhs)
    return lhs <= rhs + tol * max(1.0, abs(rhs))


def _instances(cfg: ExperimentConfig) -> list[Instance]:
    if cfg.family == "file":
        sp = read_space(cfg.space_file)
        name = cfg.space_file.rsplit("/", 1)[-1]
        return [Instance(f"file:{name}", sp)]
    return [Instance(f"{cfg.family}-n{n}-s{cfg.seed}",
                     gen_space(cfg.family, n, cfg.seed, cfg.scale_unit)) for n in cfg.sizes]


def _run_one(args) -> list[ReportRow]:
    cfg, ci, name, ii, inst = args
    params = {**cfg.params, "_seed": cfg.seed}
    fn = CHECKS[name]
    rows = []
    for trial in range(cfg.trials):
        rng = np.random.default_rng([cfg.seed, ci, ii, trial])
        t0 = time.perf_counter()
        raws = fn(inst, rng, params)
        ms = (time.perf_counter() - t0) * 1e3
        for item, lhs, rhs, const, exact in raws:
            rows.append(ReportRow(name, inst.id, trial, item, float(lhs), float(rhs),
                                  float(const), _holds(float(lhs), float(rhs), cfg.tol),
                                  bool(exact), ms if cfg.timing else 0.0))
    return _finish_recorded(rows, cfg.tol)


def _finish_recorded(rows: list[ReportRow], tol: float) -> list[ReportRow]:
    """Recorded rows: the constant becomes the instance-wide largest ratio and the row
    reads ``lhs <= constant * rhs``."""
    out = []
    rec = [r for r in rows if not r.exact]
    if not rec:
        return rows
    C = max(r.constant for r in rec)
    for r in rows:
        if r.exact:
            out.append(r)
            continue
        rhs = C * r.rhs if math.isfinite(C) else math.inf
        holds = math.isfinite(C) and _holds(r.lhs, rhs, tol)
        out.append(ReportRow(r.check, r.instance, r.trial, r.item, r.lhs, rhs, C,
                             holds, False, r.runtime_ms))
    return out


def run_check(cfg: ExperimentConfig) -> list[ReportRow]:
    """Every (check, instance, trial); rows sorted by that key."""
    insts = _instances(cfg)
    jobs = [(cfg, CHECK_NAMES.index(name), name, ii, inst)
            for name in cfg.checks for ii, inst in enumerate(insts)]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            parts = list(ex.map(_run_one, jobs))
    else:
        parts = [_run_one(j) for j in jobs]
    rows = [r for part in parts for r in part]
    order = {n: i for i, n in enumerate(CHECK_NAMES)}
    rows.sort(key=lambda r: (order[r.check], r.instance, r.trial))
    return rows


COLUMNS = ("check", "instance", "trial", "item", "lhs", "rhs", "constant", "holds", "exact")


def rows_to_csv(rows: list[ReportRow], timing: bool = False) -> str:
    buf = io.StringIO()
    cols = COLUMNS + (("runtime_ms",) if timing else ())
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        d = asdict(r)
        w.writerow([repr(d[c]) if isinstance(d[c], float) else
                    (str(d[c]).lower() if isinstance(d[c], bool) else d[c]) for c in cols])
    return buf.getvalue()


def violations(rows: list[ReportRow]) -> list[ReportRow]:
    return [r for r in rows if r.exact and not r.holds]


def write_report(rows: list[ReportRow], cfg: ExperimentConfig, path: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows, cfg.timing))
    summary = {}
    for r in rows:
        s = summary.setdefault(r.check, {"rows": 0, "violations": 0, "recorded_constant": None})
        s["rows"] += 1
        s["violations"] += int(r.exact and not r.holds)
        if not r.exact:
            c = s["recorded_constant"]
            s["recorded_constant"] = r.constant if c is None else max(c, r.constant)
    side = {
        "config": {k: v for k, v in asdict(cfg).items()},
        "environment": {
            "package": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        "summary": summary,
    }
    with open(path + ".json", "w") as fh:
        json.dump(side, fh, indent=1, sort_keys=True, default=str)
        fh.write("\n")


def load_config(path: str) -> ExperimentConfig:
    with open(path) as fh:
        return ExperimentConfig.from_document(json.load(fh))


__all__ = [
    "ExperimentConfig", "ReportRow", "CHECKS", "CHECK_NAMES", "gen_space", "write_space",
    "run_check", "rows_to_csv", "write_report", "violations", "load_config",
    "ball_average_operator", "load_space",
]
