import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize_scalar

from conftest import cycle, random_planar, spaces
from localhardy import maximal as mx
from localhardy.dyadic import build_cubes
from localhardy.mmspace import ball


def spike(n, x=0):
    f = np.zeros(n)
    f[x] = 1.0
    return f


def test_six_cycle_values(c6):
    f = spike(6)
    assert mx.hl_maximal_local(c6, f)[1] == pytest.approx(1 / 3)
    assert mx.sharp_maximal(c6, f)[0] == pytest.approx(4 / 9)
    assert mx.n_operator(c6, f)[0] == pytest.approx(7 / 9)


def test_constants(rng):
    sp = random_planar(rng, 9)
    c = np.full(9, -2.5)
    assert np.allclose(mx.hl_maximal_local(sp, c), 2.5)
    assert np.allclose(mx.sharp_maximal(sp, c), 0)
    assert np.allclose(mx.n_operator(sp, c), 2.5)
    assert np.allclose(mx.s_sharp(sp, c, 1.5), 0, atol=1e-9)


def brute_hl(sp, f, b=1.0):
    out = np.zeros(sp.n)
    for x in range(sp.n):
        for r in np.unique(sp.dist[x]):
            if r <= b + 1e-9:
                bb = ball(sp, x, r)
                idx = list(bb.members)
                out[x] = max(out[x], np.abs(f[idx]) @ sp.mass[idx] / bb.measure)
    return out


def brute_s_sharp(sp, f, q, b=1.0):
    out = np.zeros(sp.n)
    for x in range(sp.n):
        for r in np.unique(np.append(sp.dist[x], b)):
            if r <= b + 1e-9:
                idx = list(ball(sp, x, r).members)
                v, w = f[idx], sp.mass[idx]
                res = minimize_scalar(lambda c: w @ np.abs(v - c) ** q / w.sum(),
                                      bounds=(v.min(), v.max()), method="bounded",
                                      options={"xatol": 1e-12})
                val = min(res.fun, w @ np.abs(v - v.min()) ** q / w.sum())
                out[x] = max(out[x], val ** (1 / q))
    return out


@settings(max_examples=30, deadline=None)
@given(spaces(max_n=8), st.integers(0, 10**6))
def test_hl_against_enumeration(sp, seed):
    f = np.random.default_rng(seed).normal(size=sp.n)
    assert np.allclose(mx.hl_maximal_local(sp, f), brute_hl(sp, f))
    assert np.all(mx.hl_maximal_local(sp, f) >= np.abs(f) - 1e-12)


@settings(max_examples=20, deadline=None)
@given(spaces(max_n=7), st.integers(0, 10**6), st.sampled_from([1.0, 1.5, 2.0, 3.0]))
def test_s_sharp_against_scalar_minimiser(sp, seed, q):
    f = np.random.default_rng(seed).normal(size=sp.n)
    ours = mx.s_sharp(sp, f, q)
    ref = brute_s_sharp(sp, f, q)
    assert np.all(ours <= ref + 1e-7)
    assert np.allclose(ours, ref, atol=1e-6)


def test_q2_inner_value_is_standard_deviation(rng):
    sp = random_planar(rng, 7)
    f = rng.normal(size=7)
    v, w = f, sp.mass
    mean = v @ w / w.sum()
    assert mx._best_constant_deviation(v, w, 2.0) == pytest.approx(np.sqrt(w @ (v - mean) ** 2 / w.sum()))


@settings(max_examples=40, deadline=None)
@given(spaces(max_n=9), st.integers(0, 10**6), st.sampled_from([1.0, 2.0, 2.5]))
def test_exact_pointwise_inequalities(sp, seed, q):
    rng = np.random.default_rng(seed)
    f, g = rng.normal(size=sp.n), rng.normal(size=sp.n)
    tol = 1e-9
    M = mx.hl_maximal_local(sp, f)
    assert np.all(mx.n_operator(sp, f) <= 3 * M * (1 + tol) + tol)
    fs, fsh = mx.s_sharp(sp, f, q), mx.sharp_maximal(sp, f, None, q)
    assert np.all(fs <= fsh * (1 + tol) + tol)
    assert np.all(fsh <= 2 * fs * (1 + tol) + tol)
    a = mx.modified_sharp_maximal(sp, np.abs(f), q)
    assert np.all(a <= 2 * mx.modified_sharp_maximal(sp, f, q) * (1 + tol) + tol)
    assert np.all(mx.sharp_maximal(sp, f + g, None, q)
                  <= mx.sharp_maximal(sp, f, None, q) + mx.sharp_maximal(sp, g, None, q) + tol)
    small = f * rng.uniform(0, 1, sp.n)
    assert np.all(mx.hl_maximal_local(sp, small) <= M + tol)


@settings(max_examples=30, deadline=None)
@given(spaces(min_n=2, max_n=10), st.integers(0, 10**6))
def test_cube_operators(sp, seed):
    rng = np.random.default_rng(seed)
    sys = build_cubes(sp, 0.5)
    f = rng.normal(size=sp.n)
    for k in sys.levels:
        C2 = mx.level_doubling(sp, sys, k)
        assert C2 <= mx.product_level_constant(sp, sys, k) + 1e-9
        for q in sys.levels[k]:
            m, mc = mx.cube_maximal(sp, q, f), mx.cube_maximal_centred(sp, q, f)
            assert np.all(mc <= m + 1e-12)
            assert np.all(m <= C2 * mc * (1 + 1e-9) + 1e-12)
            c = np.full(sp.n, 1.7)
            assert np.allclose(mx.cube_maximal(sp, q, c), 1.7)
            assert np.allclose(mx.cube_sharp(sp, q, c), 0)


def test_good_lambda_examples(c6):
    sys = build_cubes(c6, 0.5, -2, 3)
    q = sys.levels[-2][0]
    C2 = mx.cube_doubling(c6, q)
    half = np.zeros(6)
    half[[0, 1, 2]] = 1.0
    ls = mx.good_lambda_sets(c6, sys, q, half, 3 * C2, 0.1)
    assert np.isfinite(ls.A) and ls.holds()
    for e_lo, e_hi in zip(ls.E, ls.E[1:]):
        assert np.all(e_hi <= e_lo)
    const = mx.good_lambda_sets(c6, sys, q, np.full(6, 2.0), 3 * C2, 0.1, grid=[2.5, 3.0, 10.0])
    assert const.A == 0 and not any(e.any() for e in const.E)
    with pytest.raises(ValueError):
        mx.good_lambda_sets(c6, sys, q, half, C2, 0.1)
    with pytest.raises(ValueError):
        mx.good_lambda_sets(c6, sys, q, half, 3 * C2, 0.1, grid=[1e-6])


def test_weak_type_constant_bounds_every_level_set(rng):
    sp = random_planar(rng, 14)
    sys = build_cubes(sp, 0.5)
    q = sys.levels[sys.k_min][0]
    fam = mx.weak_type_family(sp, q)
    C0 = mx.weak_type_constant(sp, q, fam)
    w = sp.mass[list(q.members)]
    for f in fam:
        m = mx.cube_maximal(sp, q, f)
        l1 = np.abs(f[list(q.members)]) @ w
        for lam in np.unique(m) * (1 - 1e-9):
            assert lam * w[m > lam].sum() <= C0 * l1 * (1 + 1e-9)
