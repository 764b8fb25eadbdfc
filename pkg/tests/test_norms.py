import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import cycle, path, planar, random_planar, spaces
from localhardy import atoms as A
from localhardy import norms as N
from localhardy.mmspace import doubling_constant


def test_bmo_examples(rng):
    sp = random_planar(rng, 8)
    assert N.bmo_norm(sp, np.full(8, -3.0)).norm == pytest.approx(3.0)
    for _ in range(20):
        f = rng.normal(size=8)
        for q in (1.0, 2.0):
            assert N.bmo_norm(sp, np.abs(f), q).norm <= 2 * N.bmo_norm(sp, f, q).norm + 1e-12
            for c, b in [(0.5, 1.0), (0.3, 1.2)]:
                D = doubling_constant(sp, b / c, c, "sup").value
                assert N.bmo_norm(sp, f, q, c).norm <= D ** (1 / q) * N.bmo_norm(sp, f, q, b).norm + 1e-12


def tiny_spaces():
    rng = np.random.default_rng(7)
    out = [cycle(3), cycle(4), path(3), path(4, [1, 2, 0.5, 1])]
    for _ in range(4):
        n = int(rng.integers(2, 5))
        out.append(planar(rng.uniform(size=(n, 2)) * 2, rng.uniform(0.5, 2, n)))
    return out


@pytest.mark.parametrize("sp", tiny_spaces())
def test_gauge_equals_vertex_oracle(sp):
    rng = np.random.default_rng(sp.n)
    for _ in range(5):
        f = rng.normal(size=sp.n)
        ref = N.h1_norm_oracle(sp, f)
        assert N.h1_norm_dual(sp, f) == pytest.approx(ref, abs=1e-6)
        assert N.h1_norm_dual(sp, f, "simplex") == pytest.approx(ref, abs=1e-6)


def test_trivial_values(c6, rng):
    assert N.h1_norm_dual(c6, np.zeros(6)) == 0
    rep = N.duality_sandwich(c6, np.zeros(6))
    assert rep.dual_value == rep.primal_upper == 0
    for _ in range(10):
        a = A.random_atom(c6, rng, np.inf, 1.0)
        assert N.h1_norm_dual(c6, a.values) <= 1 + 1e-9
        rep = N.duality_sandwich(c6, a.values)
        assert rep.primal_upper <= 1 + 1e-9 and rep.sandwich_ok and rep.exact_ok


@settings(max_examples=15, deadline=None)
@given(spaces(min_n=2, max_n=8), st.integers(0, 10**6))
def test_norm_properties(sp, seed):
    rng = np.random.default_rng(seed)
    f, g = rng.normal(size=sp.n), rng.normal(size=sp.n)
    Lf, Lg = N.h1_norm_dual(sp, f), N.h1_norm_dual(sp, g)
    assert N.h1_norm_dual(sp, f + g) <= Lf + Lg + 1e-8
    assert N.h1_norm_dual(sp, -2.5 * f) == pytest.approx(2.5 * Lf, rel=1e-8)
    rep = N.duality_sandwich(sp, f)
    assert rep.sandwich_ok and rep.exact_ok


@settings(max_examples=15, deadline=None)
@given(spaces(min_n=2, max_n=8), st.integers(0, 10**6))
def test_pairing_and_duality_constants(sp, seed):
    rng = np.random.default_rng(seed)
    f = rng.normal(size=sp.n)
    g = N.h1_norm_dual_full(sp, f).g
    assert N.dual_gauge(sp, g) <= 1 + 1e-7
    for _ in range(30):
        a = A.random_atom(sp, rng, np.inf, 1.0)
        assert abs(a.values * g @ sp.mass) <= 1 + 1e-7
    h = rng.normal(size=sp.n)
    G = N.dual_gauge(sp, h)
    bmo = N.bmo_norm(sp, h, 1.0).norm
    assert G <= bmo + 1e-12          # hence G <= 4 bmo
    assert bmo <= 3 * G + 1e-12


def test_dual_gauge_matches_lp_dual(rng):
    sp = random_planar(rng, 6)
    f = rng.normal(size=6)
    res = N.h1_norm_dual_full(sp, f)
    assert res.value == pytest.approx(res.g * sp.mass @ f)
    assert N.dual_gauge(sp, res.g) == pytest.approx(1.0, abs=1e-7)


def test_p_gauges_are_comparable(c6, rng):
    pytest.importorskip("cvxpy")
    f = rng.normal(size=6)
    L = N.h1_norm_dual(c6, f)
    L2, L4 = N.h1_norm_p(c6, f, 2.0), N.h1_norm_p(c6, f, 4.0)
    # inf-atoms are p-atoms, so the p-gauges can only be smaller
    assert L2 <= L + 1e-6 and L4 <= L + 1e-6
    assert 0 < L2 and 0 < L4


def test_lazy_constraints_match_full_program(rng):
    for n, spread in [(12, 1.0), (20, 2.0), (15, 4.0)]:
        sp = random_planar(rng, n, spread=spread)
        for _ in range(3):
            f = rng.normal(size=n)
            lazy = N.h1_norm_dual_full(sp, f, generate=True)
            full = N.h1_norm_dual_full(sp, f, generate=False)
            assert lazy.value == pytest.approx(full.value, rel=1e-8, abs=1e-10)
            assert N.dual_gauge(sp, lazy.g) <= 1 + 1e-9


@pytest.mark.parametrize("sp", tiny_spaces())
def test_dual_gauge_is_max_vertex_pairing(sp):
    rng = np.random.default_rng(100 + sp.n)
    V = N.atom_vertices(sp)
    for _ in range(5):
        g = rng.normal(size=sp.n)
        assert N.dual_gauge(sp, g) == pytest.approx(np.abs(V @ (g * sp.mass)).max(), rel=1e-12)
