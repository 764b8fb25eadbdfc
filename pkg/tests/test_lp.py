import itertools

import numpy as np
import pytest

from localhardy.lp import LpProblem, lp_solve, lp_solve_highs


def test_trivial_max():
    r = lp_solve(LpProblem([1.0], [[1.0]], ["<="], [5.0], ((None, None),), maximize=True))
    assert r.optimal and r.value == pytest.approx(5.0) and r.certified


def test_infeasible_and_unbounded():
    assert lp_solve(LpProblem([1.0], [[1.0], [1.0]], ["<=", ">="], [-1.0, 0.0])).status == "infeasible"
    assert lp_solve(LpProblem([1.0], np.zeros((0, 1)), [], [], ((None, None),), True)).status == "unbounded"


def vertex_oracle(c, A, b, box):
    """Enumerate basic points of ``A x <= b, |x_i| <= box``; best objective (max)."""
    n = len(c)
    rows = np.vstack([A, np.eye(n), -np.eye(n)])
    rhs = np.concatenate([b, np.full(n, box), np.full(n, box)])
    best = None
    for idx in itertools.combinations(range(len(rows)), n):
        M = rows[list(idx)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        x = np.linalg.solve(M, rhs[list(idx)])
        if np.all(rows @ x <= rhs + 1e-9):
            v = c @ x
            best = v if best is None else max(best, v)
    return best


def test_random_lps_against_vertex_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(150):
        n = int(rng.integers(1, 4))
        m = int(rng.integers(1, 7))
        A = rng.normal(size=(m, n))
        b = rng.normal(size=m) + 0.5
        c = rng.normal(size=n)
        prob = LpProblem(c, A, ["<="] * m, b, tuple((-3.0, 3.0) for _ in range(n)), True)
        ref = vertex_oracle(c, A, b, 3.0)
        r = lp_solve(prob)
        if ref is None:
            assert r.status == "infeasible"
        else:
            assert r.optimal and r.certified
            assert r.value == pytest.approx(ref, abs=1e-8)
            assert lp_solve_highs(prob).value == pytest.approx(ref, abs=1e-8)


def test_equality_and_mixed_bounds():
    # min x + 2y  s.t. x + y = 3, x <= 1, y free >= -inf  -> x = 1, y = 2
    prob = LpProblem([1.0, 2.0], [[1.0, 1.0]], ["="], [3.0], ((None, 1.0), (None, None)))
    r = lp_solve(prob)
    assert r.optimal and r.value == pytest.approx(5.0)
    assert np.allclose(r.x, [1.0, 2.0])


def test_degenerate_problem_terminates():
    # a classic cycling example for the largest-coefficient rule
    c = np.array([10, -57, -9, -24], float)
    A = np.array([[0.5, -5.5, -2.5, 9], [0.5, -1.5, -0.5, 1], [1, 0, 0, 0]], float)
    r = lp_solve(LpProblem(c, A, ["<="] * 3, [0, 0, 1], maximize=True))
    assert r.optimal and r.value == pytest.approx(1.0)


def test_lp_format_dump():
    prob = LpProblem([1.0, -2.0], [[1.0, 1.0]], ["<="], [4.0], ((0.0, None), (None, None)), True)
    text = prob.to_lp_format()
    assert text.startswith("Maximize") and "x1 free" in text and "c0:" in text and text.endswith("End\n")
