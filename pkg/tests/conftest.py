import numpy as np
import pytest
from hypothesis import strategies as st

from localhardy.mmspace import Space, graph_metric


def cycle(n, mass=None):
    return Space(graph_metric(n, [(i, (i + 1) % n, 1.0) for i in range(n)]),
                 np.ones(n) if mass is None else np.asarray(mass, float))


def path(n, mass=None):
    return Space(graph_metric(n, [(i, i + 1, 1.0) for i in range(n - 1)]),
                 np.ones(n) if mass is None else np.asarray(mass, float))


def planar(points, mass=None, scale_unit=1.0):
    p = np.asarray(points, float)
    d = np.sqrt(((p[:, None] - p[None]) ** 2).sum(-1))
    return Space(d, np.ones(len(p)) if mass is None else np.asarray(mass, float), scale_unit)


def random_planar(rng, n, spread=3.0, weighted=True):
    pts = rng.uniform(size=(n, 2)) * spread
    mass = rng.uniform(0.5, 2.0, n) if weighted else None
    return planar(pts, mass)


@st.composite
def spaces(draw, min_n=1, max_n=9):
    n = draw(st.integers(min_n, max_n))
    seed = draw(st.integers(0, 2**31 - 1))
    rng = np.random.default_rng(seed)
    kind = draw(st.sampled_from(["planar", "cycle", "path"]))
    mass = rng.uniform(0.5, 2.0, n) if draw(st.booleans()) else np.ones(n)
    if kind == "planar":
        return planar(rng.uniform(size=(n, 2)) * draw(st.sampled_from([1.0, 3.0])), mass)
    if kind == "cycle" and n >= 3:
        return cycle(n, mass)
    return path(n, mass)


@pytest.fixture
def c6():
    return cycle(6)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
