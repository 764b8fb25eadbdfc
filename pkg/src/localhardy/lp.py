"""Small dense linear programs.

:func:`lp_solve` is a two-phase tableau simplex with Bland's rule.  It is exact
enough for the desk-sized problems here and returns the duals so optimality
can be checked independently.  :func:`lp_solve_highs` sends the same problem
to the HiGHS dual simplex shipped with scipy.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

LP_TOL = 1e-9


class LpError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class LpProblem:
    """``max/min c.x`` subject to ``A x (<=|>=|=) b`` and per-variable bounds.

    ``bounds[i]`` is ``(lo, hi)``; ``None`` on either side means unbounded.
    ``A`` may be a scipy sparse matrix; the dense solver densifies it.
    """
    c: np.ndarray
    A: np.ndarray
    senses: tuple[str, ...]
    b: np.ndarray
    bounds: tuple[tuple[float | None, float | None], ...] = ()
    maximize: bool = False
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if sparse.issparse(self.A):
            A = sparse.csr_matrix(self.A, dtype=float)
            if A.shape[1] != c.size:
                raise ValueError("constraint matrix has the wrong number of columns")
        else:
            A = np.asarray(self.A, dtype=float).reshape(-1, c.size)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.shape[0] != b.size or len(self.senses) != b.size:
            raise ValueError("constraint rows, senses and right-hand side disagree")
        if any(s not in ("<=", ">=", "=") for s in self.senses):
            raise ValueError("senses must be '<=', '>=' or '='")
        bounds = tuple(self.bounds) or ((0.0, None),) * c.size
        if len(bounds) != c.size:
            raise ValueError("one bound pair per variable")
        data = A.data if sparse.issparse(A) else A
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(data)) and np.all(np.isfinite(b))):
            raise ValueError("nonfinite problem data")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "senses", tuple(self.senses))
        object.__setattr__(self, "bounds", bounds)

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    def dense_A(self) -> np.ndarray:
        return self.A.toarray() if sparse.issparse(self.A) else self.A

    def to_lp_format(self) -> str:
        """CPLEX-style LP text, for cross-checking with external solvers."""
        names = self.names or tuple(f"x{i}" for i in range(self.c.size))

        def expr(row):
            parts = [f"{'+' if v >= 0 else '-'} {abs(v):.17g} {names[j]}"
                     for j, v in enumerate(row) if v != 0]
            return " ".join(parts) if parts else f"0 {names[0]}"

        out = ["Maximize" if self.maximize else "Minimize", f" obj: {expr(self.c)}",
               "Subject To"]
        for i, (row, s, rhs) in enumerate(zip(self.dense_A(), self.senses, self.b)):
            out.append(f" c{i}: {expr(row)} {s} {rhs:.17g}")
        out.append("Bounds")
        for nm, (lo, hi) in zip(names, self.bounds):
            if lo is None and hi is None:
                out.append(f" {nm} free")
            else:
                out.append(f" {'-inf' if lo is None else f'{lo:.17g}'} <= {nm} <= "
                           f"{'+inf' if hi is None else f'{hi:.17g}'}")
        out.append("End")
        return "\n".join(out) + "\n"


@dataclass(frozen=True, eq=False)
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    value: float
    x: np.ndarray | None
    duals: np.ndarray | None = None
    iterations: int = 0
    certified: bool = False

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


# --------------------------------------------------------------------------
# reduction to  min c.y,  M y = r,  y >= 0


def _standard_form(prob: LpProblem):
    """Returns ``(M, r, cost, recover, row_sign)``; ``recover(y)`` maps back to ``x``."""
    m, n = prob.shape
    cols, cost, shift = [], [], np.zeros(n)
    maps = []  # (variable index, column index, sign)
    extra_rows = []  # (column index, upper bound) rows  y_col <= ub
    sign = -1.0 if prob.maximize else 1.0
    for j, (lo, hi) in enumerate(prob.bounds):
        cj = sign * prob.c[j]
        if lo is not None:
            shift[j] = lo
            maps.append((j, len(cost), 1.0))
            cost.append(cj)
            if hi is not None:
                if hi < lo:
                    raise LpError(f"empty bounds on variable {j}")
                extra_rows.append((len(cost) - 1, hi - lo))
        elif hi is not None:
            shift[j] = hi
            maps.append((j, len(cost), -1.0))
            cost.append(-cj)
        else:
            maps.append((j, len(cost), 1.0))
            cost.append(cj)
            maps.append((j, len(cost), -1.0))
            cost.append(-cj)
    nv = len(cost)
    T = np.zeros((n, nv))
    for j, col, s in maps:
        T[j, col] = s
    A = prob.dense_A()
    rows = A @ T
    rhs = prob.b - A @ shift
    senses = list(prob.senses)
    for col, ub in extra_rows:
        row = np.zeros(nv)
        row[col] = 1.0
        rows = np.vstack([rows, row])
        rhs = np.append(rhs, ub)
        senses.append("<=")
    n_slack = sum(s != "=" for s in senses)
    M = np.zeros((len(senses), nv + n_slack))
    M[:, :nv] = rows
    k = nv
    for i, s in enumerate(senses):
        if s == "<=":
            M[i, k] = 1.0
            k += 1
        elif s == ">=":
            M[i, k] = -1.0
            k += 1
    r = rhs.copy()
    row_sign = np.where(r < 0, -1.0, 1.0)
    M *= row_sign[:, None]
    r *= row_sign
    full_cost = np.concatenate([np.array(cost), np.zeros(n_slack)])

    def recover(y):
        return shift + T @ y[:nv]

    return M, r, full_cost, recover, row_sign, m


def _pivot(tab: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    piv = tab[row]
    col_vals = tab[:, col].copy()
    col_vals[row] = 0.0
    tab -= np.outer(col_vals, piv)


def _simplex(tab, basis, n_cols, tol, max_iter):
    """Minimise the objective held in the last row of ``tab`` (reduced costs)."""
    it = 0
    while True:
        red = tab[-1, :n_cols]
        cand = np.flatnonzero(red < -tol)
        if cand.size == 0:
            return "optimal", it
        col = int(cand[0])  # Bland: lowest entering index
        colv = tab[:-1, col]
        pos = np.flatnonzero(colv > tol)
        if pos.size == 0:
            return "unbounded", it
        ratios = tab[pos, -1] / colv[pos]
        best = ratios.min()
        ties = pos[ratios <= best + tol * max(1.0, abs(best))]
        row = int(min(ties, key=lambda i: basis[i]))  # Bland: lowest leaving index
        _pivot(tab, row, col)
        basis[row] = col
        it += 1
        if it > max_iter:
            raise LpError("simplex iteration limit reached")


def lp_solve(prob: LpProblem, tol: float = LP_TOL, max_iter: int = 50_000) -> LpResult:
    """Two-phase dense simplex with Bland's anti-cycling rule."""
    M, r, cost, recover, row_sign, m0 = _standard_form(prob)
    m, nv = M.shape
    # phase one: artificial variable per row
    tab = np.zeros((m + 1, nv + m + 1))
    tab[:m, :nv] = M
    tab[:m, nv:nv + m] = np.eye(m)
    tab[:m, -1] = r
    tab[-1, :nv] = -M.sum(axis=0)
    tab[-1, -1] = -r.sum()
    basis = list(range(nv, nv + m))
    _, it1 = _simplex(tab, basis, nv + m, tol, max_iter)
    scale = max(1.0, float(np.abs(r).max(initial=0.0)))
    if -tab[-1, -1] > tol * scale * max(1, m):
        return LpResult("infeasible", float("nan"), None, iterations=it1)
    # drive artificials out of the basis where possible
    keep = []
    for i in range(m):
        if basis[i] >= nv:
            nz = np.flatnonzero(np.abs(tab[i, :nv]) > tol)
            if nz.size:
                _pivot(tab, i, int(nz[0]))
                basis[i] = int(nz[0])
                keep.append(i)
            # otherwise the row is redundant and is dropped
        else:
            keep.append(i)
    tab = np.vstack([tab[keep][:, list(range(nv)) + [nv + m]], np.zeros(nv + 1)])
    basis = [basis[i] for i in keep]
    cb = cost[basis]
    tab[-1, :nv] = cost - cb @ tab[:-1, :nv]
    tab[-1, -1] = -cb @ tab[:-1, -1]
    status, it2 = _simplex(tab, basis, nv, tol, max_iter)
    if status == "unbounded":
        return LpResult("unbounded", float("inf") if prob.maximize else float("-inf"),
                        None, iterations=it1 + it2)
    y = np.zeros(nv)
    y[basis] = tab[:-1, -1]
    x = recover(y)
    value = float(prob.c @ x)
    # duals of the standard-form rows from the optimal basis
    B = M[keep][:, basis]
    try:
        w = np.linalg.solve(B.T, cost[basis])
    except np.linalg.LinAlgError:
        w = np.linalg.lstsq(B.T, cost[basis], rcond=None)[0]
    reduced = cost - M[keep].T @ w
    certified = bool(reduced.min(initial=0.0) >= -1e3 * tol * max(1.0, np.abs(cost).max(initial=0.0)))
    duals = np.zeros(len(row_sign))
    duals[keep] = w
    duals = (duals * row_sign)[:m0] * (-1.0 if prob.maximize else 1.0)
    return LpResult("optimal", value, x, duals, it1 + it2, certified)


def lp_solve_highs(prob: LpProblem) -> LpResult:
    """The same problem through scipy's HiGHS dual simplex."""
    sign = -1.0 if prob.maximize else 1.0
    le = [i for i, s in enumerate(prob.senses) if s == "<="]
    ge = [i for i, s in enumerate(prob.senses) if s == ">="]
    eq = [i for i, s in enumerate(prob.senses) if s == "="]
    A = sparse.csr_matrix(prob.A)
    A_ub = sparse.vstack([A[le], -A[ge]]) if le or ge else None
    b_ub = np.concatenate([prob.b[le], -prob.b[ge]]) if le or ge else None
    res = linprog(sign * prob.c, A_ub=A_ub, b_ub=b_ub,
                  A_eq=A[eq] if eq else None, b_eq=prob.b[eq] if eq else None,
                  bounds=list(prob.bounds), method="highs-ds")
    if res.status == 2:
        return LpResult("infeasible", float("nan"), None)
    if res.status == 3:
        return LpResult("unbounded", float("inf") if prob.maximize else float("-inf"), None)
    if res.status != 0:
        raise LpError(f"HiGHS failed: {res.message}")
    duals = np.zeros(len(prob.senses))
    if le or ge:
        marg = res.ineqlin.marginals
        duals[le] = marg[: len(le)]
        duals[ge] = -marg[len(le):]
    if eq:
        duals[eq] = res.eqlin.marginals
    return LpResult("optimal", float(prob.c @ res.x), res.x, sign * duals,
                    int(getattr(res, "nit", 0)), True)


def solve(prob: LpProblem, backend: str = "highs") -> LpResult:
    if backend == "highs":
        return lp_solve_highs(prob)
    if backend == "simplex":
        return lp_solve(prob)
    raise ValueError(f"unknown LP backend {backend!r}")
