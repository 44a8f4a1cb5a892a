"""Sparse linear programs and a solver that returns primal and dual solutions.

A :class:`LinearProgram` is

    minimize (or maximize)  c @ x
    subject to              A[i] @ x  (= or >=)  b[i]
                            x[j] >= 0  or  x[j] free

Dual values follow one convention for both senses: at optimality
``objective_value == b @ dual_values``.  For a minimization this means
``y >= 0`` on ``>=`` rows and ``c - A.T @ y >= 0`` on nonnegative columns
(``== 0`` on free ones); a maximization flips both inequalities.

Two backends are available: ``"highs"`` (HiGHS dual simplex through scipy,
the default) and ``"simplex"``, a dense two-phase revised simplex with
Bland's rule that is only meant for small problems and cross-checks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .errors import LPSolverError

log = logging.getLogger(__name__)

FEAS_TOL = 1e-9
GAP_TOL = 1e-8

EQ, GE = "=", ">="


@dataclass(eq=False)
class LinearProgram:
    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    senses: np.ndarray
    lower: np.ndarray
    maximize: bool = False

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.A = sp.csr_matrix(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.senses = np.asarray(self.senses, dtype=object)
        self.lower = np.asarray(self.lower, dtype=float)
        self.validate()

    @property
    def shape(self):
        return self.A.shape

    def validate(self):
        m, n = self.A.shape
        if self.c.shape != (n,) or self.lower.shape != (n,):
            raise ValueError(f"objective/bounds length must equal {n} columns")
        if self.b.shape != (m,) or self.senses.shape != (m,):
            raise ValueError(f"rhs/senses length must equal {m} rows")
        if not set(self.senses.tolist()) <= {EQ, GE}:
            raise ValueError("row senses must be '=' or '>='")
        if not np.all((self.lower == 0) | (self.lower == -np.inf)):
            raise ValueError("variable lower bounds must be 0 or -inf")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.b)) and np.all(np.isfinite(self.A.data))):
            raise ValueError("LP data must be finite")


@dataclass(eq=False)
class LPSolution:
    primal_values: np.ndarray | None
    dual_values: np.ndarray | None
    objective_value: float
    status: str  # optimal | infeasible | unbounded
    residuals: dict = field(default_factory=dict)
    iterations: int = 0
    method: str = ""

    @property
    def optimal(self):
        return self.status == "optimal"


def residuals(lp: LinearProgram, x, y):
    """Primal/dual feasibility and duality-gap residuals (infinity norms)."""
    sign = -1.0 if lp.maximize else 1.0
    c, yy = sign * lp.c, sign * y
    ax = lp.A @ x
    eq = lp.senses == EQ
    r_primal = max(
        np.max(np.abs(ax[eq] - lp.b[eq]), initial=0.0),
        np.max(lp.b[~eq] - ax[~eq], initial=0.0),
        np.max(-x[lp.lower == 0], initial=0.0),
    )
    red = c - lp.A.T @ yy
    free = lp.lower == -np.inf
    r_dual = max(
        np.max(-red[~free], initial=0.0),
        np.max(np.abs(red[free]), initial=0.0),
        np.max(-yy[~eq], initial=0.0),
    )
    primal_obj = float(lp.c @ x)
    gap = abs(primal_obj - float(lp.b @ y))
    return {"primal": float(r_primal), "dual": float(r_dual), "gap": gap, "primal_objective": primal_obj}


def within_tolerance(lp: LinearProgram, res: dict) -> bool:
    return (
        res["primal"] <= FEAS_TOL * (1 + np.max(np.abs(lp.b), initial=0.0))
        and res["dual"] <= FEAS_TOL * (1 + np.max(np.abs(lp.c), initial=0.0))
        and res["gap"] <= GAP_TOL * (1 + abs(res["primal_objective"]))
    )


def solve_lp(lp: LinearProgram, method: str = "highs") -> LPSolution:
    if method == "highs":
        sol = _solve_highs(lp)
    elif method == "simplex":
        sol = _solve_simplex(lp)
    else:
        raise ValueError(f"unknown LP method {method!r}")
    if sol.optimal:
        sol.residuals = residuals(lp, sol.primal_values, sol.dual_values)
        if not within_tolerance(lp, sol.residuals):
            log.warning("LP residuals above tolerance: %s", sol.residuals)
    return sol


# ---------------------------------------------------------------------------
# HiGHS backend

_HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
    "presolve": True,
}


def _solve_highs(lp: LinearProgram) -> LPSolution:
    sign = -1.0 if lp.maximize else 1.0
    eq = lp.senses == EQ
    A_eq = lp.A[eq] if eq.any() else None
    A_ub = -lp.A[~eq] if (~eq).any() else None
    bounds = [(None if lo == -np.inf else 0.0, None) for lo in lp.lower] if np.any(lp.lower == -np.inf) else (0, None)
    res = linprog(
        sign * lp.c,
        A_ub=A_ub,
        b_ub=-lp.b[~eq] if A_ub is not None else None,
        A_eq=A_eq,
        b_eq=lp.b[eq] if A_eq is not None else None,
        bounds=bounds,
        method="highs-ds",
        options=_HIGHS_OPTIONS,
    )
    iters = int(getattr(res, "nit", 0) or 0)
    if res.status == 2:
        return LPSolution(None, None, np.nan, "infeasible", iterations=iters, method="highs")
    if res.status == 3:
        return LPSolution(None, None, -sign * np.inf, "unbounded", iterations=iters, method="highs")
    if res.status != 0:
        raise LPSolverError(f"HiGHS failed: {res.message}", log=[res.message])
    y = np.zeros(lp.shape[0])
    if A_eq is not None:
        y[eq] = res.eqlin.marginals
    if A_ub is not None:
        y[~eq] = -res.ineqlin.marginals
    return LPSolution(res.x, sign * y, sign * res.fun, "optimal", iterations=iters, method="highs")


# ---------------------------------------------------------------------------
# dense revised simplex (Bland's rule)

def _standard_form(lp: LinearProgram):
    """Return (A, b, c, column map) for min c x, A x = b, x >= 0, b >= 0."""
    A = lp.A.toarray()
    m, n = A.shape
    sign = -1.0 if lp.maximize else 1.0
    free = np.flatnonzero(lp.lower == -np.inf)
    ge = np.flatnonzero(lp.senses == GE)
    surplus = np.zeros((m, len(ge)))
    surplus[ge, np.arange(len(ge))] = -1.0
    As = np.hstack([A, -A[:, free], surplus])
    cs = np.concatenate([sign * lp.c, -sign * lp.c[free], np.zeros(len(ge))])
    b = lp.b.copy()
    flip = b < 0
    As[flip] *= -1
    b[flip] *= -1
    return As, b, cs, free, flip


class _Simplex:
    def __init__(self, A, b, tol=1e-11, max_iter=50_000):
        self.A, self.b = A, b
        self.tol, self.max_iter = tol, max_iter
        self.iterations = 0
        self.log = []

    def run(self, c, basis, allowed):
        A, b = self.A, self.b
        m, n = A.shape
        while True:
            if self.iterations >= self.max_iter:
                raise LPSolverError("simplex iteration limit reached", log=self.log[-20:])
            B = A[:, basis]
            try:
                xb = np.linalg.solve(B, b)
                y = np.linalg.solve(B.T, c[basis])
            except np.linalg.LinAlgError as exc:
                raise LPSolverError(f"singular basis: {exc}", log=self.log[-20:]) from exc
            d = c - A.T @ y
            d[basis] = 0.0
            cand = np.flatnonzero((d < -self.tol) & allowed)
            if cand.size == 0:
                return "optimal", basis, xb, y
            enter = int(cand[0])
            u = np.linalg.solve(B, A[:, enter])
            rows = np.flatnonzero(u > self.tol)
            if rows.size == 0:
                return "unbounded", basis, xb, y
            ratios = np.maximum(xb[rows], 0.0) / u[rows]
            best = ratios.min()
            ties = rows[ratios <= best + self.tol * max(1.0, abs(best))]
            leave = int(ties[np.argmin(np.asarray(basis)[ties])])
            self.log.append((self.iterations, enter, basis[leave], float(best)))
            basis = list(basis)
            basis[leave] = enter
            self.iterations += 1


def _solve_simplex(lp: LinearProgram) -> LPSolution:
    As, b, cs, free, flip = _standard_form(lp)
    m, n = As.shape
    # phase 1 with one artificial per row
    A1 = np.hstack([As, np.eye(m)])
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    solver = _Simplex(A1, b)
    allowed = np.ones(n + m, dtype=bool)
    status, basis, xb, _ = solver.run(c1, list(range(n, n + m)), allowed)
    if float(c1[basis] @ xb) > 1e-9 * (1 + np.abs(b).max(initial=0.0)):
        return LPSolution(None, None, np.nan, "infeasible", iterations=solver.iterations, method="simplex")

    # pivot remaining artificials out of the basis; drop redundant rows
    keep = np.ones(m, dtype=bool)
    basis = list(basis)
    for r in range(m):
        if basis[r] < n:
            continue
        Binv_row = np.linalg.solve(A1[:, basis].T, np.eye(m)[r])
        alpha = Binv_row @ As
        alpha[[v for v in basis if v < n]] = 0.0
        cols = np.flatnonzero(np.abs(alpha) > 1e-9)
        if cols.size:
            basis[r] = int(cols[0])
        else:
            keep[r] = False
    rows = np.flatnonzero(keep)
    basis = [basis[r] for r in rows]
    solver2 = _Simplex(As[rows], b[rows])
    solver2.iterations = solver.iterations
    status, basis, xb, y_red = solver2.run(cs, basis, np.ones(n, dtype=bool))
    if status == "unbounded":
        sign = -1.0 if lp.maximize else 1.0
        return LPSolution(None, None, -sign * np.inf, "unbounded", iterations=solver2.iterations, method="simplex")

    xs = np.zeros(n)
    xs[basis] = xb
    n0 = lp.A.shape[1]
    x = xs[:n0].copy()
    x[free] -= xs[n0:n0 + len(free)]
    y = np.zeros(m)
    y[rows] = y_red
    y[flip] *= -1
    sign = -1.0 if lp.maximize else 1.0
    return LPSolution(x, sign * y, float(lp.c @ x), "optimal", iterations=solver2.iterations, method="simplex")


# ---------------------------------------------------------------------------
# plain-text triplet dump

def dump_triplets(lp: LinearProgram, path):
    """Write the LP as whitespace-separated sections for external cross-checks.

    Layout: a header ``# rows cols sense``, then ``A row col value`` triplets,
    ``c col value``, ``b row sense value`` and ``lb col value`` lines.
    """
    coo = lp.A.tocoo()
    with open(path, "w") as fh:
        fh.write(f"# {lp.shape[0]} {lp.shape[1]} {'max' if lp.maximize else 'min'}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"A {i} {j} {v:.17g}\n")
        for j, v in enumerate(lp.c):
            fh.write(f"c {j} {v:.17g}\n")
        for i, (s, v) in enumerate(zip(lp.senses, lp.b)):
            fh.write(f"b {i} {s} {v:.17g}\n")
        for j, v in enumerate(lp.lower):
            fh.write(f"lb {j} {v:.17g}\n")


def load_triplets(path) -> LinearProgram:
    with open(path) as fh:
        _, m, n, sense = fh.readline().split()
        m, n = int(m), int(n)
        rows, cols, vals = [], [], []
        c, b, lower = np.zeros(n), np.zeros(m), np.zeros(n)
        senses = np.empty(m, dtype=object)
        for line in fh:
            tag, *rest = line.split()
            if tag == "A":
                rows.append(int(rest[0]))
                cols.append(int(rest[1]))
                vals.append(float(rest[2]))
            elif tag == "c":
                c[int(rest[0])] = float(rest[1])
            elif tag == "b":
                senses[int(rest[0])] = rest[1]
                b[int(rest[0])] = float(rest[2])
            elif tag == "lb":
                lower[int(rest[0])] = float(rest[1])
    A = sp.csr_matrix((vals, (rows, cols)), shape=(m, n))
    return LinearProgram(c, A, b, senses, lower, maximize=sense == "max")
