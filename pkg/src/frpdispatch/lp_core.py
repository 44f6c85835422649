"""Dense two-phase simplex with full dual recovery.

Problems are stated as::

    minimize    c @ x
    subject to  a_eq @ x == b_eq
                a_ub @ x <= b_ub
                lower <= x <= upper

with ``math.inf`` / ``-math.inf`` marking absent bounds.  The solver returns
primal values, one multiplier per equality row (``dual_eq``, the derivative
of the optimal cost with respect to ``b_eq``), one nonnegative multiplier per
inequality row (``dual_ineq``, minus the derivative with respect to
``b_ub``) and reduced costs ``c - a_eq.T @ dual_eq + a_ub.T @ dual_ineq``.

The pivoting loop runs in a compiled Cython kernel when it has been built,
otherwise in an equivalent numpy implementation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _simplex_fallback

try:
    from . import _simplex_kernel
except ImportError:  # extension not built
    _simplex_kernel = None

INF = math.inf

FEAS_TOL = 1e-8
DUAL_TOL = 1e-9
GAP_TOL = 1e-7
CS_TOL = 1e-7

_PIVOT_TOL = 1e-10
_BLAND_AFTER = 50

_BACKENDS = {"python": _simplex_fallback.run_phase}
if _simplex_kernel is not None:
    _BACKENDS["compiled"] = _simplex_kernel.run_phase
_backend = "compiled" if _simplex_kernel is not None else "python"


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    """Select the pivoting kernel (``"compiled"`` or ``"python"``)."""
    global _backend
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {available_backends()}")
    _backend = name


class LpValidationError(ValueError):
    """Malformed LP data (dimension mismatch, crossed bounds, NaN)."""


class LpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


def _as_matrix(a, n, name):
    if a is None:
        return np.zeros((0, n))
    a = np.asarray(a, dtype=float)
    if a.ndim == 1 and a.size == 0:
        return np.zeros((0, n))
    if a.ndim != 2 or a.shape[1] != n:
        raise LpValidationError(f"{name} must have shape (rows, {n}), got {a.shape}")
    return a


def _as_vector(b, n, name):
    if b is None:
        return np.zeros(0)
    b = np.asarray(b, dtype=float).reshape(-1)
    if b.shape[0] != n:
        raise LpValidationError(f"{name} must have length {n}, got {b.shape[0]}")
    return b


@dataclass(frozen=True, eq=False)
class StandardLp:
    c: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    names: tuple[str, ...] = ()

    @classmethod
    def create(cls, c, a_eq=None, b_eq=None, a_ub=None, b_ub=None,
               lower=None, upper=None, names: Sequence[str] = ()) -> "StandardLp":
        """Validate and normalise raw arrays. Bounds default to ``[0, inf)``."""
        c = np.asarray(c, dtype=float).reshape(-1)
        n = c.shape[0]
        a_eq = _as_matrix(a_eq, n, "a_eq")
        b_eq = _as_vector(b_eq, a_eq.shape[0], "b_eq")
        a_ub = _as_matrix(a_ub, n, "a_ub")
        b_ub = _as_vector(b_ub, a_ub.shape[0], "b_ub")
        lower = np.zeros(n) if lower is None else _as_vector(lower, n, "lower")
        upper = np.full(n, INF) if upper is None else _as_vector(upper, n, "upper")
        for name, arr in (("c", c), ("a_eq", a_eq), ("b_eq", b_eq),
                          ("a_ub", a_ub), ("b_ub", b_ub)):
            if not np.all(np.isfinite(arr)):
                raise LpValidationError(f"{name} contains non-finite entries")
        if np.any(np.isnan(lower)) or np.any(np.isnan(upper)):
            raise LpValidationError("bounds contain NaN")
        if np.any(lower == INF) or np.any(upper == -INF):
            raise LpValidationError("lower bound +inf or upper bound -inf")
        if np.any(lower > upper):
            j = int(np.flatnonzero(lower > upper)[0])
            raise LpValidationError(f"variable {j}: lower {lower[j]} > upper {upper[j]}")
        names = tuple(names)
        if names and len(names) != n:
            raise LpValidationError(f"names must have length {n}, got {len(names)}")
        return cls(c, a_eq, b_eq, a_ub, b_ub, lower, upper, names)

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]

    def dump(self) -> str:
        """Plain-text listing of the instance, for bug reports."""
        names = self.names or tuple(f"x{j}" for j in range(self.n_vars))
        width = max(8, max(len(s) for s in names) + 1) if names else 8
        fmt = lambda v: f"{v:>{width}.6g}"
        lines = ["vars " + "".join(f"{s:>{width}}" for s in names),
                 "c    " + "".join(fmt(v) for v in self.c)]
        for r, row in enumerate(self.a_eq):
            lines.append(f"eq{r:<3}" + "".join(fmt(v) for v in row) + f"  = {self.b_eq[r]:.10g}")
        for r, row in enumerate(self.a_ub):
            lines.append(f"ub{r:<3}" + "".join(fmt(v) for v in row) + f"  <= {self.b_ub[r]:.10g}")
        lines.append("lo   " + "".join(fmt(v) for v in self.lower))
        lines.append("up   " + "".join(fmt(v) for v in self.upper))
        return "\n".join(lines)


@dataclass(eq=False)
class LpSolution:
    status: LpStatus
    primal: np.ndarray
    dual_eq: np.ndarray
    dual_ineq: np.ndarray
    reduced_costs: np.ndarray
    objective_value: float
    iterations: int = 0
    # infeasible: Farkas multipliers y (eq rows, ub rows, then one row per
    # finite-range variable) with y @ A <= 0 and y @ b > 0 on the shifted
    # problem; unbounded: a recession direction in x-space.
    certificate: Optional[np.ndarray] = None

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


@dataclass(frozen=True)
class OptimalityReport:
    primal_residual: float
    dual_infeasibility: float
    stationarity: float
    complementary_slackness: float
    duality_gap: float
    dual_objective: float
    passed: bool


# -- standard-form conversion -------------------------------------------------

@dataclass
class _StdForm:
    A: np.ndarray            # (m, N) with slack columns
    b: np.ndarray            # nonnegative rhs
    cost: np.ndarray         # (N,)
    sign: np.ndarray         # row multiplier applied to reach b >= 0
    n_struct: int            # columns representing original variables
    shift: np.ndarray        # x = shift + M @ z[:n_struct]
    M: np.ndarray
    n_eq: int
    n_ub: int
    slack_cols: dict = field(default_factory=dict)  # row -> slack column
    art_rows: list = field(default_factory=list)


def _standard_form(lp: StandardLp) -> _StdForm:
    n = lp.n_vars
    cols = []       # (original var, +1/-1)
    shift = np.zeros(n)
    bound_rows = []  # (column index, range)
    for j in range(n):
        lo, up = lp.lower[j], lp.upper[j]
        if math.isfinite(lo):
            shift[j] = lo
            cols.append((j, 1.0))
            if math.isfinite(up):
                bound_rows.append((len(cols) - 1, up - lo))
        elif math.isfinite(up):
            shift[j] = up
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    ns = len(cols)
    M = np.zeros((n, ns))
    for k, (j, s) in enumerate(cols):
        M[j, k] = s

    n_eq, n_ub, n_bd = lp.a_eq.shape[0], lp.a_ub.shape[0], len(bound_rows)
    m = n_eq + n_ub + n_bd
    n_slack = n_ub + n_bd
    A = np.zeros((m, ns + n_slack))
    b = np.zeros(m)
    A[:n_eq, :ns] = lp.a_eq @ M
    b[:n_eq] = lp.b_eq - lp.a_eq @ shift
    A[n_eq:n_eq + n_ub, :ns] = lp.a_ub @ M
    b[n_eq:n_eq + n_ub] = lp.b_ub - lp.a_ub @ shift
    for r, (k, rng) in enumerate(bound_rows):
        A[n_eq + n_ub + r, k] = 1.0
        b[n_eq + n_ub + r] = rng
    slack_cols = {}
    for r in range(n_slack):
        A[n_eq + r, ns + r] = 1.0
        slack_cols[n_eq + r] = ns + r
    sign = np.where(b < 0, -1.0, 1.0)
    A *= sign[:, None]
    b *= sign
    cost = np.zeros(ns + n_slack)
    cost[:ns] = lp.c @ M
    return _StdForm(A, b, cost, sign, ns, shift, M, n_eq, n_ub, slack_cols)


def _price_out(T, cost_vec, basis):
    """Reduced-cost row for ``cost_vec`` given the current tableau."""
    row = np.zeros(T.shape[1])
    row[:-1] = cost_vec
    for i, j in enumerate(basis):
        if row[j] != 0.0:
            row -= row[j] * T[i]
    return row


def solve(lp: StandardLp, max_iter: int = 10_000) -> LpSolution:
    """Solve ``lp`` to optimality or prove it infeasible/unbounded."""
    if not isinstance(lp, StandardLp):
        raise LpValidationError("solve() expects a StandardLp")
    run_phase = _BACKENDS[_backend]
    sf = _standard_form(lp)
    m, N = sf.A.shape

    # Initial basis: slack where its coefficient stayed +1, artificial otherwise.
    basis = np.empty(m, dtype=np.int64)
    art_rows = []
    for i in range(m):
        s = sf.slack_cols.get(i)
        if s is not None and sf.A[i, s] > 0:
            basis[i] = s
        else:
            art_rows.append(i)
    sf.art_rows = art_rows
    n_art = len(art_rows)
    total = N + n_art
    T = np.zeros((m, total + 1))
    T[:, :N] = sf.A
    T[:, -1] = sf.b
    for k, i in enumerate(art_rows):
        T[i, N + k] = 1.0
        basis[i] = N + k
    T = np.ascontiguousarray(T)

    iterations = 0
    allowed = np.ones(total, dtype=np.uint8)
    if n_art:
        phase1 = np.zeros(total)
        phase1[N:] = 1.0
        cost_row = _price_out(T, phase1, basis)
        status, it, _ = run_phase(T, cost_row, basis, allowed, max_iter, _PIVOT_TOL, _BLAND_AFTER)
        iterations += it
        if status == _simplex_fallback.ITERATION_LIMIT:
            raise RuntimeError("simplex iteration limit reached in phase 1")
        infeas = -cost_row[-1]
        if infeas > FEAS_TOL * max(1.0, float(np.max(np.abs(sf.b), initial=0.0))):
            y = np.linalg.solve(_basis_matrix(sf, basis, N).T, phase1[basis])
            return _failure(lp, LpStatus.INFEASIBLE, iterations, y * sf.sign)
        _drive_out_artificials(T, basis, N)
        allowed[N:] = 0

    phase2 = np.zeros(total)
    phase2[:N] = sf.cost
    cost_row = _price_out(T, phase2, basis)
    status, it, q = run_phase(T, cost_row, basis, allowed, max_iter, _PIVOT_TOL, _BLAND_AFTER)
    iterations += it
    if status == _simplex_fallback.ITERATION_LIMIT:
        raise RuntimeError("simplex iteration limit reached in phase 2")
    if status == _simplex_fallback.UNBOUNDED:
        return _failure(lp, LpStatus.UNBOUNDED, iterations, _ray(sf, T, basis, q))
    return _recover(lp, sf, basis, N, iterations)


def _drive_out_artificials(T, basis, N):
    m = T.shape[0]
    for i in range(m):
        if basis[i] < N:
            continue
        row = T[i, :N]
        j = int(np.argmax(np.abs(row)))
        if abs(row[j]) <= 1e-9:
            continue  # redundant row; artificial stays basic at zero
        T[i] /= T[i, j]
        for r in range(m):
            if r != i and T[r, j] != 0.0:
                T[r] -= T[r, j] * T[i]
        basis[i] = j


def _basis_matrix(sf, basis, N):
    m = sf.A.shape[0]
    B = np.empty((m, m))
    for i, j in enumerate(basis):
        if j < N:
            B[:, i] = sf.A[:, j]
        else:
            B[:, i] = 0.0
            B[sf.art_rows[j - N], i] = 1.0
    return B


def _ray(sf, T, basis, q):
    N = sf.A.shape[1]
    d = np.zeros(N)
    d[q] = 1.0
    for i, j in enumerate(basis):
        if j < N:
            d[j] = -T[i, q]
    return sf.M @ d[: sf.n_struct]


def _failure(lp, status, iterations, certificate):
    n = lp.n_vars
    return LpSolution(status, np.full(n, np.nan), np.full(lp.a_eq.shape[0], np.nan),
                      np.full(lp.a_ub.shape[0], np.nan), np.full(n, np.nan), math.nan,
                      iterations, certificate)


def _recover(lp, sf, basis, N, iterations):
    B = _basis_matrix(sf, basis, N)
    z = np.zeros(N)
    xb = np.linalg.solve(B, sf.b)
    for i, j in enumerate(basis):
        if j < N:
            z[j] = xb[i]
    cb = np.array([sf.cost[j] if j < N else 0.0 for j in basis])
    y_std = np.linalg.solve(B.T, cb) * sf.sign

    x = sf.shift + sf.M @ z[: sf.n_struct]
    # snap to bounds lost to round-off
    for bound in (lp.lower, lp.upper):
        near = np.isfinite(bound) & (np.abs(x - bound) <= 1e-12 * np.maximum(1.0, np.abs(bound)))
        x = np.where(near, bound, x)

    dual_eq = y_std[: sf.n_eq].copy()
    dual_ineq = -y_std[sf.n_eq: sf.n_eq + sf.n_ub]
    dual_ineq[np.abs(dual_ineq) < 1e-13] = 0.0
    dual_eq[np.abs(dual_eq) < 1e-13] = 0.0
    red = reduced_costs(lp, dual_eq, dual_ineq)
    return LpSolution(LpStatus.OPTIMAL, x, dual_eq, dual_ineq, red,
                      float(lp.c @ x), iterations, None)


def reduced_costs(lp: StandardLp, dual_eq, dual_ineq) -> np.ndarray:
    d = lp.c - lp.a_eq.T @ dual_eq + lp.a_ub.T @ dual_ineq
    d[np.abs(d) < 1e-12] = 0.0
    return d


def verify_optimality(lp: StandardLp, sol: LpSolution,
                      feas_tol: float = FEAS_TOL, dual_tol: float = DUAL_TOL,
                      cs_tol: float = CS_TOL, gap_tol: float = GAP_TOL) -> OptimalityReport:
    """Check primal/dual feasibility, stationarity, complementarity and the gap.

    Every measure is recomputed from ``lp`` and the primal/dual vectors; the
    report passes iff each is within its tolerance.
    """
    x, y, z = sol.primal, sol.dual_eq, sol.dual_ineq
    if not np.all(np.isfinite(x)):
        return OptimalityReport(math.inf, math.inf, math.inf, math.inf, math.inf, math.nan, False)

    res = [0.0]
    if lp.a_eq.shape[0]:
        res.append(np.max(np.abs(lp.a_eq @ x - lp.b_eq) / np.maximum(1.0, np.abs(lp.b_eq))))
    ub_slack = lp.b_ub - lp.a_ub @ x
    if lp.a_ub.shape[0]:
        res.append(np.max(np.maximum(0.0, -ub_slack) / np.maximum(1.0, np.abs(lp.b_ub))))
    fin_lo = np.isfinite(lp.lower)
    fin_up = np.isfinite(lp.upper)
    lo_gap = np.where(fin_lo, x - np.where(fin_lo, lp.lower, 0.0), INF)
    up_gap = np.where(fin_up, np.where(fin_up, lp.upper, 0.0) - x, INF)
    if fin_lo.any():
        res.append(np.max(np.maximum(0.0, -lo_gap[fin_lo]) / np.maximum(1.0, np.abs(lp.lower[fin_lo]))))
    if fin_up.any():
        res.append(np.max(np.maximum(0.0, -up_gap[fin_up]) / np.maximum(1.0, np.abs(lp.upper[fin_up]))))
    primal_residual = float(max(res))

    d = lp.c - lp.a_eq.T @ y + lp.a_ub.T @ z
    stationarity = float(np.max(np.abs(d - sol.reduced_costs), initial=0.0))
    d_lo = np.maximum(d, 0.0)   # multiplier on the lower bound
    d_up = np.maximum(-d, 0.0)  # multiplier on the upper bound
    dual_viol = [0.0, float(np.max(np.maximum(0.0, -z), initial=0.0))]
    dual_viol.append(float(np.max(np.where(fin_lo, 0.0, d_lo), initial=0.0)))
    dual_viol.append(float(np.max(np.where(fin_up, 0.0, d_up), initial=0.0)))
    dual_infeasibility = max(dual_viol)

    cs = [0.0]
    if lp.a_ub.shape[0]:
        cs.append(np.max(np.abs(z * ub_slack) / np.maximum(1.0, np.abs(lp.b_ub))))
    if fin_lo.any():
        cs.append(np.max(d_lo[fin_lo] * np.abs(lo_gap[fin_lo]) / np.maximum(1.0, np.abs(lp.lower[fin_lo]))))
    if fin_up.any():
        cs.append(np.max(d_up[fin_up] * np.abs(up_gap[fin_up]) / np.maximum(1.0, np.abs(lp.upper[fin_up]))))
    complementary = float(max(cs))

    primal_obj = float(lp.c @ x)
    dual_obj = float(lp.b_eq @ y - lp.b_ub @ z
                     + np.sum(np.where(fin_lo, d_lo * np.where(fin_lo, lp.lower, 0.0), 0.0))
                     - np.sum(np.where(fin_up, d_up * np.where(fin_up, lp.upper, 0.0), 0.0)))
    gap = abs(primal_obj - dual_obj) / max(1.0, abs(primal_obj))

    passed = (primal_residual <= feas_tol and dual_infeasibility <= dual_tol
              and stationarity <= dual_tol and complementary <= cs_tol and gap <= gap_tol)
    return OptimalityReport(primal_residual, dual_infeasibility, stationarity,
                            complementary, gap, dual_obj, passed)
