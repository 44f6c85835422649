"""Pure-numpy tableau pivoting loop; drop-in for the compiled ``_simplex_kernel``."""

import numpy as np

OPTIMAL = 0
UNBOUNDED = 1
ITERATION_LIMIT = 2


def run_phase(T, cost, basis, allowed, max_iter, tol, bland_after):
    """Pivot ``T`` in place until no allowed column has negative reduced cost.

    ``T`` is the (m, n+1) tableau with the right-hand side in the last column,
    ``cost`` the (n+1,) reduced-cost row (last entry is minus the objective).
    Dantzig pricing is used until ``bland_after`` consecutive degenerate
    pivots have occurred, after which Bland's rule takes over for good.

    Returns ``(status, iterations, column)``; ``column`` is the entering
    column that proved unboundedness, else -1.
    """
    m = T.shape[0]
    n = T.shape[1] - 1
    piv_tol = 1e-9
    bland = False
    degenerate_streak = 0
    it = 0
    allowed = np.asarray(allowed, dtype=bool)
    while it < max_iter:
        rc = cost[:n]
        candidates = np.flatnonzero(allowed & (rc < -tol))
        if candidates.size == 0:
            return OPTIMAL, it, -1
        if bland:
            q = int(candidates[0])
        else:
            q = int(candidates[np.argmin(rc[candidates])])

        col = T[:, q]
        rows = np.flatnonzero(col > piv_tol)
        if rows.size == 0:
            return UNBOUNDED, it, q
        ratios = T[rows, n] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
        if bland:
            p = int(ties[np.argmin(basis[ties])])
        else:
            p = int(ties[np.argmax(col[ties])])

        if best <= tol:
            degenerate_streak += 1
            if degenerate_streak > bland_after:
                bland = True
        else:
            degenerate_streak = 0

        T[p, :] /= T[p, q]
        factors = T[:, q].copy()
        factors[p] = 0.0
        T -= np.outer(factors, T[p, :])
        T[:, q] = 0.0
        T[p, q] = 1.0
        cost -= cost[q] * T[p, :]
        cost[q] = 0.0
        basis[p] = q
        it += 1
    return ITERATION_LIMIT, it, -1
