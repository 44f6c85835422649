# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled tableau pivoting loop. Mirrors ``_simplex_fallback.run_phase``."""

from libc.math cimport fabs

DEF OPTIMAL = 0
DEF UNBOUNDED = 1
DEF ITERATION_LIMIT = 2


def run_phase(double[:, ::1] T, double[::1] cost, long[::1] basis,
              unsigned char[::1] allowed, long max_iter, double tol,
              long bland_after):
    cdef Py_ssize_t m = T.shape[0]
    cdef Py_ssize_t n = T.shape[1] - 1
    cdef double piv_tol = 1e-9
    cdef bint bland = False
    cdef long degenerate_streak = 0
    cdef long it = 0
    cdef Py_ssize_t i, j, q, p
    cdef double best_rc, best, ratio, pv, f, slack

    while it < max_iter:
        q = -1
        best_rc = -tol
        for j in range(n):
            if allowed[j] and cost[j] < -tol:
                if bland:
                    q = j
                    break
                if cost[j] < best_rc:
                    best_rc = cost[j]
                    q = j
        if q < 0:
            return OPTIMAL, it, -1

        # two passes: minimum ratio, then tie-break among rows within 1e-12
        p = -1
        best = 0.0
        for i in range(m):
            if T[i, q] > piv_tol:
                ratio = T[i, n] / T[i, q]
                if p < 0 or ratio < best:
                    best = ratio
                    p = i
        if p < 0:
            return UNBOUNDED, it, q
        slack = 1e-12 * (fabs(best) if fabs(best) > 1.0 else 1.0)
        p = -1
        for i in range(m):
            if T[i, q] > piv_tol and T[i, n] / T[i, q] <= best + slack:
                if p < 0:
                    p = i
                elif bland:
                    if basis[i] < basis[p]:
                        p = i
                elif T[i, q] > T[p, q]:
                    p = i

        if best <= tol:
            degenerate_streak += 1
            if degenerate_streak > bland_after:
                bland = True
        else:
            degenerate_streak = 0

        pv = T[p, q]
        for j in range(n + 1):
            T[p, j] /= pv
        for i in range(m):
            if i == p:
                continue
            f = T[i, q]
            if f != 0.0:
                for j in range(n + 1):
                    T[i, j] -= f * T[p, j]
            T[i, q] = 0.0
        T[p, q] = 1.0
        f = cost[q]
        if f != 0.0:
            for j in range(n + 1):
                cost[j] -= f * T[p, j]
        cost[q] = 0.0
        basis[p] = q
        it += 1
    return ITERATION_LIMIT, it, -1
