# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled QP kernels; mirrors _pyfallback.py. Keep the two
implementations line-parallel when editing either."""

from libc.math cimport INFINITY, ceil, fabs, floor, isfinite, round as c_round, sqrt

cdef double FEAS_TOL = 1e-9

cdef enum:
    MAX_CON = 12


cdef struct Best:
    double x
    double y
    double obj
    int found


cdef inline bint _feasible(double x, double y, double* g0, double* g1,
                           double* rhs, int n) nogil:
    cdef int i
    for i in range(n):
        if g0[i] * x + g1[i] * y < rhs[i] - FEAS_TOL:
            return False
    return True


def solve_active_set(double unx, double uny, a_flat, b, lo, hi):
    """Exact active-set enumeration for min ||u - u_nom||^2 over rows plus
    box. Candidate order (size, then lexicographic) is the tie-break.

    Returns (ux, uy, found, active_indices, objective).
    """
    cdef double g0[MAX_CON]
    cdef double g1[MAX_CON]
    cdef double rhs[MAX_CON]
    cdef int k = len(b)
    cdef int n = k + 4
    cdef int i, j
    if n > MAX_CON:
        raise ValueError("too many constraints")
    for i in range(k):
        g0[i] = a_flat[2 * i]
        g1[i] = a_flat[2 * i + 1]
        rhs[i] = b[i]
    g0[k] = 1.0;  g1[k] = 0.0;  rhs[k] = lo[0]
    g0[k + 1] = -1.0;  g1[k + 1] = 0.0;  rhs[k + 1] = -hi[0]
    g0[k + 2] = 0.0;  g1[k + 2] = 1.0;  rhs[k + 2] = lo[1]
    g0[k + 3] = 0.0;  g1[k + 3] = -1.0;  rhs[k + 3] = -hi[1]

    cdef Best best
    best.found = 0
    best.obj = INFINITY
    best.x = unx
    best.y = uny
    cdef int act_a = -1, act_b = -1
    cdef double x, y, obj, denom, s, det, ni, nj

    if _feasible(unx, uny, g0, g1, rhs, n):
        best.found = 1
        best.obj = 0.0

    for j in range(n):
        denom = g0[j] * g0[j] + g1[j] * g1[j]
        if denom < 1e-24:
            continue
        s = (rhs[j] - (g0[j] * unx + g1[j] * uny)) / denom
        x = unx + s * g0[j]
        y = uny + s * g1[j]
        if not (isfinite(x) and isfinite(y)):
            continue
        if not _feasible(x, y, g0, g1, rhs, n):
            continue
        obj = (x - unx) * (x - unx) + (y - uny) * (y - uny)
        if obj < best.obj:
            best.found = 1
            best.obj = obj
            best.x = x
            best.y = y
            act_a = j
            act_b = -1

    for i in range(n):
        ni = sqrt(g0[i] * g0[i] + g1[i] * g1[i])
        for j in range(i + 1, n):
            nj = sqrt(g0[j] * g0[j] + g1[j] * g1[j])
            det = g0[i] * g1[j] - g1[i] * g0[j]
            if fabs(det) < 1e-10 * ni * nj:
                continue
            x = (rhs[i] * g1[j] - rhs[j] * g1[i]) / det
            y = (g0[i] * rhs[j] - g0[j] * rhs[i]) / det
            if not (isfinite(x) and isfinite(y)):
                continue
            if not _feasible(x, y, g0, g1, rhs, n):
                continue
            obj = (x - unx) * (x - unx) + (y - uny) * (y - uny)
            if obj < best.obj:
                best.found = 1
                best.obj = obj
                best.x = x
                best.y = y
                act_a = i
                act_b = j

    if not best.found:
        return (unx, uny, 0, (), INFINITY)
    if best.obj == 0.0 and act_a == -1:
        return (best.x, best.y, 1, (), 0.0)
    if act_b == -1 and act_a == -1:
        return (best.x, best.y, 1, (), best.obj)
    if act_b == -1:
        return (best.x, best.y, 1, (act_a,), best.obj)
    return (best.x, best.y, 1, (act_a, act_b), best.obj)


cdef int _column_scan(double unx, double uny, double* a0, double* a1,
                      double* brow, int k, double x0, double x1, int nx,
                      double y0, double y1, int ny, double* out) nogil:
    """Minimum of the objective over x-columns of a regular grid; the
    feasible y set per column is an interval. ny > 0 quantizes y to the
    ny-point grid (reproducing the full nx x ny grid minimum exactly);
    ny = 0 minimizes each column over the continuous interval."""
    cdef double dx = (x1 - x0) / (nx - 1) if nx > 1 else 0.0
    cdef double yspan = y1 - y0
    cdef double dy = yspan / (ny - 1) if ny > 1 else 0.0
    cdef double best_obj = INFINITY
    cdef double best_x = 0.0, best_y = 0.0
    cdef int i, r, ok
    cdef double x, ylo, yhi, rr, bound, jlo, jhi, jstar, y, obj

    for i in range(nx):
        x = x0 + i * dx
        ylo = y0
        yhi = y1
        ok = 1
        for r in range(k):
            rr = brow[r] - a0[r] * x
            if a1[r] > 1e-300:
                bound = rr / a1[r]
                if bound > ylo:
                    ylo = bound
            elif a1[r] < -1e-300:
                bound = rr / a1[r]
                if bound < yhi:
                    yhi = bound
            else:
                if a0[r] * x < brow[r] - 1e-12:
                    ok = 0
                    break
        if not ok or ylo > yhi + 1e-15:
            continue
        if ny > 1 and dy > 0.0:
            jlo = ceil((ylo - y0) / dy - 1e-12)
            jhi = floor((yhi - y0) / dy + 1e-12)
            if jlo < 0.0:
                jlo = 0.0
            if jhi > ny - 1:
                jhi = ny - 1
            if jlo > jhi:
                continue
            jstar = c_round((uny - y0) / dy)
            if jstar < jlo:
                jstar = jlo
            if jstar > jhi:
                jstar = jhi
            y = y0 + jstar * dy
        elif ny >= 1:
            if ylo > y0 + 1e-15 or yhi < y0 - 1e-15:
                continue
            y = y0
        else:
            y = uny
            if y < ylo:
                y = ylo
            if y > yhi:
                y = yhi
        obj = (x - unx) * (x - unx) + (y - uny) * (y - uny)
        if obj < best_obj:
            best_obj = obj
            best_x = x
            best_y = y

    if best_obj == INFINITY:
        return 0
    out[0] = best_obj
    out[1] = best_x
    out[2] = best_y
    return 1


def grid_min(double unx, double uny, a_flat, b, lo, hi, int n0=401,
             int refinements=6, int expand=6, int walk_limit=64):
    """Grid search over the box with local refinement.

    Level 0 is the exact minimum over the full n0 x n0 grid. Refinement
    passes re-grid x inside a (2*expand cells)-wide window around the
    incumbent at 161 columns, minimizing each column exactly over its
    continuous feasible y interval; partial minimization keeps the column
    objective convex in x, so walking the window while the incumbent lands
    on its edge converges. Returns (found, obj, x, y)."""
    cdef double a0[MAX_CON]
    cdef double a1[MAX_CON]
    cdef double brow[MAX_CON]
    cdef int k = len(b)
    cdef int i
    if k > MAX_CON:
        raise ValueError("too many rows")
    for i in range(k):
        a0[i] = a_flat[2 * i]
        a1[i] = a_flat[2 * i + 1]
        brow[i] = b[i]

    cdef double x0g = lo[0], y0g = lo[1], x1g = hi[0], y1g = hi[1]
    cdef double out[3]
    cdef int found = _column_scan(unx, uny, a0, a1, brow, k, x0g, x1g, n0,
                                  y0g, y1g, n0, out)
    if not found:
        return (0, INFINITY, 0.0, 0.0)
    cdef double obj = out[0], bx = out[1], by = out[2]
    cdef double sx = (x1g - x0g) / (n0 - 1)
    cdef int n1 = 161
    cdef int level, walk, f2, improved, on_edge
    cdef double wx, cx0, cx1, o2, x2, y2

    for level in range(refinements):
        for walk in range(walk_limit):
            wx = expand * sx
            cx0 = bx - wx
            if cx0 < x0g:
                cx0 = x0g
            cx1 = bx + wx
            if cx1 > x1g:
                cx1 = x1g
            f2 = _column_scan(unx, uny, a0, a1, brow, k, cx0, cx1, n1,
                              y0g, y1g, 0, out)
            o2 = out[0]
            x2 = out[1]
            y2 = out[2]
            improved = f2 and o2 < obj
            if improved:
                obj = o2
                bx = x2
                by = y2
            on_edge = ((fabs(x2 - cx0) < 1e-15 and cx0 > x0g + 1e-15)
                       or (fabs(x2 - cx1) < 1e-15 and cx1 < x1g - 1e-15))
            if not (improved and on_edge):
                break
        sx *= 2.0 * expand / (n1 - 1)
    return (1, obj, bx, by)
