"""Pure-Python/numpy fallback for the QP kernels.

Mirrors _qpcore.pyx; keep the two implementations line-parallel when
editing either.
"""

from __future__ import annotations

import math

import numpy as np

_FEAS_TOL = 1e-9


def _constraint_list(a_flat, b, lo, hi):
    # rows first, then box faces: x>=lo, -x>=-hi, y>=lo, -y>=-hi
    cons = []
    k = len(b)
    for i in range(k):
        cons.append((a_flat[2 * i], a_flat[2 * i + 1], b[i]))
    cons.append((1.0, 0.0, lo[0]))
    cons.append((-1.0, 0.0, -hi[0]))
    cons.append((0.0, 1.0, lo[1]))
    cons.append((0.0, -1.0, -hi[1]))
    return cons


def solve_active_set(unx, uny, a_flat, b, lo, hi):
    """Exact active-set enumeration for min ||u - u_nom||^2 over rows plus
    box. Candidate order (size, then lexicographic) is the tie-break.

    Returns (ux, uy, found, active_indices, objective).
    """
    cons = _constraint_list(a_flat, b, lo, hi)
    n = len(cons)

    def feasible(x, y):
        for g0, g1, rhs in cons:
            if g0 * x + g1 * y < rhs - _FEAS_TOL:
                return False
        return True

    best_obj = math.inf
    best = None

    def consider(x, y, active):
        nonlocal best_obj, best
        if not (math.isfinite(x) and math.isfinite(y)):
            return
        if not feasible(x, y):
            return
        obj = (x - unx) ** 2 + (y - uny) ** 2
        if obj < best_obj:
            best_obj = obj
            best = (x, y, active)

    consider(unx, uny, ())

    for j in range(n):
        g0, g1, rhs = cons[j]
        denom = g0 * g0 + g1 * g1
        if denom < 1e-24:
            continue
        s = (rhs - (g0 * unx + g1 * uny)) / denom
        consider(unx + s * g0, uny + s * g1, (j,))

    for i in range(n):
        gi0, gi1, ri = cons[i]
        ni = math.hypot(gi0, gi1)
        for j in range(i + 1, n):
            gj0, gj1, rj = cons[j]
            det = gi0 * gj1 - gi1 * gj0
            if abs(det) < 1e-10 * ni * math.hypot(gj0, gj1):
                continue
            x = (ri * gj1 - rj * gi1) / det
            y = (gi0 * rj - gj0 * ri) / det
            consider(x, y, (i, j))

    if best is None:
        return (unx, uny, 0, (), math.inf)
    return (best[0], best[1], 1, best[2], best_obj)


def _column_scan(unx, uny, rows, x0, x1, nx, y0, y1, ny):
    """Minimum of the objective over x-columns of a regular grid.

    Per x-column the feasible y set is an interval. With ny > 0 the column
    is quantized to the ny-point y grid and only the grid point nearest the
    unconstrained optimum matters (this reproduces the full nx x ny grid
    minimum exactly); with ny = 0 the column minimum is taken over the
    continuous interval, which makes the scan exact in y.

    Returns (found, obj, x, y).
    """
    xs = np.linspace(x0, x1, nx) if nx > 1 else np.array([x0])

    ylo = np.full(xs.shape, y0)
    yhi = np.full(xs.shape, y1)
    feas = np.ones(xs.shape, dtype=bool)
    for a0, a1, rhs in rows:
        r = rhs - a0 * xs
        if a1 > 1e-300:
            ylo = np.maximum(ylo, r / a1)
        elif a1 < -1e-300:
            yhi = np.minimum(yhi, r / a1)
        else:
            feas &= a0 * xs >= rhs - 1e-12
    feas &= ylo <= yhi + 1e-15

    if ny > 1:
        dy = (y1 - y0) / (ny - 1)
        if dy > 0.0:
            jlo = np.ceil((ylo - y0) / dy - 1e-12)
            jhi = np.floor((yhi - y0) / dy + 1e-12)
            np.clip(jlo, 0, ny - 1, out=jlo)
            np.clip(jhi, 0, ny - 1, out=jhi)
            feas &= jlo <= jhi
            jstar = np.clip(round((uny - y0) / dy), jlo, jhi)
            ys = y0 + jstar * dy
        else:
            feas &= (ylo <= y0 + 1e-15) & (yhi >= y0 - 1e-15)
            ys = np.full(xs.shape, y0)
    elif ny == 1:
        feas &= (ylo <= y0 + 1e-15) & (yhi >= y0 - 1e-15)
        ys = np.full(xs.shape, y0)
    else:
        ys = np.clip(uny, ylo, yhi)

    obj = (xs - unx) ** 2 + (ys - uny) ** 2
    obj[~feas] = np.inf
    i = int(np.argmin(obj))
    if not np.isfinite(obj[i]):
        return (0, math.inf, 0.0, 0.0)
    return (1, float(obj[i]), float(xs[i]), float(ys[i]))


def grid_min(unx, uny, a_flat, b, lo, hi, n0=401, refinements=6, expand=6,
             walk_limit=64):
    """Grid search over the box with local refinement.

    Level 0 is the exact minimum over the full n0 x n0 grid. Refinement
    passes re-grid x inside a (2*expand cells)-wide window around the
    incumbent at 161 columns, minimizing each column exactly over its
    continuous feasible y interval; partial minimization keeps the column
    objective convex in x, so walking the window while the incumbent lands
    on its edge converges. Returns (found, obj, x, y)."""
    k = len(b)
    rows = [(a_flat[2 * i], a_flat[2 * i + 1], b[i]) for i in range(k)]
    x0g, y0g = lo[0], lo[1]
    x1g, y1g = hi[0], hi[1]

    found, obj, bx, by = _column_scan(unx, uny, rows, x0g, x1g, n0, y0g, y1g, n0)
    if not found:
        return (0, math.inf, 0.0, 0.0)
    sx = (x1g - x0g) / (n0 - 1)
    n1 = 161

    for _ in range(refinements):
        for _ in range(walk_limit):
            wx = expand * sx
            cx0, cx1 = max(x0g, bx - wx), min(x1g, bx + wx)
            f2, o2, x2, y2 = _column_scan(unx, uny, rows, cx0, cx1, n1,
                                          y0g, y1g, 0)
            improved = f2 and o2 < obj
            if improved:
                obj, bx, by = o2, x2, y2
            on_edge = ((abs(x2 - cx0) < 1e-15 and cx0 > x0g + 1e-15)
                       or (abs(x2 - cx1) < 1e-15 and cx1 < x1g - 1e-15))
            if not (improved and on_edge):
                break
        sx *= 2.0 * expand / (n1 - 1)
    return (1, obj, bx, by)
