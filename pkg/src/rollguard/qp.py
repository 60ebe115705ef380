"""Safety-filter quadratic program in the two commanded inputs.

    minimize  || u - u_nom ||^2
    s.t.      a_i . u >= beta_i   (constraint rows, at most two)
              lo <= u <= hi

With two variables and at most six inequalities the candidate active sets
can be enumerated exactly, which keeps every solve closed-form,
deterministic and allocation-light inside the control loop. Infeasible
problems never raise: they fall through to a best-effort relaxation that
maximizes the worst row slack over the box, and the caller logs a
safety-degradation event.

The heavy lifting lives in rollguard._kernels (compiled when available,
numpy fallback otherwise); this module owns the problem/solution types,
the degenerate-row policy, multipliers, and the relaxation path.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from . import _kernels
from .barrier import ConstraintRow
from .errors import DomainError

_FACE_LABELS = ("u_v_min", "u_v_max", "u_omega_min", "u_omega_max")
_DEGENERATE_NORM = 1e-12


class DegenerateRowWarning(UserWarning):
    """A constraint row with a near-zero coefficient vector was dropped.
    Routine while the robot is at rest (both row coefficients vanish with
    v = omega = 0); filter with warnings.simplefilter if undesired."""


@dataclass(frozen=True)
class QpProblem:
    u_nom: tuple[float, float]
    rows: tuple[ConstraintRow, ...]
    lower: tuple[float, float]
    upper: tuple[float, float]

    def __post_init__(self):
        if len(self.rows) > 2:
            raise DomainError("at most two constraint rows are supported")
        if not (self.lower[0] <= self.upper[0] and self.lower[1] <= self.upper[1]):
            raise DomainError("input box is empty")


@dataclass(frozen=True)
class QpSolution:
    u: tuple[float, float]
    status: str                      # "optimal" | "infeasible_relaxed"
    active: tuple[str, ...]          # labels of binding constraints
    slack_used: float                # worst residual accepted by relaxation
    objective: float
    kkt_residual: float | None
    multipliers: tuple[float, ...]


def _split_rows(rows):
    """Degenerate-row policy: near-zero coefficient rows are vacuous when
    beta <= 0 (dropped with a warning) and unsatisfiable when beta > 0."""
    keep = []
    forced = 0.0
    for row in rows:
        if math.hypot(row.a[0], row.a[1]) < _DEGENERATE_NORM:
            if row.beta > 0.0:
                forced = max(forced, row.beta)
            else:
                warnings.warn(f"dropping vacuous degenerate row {row.label!r}",
                              DegenerateRowWarning)
        else:
            keep.append(row)
    return keep, forced


def _constraint_gradients(rows):
    grads = [(row.a[0], row.a[1]) for row in rows]
    grads += [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)]
    labels = [row.label for row in rows] + list(_FACE_LABELS)
    return grads, labels


def _multipliers(u, u_nom, active, grads):
    """Multipliers of the active set from stationarity
    2 (u - u_nom) = sum lambda_j g_j, plus the residual norm."""
    rx = 2.0 * (u[0] - u_nom[0])
    ry = 2.0 * (u[1] - u_nom[1])
    if not active:
        return (), math.hypot(rx, ry)
    g = [grads[j] for j in active]
    if len(g) == 1:
        (g0, g1), = g
        denom = g0 * g0 + g1 * g1
        lam = ((rx * g0 + ry * g1) / denom,)
    else:
        (a0, a1), (b0, b1) = g
        det = a0 * b1 - a1 * b0
        if abs(det) < 1e-14:
            return (0.0, 0.0), math.hypot(rx, ry)
        lam = ((rx * b1 - ry * b0) / det, (a0 * ry - a1 * rx) / det)
    res = (rx - sum(l * gj[0] for l, gj in zip(lam, g)),
           ry - sum(l * gj[1] for l, gj in zip(lam, g)))
    return lam, math.hypot(*res)


def _kernel_args(u_nom, rows, lower, upper):
    a_flat = []
    b = []
    for row in rows:
        a_flat.extend(row.a)
        b.append(row.beta)
    return (u_nom[0], u_nom[1], tuple(a_flat), tuple(b), tuple(lower), tuple(upper))


def solve(problem: QpProblem) -> QpSolution:
    """Solve the filter QP; falls back to relax_infeasible when the rows
    and the box are incompatible."""
    rows, forced = _split_rows(problem.rows)
    if forced == 0.0:
        ux, uy, found, active_idx, obj = _kernels.solve_active_set(
            *_kernel_args(problem.u_nom, rows, problem.lower, problem.upper))
        if found:
            grads, labels = _constraint_gradients(rows)
            lam, res = _multipliers((ux, uy), problem.u_nom, active_idx, grads)
            return QpSolution(
                u=(ux, uy), status="optimal",
                active=tuple(labels[j] for j in active_idx),
                slack_used=0.0, objective=obj, kkt_residual=res,
                multipliers=lam)
    return _relax(problem, rows, forced)


def relax_infeasible(problem: QpProblem) -> QpSolution:
    """Best-effort input when no feasible point exists: maximize the
    minimum row slack over the box. Consistent with solve on feasible
    problems (returns the same optimal solution with zero slack)."""
    rows, forced = _split_rows(problem.rows)
    if forced == 0.0:
        args = _kernel_args(problem.u_nom, rows, problem.lower, problem.upper)
        ux, uy, found, active_idx, obj = _kernels.solve_active_set(*args)
        if found:
            grads, labels = _constraint_gradients(rows)
            lam, res = _multipliers((ux, uy), problem.u_nom, active_idx, grads)
            return QpSolution((ux, uy), "optimal",
                              tuple(labels[j] for j in active_idx), 0.0, obj,
                              res, lam)
    return _relax(problem, rows, forced)


def _relax(problem: QpProblem, rows, forced: float) -> QpSolution:
    lo, hi = problem.lower, problem.upper
    unx, uny = problem.u_nom

    def clamp(val, a, b):
        return min(max(val, a), b)

    if not rows:
        u = (clamp(unx, lo[0], hi[0]), clamp(uny, lo[1], hi[1]))
        return QpSolution(u, "infeasible_relaxed", (), forced,
                          (u[0] - unx) ** 2 + (u[1] - uny) ** 2, None, ())

    def min_slack(x, y):
        return min(row.a[0] * x + row.a[1] * y - row.beta for row in rows)

    candidates = [(lo[0], lo[1]), (lo[0], hi[1]), (hi[0], lo[1]), (hi[0], hi[1]),
                  # face projections of u_nom: break ties with the least
                  # deviation when a whole face maximizes the slack
                  (clamp(unx, lo[0], hi[0]), lo[1]),
                  (clamp(unx, lo[0], hi[0]), hi[1]),
                  (lo[0], clamp(uny, lo[1], hi[1])),
                  (hi[0], clamp(uny, lo[1], hi[1]))]
    if len(rows) == 2:
        # the max-min can also sit where the two slacks equalize
        (p, q), (r, s) = rows[0].a, rows[1].a
        d0, d1 = p - r, q - s
        c = rows[0].beta - rows[1].beta
        for x in (lo[0], hi[0]):
            if abs(d1) > 1e-14:
                y = (c - d0 * x) / d1
                if lo[1] - 1e-12 <= y <= hi[1] + 1e-12:
                    candidates.append((x, clamp(y, lo[1], hi[1])))
        for y in (lo[1], hi[1]):
            if abs(d0) > 1e-14:
                x = (c - d1 * y) / d0
                if lo[0] - 1e-12 <= x <= hi[0] + 1e-12:
                    candidates.append((clamp(x, lo[0], hi[0]), y))
        den = d0 * d0 + d1 * d1
        if den > 1e-28:
            s_eq = (c - d0 * unx - d1 * uny) / den
            candidates.append((clamp(unx + s_eq * d0, lo[0], hi[0]),
                               clamp(uny + s_eq * d1, lo[1], hi[1])))

    best = max(candidates,
               key=lambda u: (min_slack(*u),
                              -((u[0] - unx) ** 2 + (u[1] - uny) ** 2),
                              (-u[0], -u[1])))
    slack = min_slack(*best)
    worst = max(0.0, -slack, forced)
    active = tuple(row.label for row in rows
                   if row.a[0] * best[0] + row.a[1] * best[1] - row.beta
                   <= slack + 1e-9)
    return QpSolution(best, "infeasible_relaxed", active, worst,
                      (best[0] - unx) ** 2 + (best[1] - uny) ** 2, None, ())


def grid_oracle(problem: QpProblem, n0: int = 401, refinements: int = 6):
    """Brute-force reference: exact objective minimum over a regular grid
    with local refinement, independent of the active-set path.

    Returns (objective, (ux, uy)) or None when no feasible grid point
    exists."""
    rows, forced = _split_rows(problem.rows)
    if forced > 0.0:
        return None
    found, obj, ux, uy = _kernels.grid_min(
        *_kernel_args(problem.u_nom, rows, problem.lower, problem.upper),
        n0, refinements)
    if not found:
        return None
    return obj, (ux, uy)
