import math

import numpy as np
import pytest

from rollguard import qp
from rollguard.barrier import ConstraintRow
from rollguard.errors import DomainError


def problem(u_nom=(0.0, 0.0), rows=(), lower=(-2.0, -2.0), upper=(2.0, 2.0)):
    return qp.QpProblem(u_nom, tuple(rows), lower, upper)


def random_feasible_problem(rng, max_rows=2):
    """Rows pass through a margin ball around an interior point, so the
    feasible set always contains grid-visible volume."""
    lo = (rng.uniform(-3, -0.5), rng.uniform(-3, -0.5))
    hi = (rng.uniform(0.5, 3), rng.uniform(0.5, 3))
    u0 = (rng.uniform(lo[0] + 0.2, hi[0] - 0.2),
          rng.uniform(lo[1] + 0.2, hi[1] - 0.2))
    rows = []
    for _ in range(rng.integers(0, max_rows + 1)):
        theta = rng.uniform(0, 2 * np.pi)
        scale = rng.uniform(0.5, 5.0)
        a = (scale * math.cos(theta), scale * math.sin(theta))
        margin = rng.uniform(0.05, 0.8)
        beta = a[0] * u0[0] + a[1] * u0[1] - scale * margin
        rows.append(ConstraintRow((a[0], a[1]), beta, f"r{len(rows)}"))
    u_nom = (rng.uniform(-4, 4), rng.uniform(-4, 4))
    return problem(u_nom, rows, lo, hi)


def check_kkt(sol, prob):
    assert sol.kkt_residual is not None and sol.kkt_residual <= 1e-8
    assert all(lam >= -1e-9 for lam in sol.multipliers)
    for row in prob.rows:
        assert row.a[0] * sol.u[0] + row.a[1] * sol.u[1] >= row.beta - 1e-9
    assert prob.lower[0] - 1e-9 <= sol.u[0] <= prob.upper[0] + 1e-9
    assert prob.lower[1] - 1e-9 <= sol.u[1] <= prob.upper[1] + 1e-9


class TestSolve:
    def test_feasible_nominal_untouched(self):
        sol = qp.solve(problem(u_nom=(0.5, -1.0)))
        assert sol.u == (0.5, -1.0)
        assert sol.status == "optimal" and sol.active == ()
        assert sol.objective == 0.0

    def test_halfplane_projection(self):
        sol = qp.solve(problem(rows=[ConstraintRow((0.0, 1.0), 1.0, "r")]))
        assert sol.u == pytest.approx((0.0, 1.0))
        assert sol.active == ("r",)
        check_kkt(sol, problem(rows=[ConstraintRow((0.0, 1.0), 1.0, "r")]))

    def test_projection_formula(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            a = tuple(rng.normal(size=2))
            norm2 = a[0] ** 2 + a[1] ** 2
            if norm2 < 1e-6:
                continue
            u_nom = tuple(rng.uniform(-1, 1, size=2))
            beta = a[0] * u_nom[0] + a[1] * u_nom[1] + rng.uniform(0.1, 0.5)
            prob = problem(u_nom, [ConstraintRow(a, beta, "r")],
                           (-50, -50), (50, 50))
            sol = qp.solve(prob)
            gap = beta - (a[0] * u_nom[0] + a[1] * u_nom[1])
            expected = (u_nom[0] + gap / norm2 * a[0],
                        u_nom[1] + gap / norm2 * a[1])
            assert sol.u == pytest.approx(expected, abs=1e-10)

    def test_box_clamp(self):
        sol = qp.solve(problem(u_nom=(5.0, -7.0)))
        assert sol.u == pytest.approx((2.0, -2.0))
        assert set(sol.active) == {"u_v_max", "u_omega_min"}

    def test_idempotent_on_safe_inputs(self):
        rng = np.random.default_rng(1)
        for _ in range(300):
            prob = random_feasible_problem(rng)
            sol = qp.solve(prob)
            again = qp.solve(problem(sol.u, prob.rows, prob.lower, prob.upper))
            if sol.status == "optimal":
                margin = min((r.a[0] * sol.u[0] + r.a[1] * sol.u[1] - r.beta
                              for r in prob.rows), default=1.0)
                if margin >= 1e-9:
                    assert again.u == sol.u

    def test_oracle_equivalence_thousand(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            prob = random_feasible_problem(rng)
            sol = qp.solve(prob)
            assert sol.status == "optimal"
            oracle = qp.grid_oracle(prob)
            assert oracle is not None
            assert abs(sol.objective - oracle[0]) <= 1e-6 * (1.0 + sol.objective)
            check_kkt(sol, prob)

    def test_complementary_slackness(self):
        rng = np.random.default_rng(2)
        labels = {"u_v_min": (1.0, 0.0), "u_v_max": (-1.0, 0.0),
                  "u_omega_min": (0.0, 1.0), "u_omega_max": (0.0, -1.0)}
        for _ in range(300):
            prob = random_feasible_problem(rng)
            sol = qp.solve(prob)
            row_map = {r.label: (r.a, r.beta) for r in prob.rows}
            for label, lam in zip(sol.active, sol.multipliers):
                if label in row_map:
                    a, beta = row_map[label]
                    slack = a[0] * sol.u[0] + a[1] * sol.u[1] - beta
                else:
                    g = labels[label]
                    bound = {"u_v_min": prob.lower[0], "u_v_max": -prob.upper[0],
                             "u_omega_min": prob.lower[1],
                             "u_omega_max": -prob.upper[1]}[label]
                    slack = g[0] * sol.u[0] + g[1] * sol.u[1] - bound
                assert lam >= -1e-9
                assert abs(lam * slack) <= 1e-8

    def test_nonexpansive_in_nominal(self):
        rng = np.random.default_rng(3)
        hits = 0
        for _ in range(300):
            prob = random_feasible_problem(rng)
            sol = qp.solve(prob)
            eps = 1e-6
            d = rng.normal(size=2)
            d *= eps / np.linalg.norm(d)
            moved = qp.solve(problem((prob.u_nom[0] + d[0], prob.u_nom[1] + d[1]),
                                     prob.rows, prob.lower, prob.upper))
            if moved.active == sol.active:
                hits += 1
                dist = math.hypot(moved.u[0] - sol.u[0], moved.u[1] - sol.u[1])
                assert dist <= eps + 1e-12
        assert hits > 200


class TestRelaxation:
    def test_unreachable_row_pushes_to_face(self):
        prob = problem(rows=[ConstraintRow((0.0, 1.0), 5.0, "r")])
        sol = qp.solve(prob)
        assert sol.status == "infeasible_relaxed"
        assert sol.u == pytest.approx((0.0, 2.0))
        assert sol.slack_used == pytest.approx(3.0)
        assert sol.active == ("r",)

    def test_opposed_rows_equalized(self):
        rows = [ConstraintRow((1.0, 0.0), 2.0, "right"),
                ConstraintRow((-1.0, 0.0), 2.0, "left")]
        sol = qp.solve(problem(rows=rows, lower=(-1.0, -1.0), upper=(1.0, 1.0)))
        assert sol.status == "infeasible_relaxed"
        assert sol.u[0] == pytest.approx(0.0)

        # grid oracle for the max-min slack
        xs = np.linspace(-1, 1, 2001)
        slack = np.minimum(xs - 2.0, -xs - 2.0)
        assert -sol.slack_used == pytest.approx(float(slack.max()), abs=1e-9)

    def test_feasible_problem_passthrough(self):
        prob = problem(u_nom=(0.3, 0.3),
                       rows=[ConstraintRow((1.0, 0.0), -1.0, "r")])
        direct = qp.solve(prob)
        relaxed = qp.relax_infeasible(prob)
        assert relaxed.status == "optimal"
        assert relaxed.u == direct.u
        assert relaxed.slack_used == 0.0

    def test_relaxation_prefers_small_deviation_on_ties(self):
        rows = [ConstraintRow((0.0, 1.0), 5.0, "r")]
        sol = qp.solve(problem(u_nom=(0.7, 0.0), rows=rows))
        assert sol.u == pytest.approx((0.7, 2.0))


class TestDegenerateRows:
    def test_vacuous_dropped_with_warning(self):
        rows = [ConstraintRow((0.0, 0.0), -1.0, "zero")]
        with pytest.warns(UserWarning):
            sol = qp.solve(problem(rows=rows))
        assert sol.status == "optimal" and sol.u == (0.0, 0.0)

    def test_unsatisfiable_forces_relaxation(self):
        rows = [ConstraintRow((0.0, 0.0), 0.5, "zero")]
        sol = qp.solve(problem(rows=rows))
        assert sol.status == "infeasible_relaxed"
        assert sol.slack_used >= 0.5
        assert sol.u == (0.0, 0.0)


class TestProblemValidation:
    def test_empty_box_rejected(self):
        with pytest.raises(DomainError):
            problem(lower=(1.0, 0.0), upper=(-1.0, 0.0))

    def test_too_many_rows_rejected(self):
        rows = [ConstraintRow((1.0, 0.0), 0.0, str(i)) for i in range(3)]
        with pytest.raises(DomainError):
            problem(rows=rows)

    def test_degenerate_box_allowed(self):
        sol = qp.solve(problem(u_nom=(1.0, 1.0), lower=(0.0, -1.0),
                               upper=(0.0, 1.0)))
        assert sol.u == pytest.approx((0.0, 1.0))
