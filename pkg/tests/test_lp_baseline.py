import itertools

import numpy as np
import pytest

from oracleopt.lp_baseline import (
    InfeasibleLPError,
    LinearProgram,
    UnboundedLPError,
    cut_loop,
    lp_stop_bound,
    solve_lp,
)
from oracleopt.oracle import BallOracle, Constraint
from oracleopt.trace import LPStop


def enumerate_vertices_value(c, rows, lb, ub):
    """Reference optimum: try every intersection of n active constraints.

    Rows plus finite bounds form the candidate hyperplanes; feasible
    intersection points are scored directly.
    """
    c = np.asarray(c, dtype=float)
    n = c.shape[0]
    planes = [(np.asarray(r.a, float), float(r.b)) for r in rows]
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        if np.isfinite(ub[j]):
            planes.append((e.copy(), float(ub[j])))
        if np.isfinite(lb[j]):
            planes.append((-e, float(-lb[j])))
    best = None
    for combo in itertools.combinations(range(len(planes)), n):
        A = np.array([planes[i][0] for i in combo])
        b = np.array([planes[i][1] for i in combo])
        try:
            x = np.linalg.solve(A, b)
        except np.linalg.LinAlgError:
            continue
        feasible = all(a @ x <= bb + 1e-9 for a, bb in planes)
        feasible = feasible and np.all(x >= lb - 1e-9) and np.all(x <= ub + 1e-9)
        if feasible:
            val = float(c @ x)
            if best is None or val > best:
                best = val
    return best


class TestSolveLP:
    def test_box_corner(self):
        lp = LinearProgram(objective=np.ones(2), ub=np.ones(2))
        res = solve_lp(lp)
        assert res.value == pytest.approx(2.0)
        assert np.allclose(res.x, [1, 1])

    def test_simplex_vertex(self):
        lp = LinearProgram(
            objective=np.array([1.0, 0.0]),
            rows=[Constraint(np.ones(2), 1.0)],
        )
        res = solve_lp(lp)
        assert res.value == pytest.approx(1.0)
        assert np.allclose(res.x, [1, 0], atol=1e-9)

    def test_free_variables(self):
        lp = LinearProgram(
            objective=np.array([-1.0, 1.0]),
            rows=[Constraint(np.array([0.0, 1.0]), 2.0)],
            lb=np.array([-np.inf, 0.0]),
            ub=np.array([1.0, np.inf]),
        )
        # maximize -x0 + x1 with x0 >= -inf needs a blocking row to stay bounded
        lp.rows.append(Constraint(np.array([-1.0, 0.0]), 3.0))
        res = solve_lp(lp)
        assert res.value == pytest.approx(5.0)

    def test_equality_rows(self):
        lp = LinearProgram(
            objective=np.array([1.0, 0.0]),
            equalities=[Constraint(np.ones(2), 1.0)],
            ub=np.array([0.25, np.inf]),
        )
        res = solve_lp(lp)
        assert res.value == pytest.approx(0.25)
        assert np.allclose(res.x, [0.25, 0.75], atol=1e-9)

    def test_infeasible_detected(self):
        lp = LinearProgram(
            objective=np.ones(1),
            rows=[Constraint(np.array([1.0]), -1.0)],
        )
        with pytest.raises(InfeasibleLPError):
            solve_lp(lp)

    def test_unbounded_detected(self):
        lp = LinearProgram(objective=np.ones(2), rows=[Constraint(np.array([1.0, 0.0]), 1.0)])
        with pytest.raises(UnboundedLPError):
            solve_lp(lp)

    def test_matches_vertex_enumeration_on_random_instances(self):
        rng = np.random.default_rng(17)
        for _ in range(60):
            n = int(rng.integers(2, 5))
            m = int(rng.integers(2, 7))
            rows = [
                Constraint(rng.normal(size=n), float(rng.uniform(0.1, 2.0)))
                for _ in range(m)
            ]
            lb = np.zeros(n)
            ub = rng.uniform(0.5, 3.0, size=n)
            c = rng.normal(size=n)
            res = solve_lp(LinearProgram(objective=c, rows=rows, lb=lb, ub=ub))
            ref = enumerate_vertices_value(c, rows, lb, ub)
            assert ref is not None
            assert res.value == pytest.approx(ref, abs=1e-7)


class TestCutLoop:
    def test_ball_with_initial_box(self):
        dim = 2
        rows = []
        for i in range(dim):
            e = np.zeros(dim)
            e[i] = 1.0
            rows.append(Constraint(e.copy(), 1.0))
            rows.append(Constraint(-e, 1.0))
        oracle = BallOracle(np.zeros(dim), 1.0)
        res = cut_loop(
            oracle,
            [1.0, 0.0],
            rows,
            lb=np.full(dim, -np.inf),
            stop=LPStop(opt_ref=1.0),
            max_iters=200,
        )
        assert res.converged
        assert res.value <= 1.01 + 1e-9

    def test_zero_cuts_when_lp_optimum_inside(self):
        oracle = BallOracle(np.zeros(2), 2.0)
        rows = [Constraint(np.array([1.0, 0.0]), 1.0), Constraint(np.array([0.0, 1.0]), 1.0)]
        res = cut_loop(oracle, np.ones(2), rows, ub=np.ones(2), max_iters=50)
        assert res.converged
        assert len(res.cuts) == 0
        assert res.value == pytest.approx(2.0)

    def test_lp_values_nonincreasing(self):
        oracle = BallOracle(np.zeros(3), 1.0)
        rows = []
        for i in range(3):
            e = np.zeros(3)
            e[i] = 1.0
            rows.append(Constraint(e.copy(), 1.0))
            rows.append(Constraint(-e, 1.0))
        res = cut_loop(
            oracle, np.ones(3), rows, lb=np.full(3, -np.inf), stop=LPStop(opt_ref=np.sqrt(3.0)),
            max_iters=100,
        )
        values = [row.gamma for row in res.trace]
        assert all(b <= a + 1e-9 for a, b in zip(values, values[1:]))

    def test_unbounded_initial_lp_message(self):
        oracle = BallOracle(np.zeros(2), 1.0)
        with pytest.raises(UnboundedLPError, match="add bounds"):
            cut_loop(oracle, np.ones(2), [], lb=np.full(2, -np.inf), max_iters=5)


class TestLPStopBound:
    def test_unit_box_all_ones(self):
        for n in (2, 4, 7):
            val = lp_stop_bound([], [], np.ones(n), lb=np.zeros(n), ub=np.ones(n))
            assert val == pytest.approx(float(n))

    def test_triangle_matching_with_blossom_cut(self):
        # K3 edge variables; degree rows alone allow the half-integral point
        # worth 1.5, and the single odd-set row pins the value to 1.
        degree = [
            Constraint(np.array([1.0, 1.0, 0.0]), 1.0),
            Constraint(np.array([1.0, 0.0, 1.0]), 1.0),
            Constraint(np.array([0.0, 1.0, 1.0]), 1.0),
        ]
        blossom = [Constraint(np.ones(3), 1.0)]
        loose = lp_stop_bound(degree, [], np.ones(3), lb=np.zeros(3), ub=np.ones(3))
        tight = lp_stop_bound(degree, blossom, np.ones(3), lb=np.zeros(3), ub=np.ones(3))
        assert loose == pytest.approx(1.5)
        assert tight == pytest.approx(1.0)

    def test_stop_rule_fires_on_threshold(self):
        rule = LPStop(opt_ref=10.0)
        assert rule.satisfied(gamma=0, bound=0, lp_value=10.05)
        assert not rule.satisfied(gamma=0, bound=0, lp_value=10.2)
