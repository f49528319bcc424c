from __future__ import annotations

import numpy as np
import pytest
from scipy.optimize import minimize

from control.qp_solver import QpProblem, QpStatus, check_kkt, dump_problem, load_problem, solve
from dynamics.errors import QpDimensionError


def _random_problem(seed: int, n: int = 6, m_in: int = 5) -> QpProblem:
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(n, n))
    return QpProblem(
        P=M @ M.T + np.eye(n),
        q=rng.normal(scale=3.0, size=n),
        A_eq=rng.normal(size=(1, n)),
        b_eq=rng.normal(scale=0.2, size=1),
        A_in=rng.normal(size=(m_in, n)),
        lb=-np.ones(m_in),
        ub=np.ones(m_in),
    )


def test_unconstrained_minimum():
    P = np.array([[4.0, 1.0], [1.0, 2.0]])
    q = np.array([1.0, -1.0])
    solution = solve(QpProblem(P=P, q=q))
    assert solution.ok
    assert np.allclose(solution.z, -np.linalg.solve(P, q))


def test_box_constrained_diagonal_problem_clips():
    p = np.array([1.0, 2.0, 0.5])
    q = np.array([-3.0, 1.0, 0.2])
    solution = solve(QpProblem(P=np.diag(p), q=q, A_in=np.eye(3), lb=-np.ones(3), ub=np.ones(3)))
    assert solution.ok
    assert np.allclose(solution.z, np.clip(-q / p, -1.0, 1.0), atol=1e-9)
    assert solution.multipliers.upper[0] == pytest.approx(2.0)
    assert solution.multipliers.lower[1] == pytest.approx(0.0, abs=1e-9)


def test_equality_with_active_bound():
    problem = QpProblem(
        P=np.eye(2), q=np.zeros(2), A_eq=[[1.0, 1.0]], b_eq=[1.0], A_in=[[1.0, 0.0]], ub=[0.2]
    )
    solution = solve(problem)
    assert solution.ok
    assert np.allclose(solution.z, [0.2, 0.8])
    assert solution.active == ((0, 1),)


def test_pinned_row_acts_as_equality():
    problem = QpProblem(P=np.eye(2), q=np.array([1.0, 1.0]), A_in=np.eye(2), lb=[0.5, -np.inf], ub=[0.5, np.inf])
    solution = solve(problem)
    assert np.allclose(solution.z, [0.5, -1.0])


@pytest.mark.parametrize("seed", range(5))
def test_random_problems_satisfy_kkt_and_match_reference(seed):
    problem = _random_problem(seed)
    solution = solve(problem)
    assert solution.status is QpStatus.OPTIMAL
    assert solution.residuals.within(1e-7)
    raw = check_kkt(problem, solution.z, solution.multipliers)
    assert raw.primal < 1e-8

    reference = minimize(
        problem.objective,
        np.zeros(problem.n),
        jac=lambda z: problem.P @ z + problem.q,
        method="SLSQP",
        constraints=[
            {"type": "eq", "fun": lambda z: problem.A_eq @ z - problem.b_eq},
            {"type": "ineq", "fun": lambda z: problem.A_in @ z - problem.lb},
            {"type": "ineq", "fun": lambda z: problem.ub - problem.A_in @ z},
        ],
        options={"ftol": 1e-12, "maxiter": 500},
    )
    assert solution.objective <= reference.fun + 1e-6


def test_warm_start_reuses_active_set():
    problem = _random_problem(3)
    cold = solve(problem)
    warm = solve(problem, warm_start=cold.warm_start())
    assert warm.ok
    assert np.allclose(warm.z, cold.z, atol=1e-8)
    assert warm.iterations <= cold.iterations


def test_inconsistent_equalities_are_certified():
    problem = QpProblem(
        P=np.eye(2), q=np.zeros(2), A_eq=[[1.0, 0.0], [1.0, 0.0]], b_eq=[1.0, 2.0], labels_eq=["a", "b"]
    )
    solution = solve(problem)
    assert solution.status is QpStatus.INFEASIBLE
    assert len(solution.certificate.classes) == 1
    assert set(solution.certificate.classes) <= {"a", "b"}
    assert solution.certificate.residual > 0.1


def test_contradictory_bounds_name_the_rows():
    problem = QpProblem(
        P=np.eye(2),
        q=np.zeros(2),
        A_in=[[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
        lb=[2.0, -np.inf, -1.0],
        ub=[np.inf, 1.0, 1.0],
        labels_in=["low", "high", "other"],
    )
    solution = solve(problem)
    assert not solution.ok
    assert solution.status is QpStatus.INFEASIBLE
    assert solution.certificate.classes == ("high", "low")
    assert solution.certificate.residual == pytest.approx(0.5, abs=1e-6)


def test_crossed_bounds_on_one_row():
    problem = QpProblem(P=np.eye(1), q=[0.0], A_in=[[1.0]], lb=[2.0], ub=[1.0], labels_in=["fz_bounds"])
    solution = solve(problem)
    assert solution.status is QpStatus.INFEASIBLE
    assert solution.certificate.classes == ("fz_bounds",)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"P": np.eye(3), "q": np.zeros(2)},
        {"P": np.eye(2), "q": [np.nan, 0.0]},
        {"P": np.eye(2), "q": np.zeros(2), "A_eq": np.ones((1, 3)), "b_eq": [0.0]},
        {"P": np.eye(2), "q": np.zeros(2), "A_eq": np.ones((1, 2)), "b_eq": [0.0, 1.0]},
        {"P": np.eye(2), "q": np.zeros(2), "A_in": np.ones((2, 2)), "lb": [0.0]},
        {"P": np.eye(2), "q": np.zeros(2), "A_in": np.ones((1, 2)), "ub": [np.nan]},
        {"P": np.eye(2), "q": np.zeros(2), "A_in": np.ones((1, 2)), "labels_in": ["a", "b"]},
    ],
)
def test_malformed_problems_are_rejected(kwargs):
    with pytest.raises(QpDimensionError):
        QpProblem(**kwargs)


def test_dump_and_load(tmp_path):
    problem = _random_problem(1)
    problem.ub[2] = np.inf
    path = dump_problem(problem, tmp_path / "qp" / "failed.txt")
    loaded = load_problem(path)
    assert np.array_equal(loaded.P, problem.P)
    assert np.array_equal(loaded.ub, problem.ub)
    assert np.allclose(solve(loaded).z, solve(problem).z)


def test_ill_scaled_problem_with_active_bounds_is_optimal():
    p = np.array([1e-2, 3.0, 2e3, 4e4])
    q = np.array([5.0, -40.0, 9e3, -1e5])
    problem = QpProblem(P=np.diag(p), q=q, A_in=np.eye(4), lb=-2.0 * np.ones(4), ub=2.0 * np.ones(4))

    solution = solve(problem)

    assert solution.status is QpStatus.OPTIMAL
    assert solution.residuals.within(1e-8)
    assert np.allclose(solution.z, np.clip(-q / p, -2.0, 2.0), atol=1e-9)


def test_iteration_cap_reports_max_iter():
    p = np.array([1.0, 2.0, 0.5])
    q = np.array([-3.0, 5.0, 0.2])
    problem = QpProblem(P=np.diag(p), q=q, A_in=np.eye(3), lb=-np.ones(3), ub=np.ones(3))

    capped = solve(problem, max_iter=1)
    assert capped.status is QpStatus.MAX_ITER

    assert solve(problem).status is QpStatus.OPTIMAL
