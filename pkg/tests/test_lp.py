import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bushfire_opf.lp import (INFEASIBLE, OPTIMAL, UNBOUNDED, LinearProgram, SimplexSolver, solve_highs, solve_lp,
                             write_mps)

from lp_oracle import vertex_optimum


def random_lp(rng, n=None, m_ub=None, m_eq=None):
    n = n or int(rng.integers(1, 7))
    m_ub = int(rng.integers(0, 6)) if m_ub is None else m_ub
    m_eq = int(rng.integers(0, min(n, 3))) if m_eq is None else m_eq
    c = rng.normal(size=n)
    lower = np.where(rng.random(n) < 0.7, 0.0, -rng.uniform(0, 5, n))
    upper = lower + rng.uniform(0.5, 6, n)
    x0 = lower + rng.random(n) * (upper - lower)   # keeps most instances feasible
    A_ub = rng.normal(size=(m_ub, n))
    b_ub = A_ub @ x0 + rng.uniform(0, 2, m_ub) * (rng.random(m_ub) < 0.8) - 0.5 * (rng.random(m_ub) < 0.1)
    A_eq = rng.normal(size=(m_eq, n))
    b_eq = A_eq @ x0
    return LinearProgram(c, A_eq, b_eq, A_ub, b_ub, lower, upper)


def test_single_bound():
    sol = solve_lp(LinearProgram([1.0], A_ub=[[-1.0]], b_ub=[-3.0], upper=[np.inf]))
    assert sol.status == OPTIMAL and sol.x[0] == pytest.approx(3.0)


def test_simplex_corner():
    sol = solve_lp(LinearProgram([-1.0, -1.0], A_ub=[[1.0, 1.0]], b_ub=[1.0]))
    assert sol.objective == pytest.approx(-1.0)


def test_infeasible_and_unbounded():
    bad = LinearProgram([1.0], A_ub=[[1.0], [-1.0]], b_ub=[1.0, -2.0])
    assert solve_lp(bad).status == INFEASIBLE
    free = LinearProgram([-1.0, 0.0], A_ub=[[1.0, -1.0]], b_ub=[1.0])
    assert solve_lp(free).status == UNBOUNDED


def test_free_and_negative_bounds():
    lp = LinearProgram([1.0, 2.0], A_eq=[[1.0, 1.0]], b_eq=[-3.0], lower=[-np.inf, -1.0], upper=[np.inf, 4.0])
    sol = solve_lp(lp)
    assert sol.status == OPTIMAL
    assert sol.x == pytest.approx([-2.0, -1.0])


def test_brute_force_oracle_on_random_lps():
    rng = np.random.default_rng(2024)
    solver = SimplexSolver()
    checked = 0
    for _ in range(200):
        lp = random_lp(rng)
        if lp.A_eq.shape[0] + lp.A_ub.shape[0] > 8:
            continue
        ref = vertex_optimum(lp.c, lp.A_eq, lp.b_eq, lp.A_ub, lp.b_ub, lp.lower, lp.upper)
        sol = solver.solve(lp)
        if ref is None:
            assert sol.status == INFEASIBLE
            continue
        assert sol.status == OPTIMAL
        assert abs(sol.objective - ref) <= 1e-6 * max(1.0, abs(ref))
        assert lp.max_violation(sol.x) <= 1e-7
        checked += 1
    assert checked > 120


def dual_objective(lp, sol):
    """Objective of the dual certificate assembled from the final basis."""
    total = float(lp.b_eq @ sol.duals_eq) + float(lp.b_ub @ sol.duals_ub)
    d = sol.reduced_costs
    for j in range(lp.n_vars):
        if d[j] > 1e-9:
            total += d[j] * lp.lower[j]
        elif d[j] < -1e-9:
            total += d[j] * lp.upper[j]
    return total


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_strong_duality_certificate(seed):
    lp = random_lp(np.random.default_rng(seed))
    sol = SimplexSolver().solve(lp)
    if sol.status != OPTIMAL:
        return
    y_eq, y_ub, d = sol.duals_eq, sol.duals_ub, sol.reduced_costs
    # dual feasibility: c = A_eq' y_eq + A_ub' y_ub + d, y_ub <= 0, d sign matches the active bound
    assert np.allclose(lp.c, lp.A_eq.T @ y_eq + lp.A_ub.T @ y_ub + d, atol=1e-7)
    assert (y_ub <= 1e-9).all()
    assert dual_objective(lp, sol) == pytest.approx(sol.objective, abs=1e-6 * max(1, abs(sol.objective)))


def test_matches_highs_backend():
    rng = np.random.default_rng(77)
    for _ in range(40):
        lp = random_lp(rng, n=int(rng.integers(3, 10)), m_ub=int(rng.integers(2, 10)))
        a, b = SimplexSolver().solve(lp), solve_highs(lp)
        assert a.status == b.status
        if a.status == OPTIMAL:
            assert a.objective == pytest.approx(b.objective, abs=1e-7 * max(1, abs(b.objective)))


def test_deterministic_solution():
    rng = np.random.default_rng(3)
    lp = random_lp(rng, n=6, m_ub=5, m_eq=1)
    a, b = SimplexSolver().solve(lp), SimplexSolver().solve(lp)
    assert a.status == b.status
    if a.x is not None:
        assert (a.x == b.x).all()


def test_degenerate_problem_terminates():
    # many constraints through the same vertex
    n = 4
    A = np.vstack([np.eye(n), np.ones((1, n)), np.ones((1, n)), -np.eye(n)[:2]])
    b = np.concatenate([np.ones(n), [n], [n], [0, 0]])
    sol = SimplexSolver(degenerate_limit=2).solve(LinearProgram(-np.ones(n), A_ub=A, b_ub=b))
    assert sol.status == OPTIMAL and sol.objective == pytest.approx(-n)


def test_warm_start_reuses_basis():
    rng = np.random.default_rng(9)
    lp = random_lp(rng, n=6, m_ub=6, m_eq=1)
    cold = SimplexSolver().solve(lp)
    assert cold.status == OPTIMAL
    lp2 = LinearProgram(lp.c + rng.normal(scale=0.01, size=lp.n_vars), lp.A_eq, lp.b_eq, lp.A_ub, lp.b_ub,
                        lp.lower, lp.upper)
    warm = SimplexSolver().solve(lp2, cold.basis)
    ref = SimplexSolver().solve(lp2)
    assert warm.objective == pytest.approx(ref.objective, abs=1e-9)
    assert warm.iterations <= ref.iterations


def test_bad_shapes_rejected():
    with pytest.raises(ValueError):
        LinearProgram([1.0, 2.0], A_ub=[[1.0]], b_ub=[1.0])
    with pytest.raises(ValueError):
        LinearProgram([1.0], lower=[2.0], upper=[1.0])
    with pytest.raises(ValueError):
        LinearProgram([np.nan])


def test_mps_dump(tmp_path):
    lp = LinearProgram([1.0, -2.0], A_eq=[[1.0, 1.0]], b_eq=[3.0], A_ub=[[1.0, 0.0]], b_ub=[2.0],
                       lower=[0.0, -1.0], upper=[np.inf, 5.0])
    p = tmp_path / "lp.mps"
    write_mps(lp, p)
    text = p.read_text()
    for section in ("NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"):
        assert section in text
    assert " E  E0" in text and " L  L0" in text
