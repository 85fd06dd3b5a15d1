import numpy as np
import pytest
from scipy.optimize import linprog

from polyfit.errors import SolverFailure
from polyfit.simplex import solve_standard_form


def random_feasible_lp(rng, m, n):
    A = rng.normal(size=(m, n))
    x0 = rng.uniform(0.1, 2.0, n)
    b = A @ x0
    c = rng.normal(size=n)
    return c, A, b


@pytest.mark.parametrize("seed", range(40))
def test_matches_highs_on_random_lps(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 6))
    n = int(rng.integers(m + 2, 25))
    c, A, b = random_feasible_lp(rng, m, n)
    ref = linprog(c, A_eq=A, b_eq=b, bounds=[(0, None)] * n, method="highs")
    if ref.status == 3:  # unbounded
        with pytest.raises(SolverFailure):
            solve_standard_form(c, A, b)
        return
    res = solve_standard_form(c, A, b)
    assert res.objective == pytest.approx(ref.fun, rel=1e-7, abs=1e-7)
    assert np.all(res.x >= -1e-9)
    np.testing.assert_allclose(A @ res.x, b, atol=1e-7)
    # strong duality through the reported multipliers
    assert float(b @ res.duals) == pytest.approx(res.objective, rel=1e-7, abs=1e-7)


def test_negative_rhs_duals_keep_sign():
    # min x1 + 2 x2  s.t.  -x1 - x2 = -3  ->  x = (3, 0), y = -1
    c = np.array([1.0, 2.0])
    A = np.array([[-1.0, -1.0]])
    b = np.array([-3.0])
    res = solve_standard_form(c, A, b)
    assert res.objective == pytest.approx(3.0)
    assert res.duals[0] == pytest.approx(-1.0)


def test_redundant_row_removed():
    c = np.array([1.0, 1.0, 0.0])
    A = np.array([[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]])
    b = np.array([1.0, 2.0])
    res = solve_standard_form(c, A, b)
    assert res.objective == pytest.approx(0.0, abs=1e-12)
    assert len(res.removed_rows) == 1


def test_infeasible_raises():
    c = np.array([1.0, 1.0])
    A = np.array([[1.0, 1.0]])
    b = np.array([-1.0])
    with pytest.raises(SolverFailure):
        solve_standard_form(c, A, b)


def test_unbounded_raises():
    c = np.array([-1.0, 0.0])
    A = np.array([[1.0, -1.0]])
    b = np.array([0.0])
    with pytest.raises(SolverFailure):
        solve_standard_form(c, A, b)


def test_warm_basis_skips_phase_one():
    c = np.array([1.0, 1.0, 0.0])
    A = np.array([[1.0, 0.0, 1.0]])
    b = np.array([2.0])
    res = solve_standard_form(c, A, b, basis=np.array([2]))
    assert res.objective == pytest.approx(0.0)
    with pytest.raises(ValueError):
        solve_standard_form(c, A, b, basis=np.array([0, 2]))
