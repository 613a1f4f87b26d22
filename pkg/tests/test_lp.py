import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from robust_mssg.lp import InfeasibleError, UnboundedError, simplex


def test_small_lp():
    res = simplex([1, 1], A_ub=[[1, 2], [3, 1]], b_ub=[4, 6])
    np.testing.assert_allclose(res.x, [1.6, 1.2])
    assert res.objective == pytest.approx(2.8)


def test_equality_and_negative_rhs():
    # max x0 + 2 x1, x0 + x1 = 1, x0 >= 0.25
    res = simplex([1, 2], A_ub=[[-1, 0]], b_ub=[-0.25], A_eq=[[1, 1]], b_eq=[1])
    np.testing.assert_allclose(res.x, [0.25, 0.75])


def test_infeasible_has_certificate():
    with pytest.raises(InfeasibleError) as err:
        simplex([1, 1], A_ub=[[1, 1]], b_ub=[1], A_eq=[[1, 1]], b_eq=[2])
    assert err.value.infeasibility > 0
    assert err.value.certificate.shape == (2,)


def test_unbounded():
    with pytest.raises(UnboundedError):
        simplex([1, 0], A_ub=[[-1, 1]], b_ub=[1])


def test_degenerate_cycling_example():
    # Beale's example cycles under the textbook rule; Bland's rule terminates
    c = [0.75, -150, 0.02, -6]
    A = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
    b = [0, 0, 1]
    res = simplex(c, A_ub=A, b_ub=b)
    assert res.objective == pytest.approx(0.05)


def test_redundant_equalities():
    res = simplex([1, 1, 0], A_eq=[[1, 1, 1], [2, 2, 2]], b_eq=[1, 2])
    assert res.objective == pytest.approx(1.0)


@settings(max_examples=80)
@given(
    st.integers(2, 6),
    st.integers(1, 5),
    st.integers(0, 2**31 - 1),
)
def test_matches_scipy(nv, nc, seed):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=nv)
    A = rng.uniform(-1, 2, size=(nc, nv))
    x0 = rng.uniform(0, 1, size=nv)
    b = A @ x0 + rng.uniform(0, 1, size=nc)
    Aeq = np.ones((1, nv))
    beq = [x0.sum()]
    ref = linprog(-c, A_ub=A, b_ub=b, A_eq=Aeq, b_eq=beq, method="highs")
    assert ref.status == 0
    res = simplex(c, A_ub=A, b_ub=b, A_eq=Aeq, b_eq=beq)
    assert res.objective == pytest.approx(-ref.fun, abs=1e-7)
    assert np.all(A @ res.x <= b + 1e-7)
    assert abs(res.x.sum() - beq[0]) < 1e-7
