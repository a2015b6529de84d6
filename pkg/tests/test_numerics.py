import numpy as np
import pytest
import scipy.linalg
import scipy.optimize
from hypothesis import given, settings
from hypothesis import strategies as st

from rgconsensus import scenarios as sc
from rgconsensus.errors import DimensionMismatch, Infeasible, Unbounded
from rgconsensus.numerics import (
    LpProblem,
    eigenvalues,
    is_lyapunov_stable,
    is_schur,
    min_norm_point_2d,
    nullspace_vector,
    solve_dare,
    solve_lp,
    spectral_radius,
    unit_eigenvalue_multiplicity,
)


# -- solve_lp ------------------------------------------------------------------

def test_lp_one_dimensional_box():
    r = solve_lp(LpProblem([1.0], [[1.0], [-1.0]], [1.0, 0.0]))
    assert r.value == pytest.approx(1.0)
    assert r.x == pytest.approx([1.0])


def test_lp_box_corner():
    G = [[1, 0], [0, 1], [-1, 0], [0, -1]]
    r = solve_lp(LpProblem([1.0, 1.0], G, [1, 1, 0, 0]))
    assert r.value == pytest.approx(2.0)
    assert r.x == pytest.approx([1.0, 1.0])


def test_lp_unbounded_and_infeasible():
    with pytest.raises(Unbounded):
        solve_lp(LpProblem([1.0], [[-1.0]], [0.0]))
    with pytest.raises(Infeasible):
        solve_lp(LpProblem([1.0], [[1.0], [-1.0]], [-1.0, -1.0]))


def test_lp_respects_variable_bounds():
    r = solve_lp(LpProblem([1.0, -1.0], np.zeros((0, 2)), [], lb=[-2, -3], ub=[4, 5]))
    assert r.value == pytest.approx(7.0)


def test_lp_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        LpProblem([1.0, 1.0], [[1.0, 0.0]], [1.0, 2.0])


def test_lp_is_deterministic():
    rng = np.random.default_rng(3)
    G = rng.normal(size=(30, 4))
    p = LpProblem(rng.normal(size=4), G, np.ones(30))
    try:
        a, b = solve_lp(p), solve_lp(p)
    except Unbounded:
        pytest.skip("drew an unbounded instance")
    assert a.value == b.value and np.array_equal(a.x, b.x)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 40))
def test_lp_matches_highs(seed, n, m):
    rng = np.random.default_rng(seed)
    G = rng.normal(size=(m, n))
    g = rng.uniform(-0.5, 2.0, size=m)
    c = rng.normal(size=n)
    box = 5.0
    ref = scipy.optimize.linprog(-c, A_ub=G, b_ub=g, bounds=[(-box, box)] * n, method="highs")
    p = LpProblem(c, G, g, lb=-box, ub=box)
    if ref.status == 2:
        with pytest.raises(Infeasible):
            solve_lp(p)
        return
    assert ref.status == 0
    r = solve_lp(p)
    assert r.value == pytest.approx(-ref.fun, abs=1e-7, rel=1e-7)
    assert np.all(G @ r.x <= g + 1e-8)
    assert np.all(np.abs(r.x) <= box + 1e-8)


# -- min_norm_point_2d ----------------------------------------------------------

def test_min_norm_facet_projection():
    z = min_norm_point_2d([0.0, 0.0], [[-1.0, 0.0]], [-1.0])
    assert z == pytest.approx([1.0, 0.0])


def test_min_norm_feasible_center():
    assert min_norm_point_2d([0.2, -0.3], [[1, 0], [0, 1], [-1, 0], [0, -1]], [1, 1, 1, 1]) == \
        pytest.approx([0.2, -0.3])


def test_min_norm_vertex():
    z = min_norm_point_2d([2.0, 2.0], [[1, 0], [0, 1], [-1, 0], [0, -1]], [1, 1, 1, 1])
    assert z == pytest.approx([1.0, 1.0])


def test_min_norm_empty():
    with pytest.raises(Infeasible):
        min_norm_point_2d([0.0, 0.0], [[1, 0], [-1, 0]], [-1, -1])


def _random_polygon(rng, m):
    ang = np.sort(rng.uniform(0, 2 * np.pi, m))
    G = np.column_stack([np.cos(ang), np.sin(ang)])
    g = rng.uniform(0.2, 2.0, m)
    shift = rng.normal(size=2)
    return G, g + G @ shift


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 12))
def test_min_norm_beats_random_feasible_samples(seed, m):
    rng = np.random.default_rng(seed)
    G, g = _random_polygon(rng, m)
    c = rng.normal(scale=4.0, size=2)
    try:
        z = min_norm_point_2d(c, G, g)
    except Infeasible:
        res = scipy.optimize.linprog(np.zeros(2), A_ub=G, b_ub=g, bounds=[(None, None)] * 2)
        assert res.status == 2
        return
    assert np.all(G @ z <= g + 1e-9)
    S = rng.uniform(-10, 10, size=(10_000, 2))
    S = S[np.all(S @ G.T <= g, axis=1)]
    d = np.linalg.norm(z - c)
    assert np.all(d <= np.linalg.norm(S - c, axis=1) + 1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 12))
def test_min_norm_matches_slsqp(seed, m):
    rng = np.random.default_rng(seed)
    G, g = _random_polygon(rng, m)
    c = rng.normal(scale=4.0, size=2)
    try:
        z = min_norm_point_2d(c, G, g)
    except Infeasible:
        return
    cons = {"type": "ineq", "fun": lambda x: g - G @ x, "jac": lambda x: -G}
    ref = scipy.optimize.minimize(lambda x: np.sum((x - c) ** 2), z + 0.1, jac=lambda x: 2 * (x - c),
                                  constraints=[cons], method="SLSQP", options={"ftol": 1e-14})
    assert np.linalg.norm(z - c) <= np.linalg.norm(ref.x - c) + 1e-6


# -- nullspace_vector ----------------------------------------------------------

def test_nullspace_of_zero_matrix():
    v = nullspace_vector(np.zeros((2, 2)))
    assert np.linalg.norm(v) == pytest.approx(1.0)


@pytest.mark.parametrize("i", range(4))
def test_nullspace_of_example_agents(i):
    M = np.array(sc.A[i]) - np.eye(3)
    v = nullspace_vector(M)
    assert np.linalg.norm(M @ v) <= 1e-8
    assert np.abs(v) == pytest.approx([1.0, 0.0, 0.0], abs=1e-12)


def test_nullspace_of_full_rank_is_none():
    rng = np.random.default_rng(0)
    for _ in range(20):
        M = rng.normal(size=(4, 4))
        sv = np.sqrt(np.linalg.eigvalsh(M.T @ M))
        assert sv.min() > 1e-3
        assert nullspace_vector(M) is None


# -- solve_dare ----------------------------------------------------------------

def test_dare_stable_scalar():
    K = solve_dare([[0.5]], [[1.0]])
    assert abs(0.5 + K[0, 0]) < 0.5


def test_dare_golden_ratio():
    K = solve_dare([[1.0]], [[1.0]])
    assert K[0, 0] == pytest.approx(-(np.sqrt(5) - 1) / 2, abs=1e-9)


@pytest.mark.parametrize("i", range(4))
def test_dare_matches_scipy_on_example_agents(i):
    A = np.array(sc.A[i])
    B = np.array(sc.B[i]).reshape(3, 1)
    K = solve_dare(A, B)
    P = scipy.linalg.solve_discrete_are(A, B, np.eye(3), np.eye(1))
    K_ref = -np.linalg.solve(np.eye(1) + B.T @ P @ B, B.T @ P @ A)
    assert K == pytest.approx(K_ref, abs=1e-8)
    assert spectral_radius(A + B @ K) < 1


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_dare_gain_is_stabilising(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(scale=0.8, size=(3, 3))
    B = rng.normal(size=(3, 1))
    K = solve_dare(A, B)
    assert spectral_radius(A + B @ K) < 1


# -- eigen classification --------------------------------------------------------

def test_identity_is_lyapunov_not_schur():
    assert is_lyapunov_stable(np.eye(2))
    assert not is_schur(np.eye(2))


def test_jordan_block_not_lyapunov():
    S = np.array([[1.0, 0.37], [0.0, 1.0]])
    assert not is_lyapunov_stable(S)
    assert unit_eigenvalue_multiplicity(S) == 2


def test_first_agent_has_simple_unit_eigenvalue():
    A = np.array(sc.A[0])
    assert is_lyapunov_stable(A)
    assert unit_eigenvalue_multiplicity(A) == 1
    assert np.sort_complex(eigenvalues(A)) == pytest.approx(np.sort_complex(np.linalg.eigvals(A)))


def test_spectral_radius_of_rotation():
    th = 0.3
    R = 0.9 * np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    assert spectral_radius(R) == pytest.approx(0.9)
    assert is_schur(R) and not is_schur(R, margin=0.2)
