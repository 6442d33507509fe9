import numpy as np
import pytest

from lyaplasso.linalg import (
    NonStableDriftError,
    commutation_matrix,
    flat_index,
    is_pd,
    is_stable,
    lyapunov_operator,
    solve_lyapunov,
    stability_margin,
    transpose_permutation,
    unvec,
    vec,
)
from oracles import lyapunov_scipy, random_spd, random_stable


def test_vec_is_column_major_and_unvec_inverts_it():
    a = np.arange(6.0).reshape(2, 3)
    assert np.array_equal(vec(a), [0.0, 3.0, 1.0, 4.0, 2.0, 5.0])
    b = np.arange(9.0).reshape(3, 3)
    assert np.array_equal(unvec(vec(b), 3), b)


def test_flat_index_matches_vec_position():
    p = 4
    m = np.arange(16.0).reshape(p, p)
    for i in range(p):
        for j in range(p):
            assert vec(m)[flat_index(i, j, p)] == m[i, j]


@pytest.mark.parametrize("p", [1, 2, 3, 5])
def test_commutation_matrix_transposes_and_is_orthogonal_involution(p, rng):
    k = commutation_matrix(p)
    a = rng.standard_normal((p, p))
    assert np.array_equal(k @ vec(a), vec(a.T))
    assert np.array_equal(k @ k.T, np.eye(p * p))
    assert np.array_equal(k @ k, np.eye(p * p))
    assert np.array_equal(vec(a)[transpose_permutation(p)], vec(a.T))


def test_stability_margin_reports_spectral_abscissa():
    m = np.array([[-1.0, 5.0], [0.0, -0.25]])
    rep = stability_margin(m)
    assert rep.abscissa == pytest.approx(-0.25)
    assert rep.stable
    assert not is_stable(np.array([[0.0, 1.0], [-1.0, 0.0]]))
    assert not is_stable(np.diag([-1.0, 1e-12]))


def test_is_pd():
    assert is_pd(np.eye(3))
    assert not is_pd(np.diag([1.0, 0.0]))
    assert not is_pd(np.diag([1.0, -1.0]))


def test_lyapunov_operator_applies_the_linear_map(rng):
    m = rng.standard_normal((3, 3))
    s = random_spd(rng, 3)
    assert np.allclose(lyapunov_operator(m) @ vec(s), vec(m @ s + s @ m.T))


@pytest.mark.parametrize("method", ["kron", "schur"])
def test_solve_lyapunov_matches_reference(method, rng):
    for p in (1, 2, 4, 6):
        m = random_stable(rng, p)
        c = random_spd(rng, p)
        s = solve_lyapunov(m, c, method=method)
        assert np.allclose(s, lyapunov_scipy(m, c), atol=1e-10)
        assert np.array_equal(s, s.T)
        assert np.abs(m @ s + s @ m.T + c).max() < 1e-10


def test_solve_lyapunov_scalar_case():
    assert solve_lyapunov(np.array([[-2.0]]), np.array([[2.0]]))[0, 0] == pytest.approx(0.5)


def test_solve_lyapunov_rejects_unstable_drift():
    with pytest.raises(NonStableDriftError):
        solve_lyapunov(np.eye(2), np.eye(2))


def test_solve_lyapunov_rejects_bad_shapes():
    with pytest.raises(ValueError):
        solve_lyapunov(-np.eye(2), np.eye(3))
    with pytest.raises(ValueError):
        solve_lyapunov(-np.ones((2, 3)), np.eye(2))
    with pytest.raises(ValueError):
        solve_lyapunov(-np.eye(2), np.eye(2), method="qr")
