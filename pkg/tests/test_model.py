import numpy as np
import pytest

from lyaplasso.linalg import flat_index, solve_lyapunov, vec
from lyaplasso.model import GramSystem, build_A, build_g, build_gram, lyapunov_residual
from oracles import gram_bruteforce, linear_term_bruteforce, lyapunov_map_matrix, random_spd, random_stable


@pytest.mark.parametrize("p", [1, 2, 3, 5])
def test_coefficient_matrix_matches_basis_application(p, rng):
    s = random_spd(rng, p)
    assert np.abs(build_A(s) - lyapunov_map_matrix(s)).max() <= 1e-12


@pytest.mark.parametrize("p", [1, 2, 3, 5])
def test_gram_closed_form_matches_bruteforce(p, rng):
    s = random_spd(rng, p)
    gram = build_gram(s)
    assert np.abs(gram - gram_bruteforce(s)).max() <= 1e-12 * max(1.0, np.abs(gram).max())
    assert np.array_equal(gram, gram.T)


def test_linear_term_matches_bruteforce_and_symmetric_shortcut(rng):
    s = random_spd(rng, 4)
    c = random_spd(rng, 4)
    g = build_g(s, c)
    assert np.allclose(g, linear_term_bruteforce(s, c), atol=1e-12)
    assert np.allclose(g, -2.0 * vec(c @ s), atol=1e-12)


def test_duplicate_rows_for_transposed_pairs(rng):
    p = 4
    a = build_A(random_spd(rng, p))
    for i in range(p):
        for j in range(p):
            if i != j:
                assert np.array_equal(a[flat_index(i, j, p)], a[flat_index(j, i, p)])


def test_gram_is_psd_with_rank_of_symmetric_matrices(rng):
    for p in (2, 3, 4):
        gram = build_gram(random_spd(rng, p))
        w = np.linalg.eigvalsh(gram)
        assert w.min() >= -1e-10 * w.max()
        assert np.linalg.matrix_rank(gram) == p * (p + 1) // 2


def test_quadratic_form_reproduces_half_squared_residual(rng):
    for _ in range(20):
        p = int(rng.integers(1, 6))
        m, s, c = rng.standard_normal((p, p)), random_spd(rng, p), random_spd(rng, p)
        gs = GramSystem.from_covariance(s, c)
        lhs = gs.smooth(vec(m)) + gs.constant
        rhs = 0.5 * lyapunov_residual(m, s, c) ** 2
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)


def test_population_truth_zeroes_the_gradient(rng):
    m = random_stable(rng, 4)
    c = random_spd(rng, 4)
    gs = GramSystem.from_covariance(solve_lyapunov(m, c), c)
    assert np.abs(gs.gradient(vec(m))).max() < 1e-9


def test_gram_system_defaults_and_immutability(rng):
    s = random_spd(rng, 3)
    gs = GramSystem.from_covariance(s)
    assert np.array_equal(gs.volatility, 2.0 * np.eye(3))
    assert gs.constant == pytest.approx(6.0)
    with pytest.raises(ValueError):
        gs.gamma[0, 0] = 1.0
    v = rng.standard_normal(9)
    assert gs.objective(v, 0.3) == pytest.approx(gs.smooth(v) + 0.3 * np.abs(v).sum())
    assert np.array_equal(gs.matrix(v), v.reshape(3, 3, order="F"))


def test_input_validation():
    with pytest.raises(ValueError, match="symmetric"):
        build_gram(np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(ValueError, match="square"):
        build_A(np.ones((2, 3)))
    with pytest.raises(ValueError, match="shape"):
        build_g(np.eye(2), np.eye(3))
    with pytest.raises(ValueError):
        lyapunov_residual(np.eye(2), np.eye(3), np.eye(2))
