"""Property-based checks of the library's invariants."""
import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from lyaplasso.irrep import SupportSet, irrep_constant, irrep_from_gram, support_of
from lyaplasso.lasso import lambda_max, solve_lasso
from lyaplasso.linalg import commutation_matrix, flat_index, is_pd, solve_lyapunov, vec
from lyaplasso.metrics import confusion, curve_aucs, gaussian_nll, metric_record, roc_points
from lyaplasso.model import GramSystem, build_A, build_gram, lyapunov_residual
from lyaplasso.simulation import (
    RngSeed,
    sample_stable_dominant,
    sample_stable_uniform,
    sample_volatility,
)
from oracles import lasso_objective, random_spd, random_stable

seeds = st.integers(min_value=0, max_value=2**32 - 1)
dims = st.integers(min_value=1, max_value=5)


@given(seeds, dims)
def test_lyapunov_round_trip(seed, p):
    rng = np.random.default_rng(seed)
    m, c = random_stable(rng, p), random_spd(rng, p)
    sigma = solve_lyapunov(m, c)
    scale = max(1.0, np.abs(c).max(), np.abs(m).max() * np.abs(sigma).max())
    assert np.abs(m @ sigma + sigma @ m.T + c).max() <= 1e-10 * scale
    assert is_pd(sigma)


@given(seeds, dims, st.sampled_from([0.5, 2.0, 10.0]))
def test_lyapunov_scaling_invariance(seed, p, gamma):
    rng = np.random.default_rng(seed)
    m, c = random_stable(rng, p), random_spd(rng, p)
    a, b = solve_lyapunov(m, c), solve_lyapunov(gamma * m, gamma * c)
    assert np.abs(a - b).max() <= 1e-9 * max(1.0, np.abs(a).max())


@given(dims)
def test_commutation_involution(p):
    k = commutation_matrix(p)
    assert np.array_equal(k @ k.T, np.eye(p * p))


@given(seeds, dims)
def test_objective_equals_half_squared_residual(seed, p):
    rng = np.random.default_rng(seed)
    m, s, c = rng.standard_normal((p, p)), random_spd(rng, p), random_spd(rng, p)
    gs = GramSystem.from_covariance(s, c)
    lhs = 0.5 * vec(m) @ gs.gamma @ vec(m) - gs.g @ vec(m) + 0.5 * vec(c) @ vec(c)
    rhs = 0.5 * lyapunov_residual(m, s, c) ** 2
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(rhs))


@given(seeds, st.integers(min_value=2, max_value=5))
def test_transposed_pair_rows_coincide_and_gram_is_psd(seed, p):
    rng = np.random.default_rng(seed)
    s = random_spd(rng, p)
    a = build_A(s)
    i, j = rng.choice(p, 2, replace=False)
    assert np.array_equal(a[flat_index(i, j, p)], a[flat_index(j, i, p)])
    w = np.linalg.eigvalsh(build_gram(s))
    assert w.min() >= -1e-10 * w.max()


@settings(max_examples=20)
@given(seeds, st.integers(min_value=2, max_value=4), st.floats(min_value=0.02, max_value=0.8))
def test_monotone_descent_reaches_certificate(seed, p, frac):
    rng = np.random.default_rng(seed)
    m, c = random_stable(rng, p), random_spd(rng, p)
    gs = GramSystem.from_covariance(solve_lyapunov(m, c), c)
    lam = frac * np.abs(gs.g).max()
    sol = solve_lasso(gs, lam, check_monotone=True)
    assert sol.converged
    assert sol.kkt_residual <= 1e-6 * max(1.0, lam)
    fast = solve_lasso(gs, lam)
    assert lasso_objective(gs.gamma, gs.g, lam, fast.v) <= lasso_objective(gs.gamma, gs.g, lam, sol.v) + 1e-6


@settings(max_examples=15)
@given(seeds, st.integers(min_value=2, max_value=4))
def test_lambda_max_gives_diagonal_estimate(seed, p):
    gen = RngSeed(seed).generator()
    m = sample_stable_dominant(p, 0.5, gen)
    gs = GramSystem.from_covariance(solve_lyapunov(m, 2.0 * np.eye(p)))
    est = solve_lasso(gs, lambda_max(gs)).m_hat
    assert not np.any(est[~np.eye(p, dtype=bool)])


@settings(max_examples=30)
@given(seeds)
def test_chain_neighborhoods(seed):
    rng = np.random.default_rng(seed)
    pert = rng.uniform(-0.05, 0.05, 2)
    for d, above in (([0.5, 1.0, 1.5], False), ([1.5, 1.0, 0.5], True)):
        m = -np.diag(d)
        m[1, 0], m[2, 1] = pert
        rho = irrep_constant(m).rho
        assert (rho > 1.0) if above else (rho < 1.0)


@given(seeds, st.integers(min_value=2, max_value=4))
def test_weak_value_never_exceeds_strong(seed, p):
    m = sample_stable_dominant(p, 0.6, RngSeed(seed))
    rep = irrep_constant(m)
    if rep.gamma_ss_invertible:
        assert rep.weak_rho <= rep.rho + 1e-12


@given(seeds, st.integers(min_value=2, max_value=6), st.floats(min_value=0.0, max_value=1.0))
def test_dominant_sampler_is_stable_and_reproducible(seed, p, density):
    a = sample_stable_dominant(p, density, RngSeed(seed, 1))
    b = sample_stable_dominant(p, density, RngSeed(seed, 1))
    assert np.array_equal(a, b)
    assert np.linalg.eigvals(a).real.max() < 0


@given(seeds, st.integers(min_value=2, max_value=4))
def test_uniform_sampler_constraints(seed, p):
    rng = np.random.default_rng(seed)
    support = SupportSet.from_mask(rng.random((p, p)) < 0.3)
    m, _ = sample_stable_uniform(support, RngSeed(seed))
    assert np.linalg.eigvals(m).real.max() < 0
    assert not np.any(m[~support.mask])
    assert support_of(m).pairs <= support.pairs


@given(seeds, st.integers(min_value=1, max_value=6),
       st.sampled_from(["identity", "random_diag", "random_min_diag", "random_full"]))
def test_volatility_is_pd_and_reproducible(seed, p, scheme):
    a = sample_volatility(scheme, p, RngSeed(seed))
    assert np.array_equal(a, sample_volatility(scheme, p, RngSeed(seed)))
    assert is_pd(a)


@given(seeds, st.integers(min_value=2, max_value=6), st.sampled_from(["offdiag", "all"]))
def test_confusion_partition_and_formulas(seed, p, scope):
    rng = np.random.default_rng(seed)
    est = SupportSet.from_mask(rng.random((p, p)) < 0.4)
    truth = SupportSet.from_mask(rng.random((p, p)) < 0.4)
    c = confusion(est, truth, scope)
    assert c.total == (p * p - p if scope == "offdiag" else p * p)
    r = metric_record(c)
    if c.tp + c.fn:
        assert r.tpr == c.tp / (c.tp + c.fn)
    if c.fp + c.tn:
        assert r.fpr == c.fp / (c.fp + c.tn)
    assert r.acc == (c.tp + c.tn) / c.total
    if 2 * c.tp + c.fp + c.fn:
        assert r.f1 == 2 * c.tp / (2 * c.tp + c.fp + c.fn)


@given(seeds, st.integers(min_value=3, max_value=6))
def test_nested_supports_give_a_step_roc(seed, p):
    rng = np.random.default_rng(seed)
    off = ~np.eye(p, dtype=bool)
    order = rng.permutation(np.flatnonzero(off.ravel()))
    truth = SupportSet.from_mask(rng.random((p, p)) < 0.3)
    path = []
    for k in range(len(order) + 1):
        mask = np.zeros(p * p, dtype=bool)
        mask[order[:k]] = True
        path.append(SupportSet.from_mask(mask.reshape(p, p)))
    cs = [confusion(s, truth) for s in path]
    if cs[0].tp + cs[0].fn == 0 or cs[0].fp + cs[0].tn == 0:
        return
    pts = roc_points(cs)
    fpr, tpr = zip(*pts)
    assert list(fpr) == sorted(fpr) and list(tpr) == sorted(tpr)
    auc, aupr = curve_aucs(path, truth)
    if auc is not None:
        assert 0.0 <= auc <= 1.0 and 0.0 <= aupr <= 1.0


@settings(max_examples=20)
@given(seeds, st.integers(min_value=2, max_value=4))
def test_likelihood_minimized_at_own_covariance(seed, p):
    rng = np.random.default_rng(seed)
    m = random_stable(rng, p)
    other = random_stable(rng, p)
    sigma = solve_lyapunov(m, 2.0 * np.eye(p))
    assert gaussian_nll(m, sigma, 10) <= gaussian_nll(other, sigma, 10) + 1e-9


@settings(max_examples=20)
@given(seeds, st.integers(min_value=2, max_value=4))
def test_irrep_from_gram_agrees_with_drift_entry_point(seed, p):
    m = sample_stable_dominant(p, 0.5, RngSeed(seed))
    rep = irrep_constant(m)
    rho, weak, _, _ = irrep_from_gram(build_gram(solve_lyapunov(m, 2.0 * np.eye(p))), support_of(m),
                                      np.sign(vec(m)[support_of(m).flat]))
    assert rho == rep.rho and weak == rep.weak_rho
