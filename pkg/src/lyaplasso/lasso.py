"""Coordinate-descent solver for the Direct Lyapunov Lasso.

Minimizes ``0.5 v^T G v - g^T v + lam ||v||_1`` over ``v = vec(M)`` for a
:class:`~lyaplasso.model.GramSystem`. Every coordinate, the diagonal
included, carries the penalty.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import _kernels
from .model import GramSystem

logger = logging.getLogger(__name__)

KKT_TOL = 1e-6
MAX_SWEEPS = 10_000
INNER_SWEEPS = 25
NEWTON_DROPS = 50
NULL_RTOL = 1e-11
CHOL_RTOL = 1e-8


class DegenerateGramError(ValueError):
    """Raised when some Gram diagonal entry is not strictly positive."""


@dataclass
class LassoSolution:
    m_hat: np.ndarray
    lam: float
    objective: float
    kkt_residual: float
    iterations: int
    converged: bool

    @property
    def v(self):
        return self.m_hat.ravel(order="F")

    def offdiag_nnz(self):
        return int(np.count_nonzero(self.m_hat) - np.count_nonzero(np.diag(self.m_hat)))


@dataclass
class LassoPath:
    lambdas: np.ndarray
    solutions: list
    gram: GramSystem = field(repr=False)
    lambda_max: float = float("nan")
    span: float = float("nan")

    def supports(self, threshold=0.0):
        from .irrep import support_of

        return [support_of(s.m_hat, threshold) for s in self.solutions]

    @property
    def all_converged(self):
        return all(s.converged for s in self.solutions)

    @property
    def max_kkt(self):
        return max(s.kkt_residual for s in self.solutions)


def kkt_residual(gram, v, lam):
    """Largest subgradient-condition violation of ``v`` at penalty ``lam``.

    For nonzero ``v_k`` this is ``|grad_k + lam sign(v_k)|``; for zero
    entries it is ``max(0, |grad_k| - lam)``. Zero iff ``v`` is optimal.
    """
    v = np.asarray(v, dtype=float)
    grad = gram.gamma @ v - gram.g
    return _kkt_from_grad(grad, v, lam)


def _kkt_from_grad(grad, v, lam):
    nz = v != 0
    viol = np.where(nz, np.abs(grad + lam * np.sign(v)), np.maximum(np.abs(grad) - lam, 0.0))
    return float(viol.max(initial=0.0))


def solve_lasso(gram, lam, init=None, tol=KKT_TOL, max_sweeps=MAX_SWEEPS,
                check_monotone=False, kernel=None):
    """Solve the penalized problem at a single ``lam`` by cyclic coordinate descent.

    Parameters
    ----------
    gram : GramSystem
    lam : float
        Positive penalty.
    init : array of length p^2, optional
        Warm start.
    tol : float
        Certificate tolerance: on return ``kkt_residual <= tol * max(1, lam)``
        when ``converged`` is true. Coordinate changes are also required to
        fall below ``tol * (1 + ||v||_inf)``.
    max_sweeps : int
        Cap on sweeps (full plus active-set sweeps).
    check_monotone : bool
        Run one full sweep at a time and assert the objective never
        increases. Slow; meant for tests.
    kernel : callable, optional
        Override the selected sweep kernel.

    Returns
    -------
    LassoSolution
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    sweep = kernel or _kernels.cd_sweep
    gamma = np.ascontiguousarray(gram.gamma, dtype=float)
    if np.any(np.diag(gamma) <= 0):
        raise DegenerateGramError("degenerate Gram diagonal")
    q = gamma.shape[0]
    v = np.zeros(q) if init is None else np.array(init, dtype=float, copy=True)
    grad = gamma @ v - gram.g
    all_coords = np.arange(q, dtype=np.intp)
    kkt_target = tol * max(1.0, lam)
    change_tol = tol
    sweeps = 0
    converged = False
    prev = gram.objective(v, lam) if check_monotone else None

    while sweeps < max_sweeps:
        dmax = sweep(gamma, v, grad, lam, all_coords)
        sweeps += 1
        if check_monotone:
            cur = gram.objective(v, lam)
            assert cur <= prev + 1e-12 * max(1.0, abs(prev)), "objective increased"
            prev = cur
        else:
            active = np.flatnonzero(v).astype(np.intp)
            settled = not active.size
            for _ in range(INNER_SWEEPS):
                if settled or sweeps >= max_sweeps:
                    break
                da = sweep(gamma, v, grad, lam, active)
                sweeps += 1
                settled = da <= change_tol * (1.0 + np.abs(v).max(initial=0.0))
            if not settled:
                grad = _newton_step(gamma, gram.g, v, grad, lam)
        if dmax <= change_tol * (1.0 + np.abs(v).max(initial=0.0)):
            grad = gamma @ v - gram.g  # drop accumulated update error
            if _kkt_from_grad(grad, v, lam) <= kkt_target:
                converged = True
                break
            if not check_monotone:
                grad = _newton_step(gamma, gram.g, v, grad, lam)
            change_tol *= 0.1

    grad = gamma @ v - gram.g
    kkt = _kkt_from_grad(grad, v, lam)
    if not converged:
        logger.warning("coordinate descent hit %d sweeps at lambda=%.3g (kkt %.2e)", sweeps, lam, kkt)
    return LassoSolution(
        m_hat=gram.matrix(v),
        lam=float(lam),
        objective=gram.objective(v, lam),
        kkt_residual=kkt,
        iterations=sweeps,
        converged=converged and kkt <= kkt_target,
    )


def _newton_step(gamma, g, v, grad, lam, max_drops=NEWTON_DROPS):
    """Move ``v`` toward the minimizer of the objective on its current orthant face.

    On the nonzero set A with signs s the objective is a quadratic with
    Hessian ``G_AA``. If ``s`` has a component in the null space of
    ``G_AA`` the objective falls linearly along that ray, which is followed
    to the first zero crossing. Otherwise the step heads for the
    pseudo-inverse solution of ``G_AA x = g_A - lam s`` with an exact line
    search. Coordinates that reach zero leave A and the face shrinks. The
    objective never rises. Returns the recomputed gradient.
    """
    for _ in range(max_drops):
        active = np.flatnonzero(v)
        if not active.size:
            break
        s = np.sign(v[active])
        g_aa = gamma[np.ix_(active, active)]
        d, is_ray = _face_direction(g_aa, g[active] - lam * s, s, v[active])
        if is_ray:
            t = np.inf
        else:
            slope = float((grad[active] + lam * s) @ d)
            curv = float(d @ g_aa @ d)
            if slope >= 0.0 or curv <= 0.0:
                break
            t = -slope / curv
        toward_zero = s * d < 0
        with np.errstate(divide="ignore"):
            hit = np.where(toward_zero, -v[active] / d, np.inf)
        t_edge = hit.min()
        blocked = t >= t_edge
        if blocked:
            t = t_edge
        if not np.isfinite(t):
            break
        new = v[active] + t * d
        new[np.sign(new) != s] = 0.0
        if blocked:
            new[hit <= t_edge * (1.0 + 1e-12)] = 0.0
        v[active] = new
        grad = gamma @ v - g
        if not blocked:
            break
    return grad


def _face_direction(g_aa, rhs, s, v_a):
    """``(d, is_ray)``: Newton direction on the face, or a descent ray in the null space."""
    try:
        chol = cho_factor(g_aa, lower=True, check_finite=False)
        piv = np.diag(chol[0]) ** 2
        if piv.min() > CHOL_RTOL * piv.max():
            return cho_solve(chol, rhs, check_finite=False) - v_a, False
    except np.linalg.LinAlgError:
        pass
    w, u = np.linalg.eigh(g_aa)
    null = w <= NULL_RTOL * max(w[-1], 0.0)
    ray = u[:, null] @ (u[:, null].T @ s)
    if np.linalg.norm(ray) > NULL_RTOL ** 0.5 * np.linalg.norm(s):
        return -ray, True
    keep = ~null
    return u[:, keep] @ ((u[:, keep].T @ rhs) / w[keep]) - v_a, False


def _offdiag_zero(v, p):
    m = v.reshape((p, p), order="F")
    return not np.any(m[~np.eye(p, dtype=bool)])


def lambda_max(gram, tol_rel=1e-2, floor_rel=1e-10, tol=KKT_TOL):
    """Smallest penalty at which the estimate has no off-diagonal support.

    Brackets downward from ``||g||_inf`` by halving, then bisects
    geometrically against the solver. The returned ``lam`` yields a
    diagonal estimate while ``lam * (1 - tol_rel)`` does not, unless the
    estimate stays diagonal down to ``floor = floor_rel * ||g||_inf``, in
    which case the floor is returned. For ``p == 1`` returns ``||g||_inf``.
    """
    top = float(np.abs(gram.g).max())
    if gram.p == 1 or top == 0.0:
        return top
    p = gram.p
    floor = top * floor_rel

    def diagonal_at(lam, init):
        sol = solve_lasso(gram, lam, init=init, tol=tol)
        return _offdiag_zero(sol.v, p), sol.v

    hi, v_hi = top, np.zeros(p * p)
    while True:
        lo = hi / 2.0
        while True:
            if lo <= floor:
                flat, v = diagonal_at(floor, v_hi)
                if flat:
                    return floor
                lo = floor
                break
            flat, v = diagonal_at(lo, v_hi)
            if not flat:
                break
            hi, v_hi, lo = lo, v, lo / 2.0
        while lo < hi * (1.0 - tol_rel):
            mid = min(np.sqrt(lo * hi), hi * (1.0 - tol_rel))
            flat, v = diagonal_at(mid, v_hi)
            if flat:
                hi, v_hi = mid, v
            else:
                lo = mid
        probe = hi * (1.0 - tol_rel)
        if lo == probe:
            return hi
        flat, v = diagonal_at(probe, v_hi)
        if not flat:
            return hi
        # non-monotone path: the diagonal persists below hi, keep descending
        hi, v_hi = probe, v


def lambda_grid(lam_max, grid_size=100, span=1e4):
    """Log-equidistant grid from ``lam_max`` down to ``lam_max / span``."""
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    return lam_max * np.logspace(0.0, -np.log10(span), grid_size)


def fit_path(gram, grid_size=100, span=1e4, tol=KKT_TOL, lam_max=None):
    """Regularization path over a log grid with warm starts.

    Solutions run from the largest penalty down. A failed solve is kept
    with ``converged=False`` rather than aborting the path.
    """
    lam_max = lambda_max(gram, tol=tol) if lam_max is None else float(lam_max)
    lambdas = lambda_grid(lam_max, grid_size, span)
    solutions = []
    v = None
    for lam in lambdas:
        sol = solve_lasso(gram, lam, init=v, tol=tol)
        solutions.append(sol)
        v = sol.v
    return LassoPath(lambdas=lambdas, solutions=solutions, gram=gram, lambda_max=lam_max, span=span)
