"""Support-recovery metrics, Gaussian likelihood and extended-BIC selection."""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .irrep import SupportSet, support_of
from .linalg import NonStableDriftError, stability_margin, unvec, vec

logger = logging.getLogger(__name__)

SCOPES = ("offdiag", "all")


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricRecord:
    """Rates in [0, 1]; ``None`` marks a zero denominator."""

    tpr: float | None
    fpr: float | None
    acc: float | None
    f1: float | None
    precision: float | None


def _as_support(s):
    return s if isinstance(s, SupportSet) else support_of(s)


def confusion(est, truth, scope="offdiag"):
    """Count agreement between two supports over the scoped entries.

    ``est`` and ``truth`` are :class:`SupportSet` objects or matrices (whose
    nonzero pattern is used). ``scope="offdiag"`` ignores the diagonal,
    which every support contains.
    """
    if scope not in SCOPES:
        raise ValueError(f"scope must be one of {SCOPES}")
    est, truth = _as_support(est), _as_support(truth)
    if est.p != truth.p:
        raise ValueError(f"dimension mismatch: {est.p} vs {truth.p}")
    e, t = est.mask, truth.mask
    if scope == "offdiag":
        keep = ~np.eye(est.p, dtype=bool)
        e, t = e[keep], t[keep]
    return Confusion(
        tp=int(np.sum(e & t)),
        fp=int(np.sum(e & ~t)),
        tn=int(np.sum(~e & ~t)),
        fn=int(np.sum(~e & t)),
    )


def _ratio(num, den):
    return num / den if den else None


def metric_record(c):
    return MetricRecord(
        tpr=_ratio(c.tp, c.tp + c.fn),
        fpr=_ratio(c.fp, c.fp + c.tn),
        acc=_ratio(c.tp + c.tn, c.total),
        f1=_ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn),
        precision=_ratio(c.tp, c.tp + c.fp),
    )


def _trapezoid(x, y):
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2.0))


def roc_points(confusions):
    c0 = confusions[0]
    if c0.tp + c0.fn == 0 or c0.fp + c0.tn == 0:
        raise ValueError("ROC is undefined when the truth has no positives or no negatives")
    pts = [(c.fp / (c.fp + c.tn), c.tp / (c.tp + c.fn)) for c in confusions]
    return sorted(pts + [(0.0, 0.0), (1.0, 1.0)])


def pr_points(confusions):
    """(tpr, precision) points padded to span tpr in [0, 1].

    Points are sorted by tpr, then by decreasing precision. Precision at
    tpr = 0 copies the first point; when the path never reaches tpr = 1 the
    all-positive estimate (precision = prevalence) is appended.
    """
    pts = sorted(
        ((c.tp / (c.tp + c.fn), c.tp / (c.tp + c.fp)) for c in confusions if c.tp + c.fp > 0),
        key=lambda pt: (pt[0], -pt[1]),
    )
    c0 = confusions[0]
    prevalence = (c0.tp + c0.fn) / c0.total
    if not pts:
        return [(0.0, prevalence), (1.0, prevalence)]
    if pts[0][0] > 0.0:
        pts.insert(0, (0.0, pts[0][1]))
    if pts[-1][0] < 1.0:
        pts.append((1.0, prevalence))
    return pts


def curve_aucs(path, truth, scope="offdiag"):
    """Areas under the ROC and precision-recall curves of a path.

    Parameters
    ----------
    path : LassoPath or sequence of SupportSet / matrices
        Estimates along the regularization path.
    truth : SupportSet or matrix
    scope : {"offdiag", "all"}

    Returns
    -------
    auc_roc, au_pr : float or None
        ``None`` when the truth has no positives or no negatives in scope.
    """
    supports = path.supports() if hasattr(path, "supports") else list(path)
    if not supports:
        raise ValueError("path is empty")
    cs = [confusion(s, truth, scope) for s in supports]
    c0 = cs[0]
    if c0.tp + c0.fn == 0 or c0.fp + c0.tn == 0:
        return None, None
    roc = roc_points(cs)
    pr = pr_points(cs)
    return _trapezoid(*zip(*roc)), _trapezoid(*zip(*pr))


def path_summary(path, truth, scope="offdiag"):
    """Per-path figures of merit: max accuracy/F1, mean tpr/fpr and both AUCs."""
    supports = path.supports() if hasattr(path, "supports") else list(path)
    recs = [metric_record(confusion(s, truth, scope)) for s in supports]

    def agg(fn, key):
        vals = [getattr(r, key) for r in recs if getattr(r, key) is not None]
        return fn(vals) if vals else None

    auc_roc, au_pr = curve_aucs(supports, truth, scope)
    return {
        "max_acc": agg(max, "acc"),
        "max_f1": agg(max, "f1"),
        "mean_tpr": agg(lambda v: float(np.mean(v)), "tpr"),
        "mean_fpr": agg(lambda v: float(np.mean(v)), "fpr"),
        "auc_roc": auc_roc,
        "au_pr": au_pr,
    }


# -- likelihood -------------------------------------------------------------


def _covariance(m, c):
    return scipy.linalg.solve_continuous_lyapunov(m, -c)


def _nll_from_sigma(sigma, sigma_hat, n):
    chol = scipy.linalg.cho_factor(0.5 * (sigma + sigma.T))
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol[0]))))
    trace = float(np.trace(scipy.linalg.cho_solve(chol, sigma_hat)))
    return n * (logdet + trace)


def gaussian_nll(m, sigma_hat, n, c=None):
    """Twice the negative Gaussian log-likelihood ``n [log det S + tr(S_hat S^-1)]``.

    ``S`` is the equilibrium covariance of drift ``m`` under volatility ``c``
    (default ``2 I``).
    """
    m = np.asarray(m, dtype=float)
    rep = stability_margin(m)
    if not rep.stable:
        raise NonStableDriftError(f"non-stable drift (abscissa {rep.abscissa:.3g})")
    c = 2.0 * np.eye(m.shape[0]) if c is None else c
    return _nll_from_sigma(_covariance(m, c), np.asarray(sigma_hat, dtype=float), n)


def nll_gradient(m, sigma_hat, n, c=None):
    """Gradient of :func:`gaussian_nll` in ``m`` by the adjoint Lyapunov equation.

    With ``W = n (S^-1 - S^-1 S_hat S^-1)`` and ``L`` solving
    ``M^T L + L M + W = 0``, the gradient is ``2 L S``.
    """
    m = np.asarray(m, dtype=float)
    c = 2.0 * np.eye(m.shape[0]) if c is None else c
    sigma = _covariance(m, c)
    sinv = np.linalg.inv(sigma)
    w = n * (sinv - sinv @ sigma_hat @ sinv)
    lam = scipy.linalg.solve_continuous_lyapunov(m.T, -0.5 * (w + w.T))
    return 2.0 * lam @ sigma


class MLEError(RuntimeError):
    """Raised when the restricted MLE cannot move without leaving the stable set."""


@dataclass
class MLEResult:
    m_hat: np.ndarray
    nll: float
    grad_norm: float
    iterations: int
    converged: bool
    gradient_check: float | None = None


def gradient_check(m, sigma_hat, n, free, c=None, step=1e-6):
    """Max relative gap between adjoint and central-difference gradients on ``free``."""
    p = m.shape[0]
    x = vec(m)
    adj = vec(nll_gradient(m, sigma_hat, n, c))[free]
    fd = np.empty(len(free))
    for a, k in enumerate(free):
        h = step * (1.0 + abs(x[k]))
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        fd[a] = (gaussian_nll(unvec(xp, p), sigma_hat, n, c) - gaussian_nll(unvec(xm, p), sigma_hat, n, c)) / (2 * h)
    return float(np.abs(adj - fd).max() / max(1.0, np.abs(adj).max()))


def restricted_mle(support, sigma_hat, n, init=None, c=None, gtol_rel=1e-6, max_iter=200,
                   validate=False):
    """Minimize :func:`gaussian_nll` over drifts supported on ``support``.

    Damped Newton iteration on the free entries with the adjoint gradient
    and a finite-difference Hessian of it (eigenvalues floored to keep the
    step a descent direction). Backtracking rejects non-stable trial points.

    Parameters
    ----------
    support : SupportSet
        Must contain the diagonal (always true for :class:`SupportSet`).
    sigma_hat : (p, p) array
    n : int
        Sample size scaling the likelihood.
    init : (p, p) array, optional
        Starting drift, used when stable; its entries off ``support`` are
        dropped. Falls back to ``diag(-1 / sigma_hat_ii)``.
    gtol_rel : float
        Converged when the gradient max-norm on free entries is at most
        ``gtol_rel * n``.
    validate : bool
        Also compare adjoint and finite-difference gradients at the start.

    Returns
    -------
    MLEResult
    """
    sigma_hat = np.asarray(sigma_hat, dtype=float)
    p = sigma_hat.shape[0]
    if support.p != p:
        raise ValueError("support dimension does not match the covariance")
    c = 2.0 * np.eye(p) if c is None else np.asarray(c, dtype=float)
    free = support.flat
    x = np.zeros(p * p)
    fallback = vec(np.diag(-c.diagonal() / (2.0 * sigma_hat.diagonal())))
    if init is not None:
        x[free] = vec(init)[free]
        if not stability_margin(unvec(x, p)).stable:
            x = fallback
    else:
        x = fallback

    def f(z):
        m = unvec(z, p)
        if not stability_margin(m).stable:
            return math.inf
        try:
            return _nll_from_sigma(_covariance(m, c), sigma_hat, n)
        except (np.linalg.LinAlgError, ValueError):
            return math.inf

    def grad(z):
        return vec(nll_gradient(unvec(z, p), sigma_hat, n, c))[free]

    check = gradient_check(unvec(x, p), sigma_hat, n, free, c) if validate else None
    fx = f(x)
    gx = grad(x)
    gtol = gtol_rel * n
    it = 0
    for it in range(1, max_iter + 1):
        if np.abs(gx).max() <= gtol:
            break
        hess = _fd_hessian(grad, x, free, f)
        evals, evecs = np.linalg.eigh(hess)
        floor = 1e-8 * max(1.0, np.abs(evals).max())
        step_dir = -evecs @ ((evecs.T @ gx) / np.maximum(np.abs(evals), floor))
        t = 1.0
        slope = float(gx @ step_dir)
        while True:
            trial = x.copy()
            trial[free] += t * step_dir
            ft = f(trial)
            if np.isfinite(ft) and ft <= fx + 1e-4 * t * slope:
                break
            t *= 0.5
            if t < 1e-14:
                break
        if t < 1e-14:
            m = unvec(x, p)
            if np.abs(gx).max() > 1e3 * gtol:
                raise MLEError(
                    f"line search stalled at abscissa {stability_margin(m).abscissa:.3g}, "
                    f"gradient {np.abs(gx).max():.3g}, after {it} iterations"
                )
            break
        x, fx = trial, ft
        gx = grad(x)
    gnorm = float(np.abs(gx).max())
    return MLEResult(
        m_hat=unvec(x, p),
        nll=fx,
        grad_norm=gnorm,
        iterations=it,
        converged=gnorm <= gtol,
        gradient_check=check,
    )


def _fd_hessian(grad, x, free, f):
    k = len(free)
    g0 = None
    hess = np.empty((k, k))
    for a, idx in enumerate(free):
        h = 1e-6 * (1.0 + abs(x[idx]))
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        up, down = np.isfinite(f(xp)), np.isfinite(f(xm))
        if up and down:
            hess[:, a] = (grad(xp) - grad(xm)) / (2 * h)
        else:
            # one side leaves the stable set
            g0 = grad(x) if g0 is None else g0
            hess[:, a] = (grad(xp) - g0) / h if up else (g0 - grad(xm)) / h
    return 0.5 * (hess + hess.T)


@dataclass
class EbicResult:
    selected_index: int
    scores: np.ndarray
    mle_values: np.ndarray
    selected_graph: SupportSet
    edge_counts: list = field(default_factory=list)
    estimates: list = field(default_factory=list, repr=False)
    failures: list = field(default_factory=list)
    gradient_check: float | None = None


def ebic_score(n_edges, p, n, nll, gamma=1.0):
    """``(|E| + p) log n + 4 gamma |E| log p + nll``."""
    return (n_edges + p) * math.log(n) + 4.0 * gamma * n_edges * math.log(p) + nll


def ebic_select(graphs, sigma_hat, n, gamma=1.0, inits=None, c=None):
    """Score candidate supports by extended BIC and pick the minimum.

    Ties go to the graph with fewer edges, then to the earlier index. A
    candidate whose MLE fails scores ``inf`` and is listed in ``failures``.
    """
    graphs = list(graphs)
    if not graphs:
        raise ValueError("no candidate graphs")
    sigma_hat = np.asarray(sigma_hat, dtype=float)
    p = sigma_hat.shape[0]
    scores, nlls, estimates, failures = [], [], [], []
    check = None
    for k, g in enumerate(graphs):
        init = None if inits is None else inits[k]
        try:
            res = restricted_mle(g, sigma_hat, n, init=init, c=c, validate=(k == 0))
        except (MLEError, np.linalg.LinAlgError, ValueError) as exc:
            logger.warning("restricted MLE failed for candidate %d: %s", k, exc)
            failures.append(k)
            scores.append(math.inf)
            nlls.append(math.inf)
            estimates.append(None)
            continue
        if k == 0:
            check = res.gradient_check
        if not res.converged:
            logger.info("restricted MLE for candidate %d stopped at gradient %.3g", k, res.grad_norm)
        nlls.append(res.nll)
        estimates.append(res.m_hat)
        scores.append(ebic_score(g.n_edges, p, n, res.nll, gamma))
    if len(failures) == len(graphs):
        raise MLEError("restricted MLE failed for every candidate graph")
    order = sorted(range(len(graphs)), key=lambda k: (scores[k], graphs[k].n_edges, k))
    best = order[0]
    return EbicResult(
        selected_index=best,
        scores=np.array(scores),
        mle_values=np.array(nlls),
        selected_graph=graphs[best],
        edge_counts=[g.n_edges for g in graphs],
        estimates=estimates,
        failures=failures,
        gradient_check=check,
    )


def distinct_supports(path, dedup=True):
    """``(supports, indices)`` along a path, first occurrences only when ``dedup``."""
    supports = path.supports()
    if not dedup:
        return supports, list(range(len(supports)))
    seen, keep = set(), []
    for k, s in enumerate(supports):
        if s.pairs not in seen:
            seen.add(s.pairs)
            keep.append(k)
    return [supports[k] for k in keep], keep


def ebic_path_select(path, sigma_hat, n, gamma=1.0, dedup=True, c=None):
    """Extended-BIC choice among the supports of a lasso path.

    Each restricted MLE starts from the lasso estimate at the first
    penalty producing that support. Returns ``(EbicResult, indices)`` where
    ``indices[k]`` is the path position of candidate ``k``.
    """
    graphs, idx = distinct_supports(path, dedup)
    inits = [path.solutions[k].m_hat for k in idx]
    return ebic_select(graphs, sigma_hat, n, gamma=gamma, inits=inits, c=c), idx
