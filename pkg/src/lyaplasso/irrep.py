"""Supports, irrepresentability constants and their diagonal closed forms.

Graph convention: an edge ``i -> j`` corresponds to a nonzero drift entry
``M[j, i]``. Pairs are 0-based ``(row, col)``; every support contains the
diagonal.
"""
from dataclasses import dataclass
from graphlib import CycleError, TopologicalSorter

import numpy as np

from .linalg import flat_index, solve_lyapunov, vec
from .model import build_gram

COND_LIMIT = 1e12


class SingularGramError(np.linalg.LinAlgError):
    """Raised when the support block of the Gram matrix is not invertible."""


@dataclass(frozen=True)
class SupportSet:
    """Index pairs of a p x p drift pattern (diagonal always included)."""

    p: int
    pairs: frozenset

    def __post_init__(self):
        pairs = frozenset((int(i), int(j)) for i, j in self.pairs)
        pairs |= {(i, i) for i in range(self.p)}
        for i, j in pairs:
            if not (0 <= i < self.p and 0 <= j < self.p):
                raise ValueError(f"pair {(i, j)} out of range for p={self.p}")
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def from_mask(cls, mask):
        mask = np.asarray(mask, dtype=bool)
        return cls(mask.shape[0], frozenset(zip(*np.nonzero(mask))))

    @classmethod
    def from_edges(cls, p, edges):
        """Support of a graph given as ``(src, dst)`` edges (0-based)."""
        return cls(p, frozenset((dst, src) for src, dst in edges))

    @property
    def mask(self):
        m = np.zeros((self.p, self.p), dtype=bool)
        for i, j in self.pairs:
            m[i, j] = True
        return m

    @property
    def flat(self):
        """Sorted flat indices into ``vec``."""
        return np.array(sorted(flat_index(i, j, self.p) for i, j in self.pairs), dtype=np.intp)

    @property
    def edges(self):
        """Directed edges ``(src, dst)`` sorted, self-loops excluded."""
        return sorted((j, i) for i, j in self.pairs if i != j)

    @property
    def n_edges(self):
        return len(self.pairs) - self.p

    def has_two_cycle(self):
        return any((j, i) in self.pairs for i, j in self.pairs if i != j)

    def is_dag(self):
        ts = TopologicalSorter({k: set() for k in range(self.p)})
        for src, dst in self.edges:
            ts.add(dst, src)
        try:
            ts.prepare()
        except CycleError:
            return False
        return True


def support_of(m, threshold=0.0):
    """Pairs with ``|M[j, k]| > threshold``, plus the diagonal."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("drift must be square")
    return SupportSet.from_mask(np.abs(m) > threshold)


@dataclass
class IrrepReport:
    rho: float | None
    weak_rho: float | None
    gamma_ss_invertible: bool
    c_gamma: float | None
    c_m: float
    c_sigma: float
    c_c: float
    condition: float

    @property
    def holds(self):
        return self.rho is not None and self.rho < 1.0

    @property
    def weak_holds(self):
        return self.weak_rho is not None and self.weak_rho < 1.0


def _blocks(gamma, support):
    s = support.flat
    sc = np.setdiff1d(np.arange(gamma.shape[0]), s)
    return gamma[np.ix_(s, s)], gamma[np.ix_(sc, s)], s


def irrep_from_gram(gamma, support, signs=None):
    """``(rho, weak, cond, inv_norm)`` from a Gram matrix and support.

    ``rho`` is the max absolute row sum of ``G_{S^c S} (G_SS)^{-1}``; the
    weak value applies that matrix to ``signs`` (the sign pattern on S).
    Both are ``None`` when ``G_SS`` has condition number above 1e12.
    """
    g_ss, g_cs, s = _blocks(gamma, support)
    cond = float(np.linalg.cond(g_ss))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        return None, None, cond, None
    inv = np.linalg.inv(g_ss)
    x = g_cs @ inv
    rho = float(np.abs(x).sum(axis=1).max(initial=0.0))
    weak = None if signs is None else float(np.abs(x @ signs).max(initial=0.0))
    inv_norm = float(np.abs(inv).sum(axis=1).max())
    return rho, weak, cond, inv_norm


def irrep_constant(m, c=None):
    """Irrepresentability diagnostics of a stable drift ``m``.

    Parameters
    ----------
    m : (p, p) array
        Stable drift; its nonzero pattern (plus diagonal) is the support S.
    c : (p, p) array, optional
        Volatility, default ``2 I``.

    Returns
    -------
    IrrepReport
        ``rho`` and ``weak_rho`` are ``None`` when the S x S Gram block is
        numerically singular. ``c_gamma`` is the inf-operator norm of its
        inverse, ``c_m = max |M|``, ``c_sigma`` the spectral norm of the
        equilibrium covariance and ``c_c = ||vec(C)||_2``.
    """
    m = np.asarray(m, dtype=float)
    p = m.shape[0]
    c = 2.0 * np.eye(p) if c is None else np.asarray(c, dtype=float)
    sigma = solve_lyapunov(m, c)
    support = support_of(m)
    signs = np.sign(vec(m)[support.flat])
    rho, weak, cond, inv_norm = irrep_from_gram(build_gram(sigma), support, signs)
    return IrrepReport(
        rho=rho,
        weak_rho=weak,
        gamma_ss_invertible=rho is not None,
        c_gamma=inv_norm,
        c_m=float(np.abs(m).max()),
        c_sigma=float(np.linalg.norm(sigma, 2)),
        c_c=float(np.linalg.norm(vec(c))),
        condition=cond,
    )


def weak_irrep_value(m, c=None):
    """``|| G_{S^c S} (G_SS)^{-1} sign(vec M)_S ||_inf``; raises if G_SS is singular."""
    rep = irrep_constant(m, c)
    if not rep.gamma_ss_invertible:
        raise SingularGramError(f"Gram support block is singular (cond {rep.condition:.2e})")
    return rep.weak_rho


def gram_diagonal_closed_form(d):
    """Gram matrix at ``Sigma = diag(1/d)`` assembled entrywise.

    ``4/d_l^2`` at ((l,l),(l,l)); ``2/d_l^2`` at ((k,l),(k,l)) for k != l;
    ``2/(d_k d_l)`` at ((l,k),(k,l)) for k != l; zero elsewhere.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("d must be strictly positive")
    p = d.size
    gamma = np.zeros((p * p, p * p))
    for k in range(p):
        for l in range(p):
            a = flat_index(k, l, p)
            if k == l:
                gamma[a, a] = 4.0 / d[l] ** 2
            else:
                gamma[a, a] = 2.0 / d[l] ** 2
                gamma[flat_index(l, k, p), a] = 2.0 / (d[k] * d[l])
    return gamma


@dataclass(frozen=True)
class LocalIrrep:
    rho_tilde: float | None
    ordering_ok: bool
    is_dag: bool


def diag_local_irrep(graph, d):
    """Local irrepresentability constant at ``M0 = -diag(d)``.

    Two-cycles make the support Gram block singular (``rho_tilde`` is
    ``None``). Otherwise ``rho_tilde`` is the largest ``d_i / d_j`` over
    edges ``i -> j`` (0 for an empty edge set).
    """
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("d must be strictly positive")
    if d.size != graph.p:
        raise ValueError("d has the wrong length")
    is_dag = graph.is_dag()
    if graph.has_two_cycle():
        return LocalIrrep(None, False, is_dag)
    rho = max((d[src] / d[dst] for src, dst in graph.edges), default=0.0)
    return LocalIrrep(float(rho), bool(rho < 1.0), is_dag)
