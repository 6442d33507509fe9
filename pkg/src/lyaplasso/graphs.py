"""Directed graphs on a handful of nodes, one representative per isomorphism class."""
from itertools import combinations, permutations

from .irrep import SupportSet

FAMILIES = ("dag", "simple", "all")


def _canonical(edges, p):
    return min(tuple(sorted((perm[a], perm[b]) for a, b in edges)) for perm in permutations(range(p)))


def _weakly_connected(edges, p):
    if p == 1:
        return True
    adj = {k: set() for k in range(p)}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    seen, stack = {0}, [0]
    while stack:
        for nxt in adj[stack.pop()] - seen:
            seen.add(nxt)
            stack.append(nxt)
    return len(seen) == p


def enumerate_graphs(p, family="dag", max_edges=None):
    """Weakly connected digraphs on ``p`` nodes up to relabeling.

    ``family``: ``dag`` (acyclic), ``simple`` (no two-cycles) or ``all``.
    ``max_edges`` defaults to ``p (p - 1) / 2``, the largest edge count whose
    support (diagonal included) fits the rank ``p (p + 1) / 2`` of the Gram
    matrix. Returns :class:`SupportSet` objects sorted by edge count, then
    edge list; each uses the lexicographically smallest labeling.
    """
    if family not in FAMILIES:
        raise ValueError(f"family must be one of {FAMILIES}")
    if p < 2:
        raise ValueError("need at least two nodes")
    max_edges = p * (p - 1) // 2 if max_edges is None else max_edges
    arcs = [(a, b) for a in range(p) for b in range(p) if a != b]
    found = set()
    for k in range(p - 1, max_edges + 1):
        for edges in combinations(arcs, k):
            if not _weakly_connected(edges, p):
                continue
            g = SupportSet.from_edges(p, edges)
            if family == "dag" and not g.is_dag():
                continue
            if family == "simple" and g.has_two_cycle():
                continue
            found.add(_canonical(edges, p))
    graphs = sorted(found, key=lambda e: (len(e), e))
    return [SupportSet.from_edges(p, e) for e in graphs]


def edge_label(support, names=None):
    """Compact ``"1->2,2->3"`` label with 1-based node numbers or given names."""
    names = names or [str(k + 1) for k in range(support.p)]
    return ",".join(f"{names[a]}->{names[b]}" for a, b in support.edges)
