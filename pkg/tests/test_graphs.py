from itertools import permutations

import numpy as np
import pytest

from lyaplasso.graphs import FAMILIES, edge_label, enumerate_graphs


def _relabelings(g):
    for perm in permutations(range(g.p)):
        yield tuple(sorted((perm[a], perm[b]) for a, b in g.edges))


@pytest.mark.parametrize("p,family,count", [
    (2, "dag", 1), (3, "dag", 4), (4, "dag", 24),
    (2, "simple", 1), (3, "simple", 5), (4, "simple", 34),
    (2, "all", 1), (3, "all", 7), (4, "all", 114),
])
def test_class_counts(p, family, count):
    assert len(enumerate_graphs(p, family)) == count


@pytest.mark.parametrize("family", FAMILIES)
def test_representatives_are_pairwise_non_isomorphic(family):
    graphs = enumerate_graphs(4, family)
    seen = set()
    for g in graphs:
        forms = set(_relabelings(g))
        assert not forms & seen
        seen |= forms
        assert 3 <= g.n_edges <= 6


def test_family_membership_and_order():
    dags = enumerate_graphs(4, "dag")
    assert all(g.is_dag() for g in dags)
    assert all(not g.has_two_cycle() for g in enumerate_graphs(4, "simple"))
    assert any(g.has_two_cycle() for g in enumerate_graphs(3, "all"))
    counts = [g.n_edges for g in dags]
    assert counts == sorted(counts)
    assert all(np.all(np.diag(g.mask)) for g in dags)


def test_max_edges_override_and_validation():
    assert len(enumerate_graphs(3, "dag", max_edges=2)) == 3
    with pytest.raises(ValueError):
        enumerate_graphs(3, "tree")
    with pytest.raises(ValueError):
        enumerate_graphs(1)


def test_edge_label():
    g = enumerate_graphs(3, "dag")[0]
    assert edge_label(g).count("->") == 2
    assert edge_label(g, ["a", "b", "c"]).replace("a", "").replace("b", "").replace("c", "") == "->,->"
