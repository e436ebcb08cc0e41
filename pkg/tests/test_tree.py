import math

import numpy as np
import pytest

from bergschatten.errors import ConfigError, DomainError, OutOfDepthError
from bergschatten.geometry import bergman_distance, random_ball_points, random_sphere_points
from bergschatten.tree import (
    BergmanTree,
    bergman_neighbors,
    boundary_neighbors,
    build_chain,
    build_sphere_net,
    build_tree,
    color_decompose,
    dyadic_counts,
    locate_cell,
    region_K,
    region_Q,
    region_S,
    verify_coloring,
)

LN2 = math.log(2.0)


def test_dyadic_counts_double():
    c = dyadic_counts(LN2 / 2, 8)
    assert c[0] == 1
    assert all(c[N + 1] == 2 * c[N] for N in range(1, 8))
    c = dyadic_counts(LN2 / 8, 12)
    assert c[9] == 2 * c[5]


def test_dyadic_needs_power_of_two():
    with pytest.raises(ConfigError):
        build_tree(0.3, 4, n=1, mode="dyadic")
    with pytest.raises(ConfigError):
        build_tree(LN2, 4, n=2, mode="dyadic")
    with pytest.raises(DomainError):
        build_tree(-1.0, 4)


def test_dyadic_anchors_equispaced(dyadic_tree):
    for N in range(1, dyadic_tree.depth + 1):
        ang = np.mod(np.angle(dyadic_tree.directions(N)[:, 0]), 2 * math.pi)
        gaps = np.diff(np.sort(ang))
        assert np.allclose(gaps, 2 * math.pi / dyadic_tree.counts[N], atol=1e-12)


@pytest.mark.parametrize("n", [2, 3])
def test_sphere_net_separated_and_covering(n):
    lam = LN2 / 2
    net = build_sphere_net(2, lam, n, seed=1)
    r = net.radius
    a = r * net.directions
    i, j = np.triu_indices(len(a), 1)
    assert bergman_distance(a[i], a[j]).min() >= lam - 1e-12
    probe = r * random_sphere_points(np.random.default_rng(9), 5000, n)
    d = bergman_distance(probe, a[net.nearest(probe / r)])
    assert d.max() < lam
    assert net.fractions.sum() == pytest.approx(1.0)


@pytest.mark.parametrize("name", ["dyadic_tree", "net_tree"])
def test_hierarchy(name, request):
    tree: BergmanTree = request.getfixturevalue(name)
    root = tree.root
    assert set(root.children) == set(tree.level_ids(1))
    for nd in tree.nodes[1:]:
        assert nd.id in tree.nodes[nd.parent].children
        assert tree.nodes[nd.parent].level == nd.level - 1
    assert sum(len(nd.children) for nd in tree.nodes) == len(tree) - 1


@pytest.mark.parametrize("name", ["dyadic_tree", "net_tree"])
def test_locate(name, request):
    tree: BergmanTree = request.getfixturevalue(name)
    assert locate_cell(tree, np.zeros(tree.n)).id == 0
    centers = np.array([nd.center for nd in tree.nodes])
    assert np.array_equal(tree.locate_many(centers), np.arange(len(tree)))
    z = random_ball_points(np.random.default_rng(2), 10000, tree.n, tree.outer_radius * 0.999)
    ids = tree.locate_many(z)
    assert np.all(ids >= 0)
    # exactly one cell claims each point: the level is atanh|z| / lambda
    lv = np.array([tree.nodes[i].level for i in ids])
    assert np.array_equal(lv, np.floor(np.arctanh(np.linalg.norm(z, axis=1)) / tree.lam).astype(int))
    with pytest.raises(OutOfDepthError):
        tree.locate(np.r_[0.9999999, np.zeros(tree.n - 1)])


def test_volumes_partition(dyadic_tree):
    total = sum(dyadic_tree.cell_volume(i, 1.0) for i in range(len(dyadic_tree)))
    from bergschatten.quadrature import WeightedMeasure

    assert total == pytest.approx(float(WeightedMeasure(1, 1.0).shell_mass(0, dyadic_tree.outer_radius)), rel=1e-12)


def test_child_count_bound(dyadic_tree):
    lam = dyadic_tree.lam
    ratios = [
        len(dyadic_tree.children_at(i, ell)) * math.exp(-2 * ell * lam)
        for ell in (1, 2, 3)
        for i in range(1, len(dyadic_tree))
        if dyadic_tree.nodes[i].level + ell <= dyadic_tree.depth
    ]
    assert max(ratios) < 4


def test_neighbors(dyadic_tree):
    a = dyadic_tree.node_id(4, 3)
    ids, trunc = bergman_neighbors(dyadic_tree, a, 1.0)
    assert a in ids and not trunc
    assert a in boundary_neighbors(dyadic_tree, a, 0.1)
    sizes = [len(bergman_neighbors(dyadic_tree, dyadic_tree.node_id(N, 0), 1.0)[0]) for N in range(2, 7)]
    assert max(sizes) <= 2 * min(sizes)
    with pytest.raises(DomainError):
        boundary_neighbors(dyadic_tree, 0, 1.0)


def test_regions_nested(dyadic_tree):
    for a in (dyadic_tree.node_id(2, 1), dyadic_tree.node_id(5, 7)):
        K, Q, S = region_K(dyadic_tree, a), region_Q(dyadic_tree, a), region_S(dyadic_tree, a, 6 * dyadic_tree.lam)
        assert K.ids <= Q.ids <= S.ids
        assert 1 <= Q.volume(0.0) / K.volume(0.0)
        assert S.truncated
    assert len(region_S(dyadic_tree, 0, 0.5).ids) == len(dyadic_tree)


def test_coloring(dyadic_tree):
    for M in (2, 4):
        classes = color_decompose(dyadic_tree, M)
        members = sorted(i for c in classes for i in c.members)
        assert members == list(range(len(dyadic_tree)))
        ok, _ = verify_coloring(dyadic_tree, classes)
        assert ok


def test_chain(dyadic_tree):
    a = dyadic_tree.node_id(5, 3)
    assert build_chain(dyadic_tree, a, a).members == (a,)
    nu = dyadic_tree.node_id(5, 6)
    ch = build_chain(dyadic_tree, a, nu)
    assert ch.members[0] == a and ch.members[-1] == nu
    assert len(set(ch.members)) == len(ch.members)
    assert all(v > 0 for v in ch.overlaps)


def test_jsonl_export(dyadic_tree):
    lines = dyadic_tree.to_jsonl().splitlines()
    assert len(lines) == len(dyadic_tree)
