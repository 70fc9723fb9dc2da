import numpy as np
import pytest

from nbcs import geometry as g
from nbcs.errors import NumericalError, OutsideRootError, SplitError
from nbcs.system import (
    NestedSystem,
    WeightVector,
    decision_values,
    hyperplane_weights,
    lift_weights,
)


def random_system(d, n_splits, seed, concentration=3.0):
    rng = np.random.default_rng(seed)
    system = NestedSystem.regular(d)
    for _ in range(n_splits):
        leaves = system.leaves()
        leaf = int(leaves[rng.integers(len(leaves))])
        s = system.node_simplex(leaf)
        alpha = rng.dirichlet(np.ones(d + 1) * concentration)
        system.split(leaf, system.nudge_to_interior(leaf, alpha @ s.coords))
    return system


def random_interior_points(system, n, seed):
    rng = np.random.default_rng(seed)
    alphas = rng.dirichlet(np.ones(system.dim + 1), size=n)
    return alphas @ system.root.coords


class TestSplit:
    def test_barycenter_split_of_triangle(self):
        system = NestedSystem.regular(2)
        vid = system.split(0, g.barycenter(system.root))
        assert vid == 3
        assert len(system.leaves()) == 3
        np.testing.assert_allclose(system.split_records[0].beta, 1 / 3, atol=1e-12)

    def test_children_partition_parent_area(self):
        for d in (2, 3):
            system = random_system(d, 5, seed=d)
            for rec in system.split_records:
                node = system.nodes[rec.node]
                parent_vol = g.simplex_volume(
                    system.vertex_array()[list(node.vertex_ids)]
                )
                child_vol = sum(
                    g.simplex_volume(
                        system.vertex_array()[list(system.nodes[c].vertex_ids)]
                    )
                    for c in node.children
                )
                assert abs(child_vol - parent_vol) / parent_vol < 1e-8

    def test_children_share_d_vertices_and_split_vertex(self):
        system = random_system(3, 4, seed=1)
        for rec in system.split_records:
            node = system.nodes[rec.node]
            for c in node.children:
                child = system.nodes[c]
                shared = set(child.vertex_ids) & set(node.vertex_ids)
                assert len(shared) == system.dim
                assert rec.vertex in child.vertex_ids

    def test_split_at_vertex_rejected(self):
        system = NestedSystem.regular(2)
        with pytest.raises(SplitError):
            system.split(0, system.root.coords[0])

    def test_split_on_face_rejected(self):
        system = NestedSystem.regular(2)
        mid = (system.root.coords[0] + system.root.coords[1]) / 2
        with pytest.raises(SplitError):
            system.split(0, mid)

    def test_split_non_leaf_rejected(self):
        system = NestedSystem.regular(2)
        system.split(0, g.barycenter(system.root))
        with pytest.raises(SplitError):
            system.split(0, g.barycenter(system.root))

    def test_vertex_order_append_only(self):
        system = random_system(2, 3, seed=5)
        before = [system.vertex(i).copy() for i in range(system.n_vertices)]
        leaf = system.leaves()[0]
        s = system.node_simplex(leaf)
        system.split(leaf, g.barycenter(s))
        for i, v in enumerate(before):  # earlier stages stay a prefix
            np.testing.assert_array_equal(system.vertex(i), v)


class TestLocate:
    def test_stage0_returns_root(self):
        system = NestedSystem.regular(3)
        x = random_interior_points(system, 1, seed=0)[0]
        assert system.locate(x) == 0

    def test_depth2_leaf_barycenter(self):
        system = NestedSystem.regular(2)
        system.split(0, g.barycenter(system.root))
        child = system.nodes[0].children[1]
        s = system.node_simplex(child)
        system.split(child, g.barycenter(s))
        grandchild = system.nodes[child].children[2]
        target = g.barycenter(system.node_simplex(grandchild))
        assert system.locate(target) == grandchild
        assert system.node_depth(grandchild) == 2

    def test_shared_face_tie_rule(self):
        # children 0 and 1 share the face (vertex 2, split vertex); the tie
        # resolves to the lowest-index child
        system = NestedSystem.regular(2)
        center = g.barycenter(system.root)
        system.split(0, center)
        x = (system.root.coords[2] + center) / 2
        assert system.locate(x) == system.nodes[0].children[0]

    def test_outside_root_error_carries_coefficient(self):
        system = NestedSystem.regular(2)
        with pytest.raises(OutsideRootError) as exc:
            system.locate(np.array([5.0, 5.0]))
        assert exc.value.coefficient < 0

    def test_locate_cost_is_depth(self):
        # one candidate pass per level: the returned leaf's depth bounds the
        # number of coordinate solves
        system = random_system(2, 6, seed=9)
        X = random_interior_points(system, 100, seed=10)
        _, _, leaves = system.embed_batch(X)
        depths = np.array([system.node_depth(int(l)) for l in leaves])
        assert depths.max() <= len(system.split_records)


class TestEmbed:
    def test_stage0_plain_barycentric(self):
        system = NestedSystem.regular(3)
        x = random_interior_points(system, 1, seed=2)[0]
        e = system.embed(x)
        np.testing.assert_allclose(
            e.values, g.barycentric_coords(system.root, x), atol=1e-12
        )
        assert list(e.indices) == [0, 1, 2, 3]

    def test_split_vertex_single_entry(self):
        system = random_system(2, 3, seed=3)
        vid = 3  # first split vertex
        e = system.embed(system.vertex(vid)).pruned(tol=1e-9)
        assert len(e.indices) == 1
        assert e.indices[0] == vid
        assert abs(e.values[0] - 1.0) < 1e-9

    def test_sparsity_and_l1(self):
        for d in (2, 3, 5):
            system = random_system(d, 6, seed=d + 20)
            X = random_interior_points(system, 500, seed=d)
            idx, val, _ = system.embed_batch(X)
            assert idx.shape[1] == d + 1
            assert np.abs(val.sum(axis=1) - 1.0).max() < 1e-9
            assert val.min() > -1e-9

    def test_round_trip(self):
        for d in (2, 3, 5):
            system = random_system(d, 8, seed=d + 40)
            X = random_interior_points(system, 1000, seed=d + 1)
            idx, val, _ = system.embed_batch(X)
            rec = np.einsum("nk,nkd->nd", val, system.vertex_array()[idx])
            assert np.abs(rec - X).max() < 1e-9

    def test_project_back_single(self):
        system = random_system(2, 4, seed=6)
        x = random_interior_points(system, 1, seed=7)[0]
        e = system.embed(x)
        np.testing.assert_allclose(system.project_back(e), x, atol=1e-9)

    def test_project_back_bad_index(self):
        system = NestedSystem.regular(2)
        e = system.embed(g.barycenter(system.root))
        bad = type(e)(indices=np.array([0, 1, 99]), values=e.values)
        with pytest.raises(IndexError):
            system.project_back(bad)


class TestDecisionValue:
    def test_constant_weights(self):
        system = random_system(2, 5, seed=8)
        w = WeightVector.constant(2.5, system.n_vertices)
        for x in random_interior_points(system, 20, seed=9):
            assert abs(system.decision_value(w, x) - 2.5) < 1e-9

    def test_unit_weight_at_split_vertex(self):
        system = random_system(2, 3, seed=10)
        w = WeightVector(np.zeros(system.n_vertices))
        w.values[3] = 1.0
        assert abs(system.decision_value(w, system.vertex(3)) - 1.0) < 1e-9

    def test_excluded_vertex_forces_negative(self):
        system = NestedSystem.regular(2)
        system.split(0, g.barycenter(system.root))
        w = WeightVector(np.ones(4))
        w.excluded[3] = True
        x = g.barycenter(system.node_simplex(system.nodes[0].children[0]))
        assert system.decision_value(w, x) == -np.inf


class TestHyperplaneWeights:
    def test_midpoint_line(self):
        # line through the midpoints of edges (q0,q1) and (q0,q2):
        # solving the 2x3 null-space system gives w proportional to (1,-1,-1)
        s = g.regular_simplex(2)
        m1 = (s.coords[0] + s.coords[1]) / 2
        m2 = (s.coords[0] + s.coords[2]) / 2
        w = hyperplane_weights(s, [m1, m2])
        np.testing.assert_allclose(w, np.array([1.0, -1.0, -1.0]) / np.sqrt(3), atol=1e-9)

    def test_face_line(self):
        s = g.regular_simplex(2)
        w = hyperplane_weights(s, [s.coords[1], s.coords[2]])
        np.testing.assert_allclose(w, [1.0, 0.0, 0.0], atol=1e-9)

    def test_vanishes_on_hyperplane(self):
        rng = np.random.default_rng(12)
        s = g.regular_simplex(2)
        a, b = rng.dirichlet([2, 2, 2]) @ s.coords, rng.dirichlet([2, 2, 2]) @ s.coords
        w = hyperplane_weights(s, [a, b])
        assert abs(np.linalg.norm(w) - 1.0) < 1e-12
        for t in np.linspace(0, 1, 100):
            x = a + t * (b - a)
            assert abs(g.barycentric_coords(s, x) @ w) < 1e-9

    def test_rank_deficient_rejected(self):
        s = g.regular_simplex(2)
        m = (s.coords[0] + s.coords[1]) / 2
        with pytest.raises(NumericalError):
            hyperplane_weights(s, [m, m])


class TestLiftWeights:
    def test_constant_weights_stay_constant(self):
        system = random_system(2, 1, seed=13)
        w = lift_weights(WeightVector.constant(1.0, 3), system.split_records[0])
        assert abs(w.values[-1] - 1.0) < 1e-12

    def test_arithmetic_example(self):
        system = NestedSystem.regular(2)
        system.split(0, g.barycenter(system.root))
        w = lift_weights(WeightVector([3.0, 0.0, -3.0]), system.split_records[0])
        assert abs(w.values[-1]) < 1e-12

    def test_length_mismatch(self):
        system = random_system(2, 2, seed=14)
        with pytest.raises(ValueError):
            lift_weights(WeightVector([1.0, 2.0]), system.split_records[0])

    def test_excluded_parent_propagates(self):
        system = NestedSystem.regular(2)
        system.split(0, g.barycenter(system.root))
        w = WeightVector(np.ones(3), np.array([False, True, False]))
        assert lift_weights(w, system.split_records[0]).excluded[-1]

    def test_decision_value_invariance(self):
        # re-expressing weights after any split sequence never moves the
        # decision function
        rng = np.random.default_rng(15)
        for d in (2, 3, 5):
            system = random_system(d, 6, seed=d + 60)
            w = WeightVector(rng.standard_normal(d + 1))
            for rec in system.split_records:
                w = lift_weights(w, rec)
            X = random_interior_points(system, 1000, seed=d + 61)
            idx, val, _ = system.embed_batch(X)
            after = decision_values(w, idx, val)
            stage0 = NestedSystem.regular(d)
            i0, v0, _ = stage0.embed_batch(X)
            before = decision_values(WeightVector(w.values[: d + 1]), i0, v0)
            assert np.abs(before - after).max() < 1e-9


class TestCoefficientRecurrence:
    def test_split_point_residual_zero(self):
        system = random_system(2, 1, seed=16)
        rec = system.split_records[0]
        assert system.coefficient_recurrence_check(system.vertex(rec.vertex), rec) < 1e-12

    def test_retained_vertex_residual_zero(self):
        system = random_system(2, 1, seed=17)
        rec = system.split_records[0]
        v = system.vertex(rec.parent_vertex_ids[0])
        assert system.coefficient_recurrence_check(v, rec) < 1e-12

    def test_random_interior_residual(self):
        rng = np.random.default_rng(18)
        for d in (2, 3):
            system = random_system(d, 4, seed=d + 80)
            for rec in system.split_records:
                s = system.node_simplex(rec.node)
                for alpha in rng.dirichlet(np.ones(d + 1), size=50):
                    assert system.coefficient_recurrence_check(alpha @ s.coords, rec) < 1e-9
