import json
import math

import numpy as np
import pytest

from dagp.problems import (
    BallSet,
    BoxSet,
    Halfspace,
    LogCoshFunction,
    LogisticLoss,
    ProblemInstance,
    QuadraticFunction,
    WholeSpace,
    dykstra_project,
    generate_logistic_instance,
    generate_synthetic_instance,
    instance_from_json,
    instance_to_json,
)

from conftest import finite_difference_gradient, project_polyhedron_qp


class TestLogCosh:
    def test_zero_argument(self):
        f = LogCoshFunction(np.array([1.0, 2.0]), 3.0)
        x = np.array([1.0, 1.0])  # a.x - b = 0
        assert f.value(x) == 0.0
        assert np.array_equal(f.gradient(x), np.zeros(2))

    def test_large_argument_asymptote(self):
        f = LogCoshFunction(np.array([1.0]), 0.0)
        assert abs(f.value(np.array([50.0])) - (50.0 - math.log(2.0))) <= 1e-12

    def test_no_overflow_far_out(self):
        f = LogCoshFunction(np.array([1.0]), 0.0)
        assert np.isfinite(f.value(np.array([1e4])))
        assert np.isfinite(f.gradient(np.array([1e4]))[0])

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            f = LogCoshFunction(rng.standard_normal(5), float(rng.standard_normal()))
            x = rng.standard_normal(5)
            grad = f.gradient(x)
            fd = finite_difference_gradient(f.value, x)
            assert np.linalg.norm(grad - fd) <= 1e-6 * max(1.0, np.linalg.norm(grad))

    def test_convexity_on_sampled_segments(self):
        rng = np.random.default_rng(1)
        f = LogCoshFunction(rng.standard_normal(4), 0.3)
        for _ in range(200):
            x, y = rng.standard_normal(4), rng.standard_normal(4)
            lam = float(rng.uniform())
            mid = f.value(lam * x + (1 - lam) * y)
            assert mid <= lam * f.value(x) + (1 - lam) * f.value(y) + 1e-9

    def test_smoothness_bound_on_sampled_pairs(self):
        rng = np.random.default_rng(2)
        f = LogCoshFunction(rng.standard_normal(4), -0.7)
        lip = f.smoothness_bound
        for _ in range(200):
            x, y = 3 * rng.standard_normal(4), 3 * rng.standard_normal(4)
            lhs = np.linalg.norm(f.gradient(x) - f.gradient(y))
            assert lhs <= lip * np.linalg.norm(x - y) + 1e-9


class TestLogistic:
    def _random_loss(self, rng, n=20, m=4, reg=0.05):
        features = rng.standard_normal((n, m))
        labels = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        return LogisticLoss(features, labels, reg)

    def test_zero_weights_value(self):
        loss = self._random_loss(np.random.default_rng(3))
        assert abs(loss.value(np.zeros(4)) - 20 * math.log(2.0)) <= 1e-12

    def test_loss_term_saturates(self):
        # single sample, correct classification: only the ridge term survives
        loss = LogisticLoss(np.array([[1.0]]), np.array([1.0]), reg=0.1)
        t = 40.0
        assert abs(loss.value(np.array([t])) - 0.05 * t * t) <= 1e-12

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(4)
        loss = self._random_loss(rng)
        for _ in range(10):
            w = rng.standard_normal(4)
            grad = loss.gradient(w)
            fd = finite_difference_gradient(loss.value, w)
            assert np.linalg.norm(grad - fd) <= 1e-6 * max(1.0, np.linalg.norm(grad))

    def test_smoothness_bound(self):
        rng = np.random.default_rng(5)
        loss = self._random_loss(rng)
        lip = loss.smoothness_bound
        for _ in range(100):
            x, y = rng.standard_normal(4), rng.standard_normal(4)
            lhs = np.linalg.norm(loss.gradient(x) - loss.gradient(y))
            assert lhs <= lip * np.linalg.norm(x - y) + 1e-9

    def test_rejects_bad_labels(self):
        with pytest.raises(ValueError):
            LogisticLoss(np.ones((2, 2)), np.array([1.0, 2.0]), 0.1)


class TestQuadratic:
    def test_gradient_and_smoothness(self):
        rng = np.random.default_rng(20)
        f = QuadraticFunction(rng.standard_normal(4))
        for _ in range(100):
            x, y = rng.standard_normal(4), rng.standard_normal(4)
            fd = finite_difference_gradient(f.value, x)
            assert np.linalg.norm(f.gradient(x) - fd) <= 1e-6
            lhs = np.linalg.norm(f.gradient(x) - f.gradient(y))
            assert lhs <= f.smoothness_bound * np.linalg.norm(x - y) + 1e-12

    def test_minimum_at_center(self):
        center = np.array([1.0, -2.0])
        f = QuadraticFunction(center)
        assert f.value(center) == 0.0
        assert np.array_equal(f.gradient(center), np.zeros(2))


class TestHalfspace:
    def test_interior_point_unchanged(self):
        h = Halfspace(np.array([1.0, 1.0]), 5.0)
        x = np.array([1.0, 1.0])
        assert np.array_equal(h.project(x), x)

    def test_axis_aligned_drop(self):
        h = Halfspace(np.array([1.0, 0.0]), 0.0)
        assert np.allclose(h.project(np.array([2.0, 3.0])), [0.0, 3.0])

    def test_active_projection_lands_on_boundary(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            h = Halfspace(rng.standard_normal(8), float(rng.standard_normal()))
            x = rng.standard_normal(8) * 3
            p = h.project(x)
            if float(h.c @ x) > h.d:
                assert abs(float(h.c @ p) - h.d) <= 1e-10

    def test_matches_qp_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            c = rng.standard_normal(8)
            d = float(rng.standard_normal())
            x = 3 * rng.standard_normal(8)
            ours = Halfspace(c, d).project(x)
            oracle = project_polyhedron_qp(c[None, :], np.array([d]), x)
            assert np.linalg.norm(ours - oracle) <= 1e-8

    def test_zero_normal_rejected(self):
        with pytest.raises(ValueError):
            Halfspace(np.zeros(3), 1.0)


def _sample_sets(rng, m=5):
    return [
        Halfspace(rng.standard_normal(m), float(rng.standard_normal())),
        BoxSet(-np.abs(rng.standard_normal(m)), np.abs(rng.standard_normal(m))),
        BallSet(rng.standard_normal(m), 1.5),
        WholeSpace(m),
    ]


class TestConvexSetProperties:
    """Idempotence, nonexpansiveness, and the variational inequality for every set."""

    def test_projection_properties_bulk(self):
        rng = np.random.default_rng(8)
        for s in _sample_sets(rng):
            points = 4.0 * rng.standard_normal((1000, s.dimension))
            others = 4.0 * rng.standard_normal((1000, s.dimension))
            for x, y in zip(points, others):
                px = s.project(x)
                assert np.linalg.norm(s.project(px) - px) <= 1e-10
                assert (
                    np.linalg.norm(px - s.project(y))
                    <= np.linalg.norm(x - y) + 1e-10
                )
            # variational inequality against sampled members of the set
            members = [s.project(4.0 * rng.standard_normal(s.dimension)) for _ in range(50)]
            for x in points[:100]:
                px = s.project(x)
                for z in members:
                    assert float((x - px) @ (z - px)) <= 1e-10

    def test_distance_consistent_with_projection(self):
        rng = np.random.default_rng(9)
        for s in _sample_sets(rng):
            for _ in range(100):
                x = 4.0 * rng.standard_normal(s.dimension)
                assert abs(s.distance(x) - np.linalg.norm(x - s.project(x))) <= 1e-12
                assert s.contains(s.project(x), tol=1e-9)


class TestGenerators:
    def test_witness_strictly_feasible(self):
        for seed in range(10):
            inst = generate_synthetic_instance(6, 8, seed)
            for s in inst.constraint_sets:
                assert float(s.c @ inst.feasible_witness) < s.d

    def test_reproducible_bitwise(self):
        a = generate_synthetic_instance(5, 4, seed=42)
        b = generate_synthetic_instance(5, 4, seed=42)
        for fa, fb in zip(a.functions, b.functions):
            assert np.array_equal(fa.a, fb.a) and fa.b == fb.b
        for sa, sb in zip(a.constraint_sets, b.constraint_sets):
            assert np.array_equal(sa.c, sb.c) and sa.d == sb.d

    def test_first_setup_shape(self):
        inst = generate_synthetic_instance(20, 10, seed=0)
        assert inst.dimension == 20 and inst.node_count == 10

    def test_second_setup_shape(self):
        inst = generate_synthetic_instance(10, 20, seed=0)
        assert inst.dimension == 10 and inst.node_count == 20

    def test_logistic_balanced_split(self):
        inst = generate_logistic_instance(4, 6, samples_per_node=10, seed=0)
        for f in inst.functions:
            assert f.features.shape == (10, 6)
            assert abs(float(np.sum(f.labels))) == 0.0  # alternating labels balance

    def test_logistic_reg_weight_rule(self):
        inst = generate_logistic_instance(20, 3, samples_per_node=500, seed=1)
        for f in inst.functions:
            assert f.reg == 1.0 / 10_000

    def test_instance_validation(self):
        with pytest.raises(ValueError):
            ProblemInstance(
                dimension=3,
                node_count=2,
                functions=[QuadraticFunction(np.zeros(3))],
                constraint_sets=[WholeSpace(3), WholeSpace(3)],
            )


class TestDykstra:
    def test_single_set_equals_its_projection(self):
        rng = np.random.default_rng(10)
        h = Halfspace(rng.standard_normal(4), 0.2)
        x = 3 * rng.standard_normal(4)
        result = dykstra_project([h], x)
        assert result.converged
        assert np.allclose(result.point, h.project(x), atol=1e-12)

    def test_two_orthogonal_halfspaces(self):
        sets = [
            Halfspace(np.array([1.0, 0.0]), 0.0),
            Halfspace(np.array([0.0, 1.0]), 0.0),
        ]
        result = dykstra_project(sets, np.array([1.0, 1.0]))
        assert result.converged
        assert np.allclose(result.point, [0.0, 0.0], atol=1e-9)

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_qp_oracle(self, seed):
        rng = np.random.default_rng(seed)
        m = 4
        c = rng.standard_normal((5, m))
        witness = rng.standard_normal(m)
        d = c @ witness + np.abs(rng.standard_normal(5))
        sets = [Halfspace(c[i], d[i]) for i in range(5)]
        x = witness + 3 * rng.standard_normal(m)
        result = dykstra_project(sets, x, iters=2000, tol=1e-11)
        assert result.converged
        oracle = project_polyhedron_qp(c, d, x)
        assert np.linalg.norm(result.point - oracle) <= 1e-6

    def test_budget_exhaustion_flagged(self):
        rng = np.random.default_rng(11)
        c = rng.standard_normal((6, 3))
        d = c @ rng.standard_normal(3)  # witness on every boundary: slow corner
        sets = [Halfspace(c[i], d[i]) for i in range(6)]
        result = dykstra_project(sets, 10 * np.ones(3), iters=1, tol=1e-14)
        assert not result.converged

    def test_empty_set_list_rejected(self):
        with pytest.raises(ValueError):
            dykstra_project([], np.zeros(2))


class TestSerialization:
    def test_synthetic_round_trip(self):
        inst = generate_synthetic_instance(4, 3, seed=5)
        text = instance_to_json(inst)
        back = instance_from_json(text)
        assert back.dimension == inst.dimension
        assert back.node_count == inst.node_count
        assert back.kind == inst.kind and back.seed == inst.seed
        for fa, fb in zip(inst.functions, back.functions):
            assert np.array_equal(fa.a, fb.a) and fa.b == fb.b
        for sa, sb in zip(inst.constraint_sets, back.constraint_sets):
            assert np.array_equal(sa.c, sb.c) and sa.d == sb.d
        assert np.array_equal(inst.feasible_witness, back.feasible_witness)

    def test_logistic_round_trip(self):
        inst = generate_logistic_instance(3, 4, samples_per_node=5, seed=2)
        back = instance_from_json(instance_to_json(inst))
        for fa, fb in zip(inst.functions, back.functions):
            assert np.array_equal(fa.features, fb.features)
            assert np.array_equal(fa.labels, fb.labels)
            assert fa.reg == fb.reg

    def test_json_is_plain_data(self):
        payload = json.loads(instance_to_json(generate_synthetic_instance(3, 2, seed=1)))
        assert payload["dimension"] == 3
        assert {f["type"] for f in payload["functions"]} == {"log_cosh"}
