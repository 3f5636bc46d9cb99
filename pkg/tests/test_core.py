import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softwrench.core import (Pose, Rng, Wrench, vector_projection, wrap_angle,
                             wrench_add, wrench_scale, wrench_sub)


class TestVectorProjection:
    def test_orthogonal_case(self):
        assert np.allclose(vector_projection([2, 0, 0], [0, 0, 5]), [0, 0, 0])

    def test_parallel_case(self):
        assert np.allclose(vector_projection([2, 0, 0], [1, 0, 0]), [2, 0, 0])

    def test_direct_evaluation(self):
        # (d.f/||f||^2) f with d=(1,1,0), f=(0,2,0): (2/4)*(0,2,0) = (0,1,0)
        assert np.allclose(vector_projection([1, 1, 0], [0, 2, 0]), [0, 1, 0])

    def test_zero_axis_raises(self):
        with pytest.raises(ValueError, match="degenerate projection axis"):
            vector_projection([1.0, 2.0, 3.0], [0.0, 0.0, 0.0])

    @given(st.integers(0, 10 ** 6))
    @settings(max_examples=60, deadline=None)
    def test_idempotent_and_orthogonal_decomposition(self, seed):
        gen = np.random.default_rng(seed)
        d = gen.normal(size=3)
        f = gen.normal(size=3)
        if np.linalg.norm(f) < 1e-6:
            return
        p = vector_projection(d, f)
        assert np.allclose(vector_projection(p, f), p, atol=1e-9)
        assert np.allclose(d, p + (d - p), atol=0.0)
        resid = abs(float((d - p) @ f))
        assert resid <= 1e-9 * max(np.linalg.norm(d) * np.linalg.norm(f), 1e-30)


class TestWrenchArithmetic:
    def test_add_zero_identity(self):
        w = Wrench([1, 2, 3], [4, 5, 6])
        out = wrench_add(w, Wrench.zero())
        assert np.array_equal(out.as_array(), w.as_array())

    def test_scale_zero(self):
        w = Wrench([1, 2, 3], [4, 5, 6])
        assert np.array_equal(wrench_scale(w, 0.0).as_array(), np.zeros(6))

    def test_self_subtraction(self):
        w = Wrench([1, 2, 3], [4, 5, 6])
        assert np.array_equal(wrench_sub(w, w).as_array(), np.zeros(6))

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            Wrench([np.nan, 0, 0], [0, 0, 0])

    def test_round_trip_array(self):
        w = Wrench.from_array([1, 2, 3, 4, 5, 6])
        assert np.array_equal(w.as_array(), [1, 2, 3, 4, 5, 6])


class TestPose:
    def test_yaw_wrapped(self):
        p = Pose(np.zeros(3), yaw=3 * np.pi / 2)
        assert -np.pi <= p.yaw < np.pi

    def test_wrap_angle_bounds(self):
        for theta in np.linspace(-20, 20, 401):
            assert -np.pi <= wrap_angle(theta) < np.pi

    def test_rotation_transform(self):
        p = Pose(np.array([1.0, 2.0, 3.0]), yaw=np.pi / 2)
        out = p.to_world(np.array([1.0, 0.0, 0.0]))
        assert np.allclose(out, [1.0, 3.0, 3.0], atol=1e-12)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            Pose(np.array([np.inf, 0, 0]))


class TestRng:
    def test_same_seed_same_stream(self):
        a = Rng(1234).gen.random(10_000)
        b = Rng(1234).gen.random(10_000)
        assert np.array_equal(a, b)

    def test_different_seed_differs(self):
        assert not np.array_equal(Rng(1).gen.random(100), Rng(2).gen.random(100))

    def test_split_independent_of_parent_draws(self):
        r1 = Rng(7)
        r1.gen.random(100)
        child_after = r1.split("x").gen.random(50)
        child_fresh = Rng(7).split("x").gen.random(50)
        assert np.array_equal(child_after, child_fresh)

    def test_named_splits_differ(self):
        assert not np.array_equal(Rng(7).split("a").gen.random(10),
                                  Rng(7).split("b").gen.random(10))
