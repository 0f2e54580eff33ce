import math

import numpy as np
import pytest

from subreglab._kernels import _pure, available_backends

BACKENDS = available_backends()
HAS_FAST = "fast" in BACKENDS

needs_fast = pytest.mark.skipif(
    not HAS_FAST, reason="compiled kernels unavailable; nothing to compare"
)


def _random_packed(rng, n_unions):
    counts = rng.integers(0, 4, size=n_unions).astype(np.int64)
    starts = np.zeros(n_unions, dtype=np.int64)
    np.cumsum(counts[:-1], out=starts[1:])
    total = int(counts.sum())
    los = np.sort(rng.normal(size=total) * 2.0)
    his = los + np.abs(rng.normal(size=total))
    return starts, counts, los, his


@needs_fast
class TestBackendEquivalence:
    def test_dist_many_points(self):
        rng = np.random.default_rng(1)
        fast = BACKENDS["fast"]
        for _ in range(50):
            n = int(rng.integers(1, 5))
            los = np.sort(rng.normal(size=n))
            his = los + np.abs(rng.normal(size=n))
            ps = rng.normal(size=200) * 3.0
            a = _pure.dist_many_points(ps, los, his)
            b = fast.dist_many_points(ps, los, his)
            np.testing.assert_array_equal(a, b)

    def test_dist_many_points_empty(self):
        fast = BACKENDS["fast"]
        ps = np.array([0.0, 1.0])
        empty = np.empty(0)
        assert np.all(np.isinf(_pure.dist_many_points(ps, empty, empty)))
        assert np.all(np.isinf(fast.dist_many_points(ps, empty, empty)))

    def test_dist_packed(self):
        rng = np.random.default_rng(2)
        fast = BACKENDS["fast"]
        for _ in range(50):
            starts, counts, los, his = _random_packed(rng, 64)
            p = float(rng.normal())
            a = _pure.dist_packed(p, starts, counts, los, his)
            b = fast.dist_packed(p, starts, counts, los, his)
            np.testing.assert_array_equal(a, b)
            # empty unions are +inf in both
            assert np.all(np.isinf(a[counts == 0]))

    def test_max_ratio_random(self):
        rng = np.random.default_rng(3)
        fast = BACKENDS["fast"]
        for q in (1.0, 2.0, 2.5):
            for _ in range(30):
                n = 500
                xs = np.sort(rng.normal(size=n) * 2.0)
                nums = np.abs(rng.normal(size=n))
                dens = np.abs(rng.normal(size=n))
                dens[rng.integers(0, n, size=5)] = 0.0
                nums[rng.integers(0, n, size=3)] = 0.0
                a = _pure.max_ratio(xs, nums, dens, q, 0.0)
                b = fast.max_ratio(xs, nums, dens, q, 0.0)
                assert a == b


class TestConventions:
    @pytest.mark.parametrize("impl", list(BACKENDS.values()), ids=list(BACKENDS))
    def test_zero_over_zero_is_zero(self, impl):
        xs = np.array([0.5])
        eta, widx, nviol = impl.max_ratio(xs, np.array([0.0]), np.array([0.0]), 2.0, 0.0)
        assert eta == 0.0 and nviol == 0 and widx == 0

    @pytest.mark.parametrize("impl", list(BACKENDS.values()), ids=list(BACKENDS))
    def test_positive_over_zero_is_violation(self, impl):
        xs = np.array([0.25, 0.5])
        nums = np.array([0.25, 0.5])
        dens = np.array([1.0, 0.0])
        eta, widx, nviol = impl.max_ratio(xs, nums, dens, 1.0, 0.0)
        assert math.isinf(eta) and nviol == 1 and widx == 1

    @pytest.mark.parametrize("impl", list(BACKENDS.values()), ids=list(BACKENDS))
    def test_empty_value_contributes_zero(self, impl):
        xs = np.array([0.5, 1.0])
        nums = np.array([0.5, 0.1])
        dens = np.array([np.inf, 1.0])
        eta, widx, nviol = impl.max_ratio(xs, nums, dens, 2.0, 0.0)
        assert eta == 0.1 and widx == 1 and nviol == 0

    @pytest.mark.parametrize("impl", list(BACKENDS.values()), ids=list(BACKENDS))
    def test_tie_breaks_toward_center_then_low(self, impl):
        # equal ratios at offsets 2 and 1: the smaller offset wins
        xs = np.array([-2.0, -1.0, 1.0])
        nums = np.array([1.0, 1.0, 1.0])
        dens = np.array([1.0, 1.0, 1.0])
        _, widx, _ = impl.max_ratio(xs, nums, dens, 1.0, 0.0)
        assert xs[widx] == -1.0
        # equal ratio and offset: the smaller x wins
        xs = np.array([-1.0, 1.0])
        _, widx, _ = impl.max_ratio(xs, nums[:2], dens[:2], 1.0, 0.0)
        assert xs[widx] == -1.0
