import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cejulia.porosity import (DyadicOccupancy, box_good_scales, box_porosity_detect, build_occupancy,
                              directional_scan, mean_porosity_scan, morton_decode, morton_encode,
                              synthetic_set)

points_2d = st.lists(st.tuples(st.floats(0, 0.999999), st.floats(0, 0.999999)), min_size=1, max_size=60)


def random_set(seed: int, k: int = 300) -> np.ndarray:
    rng = np.random.default_rng(seed)
    base = rng.random((8, 2))
    return np.clip(base[rng.integers(8, size=k)] + 0.05 * rng.standard_normal((k, 2)), 0, 0.999999)


class TestOccupancy:
    def test_single_point(self):
        occ = build_occupancy(np.array([[0.3, 0.7]]), 10)
        assert [occ.count(n) for n in range(11)] == [1] * 11

    def test_full_square(self):
        occ = DyadicOccupancy.from_unit_points(synthetic_set("square", 6), 6)
        assert [occ.count(n) for n in range(7)] == [4 ** n for n in range(7)]

    def test_dyadic_segment(self):
        m = 2 ** 9
        occ = build_occupancy(np.column_stack([np.arange(m) / m, np.zeros(m)]), 9)
        assert [occ.count(n) for n in range(10)] == [2 ** n for n in range(10)]

    def test_outside_point_named(self):
        with pytest.raises(ValueError, match="1.5"):
            build_occupancy(np.array([[0.2, 0.2], [1.5, 0.1]]), 4)

    @settings(max_examples=50, deadline=None)
    @given(points_2d, st.integers(1, 12))
    def test_closure_and_root(self, pts, depth):
        occ = build_occupancy(np.array(pts), depth)
        assert occ.check_closure() and occ.count(0) == 1
        assert occ.count(depth) == len({(int(x * 2 ** depth), int(y * 2 ** depth)) for x, y in pts})

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 1023), st.integers(0, 1023)), min_size=1, max_size=30))
    def test_morton_round_trip(self, cells):
        c = np.array(cells, dtype=np.int64)
        assert np.array_equal(morton_decode(morton_encode(c, 10), 10, 2), c)

    def test_bitmap_round_trip(self):
        occ = DyadicOccupancy.from_unit_points(random_set(1), 7)
        again = DyadicOccupancy.from_bitmap(occ.to_bitmap())
        assert all(np.array_equal(a, b) for a, b in zip(occ.levels, again.levels))


class TestMeanScan:
    def test_segment(self):
        occ = build_occupancy(synthetic_set("segment", 12), 12)
        res = mean_porosity_scan(occ, synthetic_set("segment", 5)[::3], 0.125, 8)
        assert np.all(res.densities == 1.0) and res.p1_hat == 1.0

    def test_square(self):
        occ = build_occupancy(synthetic_set("square", 8), 8)
        res = mean_porosity_scan(occ, np.array([[0.5, 0.5], [0.1, 0.9]]), 0.125, 5)
        assert np.all(res.densities == 0) and math.isinf(res.p1_hat)

    def test_cantor(self):
        occ = build_occupancy(synthetic_set("cantor", 15, cantor_level=9), 15)
        pts = synthetic_set("cantor", 15, cantor_level=4)
        res = mean_porosity_scan(occ, pts, 1 / 16, 10)
        assert np.all(res.densities == 1.0)

    def test_depth_precondition(self):
        occ = build_occupancy(synthetic_set("segment", 8), 8)
        with pytest.raises(ValueError):
            mean_porosity_scan(occ, np.array([[0.5, 0.0]]), 0.125, 7)

    def test_deterministic(self):
        occ = build_occupancy(random_set(2), 10)
        a = mean_porosity_scan(occ, random_set(3, 20), 0.125, 7)
        b = mean_porosity_scan(occ, random_set(3, 20), 0.125, 7)
        assert repr(a) == repr(b)


class TestBoxScan:
    def test_segment(self):
        occ = build_occupancy(synthetic_set("segment", 12), 12)
        res = box_porosity_detect(occ, synthetic_set("segment", 4), 1, 11)
        assert res.feasible and res.P_hat == 1.0
        assert all(d == 1.0 for d in res.per_point_densities)

    def test_square_infeasible(self):
        occ = build_occupancy(synthetic_set("square", 7), 7)
        res = box_porosity_detect(occ, np.array([[0.5, 0.5]]), 2, 5)
        assert not res.feasible and res.per_point_densities == [0.0]

    def test_precondition(self):
        occ = build_occupancy(synthetic_set("segment", 6), 6)
        with pytest.raises(ValueError):
            box_porosity_detect(occ, np.array([[0.5, 0.0]]), 2, 5)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 3))
    def test_monotone_in_N(self, seed, N):
        occ = build_occupancy(random_set(seed), 10)
        for z in random_set(seed + 1, 10):
            assert set(box_good_scales(occ, z, N, 6)) <= set(box_good_scales(occ, z, N + 1, 6))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 3))
    def test_box_implies_mean(self, seed, N):
        occ = build_occupancy(random_set(seed), 11)
        z = random_set(seed + 7, 8)
        n_max = occ.depth - N - 2
        box = box_porosity_detect(occ, z, N, n_max)
        mean = mean_porosity_scan(occ, z, 2.0 ** (-N - 2), n_max)
        for i in range(len(z)):
            assert set(box.good_scales[i]) <= set(mean.good_scales(i))
        if box.feasible:
            assert np.all(mean.densities >= 1 / box.P_hat - 1e-12)

    def test_chebyshev_box_porous(self, chebyshev_occ, chebyshev_sample):
        pts = chebyshev_sample.points[::2000]
        res = box_porosity_detect(chebyshev_occ, pts, 1, 11)
        assert res.feasible and res.P_hat == 1.0


class TestDirectional:
    def test_segment(self):
        occ = build_occupancy(synthetic_set("segment", 12), 12)
        res = directional_scan(occ, synthetic_set("segment", 3), 0.25, 5)
        assert res.beta_hat >= 1 / 32 and all(d == 1.0 for d in res.densities)

    def test_empty_set(self):
        occ = build_occupancy(np.array([[0.999, 0.999]]), 12)
        res = directional_scan(occ, np.array([[0.3, 0.3]]), 0.25, 4)
        assert res.beta_hat == 0.125 and res.densities == [1.0]

    @pytest.mark.parametrize("m", [3, 4])
    def test_parallel_segments_resolve_gap(self, m):
        seg = synthetic_set("segment", 12)
        occ = build_occupancy(np.vstack([seg + [0, 0.5], seg + [0, 0.5 + 2.0 ** -m]]), 12)
        mid = np.array([[0.5, 0.5 + 2.0 ** (-m - 1)]])
        res = directional_scan(occ, mid, 0.25, 6)
        row = res.beta_table[0]
        # once 2^-n is below the gap the whole ball is empty; above it the lines constrain the holes
        assert np.all(row[m:] == 0.125)
        assert np.all(row[:m] < 0.125)
        assert res.good_scales == [[1, 2, 3, 4, 5, 6]]

    def test_directional_implies_mean(self, dendrite_sample):
        from cejulia.julia import occupancy_from_sample
        occ = occupancy_from_sample(dendrite_sample, 12)
        pts = dendrite_sample.points[::20_000]
        res = directional_scan(occ, pts, 0.25, 5)
        mean = mean_porosity_scan(occ, pts, res.beta_hat / 8, 5)
        for i in range(len(pts)):
            assert set(res.good_scales[i]) <= set(mean.good_scales(i))

    def test_bad_alpha(self):
        occ = build_occupancy(synthetic_set("segment", 8), 8)
        with pytest.raises(ValueError):
            directional_scan(occ, np.array([[0.5, 0.0]]), 0.75, 3)
