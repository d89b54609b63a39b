import math

import numpy as np
import pytest

from cejulia.dynamics import backward_orbit, candidate_run, critical_growth, expansion_constant, threshold_N
from cejulia.pullback import (GoodTimeRecord, ShrinkingSchedule, blaschke_distortion_oracle,
                              fit_distortion_constants, good_times, halving_check, hole_pullback,
                              lipschitz_exponent, lipschitz_violations, pull_back_disc, scan_halving,
                              shrinking_radius)
from cejulia.sphere import RationalMap, chordal_dist

SQUARE = RationalMap.polynomial(0, 0, 1)


class TestSchedule:
    def test_start(self):
        assert shrinking_radius(0.05, 0) == pytest.approx(0.1)

    def test_default_limit(self):
        sched = ShrinkingSchedule.default()
        assert sched.partial_product(20_000) == pytest.approx(2 / math.pi, abs=1e-4)
        assert shrinking_radius(1.0, 20_000) == pytest.approx(4 / math.pi, abs=1e-4)

    @pytest.mark.parametrize("sched", [ShrinkingSchedule.default(), ShrinkingSchedule.cubic()])
    def test_radii_decrease_above_delta(self, sched):
        assert sched.check()
        radii = [shrinking_radius(0.3, s, sched) for s in range(500)]
        assert all(b < a for a, b in zip(radii, radii[1:]))
        assert min(radii) > 0.3

    def test_bad_delta(self):
        with pytest.raises(ValueError):
            shrinking_radius(0.0, 1)


class TestFrames:
    def test_square_root_branch(self):
        frames = pull_back_disc(SQUARE, [1.0, 1.0], 0.05, n=1)
        last = frames[1]
        assert last.status == "ok" and last.cumulative_criticality == 0 and not last.crit_inside
        assert abs(np.mean(last.boundary) - 1.0) < 0.05

    def test_disc_at_critical_point(self):
        frames = pull_back_disc(SQUARE, [0.0] * 6, 0.05)
        assert [fr.cumulative_criticality for fr in frames] == list(range(6))
        assert all(fr.status == "ok" for fr in frames)

    def test_radii_reproduce_schedule(self, chebyshev, rng):
        orbit = backward_orbit(chebyshev, 30, rng)
        for sched in (ShrinkingSchedule.default(), ShrinkingSchedule.cubic()):
            frames = pull_back_disc(chebyshev, orbit, 0.05, sched)
            assert [fr.radius_Bs for fr in frames] == [shrinking_radius(0.05, s, sched) for s in range(31)]

    def test_boundary_maps_onto_circle(self, dendrite, rng):
        orbit = backward_orbit(dendrite, 25, rng)
        frames = pull_back_disc(dendrite, orbit, 0.05)
        y = orbit[-1]
        for fr in frames[1:]:
            assert fr.status == "ok"
            for v in fr.boundary[::7]:
                w = complex(v)
                for _ in range(fr.s):
                    w = dendrite.eval(w)
                assert abs(chordal_dist(w, y) - fr.radius_Bs) <= 1e-6 * fr.radius_Bs

    def test_diameter_is_polygon_diameter(self, chebyshev, rng):
        orbit = backward_orbit(chebyshev, 5, rng)
        for fr in pull_back_disc(chebyshev, orbit, 0.05)[1:]:
            b = fr.boundary
            brute = max(chordal_dist(a, c) for a in b for c in b)
            assert fr.diam_Ws == pytest.approx(brute, rel=1e-9)


class TestGoodTimes:
    def test_chebyshev_density(self, chebyshev, rng):
        orbit = backward_orbit(chebyshev, 400, rng)
        rec = good_times(chebyshev, None, 0.05, 4, 400, orbit=orbit)
        assert rec.density() >= 0.95
        assert not rec.unresolved

    def test_zero_is_good(self, chebyshev):
        rec = good_times(chebyshev, 0.3, 0.05, 0, 10)
        assert 0 in rec.good_times and rec.criticality_at_n[0] == 0

    def test_dendrite_density(self, dendrite, dendrite_crit, rng):
        lam = critical_growth(dendrite, dendrite_crit, 200)
        orbits = [backward_orbit(dendrite, 300, rng) for _ in range(5)]
        C_f = max(candidate_run(dendrite, o, dendrite_crit, lam).C_f for o in orbits)
        N_f = threshold_N(len(dendrite_crit.in_julia), C_f, expansion_constant(lam, dendrite_crit.nu))
        for o in orbits:
            rec = good_times(dendrite, None, 0.05, dendrite_crit.nu * N_f, 300, orbit=o, track_diam=False)
            assert rec.density() >= 0.5

    def test_monotone_in_D(self, dendrite, rng):
        orbit = backward_orbit(dendrite, 200, rng)
        rec = good_times(dendrite, None, 0.2, 6, 200, orbit=orbit, track_diam=False)
        for D in range(6):
            assert set(rec.with_D(D).good_times) <= set(rec.with_D(D + 1).good_times)
        direct = good_times(dendrite, None, 0.2, 2, 200, orbit=orbit, track_diam=False)
        assert direct.good_times == rec.with_D(2).good_times

    def test_critical_orbit_is_critical(self):
        rec = good_times(SQUARE, 0.0, 0.05, 0, 5, track_diam=False, stop_above=10)
        assert rec.criticality_at_n == [0, 1, 2, 3, 4, 5]
        capped = good_times(SQUARE, 0.0, 0.05, 0, 5, track_diam=False)
        assert capped.good_times == [0]
        assert all(c >= 1 for c in capped.criticality_at_n[1:])


def _toy_record(diams):
    n = len(diams) - 1
    return GoodTimeRecord(0j, 0.1, 1, list(range(n + 1)), [0] * (n + 1), list(diams))


class TestHalving:
    def test_geometric_toy(self):
        rec = _toy_record([4.0 ** -j for j in range(8)])
        res = halving_check(rec, 1)
        assert res.ok and all(r == pytest.approx(0.25) for _, r in res.ratios)

    def test_violation_flagged(self):
        rec = _toy_record([1.0, 0.6, 0.1])
        res = halving_check(rec, 1)
        assert [j for j, _ in res.violations] == [0]
        assert halving_check(rec, 2).ok

    def test_too_few_times(self):
        res = halving_check(_toy_record([1.0]), 1)
        assert res.ratios == [] and res.notice

    def test_chebyshev_scan_and_lipschitz(self, chebyshev, rng):
        orbit = backward_orbit(chebyshev, 300, rng)
        rec = good_times(chebyshev, None, 0.1, 8, 300, orbit=orbit)
        res = scan_halving(rec, 20)
        assert res is not None and res.ok
        assert lipschitz_violations(rec, lipschitz_exponent(chebyshev, 0.1)) == []


@pytest.fixture(scope="module")
def record(chebyshev):
    orbit = backward_orbit(chebyshev, 300, np.random.default_rng(5))
    return good_times(chebyshev, None, 0.1, 8, 300, orbit=orbit)


class TestHoles:
    def test_time_zero_returns_hole(self, chebyshev, record, chebyshev_occ):
        (w,) = hole_pullback(chebyshev, record, chebyshev_occ, 0.05, times=[0])
        assert w.time == 0 and w.ok
        assert w.dist_to_x <= 0.05 + 1e-9

    def test_chebyshev_witnesses(self, chebyshev, record, chebyshev_occ):
        ws = hole_pullback(chebyshev, record, chebyshev_occ, 0.05)
        assert len(ws) >= 3 and all(w.ok for w in ws)
        assert min(w.ratio for w in ws) > 0.01
        for w in ws:
            assert w.dist_to_x <= w.diam_W * 1.01

    def test_no_hole_raises(self, chebyshev, record):
        from cejulia.porosity import DyadicOccupancy
        full = DyadicOccupancy.from_unit_points(
            np.column_stack([g.ravel() for g in np.meshgrid((np.arange(64) + .5) / 64,
                                                            (np.arange(64) + .5) / 64)]), 6)
        from cejulia.porosity import PlaneNormalization
        full.normalization = PlaneNormalization(-3 - 3j, 6.0)
        with pytest.raises(LookupError):
            hole_pullback(chebyshev, record, full, 0.05, times=[1])


class TestBlaschke:
    def test_one_factor_closed_form(self):
        rep = blaschke_distortion_oracle(1, (0.5, 0.9), 3)
        assert rep.total_violations == 0
        # h(u) = u: rho(u, 0) < log((1 + t) / (1 - t)) <= log 2 + log(1 / (1 - t))
        for t in (0.5, 0.9):
            assert rep.max_excess[t] <= math.log((1 + t) / (1 - t)) - math.log(2 / (1 - t)) + 1e-12

    def test_small_factor_exists(self):
        rep = blaschke_distortion_oracle(5, (0.5, 0.75), 200, np.random.default_rng(2))
        assert all(v == 0 for v in rep.factor_violations.values())

    def test_zero_violations(self):
        rep = blaschke_distortion_oracle(5, 0.5, 300, np.random.default_rng(3))
        assert rep.total_violations == 0 and rep.witnesses == []
        assert rep.C1_prime > 0

    def test_corrupted_bound_reports_witnesses(self):
        rep = blaschke_distortion_oracle(5, 0.5, 50, np.random.default_rng(3), bound_scale=0.5)
        assert rep.total_violations > 0 and rep.witnesses
        w = rep.witnesses[0]
        assert w["rho"] > w["bound"]


def test_distortion_constants(chebyshev, rng):
    orbit = backward_orbit(chebyshev, 200, rng)
    rec = good_times(chebyshev, None, 0.1, 8, 200, orbit=orbit)
    c = fit_distortion_constants(chebyshev, rec)
    assert min(c.C1, c.C3, c.C4, c.epsilon, c.C_of_D, c.L) > 0
    taus = sorted(c.C3_profile)
    assert c.C3_profile[taus[0]] <= c.C3_profile[taus[-1]]
    assert c.C_of_D == pytest.approx(math.log(16))
