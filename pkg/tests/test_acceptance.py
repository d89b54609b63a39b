"""Acceptance criteria 1-13, each reported as one PASS/FAIL line."""

import math
import time

import numpy as np
import pytest

from cejulia.cli import run, tree_oracle
from cejulia.dimension import minkowski_fit, porosity_bound
from cejulia.dynamics import (backward_orbit, candidate_run, ce_estimate, critical_growth,
                              expansion_constant, threshold_N)
from cejulia.julia import holder_diagnostic, julia_points, occupancy_from_sample
from cejulia.porosity import box_porosity_detect, build_occupancy, mean_porosity_scan, synthetic_set
from cejulia.pullback import (blaschke_distortion_oracle, good_times, hole_pullback, lipschitz_exponent,
                              lipschitz_violations, scan_halving)
from cejulia.sphere import RationalMap, critical_set

MAPS = {"z^2-2": "-2,0,1", "z^2+i": "1j,0,1"}
ORBIT_LENGTH = 2000
ORBIT_COUNT = 100


@pytest.fixture(scope="module", autouse=True)
def warm_up():
    """Compile the numba kernels so timed sections measure the computation only."""
    f = RationalMap.parse("-2,0,1")
    crit = critical_set(f, julia_points(f, count=1000, seed=0).points)
    ce_estimate(f, 0j, 40, crit)
    good_times(f, None, 0.1, 2, 5, orbit=backward_orbit(f, 5, np.random.default_rng(0)))


@pytest.fixture(scope="module")
def shadow_runs():
    """Per map: 100 backward orbits of length 2000 and the shared shadow constants."""
    out = {}
    for name, spec in MAPS.items():
        f = RationalMap.parse(spec)
        t0 = time.perf_counter()
        crit = critical_set(f, julia_points(f, count=200_000, seed=1).points)
        lam = critical_growth(f, crit, 200)
        rng = np.random.default_rng(2024)
        orbits = [backward_orbit(f, ORBIT_LENGTH, rng) for _ in range(ORBIT_COUNT)]
        C_f = max(candidate_run(f, o, crit, lam).C_f for o in orbits)
        N_f = threshold_N(len(crit.in_julia), C_f, expansion_constant(lam, crit.nu))
        dens = [candidate_run(f, o, crit, lam, C_f=C_f).density(ORBIT_LENGTH) for o in orbits]
        out[name] = dict(f=f, crit=crit, lam=lam, orbits=orbits, C_f=C_f, N_f=N_f, shadow=dens,
                         seconds=time.perf_counter() - t0)
    return out


def _ce_row(rep):
    return next(r for r in rep.rows if r[2])


def test_criterion_01_ce_closed_form(tmp_path, verdict):
    t0 = time.perf_counter()
    code, rep = run(["ce", "--map=-2,0,1", "--nmax", "40", "--out", str(tmp_path)])
    dt = time.perf_counter() - t0
    row = _ce_row(rep)
    ok = code == 0 and abs(row[3] - 4) <= 1e-6 and abs(row[4]) <= 1e-6 and dt < 1
    verdict(1, ok, f"lambda_hat={row[3]!r} log_C_hat={row[4]!r} runtime={dt:.2f}s")


def test_criterion_02_ce_preperiodic(tmp_path, verdict):
    t0 = time.perf_counter()
    code, rep = run(["ce", "--map", "1j,0,1", "--nmax", "60", "--out", str(tmp_path)])
    dt = time.perf_counter() - t0
    row = _ce_row(rep)
    ok = code == 0 and abs(row[3] - 2 ** 1.25) <= 1e-3 and dt < 1
    verdict(2, ok, f"lambda_hat={row[3]:.6f} target={2 ** 1.25:.6f} runtime={dt:.2f}s")


def test_criterion_03_negative_control(tmp_path, verdict):
    code, rep = run(["ce", "--map=-1,0,1", "--nmax", "60", "--out", str(tmp_path)])
    finite = [r for r in rep.rows if r[-1] != "COLLISION"]
    ok = bool(finite) and all(r[3] <= 1 and r[-1] == "NOT-CE" for r in finite)
    verdict(3, ok, "lambda_hat=" + ", ".join(f"{r[3]:.4g} ({r[-1]})" for r in finite))


def test_criterion_04_shadow_density(shadow_runs, verdict):
    parts, ok, total = [], True, 0.0
    for name, r in shadow_runs.items():
        passing = sum(d >= 0.5 for d in r["shadow"])
        ok &= passing >= 95
        total += r["seconds"]
        parts.append(f"{name}: {passing}/100 (min {min(r['shadow']):.3f}, C_f={r['C_f']:.3g}, N_f={r['N_f']})")
    ok &= total < 30
    verdict(4, ok, "; ".join(parts) + f"; runtime={total:.1f}s")


def test_criterion_05_good_time_density(shadow_runs, verdict):
    t0 = time.perf_counter()
    parts, ok = [], True
    for name, r in shadow_runs.items():
        f, D = r["f"], r["crit"].nu * r["N_f"]
        passing, used = 0, {}
        for orbit in r["orbits"]:
            for delta in (0.1, 0.05, 0.02):
                rec = good_times(f, None, delta, D, ORBIT_LENGTH, orbit=orbit, track_diam=False)
                if rec.density() >= 0.5:
                    passing += 1
                    used[delta] = used.get(delta, 0) + 1
                    break
        ok &= passing >= 90
        parts.append(f"{name}: D={D} {passing}/100 with density >= 0.5 (delta used {used})")
    dt = time.perf_counter() - t0
    ok &= dt < 300
    verdict(5, ok, "; ".join(parts) + f"; finite n={ORBIT_LENGTH}; runtime={dt:.1f}s")


def test_criterion_06_diameter_halving(verdict):
    f = RationalMap.parse("-2,0,1")
    rng = np.random.default_rng(6)
    L = lipschitz_exponent(f, 0.1)
    Ns, worst, floor_bad, unscanned = [], 0.0, 0, 0
    for _ in range(10):
        rec = good_times(f, None, 0.1, 8, 300, orbit=backward_orbit(f, 300, rng))
        res = scan_halving(rec, 20)
        if res is None:
            unscanned += 1
            continue
        Ns.append(res.N)
        worst = max(worst, max(r for _, r in res.ratios))
        floor_bad += len(lipschitz_violations(rec, L))
    ok = unscanned == 0 and worst < 0.5 and floor_bad == 0
    verdict(6, ok, f"N per run={Ns} max ratio={worst:.3f} L={L:.3f} floor violations={floor_bad}")


def test_criterion_07_blaschke_oracle(verdict):
    t0 = time.perf_counter()
    rep = blaschke_distortion_oracle(5, (0.5, 0.9, 0.99), 10_000, np.random.default_rng(7), 1e-2)
    dt = time.perf_counter() - t0
    ok = rep.total_violations == 0 and dt < 120
    excess = ", ".join(f"t={t}: {rep.max_excess[t]:.4f}" for t in rep.ts)
    verdict(7, ok, f"violations={rep.total_violations} max excess {excess} runtime={dt:.1f}s")


def test_criterion_08_box_counting(verdict):
    t0 = time.perf_counter()
    cases = [("segment", 1.0, 0.05), ("square", 2.0, 0.05),
             ("cantor_dust", 2 * math.log(2) / math.log(3), 0.06), ("cantor", math.log(2) / math.log(3), 0.05)]
    parts, ok = [], True
    for name, target, tol in cases:
        occ = build_occupancy(synthetic_set(name, 12, cantor_level=10), 12)
        slope = minkowski_fit(occ, 4, 12).slope
        ok &= abs(slope - target) <= tol
        parts.append(f"{name} {slope:.4f} (target {target:.4f})")
    dt = time.perf_counter() - t0
    ok &= dt < 30
    verdict(8, ok, "; ".join(parts) + f"; runtime={dt:.1f}s")


def test_criterion_09_bound_formula(verdict):
    a1 = porosity_bound(2, 1, 1)[0]
    a2 = porosity_bound(2, 1, 2)[0]
    grid = all(porosity_bound(d, N, P)[0] < 1 for d in range(1, 4) for N in range(1, 9) for P in range(1, 9))
    ok = abs(a1 - math.log(3) / math.log(4)) <= 1e-9 and abs(a2 - 0.896241) <= 1e-5 and grid
    verdict(9, ok, f"alpha(2,1,1)={a1:.12f} alpha(2,1,2)={a2:.7f} grid strict={grid}")


def test_criterion_10_tree_oracle(verdict):
    t0 = time.perf_counter()
    p1 = tree_oracle(1.0, n_dp=8, n_enum=8)
    p2 = tree_oracle(2.0, n_dp=8, n_enum=8)
    dt = time.perf_counter() - t0
    ok = (all(c == 1 for c in p1["dp"].values()) and not p1["over"] and not p2["over"]
          and not p1["mismatch"] and not p2["mismatch"] and not p2["rams_violations"] and dt < 60)
    ok &= p2["enumerated_max"] == {n: p2["dp"][n] for n in range(1, 9)}
    verdict(10, ok, f"P=1 max counts {list(p1['dp'].values())}; P=2 {list(p2['dp'].values())} "
                    f"C={p2['C']:.4g}; enumerated trees {p1['trees_checked']}+{p2['trees_checked']}; "
                    f"runtime={dt:.1f}s")


def test_criterion_11_end_to_end_porosity(verdict):
    t0 = time.perf_counter()
    parts, ok = [], True
    for name, spec in MAPS.items():
        f = RationalMap.parse(spec)
        sample = julia_points(f, count=400_000, seed=1)
        occ = occupancy_from_sample(sample, 12)
        pts = sample.points[np.random.default_rng(11).choice(len(sample), 100, replace=False)]
        best = None
        for N in range(1, 5):
            det = box_porosity_detect(occ, pts, N, 12 - N)
            if det.feasible:
                bound = porosity_bound(2, N, det.P_hat)[1]
                if best is None or bound < best[2]:
                    best = (N, det.P_hat, bound)
        slope = minkowski_fit(occ, 4, 12).slope
        rng = np.random.default_rng(12)
        ratios, failed = [], 0
        for _ in range(3):
            rec = good_times(f, None, 0.1, 8, 300, orbit=backward_orbit(f, 300, rng))
            for w in hole_pullback(f, rec, occ, 0.05):
                if w.ok:
                    ratios.append(w.ratio)
                else:
                    failed += 1
        c = min(ratios) if ratios else 0.0
        ok &= best is not None and failed == 0 and c > 0 and slope <= best[2] + 0.1 and slope < 1.9
        if best is None:
            parts.append(f"{name}: box porosity infeasible")
        else:
            parts.append(f"{name}: N={best[0]} P={best[1]:.3g} bound={best[2]:.4f} slope={slope:.4f} "
                         f"witnesses={len(ratios)} failed={failed} min radius/2^-n={c:.4f}")
    dt = time.perf_counter() - t0
    ok &= dt < 600
    verdict(11, ok, "; ".join(parts) + f"; runtime={dt:.1f}s")


def test_criterion_12_holder(verdict):
    f = RationalMap.parse("-2,0,1")
    occ = occupancy_from_sample(julia_points(f, count=200_000, seed=1), 12)
    a = holder_diagnostic(f, occ, 1000, seed=0)
    b = holder_diagnostic(f, occ, 1000, seed=1)
    ok = (a.used >= 500 and 0 < a.xi_hat < 1 and a.violation_fraction <= 0.01
          and abs(a.xi_hat - b.xi_hat) <= 0.05)
    verdict(12, ok, f"samples={a.used} xi_hat={a.xi_hat:.4f} violations={a.violation_fraction:.4f} "
                    f"xi_hat(seed 1)={b.xi_hat:.4f}")


def test_criterion_13_scanner_consistency(verdict):
    grids = {name: (build_occupancy(synthetic_set(name, 12, cantor_level=10), 12), None)
             for name in ("segment", "square", "cantor", "cantor_dust")}
    for name, spec in MAPS.items():
        sample = julia_points(RationalMap.parse(spec), count=400_000, seed=1)
        grids[name] = (occupancy_from_sample(sample, 12), sample.points)
    rng = np.random.default_rng(13)
    checks, exceptions = 0, []
    for gname, (occ, plane_pts) in grids.items():
        if plane_pts is None:
            centers = occ.cell_centers()
            pts = centers[rng.choice(len(centers), 30, replace=False)]
        else:
            pts = plane_pts[rng.choice(len(plane_pts), 30, replace=False)]
        for N in (1, 2, 3):
            n_max = occ.depth - N - 1
            box = box_porosity_detect(occ, pts, N, n_max)
            mean = mean_porosity_scan(occ, pts, 2.0 ** (-N - 2), n_max)
            for i in range(len(pts)):
                checks += 1
                if not set(box.good_scales[i]) <= set(mean.good_scales(i)):
                    exceptions.append((gname, N, i, "scales"))
                if box.feasible and mean.per_point[i][2] < 1 / box.P_hat - 1e-12:
                    exceptions.append((gname, N, i, "density"))
    verdict(13, not exceptions, f"{checks} point/N checks over {len(grids)} grids; exceptions={exceptions[:5]}")
