"""Forward orbits, Collet-Eckmann estimates and the shadow counting argument."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .sphere import CriticalSet, RationalMap, chordal_dist, poly_roots


class CollisionError(ValueError):
    """The critical orbit meets another critical point."""

    def __init__(self, time: int, point: complex):
        super().__init__(f"critical orbit meets the critical point {point} at time {time}")
        self.time = time
        self.point = point


@dataclass
class OrbitRecord:
    base: complex
    points: list
    log_deriv_prefix: list
    hit_critical: bool = False


def forward_orbit(f: RationalMap, x: complex, n: int) -> OrbitRecord:
    """Iterate ``x`` n times, accumulating the log spherical derivative.

    ``log_deriv_prefix[k]`` is the log of |(f^k)'(x)| in the chordal metric,
    so it has n + 1 entries when n > 0 and is empty for n = 0.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    pts = [complex(x)]
    logs: list[float] = []
    if n > 0:
        logs.append(0.0)
    hit = False
    acc = 0.0
    for k in range(n):
        z = pts[-1]
        sd = f.spherical_deriv(z)
        if sd == 0.0:
            hit = True
            acc = -math.inf
        elif not hit:
            acc += math.log(sd)
        pts.append(f.eval(z))
        logs.append(acc)
    return OrbitRecord(base=complex(x), points=pts, log_deriv_prefix=logs, hit_critical=hit)


def repelling_fixed_point(f: RationalMap) -> complex:
    """A finite fixed point with spherical multiplier > 1 (it lies in J)."""
    p, q = f.padded()
    roots = poly_roots(p - np.concatenate([[0.0], q[:-1]]))
    best, best_mult = None, 1.0
    for r in roots:
        m = f.spherical_deriv(complex(r))
        if m > best_mult:
            best, best_mult = complex(r), m
    if best is None:
        raise ValueError("no repelling finite fixed point")
    return best


def backward_orbit(f: RationalMap, n: int, rng: np.random.Generator,
                   start: complex | None = None, burn_in: int = 64) -> list[complex]:
    """A length-(n+1) forward orbit in J obtained from a random backward walk.

    The walk starts from a repelling fixed point (or ``start``), discards
    ``burn_in`` steps, then records n more preimages.  Reversed, the walk is a
    forward orbit x, f(x), ..., f^n(x) whose points stay on J to rounding
    accuracy, which forward iteration cannot guarantee on unstable sets.
    """
    from . import _kernels
    w = repelling_fixed_point(f) if start is None else complex(start)
    p, q = f.padded()
    steps = burn_in + n
    if steps == 0:
        return [w]
    choices = rng.random((steps, 1))
    walk = _kernels.backward_walks(p, q, f.degree, np.array([w]), choices, max(burn_in - 1, 0)).tolist()
    if burn_in == 0:
        walk.insert(0, w)
    return walk[::-1]


@dataclass
class CEEstimate:
    lambda_hat: float
    log_C_hat: float
    n_used: int
    per_n_log_deriv: list = field(repr=False)

    @property
    def is_ce(self) -> bool:
        return self.lambda_hat > 1.0


def _lower_hull(xs: np.ndarray, ys: np.ndarray) -> list[int]:
    hull: list[int] = []
    for i in range(len(xs)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (xs[b] - xs[a]) * (ys[i] - ys[a]) - (ys[b] - ys[a]) * (xs[i] - xs[a])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


def ce_estimate(f: RationalMap, c: complex, n_max: int, crit: CriticalSet | None = None,
                collision_tol: float = 1e-9) -> CEEstimate:
    """Fit the exponential growth rate of the derivative along the critical orbit.

    The rate is the slope of the longest edge (in k) of the lower convex hull of
    k -> log|(f^k)'(f(c))| over the tail window [n_max/4, n_max]; a periodic
    tail makes every long edge have the cycle's mean slope.  The intercept is
    the largest one keeping the line below every sample.
    """
    if n_max < 1:
        raise ValueError("n_max must be positive")
    if crit is None:
        from .sphere import critical_points
        others = [z for z, _ in critical_points(f) if chordal_dist(z, c) > collision_tol]
        own = next((z for z, _ in critical_points(f) if chordal_dist(z, c) <= collision_tol), None)
        if own is None:
            raise ValueError(f"{c} is not a critical point")
    else:
        others = [cp.point for cp in crit.points if chordal_dist(cp.point, c) > collision_tol]
    logs = [0.0]
    z = f.eval(c)
    acc = 0.0
    for k in range(n_max):
        if chordal_dist(z, c) <= collision_tol:
            if k == 0:
                raise CollisionError(0, c)
            # returned to c: the derivative vanishes from now on
            logs.extend([-math.inf] * (n_max - k))
            break
        for o in others:
            if chordal_dist(z, o) <= collision_tol:
                raise CollisionError(k, o)
        acc += math.log(f.spherical_deriv(z))
        logs.append(acc)
        z = f.eval(z)
    a = np.array(logs)
    if not np.all(np.isfinite(a)):
        return CEEstimate(0.0, -math.inf, n_max, logs)
    lo = n_max // 4
    ks = np.arange(lo, n_max + 1, dtype=float)
    hull = _lower_hull(ks, a[lo:])
    if len(hull) < 2:
        slope = 0.0
    else:
        ext = [ks[j] - ks[i] for i, j in zip(hull, hull[1:])]
        e = int(np.argmax(ext))
        i, j = hull[e], hull[e + 1]
        slope = (a[lo + j] - a[lo + i]) / (ks[j] - ks[i])
    log_C = float(np.min(a - slope * np.arange(n_max + 1)))
    return CEEstimate(math.exp(slope), log_C, n_max, logs)


def phi_series(f: RationalMap, x: complex, n: int, crit: CriticalSet,
               orbit: list | None = None) -> np.ndarray:
    """-log of the chordal distance from f^j(x) to the critical points in J, j = 0..n.

    Values are clamped below at 0; an exact hit gives +inf.
    """
    targets = [cp.point for cp in crit.in_julia]
    if not targets:
        raise ValueError("no critical point in the Julia set")
    pts = orbit if orbit is not None else forward_orbit(f, x, n).points
    if len(pts) < n + 1:
        raise ValueError("orbit too short")
    out = np.empty(n + 1)
    for j in range(n + 1):
        d = min(chordal_dist(pts[j], c) for c in targets)
        out[j] = math.inf if d == 0.0 else max(0.0, -math.log(d))
    return out


def dpu_cf(phi, exclude: int, safety: float = 1.1) -> float:
    """Largest running average of phi with the ``exclude`` largest terms dropped, times ``safety``.

    The average over the first n entries is taken for every n = 1..len(phi).
    """
    vals = list(phi)
    if sum(1 for v in vals if math.isinf(v)) > exclude:
        raise ValueError("more infinite entries than excluded indices")
    kept = 0.0
    dropped: list[float] = []  # min-heap of the largest entries
    best = 0.0
    for n, v in enumerate(vals, start=1):
        if exclude > 0:
            if len(dropped) < exclude:
                heapq.heappush(dropped, v)
            elif v > dropped[0]:
                kept += heapq.heapreplace(dropped, v)
            else:
                kept += v
        else:
            kept += v
        best = max(best, kept / n)
    return safety * best


@dataclass
class ShadowCover:
    phi: np.ndarray = field(repr=False)
    K_f: float
    C_f: float
    N_f: int
    shadow_count: np.ndarray = field(repr=False)
    A_flags: np.ndarray = field(repr=False)


def threshold_N(crit_count: int, C_f: float, K_f: float) -> int:
    return int(math.ceil(2.0 * (crit_count + C_f * K_f) - 1e-12))


def expansion_constant(lambda_hat: float, nu: int) -> float:
    """Shadow length per unit of phi: 2 nu / log(lambda)."""
    if lambda_hat <= 1.0:
        raise ValueError("growth rate must exceed 1")
    return 2.0 * nu / math.log(lambda_hat)


def shadow_cover(phi, K_f: float, C_f: float, crit_count: int) -> ShadowCover:
    """Count, for each index j, the shadows (n, n + phi(n) K_f] containing j."""
    if K_f <= 0:
        raise ValueError("K_f must be positive")
    phi = np.asarray(phi, dtype=float)
    m = len(phi)
    diff = np.zeros(m + 1, dtype=np.int64)
    for n in range(m):
        v = phi[n]
        if v <= 0.0:
            continue
        last = m - 1 if math.isinf(v) else min(m - 1, n + int(math.floor(v * K_f)))
        if last > n:
            diff[n + 1] += 1
            diff[last + 1] -= 1
    count = np.cumsum(diff)[:m]
    N = threshold_N(crit_count, C_f, K_f)
    return ShadowCover(phi, K_f, C_f, N, count, count <= N)


def shadow_density(cover: ShadowCover, n: int) -> float:
    """Fraction of indices 1..n that belong to A."""
    if n < 1 or n > len(cover.A_flags) - 1:
        raise ValueError("n must lie in [1, len(A_flags) - 1]")
    return float(np.count_nonzero(cover.A_flags[1:n + 1])) / n


def critical_growth(f: RationalMap, crit: CriticalSet, n_max: int = 200) -> float:
    """Smallest fitted growth rate over the critical points in J."""
    rates = [ce_estimate(f, cp.point, n_max, crit).lambda_hat for cp in crit.in_julia]
    if not rates:
        raise ValueError("no critical point in the Julia set")
    return min(rates)


@dataclass
class CandidateRun:
    """Shadow analysis of one orbit."""
    phi: np.ndarray = field(repr=False)
    C_f: float
    cover: ShadowCover

    def density(self, n: int) -> float:
        return shadow_density(self.cover, n)


def candidate_run(f: RationalMap, orbit: list, crit: CriticalSet, lambda_hat: float,
                  C_f: float | None = None) -> CandidateRun:
    n = len(orbit) - 1
    phi = phi_series(f, orbit[0], n, crit, orbit=orbit)
    ncrit = len(crit.in_julia)
    cf = dpu_cf(phi, ncrit) if C_f is None else C_f
    K = expansion_constant(lambda_hat, crit.nu)
    return CandidateRun(phi, cf, shadow_cover(phi, K, cf, ncrit))


__all__ = [
    "CollisionError", "OrbitRecord", "forward_orbit", "repelling_fixed_point",
    "backward_orbit", "CEEstimate", "ce_estimate", "phi_series", "dpu_cf", "ShadowCover",
    "threshold_N", "expansion_constant", "shadow_cover", "shadow_density", "critical_growth",
    "CandidateRun", "candidate_run",
]
