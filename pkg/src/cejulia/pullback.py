"""Backward iteration of discs along orbits: components, criticality, good times.

Components of f^{-s}(B) are traced by branch continuation of a boundary
polygon (see :mod:`cejulia._kernels`).  Long chains switch to a disc-tracking
mode once the component is tiny compared with its distance to the critical
values, which keeps n = 2000 pullbacks cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from . import _kernels as K
from .dynamics import OrbitRecord
from .sphere import (
    RationalMap,
    chordal_disc,
    chordal_dist,
    chordal_scale,
    critical_points,
    is_inf,
)

REFINE_DEPTH = 40
VERTEX_CAP = 4096
AMBIGUITY = 0.25
SWITCH_RATIO = 1e-3


class UnresolvedError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# schedules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ShrinkingSchedule:
    b: Callable[[int], float]
    product_floor: float
    name: str = "custom"

    @classmethod
    def default(cls) -> "ShrinkingSchedule":
        # prod (1 - 1/(4 j^2)) = 2/pi
        return cls(lambda j: 1.0 / (4.0 * j * j), 2.0 / math.pi, "quadratic")

    @classmethod
    def cubic(cls) -> "ShrinkingSchedule":
        sched = cls(lambda j: 1.0 / (2.0 * (j + 1) ** 3), 0.0, "cubic")
        return cls(sched.b, sched.partial_product(10**5) * (1 - 1e-9), "cubic")

    def partial_product(self, s: int) -> float:
        j = np.arange(1, s + 1, dtype=float)
        if s == 0:
            return 1.0
        return float(np.exp(np.sum(np.log1p(-np.array([self.b(int(k)) for k in j])))))

    def check(self, upto: int = 10**4) -> bool:
        """Partial products stay above the floor, the floor exceeds 1/2, b is nonincreasing."""
        bs = np.array([self.b(j) for j in range(1, upto + 1)])
        prods = np.exp(np.cumsum(np.log1p(-bs)))
        return bool(self.product_floor > 0.5 and np.all(np.diff(bs) <= 0)
                    and np.all((bs > 0) & (bs < 1)) and prods[-1] >= self.product_floor - 1e-12)


def shrinking_radius(delta: float, s: int, sched: ShrinkingSchedule | None = None) -> float:
    if delta <= 0:
        raise ValueError("delta must be positive")
    sched = sched or ShrinkingSchedule.default()
    return 2.0 * delta * sched.partial_product(s)


# ---------------------------------------------------------------------------
# map data in kernel form
# ---------------------------------------------------------------------------

def _taylor_leading(f: RationalMap, c: complex, q: int) -> float:
    """|a_q| in f(c + h) = f(c) + a_q h^q + ..."""
    shift = np.array([c, 1.0], dtype=complex)
    P = np.zeros(1, dtype=complex)
    Q = np.zeros(1, dtype=complex)
    for k, a in enumerate(f.P):
        P = npoly.polyadd(P, a * npoly.polypow(shift, k))
    for k, b in enumerate(f.Q):
        Q = npoly.polyadd(Q, b * npoly.polypow(shift, k))
    P = np.pad(P, (0, q + 2))
    Q = np.pad(Q, (0, q + 2))
    # power series division P / Q up to order q
    s = np.zeros(q + 1, dtype=complex)
    for k in range(q + 1):
        acc = P[k] - sum(s[i] * Q[k - i] for i in range(k))
        s[k] = acc / Q[0]
    return float(abs(s[q]))


@dataclass(frozen=True)
class MapKernel:
    """Arrays handed to the compiled pullback routines."""
    f: RationalMap
    p: np.ndarray
    q: np.ndarray
    crit: np.ndarray
    mult: np.ndarray
    cvals: np.ndarray
    aq: np.ndarray
    qdeg: np.ndarray

    @classmethod
    def build(cls, f: RationalMap) -> "MapKernel":
        p, q = f.padded()
        pts = [(c, k) for c, k in critical_points(f) if not is_inf(c)]
        crit = np.array([c for c, _ in pts], dtype=complex)
        qdeg = np.array([k for _, k in pts], dtype=np.int64)
        cvals = np.array([f.eval(c) for c, _ in pts], dtype=complex)
        cvals = np.where(np.isfinite(cvals), cvals, K.FAR)
        aq = np.array([_taylor_leading(f, c, k) for c, k in pts], dtype=float)
        return cls(f, p, q, crit, qdeg - 1, cvals, aq, qdeg)


def _kernel_for(f) -> MapKernel:
    return f if isinstance(f, MapKernel) else MapKernel.build(f)


def _orbit_array(orbit) -> np.ndarray:
    pts = orbit.points if isinstance(orbit, OrbitRecord) else orbit
    arr = np.asarray([complex(z) for z in pts], dtype=complex)
    if not np.all(np.isfinite(arr)):
        raise ValueError("orbit must stay finite")
    return arr


# ---------------------------------------------------------------------------
# geometric chains
# ---------------------------------------------------------------------------

@dataclass
class Curve:
    """Spine from a marked point to the loop, plus the closed loop, with base points."""
    spine: np.ndarray
    spine_b: np.ndarray
    loop: np.ndarray
    loop_b: np.ndarray
    bc: complex
    br: float

    @classmethod
    def circle(cls, mark: complex, center: complex, radius: float, m: int) -> "Curve":
        spine, loop = K.circle_curve(mark, mark, center, radius, m)
        return cls(spine, spine.copy(), loop, loop.copy(), center, radius)

    @classmethod
    def disc_with_path(cls, path: Sequence[complex], center: complex, radius: float, m: int) -> "Curve":
        """Loop = circle; spine = polyline ``path`` followed by the loop's first vertex."""
        _, loop = K.circle_curve(center, center, center, radius, m)
        spine = np.array(list(path) + [loop[0]], dtype=complex)
        return cls(spine, spine.copy(), loop, loop.copy(), center, radius)


@dataclass
class ChainStep:
    t: int
    loop: np.ndarray
    mark: complex
    crit_inside: list
    loops: int
    spine: np.ndarray
    spine_b: np.ndarray

    def lift_of(self, base_point: complex) -> complex:
        """Current position of the spine vertex seeded at ``base_point``."""
        idx = np.nonzero(self.spine_b == base_point)[0]
        if idx.size == 0:
            raise KeyError(base_point)
        return complex(self.spine[idx[0]])


@dataclass
class ChainResult:
    status: int
    steps: list
    criticality: int
    degree: int

    @property
    def ok(self) -> bool:
        return self.status == K.OK

    @property
    def final(self) -> ChainStep:
        return self.steps[-1]


def lift_chain(mk: MapKernel, curve: Curve, marks: Sequence[complex], keep: bool = False,
               m_limit: int = VERTEX_CAP // 4) -> ChainResult:
    """Pull ``curve`` back along the marked points.

    ``marks[0]`` is the current position of the spine start, ``marks[t]`` its
    preimage after t steps.  Every step is checked: enclosed critical points
    must match the turning number of the loop and map into the seed disc.
    """
    d = mk.f.degree
    spine, spine_b, loop, loop_b = curve.spine.copy(), curve.spine_b.copy(), curve.loop, curve.loop_b
    spine[0] = marks[0]
    steps: list[ChainStep] = []
    crit_total = 0
    degree = 1
    for t in range(1, len(marks)):
        spine, spine_b, loop, loop_b, loops, status = K.lift_step(
            mk.p, mk.q, d, spine, spine_b, loop, loop_b, complex(marks[t]), t - 1,
            curve.bc, curve.br, AMBIGUITY, REFINE_DEPTH, VERTEX_CAP)
        if status != K.OK:
            return ChainResult(status, steps, crit_total, degree)
        inside = []
        for i in range(mk.crit.size):
            if K.winding(loop, mk.crit[i]) != 0:
                z, _ = K.iterate_with_deriv(mk.p, mk.q, mk.crit[i], t)
                if abs(z - curve.bc) > curve.br * (1 + 1e-6) + 1e-12:
                    return ChainResult(K.CROSSCHECK, steps, crit_total, degree)
                inside.append((complex(mk.crit[i]), int(mk.qdeg[i])))
        if sum(k - 1 for _, k in inside) != loops - 1:
            return ChainResult(K.NOT_CLOSED, steps, crit_total, degree)
        crit_total += loops - 1
        degree *= loops
        spine[0] = marks[t]
        loop, loop_b = K._decimate(loop, loop_b, m_limit)
        if keep or t == len(marks) - 1:
            steps.append(ChainStep(t, loop.copy(), complex(spine[0]), inside, loops,
                                   spine.copy(), spine_b.copy()))
    return ChainResult(K.OK, steps, crit_total, degree)


def polygon_diameter(loop: np.ndarray) -> float:
    return float(K.chordal_diameter(np.ascontiguousarray(loop)))


def polygon_inradius(loop: np.ndarray, z: complex) -> float:
    """Euclidean distance from ``z`` to the polygon (edges included)."""
    a = loop
    b = np.roll(loop, -1)
    ab = b - a
    denom = np.abs(ab) ** 2
    t = np.clip(np.real((z - a) * np.conj(ab)) / np.where(denom > 0, denom, 1.0), 0.0, 1.0)
    return float(np.min(np.abs(a + t * ab - z)))


# ---------------------------------------------------------------------------
# frames
# ---------------------------------------------------------------------------

@dataclass
class PullbackFrame:
    s: int
    radius_Bs: float
    boundary: np.ndarray = field(repr=False)
    center_preimage: complex
    crit_inside: list
    cumulative_criticality: int
    diam_Ws: float
    inradius: float
    status: str = "ok"


def pull_back_disc(f, orbit, delta: float, sched: ShrinkingSchedule | None = None,
                   boundary_samples: int = 64, n: int | None = None) -> list[PullbackFrame]:
    """Frames s = 0..n of the shrinking-neighbourhood construction around f^n(x).

    Frame s is the component of f^{-s}(B_s) containing f^{n-s}(x), with B_s
    the chordal disc of radius 2 delta prod_{j<=s}(1 - b_j) about f^n(x).
    Each frame is traced from scratch, so the cost is quadratic in n.  The
    list stops at the first unresolved frame, which is included and marked.
    """
    mk = _kernel_for(f)
    sched = sched or ShrinkingSchedule.default()
    pts = _orbit_array(orbit)
    n = len(pts) - 1 if n is None else n
    y = pts[n]
    frames = []
    for s in range(n + 1):
        r = shrinking_radius(delta, s, sched)
        ec, er = chordal_disc(y, r)
        curve = Curve.circle(y, ec, er, boundary_samples)
        if s == 0:
            frames.append(PullbackFrame(0, r, curve.loop, complex(y), [], 0,
                                        polygon_diameter(curve.loop),
                                        polygon_inradius(curve.loop, y) * chordal_scale(y)))
            continue
        marks = pts[n - s:n + 1][::-1]
        res = lift_chain(mk, curve, marks)
        if not res.ok:
            frames.append(PullbackFrame(s, r, np.zeros(0, complex), complex(marks[-1]), [], res.criticality,
                                        math.nan, math.nan, K.STATUS_NAMES[res.status]))
            break
        last = res.final
        z = complex(marks[-1])
        frames.append(PullbackFrame(s, r, last.loop, z, last.crit_inside, res.criticality,
                                    polygon_diameter(last.loop),
                                    polygon_inradius(last.loop, z) * chordal_scale(z)))
    return frames


# ---------------------------------------------------------------------------
# good times
# ---------------------------------------------------------------------------

@dataclass
class GoodTimeRecord:
    x: complex
    delta: float
    D: int
    good_times: list
    criticality_at_n: list = field(repr=False)
    diam_Wn: list = field(repr=False)
    unresolved: list = field(default_factory=list)
    orbit: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_max(self) -> int:
        return len(self.criticality_at_n) - 1

    def density(self, n: int | None = None) -> float:
        """Good times in [1, n] over resolved times in [1, n]."""
        n = self.n_max if n is None else n
        crit = np.asarray(self.criticality_at_n[1:n + 1])
        resolved = crit >= 0
        if not np.any(resolved):
            return math.nan
        return float(np.count_nonzero(resolved & (crit <= self.D)) / np.count_nonzero(resolved))

    def lower_density(self, start: int = 1) -> float:
        """Smallest running density over n in [start, n_max]."""
        crit = np.asarray(self.criticality_at_n[1:])
        resolved = np.cumsum(crit >= 0)
        good = np.cumsum((crit >= 0) & (crit <= self.D))
        ratio = good / np.maximum(resolved, 1)
        return float(np.min(ratio[start - 1:]))

    def with_D(self, D: int) -> "GoodTimeRecord":
        """Same run re-thresholded (valid for D not above the stopping bound of the run)."""
        crit = self.criticality_at_n
        good = [n for n, c in enumerate(crit) if 0 <= c <= D]
        return GoodTimeRecord(self.x, self.delta, D, good, crit, self.diam_Wn, self.unresolved, self.orbit)


def good_times(f, x: complex | None, delta: float, D: int, n_max: int, orbit=None,
               boundary_samples: int = 32, track_diam: bool = True,
               stop_above: int | None = None) -> GoodTimeRecord:
    """Criticality of the pullback of B(f^n(x), delta) to x for n = 0..n_max.

    ``orbit`` (x, f(x), ..., f^{n_max}(x)) may be supplied; it is computed by
    forward iteration otherwise.  Chains stop counting once the criticality
    exceeds ``stop_above`` (default D), so reported values above it are lower
    bounds.  ``diam_Wn`` holds chordal diameters of the pullbacks of the
    half-radius discs, or NaN where the chain was not resolved.
    """
    mk = _kernel_for(f)
    if orbit is None:
        pts = [complex(x)]
        for _ in range(n_max):
            pts.append(complex(mk.f.eval(pts[-1])))
        orbit = pts
    arr = _orbit_array(orbit)
    if len(arr) < n_max + 1:
        raise ValueError("orbit shorter than n_max + 1")
    arr = arr[:n_max + 1]
    stop = D if stop_above is None else stop_above
    st, crit, _ = K.chain_all(mk.p, mk.q, mk.f.degree, mk.crit, mk.mult, mk.cvals, mk.aq, mk.qdeg,
                              arr, n_max, delta, boundary_samples, stop, AMBIGUITY, REFINE_DEPTH,
                              VERTEX_CAP, SWITCH_RATIO)
    crit = np.where(st == K.OK, crit, -1)
    crit[0] = 0
    diam = np.full(n_max + 1, math.nan)
    if track_diam:
        st2, _, logd = K.chain_all(mk.p, mk.q, mk.f.degree, mk.crit, mk.mult, mk.cvals, mk.aq, mk.qdeg,
                                   arr, n_max, delta / 2, boundary_samples, 10**9, AMBIGUITY,
                                   REFINE_DEPTH, VERTEX_CAP, SWITCH_RATIO)
        ok = st2 == K.OK
        diam[ok] = np.exp(logd[ok])
        diam[0] = delta
    good = [n for n in range(n_max + 1) if 0 <= crit[n] <= D]
    unresolved = [n for n in range(n_max + 1) if crit[n] < 0]
    return GoodTimeRecord(complex(arr[0]), delta, int(D), good, crit.tolist(), diam.tolist(),
                          unresolved, arr)


# ---------------------------------------------------------------------------
# diameter control
# ---------------------------------------------------------------------------

@dataclass
class HalvingResult:
    N: int
    times: list
    ratios: list
    violations: list
    notice: str = ""

    @property
    def ok(self) -> bool:
        return len(self.ratios) >= 1 and not self.violations


def halving_check(record: GoodTimeRecord, N: int) -> HalvingResult:
    """Ratios diam(W_{k_{j+1}}) / diam(W_{k_j}) along every N-th good time."""
    if N < 1:
        raise ValueError("N must be positive")
    usable = [g for g in record.good_times if math.isfinite(record.diam_Wn[g])]
    ks = usable[::N]
    if len(ks) < 2:
        return HalvingResult(N, ks, [], [], "fewer than two usable times")
    ratios = []
    for j in range(len(ks) - 1):
        ratios.append((j, record.diam_Wn[ks[j + 1]] / record.diam_Wn[ks[j]]))
    bad = [(j, r) for j, r in ratios if not r < 0.5]
    return HalvingResult(N, ks, ratios, bad)


def scan_halving(record: GoodTimeRecord, N_max: int = 20) -> HalvingResult | None:
    """Smallest N in 1..N_max for which every ratio is below 1/2."""
    for N in range(1, N_max + 1):
        res = halving_check(record, N)
        if res.ok:
            return res
    return None


def lipschitz_exponent(f: RationalMap, delta: float) -> float:
    """L with diam(W_n) > 2^{-nL} for n >= 1: log2 of the derivative bound plus log2(2/delta)."""
    return math.log2(f.sup_spherical_deriv()) + math.log2(2.0 / delta)


def lipschitz_violations(record: GoodTimeRecord, L: float) -> list[int]:
    return [n for n in range(1, len(record.diam_Wn))
            if math.isfinite(record.diam_Wn[n]) and not record.diam_Wn[n] > 2.0 ** (-n * L)]


# ---------------------------------------------------------------------------
# holes
# ---------------------------------------------------------------------------

@dataclass
class HoleWitness:
    time: int
    n: int
    center: complex
    radius: float
    dist_to_x: float
    diam_W: float

    @property
    def ok(self) -> bool:
        return math.isfinite(self.radius) and self.radius > 0

    @property
    def ratio(self) -> float:
        return self.radius / 2.0 ** (-self.n) if self.ok else math.nan


def hole_pullback(f, record: GoodTimeRecord, julia, tau: float, times: Sequence[int] | None = None,
                  N: int | None = None, min_diam: float = 1e-10, boundary_samples: int = 64) -> list[HoleWitness]:
    """Pull Fatou discs found near f^k(x) back to x along good times k.

    For each selected good time k, a disc U of chordal radius >= tau delta / 2
    avoiding the occupied cells of ``julia`` is located inside B(f^k(x), delta/2)
    and lifted along the orbit.  The witness is the lift of U's center with the
    chordal radius of the largest disc around it inside the lifted boundary.
    A time whose lift fails yields a witness with NaN radius.
    Times default to every N-th good time (N from :func:`scan_halving`)
    restricted to pullbacks of chordal diameter at least ``min_diam``.
    """
    from .julia import complement_hole

    mk = _kernel_for(f)
    arr = record.orbit
    if arr is None:
        raise ValueError("record carries no orbit")
    if times is None:
        if N is None:
            res = scan_halving(record)
            N = res.N if res is not None else 1
        usable = [g for g in record.good_times
                  if math.isfinite(record.diam_Wn[g]) and record.diam_Wn[g] >= min_diam]
        times = usable[::N]
    x = complex(arr[0])
    out = []
    for k in times:
        y = complex(arr[k])
        ec, er = chordal_disc(y, record.delta / 2)
        hole = complement_hole(julia, ec, er, tau * er)
        if hole is None:
            raise LookupError(f"no hole of radius {tau * er:.3g} near {y}; refine the Julia grid")
        uc, ur = hole
        if k == 0:
            z, rad = uc, ur * chordal_scale(uc)
        else:
            curve = Curve.disc_with_path([y, uc], uc, ur, boundary_samples)
            res = lift_chain(mk, curve, arr[:k + 1][::-1])
            if not res.ok:
                out.append(HoleWitness(k, -1, complex("nan"), math.nan, math.nan, record.diam_Wn[k]))
                continue
            z = res.final.lift_of(uc)
            rad = polygon_inradius(res.final.loop, z) * chordal_scale(z)
        diam = record.diam_Wn[k] if k > 0 else record.delta
        nj = int(math.floor(math.log2(1.0 / diam)))
        out.append(HoleWitness(k, nj, complex(z), rad, chordal_dist(z, x), diam))
    return out


# ---------------------------------------------------------------------------
# distortion constants
# ---------------------------------------------------------------------------

@dataclass
class BlaschkeReport:
    D: int
    ts: tuple
    trials: int
    violations: dict
    max_excess: dict
    min_gap: dict
    factor_violations: dict
    C1_prime: float
    C2_prime: float
    witnesses: list = field(default_factory=list)

    @property
    def total_violations(self) -> int:
        return int(sum(self.violations.values()))


def blaschke_distortion_oracle(D: int, t, trials: int, rng: np.random.Generator | None = None,
                               grid_step: float = 1e-2, bound_scale: float = 1.0) -> BlaschkeReport:
    """Check the hyperbolic-distance bound on random Blaschke products with h(0) = 0.

    Each trial draws a degree m uniformly in 1..D, puts one zero at the origin
    and the others uniformly in the unit disc, and scans the grid points u
    with |h(u)| < t.  A violation is a u whose hyperbolic distance to every
    zero exceeds ``bound_scale`` * (log(2m) + log(1/(1 - t))).  The same scan
    checks that some factor has modulus below t^{1/m}, and records how close
    the sublevel set gets to the unit circle, from which the containment
    constants C1', C2' in gap >= C1' (1 - t)^{C2'} are fitted.
    """
    rng = rng or np.random.default_rng(0)
    ts = tuple(float(v) for v in np.atleast_1d(t))
    if trials < 1 or D < 1:
        raise ValueError("trials and D must be positive")
    degs = rng.integers(1, D + 1, size=trials)
    zeros = np.zeros((trials, D), dtype=complex)
    rad = np.sqrt(rng.random((trials, D)))
    ang = rng.random((trials, D)) * 2 * np.pi
    zeros[:, 1:] = (rad * np.exp(1j * ang))[:, 1:]
    g = np.arange(-1.0 + grid_step / 2, 1.0, grid_step)
    uu = (g[:, None] + 1j * g[None, :]).ravel()
    grid = uu[np.abs(uu) < 1.0]
    viol, excess, rmax, fviol = K.blaschke_scan(zeros, degs, grid, np.array(ts), bound_scale)
    gap = {tv: float(1.0 - rmax[i]) for i, tv in enumerate(ts)}
    x = np.log1p(-np.array(ts))
    y = np.log(np.maximum([gap[tv] for tv in ts], 1e-300))
    if len(ts) >= 2:
        C2 = max(0.0, float(np.polyfit(x, y, 1)[0]))
    else:
        C2 = 1.0
    C1 = float(np.min(np.exp(y - C2 * x)))
    witnesses = []
    if viol.sum() > 0:
        witnesses = _blaschke_witnesses(zeros, degs, grid, ts, bound_scale)
    return BlaschkeReport(D, ts, trials,
                          {tv: int(viol[i]) for i, tv in enumerate(ts)},
                          {tv: float(excess[i]) for i, tv in enumerate(ts)},
                          gap,
                          {tv: int(fviol[i]) for i, tv in enumerate(ts)},
                          C1, C2, witnesses)


def _blaschke_witnesses(zeros, degs, grid, ts, bound_scale, limit: int = 5) -> list[dict]:
    """The first few (trial, u) pairs breaking the bound, recomputed in numpy."""
    out = []
    for tr in range(len(degs)):
        m = int(degs[tr])
        a = zeros[tr, :m]
        fac = np.abs((grid[:, None] - a[None, :]) / (1.0 - np.conj(a)[None, :] * grid[:, None]))
        h = np.prod(fac, axis=1)
        smin = fac.min(axis=1)
        rho = np.log((1.0 + smin) / (1.0 - smin))
        for tv in ts:
            bound = bound_scale * (math.log(2.0 * m) - math.log1p(-tv))
            bad = np.nonzero((h < tv) & (rho > bound + 1e-12))[0]
            if bad.size:
                i = int(bad[np.argmax(rho[bad])])
                out.append({"t": tv, "trial": tr, "degree": m, "zeros": [complex(z) for z in a],
                            "u": complex(grid[i]), "rho": float(rho[i]), "bound": bound})
                if len(out) >= limit:
                    return out
    return out


@dataclass
class DistortionConstants:
    C1: float
    C2: float
    C3: float
    C4: float
    epsilon: float
    C_of_D: float
    L: float
    C3_profile: dict = field(default_factory=dict)
    C4_profile: dict = field(default_factory=dict)
    samples: int = 0


def _log_sphere_deriv(f: RationalMap, pts: np.ndarray) -> float:
    return float(sum(math.log(f.spherical_deriv(complex(z))) for z in pts))


def fit_distortion_constants(f, record: GoodTimeRecord, ts: Sequence[float] = (0.5, 0.75, 0.875),
                             taus: Sequence[float] = (0.025, 0.05, 0.1, 0.2, 0.4), max_times: int = 12,
                             min_diam: float = 1e-8, boundary_samples: int = 48) -> DistortionConstants:
    """Empirical constants of the distortion estimates along the good times of ``record``.

    For the sampled good times k (F = f^k, B = B(f^k(x), delta)):
    C1, C2 bound |F'(x)| diam(W'_t) / delta by C1 (1 - t)^{-C2}; C3(tau) is the
    largest diam(W'') / diam(W') and C4(tau) the smallest inradius of W''
    around the lifted center over diam(W'), for discs B'' of radius tau delta
    inside B(f^k(x), delta/2).  epsilon is the chordal radius of a disc about
    infinity missing every traced W.
    """
    mk = _kernel_for(f)
    arr = record.orbit
    times = [k for k in record.good_times
             if k > 0 and math.isfinite(record.diam_Wn[k]) and record.diam_Wn[k] >= min_diam]
    if len(times) > max_times:
        times = [times[i] for i in np.linspace(0, len(times) - 1, max_times).astype(int)]
    delta = record.delta
    M = {t: 0.0 for t in ts}
    C3p = {tau: 0.0 for tau in taus}
    C4p = {tau: math.inf for tau in taus}
    far = 0.0
    used = 0
    for k in times:
        y = complex(arr[k])
        marks = arr[:k + 1][::-1]
        logF = _log_sphere_deriv(mk.f, arr[:k])
        res = lift_chain(mk, Curve.circle(y, *chordal_disc(y, delta), boundary_samples), marks)
        if not res.ok:
            continue
        far = max(far, float(np.max(np.abs(res.final.loop))))
        diams = {}
        for t in ts:
            r = lift_chain(mk, Curve.circle(y, *chordal_disc(y, t * delta), boundary_samples), marks)
            if not r.ok:
                break
            diams[t] = polygon_diameter(r.final.loop)
        if len(diams) < len(ts) or 0.5 not in diams:
            continue
        used += 1
        for t in ts:
            M[t] = max(M[t], math.exp(logF) * diams[t] / delta)
        ec, er = chordal_disc(y, delta / 2)
        for tau in taus:
            rr = 2 * tau * er
            for theta in (0.0, 2.1, 4.2):
                zc = ec + 0.999 * (er - rr) * complex(math.cos(theta), math.sin(theta))
                curve = Curve.disc_with_path([y, zc], zc, rr, boundary_samples)
                r = lift_chain(mk, curve, marks)
                if not r.ok:
                    continue
                z = r.final.lift_of(zc)
                C3p[tau] = max(C3p[tau], polygon_diameter(r.final.loop) / diams[0.5])
                inr = polygon_inradius(r.final.loop, z) * chordal_scale(z)
                C4p[tau] = min(C4p[tau], inr / diams[0.5])
    if used == 0:
        raise UnresolvedError("no good time could be traced geometrically")
    x = -np.log1p(-np.array(ts))
    yv = np.log(np.array([M[t] for t in ts]))
    C2 = max(0.0, float(np.polyfit(x, yv, 1)[0])) if len(ts) >= 2 else 0.0
    C1 = float(np.max(np.exp(yv - C2 * x)))
    eps = 2.0 / math.sqrt(1.0 + far ** 2)
    tau0 = min(taus)
    return DistortionConstants(C1, C2, C3p[tau0], C4p[tau0], eps, math.log(2 * record.D),
                               lipschitz_exponent(mk.f, delta), C3p, C4p, used)
