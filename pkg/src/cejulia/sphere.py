"""Points and rational maps on the Riemann sphere.

Points are plain Python complex numbers; the point at infinity is the single
canonical value :data:`INF`.  Distances use the chordal metric

    chi(z, w) = 2|z - w| / sqrt((1 + |z|^2)(1 + |w|^2)),   chi(z, inf) = 2 / sqrt(1 + |z|^2)

and derivatives are spherical: ``|f'(z)| (1 + |z|^2) / (1 + |f(z)|^2)``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

INF = complex(math.inf, 0.0)


class RootFindingError(RuntimeError):
    pass


def is_inf(z: complex) -> bool:
    return not cmath.isfinite(z)


def canon(z) -> complex:
    """Return the canonical representation of a sphere point."""
    z = complex(z)
    if cmath.isnan(z):
        raise ValueError("NaN is not a point of the sphere")
    if is_inf(z):
        return INF
    return z


def chordal_dist(a: complex, b: complex) -> float:
    a_inf, b_inf = is_inf(a), is_inf(b)
    if a_inf and b_inf:
        return 0.0
    if a_inf:
        return 2.0 / math.sqrt(1.0 + abs(b) ** 2)
    if b_inf:
        return 2.0 / math.sqrt(1.0 + abs(a) ** 2)
    d = 2.0 * abs(a - b) / math.sqrt((1.0 + abs(a) ** 2) * (1.0 + abs(b) ** 2))
    return min(d, 2.0)


def chordal_dist_array(z: np.ndarray, w: complex) -> np.ndarray:
    """Vectorised chordal distance from finite points ``z`` to ``w``."""
    z = np.asarray(z, dtype=complex)
    az2 = np.abs(z) ** 2
    if is_inf(w):
        return 2.0 / np.sqrt(1.0 + az2)
    d = 2.0 * np.abs(z - w) / np.sqrt((1.0 + az2) * (1.0 + abs(w) ** 2))
    return np.minimum(d, 2.0)


def chordal_disc(y: complex, r: float) -> tuple[complex, float]:
    """Euclidean (center, radius) of the chordal disc ``{z : chi(z, y) < r}``.

    Requires the disc to stay away from infinity.
    """
    k = r * r * (1.0 + abs(y) ** 2) / 4.0
    if k >= 1.0:
        raise ValueError(f"chordal disc B({y}, {r}) contains infinity")
    center = y / (1.0 - k)
    radius = math.sqrt(k * (1.0 + abs(y) ** 2 - k)) / (1.0 - k)
    return center, radius


def chordal_scale(z: complex) -> float:
    """Local conversion factor from Euclidean to chordal length at ``z``."""
    return 2.0 / (1.0 + abs(z) ** 2)


# ---------------------------------------------------------------------------
# polynomial helpers (ascending coefficient order throughout)
# ---------------------------------------------------------------------------

def _trim(c: Sequence[complex], rel: float = 0.0) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    if c.size == 0:
        return np.zeros(1, dtype=complex)
    scale = np.max(np.abs(c)) if c.size else 0.0
    cut = rel * scale
    n = c.size
    while n > 1 and abs(c[n - 1]) <= cut:
        n -= 1
    return c[:n].copy()


def _horner(c: np.ndarray, z: complex) -> complex:
    acc = 0j
    for a in c[::-1]:
        acc = acc * z + a
    return acc


def poly_roots(coeffs: Sequence[complex], tol: float = 1e-14, max_iter: int = 500) -> np.ndarray:
    """All roots of a polynomial by Aberth-Ehrlich simultaneous iteration.

    ``coeffs`` are in ascending order.  Leading zeros are trimmed first.
    """
    c = _trim(coeffs)
    n = c.size - 1
    if n < 1:
        return np.zeros(0, dtype=complex)
    if c[0] == 0:
        # factor out exact roots at the origin
        k = int(np.argmax(np.abs(c) > 0))
        return np.concatenate([np.zeros(k, dtype=complex), poly_roots(c[k:], tol, max_iter)])
    a = c / c[-1]
    if n == 1:
        return np.array([-a[0]])
    dc = npoly.polyder(a)
    bound = max(abs(a[k]) ** (1.0 / (n - k)) for k in range(n))
    z = bound * np.exp(1j * (2 * np.pi * np.arange(n) / n + 0.4))
    for _ in range(max_iter):
        p = npoly.polyval(z, a)
        dp = npoly.polyval(z, dc)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dp != 0, p / dp, 0.0)
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1.0)
            inv = 1.0 / diff
            np.fill_diagonal(inv, 0.0)
            s = inv.sum(axis=1)
            step = ratio / (1.0 - ratio * s)
        step = np.where(np.isfinite(step), step, 0.0)
        z = z - step
        if np.all(np.abs(step) <= tol * (1.0 + np.abs(z))):
            break
    else:
        resid = np.abs(npoly.polyval(z, a))
        if np.any(resid > 1e-6 * (1.0 + np.abs(z)) ** n):
            raise RootFindingError(f"root finder did not converge for coefficients {list(coeffs)}")
    return z


def cluster_roots(roots: np.ndarray, tol: float) -> list[tuple[complex, int]]:
    """Group numerically coincident roots; returns (mean root, multiplicity)."""
    out: list[list] = []
    for r in roots:
        for grp in out:
            if abs(grp[0] - r) <= tol * (1.0 + abs(grp[0])):
                grp[1].append(r)
                break
        else:
            out.append([r, [r]])
    return [(complex(np.mean(g[1])), len(g[1])) for g in out]


# ---------------------------------------------------------------------------
# rational maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RationalMap:
    """f = P / Q with ascending complex coefficient lists."""

    numer: tuple
    denom: tuple = (1.0,)
    min_degree: int = field(default=2, repr=False, compare=False)
    degree: int = field(init=False)

    def __post_init__(self):
        p = _trim(self.numer)
        q = _trim(self.denom)
        if not np.all(np.isfinite(p)) or not np.all(np.isfinite(q)):
            raise ValueError("coefficients must be finite")
        if np.all(q == 0):
            raise ValueError("denominator is identically zero")
        object.__setattr__(self, "numer", tuple(complex(x) for x in p))
        object.__setattr__(self, "denom", tuple(complex(x) for x in q))
        d = max(p.size, q.size) - 1
        object.__setattr__(self, "degree", d)
        if d < self.min_degree:
            raise ValueError(f"degree must be >= {self.min_degree}, got {d}")
        if q.size > 1 and not np.all(p == 0):
            for r in poly_roots(q):
                if abs(_horner(p, r)) <= 1e-9 * max(1.0, np.max(np.abs(p))) * (1 + abs(r)) ** (p.size - 1):
                    raise ValueError(f"numerator and denominator share the root {r}")

    # -- construction --------------------------------------------------------
    @classmethod
    def polynomial(cls, *coeffs) -> "RationalMap":
        return cls(tuple(coeffs), (1.0,))

    @classmethod
    def mobius(cls, a: complex, b: complex, c: complex, d: complex) -> "RationalMap":
        """(a z + b) / (c z + d); only for metric checks, the dynamics need degree >= 2."""
        if a * d - b * c == 0:
            raise ValueError("ad - bc must be nonzero")
        return cls((b, a), (d, c), min_degree=1)

    @classmethod
    def parse(cls, text: str) -> "RationalMap":
        """Parse ``a0,a1,...@b0,b1,...``; the denominator part is optional.

        Coefficients use Python complex syntax, e.g. ``-2,0,1`` or ``1j,0,1``.
        """
        num, _, den = text.partition("@")
        p = [complex(s.strip().replace("i", "j")) for s in num.split(",") if s.strip()]
        q = [complex(s.strip().replace("i", "j")) for s in den.split(",") if s.strip()] or [1.0]
        return cls(tuple(p), tuple(q))

    def spec_string(self) -> str:
        def fmt(c: complex) -> str:
            if c.imag == 0:
                return repr(c.real)
            return repr(c).strip("()")
        return ",".join(fmt(c) for c in self.numer) + "@" + ",".join(fmt(c) for c in self.denom)

    # -- cached polynomial data ---------------------------------------------
    @property
    def is_polynomial(self) -> bool:
        return len(self.denom) == 1

    @property
    def P(self) -> np.ndarray:
        return np.array(self.numer, dtype=complex)

    @property
    def Q(self) -> np.ndarray:
        return np.array(self.denom, dtype=complex)

    def padded(self) -> tuple[np.ndarray, np.ndarray]:
        """P and Q padded to length degree + 1."""
        d = self.degree
        p = np.zeros(d + 1, dtype=complex)
        q = np.zeros(d + 1, dtype=complex)
        p[: len(self.numer)] = self.numer
        q[: len(self.denom)] = self.denom
        return p, q

    def _charts(self):
        cache = self.__dict__.get("_chart_cache")
        if cache is None:
            p, q = self.padded()
            ph, qh = p[::-1].copy(), q[::-1].copy()
            cache = {
                "near": (p, q, npoly.polyder(p), npoly.polyder(q)),
                "far": (ph, qh, npoly.polyder(ph), npoly.polyder(qh)),
            }
            object.__setattr__(self, "_chart_cache", cache)
        return cache

    # -- evaluation ---------------------------------------------------------
    def __call__(self, z: complex) -> complex:
        return self.eval(z)

    def eval(self, z: complex) -> complex:
        if is_inf(z):
            zeta, key = 0j, "far"
        elif abs(z) > 1.0:
            zeta, key = 1.0 / z, "far"
        else:
            zeta, key = complex(z), "near"
        N, M, _, _ = self._charts()[key]
        n = _horner(N, zeta)
        m = _horner(M, zeta)
        if m == 0:
            if n == 0:
                raise ValueError("indeterminate value: common root")
            return INF
        w = n / m
        return INF if is_inf(w) else w

    def eval_array(self, z: np.ndarray) -> np.ndarray:
        """Vectorised evaluation at finite points (no special handling of poles)."""
        z = np.asarray(z, dtype=complex)
        num = npoly.polyval(z, self.P)
        if self.is_polynomial:
            return num / self.denom[0]
        return num / npoly.polyval(z, self.Q)

    def deriv(self, z: complex) -> complex:
        """Euclidean derivative at a finite, non-pole point."""
        p, q = self.P, self.Q
        pv, qv = _horner(p, z), _horner(q, z)
        dp, dq = _horner(npoly.polyder(p), z), _horner(npoly.polyder(q), z) if q.size > 1 else 0j
        return (dp * qv - pv * dq) / (qv * qv)

    def spherical_deriv(self, z: complex) -> float:
        if is_inf(z):
            zeta, key = 0j, "far"
        elif abs(z) > 1.0:
            zeta, key = 1.0 / z, "far"
        else:
            zeta, key = complex(z), "near"
        N, M, dN, dM = self._charts()[key]
        n, m = _horner(N, zeta), _horner(M, zeta)
        dn, dm = _horner(dN, zeta), _horner(dM, zeta)
        if abs(n) <= abs(m):
            r = n / m
            dr = (dn * m - n * dm) / (m * m)
        else:
            r = m / n
            dr = (dm * n - m * dn) / (n * n)
        return abs(dr) * (1.0 + abs(zeta) ** 2) / (1.0 + abs(r) ** 2)

    def preimages(self, w: complex) -> np.ndarray:
        """All finite preimages of ``w`` (roots of P - w Q)."""
        p, q = self.padded()
        if is_inf(w):
            return poly_roots(q)
        return poly_roots(p - w * q)

    def compose(self, inner: "RationalMap") -> "RationalMap":
        """Return self o inner."""
        p, q = self.padded()
        d = self.degree
        pg, qg = inner.P, inner.Q
        num = np.zeros(1, dtype=complex)
        den = np.zeros(1, dtype=complex)
        for k in range(d + 1):
            term = npoly.polymul(npoly.polypow(pg, k), npoly.polypow(qg, d - k))
            num = npoly.polyadd(num, p[k] * term)
            den = npoly.polyadd(den, q[k] * term)
        return RationalMap(tuple(_trim(num, 1e-15)), tuple(_trim(den, 1e-15)))

    def wronskian(self) -> np.ndarray:
        p, q = self.P, self.Q
        w = npoly.polysub(npoly.polymul(npoly.polyder(p), q), npoly.polymul(p, npoly.polyder(q)))
        return _trim(w, 1e-14)

    def escape_radius(self) -> float:
        """1 + max(1, sum |coefficients of the monic numerator|); polynomials only."""
        if not self.is_polynomial:
            raise ValueError("escape radius is defined for polynomials only")
        p = self.P / self.P[-1]
        return 1.0 + max(1.0, float(np.sum(np.abs(p))))

    def sup_spherical_deriv(self, samples: int = 400) -> float:
        """Numerical supremum of the spherical derivative over a sphere grid."""
        # latitude/longitude grid pulled back by stereographic projection
        th = np.linspace(1e-3, np.pi - 1e-3, samples)
        ph = np.linspace(0, 2 * np.pi, samples, endpoint=False)
        best = self.spherical_deriv(INF)
        for t in th:
            r = math.tan(t / 2)
            for z in r * np.exp(1j * ph[:: max(1, samples // 100)]):
                best = max(best, self.spherical_deriv(z))
        return best


# ---------------------------------------------------------------------------
# critical points
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CriticalPoint:
    point: complex
    local_degree: int
    in_julia: bool

    @property
    def multiplicity(self) -> int:
        return self.local_degree - 1


@dataclass(frozen=True)
class CriticalSet:
    points: tuple
    nu: int

    @property
    def in_julia(self) -> tuple:
        return tuple(c for c in self.points if c.in_julia)

    @property
    def in_julia_flags(self) -> list[bool]:
        return [c.in_julia for c in self.points]


def critical_points(f: RationalMap, cluster_tol: float = 1e-6) -> list[tuple[complex, int]]:
    """Critical points with local degrees, including infinity when critical."""
    w = f.wronskian()
    deg_w = w.size - 1 if np.any(w != 0) else 0
    roots = poly_roots(w) if deg_w >= 1 else np.zeros(0, dtype=complex)
    pts = [(canon(r), m + 1) for r, m in cluster_roots(roots, cluster_tol)]
    at_inf = 2 * f.degree - 2 - deg_w
    if at_inf > 0:
        pts.append((INF, at_inf + 1))
    total = sum(k - 1 for _, k in pts)
    if total != 2 * f.degree - 2:
        raise RootFindingError(
            f"Riemann-Hurwitz count {total} != {2 * f.degree - 2} for coefficients {f.numer}@{f.denom}"
        )
    return pts


def attracted(f: RationalMap, z: complex, n_iter: int = 200, max_period: int = 24) -> bool:
    """True when the forward orbit of ``z`` is caught by an attracting cycle."""
    orbit = [z]
    for _ in range(n_iter):
        orbit.append(f.eval(orbit[-1]))
    tail = orbit[-1]
    for p in range(1, max_period + 1):
        if chordal_dist(tail, orbit[-1 - p]) < 1e-9:
            mult = 1.0
            for q in orbit[-1 - p : -1]:
                mult *= f.spherical_deriv(q)
            return mult < 1.0
    return False


def critical_set(
    f: RationalMap,
    julia_sample: Sequence[complex],
    tol: float = 1e-3,
    n_iter: int = 200,
    collision_tol: float = 1e-9,
) -> CriticalSet:
    """Critical points of ``f`` with their in-J judgement and the degree bound nu."""
    from scipy.spatial import cKDTree

    sample = np.asarray([s for s in julia_sample if not is_inf(s)], dtype=complex)
    if sample.size == 0:
        raise ValueError("julia_sample must contain finite points")
    xy = np.column_stack([sample.real, sample.imag])
    extent = float(np.hypot(*(xy.max(axis=0) - xy.min(axis=0)))) or 1.0
    tree = cKDTree(xy)

    out = []
    for c, k in critical_points(f):
        if is_inf(c):
            near = False
        else:
            d, _ = tree.query([c.real, c.imag])
            near = d / extent < tol
        out.append(CriticalPoint(c, k, bool(near and not attracted(f, c, n_iter))))
    nu = max(k for _, k in [(c.point, c.local_degree) for c in out])
    for c in out:
        if not c.in_julia:
            continue
        prod = c.local_degree
        z = c.point
        for _ in range(n_iter):
            z = f.eval(z)
            for other in out:
                if chordal_dist(z, other.point) < collision_tol:
                    prod *= other.local_degree
                    break
            if prod > 10**6:
                break
        nu = max(nu, prod)
    return CriticalSet(tuple(out), nu)


def iterate(f: RationalMap, z: complex, n: int) -> complex:
    for _ in range(n):
        z = f.eval(z)
    return z


def orbit_points(f: RationalMap, z: complex, n: int) -> list[complex]:
    pts = [canon(z)]
    for _ in range(n):
        pts.append(f.eval(pts[-1]))
    return pts


def parse_points(values: Iterable) -> list[complex]:
    return [canon(v) for v in values]
