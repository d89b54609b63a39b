"""Dyadic occupancy grids and porosity scanners.

Boxes at level n are [p 2^-n, (p+1) 2^-n) per axis inside [0, 1)^d.  Each
level stores the sorted Morton (bit-interleaved) codes of its occupied boxes,
so the descendants of a box at any deeper level form one contiguous code range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

MAX_CODE_BITS = 62


def morton_encode(coords: np.ndarray, level: int) -> np.ndarray:
    """Interleave the bits of integer box coordinates (shape (k, d))."""
    coords = np.asarray(coords, dtype=np.int64)
    if coords.ndim == 1:
        coords = coords[:, None]
    d = coords.shape[1]
    code = np.zeros(coords.shape[0], dtype=np.int64)
    for b in range(level):
        for k in range(d):
            code |= ((coords[:, k] >> b) & 1) << (b * d + (d - 1 - k))
    return code


def morton_decode(code: np.ndarray, level: int, d: int) -> np.ndarray:
    code = np.asarray(code, dtype=np.int64)
    out = np.zeros((code.size, d), dtype=np.int64)
    for b in range(level):
        for k in range(d):
            out[:, k] |= ((code >> (b * d + (d - 1 - k))) & 1) << b
    return out


@dataclass(frozen=True)
class PlaneNormalization:
    """Isotropic affine map z -> (z - origin) / side from the plane into [0, 1)^2."""
    origin: complex
    side: float

    @classmethod
    def fit(cls, points: np.ndarray, pad: float = 0.05) -> "PlaneNormalization":
        pts = np.asarray(points, dtype=complex)
        lo = complex(pts.real.min(), pts.imag.min())
        hi = complex(pts.real.max(), pts.imag.max())
        span = max(hi.real - lo.real, hi.imag - lo.imag, 1e-12)
        side = span * (1.0 + 2.0 * pad)
        mid = (lo + hi) / 2
        return cls(mid - complex(side / 2, side / 2), side)

    def to_unit(self, z) -> np.ndarray:
        w = (np.asarray(z, dtype=complex) - self.origin) / self.side
        return np.column_stack([np.real(w).ravel(), np.imag(w).ravel()])

    def to_plane(self, xy: np.ndarray) -> np.ndarray:
        xy = np.atleast_2d(xy)
        return self.origin + self.side * (xy[:, 0] + 1j * xy[:, 1])


@dataclass
class DyadicOccupancy:
    dim: int
    depth: int
    levels: list = field(repr=False)
    normalization: PlaneNormalization | None = None
    sample_count: int = 0

    @classmethod
    def from_unit_points(cls, points: np.ndarray, depth: int,
                         normalization: PlaneNormalization | None = None) -> "DyadicOccupancy":
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        d = pts.shape[1]
        if depth < 0 or depth > 24 or depth * d > MAX_CODE_BITS:
            raise ValueError(f"depth {depth} unsupported in dimension {d}")
        bad = ~np.all((pts >= 0.0) & (pts < 1.0), axis=1)
        if np.any(bad):
            raise ValueError(f"point {pts[np.argmax(bad)].tolist()} lies outside the unit box")
        cells = np.floor(pts * (1 << depth)).astype(np.int64)
        codes = np.unique(morton_encode(cells, depth))
        levels = [None] * (depth + 1)
        levels[depth] = codes
        for n in range(depth - 1, -1, -1):
            levels[n] = np.unique(levels[n + 1] >> d)
        return cls(d, depth, levels, normalization, len(pts))

    @classmethod
    def from_complex(cls, points, depth: int, normalization: PlaneNormalization | None = None,
                     pad: float = 0.05) -> "DyadicOccupancy":
        pts = np.asarray(points, dtype=complex)
        norm = normalization or PlaneNormalization.fit(pts, pad)
        return cls.from_unit_points(norm.to_unit(pts), depth, norm)

    @classmethod
    def from_bitmap(cls, bitmap: np.ndarray) -> "DyadicOccupancy":
        """Square 0/1 array of side 2^depth; row r is the cell row y = side - 1 - r."""
        bitmap = np.asarray(bitmap)
        side = bitmap.shape[0]
        depth = int(round(math.log2(side)))
        if bitmap.shape != (side, side) or (1 << depth) != side:
            raise ValueError("bitmap must be square with power-of-two side")
        rows, cols = np.nonzero(bitmap)
        centers = np.column_stack([(cols + 0.5) / side, (side - 1 - rows + 0.5) / side])
        return cls.from_unit_points(centers.reshape(-1, 2), depth)

    def to_bitmap(self, level: int | None = None) -> np.ndarray:
        if self.dim != 2:
            raise ValueError("bitmaps are two-dimensional")
        level = self.depth if level is None else level
        side = 1 << level
        img = np.zeros((side, side), dtype=np.uint8)
        xy = morton_decode(self.levels[level], level, 2)
        img[side - 1 - xy[:, 1], xy[:, 0]] = 1
        return img

    # -- queries -----------------------------------------------------------
    def count(self, level: int) -> int:
        return int(self.levels[level].size)

    def contains(self, level: int, coords: np.ndarray) -> np.ndarray:
        """Occupancy of the given integer boxes (out-of-range boxes are empty)."""
        coords = np.asarray(coords, dtype=np.int64)
        if coords.ndim == 1:
            coords = coords[:, None] if self.dim == 1 else coords[None, :]
        inside = np.all((coords >= 0) & (coords < (1 << level)), axis=1)
        out = np.zeros(coords.shape[0], dtype=bool)
        if np.any(inside):
            codes = morton_encode(coords[inside], level)
            arr = self.levels[level]
            idx = np.searchsorted(arr, codes)
            idx = np.minimum(idx, arr.size - 1) if arr.size else idx
            out[inside] = (arr.size > 0) & (arr[idx] == codes) if arr.size else False
        return out

    def descendant_count(self, level: int, coords: np.ndarray, below: int) -> np.ndarray:
        """Occupied descendants ``below`` levels under each given box."""
        codes = morton_encode(np.atleast_2d(coords), level)
        arr = self.levels[level + below]
        shift = self.dim * below
        return np.searchsorted(arr, (codes + 1) << shift) - np.searchsorted(arr, codes << shift)

    def box_of(self, points: np.ndarray, level: int) -> np.ndarray:
        pts = _unit_points(self, points)
        return np.floor(pts * (1 << level)).astype(np.int64)

    def cell_centers(self, level: int | None = None) -> np.ndarray:
        level = self.depth if level is None else level
        return (morton_decode(self.levels[level], level, self.dim) + 0.5) / (1 << level)

    def check_closure(self) -> bool:
        return all(np.array_equal(np.unique(self.levels[n + 1] >> self.dim), self.levels[n])
                   for n in range(self.depth))


def build_occupancy(points, depth: int) -> DyadicOccupancy:
    """Occupancy of points already inside [0, 1)^d (array of shape (k, d))."""
    return DyadicOccupancy.from_unit_points(points, depth)


# ---------------------------------------------------------------------------
# synthetic test sets
# ---------------------------------------------------------------------------

def cantor_points(level: int) -> np.ndarray:
    """Endpoints of the level-``level`` intervals of the middle-thirds Cantor set, in [0, 1)."""
    left = np.zeros(1)
    for k in range(1, level + 1):
        left = np.concatenate([left, left + 2.0 * 3.0 ** (-k)])
    pts = np.concatenate([left, left + 3.0 ** (-level)])
    return np.minimum(pts, 1.0 - 1e-12)


def synthetic_set(name: str, depth: int, cantor_level: int = 8) -> np.ndarray:
    """Point sets used as calibration inputs: segment, square, cantor, cantor_dust."""
    m = 1 << depth
    if name == "segment":
        x = (np.arange(m) + 0.5) / m
        return np.column_stack([x, np.zeros(m)])
    if name == "square":
        g = (np.arange(m) + 0.5) / m
        xx, yy = np.meshgrid(g, g)
        return np.column_stack([xx.ravel(), yy.ravel()])
    if name == "cantor":
        c = cantor_points(cantor_level)
        return np.column_stack([c, np.zeros_like(c)])
    if name == "cantor_dust":
        c = cantor_points(cantor_level)
        xx, yy = np.meshgrid(c, c)
        return np.column_stack([xx.ravel(), yy.ravel()])
    raise ValueError(f"unknown synthetic set {name!r}")


# ---------------------------------------------------------------------------
# scanners
# ---------------------------------------------------------------------------

def _unit_points(occ: DyadicOccupancy, points) -> np.ndarray:
    """Points as rows in [0, 1)^d; complex input goes through the occupancy's normalization."""
    arr = np.asarray(points)
    if np.iscomplexobj(arr):
        if occ.normalization is None:
            raise ValueError("complex points need an occupancy with a plane normalization")
        return occ.normalization.to_unit(np.atleast_1d(arr))
    return np.atleast_2d(arr.astype(float))


def _p_hat(scales: list[int]) -> float:
    """Smallest P with n_j <= P j along the increasing scale list (j from 1)."""
    if not scales:
        return math.inf
    return max(n / j for j, n in enumerate(scales, start=1))


@dataclass
class PorosityScanResult:
    per_point: list
    p1_hat: float
    p2: float
    n_max: int

    @property
    def densities(self) -> np.ndarray:
        return np.array([d for _, _, d in self.per_point])

    def good_scales(self, i: int) -> list:
        return self.per_point[i][1]


def mean_porosity_scan(occ: DyadicOccupancy, points: np.ndarray, p2: float, n_max: int) -> PorosityScanResult:
    """Scales n where an empty box of side >= 2 p2 2^-n sits within distance 2^-n of z.

    Boxes are dyadic at level m = n - 1 + floor(log2(1/p2)), must lie in the
    unit box, and are certified empty against ``occ``.  Distances between a
    point and box centers are measured in the sup norm.
    """
    if not 0 < p2 < 1:
        raise ValueError("p2 must lie in (0, 1)")
    extra = int(math.floor(math.log2(1.0 / p2) + 1e-12)) - 1
    if n_max + extra > occ.depth:
        raise ValueError(f"n_max too large for depth {occ.depth} at p2={p2}")
    pts = _unit_points(occ, points)
    d = occ.dim
    per_point = []
    for i, z in enumerate(pts):
        good = []
        for n in range(1, n_max + 1):
            m = n + extra
            scale = 1 << m
            r = 2.0 ** (-n)
            axes = []
            for k in range(d):
                lo = max(0, int(math.ceil((z[k] - r) * scale - 0.5)))
                hi = min(scale - 1, int(math.floor((z[k] + r) * scale - 0.5)))
                axes.append(np.arange(lo, hi + 1))
            grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
            if grid.size and not np.all(occ.contains(m, grid)):
                good.append(n)
        per_point.append((i, good, len(good) / n_max))
    p1 = max((_p_hat(g) for _, g, _ in per_point), default=math.inf)
    return PorosityScanResult(per_point, p1, p2, n_max)


@dataclass
class BoxPorosityResult:
    N: int
    P_hat: float
    per_point_densities: list
    feasible: bool
    good_scales: list = field(repr=False, default_factory=list)
    n_max: int = 0


def box_good_scales(occ: DyadicOccupancy, z: np.ndarray, N: int, n_max: int) -> list[int]:
    full = 1 << (occ.dim * N)
    good = []
    for n in range(1, n_max + 1):
        box = occ.box_of(z, n)
        if occ.descendant_count(n, box, N)[0] < full:
            good.append(n)
    return good


def box_porosity_detect(occ: DyadicOccupancy, points: np.ndarray, N: int, n_max: int) -> BoxPorosityResult:
    """Scales n where the box of z at level n has an empty descendant N levels down."""
    if N < 1 or n_max + N > occ.depth:
        raise ValueError("need N >= 1 and n_max + N <= depth")
    pts = _unit_points(occ, points)
    scales = [box_good_scales(occ, z, N, n_max) for z in pts]
    P = max((_p_hat(s) for s in scales), default=math.inf)
    return BoxPorosityResult(N, P, [len(s) / n_max for s in scales], math.isfinite(P), scales, n_max)


@dataclass
class DirectionalResult:
    beta_hat: float
    P_hat: float
    densities: list
    good_scales: list = field(repr=False)
    alpha: float = 0.25
    partial: bool = False
    beta_table: np.ndarray | None = field(default=None, repr=False)


def _directional_beta(occ: DyadicOccupancy, z: np.ndarray, n: int, alpha: float) -> tuple[float, float]:
    """Largest certified hole radius (relative to 2^-n) found in every alpha-sub-ball, and the floor."""
    level = min(occ.depth, n + int(math.ceil(math.log2(1.0 / alpha))) + 4)
    h = 2.0 ** (-level)
    r = 2.0 ** (-n)
    lo = np.floor((z - r) / h).astype(np.int64) - 2
    hi = np.floor((z + r) / h).astype(np.int64) + 2
    xs = np.arange(lo[0], hi[0] + 1)
    ys = np.arange(lo[1], hi[1] + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    occupied = occ.contains(level, np.column_stack([gx.ravel(), gy.ravel()])).reshape(gx.shape)
    # cells outside the unit box count as empty: the normalized set lies inside it
    cx = (gx + 0.5) * h
    cy = (gy + 0.5) * h
    if occupied.any():
        # distance (in cells) from each cell center to the nearest occupied cell center
        dist = ndimage.distance_transform_edt(~occupied) * h
        clear = np.maximum(dist - h / math.sqrt(2.0), 0.0)
        occ_x, occ_y = cx[occupied], cy[occupied]
    else:
        clear = np.full(gx.shape, np.inf)
        occ_x = occ_y = np.empty(0)
    s = alpha * r / 2.0
    reach = r - alpha * r + s / math.sqrt(2.0)
    k = int(math.ceil(reach / s))
    offs = np.arange(-k, k + 1) * s
    worst = np.inf
    for ox in offs:
        for oy in offs:
            if math.hypot(ox, oy) > reach:
                continue
            zx, zy = z[0] + ox, z[1] + oy
            room = s - np.hypot(cx - zx, cy - zy)
            best = float(np.max(np.minimum(clear, room)))
            # the mesh point itself, with its exact clearance
            own = np.min(np.hypot(occ_x - zx, occ_y - zy)) - h / math.sqrt(2.0) if occ_x.size else np.inf
            best = max(best, min(own, s))
            worst = min(worst, best)
    return worst / r, h / r


def directional_scan(occ: DyadicOccupancy, points: np.ndarray, alpha: float, n_max: int,
                     n_min: int = 1) -> DirectionalResult:
    """Mean porosity in all directions on the grid.

    For every center z' of a mesh of spacing alpha 2^-n / 2 covering the
    admissible sub-ball centers, the largest certified empty disc inside
    B(z', alpha 2^-n / 2) is measured; a hole there lies in every admissible
    B(z'', alpha 2^-n) with |z'' - z'| <= alpha 2^-n / 2.  Candidate
    beta = (alpha/2) 2^-k are scanned; beta_hat is the largest one at which no
    point loses a scale that is good at the resolution floor.
    """
    if not 0 < alpha <= 0.5 or occ.dim != 2:
        raise ValueError("alpha must lie in (0, 1/2] on a planar occupancy")
    pts = _unit_points(occ, points)
    scales = list(range(n_min, n_max + 1))
    table = np.zeros((len(pts), len(scales)))
    floor = 0.0
    for i, z in enumerate(pts):
        for j, n in enumerate(scales):
            b, fl = _directional_beta(occ, z, n, alpha)
            table[i, j] = b
            floor = max(floor, fl)
    cands = [alpha / 2 * 2.0 ** (-k) for k in range(0, 40) if alpha / 2 * 2.0 ** (-k) >= floor]
    partial = False
    if not cands:
        cands = [floor]
        partial = True
    base = table >= cands[-1]
    beta_hat = cands[-1]
    for beta in cands:
        if np.array_equal(table >= beta, base):
            beta_hat = beta
            break
    if beta_hat == cands[-1] and not np.all(base):
        partial = True
    good = [[n for n, ok in zip(scales, row) if ok] for row in (table >= beta_hat)]
    P = max((_p_hat(g) for g in good), default=math.inf)
    dens = [len(g) / len(scales) for g in good]
    return DirectionalResult(beta_hat, P, dens, good, alpha, partial, table)


__all__ = [
    "morton_encode", "morton_decode", "PlaneNormalization", "DyadicOccupancy", "build_occupancy",
    "cantor_points", "synthetic_set", "PorosityScanResult", "mean_porosity_scan", "BoxPorosityResult",
    "box_good_scales", "box_porosity_detect", "DirectionalResult", "directional_scan",
]
