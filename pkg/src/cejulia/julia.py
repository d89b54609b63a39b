"""Julia set samples and planar geometry around them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from . import _kernels as K
from .dynamics import repelling_fixed_point
from .porosity import DyadicOccupancy
from .sphere import RationalMap

BURN_IN = 50


@dataclass
class JuliaSample:
    points: np.ndarray = field(repr=False)
    method: str
    resolution_hint: float
    seed: int

    def __len__(self) -> int:
        return len(self.points)


def julia_points(f: RationalMap, method: str = "inverse_iteration", count: int = 100_000, seed: int = 0,
                 walkers: int = 256, grid: int = 1024, max_iter: int = 500) -> JuliaSample:
    """Sample J(f) by random inverse iteration or, for polynomials, by escape-time boundary cells."""
    if count < 1:
        raise ValueError("count must be positive")
    rng = np.random.default_rng(seed)
    p, q = f.padded()
    if method == "inverse_iteration":
        start = repelling_fixed_point(f)
        walkers = max(1, min(walkers, count))
        steps = BURN_IN + -(-count // walkers)
        choices = rng.random((steps, walkers))
        pts = K.backward_walks(p, q, f.degree, np.full(walkers, start, dtype=complex), choices, BURN_IN)
        return JuliaSample(pts[:count], method, 1e-6, seed)
    if method == "escape_boundary":
        if not f.is_polynomial:
            raise ValueError("escape_boundary needs a polynomial")
        R = f.escape_radius()
        g = np.linspace(-R, R, grid)
        step = g[1] - g[0]
        zz = (g[None, :] + 1j * g[:, None]).ravel()
        de = K.distance_estimates(p / q[0], zz, 1e10, max_iter)
        # cells whose center is within one cell diagonal of J, or never escaping
        cells = zz[de < step * math.sqrt(2.0)]
        if cells.size == 0:
            raise ValueError("no boundary cells found; increase the grid size")
        if cells.size > count:
            cells = cells[np.sort(rng.choice(cells.size, count, replace=False))]
        return JuliaSample(cells, method, step * math.sqrt(2.0), seed)
    raise ValueError(f"unknown method {method!r}")


def occupancy_from_sample(sample: JuliaSample | np.ndarray, depth: int, pad: float = 0.05) -> DyadicOccupancy:
    pts = sample.points if isinstance(sample, JuliaSample) else np.asarray(sample, dtype=complex)
    return DyadicOccupancy.from_complex(pts, depth, pad=pad)


# ---------------------------------------------------------------------------
# holes and distances
# ---------------------------------------------------------------------------

def _plane_cell(occ: DyadicOccupancy, level: int) -> float:
    if occ.normalization is None:
        raise ValueError("occupancy carries no plane normalization")
    return occ.normalization.side * 2.0 ** (-level)


def complement_hole(occ: DyadicOccupancy, center: complex, radius: float,
                    min_radius: float = 0.0) -> tuple[complex, float] | None:
    """Largest certified empty disc inside the Euclidean disc B(center, radius).

    The search runs on the occupancy level whose cells are about radius/16
    (or the finest level).  Clearance of a cell center is its distance to the
    nearest occupied cell minus that cell's half-diagonal, so the disc misses
    every occupied cell.  Returns (center, radius) in plane coordinates, or
    None when nothing of at least one cell (and ``min_radius``) is found.
    """
    norm = occ.normalization
    if norm is None:
        raise ValueError("occupancy carries no plane normalization")
    rr = radius / norm.side
    c = norm.to_unit(np.array([center]))[0]
    level = min(occ.depth, max(0, int(math.ceil(math.log2(16.0 / rr)))))
    h = 2.0 ** (-level)
    lo = np.floor((c - rr) / h).astype(np.int64) - 1
    hi = np.floor((c + rr) / h).astype(np.int64) + 1
    xs = np.arange(lo[0], hi[0] + 1)
    ys = np.arange(lo[1], hi[1] + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    occupied = occ.contains(level, np.column_stack([gx.ravel(), gy.ravel()])).reshape(gx.shape)
    if not occupied.any():
        return complex(center), float(radius)
    clear = np.maximum(ndimage.distance_transform_edt(~occupied) * h - h / math.sqrt(2.0), 0.0)
    cx = (gx + 0.5) * h
    cy = (gy + 0.5) * h
    room = rr - np.hypot(cx - c[0], cy - c[1])
    val = np.minimum(clear, room)
    i = np.unravel_index(np.argmax(val), val.shape)
    best = float(val[i])
    if best < h or best * norm.side < min_radius:
        return None
    z = norm.to_plane(np.array([[cx[i], cy[i]]]))[0]
    return complex(z), best * norm.side


class _CenterIndex:
    def __init__(self, occ: DyadicOccupancy):
        self.occ = occ
        centers = occ.cell_centers()
        self.tree = cKDTree(centers)
        self.half_diag = math.sqrt(occ.dim) * 2.0 ** (-occ.depth) / 2.0


def _index(occ: DyadicOccupancy) -> _CenterIndex:
    idx = occ.__dict__.get("_center_index")
    if idx is None:
        idx = _CenterIndex(occ)
        occ.__dict__["_center_index"] = idx
    return idx


def dist_to_julia(occ: DyadicOccupancy, z) -> np.ndarray | float:
    """Lower bound for the Euclidean distance from z to the sampled set (plane units)."""
    norm = occ.normalization
    if norm is None:
        raise ValueError("occupancy carries no plane normalization")
    scalar = np.isscalar(z)
    xy = norm.to_unit(np.atleast_1d(np.asarray(z, dtype=complex)))
    idx = _index(occ)
    d, _ = idx.tree.query(xy)
    out = np.maximum(d - idx.half_diag, 0.0) * norm.side
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# Hoelder diagnostic
# ---------------------------------------------------------------------------

@dataclass
class HolderDiagnostic:
    omega_radius: float
    samples: list = field(repr=False)
    xi_hat: float
    slope: float
    intercept: float
    r_squared: float
    violation_fraction: float
    used: int


def escape_count(f: RationalMap, z: np.ndarray, radius: float, max_iter: int = 10_000) -> np.ndarray:
    """n(z) = min{n >= 0 : |f^n(z)| > radius}, or -1 when not reached."""
    p, q = f.padded()
    return K.escape_times(p, q, np.asarray(z, dtype=complex).ravel(), radius, max_iter)


def holder_diagnostic(f: RationalMap, occ: DyadicOccupancy, sample_count: int = 1000, seed: int = 0,
                      quantile: float = 0.01) -> HolderDiagnostic:
    """Fit dist(z, J) <= xi^{n(z) - 1} over basin points near the sampled Julia set.

    Points are placed at log-uniform distances (8 cells up to a tenth of the
    sample's extent) from random occupied cells.  log(1/xi) is the
    ``quantile`` of log(1/dist) / (n - 1) over samples with n >= 2, so at most
    that fraction of samples violates the inequality; the reported fraction is
    an exact recount.
    """
    if not f.is_polynomial:
        raise ValueError("the diagnostic uses the basin of infinity of a polynomial")
    rng = np.random.default_rng(seed)
    R = f.escape_radius()
    norm = occ.normalization
    centers = norm.to_plane(occ.cell_centers())
    cell = _plane_cell(occ, occ.depth)
    t_lo, t_hi = 8.0 * cell, 0.1 * norm.side
    base = centers[rng.integers(len(centers), size=4 * sample_count)]
    t = np.exp(rng.uniform(math.log(t_lo), math.log(t_hi), size=base.size))
    z = base + t * np.exp(2j * np.pi * rng.random(base.size))
    n = escape_count(f, z, R)
    dist = np.asarray(dist_to_julia(occ, z))
    keep = (n >= 2) & (dist > 0)
    z, n, dist = z[keep][:sample_count], n[keep][:sample_count], dist[keep][:sample_count]
    if z.size < 10:
        raise ValueError("fewer than 10 usable samples")
    y = np.log(1.0 / dist)
    ratio = y / (n - 1)
    log_inv_xi = float(np.quantile(ratio, quantile, method="lower"))
    xi = math.exp(-log_inv_xi)
    viol = float(np.mean(dist > xi ** (n - 1.0)))
    A = np.column_stack([n.astype(float), np.ones(n.size)])
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ np.array([slope, icpt])
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - pred) ** 2)) / ss if ss > 0 else 0.0
    samples = list(zip(z.tolist(), n.tolist(), dist.tolist()))
    return HolderDiagnostic(R, samples, xi, float(slope), float(icpt), r2, viol, int(z.size))


__all__ = [
    "JuliaSample", "julia_points", "occupancy_from_sample", "complement_hole", "dist_to_julia",
    "HolderDiagnostic", "escape_count", "holder_diagnostic",
]
