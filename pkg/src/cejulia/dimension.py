"""Box-counting dimension, the porosity dimension bound, and box-tree combinatorics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator

import numpy as np

from .porosity import DyadicOccupancy


def box_count(occ: DyadicOccupancy, n: int) -> int:
    if not 0 <= n <= occ.depth:
        raise ValueError(f"level {n} outside 0..{occ.depth}")
    return occ.count(n)


@dataclass
class DimensionFit:
    counts: list
    slope: float
    r_squared: float
    range: tuple
    notice: str = ""


def minkowski_fit(occ: DyadicOccupancy, n_min: int, n_max: int) -> DimensionFit:
    """Least-squares slope of log2 #boxes against the level n over [n_min, n_max]."""
    if not 0 <= n_min < n_max <= occ.depth:
        raise ValueError("need 0 <= n_min < n_max <= depth")
    ns = np.arange(n_min, n_max + 1)
    counts = [(int(n), box_count(occ, int(n))) for n in ns]
    y = np.log2([c for _, c in counts])
    if np.all(y == y[0]):
        return DimensionFit(counts, 0.0, 1.0, (n_min, n_max), "constant counts")
    slope, icpt = np.polyfit(ns, y, 1)
    pred = slope * ns + icpt
    r2 = 1.0 - float(np.sum((y - pred) ** 2) / np.sum((y - y.mean()) ** 2))
    return DimensionFit(counts, float(slope), r2, (n_min, n_max))


def porosity_bound(d: int, N: int, P: float) -> tuple[float, float]:
    """(alpha, alpha d): the Minkowski dimension bound for box mean porous sets.

    alpha = 1 - (1 - log(K - 1) / log K) / P with K = 2^(d N).
    """
    if d < 1 or N < 1 or P < 1:
        raise ValueError("need d >= 1, N >= 1, P >= 1")
    K = 2 ** (d * N)
    alpha = 1.0 - (1.0 - math.log(K - 1) / math.log(K)) / P
    return alpha, alpha * d


# ---------------------------------------------------------------------------
# trees
# ---------------------------------------------------------------------------

@dataclass
class BoxTree:
    """Rooted tree with all leaves' levels known; ``parents[n][i]`` indexes level n - 1."""
    d: int
    parents: list = field(repr=False)

    @property
    def depth(self) -> int:
        return len(self.parents) - 1

    def level_size(self, n: int) -> int:
        return len(self.parents[n])

    @classmethod
    def from_occupancy(cls, occ: DyadicOccupancy) -> "BoxTree":
        parents = [np.full(1, -1, dtype=np.int64)]
        for n in range(1, occ.depth + 1):
            parents.append(np.searchsorted(occ.levels[n - 1], occ.levels[n] >> occ.dim).astype(np.int64))
        return cls(occ.dim, parents)

    @classmethod
    def from_nested(cls, d: int, nested) -> "BoxTree":
        """Tree given as nested tuples of children, e.g. ((), ((),)) ."""
        parents: list[list[int]] = [[-1]]
        frontier = [nested]
        while True:
            nxt, par = [], []
            for i, node in enumerate(frontier):
                for ch in node:
                    nxt.append(ch)
                    par.append(i)
            if not nxt:
                break
            parents.append(par)
            frontier = nxt
        return cls(d, [np.asarray(p, dtype=np.int64) for p in parents])

    @classmethod
    def parse(cls, text: str, d: int = 1) -> "BoxTree":
        """Lines "level parent_index"; parent_index counts lines from 0, -1 for the root."""
        rows = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                a, b = line.split()
                rows.append((int(a), int(b)))
        if not rows or rows[0] != (0, -1):
            raise ValueError("first vertex must be the root '0 -1'")
        pos = {}
        per_level: dict[int, list[int]] = {}
        for k, (lvl, par) in enumerate(rows):
            if k > 0 and (par < 0 or par >= k or rows[par][0] != lvl - 1):
                raise ValueError(f"line {k + 1}: parent must be an earlier vertex one level up")
            per_level.setdefault(lvl, [])
            pos[k] = len(per_level[lvl])
            per_level[lvl].append(pos[par] if k > 0 else -1)
        depth = max(per_level)
        return cls(d, [np.asarray(per_level[n], dtype=np.int64) for n in range(depth + 1)])

    def dump(self) -> str:
        lines = ["0 -1"]
        start = [0]
        for n in range(1, self.depth + 1):
            start.append(start[-1] + self.level_size(n - 1))
            for p in self.parents[n]:
                lines.append(f"{n} {start[n - 1] + int(p)}")
        return "\n".join(lines) + "\n"

    def is_leveled(self) -> bool:
        """Every vertex above the bottom level has a child."""
        return all(np.unique(self.parents[n]).size == self.level_size(n - 1)
                   for n in range(1, self.depth + 1))

    def n_children(self, level: int, N: int) -> np.ndarray:
        """Number of descendants N levels below each vertex at ``level``."""
        if level + N > self.depth:
            raise ValueError("not enough levels below")
        idx = np.arange(self.level_size(level + N))
        for k in range(level + N, level, -1):
            idx = self.parents[k][idx]
        return np.bincount(idx, minlength=self.level_size(level))


@dataclass
class TreeReport:
    K: int
    prop_i: bool
    prop_ii: bool
    violations_i: list
    violations_ii: list
    checked_levels: int


def verify_tree_properties(tree: BoxTree, N: int, P: float) -> TreeReport:
    """(i) every vertex has at most K = 2^(dN) N-children; (ii) every vertex at level n
    has at least n/P strict ancestors with at most K - 1 N-children.

    Property (ii) is checked at the levels whose ancestors all have their
    N-children inside the tree, i.e. up to depth - N + 1.
    """
    if tree.depth < N:
        raise ValueError("tree has fewer than N levels")
    K = 2 ** (tree.d * N)
    top = tree.depth - N
    viol_i = []
    thin = []
    for lvl in range(top + 1):
        ch = tree.n_children(lvl, N)
        for v in np.nonzero(ch > K)[0]:
            viol_i.append((lvl, int(v), int(ch[v])))
        thin.append(ch <= K - 1)
    viol_ii = []
    count = np.zeros(1, dtype=np.int64)
    last = min(tree.depth, top + 1)
    for n in range(1, last + 1):
        par = tree.parents[n]
        count = count[par] + thin[n - 1][par]
        bad = np.nonzero(count < n / P - 1e-12)[0]
        viol_ii.extend((n, int(v), int(count[v])) for v in bad)
    return TreeReport(K, not viol_i, not viol_ii, viol_i, viol_ii, last)


def growth_formula(K: int, N: int, P: float, n: int) -> float:
    """(K-1)^{n/(PN)} K^{n/N - n/(PN)}."""
    e = n / (P * N)
    return (K - 1) ** e * K ** (n / N - e)


@dataclass
class RamsResult:
    bound: int
    actual: int
    min_mass: Fraction
    formula: float
    masses: list = field(repr=False)


def rams_measures(tree: BoxTree, N: int, n: int) -> list[list[Fraction]]:
    """For each offset b < N: unit mass spread evenly over level b, then pushed down
    N generations at a time, each vertex splitting its mass evenly over its
    descendants N levels below (a final partial step reaches level n)."""
    out = []
    for b in range(min(N, n + 1)):
        size = tree.level_size(b)
        mass = [Fraction(1, size)] * size
        lvl = b
        while lvl < n:
            step = min(N, n - lvl)
            idx = np.arange(tree.level_size(lvl + step))
            for k in range(lvl + step, lvl, -1):
                idx = tree.parents[k][idx]
            counts = np.bincount(idx, minlength=tree.level_size(lvl))
            mass = [mass[int(a)] / int(counts[int(a)]) for a in idx]
            lvl += step
        out.append(mass)
    return out


def rams_bound(tree: BoxTree, N: int, P: float, n: int) -> RamsResult:
    """Upper bound for the number of level-n vertices from the averaged measures.

    With m the smallest, over level-n vertices v, of max_b mu_b(v), the
    average measure gives every vertex mass >= m/N, so there are at most N/m
    of them.  The measures are exact rationals.
    """
    if n % N:
        raise ValueError("n must be a multiple of N")
    rep = verify_tree_properties(tree, N, P) if tree.depth >= N else None
    if rep is not None and not (rep.prop_i and rep.prop_ii):
        raise ValueError("tree violates property (i) or (ii); run verify_tree_properties")
    if not tree.is_leveled():
        raise ValueError("every vertex above the bottom level needs a child")
    masses = rams_measures(tree, N, n)
    for mu in masses:
        if sum(mu) != 1:
            raise AssertionError("mass not conserved")
    m = min(max(mu[v] for mu in masses) for v in range(tree.level_size(n)))
    bound = math.floor(Fraction(N) / m)
    K = 2 ** (tree.d * N)
    return RamsResult(bound, tree.level_size(n), m, growth_formula(K, N, P, n), masses)


# ---------------------------------------------------------------------------
# oracles for d = 1 style trees with N = 1
# ---------------------------------------------------------------------------

def max_count_dp(K: int, P: float, n: int) -> int:
    """Largest number of level-n vertices over trees with at most K children per vertex
    in which every vertex at level m has >= m/P strict ancestors with <= K - 1 children."""

    @lru_cache(maxsize=None)
    def best(level: int, thin: int) -> int:
        if thin < level / P - 1e-12:
            return 0
        if level == n:
            return 1
        return max((K - 1) * best(level + 1, thin + 1), K * best(level + 1, thin))

    return best(0, 0)


def enumerate_trees(K: int, height: int) -> Iterator[tuple]:
    """All rooted trees (children as sorted multisets) of height <= ``height``, <= K children each."""

    @lru_cache(maxsize=None)
    def trees(h: int) -> tuple:
        if h == 0:
            return ((),)
        sub = trees(h - 1)
        out = []

        def grow(start: int, acc: tuple):
            out.append(acc)
            if len(acc) == K:
                return
            for i in range(start, len(sub)):
                grow(i, acc + (sub[i],))

        grow(0, ())
        return tuple(out)

    yield from trees(height)


def admissible_trees(K: int, P: float, n: int) -> list[tuple]:
    """Every leveled tree of height n (up to isomorphism) with at most K children per
    vertex whose level-m vertices all have >= m/P strict ancestors with <= K - 1 children.

    Subtrees are generated per (level, thin ancestor count) and pruned as soon as
    the count falls short, so only admissible trees are ever built.
    """
    from itertools import combinations_with_replacement

    @lru_cache(maxsize=None)
    def subtrees(level: int, thin: int) -> tuple:
        if thin < level / P - 1e-12:
            return ()
        if level == n:
            return ((),)
        out = []
        for k in range(1, K + 1):
            kids = subtrees(level + 1, thin + (k < K))
            out.extend(combinations_with_replacement(kids, k))
        return tuple(out)

    return list(subtrees(0, 0))


def brute_force_max_count(K: int, P: float, n: int, d: int = 1) -> tuple[int, int]:
    """(max #level-n vertices, number of admissible trees) by enumeration; N = 1."""
    if 2 ** d != K:
        raise ValueError("K must equal 2^d")
    if n == 0:
        return 1, 1
    best, admissible = 0, 0
    for nested in enumerate_trees(K, n):
        tree = BoxTree.from_nested(d, nested)
        if tree.depth != n or not tree.is_leveled():
            continue
        rep = verify_tree_properties(tree, 1, P)
        if rep.prop_i and rep.prop_ii:
            admissible += 1
            best = max(best, tree.level_size(n))
    return best, admissible


def fit_growth_constant(K: int, N: int, P: float, counts: dict) -> float:
    """Smallest C with count(n) <= C * growth_formula(n) on the given sample."""
    return max(c / growth_formula(K, N, P, n) for n, c in counts.items())


__all__ = [
    "box_count", "DimensionFit", "minkowski_fit", "porosity_bound", "BoxTree", "TreeReport",
    "verify_tree_properties", "growth_formula", "RamsResult", "rams_measures", "rams_bound",
    "max_count_dp", "enumerate_trees", "admissible_trees", "brute_force_max_count", "fit_growth_constant",
]
