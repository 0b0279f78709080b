"""Piecewise-expanding maps of the circle and integer matrix maps of the torus.

A map is a finite list of branches, each injective on its half-open
domain with a closed-form inverse, so transfer-operator entries can be
computed by exact interval overlap.  Supported branch formulas: affine
and monotone quadratic in 1D, integer-matrix affine on the 2-torus.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import BoundaryError, ConfigError, ParameterError, ResolutionWarning
from .phase import (Grid, PartitionSpec, PointDescriptor, partition_from_labels,
                    torus_delta)


# ---------------------------------------------------------------------------
# branches

@dataclass(frozen=True)
class Branch1D:
    """One monotone branch y = c0 + c1*x + c2*x^2 on [lo, hi)."""

    lo: float
    hi: float
    coeffs: tuple  # (c0, c1) or (c0, c1, c2)

    def __post_init__(self):
        if not (0.0 <= self.lo < self.hi <= 1.0):
            raise ConfigError("branch domain must satisfy 0 <= lo < hi <= 1")
        if len(self.coeffs) not in (2, 3):
            raise ConfigError("coeffs must be (c0, c1) or (c0, c1, c2)")
        d0, d1 = self.deriv(self.lo), self.deriv(self.hi)
        if d0 * d1 <= 0.0:
            raise ConfigError("branch derivative must not change sign")

    def value(self, x):
        c = self.coeffs
        y = c[0] + c[1] * np.asarray(x, dtype=float)
        if len(c) == 3:
            y = y + c[2] * np.asarray(x, dtype=float) ** 2
        return y

    def deriv(self, x):
        c = self.coeffs
        if len(c) == 2:
            return c[1] * np.ones_like(np.asarray(x, dtype=float)) if np.ndim(x) else c[1]
        return c[1] + 2.0 * c[2] * np.asarray(x, dtype=float)

    def inverse(self, y):
        """Closed-form inverse on the branch image (y unwrapped, not mod 1)."""
        c = self.coeffs
        y = np.asarray(y, dtype=float)
        if len(c) == 2:
            return (y - c[0]) / c[1]
        # quadratic formula, root selection by branch domain
        a2, a1, a0 = c[2], c[1], c[0] - y
        disc = np.sqrt(np.maximum(a1 * a1 - 4.0 * a2 * a0, 0.0))
        r1 = (-a1 + disc) / (2.0 * a2)
        r2 = (-a1 - disc) / (2.0 * a2)
        mid = 0.5 * (self.lo + self.hi)
        return np.where(np.abs(r1 - mid) <= np.abs(r2 - mid), r1, r2)

    @property
    def s_branch(self) -> float:
        """Backward contraction sup 1/|h'| (derivative is monotone)."""
        return 1.0 / min(abs(float(self.deriv(self.lo))),
                         abs(float(self.deriv(self.hi))))

    @property
    def image(self) -> tuple:
        """Unwrapped image interval (lo', hi')."""
        ya, yb = float(self.value(self.lo)), float(self.value(self.hi))
        return (ya, yb) if ya <= yb else (yb, ya)


# ---------------------------------------------------------------------------
# map specification

@dataclass(frozen=True)
class MapSpec:
    """A piecewise-expanding map of T^1 or an integer-matrix map of T^2.

    `check_expanding` may be disabled to evaluate maps that fail the
    backward-contraction requirement s < 1; the certified machinery
    always validates s itself.
    """

    dimension: int
    kind: str                       # "affine_1d" | "quadratic_1d" | "affine_2d"
    branches: tuple = ()            # Branch1D tuple (1D kinds)
    matrix: tuple = ()              # ((a,b),(c,d)) integer entries (2D)
    offset: tuple = (0.0, 0.0)
    holder_alpha: float = 1.0
    check_expanding: bool = True

    def __post_init__(self):
        if self.dimension == 1:
            if not self.branches:
                raise ConfigError("1D map needs at least one branch")
            br = tuple(sorted(self.branches, key=lambda b: b.lo))
            object.__setattr__(self, "branches", br)
            if abs(br[0].lo) > 1e-12 or abs(br[-1].hi - 1.0) > 1e-12:
                raise ConfigError("branch domains must cover [0, 1)")
            for a, b in zip(br, br[1:]):
                if abs(a.hi - b.lo) > 1e-12:
                    raise ConfigError("branch domains must tile [0, 1) without gaps")
                # injectivity into the circle needs image length <= 1
            for b in br:
                im = b.image
                if im[1] - im[0] > 1.0 + 1e-12:
                    raise ConfigError("branch image longer than the circle")
        elif self.dimension == 2:
            A = np.asarray(self.matrix, dtype=float)
            if A.shape != (2, 2) or not np.allclose(A, np.round(A)):
                raise ConfigError("2D maps need an integer 2x2 matrix")
            if abs(np.linalg.det(A)) < 0.5:
                raise ConfigError("matrix must be invertible")
        else:
            raise ConfigError("dimension must be 1 or 2")
        if self.check_expanding and self.s >= 1.0:
            raise ParameterError(f"map is not uniformly expanding: s = {self.s:.6g}")

    # -- basic data ---------------------------------------------------------

    @property
    def cuts(self) -> tuple:
        """Interior continuity-partition boundaries (1D)."""
        return tuple(b.lo for b in self.branches[1:])

    @property
    def s(self) -> float:
        """Backward contraction bound for the whole map."""
        if self.dimension == 1:
            return max(b.s_branch for b in self.branches)
        A = np.asarray(self.matrix, dtype=float)
        return float(1.0 / np.linalg.svd(A, compute_uv=False).min())

    @property
    def kappa(self) -> int:
        """Complexity of the continuity partition.

        1D: each cut point lies on the boundary of two arcs.  2D: the
        branch domains are parallelogram translates whose boundary lines
        cross transversally, four domains per crossing with two pieces
        each.
        """
        if self.dimension == 1:
            return 2 if len(self.branches) > 1 else 0
        return 8 if abs(np.linalg.det(np.asarray(self.matrix))) > 1.5 else 0

    @property
    def n_branches(self) -> int:
        if self.dimension == 1:
            return len(self.branches)
        return int(round(abs(np.linalg.det(np.asarray(self.matrix)))))

    def content_key(self) -> tuple:
        if self.dimension == 1:
            return (self.kind, tuple((b.lo, b.hi, b.coeffs) for b in self.branches))
        return (self.kind, tuple(map(tuple, self.matrix)), tuple(self.offset))

    # -- evaluation ---------------------------------------------------------

    def branch_index(self, x) -> np.ndarray:
        cuts = np.asarray(self.cuts)
        return np.searchsorted(cuts, np.asarray(x, dtype=float) % 1.0, side="right")

    def evaluate(self, x, strict: bool = False):
        """Apply the map; points land in [0, 1).

        With strict=True a point lying exactly on a continuity boundary
        raises BoundaryError instead of being resolved by the half-open
        convention.
        """
        if self.dimension == 1:
            xv = np.asarray(x, dtype=float) % 1.0
            if strict and np.isin(xv, np.asarray(self.cuts)).any():
                raise BoundaryError("point on a continuity-partition boundary")
            idx = self.branch_index(xv)
            y = np.empty_like(xv)
            for k, b in enumerate(self.branches):
                mask = idx == k
                if mask.any():
                    y[mask] = b.value(xv[mask])
            y %= 1.0
            return y if np.ndim(x) else float(y)
        A = np.asarray(self.matrix, dtype=float)
        xv = np.atleast_2d(np.asarray(x, dtype=float)) % 1.0
        y = (xv @ A.T + np.asarray(self.offset)) % 1.0
        return y if np.ndim(x) > 1 else y[0]

    def derivative(self, x):
        """Branch derivative at x (1D)."""
        xv = np.asarray(x, dtype=float) % 1.0
        idx = self.branch_index(xv)
        d = np.empty_like(xv)
        for k, b in enumerate(self.branches):
            mask = idx == k
            if mask.any():
                d[mask] = b.deriv(xv[mask])
        return d if np.ndim(x) else float(d)

    def locate_element(self, x) -> np.ndarray:
        """Index of the continuity-partition element containing each point."""
        if self.dimension == 1:
            return self.branch_index(x)
        A = np.asarray(self.matrix, dtype=float)
        xv = np.atleast_2d(np.asarray(x, dtype=float)) % 1.0
        img = xv @ A.T + np.asarray(self.offset)
        k = np.floor(img + 1e-12).astype(np.int64)
        lo = k.min(axis=0)
        span = k.max(axis=0) - lo + 1
        return (k[:, 0] - lo[0]) * span[1] + (k[:, 1] - lo[1])

    def partition_spec(self, grid: Grid) -> PartitionSpec:
        """Grid-aligned continuity partition with exact cut descriptors (1D)."""
        labels = self.locate_element(grid.centers())
        p = partition_from_labels(grid, labels)
        if self.dimension == 1 and self.cuts:
            cutpts = [PointDescriptor(0.0)] + [PointDescriptor(c) for c in self.cuts]
            bnd = []
            for k in range(p.n_elements):
                left = cutpts[k]
                right = cutpts[(k + 1) % len(cutpts)]
                bnd.append((left, right))
            p = PartitionSpec(grid, p.elements, tuple(bnd))
        return p

    def to_config(self) -> dict:
        if self.dimension == 1:
            return {"kind": self.kind,
                    "branches": [[b.lo, b.hi, list(b.coeffs)] for b in self.branches]}
        return {"kind": self.kind, "matrix": [list(r) for r in self.matrix],
                "offset": list(self.offset)}


# ---------------------------------------------------------------------------
# families

def affine_map(cuts: Sequence[float], slopes: Sequence[float],
               offsets: Sequence[float], check_expanding: bool = True) -> MapSpec:
    """Piecewise-affine circle map from interior cuts, slopes, offsets."""
    bounds = [0.0] + list(cuts) + [1.0]
    if len(slopes) != len(bounds) - 1 or len(offsets) != len(slopes):
        raise ConfigError("need one slope and offset per branch")
    branches = tuple(Branch1D(bounds[k], bounds[k + 1], (float(offsets[k]), float(slopes[k])))
                     for k in range(len(slopes)))
    return MapSpec(1, "affine_1d", branches, check_expanding=check_expanding)


def full_branch_map(cuts: Sequence[float]) -> MapSpec:
    """Lebesgue-preserving full-branch map: each piece maps onto [0, 1)."""
    bounds = [0.0] + list(cuts) + [1.0]
    slopes = [1.0 / (bounds[k + 1] - bounds[k]) for k in range(len(bounds) - 1)]
    offsets = [-bounds[k] * slopes[k] for k in range(len(slopes))]
    return affine_map(cuts, slopes, offsets)


def doubling_map() -> MapSpec:
    return full_branch_map([0.5])


def tripling_map() -> MapSpec:
    return full_branch_map([1.0 / 3.0, 2.0 / 3.0])


def beta_map(beta: float) -> MapSpec:
    """x -> beta*x mod 1 with the usual ceil(beta) branches."""
    if beta <= 1.0:
        raise ConfigError("beta must exceed 1")
    nb = int(math.ceil(beta))
    cuts = [k / beta for k in range(1, nb) if k / beta < 1.0]
    slopes = [beta] * (len(cuts) + 1)
    offsets = [-float(k) for k in range(len(cuts) + 1)]
    return affine_map(cuts, slopes, offsets)


def quadratic_full_branch(eps: float, cut: float = 0.5) -> MapSpec:
    """Smooth two-branch map with curvature eps, reducing to doubling at 0.

    Each branch is the monotone quadratic q(t) = (c1*t + eps*t^2)/L with
    q(L) = 1 on a domain of length L, so branches stay full and inverses
    stay closed-form.
    """
    branches = []
    for lo, hi in ((0.0, cut), (cut, 1.0)):
        L = hi - lo
        c2 = eps
        c1 = (1.0 - c2 * L * L) / L
        if c1 <= 1.0:
            raise ConfigError("eps too large for an expanding branch")
        # y = c1*(x-lo) + c2*(x-lo)^2 expanded in x
        branches.append(Branch1D(lo, hi, (c1 * (-lo) + c2 * lo * lo, c1 - 2.0 * c2 * lo, c2)))
    return MapSpec(1, "quadratic_1d", tuple(branches))


def matrix_map(matrix, offset=(0.0, 0.0), check_expanding: bool = True) -> MapSpec:
    return MapSpec(2, "affine_2d", matrix=tuple(map(tuple, matrix)),
                   offset=tuple(offset), check_expanding=check_expanding)


def map_from_config(rec: dict) -> MapSpec:
    kind = rec["kind"]
    if kind in ("affine_1d", "quadratic_1d"):
        branches = tuple(Branch1D(lo, hi, tuple(co)) for lo, hi, co in rec["branches"])
        return MapSpec(1, kind, branches,
                       check_expanding=rec.get("check_expanding", True))
    if kind == "full_branch_1d":
        return full_branch_map(rec["cuts"])
    if kind == "beta_1d":
        return beta_map(rec["beta"])
    if kind == "affine_2d":
        return matrix_map(rec["matrix"], rec.get("offset", (0.0, 0.0)),
                          rec.get("check_expanding", True))
    raise ConfigError(f"unknown map kind {kind!r}")


# ---------------------------------------------------------------------------
# sequences

@dataclass(frozen=True)
class MapSequence:
    """Finite nonstationary schedule; `at(step)` is 1-based like F_m."""

    maps: tuple

    def __post_init__(self):
        if not self.maps:
            raise ConfigError("empty map sequence")
        dims = {m.dimension for m in self.maps}
        if len(dims) != 1:
            raise ConfigError("mixed dimensions in one sequence")
        object.__setattr__(self, "maps", tuple(self.maps))

    def __len__(self) -> int:
        return len(self.maps)

    @property
    def dimension(self) -> int:
        return self.maps[0].dimension

    def at(self, step: int) -> MapSpec:
        if not 1 <= step <= len(self.maps):
            raise ConfigError(f"step {step} outside schedule of length {len(self.maps)}")
        return self.maps[step - 1]

    @staticmethod
    def constant(m: MapSpec, length: int) -> "MapSequence":
        return MapSequence((m,) * length)

    @staticmethod
    def from_schedule(family: Callable, params: Sequence) -> "MapSequence":
        return MapSequence(tuple(family(p) for p in params))


# ---------------------------------------------------------------------------
# expansion and itinerary structure

def expansion_bound(m: MapSpec) -> float:
    """sup over branches of the backward contraction ||D(h^-1)||."""
    return m.s


def matrix_backward_contraction(matrix) -> float:
    """Spectral norm of A^-1, i.e. 1 / (smallest singular value of A)."""
    sv = np.linalg.svd(np.asarray(matrix, dtype=float), compute_uv=False)
    return float(1.0 / sv.min())


def _raw_itineraries(seq: MapSequence, m: int, points: np.ndarray) -> np.ndarray:
    cols = []
    x = np.array(points, dtype=float, copy=True)
    for step in range(1, m + 1):
        f = seq.at(step)
        cols.append(f.locate_element(x))
        x = f.evaluate(x)
    return np.stack(cols, axis=1)


def dynamical_partition(seq: MapSequence, m: int, grid: Grid) -> PartitionSpec:
    """Joint continuity partition of the m-step composition.

    Cells are labeled by the itinerary of continuity-partition elements
    visited by their center orbit.  Off-center probe points detect
    itinerary classes too thin to own any cell center; those trigger a
    ResolutionWarning rather than being silently merged.
    """
    if m < 1:
        raise ConfigError("m must be >= 1")
    centers = grid.centers()
    raw = _raw_itineraries(seq, m, centers)
    _, labels = np.unique(raw, axis=0, return_inverse=True)
    h = grid.spacing
    if grid.dimension == 1:
        probes = [centers - 0.25 * h, centers + 0.25 * h]
    else:
        probes = [centers + np.array(d) * 0.25 * h
                  for d in ((-1, -1), (-1, 1), (1, -1), (1, 1))]
    raw_probe = np.unique(np.concatenate(
        [_raw_itineraries(seq, m, p % 1.0) for p in probes]), axis=0)
    missing = _rows_difference(raw_probe, np.unique(raw, axis=0))
    if missing:
        warnings.warn(f"{missing} itinerary class(es) thinner than the grid",
                      ResolutionWarning)
    return partition_from_labels(grid, labels)


def _rows_difference(a: np.ndarray, b: np.ndarray) -> int:
    sa = {tuple(r) for r in a}
    sb = {tuple(r) for r in b}
    return len(sa - sb)


def complexity_sequence(seq: MapSequence, holes, m: int, grid: Grid) -> list:
    """Boundary complexity of the survivor-restricted itinerary partition,
    for each horizon k = 1..m.

    Holes contribute their preimage boundaries through the escaped-cell
    mask, evaluated at grid resolution.
    """
    from .phase import partition_complexity  # local import keeps deps one-way
    centers = grid.centers()
    out = []
    alive = np.ones(grid.total_cells, dtype=bool)
    x = np.array(centers, copy=True)
    raw = []
    for k in range(1, m + 1):
        f = seq.at(k)
        raw.append(f.locate_element(x))
        x = f.evaluate(x)
        hk = holes.at(k) if holes is not None else None
        if hk is not None:
            alive &= ~hk.contains(x)
        stacked = np.stack(raw, axis=1)
        _, labels = np.unique(stacked, axis=0, return_inverse=True)
        merged = np.where(alive, labels, -1)
        if (merged == -1).all():
            out.append(0)
            continue
        part = partition_from_labels(grid, merged)
        keep = [k2 for k2, u in enumerate(np.unique(merged)) if u != -1]
        descs = tuple(part.boundary[k2] for k2 in keep)
        if all(len(d) == 0 for d in descs):
            out.append(0)
        else:
            out.append(_descriptor_complexity(descs))
    return out


def _descriptor_complexity(desc_groups) -> int:
    from .phase import _candidate_points, _contains
    flat = [d for grp in desc_groups for d in grp]
    if not flat:
        return 0
    best, seen = 0, set()
    for q in _candidate_points(flat):
        key = tuple(round(float(c) % 1.0, 9) for c in q)
        if key in seen:
            continue
        seen.add(key)
        best = max(best, sum(1 for d in flat if _contains(d, q)))
    return best


# ---------------------------------------------------------------------------
# complexity-expansion balance

def unit_ball_volume(N: int) -> float:
    """Volume of the N-dimensional Euclidean unit ball."""
    return math.pi ** (N / 2.0) / math.gamma(N / 2.0 + 1.0)


def balance_check(s_T: float, kappa_T: float, alpha: float, N: int) -> tuple:
    """Value and verdict of the complexity-expansion balance inequality

        s_T^alpha + (4 s_T kappa_T / (1 - s_T)) * xi_{N-1}/xi_N  <  1.
    """
    if not 0.0 < s_T < 1.0:
        raise ParameterError("need 0 < s_T < 1")
    if kappa_T < 0 or N < 1 or not 0.0 < alpha <= 1.0:
        raise ParameterError("bad kappa, alpha, or dimension")
    value = s_T ** alpha + (4.0 * s_T * kappa_T / (1.0 - s_T)) \
        * unit_ball_volume(N - 1) / unit_ball_volume(N)
    return value, value < 1.0


# ---------------------------------------------------------------------------
# distance in the map topology

def _cut_distance(f: MapSpec, g: MapSpec) -> float:
    worst = 0.0
    for a, b in zip(f.cuts, g.cuts):
        worst = max(worst, float(torus_delta(a, b)))
    return worst


def _holder_quotient(u_f, u_g, xs: np.ndarray, alpha: float, rng) -> float:
    if xs.size < 2:
        return 0.0
    k = min(256, xs.size)
    ii = rng.integers(0, xs.size, k)
    jj = rng.integers(0, xs.size, k)
    keep = ii != jj
    ii, jj = ii[keep], jj[keep]
    du = (u_f(xs[ii]) - u_g(xs[ii])) - (u_f(xs[jj]) - u_g(xs[jj]))
    dx = np.abs(xs[ii] - xs[jj])
    return float(np.max(np.abs(du) / dx ** alpha)) if ii.size else 0.0


def perturbation_distance(f: MapSpec, g: MapSpec, samples: int = 4096,
                          tol: float = 1e-9, seed: int = 0):
    """Smallest delta making g a delta-perturbation of f, or None.

    Checks the partition distance (per-element interval Hausdorff and
    cut displacement) and the C^{1+alpha} distance of branch differences
    away from a delta-neighborhood of both partitions' boundaries,
    evaluated on sample points.  Returns None when the maps are not
    comparable (different kind, dimension, or branch count).
    """
    if f.dimension != g.dimension or f.kind != g.kind \
            or f.n_branches != g.n_branches:
        return None
    if f.dimension == 2:
        if f.matrix != g.matrix:
            return None
        d = float(np.max(torus_delta(np.asarray(f.offset), np.asarray(g.offset))))
        return d
    if f.content_key() == g.content_key():
        return 0.0

    rng = np.random.default_rng(seed)
    xs_all = (np.arange(samples) + 0.5) / samples
    alpha = min(f.holder_alpha, g.holder_alpha)
    cutd = _cut_distance(f, g)
    bounds_f = np.asarray((0.0,) + f.cuts)
    bounds_g = np.asarray((0.0,) + g.cuts)

    def close(delta: float) -> bool:
        if cutd >= delta:
            return False
        # element Hausdorff equals max endpoint displacement for arcs
        for bf, bg in zip(f.branches, g.branches):
            if max(float(torus_delta(bf.lo, bg.lo)),
                   float(torus_delta(bf.hi % 1.0, bg.hi % 1.0))) >= delta:
                return False
        dist_bnd = np.minimum(
            np.min(torus_delta(xs_all[:, None], bounds_f[None, :]), axis=1),
            np.min(torus_delta(xs_all[:, None], bounds_g[None, :]), axis=1))
        for k, (bf, bg) in enumerate(zip(f.branches, g.branches)):
            lo, hi = max(bf.lo, bg.lo), min(bf.hi, bg.hi)
            mask = (xs_all >= lo) & (xs_all < hi) & (dist_bnd > delta)
            xs = xs_all[mask]
            if xs.size == 0:
                continue
            c0 = float(np.max(torus_delta(bf.value(xs) % 1.0, bg.value(xs) % 1.0)))
            c1 = float(np.max(np.abs(bf.deriv(xs) - bg.deriv(xs))))
            ch = _holder_quotient(bf.deriv, bg.deriv, xs, alpha, rng)
            if c0 + c1 + ch >= delta:
                return False
        return True

    lo, hi = 0.0, 2.0
    if not close(hi):
        return None
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if mid <= tol:
            break
        if close(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo <= tol * max(1.0, hi):
            break
    return hi
