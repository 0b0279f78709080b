"""Ulam discretization of (open) transfer operators.

M[j, i] = lambda(C_i intersect F^-1 C_j) / lambda(C_i), assembled by
exact interval overlap in 1D (branch inverses are closed-form) and by
polygon clipping in 2D, so closed-map columns sum to 1 up to float
rounding only.  Open operators zero the rows of hole cells, with hole
membership sampled at cell centers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import ConfigError, TotalEscapeError
from .maps import MapSpec, affine_map
from .phase import Grid

MASS_FLOOR = 1e-15  # below this, a density is treated as fully escaped


# ---------------------------------------------------------------------------
# densities

@dataclass
class GridDensity:
    """Piecewise-constant density: values are density heights per cell,
    so the mass is the mean value (cells have measure 1/total)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.total_cells,):
            raise ConfigError("values must have one entry per grid cell")
        self.values = v

    @property
    def mass(self) -> float:
        return float(self.values.mean())

    def copy(self) -> "GridDensity":
        return GridDensity(self.grid, self.values.copy())

    @staticmethod
    def uniform(grid: Grid) -> "GridDensity":
        return GridDensity(grid, np.ones(grid.total_cells))

    @staticmethod
    def indicator(grid: Grid, cells, normalized: bool = False) -> "GridDensity":
        v = np.zeros(grid.total_cells)
        v[np.asarray(cells, dtype=np.int64)] = 1.0
        d = GridDensity(grid, v)
        return d.normalized() if normalized else d

    @staticmethod
    def from_function(grid: Grid, fn) -> "GridDensity":
        return GridDensity(grid, np.asarray(fn(grid.centers()), dtype=float))

    def normalized(self, floor: float = MASS_FLOOR) -> "GridDensity":
        m = self.mass
        if m <= floor:
            raise TotalEscapeError(f"cannot normalize: mass {m:.3g} at or below floor")
        return GridDensity(self.grid, self.values / m)


def normalize(phi: GridDensity, floor: float = MASS_FLOOR) -> GridDensity:
    """Rescale to unit mass; raises TotalEscapeError at (or below) zero mass."""
    return phi.normalized(floor)


def l1_distance(phi: GridDensity, psi: GridDensity) -> float:
    if phi.grid != psi.grid:
        raise ConfigError("densities live on different grids")
    return float(np.abs(phi.values - psi.values).mean())


def escape_mass(phi_sequence) -> list:
    """Per-step escaped mass from a density trajectory [phi_0, ..., phi_m]
    (pass the start density followed by the evolve output)."""
    masses = [d.mass for d in phi_sequence]
    return [masses[k] - masses[k + 1] for k in range(len(masses) - 1)]


# ---------------------------------------------------------------------------
# operators

@dataclass
class UlamOperator:
    grid: Grid
    matrix: sparse.csr_matrix
    hole_mask: np.ndarray | None = None   # rows zeroed (open operator)
    key: tuple = ()

    def apply(self, phi: GridDensity) -> GridDensity:
        if phi.grid != self.grid:
            raise ConfigError("density grid does not match operator grid")
        return GridDensity(self.grid, self.matrix @ phi.values)

    def column_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=0)).ravel()

    def column_sum_error(self) -> float:
        """Max deviation of column sums from 1 (closed operators only;
        open column sums measure per-cell survival, not assembly error)."""
        if self.hole_mask is not None:
            raise ConfigError("column sums of an open operator measure survival")
        return float(np.abs(self.column_sums() - 1.0).max())

    def compose(self, earlier: "UlamOperator") -> "UlamOperator":
        """self after earlier (matrix product, left factor acts last)."""
        if self.grid != earlier.grid:
            raise ConfigError("operators live on different grids")
        return UlamOperator(self.grid, (self.matrix @ earlier.matrix).tocsr(),
                            None, ("compose", self.key, earlier.key))


# ---------------------------------------------------------------------------
# 1D assembly by exact interval overlap

def _branch_entries(branch, n: int):
    """COO entries contributed by one monotone branch.

    Grid-edge preimages are computed with the closed-form inverse; each
    preimage slice is shorter than a cell (backward contraction), so it
    meets at most two source cells.
    """
    h = 1.0 / n
    d0, d1 = branch.lo, branch.hi
    ya, yb = float(branch.value(d0)), float(branch.value(d1))
    increasing = ya <= yb
    y0, y1 = (ya, yb) if increasing else (yb, ya)
    k0, k1 = int(math.floor(y0 * n)), int(math.ceil(y1 * n))
    Y = np.arange(k0, k1 + 1) * h
    Y[0], Y[-1] = y0, y1
    X = np.clip(np.asarray(branch.inverse(Y), dtype=float), d0, d1)
    mid = 0.5 * (Y[:-1] + Y[1:])
    tgt = np.floor((mid % 1.0) * n).astype(np.int64) % n
    Xl = np.minimum(X[:-1], X[1:])
    Xr = np.maximum(X[:-1], X[1:])
    keep = Xr > Xl
    Xl, Xr, tgt = Xl[keep], Xr[keep], tgt[keep]
    i0 = np.clip(np.floor(Xl * n + 1e-15).astype(np.int64), 0, n - 1)
    split = np.minimum(Xr, (i0 + 1) * h)
    rows = [tgt]
    cols = [i0]
    vals = [(split - Xl) / h]
    spill = Xr > split + 1e-18
    rows.append(tgt[spill])
    cols.append(np.clip(i0[spill] + 1, 0, n - 1))
    vals.append((Xr[spill] - split[spill]) / h)
    return rows, cols, vals


def _build_1d(mapspec: MapSpec, grid: Grid) -> sparse.csr_matrix:
    n = grid.n
    rows, cols, vals = [], [], []
    for b in mapspec.branches:
        r, c, v = _branch_entries(b, n)
        rows.extend(r)
        cols.extend(c)
        vals.extend(v)
    return sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n)).tocsr()


# ---------------------------------------------------------------------------
# 2D assembly

def _axis_factor(a: int, off: float, grid1: Grid) -> sparse.csr_matrix:
    """1D matrix for x -> a*x + off mod 1 split into |a| unit-image branches."""
    a = int(a)
    if a == 0:
        raise ConfigError("zero diagonal entry")
    k = abs(a)
    cuts = [j / k for j in range(1, k)]
    spec = affine_map(cuts, [float(a)] * k, [float(off)] * k, check_expanding=False)
    return _build_1d(spec, grid1)


def _clip_axis(poly, axis: int, val: float, keep_le: bool):
    out = []
    m = len(poly)
    for i in range(m):
        p, q = poly[i], poly[(i + 1) % m]
        pin = (p[axis] <= val) if keep_le else (p[axis] >= val)
        qin = (q[axis] <= val) if keep_le else (q[axis] >= val)
        if pin:
            out.append(p)
        if pin != qin:
            t = (val - p[axis]) / (q[axis] - p[axis])
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return out


def _poly_area(poly) -> float:
    if len(poly) < 3:
        return 0.0
    x = np.array([p[0] for p in poly])
    y = np.array([p[1] for p in poly])
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def _build_2d_general(mapspec: MapSpec, grid: Grid) -> sparse.csr_matrix:
    n, h = grid.n, grid.spacing
    A = np.asarray(mapspec.matrix, dtype=float)
    b = np.asarray(mapspec.offset, dtype=float)
    det = abs(float(np.linalg.det(A)))
    unit = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]) * h
    image0 = unit @ A.T
    rows, cols, vals = [], [], []
    for ix in range(n):
        for iy in range(n):
            P0 = image0 + (A @ np.array([ix * h, iy * h])) + b
            poly = [tuple(p) for p in P0]
            gx0 = int(math.floor(P0[:, 0].min() * n))
            gx1 = int(math.ceil(P0[:, 0].max() * n))
            gy0 = int(math.floor(P0[:, 1].min() * n))
            gy1 = int(math.ceil(P0[:, 1].max() * n))
            col = ix * n + iy
            for gx in range(gx0, gx1):
                px = _clip_axis(poly, 0, gx * h, False)
                px = _clip_axis(px, 0, (gx + 1) * h, True)
                if len(px) < 3:
                    continue
                for gy in range(gy0, gy1):
                    py = _clip_axis(px, 1, gy * h, False)
                    py = _clip_axis(py, 1, (gy + 1) * h, True)
                    area = _poly_area(py)
                    if area > 1e-18:
                        rows.append((gx % n) * n + (gy % n))
                        cols.append(col)
                        vals.append(area / (det * h * h))
    return sparse.coo_matrix((vals, (rows, cols)),
                             shape=(n * n, n * n)).tocsr()


# ---------------------------------------------------------------------------
# public assembly

def build_closed(mapspec: MapSpec, grid: Grid) -> UlamOperator:
    """Ulam matrix of the closed map on the given grid."""
    if mapspec.dimension != grid.dimension:
        raise ConfigError("map and grid dimensions differ")
    if mapspec.dimension == 1:
        M = _build_1d(mapspec, grid)
    else:
        A = np.asarray(mapspec.matrix)
        if A[0, 1] == 0 and A[1, 0] == 0:
            g1 = Grid(1, grid.n)
            Mx = _axis_factor(int(A[0, 0]), mapspec.offset[0], g1)
            My = _axis_factor(int(A[1, 1]), mapspec.offset[1], g1)
            M = sparse.kron(Mx, My, format="csr")
        else:
            M = _build_2d_general(mapspec, grid)
    return UlamOperator(grid, M, None, ("closed", mapspec.content_key(), grid.n))


def build_open(mapspec: MapSpec, hole, grid: Grid) -> UlamOperator:
    """Open operator: closed matrix with hole-cell rows zeroed.

    Hole membership is sampled at cell centers, matching the survivor
    indicator convention.
    """
    closed = build_closed(mapspec, grid)
    if hole is None:
        return closed
    mask = hole.contains(grid.centers())
    D = sparse.diags((~mask).astype(float))
    key = ("open", mapspec.content_key(), _hole_key(hole), grid.n)
    return UlamOperator(grid, (D @ closed.matrix).tocsr(), mask, key)


def _hole_key(hole) -> tuple:
    if hole is None:
        return ()
    return (hole.dimension, hole.intervals, hole.rects, hole.disks)


class OperatorCache:
    """Content-addressed cache so repeated schedule steps assemble once."""

    def __init__(self):
        self._store = {}

    def __len__(self) -> int:
        return len(self._store)

    def get(self, mapspec: MapSpec, hole, grid: Grid) -> UlamOperator:
        key = ("open" if hole is not None else "closed",
               mapspec.content_key(), _hole_key(hole), grid.dimension, grid.n)
        op = self._store.get(key)
        if op is None:
            op = build_open(mapspec, hole, grid)
            self._store[key] = op
        return op

    def __len__(self) -> int:
        return len(self._store)


# ---------------------------------------------------------------------------
# evolution

def apply_operators(phi: GridDensity, operators, keep_all: bool = False):
    """Apply operators in order; returns the final density, or the whole
    trajectory [phi_0, ..., phi_m] with keep_all=True."""
    out = [phi]
    cur = phi
    for op in operators:
        cur = op.apply(cur)
        if keep_all:
            out.append(cur)
    return out if keep_all else cur


def evolve(map_seq, hole_seq, phi0: GridDensity, m: int,
           cache: "OperatorCache | None" = None) -> list:
    """Unnormalized open evolution: [phi_1, ..., phi_m] with
    phi_k = (open operator of step k) phi_{k-1}.  Masses are nonincreasing."""
    if m < 1:
        raise ConfigError("m must be >= 1")
    if len(map_seq) < m or (hole_seq is not None and len(hole_seq) < m):
        raise ConfigError("schedules shorter than requested horizon")
    ops = schedule_operators(map_seq, hole_seq, m, phi0.grid, cache)
    return apply_operators(phi0, ops, keep_all=True)[1:]


def schedule_operators(map_seq, hole_seq, m: int, grid: Grid,
                       cache: OperatorCache | None = None) -> list:
    """Per-step open operators for steps 1..m."""
    cache = cache if cache is not None else OperatorCache()
    ops = []
    for i in range(1, m + 1):
        hole = hole_seq.at(i) if hole_seq is not None else None
        ops.append(cache.get(map_seq.at(i), hole, grid))
    return ops


def block_operator(map_seq, hole_seq, start: int, length: int, grid: Grid,
                   cache: OperatorCache | None = None) -> UlamOperator:
    """Product operator for steps start..start+length-1 (later maps act last)."""
    if length < 1:
        raise ConfigError("block length must be >= 1")
    ops = schedule_operators(map_seq, hole_seq, start + length - 1, grid, cache)[start - 1:]
    out = ops[0]
    for op in ops[1:]:
        out = op.compose(out)
    return out


# ---------------------------------------------------------------------------
# export

def export_operator_coo(op: UlamOperator, path: str) -> None:
    """Plain-text COO dump: header line `n nnz`, then `row col value`."""
    coo = op.matrix.tocoo()
    with open(path, "w") as fh:
        fh.write(f"{op.matrix.shape[0]} {coo.nnz}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {float(v)!r}\n")
