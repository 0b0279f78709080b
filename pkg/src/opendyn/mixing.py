"""Mixing-partition verification and its stability under perturbation.

The mixing condition asks that lambda(J1 intersect F^-i J2)/(lambda(J1)
lambda(J2)) stay inside (zeta1, zeta2) for all element pairs once i
reaches the mixing time E.  Intersection measures come from the Ulam
operator applied to element indicator densities, which is exact for
aligned affine maps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import CertificateError, ConfigError, ParameterError
from .maps import MapSpec, MapSequence, full_branch_map, perturbation_distance
from .holes import HoleSpec, HoleSequence
from .phase import PartitionSpec
from .transfer import UlamOperator, block_operator, build_closed


def _pair_ratios(matrix, Q: PartitionSpec) -> np.ndarray:
    """R[e2, e1] = lambda(J_{e1} intersect F^-1 J_{e2})/(lambda lambda)."""
    grid = Q.grid
    cm = grid.cell_measure
    ne = Q.n_elements
    P = np.zeros((grid.total_cells, ne))
    lam = np.empty(ne)
    for k, cells in enumerate(Q.elements):
        if cells.size == 0:
            raise ConfigError("partition element of zero measure")
        P[cells, k] = 1.0
        lam[k] = cells.size * cm
    V = matrix @ P
    inter = np.empty((ne, ne))
    for k, cells in enumerate(Q.elements):
        inter[k] = V[cells].sum(axis=0) * cm
    return inter / (lam[None, :] * lam[:, None])


def mixing_ratios(map_or_block, Q: PartitionSpec, i: int = 1) -> tuple:
    """Extremes of the pair ratio at time i.

    Accepts a map (its closed operator is applied i times) or a
    prebuilt block operator (i then counts block applications).
    """
    if i < 1:
        raise ConfigError("i must be >= 1")
    if isinstance(map_or_block, UlamOperator):
        op = map_or_block
        if op.grid != Q.grid:
            raise ConfigError("operator and partition grids differ")
    else:
        op = build_closed(map_or_block, Q.grid)
    M = op.matrix
    power = M
    for _ in range(i - 1):
        power = (M @ power).tocsr()
    R = _pair_ratios(power, Q)
    return float(R.min()), float(R.max())


def find_mixing_time(mapspec, Q: PartitionSpec, zeta1: float, zeta2: float,
                     i_max: int = 24):
    """Smallest E <= i_max with all pair ratios inside (zeta1, zeta2) for
    every E <= i <= i_max, or None when the window never stabilizes."""
    if not (0.0 < zeta1 < 1.0 < zeta2):
        raise ParameterError("need 0 < zeta1 < 1 < zeta2")
    op = build_closed(mapspec, Q.grid) if isinstance(mapspec, MapSpec) else mapspec
    M = op.matrix
    ok = np.zeros(i_max + 1, dtype=bool)
    power = None
    for i in range(1, i_max + 1):
        power = M if power is None else (M @ power).tocsr()
        R = _pair_ratios(power, Q)
        ok[i] = zeta1 < R.min() and R.max() < zeta2
    good_tail = np.flatnonzero(~ok[1:])
    if good_tail.size == 0:
        return 1
    E = int(good_tail.max()) + 2  # first index after the last failure
    return E if E <= i_max else None


def block_mixing_ratios(seq, holes, start: int, T: int, Q: PartitionSpec,
                        cache=None) -> tuple:
    """Pair-ratio extremes for the open block of steps start..start+T-1."""
    block = block_operator(seq, holes, start, T, Q.grid, cache)
    return mixing_ratios(block, Q, 1)


# ---------------------------------------------------------------------------
# certificates

@dataclass(frozen=True)
class MixingCertificate:
    zeta1: float
    zeta2: float
    partition: PartitionSpec
    E: int
    ratio_min: float       # observed at i = E
    ratio_max: float
    i_checked: tuple       # (first, last) iterate examined

    def to_json(self) -> str:
        return json.dumps({
            "zeta1": self.zeta1, "zeta2": self.zeta2,
            "partition": json.loads(self.partition.to_json()),
            "E": self.E, "ratio_min": self.ratio_min,
            "ratio_max": self.ratio_max, "i_checked": list(self.i_checked)})

    @staticmethod
    def from_json(text: str) -> "MixingCertificate":
        rec = json.loads(text)
        part = PartitionSpec.from_json(json.dumps(rec["partition"]))
        return MixingCertificate(rec["zeta1"], rec["zeta2"], part, rec["E"],
                                 rec["ratio_min"], rec["ratio_max"],
                                 tuple(rec["i_checked"]))


def certify_mixing(mapspec, Q: PartitionSpec, zeta1: float, zeta2: float,
                   i_max: int = 24) -> MixingCertificate:
    E = find_mixing_time(mapspec, Q, zeta1, zeta2, i_max)
    if E is None:
        raise CertificateError(
            f"no mixing time within i_max = {i_max} for ({zeta1}, {zeta2})")
    rmin, rmax = mixing_ratios(mapspec, Q, E)
    return MixingCertificate(zeta1, zeta2, Q, E, rmin, rmax, (1, i_max))


# ---------------------------------------------------------------------------
# perturbation samplers

def _is_full_branch(m: MapSpec) -> bool:
    if m.dimension != 1:
        return False
    return all(abs(b.image[1] - b.image[0] - 1.0) < 1e-9 for b in m.branches)


def perturb_full_branch(base: MapSpec, delta: float, rng) -> MapSpec:
    """Random full-branch map within perturbation distance delta of the
    base: interior cuts jitter and slopes/offsets follow to keep every
    branch onto the circle.  The distance is verified, shrinking the
    jitter if the first draw lands outside."""
    if delta == 0.0:
        return base
    cuts = np.asarray(base.cuts, dtype=float)
    jitter = rng.uniform(-1.0, 1.0, cuts.size)
    scale = delta / 8.0
    for _ in range(8):
        cand = np.sort(cuts + scale * jitter)
        if cand.size and (cand[0] <= 1e-3 or cand[-1] >= 1.0 - 1e-3
                          or np.diff(np.r_[0.0, cand, 1.0]).min() <= 1e-3):
            scale *= 0.5
            continue
        g = full_branch_map(list(cand))
        dist = perturbation_distance(base, g)
        if dist is not None and dist <= delta:
            return g
        scale *= 0.5
    raise ConfigError("cannot realize a delta-perturbation in this family")


def perturb_offsets(base: MapSpec, delta: float, rng) -> MapSpec:
    """Random translation jitter of every branch (same continuity
    partition, same slopes), always within delta in sup norm."""
    if delta == 0.0:
        return base
    from .maps import Branch1D
    shift = rng.uniform(-0.45 * delta, 0.45 * delta, len(base.branches))
    branches = tuple(
        Branch1D(b.lo, b.hi, (b.coeffs[0] + s,) + tuple(b.coeffs[1:]))
        for b, s in zip(base.branches, shift))
    return MapSpec(1, base.kind, branches)


def default_perturbation(base: MapSpec, delta: float, rng) -> MapSpec:
    if base.dimension == 1 and _is_full_branch(base) and base.cuts:
        return perturb_full_branch(base, delta, rng)
    return perturb_offsets(base, delta, rng)


def random_hole(dimension: int, epsilon: float, rng):
    """Random hole of measure at most epsilon (None when epsilon is 0)."""
    if epsilon == 0.0:
        return None
    if dimension == 1:
        width = epsilon * float(rng.uniform(0.5, 1.0))
        lo = float(rng.uniform(0.0, 1.0))
        return HoleSpec(1, intervals=((lo, (lo + width) % 1.0),))
    area = epsilon * float(rng.uniform(0.5, 1.0))
    w = float(np.sqrt(area) * rng.uniform(0.5, 1.5))
    h = area / w
    x0, y0 = rng.uniform(0.0, 1.0, 2)
    return HoleSpec(2, rects=((x0, (x0 + w) % 1.0, y0, (y0 + h) % 1.0),))


@dataclass(frozen=True)
class StabilityReport:
    ok: bool
    violations: list        # (sample index, ratio_min, ratio_max)
    samples: int
    seed: int
    delta: float
    epsilon: float
    S: int

    def to_json(self) -> str:
        return json.dumps({"ok": self.ok, "violations": self.violations,
                           "samples": self.samples, "seed": self.seed,
                           "delta": self.delta, "epsilon": self.epsilon,
                           "S": self.S})


def stability_check(g: MapSpec, Q: PartitionSpec, zeta1: float, zeta2: float,
                    S: int, delta: float, epsilon: float, samples: int,
                    seed: int = 0, perturb=None, cache=None) -> StabilityReport:
    """Sampled falsification of mixing stability: random length-S
    schedules of delta-perturbations of g with holes of measure at most
    epsilon, each checked for the block pair-ratio window.

    Per-sample RNG streams are spawned from the recorded seed, so a
    report replays exactly.
    """
    if not (0.0 < zeta1 < 1.0 < zeta2):
        raise ParameterError("need 0 < zeta1 < 1 < zeta2")
    if S < 1 or samples < 1:
        raise ConfigError("need S >= 1 and samples >= 1")
    sampler = perturb if perturb is not None else default_perturbation
    streams = [np.random.default_rng(s) for s in
               np.random.SeedSequence(seed).spawn(samples)]
    violations = []
    for j, rng in enumerate(streams):
        maps = MapSequence(tuple(sampler(g, delta, rng) for _ in range(S)))
        holes = HoleSequence(tuple(random_hole(g.dimension, epsilon, rng)
                                   for _ in range(S)))
        block = block_operator(maps, holes, 1, S, Q.grid, cache)
        rmin, rmax = mixing_ratios(block, Q, 1)
        if not (zeta1 < rmin and rmax < zeta2):
            violations.append((j, rmin, rmax))
    return StabilityReport(len(violations) == 0, violations, samples, seed,
                           delta, epsilon, S)
