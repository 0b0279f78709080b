"""Strong seminorms and the estimates built on them.

Total variation (1D, cyclic) and the oscillation seminorm (sup over a
dyadic ladder of scales of the averaged oscillation over metric balls)
measure density regularity.  On top of them: conditional expectations,
cone membership, the conditional-expectation control bounds for a
certified block, and empirical Lasota-Yorke certification.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .errors import (CertificateError, ConfigError, DegenerateParametersWarning,
                     ParameterError, PreconditionError)
from .phase import Grid, PartitionSpec, diam_lambda, metric_diam
from .transfer import GridDensity, block_operator

NONNEG_TOL = 1e-12  # float dust allowed below zero after matrix products


# ---------------------------------------------------------------------------
# seminorms

def total_variation(phi: GridDensity) -> float:
    """Cyclic total variation.  1D: sum of |jumps| around the circle.
    2D: jumps across cell edges weighted by edge length."""
    v = phi.values
    if phi.grid.dimension == 1:
        return float(np.abs(np.diff(np.r_[v, v[0]])).sum())
    n = phi.grid.n
    w = v.reshape(n, n)
    jumps = np.abs(w - np.roll(w, 1, axis=0)).sum() \
        + np.abs(w - np.roll(w, 1, axis=1)).sum()
    return float(jumps / n)


@dataclass(frozen=True)
class OscParams:
    """Oscillation-seminorm parameters: Hölder exponent and scale bound."""

    alpha: float
    eps0: float

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError("alpha must lie in (0, 1]")
        if self.eps0 <= 0.0:
            raise ConfigError("eps0 must be positive")


def _window_halfwidth(eps: float, h: float) -> int:
    # cells overlapping the open ball of radius eps around a cell center
    return int(math.floor(eps / h + 0.5 - 1e-12))


def oscillation_seminorm(phi: GridDensity, p: OscParams,
                         return_profile: bool = False):
    """sup over the ladder eps in {cell_diameter * 2^j} of
    eps^(-alpha) * integral of osc(phi, B_eps(x)) dx.

    Balls have radius eps; on the grid a ball is the set of cells it
    overlaps (a square window in 2D).  The ladder realizes the supremum
    up to the documented scale discretization.
    """
    grid = phi.grid
    h, diam = grid.spacing, grid.cell_diameter
    if p.eps0 < diam - 1e-12:
        raise ConfigError("eps0 below one cell diameter")
    profile = []
    eps = diam
    while eps <= p.eps0 * (1.0 + 1e-12):
        k = _window_halfwidth(eps, h)
        size = 2 * k + 1
        if grid.dimension == 1:
            hi = ndimage.maximum_filter1d(phi.values, size, mode="wrap")
            lo = ndimage.minimum_filter1d(phi.values, size, mode="wrap")
        else:
            w = phi.values.reshape(grid.n, grid.n)
            hi = ndimage.maximum_filter(w, size=size, mode="wrap").ravel()
            lo = ndimage.minimum_filter(w, size=size, mode="wrap").ravel()
        integral = float((hi - lo).mean())
        profile.append((eps, integral / eps ** p.alpha))
        eps *= 2.0
    value = max(v for _, v in profile)
    return (value, profile) if return_profile else value


@dataclass(frozen=True)
class SeminormSpec:
    """Which strong seminorm is in use, with its constants.

    The control-lemma constant M and the partition diameter rule go with
    the seminorm: TV uses M = 1 and the measure diameter; the oscillation
    seminorm uses M = (metric diam Q)^(1-alpha) and the metric diameter.
    """

    kind: str                     # "tv" | "osc"
    osc: OscParams | None = None

    def __post_init__(self):
        if self.kind not in ("tv", "osc"):
            raise ConfigError("seminorm kind must be 'tv' or 'osc'")
        if self.kind == "osc" and self.osc is None:
            raise ConfigError("oscillation seminorm needs OscParams")

    def value(self, phi: GridDensity) -> float:
        if self.kind == "tv":
            return total_variation(phi)
        return oscillation_seminorm(phi, self.osc)

    def diam(self, Q: PartitionSpec) -> float:
        return diam_lambda(Q) if self.kind == "tv" else metric_diam(Q)

    def M(self, Q: PartitionSpec) -> float:
        if self.kind == "tv":
            return 1.0
        return metric_diam(Q) ** (1.0 - self.osc.alpha)

    def to_config(self) -> dict:
        if self.kind == "tv":
            return {"kind": "tv"}
        return {"kind": "osc", "alpha": self.osc.alpha, "eps0": self.osc.eps0}

    @staticmethod
    def from_config(rec: dict) -> "SeminormSpec":
        if rec["kind"] == "tv":
            return SeminormSpec("tv")
        return SeminormSpec("osc", OscParams(rec["alpha"], rec["eps0"]))


# ---------------------------------------------------------------------------
# conditional expectation and the cone

def conditional_expectation(phi: GridDensity, Q: PartitionSpec) -> GridDensity:
    """Element-wise average of phi (cells have equal measure), as a
    piecewise-constant density.  Mass is preserved exactly."""
    if Q.grid != phi.grid:
        raise ConfigError("partition and density grids differ")
    out = np.empty_like(phi.values)
    for cells in Q.elements:
        out[cells] = phi.values[cells].mean()
    return GridDensity(phi.grid, out)


def element_expectations(phi: GridDensity, Q: PartitionSpec) -> np.ndarray:
    return np.array([phi.values[cells].mean() for cells in Q.elements])


class ConeCheck(NamedTuple):
    ok: bool
    margin: float
    seminorm_value: float
    min_expectation: float


def cone_member(phi: GridDensity, a: float, Q: PartitionSpec,
                sem: SeminormSpec) -> ConeCheck:
    """Membership in the cone {phi >= 0, phi not a.e. 0, |phi|_s <= a E[phi|Q]}
    (the per-element form: the seminorm is dominated by a times the
    smallest conditional expectation).  Margin = a*minE - |phi|_s."""
    if a <= 0.0:
        raise ParameterError("aperture a must be positive")
    vmin = float(phi.values.min())
    sval = sem.value(phi)
    emin = float(element_expectations(phi, Q).min())
    margin = a * emin - sval
    ok = vmin >= -NONNEG_TOL and phi.mass > 0.0 and margin >= 0.0
    return ConeCheck(ok, margin, sval, emin)


# ---------------------------------------------------------------------------
# control bounds for a certified block

class ControlReport(NamedTuple):
    lower_ok: bool
    upper_ok: bool
    e_min: float
    e_max: float
    lower_bound: float
    upper_bound: float


def control_bounds_check(seq, holes, i: int, T: int, Q: PartitionSpec,
                         zeta1: float, zeta2: float, a: float, M: float,
                         phi: GridDensity, sem: SeminormSpec,
                         cache=None, check_mixing: bool = True) -> ControlReport:
    """Two-sided bound on E[L_block phi | Q] for a cone density phi:

        (zeta1 - zeta2*(a/M)*d) * mass <= E[...] <= zeta2*(1 + (a/M)*d) * mass

    with d the partition diameter in the seminorm's convention.  The
    block is steps i..i+T-1.  Preconditions: phi in the cone, and the
    block mixes on Q within (zeta1, zeta2)."""
    check = cone_member(phi, a, Q, sem)
    if not check.ok:
        raise PreconditionError(f"phi not in the cone: margin {check.margin:.3g}")
    block = block_operator(seq, holes, i, T, phi.grid, cache)
    if check_mixing:
        from .mixing import mixing_ratios
        rmin, rmax = mixing_ratios(block, Q, 1)
        if not (zeta1 < rmin and rmax < zeta2):
            raise PreconditionError(
                f"block ratios [{rmin:.4g}, {rmax:.4g}] escape ({zeta1}, {zeta2})")
    d = sem.diam(Q)
    lo_coef = zeta1 - zeta2 * (a / M) * d
    if lo_coef <= 0.0:
        warnings.warn("lower control bound is vacuous (zeta1 <= zeta2*a*d/M)",
                      DegenerateParametersWarning)
    mass = phi.mass
    e = element_expectations(block.apply(phi), Q)
    lower = lo_coef * mass
    upper = zeta2 * (1.0 + (a / M) * d) * mass
    return ControlReport(bool(e.min() >= lower - NONNEG_TOL),
                         bool(e.max() <= upper + NONNEG_TOL),
                         float(e.min()), float(e.max()), lower, upper)


# ---------------------------------------------------------------------------
# empirical Lasota-Yorke certification

@dataclass(frozen=True)
class LYCertificate:
    """Certified (theta, C) for |L_{F_{kT1}} phi|_s <= theta^{kT1} |phi|_s + C ||phi||,
    verified on a seeded ensemble for k = 1..max_k."""

    T1: int
    theta: float
    C: float
    seminorm: dict
    ensemble: dict          # size, seed, grid dimension and n, member kinds
    max_k: int

    def to_json(self) -> str:
        return json.dumps({"T1": self.T1, "theta": self.theta, "C": self.C,
                           "seminorm": self.seminorm, "ensemble": self.ensemble,
                           "max_k": self.max_k})

    @staticmethod
    def from_json(text: str) -> "LYCertificate":
        rec = json.loads(text)
        return LYCertificate(rec["T1"], rec["theta"], rec["C"], rec["seminorm"],
                             rec["ensemble"], rec["max_k"])


ENSEMBLE_KINDS = ("constant", "step", "blocks")


def ly_ensemble(grid: Grid, size: int, seed: int) -> list:
    """Deterministic density ensemble with a spread of seminorm values:
    constants, two-level steps, and random piecewise-constant profiles."""
    rng = np.random.default_rng(seed)
    members = []
    total = grid.total_cells
    for j in range(size):
        kind = ENSEMBLE_KINDS[j % len(ENSEMBLE_KINDS)]
        if kind == "constant":
            v = np.full(total, float(rng.uniform(0.2, 3.0)))
        elif kind == "step":
            v = np.full(total, float(rng.uniform(0.0, 0.5)))
            start = int(rng.integers(0, total))
            width = int(rng.integers(1, total // 2 + 1))
            idx = (start + np.arange(width)) % total
            v[idx] += float(rng.uniform(0.5, 4.0))
        else:
            nblocks = int(rng.integers(2, 64))
            heights = rng.uniform(0.0, 4.0, nblocks)
            v = np.repeat(heights, total // nblocks)
            v = np.r_[v, np.full(total - v.size, heights[-1])]
        members.append(GridDensity(grid, v))
    return members


THETA_LATTICE = np.round(np.arange(0.005, 1.0, 0.005), 6)


def _c_lattice_value(c_needed: float) -> float:
    """Smallest lattice constant 1e-12 * 2^t covering the needed C (C > 0)."""
    if c_needed <= 1e-12:
        return 1e-12
    t = math.ceil(math.log2(c_needed / 1e-12))
    return 1e-12 * 2.0 ** t


def estimate_LY(seq, holes, T1: int, sem: SeminormSpec, ensemble_size: int,
                k_max: int, grid: Grid, seed: int = 0,
                cache=None) -> LYCertificate:
    """Smallest lattice (theta, C) making the block inequality hold for
    every ensemble member and every k <= k_max.

    Selection minimizes the additive constant first, then takes the
    smallest theta achieving it (the frontier point closest to a pure
    power bound).  Raises CertificateError with a witness if no theta
    below 1 admits a finite constant.
    """
    if len(seq) < k_max * T1:
        raise ConfigError("map sequence shorter than k_max * T1")
    from .transfer import schedule_operators, apply_operators
    ops = schedule_operators(seq, holes, k_max * T1, grid, cache)
    members = ly_ensemble(grid, ensemble_size, seed)
    s0 = np.array([sem.value(phi) for phi in members])
    mass0 = np.array([phi.mass for phi in members])
    svals = np.empty((ensemble_size, k_max))
    for j, phi in enumerate(members):
        traj = apply_operators(phi, ops, keep_all=True)
        for k in range(1, k_max + 1):
            svals[j, k - 1] = sem.value(traj[k * T1])

    kpow = np.arange(1, k_max + 1) * T1
    c_needed = np.empty(THETA_LATTICE.size)
    for t, theta in enumerate(THETA_LATTICE):
        gap = svals - np.outer(s0, theta ** kpow)
        c_needed[t] = max(0.0, float((gap / mass0[:, None]).max()))
    c_star = c_needed.min()
    if not np.isfinite(c_star) or c_star > 1e9:
        j_bad = int(np.unravel_index(np.argmax(svals), svals.shape)[0])
        raise CertificateError(
            f"no admissible (theta, C); worst ensemble member index {j_bad}")
    t_sel = int(np.argmax(c_needed <= c_star + 1e-12))
    theta = float(THETA_LATTICE[t_sel])
    C = _c_lattice_value(c_needed[t_sel])

    # replay audit before certifying
    bound = np.outer(s0, theta ** kpow) + C * mass0[:, None]
    if (svals > bound + 1e-9).any():
        j_bad, k_bad = np.unravel_index(np.argmax(svals - bound), svals.shape)
        raise CertificateError(
            f"selected (theta={theta}, C={C}) fails replay at member {j_bad}, "
            f"k={k_bad + 1}")
    return LYCertificate(
        T1, theta, C, sem.to_config(),
        {"size": ensemble_size, "seed": seed, "dimension": grid.dimension,
         "n": grid.n, "kinds": list(ENSEMBLE_KINDS)}, k_max)


def verify_ly(cert: LYCertificate, seq, holes, grid: Grid,
              seed: int | None = None, cache=None):
    """Replay a certificate on its stored ensemble (or a fresh seed).
    Returns (ok, violations) where violations list (member, k, excess)."""
    from .transfer import schedule_operators, apply_operators
    sem = SeminormSpec.from_config(cert.seminorm)
    use_seed = cert.ensemble["seed"] if seed is None else seed
    members = ly_ensemble(grid, cert.ensemble["size"], use_seed)
    ops = schedule_operators(seq, holes, cert.max_k * cert.T1, grid, cache)
    violations = []
    for j, phi in enumerate(members):
        s0, m0 = sem.value(phi), phi.mass
        traj = apply_operators(phi, ops, keep_all=True)
        for k in range(1, cert.max_k + 1):
            sk = sem.value(traj[k * cert.T1])
            bound = cert.theta ** (k * cert.T1) * s0 + cert.C * m0
            if sk > bound + 1e-9:
                violations.append((j, k, sk - bound))
    return len(violations) == 0, violations
