"""Cone analytics: aperture/block-length selection, Hilbert-metric
distance bounds, the Birkhoff contraction factor, and the derived rate
constants (Delta_0, Lambda, C_0, C_Lip).

The cone with aperture a consists of nonnegative nonzero densities whose
strong seminorm is at most a times their smallest conditional
expectation on a reference partition Q.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (ConfigError, ParameterError, PreconditionError,
                     SelectionError)
from .phase import Grid, PartitionSpec
from .seminorm import (SeminormSpec, cone_member, element_expectations)
from .transfer import GridDensity, block_operator


@dataclass(frozen=True)
class ConeParams:
    """Aperture, contraction target, block length, and partition data.

    Q is None in analytic mode (no partition selected yet); then `d`
    records the largest admissible partition diameter instead of the
    selected one.  E is the certified mixing time of the reference map
    on Q when one was computed.
    """

    a: float
    sigma: float
    T: int
    zeta1: float
    zeta2: float
    seminorm: SeminormSpec
    Q: PartitionSpec | None = None
    d: float = 0.0
    M: float = 1.0
    E: int | None = None

    def __post_init__(self):
        if not 0.0 < self.sigma < 1.0:
            raise ParameterError("sigma must lie in (0, 1)")
        if self.a <= 0.0 or self.T < 1:
            raise ParameterError("need a > 0 and T >= 1")
        if not (0.0 < self.zeta1 < 1.0 < self.zeta2):
            raise ParameterError("need 0 < zeta1 < 1 < zeta2")

    @property
    def adM(self) -> float:
        """The recurring combination a * d / M."""
        return self.a * self.d / self.M

    def audit(self, theta_LY: float, C_LY: float, T1: int,
              E: int | None = None) -> list:
        """Replay the three parameter inequalities; returns failure strings."""
        fails = []
        if not 0.0 < self.sigma < 1.0:
            fails.append("(P1) sigma outside (0,1)")
        if self.T % T1 != 0 or self.T < T1:
            fails.append("(P2) T not a positive multiple of T1")
        e = E if E is not None else self.E
        if e is not None and self.T < e:
            fails.append(f"(P2) T={self.T} below mixing time E={e}")
        lo = self.zeta1 - self.zeta2 * self.adM
        if lo <= 0.0:
            fails.append("(P3) zeta1 - zeta2*a*d/M not positive")
        elif (self.a * theta_LY ** self.T + C_LY) / lo > self.sigma * self.a * (1 + 1e-12):
            fails.append("(P3) (a*theta^T + C)/(zeta1 - zeta2*a*d/M) exceeds sigma*a")
        return fails

    def to_config(self) -> dict:
        return {"a": self.a, "sigma": self.sigma, "T": self.T,
                "zeta1": self.zeta1, "zeta2": self.zeta2,
                "seminorm": self.seminorm.to_config(), "d": self.d,
                "M": self.M, "E": self.E,
                "Q": None if self.Q is None else json.loads(self.Q.to_json())}


@dataclass(frozen=True)
class RateConstants:
    delta0: float
    lam: float
    c0: float
    c_lip: float


# ---------------------------------------------------------------------------
# parameter selection

def select_parameters(zeta1: float, zeta2: float, theta_LY: float, C_LY: float,
                      T1: int, sem: SeminormSpec,
                      partition_family=None, base_map=None,
                      sigma: float = 0.5, i_max: int = 24,
                      max_rounds: int = 40) -> ConeParams:
    """Ordered selection of (sigma, T, a, Q):

    grow T until theta^T/(zeta1/2) < sigma; take the smallest aperture
    a = max(C/(sigma*zeta1/2 - theta^T), 1) on its power-of-two lattice;
    take the first partition in the family with zeta2*a*d/M <= zeta1/2;
    grow T to at least the mixing time E of the base map on it.  Growing
    T shrinks the required aperture, so the whole procedure reruns from
    the larger T until it stabilizes.

    With partition_family=None the procedure stops after the aperture
    step and reports the admissible-diameter bound in `d`.
    """
    if not 0.0 < theta_LY < 1.0:
        raise ParameterError("theta_LY must lie in (0, 1)")
    if C_LY < 0.0:
        raise ParameterError("C_LY must be nonnegative")
    if not (0.0 < zeta1 < 1.0 < zeta2):
        raise ParameterError("need 0 < zeta1 < 1 < zeta2")
    if not 0.0 < sigma < 1.0:
        raise ParameterError("sigma must lie in (0, 1)")

    half = zeta1 / 2.0
    T = T1
    while theta_LY ** T / half >= sigma:
        T += T1
        if T > 10_000 * T1:
            raise SelectionError("theta_LY too close to 1: T diverges")

    for _ in range(max_rounds):
        denom = sigma * half - theta_LY ** T
        a = max(C_LY / denom if C_LY > 0.0 else 0.0, 1.0)
        while (a * theta_LY ** T + C_LY) / half > sigma * a:
            a *= 2.0

        if partition_family is None:
            # analytic mode: report the diameter the partition must meet
            if sem.kind == "tv":
                d_max = half / (zeta2 * a)
            else:
                d_max = (half / (zeta2 * a)) ** (1.0 / sem.osc.alpha)
            return ConeParams(a, sigma, T, zeta1, zeta2, sem, None, d_max, 1.0)

        chosen = None
        for Q in partition_family:
            d, M = sem.diam(Q), sem.M(Q)
            if zeta2 * a * d / M <= half:
                chosen = (Q, d, M)
                break
        if chosen is None:
            raise SelectionError(
                f"partition family exhausted: need zeta2*a*d/M <= {half:.4g} "
                f"with a = {a:.4g}")
        Q, d, M = chosen

        E = None
        if base_map is not None:
            from .mixing import find_mixing_time
            E = find_mixing_time(base_map, Q, zeta1, zeta2, i_max)
            if E is None:
                raise SelectionError(
                    f"base map shows no mixing time on the selected partition "
                    f"within i_max = {i_max}")
        if E is None or T >= E:
            return ConeParams(a, sigma, T, zeta1, zeta2, sem, Q, d, M, E)
        T = T1 * math.ceil(E / T1)
    raise SelectionError("parameter selection did not stabilize")


# ---------------------------------------------------------------------------
# constants

def delta0(cp: ConeParams) -> float:
    """Diameter bound for the image cone inside the full cone."""
    lo = cp.zeta1 - cp.zeta2 * cp.adM
    if lo <= 0.0:
        raise ParameterError("zeta1 - zeta2*a*d/M must be positive")
    return 2.0 * math.log((1.0 + cp.sigma) / (1.0 - cp.sigma)) \
        + 2.0 * math.log(cp.zeta2 * (1.0 + cp.adM) / lo)


def birkhoff_factor(delta: float) -> float:
    """Contraction factor tanh(delta/4) of a positive map with image
    diameter delta; an infinite diameter contracts nothing."""
    if delta < 0.0:
        raise ParameterError("delta must be nonnegative")
    if math.isinf(delta):
        return 1.0
    return math.tanh(delta / 4.0)


def c_lip(cp: ConeParams) -> float:
    """Lipschitz constant of the normalized block operator in L1."""
    lo = cp.zeta1 - cp.zeta2 * cp.adM
    if lo <= 0.0:
        raise ParameterError("zeta1 - zeta2*a*d/M must be positive")
    return 2.0 / lo


def rate_constants(cp: ConeParams) -> RateConstants:
    """Delta_0, per-step rate Lambda = tanh(Delta_0/4)^(1/T), C_Lip, and
    the prefactor C_0 = C_Lip * max(Delta_0, 1) * e^Delta_0 / tanh^2(Delta_0/4)."""
    d0 = delta0(cp)
    tq = birkhoff_factor(d0)
    lam = tq ** (1.0 / cp.T)
    cl = c_lip(cp)
    c0 = cl * max(d0, 1.0) * math.exp(d0) * tq ** (-2.0)
    return RateConstants(d0, lam, c0, cl)


def hilbert_distance_bound(phi_star: GridDensity, psi_star: GridDensity,
                           cp: ConeParams) -> float:
    """Upper bound on the projective distance between two images of a
    certified block, from the spread of their conditional-expectation
    ratios:  2 log((1+sigma)/(1-sigma)) + log sup(r) - log inf(r)."""
    if cp.Q is None:
        raise ConfigError("hilbert_distance_bound needs a selected partition")
    for name, phi in (("phi", phi_star), ("psi", psi_star)):
        chk = cone_member(phi, cp.sigma * cp.a, cp.Q, cp.seminorm)
        if not chk.ok:
            raise PreconditionError(
                f"{name} not in the contracted cone: margin {chk.margin:.3g}")
    e_phi = element_expectations(phi_star, cp.Q)
    e_psi = element_expectations(psi_star, cp.Q)
    if (e_phi <= 0.0).any() or (e_psi <= 0.0).any():
        raise PreconditionError("zero conditional expectation on an element")
    r = e_psi / e_phi
    return 2.0 * math.log((1.0 + cp.sigma) / (1.0 - cp.sigma)) \
        + math.log(float(r.max())) - math.log(float(r.min()))


# ---------------------------------------------------------------------------
# sampled contraction verification

def sample_cone_density(grid: Grid, Q: PartitionSpec, a: float,
                        sem: SeminormSpec, rng, max_blocks: int = 64) -> GridDensity:
    """Random density in the aperture-a cone: a piecewise-constant
    perturbation of the uniform density, scaled so the seminorm stays a
    definite fraction of the cone budget."""
    total = grid.total_cells
    nblocks = int(rng.integers(2, max_blocks))
    heights = rng.uniform(0.0, 1.0, nblocks)
    u = np.repeat(heights, total // nblocks)
    u = np.r_[u, np.full(total - u.size, heights[-1])]
    u -= u.mean()
    base = GridDensity(grid, u + 1.0)
    su = sem.value(GridDensity(grid, u))
    if su == 0.0:
        return GridDensity(grid, np.ones(total))
    e_u = element_expectations(GridDensity(grid, u), Q)
    t = float(rng.uniform(0.2, 0.9))
    c_cone = t * a / (su - t * a * float(e_u.min()))
    c_pos = 0.99 / abs(float(u.min())) if u.min() < 0.0 else np.inf
    c = min(c_cone, c_pos)
    phi = GridDensity(grid, 1.0 + c * u)
    assert cone_member(phi, a, Q, sem).ok
    return phi


class ContractionReport(NamedTuple):
    ok: bool
    worst_ratio: float
    violations: list


def verify_cone_contraction(seq, holes, i: int, cp: ConeParams,
                            samples: int = 100, seed: int = 0,
                            theta_LY: float | None = None,
                            C_LY: float = 0.0, T1: int = 1,
                            cache=None) -> ContractionReport:
    """Sampled check that the block of steps i..i+T-1 maps the aperture-a
    cone into the sigma*a cone.  Reports the worst |L phi|_s/(a minE)
    ratio; contraction means it stays at or below sigma."""
    if cp.Q is None:
        raise ConfigError("verify_cone_contraction needs a selected partition")
    if theta_LY is not None:
        fails = cp.audit(theta_LY, C_LY, T1)
        if fails:
            raise PreconditionError("; ".join(fails))
    rng = np.random.default_rng(seed)
    block = block_operator(seq, holes, i, cp.T, cp.Q.grid, cache)
    worst = 0.0
    violations = []
    for j in range(samples):
        phi = sample_cone_density(cp.Q.grid, cp.Q, cp.a, cp.seminorm, rng)
        img = block.apply(phi)
        chk = cone_member(img, cp.sigma * cp.a, cp.Q, cp.seminorm)
        if chk.min_expectation > 0.0:
            worst = max(worst, chk.seminorm_value / (cp.a * chk.min_expectation))
        if not chk.ok:
            violations.append((j, chk.margin))
    return ContractionReport(len(violations) == 0, worst, violations)
