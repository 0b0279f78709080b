"""Experiment orchestration: certified memory-loss runs and reports.

A local run holds a schedule of small perturbations of one base map
with drifting holes and tracks the L1 distance between two renormalized
densities.  A global run traverses a parametrized curve of maps slowly
enough that per-sample certificates chain along the curve.  Both share
the same certification pipeline (Lasota-Yorke estimate, parameter
selection, mixing time) and the same evolution core, and both emit a
CSV distance series plus a replayable structured summary.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (CertificateError, ConfigError, ParameterError,
                     TotalEscapeError)
from .phase import Grid, dyadic_partition
from .maps import (MapSequence, MapSpec, doubling_map, full_branch_map,
                   map_from_config, perturbation_distance)
from .holes import HoleSequence, HoleSpec, hole_from_config
from .transfer import (GridDensity, OperatorCache, apply_operators,
                       l1_distance, normalize, schedule_operators)
from .seminorm import LYCertificate, SeminormSpec, cone_member, estimate_LY
from .cone import ConeParams, rate_constants, select_parameters
from .mixing import (block_mixing_ratios, certify_mixing, default_perturbation,
                     random_hole, stability_check)

FIT_FLOOR = 1e-14


# ---------------------------------------------------------------------------
# map families for global traversals

def _slopes_2_to_3(u: float) -> MapSpec:
    """Full-branch three-branch family: branch slopes (2,4,4) at u=0
    moving to (3,3,3) at u=1, all members Lebesgue-preserving."""
    l1 = 0.5 - u / 6.0
    l2 = 0.25 + u / 12.0
    return full_branch_map([l1, l1 + l2])


FAMILIES = {
    "slopes_2_to_3": _slopes_2_to_3,
    "constant_doubling": lambda u: doubling_map(),
}


# ---------------------------------------------------------------------------
# configuration

_DEF_CERT = {"ensemble_size": 24, "k_max": 4, "i_max": 16, "max_level": 8,
             "ly_seed": 11, "stability_samples": 8}


@dataclass
class ExperimentConfig:
    kind: str
    grid: Grid
    horizon: int
    seed: int
    zeta1: float
    zeta2: float
    sigma: float
    T1: int
    seminorm: SeminormSpec
    delta: float
    holes: dict
    psi: dict
    map_rec: dict = field(default_factory=dict)      # local base map
    family: dict = field(default_factory=dict)       # global curve
    certificates: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @staticmethod
    def from_dict(cfg: dict) -> "ExperimentConfig":
        try:
            kind = cfg["kind"]
            if kind not in ("local", "global"):
                raise ConfigError(f"unknown experiment kind {kind!r}")
            g = cfg.get("grid", {})
            grid = Grid(g.get("dimension", 1), g.get("n", 4096))
            horizon = int(cfg["horizon"])
            if horizon < 2:
                raise ConfigError("horizon must be at least 2")
            zeta1 = float(cfg.get("zeta1", 0.8))
            zeta2 = float(cfg.get("zeta2", 1.2))
            sem = SeminormSpec.from_config(cfg.get("seminorm", {"kind": "tv"}))
            cert = dict(_DEF_CERT)
            cert.update(cfg.get("certificates", {}))
            out = ExperimentConfig(
                kind=kind, grid=grid, horizon=horizon,
                seed=int(cfg.get("seed", 0)), zeta1=zeta1, zeta2=zeta2,
                sigma=float(cfg.get("sigma", 0.5)), T1=int(cfg.get("T1", 1)),
                seminorm=sem, delta=float(cfg.get("delta", 0.0)),
                holes=cfg.get("holes", {"kind": "none"}),
                psi=cfg.get("psi", {"kind": "cosine_bump", "amplitude": 0.15}),
                map_rec=cfg.get("map", {}), family=cfg.get("family", {}),
                certificates=cert, raw=cfg)
            if kind == "local" and not out.map_rec:
                raise ConfigError("local run needs a 'map' entry")
            if kind == "global" and not out.family:
                raise ConfigError("global run needs a 'family' entry")
            return out
        except KeyError as exc:
            raise ConfigError(f"missing config key {exc}") from exc

    @staticmethod
    def from_json(text: str) -> "ExperimentConfig":
        return ExperimentConfig.from_dict(json.loads(text))


@dataclass
class RunResult:
    records: list           # dicts: m, mass_phi, mass_psi, l1_distance
    fit: tuple              # (C_fit, lambda_fit, r2)
    constants: dict
    certificates: dict
    flags: dict
    budget: list
    config_echo: dict
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.flags.values())


# ---------------------------------------------------------------------------
# schedule construction

def hole_schedule(rec: dict, m: int, dimension: int, rng) -> HoleSequence:
    kind = rec.get("kind", "none")
    if kind == "none":
        return HoleSequence.closed(m)
    if kind == "static":
        hole = hole_from_config(rec["hole"])
        seq = HoleSequence.static(hole, m)
    elif kind == "drifting_interval":
        w = float(rec["measure"])
        c0 = float(rec.get("center", 0.3))
        v = float(rec.get("velocity", 0.137))
        holes = []
        for k in range(m):
            c = (c0 + k * v) % 1.0
            holes.append(HoleSpec(1, intervals=(((c - w / 2) % 1.0,
                                                 (c + w / 2) % 1.0),)))
        seq = HoleSequence(tuple(holes))
    elif kind == "random_intervals":
        eps = float(rec["epsilon"])
        seq = HoleSequence(tuple(random_hole(dimension, eps, rng)
                                 for _ in range(m)))
    else:
        raise ConfigError(f"unknown hole schedule kind {kind!r}")
    cap = float(rec.get("epsilon_cap", rec.get("measure", rec.get("epsilon", 1.0))))
    for h in seq.holes:
        if h is not None and h.measure() > cap + 1e-12:
            raise ConfigError("hole exceeds the declared measure cap")
    return seq


def build_density(rec: dict, grid: Grid, rng) -> GridDensity:
    kind = rec.get("kind", "uniform")
    if kind == "uniform":
        return GridDensity.uniform(grid)
    if kind == "cosine_bump":
        amp = float(rec.get("amplitude", 0.5))
        phase = float(rec.get("phase", 0.0))
        x = grid.centers()
        if grid.dimension == 1:
            v = 1.0 + amp * np.cos(2.0 * np.pi * (x - phase))
        else:
            v = 1.0 + amp * np.cos(2.0 * np.pi * (x[:, 0] - phase)) \
                * np.cos(2.0 * np.pi * x[:, 1])
        return GridDensity(grid, v)
    if kind == "sawtooth":
        # eigenfunction of the doubling transfer operator (eigenvalue 1/2):
        # useful when a pure cosine would be annihilated in one step
        amp = float(rec.get("amplitude", 0.3))
        x = grid.centers()
        if grid.dimension != 1:
            raise ConfigError("sawtooth density is one-dimensional")
        return GridDensity(grid, 1.0 + amp * (x - 0.5))
    if kind == "blocks":
        nb = int(rec.get("blocks", 16))
        heights = rng.uniform(0.25, 2.0, nb)
        v = np.repeat(heights, grid.total_cells // nb)
        v = np.r_[v, np.full(grid.total_cells - v.size, heights[-1])]
        return GridDensity(grid, v).normalized()
    raise ConfigError(f"unknown density kind {kind!r}")


# ---------------------------------------------------------------------------
# certification pipeline

def _certify(base: MapSpec, grid: Grid, cfg: ExperimentConfig, cache) -> dict:
    cert = cfg.certificates
    ly = estimate_LY(
        MapSequence.constant(base, cert["k_max"] * cfg.T1), None, cfg.T1,
        cfg.seminorm, cert["ensemble_size"], cert["k_max"], grid,
        seed=cert["ly_seed"], cache=cache)
    pool = [dyadic_partition(grid, L) for L in range(1, cert["max_level"] + 1)]
    cp = select_parameters(cfg.zeta1, cfg.zeta2, ly.theta, ly.C, cfg.T1,
                           cfg.seminorm, pool, base, cfg.sigma, cert["i_max"])
    mix = certify_mixing(base, cp.Q, cfg.zeta1, cfg.zeta2, cert["i_max"])
    return {"ly": ly, "cp": cp, "mixing": mix, "rate": rate_constants(cp)}


def _bump_T_for_blocks(cp: ConeParams, mseq, hseq, cfg: ExperimentConfig,
                       cache, ly: LYCertificate, E: int) -> ConeParams:
    """Grow the block length until every open block of the actual
    schedule keeps its pair ratios inside the mixing window."""
    for _ in range(8):
        nblocks = cfg.horizon // cp.T
        ok = True
        for b in range(nblocks):
            lo, hi = block_mixing_ratios(mseq, hseq, 1 + b * cp.T, cp.T,
                                         cp.Q, cache)
            if not (cfg.zeta1 < lo and hi < cfg.zeta2):
                ok = False
                break
        if ok:
            fails = cp.audit(ly.theta, ly.C, cfg.T1, E)
            if fails:
                raise CertificateError("; ".join(fails))
            return cp
        cp = dataclasses.replace(cp, T=cp.T + cfg.T1)
    raise CertificateError("open blocks never satisfied the mixing window")


# ---------------------------------------------------------------------------
# evolution core

def _execute(mseq: MapSequence, hseq: HoleSequence, phi0: GridDensity,
             psi0: GridDensity, m_max: int, grid: Grid, cache,
             sem: SeminormSpec):
    ops = schedule_operators(mseq, hseq, m_max, grid, cache)
    phi, psi = phi0, psi0
    records, peaks = [], []
    peak = max(sem.value(normalize(phi0)), sem.value(normalize(psi0)))
    for k in range(1, m_max + 1):
        phi = ops[k - 1].apply(phi)
        psi = ops[k - 1].apply(psi)
        try:
            phin, psin = normalize(phi), normalize(psi)
        except TotalEscapeError as exc:
            raise TotalEscapeError(f"total escape at step {k}: {exc}") from exc
        peak = max(peak, sem.value(phin), sem.value(psin))
        records.append({"m": k, "mass_phi": phi.mass, "mass_psi": psi.mass,
                        "l1_distance": l1_distance(phin, psin)})
        peaks.append(peak)
    return records, peaks


def _grid_budget(records, peaks, grid: Grid, c_lip_val: float) -> list:
    """Reported discretization budget: each projection step displaces a
    seminorm-V density by at most V*h/2 in L1, and normalization is
    c_lip-Lipschitz, compounding linearly over the horizon."""
    h = grid.spacing
    return [c_lip_val * r["m"] * h * v * 0.5 for r, v in zip(records, peaks)]


def _flags_and_fit(records, budget, rate, fit_r2_min: float = 0.95):
    series = [(r["m"], r["l1_distance"]) for r in records]
    fit = fit_exponential(series)
    bound_ok = all(
        r["l1_distance"] <= rate.c0 * rate.lam ** r["m"] + b + 1e-12
        for r, b in zip(records, budget))
    fit_ok = fit[2] >= fit_r2_min and fit[1] < 1.0
    return fit, bound_ok, fit_ok


# ---------------------------------------------------------------------------
# runs

def run_local(config) -> RunResult:
    """Certified local-theorem run: perturbations of one base map with a
    hole schedule, two cone densities, renormalized distance tracking."""
    cfg = config if isinstance(config, ExperimentConfig) \
        else ExperimentConfig.from_dict(config)
    if cfg.kind != "local":
        raise ConfigError("run_local needs a local config")
    rng = np.random.default_rng(cfg.seed)
    grid, cache = cfg.grid, OperatorCache()
    base = map_from_config(cfg.map_rec)

    certs = _certify(base, grid, cfg, cache)
    ly, cp, mix = certs["ly"], certs["cp"], certs["mixing"]

    maps = []
    for _ in range(cfg.horizon):
        g = default_perturbation(base, cfg.delta, rng)
        d = perturbation_distance(base, g)
        if d is None or d > cfg.delta + 1e-9:
            raise ConfigError("drawn map exceeds the declared delta cap")
        maps.append(g)
    mseq = MapSequence(tuple(maps))
    hseq = hole_schedule(cfg.holes, cfg.horizon, grid.dimension, rng)

    cp = _bump_T_for_blocks(cp, mseq, hseq, cfg, cache, ly, mix.E)
    rate = rate_constants(cp)
    if cfg.horizon < 2 * cp.T:
        raise ConfigError(f"horizon must be at least 2T = {2 * cp.T}")

    phi0 = GridDensity.uniform(grid)
    psi0 = build_density(cfg.psi, grid, rng)
    audit_phi = cone_member(phi0, cp.a, cp.Q, cfg.seminorm)
    audit_psi = cone_member(psi0, cp.a, cp.Q, cfg.seminorm)
    if not (audit_phi.ok and audit_psi.ok):
        raise ConfigError("initial densities fail the cone audit")

    eps_cap = float(cfg.holes.get("measure", cfg.holes.get("epsilon", 0.0)))
    stab = stability_check(base, cp.Q, cfg.zeta1, cfg.zeta2, cp.T, cfg.delta,
                           eps_cap, cfg.certificates["stability_samples"],
                           seed=cfg.seed + 1, cache=cache)

    records, peaks = _execute(mseq, hseq, phi0, psi0, cfg.horizon, grid,
                              cache, cfg.seminorm)
    budget = _grid_budget(records, peaks, grid, rate.c_lip)
    fit, bound_ok, fit_ok = _flags_and_fit(records, budget, rate)

    flags = {"ly_certified": True, "params_audit": True, "mixing_certified": True,
             "stability": stab.ok, "cone_audit": True,
             "bound_dominated": bound_ok, "fit_ok": fit_ok}
    constants = {"delta0": rate.delta0, "lambda": rate.lam, "c0": rate.c0,
                 "c_lip": rate.c_lip, "a": cp.a, "sigma": cp.sigma, "T": cp.T,
                 "zeta1": cp.zeta1, "zeta2": cp.zeta2, "d": cp.d, "M": cp.M,
                 "grid_n": grid.n, "budget_formula": "c_lip*m*h*peak_seminorm/2"}
    certificates = {
        "ly": json.loads(ly.to_json()),
        "mixing": {"E": mix.E, "ratio_min": mix.ratio_min,
                   "ratio_max": mix.ratio_max, "i_checked": list(mix.i_checked)},
        "cone_params": cp.to_config(),
        "stability": json.loads(stab.to_json()),
    }
    return RunResult(records, fit, constants, certificates, flags, budget,
                     cfg.raw)


def _stability_radius(family, u: float, u_lo: float, u_hi: float,
                      delta: float) -> float:
    """Largest parameter increment keeping the family member within the
    certified perturbation distance of the sample point."""
    base = family(u)

    def within(du: float) -> bool:
        for v in (max(u - du, u_lo), min(u + du, u_hi)):
            if v != u:
                d = perturbation_distance(base, family(v))
                if d is None or d > delta:
                    return False
        return True

    span = u_hi - u_lo
    if span == 0.0 or within(span):
        return span if span > 0.0 else 1.0
    lo, hi = 0.0, span
    for _ in range(24):
        mid = 0.5 * (lo + hi)
        if within(mid):
            lo = mid
        else:
            hi = mid
    return lo


def run_global(config) -> RunResult:
    """Certified quasi-static traversal of a map curve: per-sample
    certificates, sampled speed limit, then the shared evolution core."""
    cfg = config if isinstance(config, ExperimentConfig) \
        else ExperimentConfig.from_dict(config)
    if cfg.kind != "global":
        raise ConfigError("run_global needs a global config")
    rng = np.random.default_rng(cfg.seed)
    grid, cache = cfg.grid, OperatorCache()
    fam_rec = cfg.family
    name = fam_rec.get("name")
    if name not in FAMILIES:
        raise ConfigError(f"unknown family {name!r}")
    family = FAMILIES[name]
    u0 = float(fam_rec.get("u_start", 0.0))
    u1 = float(fam_rec.get("u_end", 1.0))
    n_samples = int(fam_rec.get("cert_samples", 5))

    sample_us = np.linspace(u0, u1, max(n_samples, 2))
    sample_certs, xis = [], []
    for s in sample_us:
        c = _certify(family(float(s)), grid, cfg, cache)
        sample_certs.append(c)
        xis.append(_stability_radius(family, float(s), u0, u1, cfg.delta))
    Ts = [c["cp"].T for c in sample_certs]
    sigma_estimate = min(x / (2.0 * t) for x, t in zip(xis, Ts))

    step_rec = fam_rec.get("step", "auto")
    step = sigma_estimate if step_rec == "auto" else float(step_rec)
    if u1 > u0 and step > sigma_estimate + 1e-15:
        raise ConfigError(
            f"parameter step {step:.4g} exceeds the sampled speed limit "
            f"{sigma_estimate:.4g}")

    us = [min(u1, u0 + k * step) if u1 >= u0 else u0 for k in range(cfg.horizon)]
    mseq = MapSequence(tuple(family(u) for u in us))
    hseq = hole_schedule(cfg.holes, cfg.horizon, grid.dimension, rng)

    cp0, ly0, mix0 = (sample_certs[0]["cp"], sample_certs[0]["ly"],
                      sample_certs[0]["mixing"])
    cp0 = _bump_T_for_blocks(cp0, mseq, hseq, cfg, cache, ly0, mix0.E)
    if cfg.horizon < 2 * cp0.T:
        raise ConfigError(f"horizon must be at least 2T = {2 * cp0.T}")
    rates = [c["rate"] for c in sample_certs]
    worst = dataclasses.replace(
        rates[0], delta0=max(r.delta0 for r in rates),
        lam=max(r.lam for r in rates), c0=max(r.c0 for r in rates),
        c_lip=max(r.c_lip for r in rates))

    phi0 = GridDensity.uniform(grid)
    psi0 = build_density(cfg.psi, grid, rng)
    for dens in (phi0, psi0):
        if not cone_member(dens, cp0.a, cp0.Q, cfg.seminorm).ok:
            raise ConfigError("initial densities fail the cone audit")

    records, peaks = _execute(mseq, hseq, phi0, psi0, cfg.horizon, grid,
                              cache, cfg.seminorm)
    budget = _grid_budget(records, peaks, grid, worst.c_lip)
    fit, bound_ok, fit_ok = _flags_and_fit(records, budget, worst)

    flags = {"ly_certified": True, "params_audit": True, "mixing_certified": True,
             "cone_audit": True, "speed_limit": True,
             "bound_dominated": bound_ok, "fit_ok": fit_ok}
    constants = {"delta0": worst.delta0, "lambda": worst.lam, "c0": worst.c0,
                 "c_lip": worst.c_lip, "a": cp0.a, "sigma": cp0.sigma,
                 "T": cp0.T, "zeta1": cfg.zeta1, "zeta2": cfg.zeta2,
                 "grid_n": grid.n, "sigma_estimate": sigma_estimate,
                 "step": step, "xi_samples": xis,
                 "sample_points": [float(s) for s in sample_us],
                 "budget_formula": "c_lip*m*h*peak_seminorm/2"}
    certificates = {
        "per_sample": [{
            "u": float(s),
            "ly": json.loads(c["ly"].to_json()),
            "mixing": {"E": c["mixing"].E, "ratio_min": c["mixing"].ratio_min,
                       "ratio_max": c["mixing"].ratio_max},
            "T": c["cp"].T, "a": c["cp"].a,
        } for s, c in zip(sample_us, sample_certs)],
        "cone_params": cp0.to_config(),
    }
    return RunResult(records, fit, constants, certificates, flags, budget,
                     cfg.raw)


# ---------------------------------------------------------------------------
# fitting and reporting

def fit_exponential(series) -> tuple:
    """(C_fit, Lambda_fit, R2) from least squares on log d_m against m,
    ignoring entries at or below the 1e-14 floor."""
    pts = [(float(m), float(d)) for m, d in series if d > FIT_FLOOR]
    if len(pts) < 3:
        raise ParameterError("need at least 3 points above the fit floor")
    mm = np.array([p[0] for p in pts])
    dd = np.log(np.array([p[1] for p in pts]))
    if np.ptp(dd) == 0.0:
        return float(np.exp(dd[0])), 1.0, 1.0
    slope, intercept = np.polyfit(mm, dd, 1)
    pred = slope * mm + intercept
    ss_res = float(((dd - pred) ** 2).sum())
    ss_tot = float(((dd - dd.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    return float(np.exp(intercept)), float(np.exp(slope)), float(r2)


def emit_report(result: RunResult, out_dir: str, prefix: str = "report") -> dict:
    """Write the CSV distance series and the structured summary.

    CSV schema: m,mass_phi,mass_psi,l1_distance with full-precision
    floats.  Summary sections: config_echo, certificates, constants,
    fit, verdict.  Identical results produce byte-identical files.
    """
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{prefix}.csv")
    with open(csv_path, "w") as fh:
        fh.write("m,mass_phi,mass_psi,l1_distance\n")
        for r in result.records:
            fh.write(f"{r['m']},{float(r['mass_phi'])!r},"
                     f"{float(r['mass_psi'])!r},{float(r['l1_distance'])!r}\n")
    summary = {
        "config_echo": result.config_echo,
        "certificates": result.certificates,
        "constants": dict(result.constants, grid_budget=result.budget),
        "fit": {"C_fit": result.fit[0], "lambda_fit": result.fit[1],
                "r2": result.fit[2]},
        "verdict": {"flags": result.flags, "pass": result.passed,
                    "notes": result.notes},
    }
    summary_path = os.path.join(out_dir, f"{prefix}_summary.json")
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"csv": csv_path, "summary": summary_path}
