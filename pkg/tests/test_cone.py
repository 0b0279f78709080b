import numpy as np
import pytest
from mpmath import mp, mpf

from opendyn.cone import (ConeParams, birkhoff_factor, c_lip, delta0,
                          hilbert_distance_bound, rate_constants,
                          sample_cone_density, select_parameters,
                          verify_cone_contraction)
from opendyn.errors import (ConfigError, ParameterError, PreconditionError,
                            SelectionError)
from opendyn.maps import MapSequence, doubling_map
from opendyn.phase import Grid, dyadic_partition
from opendyn.seminorm import SeminormSpec, cone_member, estimate_LY
from opendyn.transfer import GridDensity

TV = SeminormSpec.from_config({"kind": "tv"})

mp.dps = 60


def mp_delta0(sigma, zeta1, zeta2, adm):
    s, z1, z2, x = mpf(sigma), mpf(zeta1), mpf(zeta2), mpf(adm)
    return 2 * mp.log((1 + s) / (1 - s)) + 2 * mp.log(z2 * (1 + x) / (z1 - z2 * x))


def mp_rate(sigma, zeta1, zeta2, adm, T):
    d0 = mp_delta0(sigma, zeta1, zeta2, adm)
    tanh = mp.tanh(d0 / 4)
    lam = tanh ** (mpf(1) / T)
    clip = 2 / (mpf(zeta1) - mpf(zeta2) * mpf(adm))
    c0 = clip * max(d0, mpf(1)) * mp.e ** d0 / tanh ** 2
    return d0, tanh, lam, clip, c0


def test_cone_params_validation():
    with pytest.raises(ParameterError):
        ConeParams(a=1.0, sigma=1.5, T=1, zeta1=0.9, zeta2=1.1, seminorm=TV)
    with pytest.raises(ParameterError):
        ConeParams(a=-1.0, sigma=0.5, T=1, zeta1=0.9, zeta2=1.1, seminorm=TV)
    with pytest.raises(ParameterError):
        ConeParams(a=1.0, sigma=0.5, T=1, zeta1=1.1, zeta2=0.9, seminorm=TV)


def test_audit_flags_each_inequality():
    cp = ConeParams(a=1.0, sigma=0.5, T=2, zeta1=0.9, zeta2=1.1, seminorm=TV,
                    d=0.25, M=1.0)
    # T below the mixing time
    fails = cp.audit(theta_LY=0.5, C_LY=0.0, T1=1, E=4)
    assert any("mixing time" in f for f in fails)
    # contraction inequality violated for theta close to 1
    fails2 = cp.audit(theta_LY=0.99, C_LY=1.0, T1=1, E=1)
    assert any("sigma*a" in f for f in fails2)
    # degenerate lower coefficient
    cp3 = ConeParams(a=10.0, sigma=0.5, T=2, zeta1=0.9, zeta2=1.1, seminorm=TV,
                     d=0.25, M=1.0)
    fails3 = cp3.audit(theta_LY=0.5, C_LY=0.0, T1=1, E=1)
    assert any("not positive" in f for f in fails3)


def test_select_parameters_analytic_worked_case():
    # zeta = (0.9, 1.1), theta = 0.5, C = 1, T1 = 1, sigma = 0.5:
    # T = 3 (0.125/0.45 < 0.5), a = 1/(0.225 - 0.125) = 10,
    # admissible diameter bound = 0.45 / (1.1 * 10)
    cp = select_parameters(0.9, 1.1, 0.5, 1.0, 1, TV)
    assert cp.T == 3
    assert abs(cp.a - 10.0) < 1e-12
    assert cp.Q is None
    assert abs(cp.d - 0.45 / 11.0) < 1e-12


def test_select_parameters_certified_doubling_fixpoint():
    # with the dyadic pool and the doubling map the analytic T = 3 pick
    # needs 32 arcs whose mixing time is 5 > 3; the rerun from T = 5
    # settles at a = 5.16..., 16 arcs, E = 4 <= 5
    g = Grid(1, 4096)
    pool = [dyadic_partition(g, L) for L in range(1, 9)]
    cp = select_parameters(0.9, 1.1, 0.5, 1.0, 1, TV, pool, doubling_map(),
                           0.5, 16)
    assert cp.T == 5
    assert abs(cp.a - 5.161290322580645) < 1e-12
    assert len(cp.Q.elements) == 16
    assert abs(cp.d - 0.0625) < 1e-15
    assert cp.E == 4
    assert cp.audit(0.5, 1.0, 1, cp.E) == []


def test_select_parameters_tiny_C_uses_floor_aperture():
    g = Grid(1, 4096)
    pool = [dyadic_partition(g, L) for L in range(1, 9)]
    cp = select_parameters(0.9, 1.1, 0.5, 1e-12, 1, TV, pool, doubling_map(),
                           0.5, 16)
    assert cp.a == 1.0
    assert cp.T == 3
    assert cp.E == 2


def test_select_parameters_input_validation():
    with pytest.raises(ParameterError):
        select_parameters(0.9, 1.1, 1.5, 1.0, 1, TV)
    with pytest.raises(ParameterError):
        select_parameters(0.0, 1.1, 0.5, 1.0, 1, TV)
    with pytest.raises(SelectionError):
        # pool has only partitions too coarse for the required diameter
        g = Grid(1, 4096)
        select_parameters(0.9, 1.1, 0.5, 1.0, 1, TV,
                          [dyadic_partition(g, 1)], doubling_map(), 0.5, 16)


def test_constants_worked_oracle():
    cp = ConeParams(a=1.0, sigma=0.5, T=8, zeta1=0.9, zeta2=1.1, seminorm=TV,
                    d=1.0 / 11, M=1.0)
    assert abs(delta0(cp) - 3.008154793552548) < 1e-14
    assert abs(birkhoff_factor(delta0(cp)) - 0.6363636363636362) < 1e-14
    assert abs(c_lip(cp) - 2.5) < 1e-15
    rc = rate_constants(cp)
    assert abs(rc.lam - 0.9450682418782621) < 1e-14
    assert abs(rc.c0 - 376.0577185154148) < 1e-10


def test_constants_against_high_precision():
    rng = np.random.default_rng(123)
    for _ in range(50):
        sigma = float(rng.uniform(0.1, 0.9))
        zeta1 = float(rng.uniform(0.5, 0.99))
        zeta2 = float(rng.uniform(1.01, 1.5))
        T = int(rng.integers(1, 20))
        # keep the lower coefficient safely positive
        adm = float(rng.uniform(0.0, 0.8) * zeta1 / zeta2)
        a = float(rng.uniform(1.0, 50.0))
        cp = ConeParams(a=a, sigma=sigma, T=T, zeta1=zeta1, zeta2=zeta2,
                        seminorm=TV, d=adm / a, M=1.0)
        d0_ref, tanh_ref, lam_ref, clip_ref, c0_ref = mp_rate(
            sigma, zeta1, zeta2, adm, T)
        assert abs(delta0(cp) - float(d0_ref)) <= 1e-12 * abs(float(d0_ref))
        assert abs(birkhoff_factor(delta0(cp)) - float(tanh_ref)) \
            <= 1e-12 * float(tanh_ref)
        assert abs(c_lip(cp) - float(clip_ref)) <= 1e-12 * float(clip_ref)
        rc = rate_constants(cp)
        assert abs(rc.lam - float(lam_ref)) <= 1e-12 * float(lam_ref)
        assert abs(rc.c0 - float(c0_ref)) <= 1e-12 * float(c0_ref)


def test_birkhoff_factor_edges():
    assert birkhoff_factor(np.inf) == 1.0
    assert birkhoff_factor(0.0) == 0.0
    with pytest.raises(ParameterError):
        birkhoff_factor(-1.0)


def test_delta0_requires_positive_lower_coefficient():
    cp = ConeParams(a=10.0, sigma=0.5, T=1, zeta1=0.9, zeta2=1.1, seminorm=TV,
                    d=0.25, M=1.0)
    with pytest.raises(ParameterError):
        delta0(cp)


def test_hilbert_distance_bound_oracle():
    # element ratios r in {1.5, 0.75}: bound = 2 log 3 + log 1.5 - log 0.75
    g = Grid(1, 4096)
    Q = dyadic_partition(g, 1)
    cp = ConeParams(a=8.0, sigma=0.5, T=1, zeta1=0.9, zeta2=1.1, seminorm=TV,
                    Q=Q)
    phi = GridDensity.from_function(g, lambda x: np.where(x < 0.5, 1.5, 0.75))
    psi = GridDensity.uniform(g)
    hb = hilbert_distance_bound(phi, psi, cp)
    want = 2.0 * np.log(3.0) + np.log(1.5) - np.log(0.75)
    assert abs(hb - want) < 1e-12
    assert abs(hb - 2.8903717578961645) < 1e-12


def test_hilbert_distance_bound_preconditions():
    g = Grid(1, 1024)
    Q = dyadic_partition(g, 1)
    cp = ConeParams(a=1.0, sigma=0.5, T=1, zeta1=0.9, zeta2=1.1, seminorm=TV,
                    Q=Q)
    spiky = GridDensity.from_function(g, lambda x: 1.0 + 5.0 * (x < 0.01))
    with pytest.raises(PreconditionError):
        hilbert_distance_bound(spiky, GridDensity.uniform(g), cp)
    cp_noq = ConeParams(a=1.0, sigma=0.5, T=1, zeta1=0.9, zeta2=1.1,
                        seminorm=TV)
    with pytest.raises(ConfigError):
        hilbert_distance_bound(GridDensity.uniform(g),
                               GridDensity.uniform(g), cp_noq)


def test_sample_cone_density_membership():
    g = Grid(1, 2048)
    Q = dyadic_partition(g, 4)
    rng = np.random.default_rng(17)
    for a in (1.0, 5.0, 20.0):
        for _ in range(20):
            phi = sample_cone_density(g, Q, a, TV, rng)
            chk = cone_member(phi, a, Q, TV)
            assert chk.ok
            assert phi.values.min() >= 0.0


def test_verify_cone_contraction_certified():
    g = Grid(1, 4096)
    seq = MapSequence.constant(doubling_map(), 8)
    cert = estimate_LY(seq, None, 1, TV, 16, 4, g, seed=11)
    pool = [dyadic_partition(g, L) for L in range(1, 9)]
    cp = select_parameters(0.9, 1.1, cert.theta, cert.C, 1, TV, pool,
                           doubling_map(), 0.5, 16)
    rep = verify_cone_contraction(seq, None, 1, cp, samples=30, seed=4,
                                  theta_LY=cert.theta, C_LY=cert.C, T1=1)
    assert rep.ok
    assert rep.worst_ratio <= cp.sigma
    assert rep.violations == []


def test_verify_cone_contraction_rejects_bad_params():
    g = Grid(1, 2048)
    seq = MapSequence.constant(doubling_map(), 4)
    bad = ConeParams(a=10.0, sigma=0.5, T=2, zeta1=0.9, zeta2=1.1, seminorm=TV,
                     Q=dyadic_partition(g, 2), d=0.25, M=1.0)
    with pytest.raises(PreconditionError):
        verify_cone_contraction(seq, None, 1, bad, samples=5, seed=0,
                                theta_LY=0.5, C_LY=1.0, T1=1)
