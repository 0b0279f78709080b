import warnings

import numpy as np
import pytest

from opendyn.errors import (ConfigError, DegenerateParametersWarning,
                            ParameterError, PreconditionError)
from opendyn.holes import HoleSequence, interval_hole
from opendyn.maps import MapSequence, doubling_map, tripling_map
from opendyn.phase import Grid, dyadic_partition
from opendyn.seminorm import (LYCertificate, SeminormSpec, cone_member,
                              conditional_expectation, control_bounds_check,
                              element_expectations, estimate_LY, ly_ensemble,
                              oscillation_seminorm, total_variation,
                              verify_ly)
from opendyn.transfer import GridDensity, build_closed


TV = SeminormSpec.from_config({"kind": "tv"})


def step_density(g, height=1.0):
    return GridDensity.from_function(
        g, lambda x: height * (x < 0.5).astype(float))


def test_total_variation_step_and_constant():
    g = Grid(1, 1024)
    assert total_variation(GridDensity.uniform(g)) == 0.0
    # cyclic variation of a height-1 arc indicator: two unit jumps
    assert abs(total_variation(step_density(g)) - 2.0) < 1e-12


def test_total_variation_staircase():
    g = Grid(1, 512)
    v = np.zeros(512)
    v[100:200] = 1.5
    v[300:310] = -0.5
    tv = total_variation(GridDensity(g, v))
    assert abs(tv - (2 * 1.5 + 2 * 0.5)) < 1e-12


def test_total_variation_2d_split():
    g = Grid(2, 64)
    phi = GridDensity.from_function(
        g, lambda xy: (xy[:, 0] < 0.5).astype(float))
    # jumps only along x: two length-1 interfaces
    assert abs(total_variation(phi) - 2.0) < 1e-12


def test_oscillation_step_oracle():
    # height-1 step, alpha = 1: eps^-1 * integral(osc) = 2*(2 eps) = 4
    # at every dyadic ladder rung
    g = Grid(1, 4096)
    sem = SeminormSpec.from_config({"kind": "osc", "alpha": 1.0, "eps0": 0.125})
    assert abs(sem.value(step_density(g)) - 4.0) < 1e-12
    val, profile = oscillation_seminorm(step_density(g), sem.osc,
                                        return_profile=True)
    assert abs(val - 4.0) < 1e-12
    for _, rung in profile:
        assert abs(rung - 4.0) < 1e-12


def test_oscillation_alpha_scaling():
    g = Grid(1, 4096)
    semh = SeminormSpec.from_config({"kind": "osc", "alpha": 0.5, "eps0": 0.125})
    # eps^-0.5 * (4 eps) = 4 sqrt(eps): sup at the top rung eps0
    assert abs(semh.value(step_density(g)) - 4.0 * np.sqrt(0.125)) < 1e-12


def test_oscillation_eps0_below_grid_rejected():
    g = Grid(1, 64)
    sem = SeminormSpec.from_config({"kind": "osc", "alpha": 1.0, "eps0": 1e-4})
    with pytest.raises(ConfigError):
        sem.value(GridDensity.uniform(g))


def test_seminorm_regularity_rule():
    g = Grid(1, 1024)
    Q = dyadic_partition(g, 3)
    assert TV.M(Q) == 1.0
    assert abs(TV.diam(Q) - 0.125) < 1e-15
    osc = SeminormSpec.from_config({"kind": "osc", "alpha": 0.5, "eps0": 0.25})
    # M = (metric diam)^(1-alpha), d = metric diam
    assert abs(osc.M(Q) - 0.125 ** 0.5) < 1e-12
    assert abs(osc.diam(Q) - 0.125) < 1e-15


def test_seminorm_config_roundtrip():
    for rec in ({"kind": "tv"},
                {"kind": "osc", "alpha": 0.7, "eps0": 0.25}):
        sem = SeminormSpec.from_config(rec)
        again = SeminormSpec.from_config(sem.to_config())
        assert again.kind == sem.kind
        if sem.kind == "osc":
            assert again.osc.alpha == sem.osc.alpha
            assert again.osc.eps0 == sem.osc.eps0


def test_conditional_expectation_dyadic():
    g = Grid(1, 1024)
    Q = dyadic_partition(g, 1)
    phi = step_density(g, height=2.0)   # 2 on [0,1/2), 0 on [1/2,1)
    e = element_expectations(phi, Q)
    assert np.allclose(e, [2.0, 0.0], atol=1e-12)
    ce = conditional_expectation(phi, Q)
    assert abs(ce.values[:512].mean() - 2.0) < 1e-12
    assert abs(ce.mass - phi.mass) < 1e-12


def test_cone_member_margin():
    g = Grid(1, 1024)
    Q = dyadic_partition(g, 2)
    phi = GridDensity.from_function(
        g, lambda x: 1.0 + 0.1 * np.cos(2 * np.pi * x))
    chk = cone_member(phi, 2.0, Q, TV)
    assert chk.ok
    # margin = a * min element expectation - seminorm
    assert abs(chk.margin - (2.0 * chk.min_expectation - chk.seminorm_value)) < 1e-12
    tight = GridDensity.from_function(
        g, lambda x: 1.0 + 0.9 * np.cos(2 * np.pi * x))
    assert not cone_member(tight, 2.0, Q, TV).ok
    neg = GridDensity.from_function(g, lambda x: np.cos(2 * np.pi * x))
    assert not cone_member(neg, 100.0, Q, TV).ok
    with pytest.raises(ParameterError):
        cone_member(phi, 0.0, Q, TV)


def test_control_bounds_certified_block():
    # level-3 partition: d = 1/8, ratios exact for i >= 3, and
    # zeta2*a*d/M = 0.55 < zeta1 keeps the lower bound informative
    g = Grid(1, 2048)
    Q = dyadic_partition(g, 3)
    seq = MapSequence.constant(doubling_map(), 3)
    rng = np.random.default_rng(5)
    for _ in range(10):
        heights = rng.uniform(0.9, 1.1, 8)
        phi = GridDensity(g, np.repeat(heights, 256))
        rep = control_bounds_check(seq, None, 1, 3, Q, 0.9, 1.1,
                                   a=4.0, M=1.0, phi=phi, sem=TV)
        assert rep.lower_ok and rep.upper_ok
        assert rep.lower_bound <= rep.e_min <= rep.e_max <= rep.upper_bound


def test_control_bounds_cone_precondition():
    g = Grid(1, 2048)
    Q = dyadic_partition(g, 2)
    seq = MapSequence.constant(doubling_map(), 3)
    spike = GridDensity.from_function(g, lambda x: 1.0 + 50.0 * (x < 0.01))
    with pytest.raises(PreconditionError):
        control_bounds_check(seq, None, 1, 3, Q, 0.9, 1.1, a=1.0, M=1.0,
                             phi=spike, sem=TV)


def test_control_bounds_mixing_precondition():
    g = Grid(1, 2048)
    Q = dyadic_partition(g, 4)
    seq = MapSequence.constant(doubling_map(), 1)
    phi = GridDensity.uniform(g)
    # one doubling step cannot mix 16 arcs into a (0.9, 1.1) window
    with pytest.raises(PreconditionError):
        control_bounds_check(seq, None, 1, 1, Q, 0.9, 1.1, a=50.0, M=1.0,
                             phi=phi, sem=TV)


def test_control_bounds_degenerate_warning():
    g = Grid(1, 2048)
    Q = dyadic_partition(g, 2)
    seq = MapSequence.constant(doubling_map(), 3)
    phi = GridDensity.uniform(g)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = control_bounds_check(seq, None, 1, 3, Q, 0.9, 1.1,
                                   a=100.0, M=0.01, phi=phi, sem=TV,
                                   check_mixing=False)
    assert any(issubclass(w.category, DegenerateParametersWarning)
               for w in caught)
    assert rep.lower_ok   # vacuous: the lower coefficient is negative


def test_ly_ensemble_deterministic():
    g = Grid(1, 512)
    e1 = ly_ensemble(g, 12, seed=3)
    e2 = ly_ensemble(g, 12, seed=3)
    assert len(e1) == 12
    for a, b in zip(e1, e2):
        assert np.array_equal(a.values, b.values)


def test_estimate_ly_doubling():
    g = Grid(1, 4096)
    seq = MapSequence.constant(doubling_map(), 4)
    cert = estimate_LY(seq, None, 1, TV, 24, 4, g, seed=11)
    assert 0.0 < cert.theta < 1.0
    assert cert.C > 0.0
    assert cert.theta <= 0.5 + 1e-9
    assert cert.C <= 1e-9
    ok, violations = verify_ly(cert, seq, None, g)
    assert ok and violations == []


def test_estimate_ly_tripling_tighter():
    g = Grid(1, 2187)
    seq = MapSequence.constant(tripling_map(), 4)
    cert = estimate_LY(seq, None, 1, TV, 16, 4, g, seed=2)
    # TV contracts by 1/3 per step: theta lands on the lattice just above,
    # C snaps to the power-of-two lattice over 1e-12
    assert cert.theta <= 1.0 / 3 + 0.01
    assert cert.C <= 2e-9


def test_estimate_ly_open_schedule():
    g = Grid(1, 4096)
    seq = MapSequence.constant(doubling_map(), 4)
    holes = HoleSequence.static(interval_hole(0.3, 0.32), 4)
    cert = estimate_LY(seq, holes, 1, TV, 24, 4, g, seed=11)
    assert 0.0 < cert.theta < 1.0 and cert.C > 0.0
    ok, violations = verify_ly(cert, seq, holes, g)
    assert ok and violations == []


def test_ly_certificate_json_roundtrip():
    g = Grid(1, 1024)
    seq = MapSequence.constant(doubling_map(), 4)
    cert = estimate_LY(seq, None, 1, TV, 8, 4, g, seed=1)
    again = LYCertificate.from_json(cert.to_json())
    assert again.theta == cert.theta
    assert again.C == cert.C
    assert again.T1 == cert.T1
    assert again.max_k == cert.max_k


def test_tv_contraction_property_random_pwc():
    # TV(L phi) <= 0.5 TV(phi) for the doubling operator
    g = Grid(1, 4096)
    op = build_closed(doubling_map(), g)
    rng = np.random.default_rng(0)
    for _ in range(50):
        k = int(rng.integers(2, 40))
        edges = np.sort(rng.integers(1, g.n, k))
        vals = np.repeat(rng.uniform(-1.0, 2.0, k + 1),
                         np.diff(np.r_[0, edges, g.n]))
        phi = GridDensity(g, vals)
        tv0 = total_variation(phi)
        tv1 = total_variation(op.apply(phi))
        assert tv1 <= 0.5 * tv0 + 1e-9
