import numpy as np
import pytest

import firephase as fp
from firephase import detmap
from firephase.errors import AtDiscontinuity, NoCrossing, PredictionInvalid
from firephase.model import SifModel
from firephase.periodic import Constant, Sinusoid

LN15 = float(np.log(1.5))


def drifted_unit(eps=0.0):
    return fp.fig1_model(eps)


def tangency_model(depth):
    # gamma = 1, drive 1.4, threshold 1 + depth*sin(2 pi t), reset 0
    return SifModel(gamma=1.0, eps=0.0, input=Constant(1.4),
                    threshold=Sinusoid(1.0, depth), reset=Constant(0.0))


# -- hit and crossing times --------------------------------------------------


def test_hit_time_drifted_unit():
    assert fp.hit_time(drifted_unit(), 0.0, 0.5) == pytest.approx(LN15, abs=1e-12)


def test_hit_time_near_threshold_start():
    m = drifted_unit()
    t = fp.hit_time(m, 0.0, 1.0 - 1e-9)
    assert 0.0 < t < 2e-9


def test_hit_time_no_crossing():
    m = SifModel(gamma=1.0, eps=0.0, input=Constant(0.5),
                 threshold=Constant(1.0), reset=Constant(0.0))
    with pytest.raises(NoCrossing):
        fp.hit_time(m, 0.0, 0.0)


def test_hit_time_fixed_point_of_first_preset(ex_reports):
    theta = ex_reports(1).stable_orbits[0].phases[0]
    m = fp.get_preset(1).model()
    f = fp.hit_time(m, theta)
    assert abs(f - theta - round(f - theta)) < 1e-10
    assert abs(theta - 0.5622) < 1e-3


def test_crossing_equals_hit_when_transversal():
    m = fp.get_preset(1).model()
    for theta in (0.1, 0.45, 0.8):
        assert fp.crossing_time(m, theta) == pytest.approx(
            fp.hit_time(m, theta), abs=1e-10
        )


def test_grazing_case_two_panel_figure():
    # depth 0.3: a genuine tangency start exists near 0.0863 with
    # f = 0.8087 and f* = 1.473
    m = tangency_model(0.3)
    discs = fp.find_discontinuities(m)
    assert len(discs) == 1
    d = discs[0]
    assert d.kind == "ii"
    assert d.phase == pytest.approx(0.0863, abs=1e-3)
    assert d.f_at == pytest.approx(0.8087, abs=2e-3)
    assert d.f_star_at == pytest.approx(1.473, abs=2e-3)
    # strictly below threshold between touch and crossing
    tt = np.linspace(d.f_at + 1e-3, d.f_star_at - 1e-3, 64)
    x0 = float(m.reset(d.phase))
    assert np.all(m.flow(tt, d.phase, x0) < m.threshold(tt))


def test_grazing_case_knife_edge():
    # depth 0.0629 makes touch and crossing coincide near t = 1.0251; the
    # crossing sits at a near-triple root, so the 4-decimal rounding of the
    # published (depth, t0) moves it by O(rounding^(1/3)) ~ 0.02.  What is
    # robust: no gap between first contact and first crossing, the location
    # within that cube-root ball, and a tiny threshold clearance nearby.
    m = tangency_model(0.0629)
    t0 = -0.2527
    f = fp.hit_time(m, t0)
    fstar = fp.crossing_time(m, t0)
    assert fstar == pytest.approx(f, abs=1e-10)
    assert f == pytest.approx(1.0251, abs=0.05)
    tt = np.linspace(f - 0.05, f - 0.005, 64)
    gap = np.asarray(m.threshold(tt) - m.flow(tt, t0, 0.0))
    assert gap.max() < 2e-3  # grazing approach, not a transversal plunge


# -- map derivative ----------------------------------------------------------


def test_map_derivative_published_values(ex_reports):
    rep = ex_reports(1)
    m = fp.get_preset(1).model()
    s = rep.stable_orbits[0]
    u = rep.unstable_orbits[0]
    assert fp.map_derivative(m, s.phases[0]) == pytest.approx(0.6142, abs=1e-3)
    assert fp.map_derivative(m, u.phases[0]) == pytest.approx(2.6898, abs=1e-3)


def test_map_derivative_matches_finite_differences():
    m = fp.get_preset(1).model()
    rng = np.random.default_rng(5)
    h = 1e-5
    for theta in rng.uniform(0, 1, 50):
        closed = fp.map_derivative(m, theta)
        fd = (fp.hit_time(m, theta + h) - fp.hit_time(m, theta - h)) / (2 * h)
        assert abs(closed - fd) / abs(fd) < 1e-5


def test_map_derivative_rigid_rotation():
    m = SifModel(gamma=0.0, eps=0.0, input=Constant(0.83),
                 threshold=Constant(1.0), reset=Constant(0.0))
    for theta in (0.0, 0.3, 0.9):
        assert fp.map_derivative(m, theta) == pytest.approx(1.0, abs=1e-12)


def test_map_derivative_refuses_discontinuity():
    m = fp.get_preset(2).model()
    rm = detmap.ReturnMap(m)
    d = rm.discontinuities[0].phase
    with pytest.raises(AtDiscontinuity):
        rm.map_derivative(d + 5e-7)


# -- lift / crossing-consistency invariants ----------------------------------


def test_lift_equivariance():
    m = fp.get_preset(3).model()
    rng = np.random.default_rng(7)
    t = rng.uniform(0, 3, 100)
    f0 = np.array([fp.hit_time(m, ti) for ti in t])
    f1 = np.array([fp.hit_time(m, ti + 1.0) for ti in t])
    assert np.abs(f1 - f0 - 1.0).max() < 1e-10


def test_crossing_consistency():
    m = fp.get_preset(1).model()
    rng = np.random.default_rng(9)
    for theta in rng.uniform(0, 1, 16):
        f = fp.hit_time(m, theta)
        x0 = float(m.reset(theta))
        assert abs(float(m.flow(f, theta, x0) - m.threshold(f))) < 1e-10
        tt = np.linspace(theta, f, 1024, endpoint=False)[1:]
        assert np.all(m.flow(tt, theta, x0) < m.threshold(tt))


# -- orbits -------------------------------------------------------------------


def test_orbits_period_two_preset(ex_reports):
    rep = ex_reports(3)
    stab = rep.stable_orbits
    unst = rep.unstable_orbits
    assert len(stab) == 1 and len(unst) == 1
    assert stab[0].period == 2 and unst[0].period == 2
    assert np.allclose(stab[0].phases, (0.3527, 0.7593), atol=1e-3)
    assert stab[0].multiplier == pytest.approx(0.7445, abs=1e-3)
    assert np.allclose(unst[0].phases, (0.4654, 0.9329), atol=1e-3)
    assert unst[0].multiplier == pytest.approx(1.5043, abs=1e-3)


def test_orbits_period_four_preset(ex_reports):
    rep = ex_reports(6)
    stab = rep.stable_orbits
    assert len(stab) == 1 and stab[0].period == 4
    assert np.allclose(stab[0].phases, (0.4378, 0.6236, 0.6978, 0.7480), atol=1e-3)
    assert stab[0].multiplier == pytest.approx(0.043991, abs=1e-3)


def test_no_orbits_for_irrational_rotation():
    m = SifModel(gamma=0.0, eps=0.0, input=Constant(1.0 / (np.sqrt(5) - 1)),
                 threshold=Constant(1.0), reset=Constant(0.0))
    assert fp.find_orbits(m, max_period=6) == []


def test_orbit_closure_and_multiplier_product(ex_reports):
    m = fp.get_preset(5).model()
    for orbit in ex_reports(5).orbits:
        t = orbit.phases[0]
        prod = 1.0
        for _ in range(orbit.period):
            prod *= fp.map_derivative(m, t % 1.0)
            t = fp.hit_time(m, t % 1.0)
        assert abs(t - orbit.phases[0] - round(t - orbit.phases[0])) < 1e-8
        assert prod == pytest.approx(orbit.multiplier, abs=1e-6)


# -- discontinuities and D conditions ----------------------------------------


def test_discontinuities_preset_two(ex_reports):
    rep = ex_reports(2)
    assert len(rep.discontinuities) == 1
    d = rep.discontinuities[0]
    assert d.phase == pytest.approx(0.1178, abs=1e-3)
    assert d.f_phase == pytest.approx(0.8208, abs=1e-3)
    assert d.f_star_phase == pytest.approx(0.3946, abs=1e-3)
    assert rep.ell == 1 and rep.d1 and rep.d2 and rep.d3


def test_discontinuities_absent_for_preset_one(ex_reports):
    assert ex_reports(1).discontinuities == []
    assert ex_reports(1).ell == 0 and ex_reports(1).d3


def test_preimage_chain_preset_four(ex_reports):
    rep = ex_reports(4)
    assert [round(d.phase, 4) for d in rep.discontinuities] == pytest.approx(
        [0.5489], abs=1e-3
    )
    assert sorted(np.round(rep.image_set, 4)) == pytest.approx(
        sorted([0.8567, 0.3057]), abs=1e-3
    )
    assert rep.ell == 2
    m = fp.get_preset(4).model()
    pre = detmap.ReturnMap(m).invert(rep.discontinuities[0].phase)
    assert len(pre) == 1 and pre[0] == pytest.approx(0.1174, abs=1e-3)


# -- spectrum prediction -------------------------------------------------------


def test_predicted_spectrum_head_first_preset(ex_reports):
    spec = fp.predict_spectrum(ex_reports(1), r_min=0.2)
    mods = [abs(e.value) for e in spec.entries]
    assert mods == pytest.approx([1.0, 0.6142, 0.3772, 0.3718, 0.2317], abs=1e-3)
    assert mods == sorted(mods, reverse=True)
    assert any(abs(e.value - 1.0) < 1e-12 for e in spec.entries)


def test_predicted_spectrum_cube_roots(ex_reports):
    spec = fp.predict_spectrum(ex_reports(5), r_min=0.4)
    vals = spec.values
    omega = np.exp(2j * np.pi / 3)
    for target in (1.0, omega, omega.conjugate(),
                   0.4449, 0.4449 * omega, 0.4449 * omega.conjugate()):
        assert np.min(np.abs(vals - target)) < 1e-3


def test_predicted_spectrum_conjugation_closure(ex_reports):
    for i in (3, 5, 6):
        vals = fp.predict_spectrum(ex_reports(i), r_min=0.05).values
        for v in vals:
            assert np.min(np.abs(vals - v.conjugate())) < 1e-12


def test_predicted_spectrum_superattracting():
    # multiplier 0 at a fixed point: only the eigenvalue 1 survives any floor
    rep = detmap.ReturnMapReport(
        orbits=[detmap.OrbitRecord(phases=(0.25,), period=1, winding=1,
                                   multiplier=0.0, stable=True)],
        discontinuities=[], image_set=(), ell=0,
        d1=True, d2=True, d3=True,
        cond_a=True, cond_a_value=1.0, cond_b=True, cond_b_value=1.0,
    )
    spec = fp.predict_spectrum(rep, r_min=0.01)
    assert list(spec.values) == [1.0 + 0j]


def test_prediction_invalid_without_stable_orbit():
    rep = detmap.ReturnMapReport(
        orbits=[], discontinuities=[], image_set=(), ell=0,
        d1=False, d2=False, d3=True,
        cond_a=True, cond_a_value=1.0, cond_b=True, cond_b_value=1.0,
    )
    with pytest.raises(PredictionInvalid):
        fp.predict_spectrum(rep)


def test_prediction_invalid_when_d_conditions_fail(ex_reports):
    rep = ex_reports(2)
    broken = detmap.ReturnMapReport(
        orbits=rep.orbits, discontinuities=rep.discontinuities,
        image_set=rep.image_set, ell=None, d1=rep.d1, d2=rep.d2, d3=False,
        cond_a=rep.cond_a, cond_a_value=rep.cond_a_value,
        cond_b=rep.cond_b, cond_b_value=rep.cond_b_value,
    )
    with pytest.raises(PredictionInvalid):
        fp.predict_spectrum(broken)
