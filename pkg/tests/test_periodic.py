import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from firephase.errors import ConfigError
from firephase.periodic import (
    Constant,
    FiniteFourier,
    Sinusoid,
    fn_from_json,
    from_harmonics,
    harmonic_antiderivative,
    lowpass,
)

FNS = [
    Constant(1.3),
    Sinusoid(1.0, 0.35, 0.0),
    Sinusoid(-0.2, 2.0, 1.1),
    FiniteFourier(0.5, ((0.3, -0.1), (0.0, 0.2), (0.05, 0.0))),
]


@pytest.mark.parametrize("fn", FNS)
def test_period_one(fn):
    t = np.random.default_rng(0).uniform(-5, 5, 1000)
    assert np.abs(fn(t + 1.0) - fn(t)).max() < 1e-12


@pytest.mark.parametrize("fn", FNS)
def test_derivatives_match_finite_differences(fn):
    t = np.linspace(0.05, 0.95, 17)
    errs = []
    for d in (1e-3, 1e-4):
        cfd = (fn(t + d) - fn(t - d)) / (2 * d)
        errs.append(np.abs(fn.d1(t) - cfd).max())
    if errs[0] < 1e-12:  # constant: both derivatives vanish identically
        assert errs[1] < 1e-12
        return
    assert 50 < errs[0] / errs[1] < 200  # O(d^2) Richardson ratio
    errs2 = []
    for d in (1e-3, 1e-4):
        cfd2 = (fn.d1(t + d) - fn.d1(t - d)) / (2 * d)
        errs2.append(np.abs(fn.d2(t) - cfd2).max())
    assert 50 < errs2[0] / errs2[1] < 200


@pytest.mark.parametrize("fn", FNS)
def test_harmonics_round_trip(fn):
    back = from_harmonics(*fn.harmonics())
    t = np.linspace(0, 1, 257)
    assert np.abs(back(t) - fn(t)).max() < 1e-12


def test_subtraction_is_pointwise():
    a, b = FNS[1], FNS[3]
    t = np.linspace(0, 1, 101)
    assert np.abs((a - b)(t) - (a(t) - b(t))).max() < 1e-12


def test_lowpass_solves_the_ode():
    f = Sinusoid(1.0, 0.4, 0.3)
    gamma = 0.7
    y = lowpass(f, gamma)
    t = np.linspace(0, 1, 401)
    d = 1e-6
    yprime = (y(t + d) - y(t - d)) / (2 * d)
    assert np.abs(yprime + gamma * y(t) - f(t)).max() < 1e-7
    assert np.abs(y(t + 1) - y(t)).max() < 1e-12


def test_antiderivative_of_zero_mean_part():
    f = FiniteFourier(2.0, ((0.3, 0.1), (0.0, -0.2)))
    a = harmonic_antiderivative(f)
    t = np.linspace(0, 1, 301)
    d = 1e-6
    aprime = (a(t + d) - a(t - d)) / (2 * d)
    assert np.abs(aprime - (f(t) - 2.0)).max() < 1e-7


@given(
    st.floats(-3, 3),
    st.floats(0, 3),
    st.floats(-3, 3),
)
@settings(max_examples=50, deadline=None)
def test_sinusoid_json_round_trip(offset, amplitude, phase):
    fn = Sinusoid(offset, amplitude, phase)
    back = fn_from_json(fn.to_json())
    t = np.linspace(0, 1, 33)
    assert np.abs(back(t) - fn(t)).max() < 1e-15


def test_fourier_harmonic_cap():
    with pytest.raises(ConfigError):
        FiniteFourier(0.0, tuple((0.0, 1.0) for _ in range(65)))


def test_bad_json_raises_config_error():
    with pytest.raises(ConfigError):
        fn_from_json({"type": "mystery"})
    with pytest.raises(ConfigError):
        fn_from_json({"type": "sinusoid", "offset": 1.0})
