import numpy as np
import pytest

import firephase as fp
from firephase import markov, mc

THREADS = 2


@pytest.fixture(scope="session")
def ex_reports():
    """Deterministic-map reports for the six presets, computed once."""
    cache = {}

    def get(i):
        if i not in cache:
            cache[i] = fp.analyze(fp.get_preset(i).model())
        return cache[i]

    return get


@pytest.fixture(scope="session")
def ex1_matrices():
    """Example 1 transition matrices at the three acceptance noise levels."""
    out = {}
    for eps in (0.1, 0.05, 0.02):
        m = fp.get_preset(1).model(eps=eps)
        out[eps] = markov.build_matrix(m, 200, threads=THREADS)
    return out


@pytest.fixture(scope="session")
def ex1_spectra(ex_reports, ex1_matrices):
    pred = fp.predict_spectrum(ex_reports(1), r_min=0.05)
    return {
        eps: markov.spectrum(tm, pred, eps=eps)
        for eps, tm in ex1_matrices.items()
    }


@pytest.fixture(scope="session")
def ex1_stationary(ex1_matrices):
    return markov.stationary(ex1_matrices[0.05])


@pytest.fixture(scope="session")
def fig1_volterra():
    return fp.solve_volterra(fp.fig1_model(0.1), 0.0, 0.5)


@pytest.fixture(scope="session")
def fig1_mc_sample():
    cfg = mc.SimConfig(dt=1e-4, trials=10000, seed=20260809)
    return mc.simulate_hit(fp.fig1_model(0.1), 0.0, 0.5, cfg)


@pytest.fixture(scope="session")
def ex1_phase_chain():
    m = fp.get_preset(1).model(eps=0.05)
    cfg = mc.SimConfig(dt=1e-4, trials=1, seed=11)
    return mc.sample_phase_chain(m, 0.25, steps=2000, cfg=cfg, burn_in=100)
