import numpy as np
import pytest

from stepkdv import oracles as orc
from stepkdv import potentials as pot
from stepkdv import symbolgen as sg


def _soliton_kernel(x, t, s, kappa=1.0, c=2.0):
    return 2.0 * c * np.exp(8.0 * kappa**3 * t - 2.0 * kappa * (x + s))


def test_decaying_kernel_matches_soliton():
    # discrete + contour + real-axis + pole-residue parts must reproduce the
    # reflectionless kernel: everything but the discrete term cancels
    fam = sg.build_kernel_family(pot.soliton(1.0, 0.0), x_range=(-6.0, 6.0),
                                 s_max=30.0, t_hint=(0.5, 0.5),
                                 use_splines=False)
    s = np.linspace(0.01, 8.0, 9)
    for x in (-3.0, 0.0, 2.0):
        vals = fam.kernel(x, 0.5, s)
        exact = _soliton_kernel(x, 0.5, s)
        assert np.max(np.abs(vals - exact)) < 1e-8


def test_classical_t0_kernel():
    fam = sg.build_kernel_family(pot.soliton(1.0, 0.0), x_range=(-6.0, 6.0),
                                 s_max=30.0, use_splines=False)
    s = np.linspace(0.01, 6.0, 7)
    vals = fam.kernel(-1.0, 0.0, s)
    exact = _soliton_kernel(-1.0, 0.0, s)
    assert np.max(np.abs(vals - exact)) < 1e-8


def test_step_kernel_contour_height_independent():
    s = np.linspace(0.01, 6.0, 7)
    vals = {}
    for h0 in (1.05, 1.4):
        fam = sg.build_kernel_family(pot.pure_step(1.0), h0=h0,
                                     x_range=(-4.0, 4.0), s_max=20.0,
                                     t_hint=(1.0, 1.0), use_splines=False)
        vals[h0] = fam.kernel(-1.0, 1.0, s)
    rel = np.abs(vals[1.05] - vals[1.4]) / (1.0 + np.abs(vals[1.05]))
    assert rel.max() < 1e-4


def test_kernel_x_derivatives_consistent():
    fam = sg.build_kernel_family(pot.pure_step(1.0), x_range=(-4.0, 4.0),
                                 s_max=20.0, t_hint=(1.0, 1.0),
                                 use_splines=False)
    s = np.array([0.5, 2.0])
    h = 0.02
    d1 = fam.kernel(0.0, 1.0, s, dx_order=1)
    fd1 = (fam.kernel(h, 1.0, s) - fam.kernel(-h, 1.0, s)) / (2.0 * h)
    assert np.max(np.abs(d1 - fd1)) < 5e-3 * max(1.0, np.max(np.abs(d1)))
    d2 = fam.kernel(0.0, 1.0, s, dx_order=2)
    fd2 = (fam.kernel(h, 1.0, s) - 2.0 * fam.kernel(0.0, 1.0, s)
           + fam.kernel(-h, 1.0, s)) / h**2
    assert np.max(np.abs(d2 - fd2)) < 5e-3 * max(1.0, np.max(np.abs(d2)))


def test_negative_t_rejected():
    fam = sg.build_kernel_family(pot.pure_step(1.0), x_range=(-2.0, 2.0),
                                 s_max=16.0, use_splines=False)
    with pytest.raises(sg.SymbolError):
        fam.parts(-0.1)


def test_step_t0_rejected():
    fam = sg.build_kernel_family(pot.pure_step(1.0), x_range=(-2.0, 2.0),
                                 s_max=16.0, use_splines=False)
    with pytest.raises(sg.SymbolError):
        fam.parts(0.0)


def test_resized_covers_new_range():
    fam = sg.build_kernel_family(pot.soliton(1.0, 0.0), x_range=(-2.0, 2.0),
                                 s_max=10.0, t_hint=(0.5, 0.5),
                                 use_splines=False)
    big = fam.resized(s_max=25.0)
    s = np.array([20.0])
    assert np.isfinite(big.kernel(0.0, 0.5, s)).all()
