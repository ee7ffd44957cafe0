import numpy as np
import pytest

from stepkdv import hankelop as ho
from stepkdv import oracles as orc
from stepkdv import potentials as pot
from stepkdv import symbolgen as sg


def test_log_rule_integrates_reference_density():
    quad = ho.build_quadrature(80, 16.0, 1.0)
    val = float(np.sum(quad.weights * np.exp(-2.0 * quad.nodes)))
    assert val == pytest.approx(0.5, rel=1e-13)


def test_panel_rule_integrates_oscillation():
    quad = ho.build_quadrature_panels(8.0, 10.0, 18.0, 1.0)
    # int_0^inf e^{-2s} cos(6 s) ds = 2 / (4 + 36)
    val = float(np.sum(quad.weights * np.exp(-2.0 * quad.nodes)
                       * np.cos(6.0 * quad.nodes)))
    assert val == pytest.approx(2.0 / 40.0, abs=1e-8)


def test_discrete_det_matches_oracle():
    data = orc.SolitonData((2.0, 1.0), (4.0, 2.0))
    fam = sg.build_kernel_family(pot.n_soliton(((2.0, 0.0), (1.0, 0.0))),
                                 x_range=(-6.0, 6.0), s_max=16.0,
                                 use_splines=False)
    quad = ho.build_quadrature(120, 16.0, 1.0)
    for x, t in ((-2.0, 0.3), (0.0, 0.8), (3.0, 0.1)):
        op = ho.discretize(fam, x, t, quad)
        ld = ho.log_fredholm_det(op)
        assert ld == pytest.approx(orc.n_soliton_logdet(data, x, t),
                                   abs=1e-9, rel=1e-9)


def test_trace_formula_second_derivative():
    data = orc.SolitonData((1.0,), (2.0,))
    fam = sg.build_kernel_family(pot.soliton(1.0, 0.0), path="discrete",
                                 x_range=(-6.0, 6.0), s_max=16.0,
                                 use_splines=False)
    quad = ho.build_quadrature(100, 16.0, 1.0)
    op = ho.discretize(fam, 0.5, 0.2, quad, orders=(0, 1, 2))
    u = -2.0 * ho.log_det_dx2(op)
    assert u == pytest.approx(float(orc.n_soliton_field(data, 0.5, 0.2)),
                              abs=1e-10)


def test_spectrum_diagnostics_bounds():
    fam = sg.build_kernel_family(pot.pure_step(1.0), x_range=(-3.0, 3.0),
                                 s_max=16.0, t_hint=(1.0, 1.0),
                                 use_splines=False)
    quad = ho.build_quadrature(100, 16.0, fam.h0)
    op = ho.discretize(fam, 0.0, 1.0, quad)
    diag = ho.spectrum_diagnostics(op)
    assert diag["min_eig"] > -1.0
    assert np.isfinite(ho.log_fredholm_det(op))


def test_doubling_stability():
    fam = sg.build_kernel_family(pot.pure_step(1.0), x_range=(-3.0, 3.0),
                                 s_max=16.0, t_hint=(1.0, 1.0),
                                 use_splines=False)
    q1 = ho.build_quadrature(100, 16.0, fam.h0)
    q2 = ho.build_quadrature(200, 16.0, fam.h0)
    ld1 = ho.log_fredholm_det(ho.discretize(fam, 0.0, 1.0, q1))
    ld2 = ho.log_fredholm_det(ho.discretize(fam, 0.0, 1.0, q2))
    assert abs(ld1 - ld2) < 1e-8


def test_asymmetry_tracked():
    fam = sg.build_kernel_family(pot.pure_step(1.0), x_range=(-3.0, 3.0),
                                 s_max=16.0, t_hint=(1.0, 1.0),
                                 use_splines=False)
    quad = ho.build_quadrature(80, 16.0, fam.h0)
    op = ho.discretize(fam, 1.0, 1.0, quad)
    assert op.meta["asym_rel"] <= 1e-12
