import numpy as np
import pytest

from stepkdv import oracles as orc
from stepkdv import potentials as pot
from stepkdv import scattering as sc


def test_bound_state_of_soliton():
    out = sc.bound_states(pot.soliton(1.0, 0.0), -10.0)
    assert len(out) == 1
    kap, c = out[0]
    assert kap == pytest.approx(1.0, abs=1e-10)
    assert c == pytest.approx(2.0, abs=1e-9)


def test_bound_state_norm_robust_to_deep_origin():
    # the L2 norm must survive a long flat stretch left of the support
    out = sc.bound_states(pot.soliton(1.0, 0.0), -53.9)
    kap, c = out[0]
    assert kap == pytest.approx(1.0, abs=1e-10)
    assert c == pytest.approx(2.0, rel=1e-8)


def test_two_soliton_bound_states():
    q = pot.n_soliton(((2.0, 0.0), (1.0, 0.0)))
    out = sc.bound_states(q, -12.0)
    kaps = [k for k, _ in out]
    cs = [c for _, c in out]
    assert kaps == pytest.approx([2.0, 1.0], abs=1e-9)
    assert cs == pytest.approx([4.0, 2.0], rel=1e-6)


def test_reflectionless_identity():
    # for reflectionless q the half-line reflection of the right piece and
    # the analytic part cancel: R0(k) e^{2ika} + A(k) = 0 on the real axis
    q = pot.soliton(1.0, 0.0)
    a = 5.0
    ks = np.array([0.3, 1.0, 2.5])
    sd = sc.half_line_scattering(q, a, ks, tol=1e-12)
    A = sc.analytic_part_many(q, a, ks.astype(complex), tol=1e-12)
    resid = np.abs(sd.R0 * np.exp(2j * ks * a) + A)
    assert resid.max() < 1e-8


def test_halfline_pole_corrections_soliton_tail():
    # truncating the soliton at a = 5 leaves a weak half-line level of the
    # right piece at kappa0 ~ tail mass / 2, with purely imaginary residue
    q = pot.soliton(1.0, 0.0)
    a = 5.0
    mass = 2.0 * (1.0 - np.tanh(a))
    out = sc.halfline_pole_corrections(q, a, kappa_max=0.1, tol=1e-12)
    assert len(out) == 1
    kap0, res = out[0]
    assert kap0 == pytest.approx(mass / 2.0, rel=0.05)
    assert abs(res.real) < 1e-12
    assert res.imag == pytest.approx(-kap0, rel=0.05)


def test_pure_step_analytic_part_quick():
    q = pot.pure_step(1.0)
    ks = np.array([0.5, 1.0, 3.0])
    A = sc.analytic_part_many(q, 0.0, ks.astype(complex), x_far=-60.0)
    exact = orc.pure_step_reflection(1.0, ks)
    assert np.max(np.abs(A - exact)) < 1e-6


def test_weyl_m_herglotz():
    # Im m > 0 in the upper half plane of the spectral parameter
    q = pot.pure_step(1.0)
    lams = np.array([0.5 + 0.5j, -0.3 + 0.2j])
    m = sc.weyl_m_many(q, "left", 0.0, lams, x_far=-60.0)
    assert np.all(m.imag > 0.0)


def test_contour_height_rejected_below_cut():
    q = pot.pure_step(1.0)
    with pytest.raises(sc.ScatteringError):
        sc.analytic_part_many(q, 0.0, np.array([0.5j]), h0=0.5)
