import numpy as np
import pytest

from stepkdv import oracles as orc


def test_empty_data_det_is_one():
    data = orc.SolitonData((), ())
    assert orc.n_soliton_det(data, 0.3, 0.7) == 1.0


def test_one_soliton_det_at_origin():
    # 1 + c/(2 kappa) with (kappa, c) = (1, 2)
    data = orc.SolitonData((1.0,), (2.0,))
    assert orc.n_soliton_det(data, 0.0, 0.0) == pytest.approx(2.0, abs=1e-14)


def test_one_soliton_field_is_sech2():
    data = orc.SolitonData((1.0,), (2.0,))
    xs = np.linspace(-8.0, 8.0, 101)
    for t in (0.0, 0.3, 1.0):
        exact = -2.0 / np.cosh(xs - 4.0 * t) ** 2
        assert np.max(np.abs(orc.n_soliton_field(data, xs, t) - exact)) < 1e-12


def test_soliton_field_translation():
    xs = np.linspace(-5.0, 5.0, 41)
    u = orc.soliton_field(1.5, 0.7, xs, 0.2)
    v = orc.soliton_field(1.5, 0.0, xs - 0.7, 0.2)
    assert np.max(np.abs(u - v)) < 1e-12


def test_norming_constant_convention():
    # soliton at x0 has c = 2 kappa e^{2 kappa x0}
    assert orc.soliton_norming_constant(1.0, 0.0) == pytest.approx(2.0)
    assert orc.soliton_norming_constant(2.0, 0.5) == pytest.approx(
        4.0 * np.e ** 2.0)


def test_two_soliton_det_positive():
    data = orc.SolitonData((2.0, 1.0), (4.0, 2.0))
    rng = np.random.default_rng(7)
    for _ in range(200):
        x = rng.uniform(-10.0, 10.0)
        t = rng.uniform(0.0, 1.0)
        assert orc.n_soliton_det(data, x, t) > 0.0


def test_pure_step_reflection_values():
    ks = np.array([1e-9, 10.0])
    R = orc.pure_step_reflection(1.0, ks)
    assert R[0] == pytest.approx(-1.0, abs=1e-6)
    assert R[1] == pytest.approx(-((1.0 / (10.0 + np.sqrt(101.0))) ** 2),
                                 rel=1e-12)
    # real, even, in [-1, 0)
    kk = np.linspace(0.05, 8.0, 50)
    Rk = orc.pure_step_reflection(1.0, kk)
    assert np.all(Rk < 0.0) and np.all(Rk >= -1.0)
    assert np.allclose(Rk, orc.pure_step_reflection(1.0, -kk))


def test_pure_step_rho_endpoint():
    assert orc.pure_step_rho(1.0, 1.0) == pytest.approx(1.0 / (3.0 * np.pi))
    forms = orc.pure_step_closed_forms(1.0, k=np.array([10.0]),
                                       s=np.array([1.0]))
    assert forms["rho"][0] == pytest.approx(1.0 / (3.0 * np.pi))


def test_logdet_matches_det():
    data = orc.SolitonData((2.0, 1.0), (4.0, 2.0))
    x, t = -3.0, 0.4
    assert np.exp(orc.n_soliton_logdet(data, x, t)) == pytest.approx(
        orc.n_soliton_det(data, x, t), rel=1e-12)
