import numpy as np
import pytest

from stepkdv import oracles as orc
from stepkdv import potentials as pot
from stepkdv import solver as sv


def test_fd_stencils():
    xs = np.arange(-2.0, 2.0, 0.01)
    u = np.sin(3.0 * xs)[None, :]
    d1 = sv._conv1d(u, sv._D1_4, 0.01, axis=1)
    assert np.max(np.abs(d1 - 3.0 * np.cos(3.0 * xs[2:-2]))) < 1e-6
    d3 = sv._conv1d(u, sv._D3_4, 0.01 ** 3, axis=1)
    assert np.max(np.abs(d3 + 27.0 * np.cos(3.0 * xs[3:-3]))) < 1e-4


def test_kdv_residual_zero_field():
    xs = np.arange(-1.0, 1.0, 0.01)
    ts = np.arange(0.0, 0.005, 0.001)
    field = sv.SolutionField(xs, ts, np.zeros((ts.size, xs.size)), [])
    assert sv.kdv_residual(field)["relative_norm"] == 0.0


def test_kdv_residual_analytic_soliton():
    xs = np.arange(1.0, 7.0, 0.01)
    ts = np.arange(0.9, 1.1, 0.001)
    u = np.stack([orc.soliton_field(1.0, 0.0, xs, t) for t in ts])
    res = sv.kdv_residual(sv.SolutionField(xs, ts, u, []))
    assert res["relative_norm"] <= 1e-4


def test_kdv_residual_rejects_coarse_grid():
    xs = np.arange(-5.0, 5.0, 0.5)
    ts = np.arange(0.0, 0.5, 0.1)
    u = np.stack([orc.soliton_field(2.0, 0.0, xs, t) for t in ts])
    with pytest.raises(sv.SolverError):
        sv.kdv_residual(sv.SolutionField(xs, ts, u, []))


def test_solve_point_soliton():
    u, diag = sv.solve_point(pot.soliton(1.0, 0.0), 1.0, 0.5)
    assert u == pytest.approx(float(orc.soliton_field(1.0, 0.0, 1.0, 0.5)),
                              abs=1e-9)
    assert diag["det"] > 0.0 and diag["min_eig"] > -1.0


def test_solve_grid_discrete_matches_oracle():
    xs = np.linspace(-6.0, 6.0, 25)
    ts = [0.0, 0.5]
    field = sv.solve_grid(pot.soliton(1.0, 0.0), xs, ts, sv.SolverOptions())
    exact = np.stack([orc.soliton_field(1.0, 0.0, xs, t) for t in ts])
    assert np.max(np.abs(field.u - exact)) < 1e-9
    assert len(field.provenance) == field.u.size


def test_translation_covariance():
    d = 0.6
    opts = sv.SolverOptions(path="decaying")
    xs = np.array([-1.0, 0.5, 2.0])
    f0 = sv.solve_grid(pot.soliton(1.0, 0.0), xs, [0.5], opts)
    f1 = sv.solve_grid(pot.soliton(1.0, d), xs + d, [0.5], opts)
    assert np.max(np.abs(f0.u - f1.u)) < 1e-7


def test_galilean_traveling_wave():
    # one-soliton field is a pure traveling wave: u(x,t) = u(x-4 d, t-d)
    opts = sv.SolverOptions(path="decaying")
    d = 0.25
    xs = np.array([0.0, 1.5])
    fa = sv.solve_grid(pot.soliton(1.0, 0.0), xs + 4.0 * d, [0.5 + d], opts)
    fb = sv.solve_grid(pot.soliton(1.0, 0.0), xs, [0.5], opts)
    assert np.max(np.abs(fa.u - fb.u)) < 1e-7


def test_truncation_sweep_structure():
    sweep = sv.truncation_sweep(pot.pure_step(1.0), [-10.0, -20.0, -40.0],
                                0.0, 1.0)
    rows = sweep["rows"]
    assert len(rows) == 3 and rows[0]["diff"] is None
    diffs = [r["diff"] for r in rows[1:]]
    assert diffs[1] < diffs[0]
    assert sweep["monotone"] and sweep["flag"] is None


def test_truncation_sweep_input_validation():
    with pytest.raises(ValueError):
        sv.truncation_sweep(pot.pure_step(1.0), [-10.0, -5.0, -20.0], 0.0, 1.0)
    with pytest.raises(ValueError):
        sv.truncation_sweep(pot.pure_step(1.0), [-10.0, -20.0], 0.0, 1.0)


def test_rescatter_needs_decaying_data():
    with pytest.raises(sv.SolverError):
        sv.rescatter_check(pot.pure_step(1.0), 0.1, np.array([1.0]))


def test_smoothstep_properties():
    xi = np.linspace(-0.5, 1.5, 101)
    s = sv._smoothstep(xi)
    assert s[0] == 0.0 and s[-1] == 1.0
    assert np.all(np.diff(s) >= 0.0)
    assert sv._smoothstep(np.array([0.5]))[0] == pytest.approx(0.5)


def test_solve_grid_zero_potential():
    xs = np.linspace(-2.0, 2.0, 9)
    field = sv.solve_grid(pot.zero(), xs, [0.5], sv.SolverOptions())
    assert np.max(np.abs(field.u)) < 1e-12
