import numpy as np
import pytest

from stepkdv import potentials as pot


def test_soliton_evaluate():
    q = pot.soliton(1.0, 0.0)
    xs = np.linspace(-5.0, 5.0, 21)
    assert np.allclose(q.evaluate(xs), -2.0 / np.cosh(xs) ** 2)
    assert q.left_tail_decaying


def test_pure_step_shape():
    q = pot.pure_step(1.0)
    assert q.evaluate(np.array([-3.0]))[0] == -1.0
    assert q.evaluate(np.array([3.0]))[0] == 0.0
    assert not q.left_tail_decaying


def test_box_support():
    q = pot.box(-0.5, 0.0, 2.0)
    vals = q.evaluate(np.array([-1.0, 1.0, 3.0]))
    assert list(vals) == [0.0, -0.5, 0.0]
    assert q.left_tail_decaying


def test_truncate_collapses():
    q = pot.truncate(pot.truncate(pot.pure_step(1.0), -10.0), -5.0)
    vals = q.evaluate(np.array([-7.0, -3.0]))
    assert vals[0] == 0.0 and vals[1] == -1.0
    assert q.left_tail_decaying


def test_tabulated_requires_tail_rules():
    xs = np.linspace(-1.0, 1.0, 11)
    qs = np.zeros(11)
    bare = pot.tabulated(xs, qs)
    with pytest.raises(pot.TailExtrapolationError):
        bare.evaluate(np.array([5.0]))
    q = pot.tabulated(xs, qs, tail_left=("zero",), tail_right=("zero",))
    assert q.evaluate(np.array([5.0]))[0] == 0.0


def test_validate_hypothesis_accepts_step():
    rep = pot.validate_hypothesis(pot.pure_step(1.0))
    assert rep["pass"]
    assert rep["h_observed"] == pytest.approx(1.0)


def test_from_config_roundtrip():
    q = pot.from_config({"kind": "box", "depth": -0.5, "left": 0.0,
                         "right": 2.0})
    assert q.evaluate(np.array([1.0]))[0] == -0.5
    q2 = pot.from_config({"kind": "truncated", "b": -5.0,
                          "inner": {"kind": "pure_step", "h": 1.0}})
    assert q2.evaluate(np.array([-6.0]))[0] == 0.0
    with pytest.raises(ValueError):
        pot.from_config({"kind": "nope"})


def test_fingerprint_distinguishes():
    assert pot.soliton(1.0).fingerprint() != pot.soliton(1.1).fingerprint()
    assert pot.pure_step(1.0).fingerprint() == pot.pure_step(1.0).fingerprint()
