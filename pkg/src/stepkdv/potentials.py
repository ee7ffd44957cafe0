"""Step-type initial profiles q(x): construction, evaluation, truncation,
and hypothesis validation (bounded below by -h^2, decay faster than x^-4 at
+infinity, arbitrary at -infinity)."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import oracles


class TailExtrapolationError(ValueError):
    """Tabulated potential queried outside its sample range with no tail rule."""


@dataclass(frozen=True)
class Potential:
    kind: str
    params: tuple = ()
    lower_bound_h: float = 0.0
    decay_alpha: float = np.inf
    support_hint: tuple = (-20.0, 20.0)
    # True when q decays at -infinity as well (compact or two-sided decaying
    # data); drives the choice of kernel-synthesis path in the solver.
    left_tail_decaying: bool = False

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "soliton":
            kappa, x0 = self.params
            return oracles.soliton_field(kappa, x0, x, 0.0)
        if self.kind == "n_soliton":
            data = _nsoliton_data(self.params)
            return oracles.n_soliton_field(data, x, np.zeros_like(x))
        if self.kind == "pure_step":
            (h,) = self.params
            return np.where(x < 0.0, -h * h, 0.0)
        if self.kind == "box":
            depth, left, right = self.params
            return np.where((x >= left) & (x < right), depth, 0.0)
        if self.kind == "tabulated":
            return _eval_tabulated(self.params, x)
        if self.kind == "sum":
            return sum(p.evaluate(x) for p in self.params)
        if self.kind == "truncated":
            inner, b = self.params
            return np.where(x < b, 0.0, inner.evaluate(x))
        raise ValueError(f"unknown potential kind {self.kind!r}")

    def __call__(self, x):
        return self.evaluate(x)

    def fingerprint(self) -> str:
        def enc(v):
            if isinstance(v, Potential):
                return v.fingerprint()
            if isinstance(v, tuple):
                return "(" + ",".join(enc(u) for u in v) + ")"
            if isinstance(v, np.ndarray):
                return repr(v.tobytes())
            return repr(v)

        return f"{self.kind}{enc(self.params)}"


def _nsoliton_data(pairs):
    kap = np.array([p[0] for p in pairs], dtype=float)
    x0 = np.array([p[1] for p in pairs], dtype=float)
    order = np.argsort(-kap)
    kap, x0 = kap[order], x0[order]
    cs = oracles.soliton_norming_constant(kap, x0)
    return oracles.SolitonData(tuple(kap), tuple(cs))


def _eval_tabulated(params, x):
    interp, xs, qs, tail_left, tail_right = params
    out = np.empty_like(x)
    inside = (x >= xs[0]) & (x <= xs[-1])
    out[inside] = interp(x[inside])
    for mask, side, rule in (
        (x < xs[0], "left", tail_left),
        (x > xs[-1], "right", tail_right),
    ):
        if not np.any(mask):
            continue
        if rule is None:
            raise TailExtrapolationError(
                f"x outside tabulated range on the {side}; set an explicit "
                "tail rule (zero | constant | power)"
            )
        kind = rule[0]
        if kind == "zero":
            out[mask] = 0.0
        elif kind == "constant":
            out[mask] = qs[0] if side == "left" else qs[-1]
        elif kind == "power":
            alpha = rule[1]
            edge_x = xs[0] if side == "left" else xs[-1]
            edge_q = qs[0] if side == "left" else qs[-1]
            out[mask] = edge_q * np.abs(edge_x / x[mask]) ** alpha
        else:
            raise ValueError(f"unknown tail rule {kind!r}")
    return out


# -- constructors ------------------------------------------------------------


def zero():
    return Potential("zero", (), 0.0, np.inf, (0.0, 0.0), True)


def soliton(kappa, x0=0.0):
    half_width = 20.0 / kappa
    return Potential(
        "soliton",
        (float(kappa), float(x0)),
        float(kappa) * np.sqrt(2.0),
        np.inf,
        (x0 - half_width, x0 + half_width),
        True,
    )


def n_soliton(pairs):
    pairs = tuple((float(k), float(x0)) for k, x0 in pairs)
    kmax = max(k for k, _ in pairs)
    kmin = min(k for k, _ in pairs)
    lo = min(x0 for _, x0 in pairs) - 20.0 / kmin
    hi = max(x0 for _, x0 in pairs) + 20.0 / kmin
    return Potential("n_soliton", pairs, kmax * np.sqrt(2.0), np.inf, (lo, hi), True)


def pure_step(h):
    return Potential("pure_step", (float(h),), float(h), np.inf, (-np.inf, 0.0), False)


def box(depth, left, right):
    if right <= left:
        raise ValueError("box needs left < right")
    return Potential(
        "box",
        (float(depth), float(left), float(right)),
        float(np.sqrt(max(0.0, -depth))),
        np.inf,
        (float(left), float(right)),
        True,
    )


def tabulated(xs, qs, tail_left=None, tail_right=None):
    """Monotone cubic interpolation inside the sample range; outside, an
    explicit tail rule (('zero',) | ('constant',) | ('power', alpha)) is
    required — silent extrapolation raises."""
    xs = np.asarray(xs, dtype=float)
    qs = np.asarray(qs, dtype=float)
    if xs.ndim != 1 or xs.size < 4 or np.any(np.diff(xs) <= 0):
        raise ValueError("tabulated needs >= 4 strictly increasing samples")
    interp = PchipInterpolator(xs, qs)
    h_obs = float(np.sqrt(max(0.0, -qs.min())))
    decaying_left = tail_left is not None and tail_left[0] in ("zero", "power")
    return Potential(
        "tabulated",
        (interp, xs, qs, tail_left, tail_right),
        h_obs,
        np.inf,
        (float(xs[0]), float(xs[-1])),
        decaying_left,
    )


def sum_of(potentials):
    pots = tuple(potentials)
    h = float(np.sqrt(sum(p.lower_bound_h**2 for p in pots)))
    lo = min(p.support_hint[0] for p in pots)
    hi = max(p.support_hint[1] for p in pots)
    return Potential(
        "sum", pots, h, min(p.decay_alpha for p in pots), (lo, hi),
        all(p.left_tail_decaying for p in pots),
    )


def truncate(q: Potential, b) -> Potential:
    """Hard cutoff: 0 for x < b, q(x) for x >= b (no mollification)."""
    b = float(b)
    if q.kind == "truncated":
        inner, b0 = q.params
        return truncate(inner, max(b, b0))
    if q.kind == "zero":
        return q
    lo, hi = q.support_hint
    return Potential(
        "truncated", (q, b), q.lower_bound_h, q.decay_alpha,
        (max(lo, b), max(hi, b)), True,
    )


# -- hypothesis validation ----------------------------------------------------


def validate_hypothesis(q: Potential, grid_spec=None, tol=1e-9):
    """Check q >= -h^2 on a dense grid and fit the right-tail decay exponent.

    Returns {h_observed, alpha_fit, tail, pass}.  alpha_fit is the
    least-squares slope of log|q| vs log x on the right tail (zeros skipped);
    a tail that samples identically zero passes with alpha_fit = inf.
    """
    lo, hi = q.support_hint
    lo = max(lo, -200.0) if not np.isfinite(lo) else lo
    hi = min(hi, 200.0) if not np.isfinite(hi) else hi
    if grid_spec is None:
        grid = np.linspace(lo, hi + 10.0, 4001)
    else:
        grid = np.asarray(grid_spec, dtype=float)
    vals = q.evaluate(grid)
    h_observed = float(np.sqrt(max(0.0, -vals.min())))
    bound_ok = h_observed <= q.lower_bound_h + tol + 1e-12 * (1 + q.lower_bound_h)

    tail_lo = max(hi, 1.0)
    tail = np.geomspace(tail_lo + 1.0, 4.0 * (tail_lo + 1.0), 60)
    tvals = q.evaluate(tail)
    nz = np.abs(tvals) > 0
    if not np.any(nz):
        alpha_fit = np.inf
        tail_report = "identically zero"
        tail_ok = True
    elif np.count_nonzero(nz) < 5:
        alpha_fit = np.nan
        tail_report = "tail indeterminate"
        tail_ok = False
    else:
        slope = np.polyfit(np.log(tail[nz]), np.log(np.abs(tvals[nz])), 1)[0]
        alpha_fit = float(-slope)
        tail_report = "fitted"
        tail_ok = alpha_fit > 4.0
    return {
        "h_observed": h_observed,
        "alpha_fit": alpha_fit,
        "tail": tail_report,
        "pass": bool(bound_ok and tail_ok),
    }


# -- configuration loading ----------------------------------------------------


def from_config(spec: dict) -> Potential:
    """Build a Potential from a key-value tree with a `kind` discriminator."""
    kind = spec["kind"]
    if kind == "zero":
        return zero()
    if kind == "soliton":
        return soliton(spec["kappa"], spec.get("x0", 0.0))
    if kind == "n_soliton":
        return n_soliton([(t["kappa"], t.get("x0", 0.0)) for t in spec["terms"]])
    if kind == "pure_step":
        return pure_step(spec["h"])
    if kind == "box":
        return box(spec["depth"], spec["left"], spec["right"])
    if kind == "tabulated":
        if "file" in spec:
            data = np.loadtxt(spec["file"])
            xs, qs = data[:, 0], data[:, 1]
        else:
            xs, qs = np.asarray(spec["x"]), np.asarray(spec["q"])
        return tabulated(xs, qs, _tail_rule(spec.get("tail_left")),
                         _tail_rule(spec.get("tail_right")))
    if kind == "sum":
        return sum_of(from_config(s) for s in spec["terms"])
    if kind == "truncated":
        return truncate(from_config(spec["inner"]), spec["b"])
    raise ValueError(f"unknown potential kind {kind!r}")


def _tail_rule(spec):
    if spec is None:
        return None
    if isinstance(spec, str):
        return (spec,)
    return (spec["rule"], spec.get("alpha", 5.0))


def load_potential(path) -> Potential:
    text = open(path).read()
    try:
        spec = json.loads(text)
    except json.JSONDecodeError:
        import yaml

        spec = yaml.safe_load(text)
    return from_config(spec)
