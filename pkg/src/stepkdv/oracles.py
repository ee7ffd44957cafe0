"""Closed-form reference solutions used to calibrate the numerical pipeline.

These are independent code paths: they share no quadrature, kernel, or ODE
machinery with the main modules, so agreement with the solver is evidence
rather than tautology.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np


@dataclass(frozen=True)
class SolitonData:
    """Discrete scattering data: decay rates kappa_n and norming constants c_n.

    kappa sorted strictly descending, all positive; c_n > 0.
    """

    kappas: tuple = ()
    cs: tuple = ()

    def __post_init__(self):
        k = np.asarray(self.kappas, dtype=float)
        c = np.asarray(self.cs, dtype=float)
        if k.size != c.size:
            raise ValueError("kappas and cs must have equal length")
        if k.size:
            if np.any(k <= 0) or np.any(c <= 0):
                raise ValueError("kappas and norming constants must be positive")
            if np.any(np.diff(k) >= 0):
                raise ValueError("kappas must be strictly decreasing")
        object.__setattr__(self, "kappas", tuple(k.tolist()))
        object.__setattr__(self, "cs", tuple(c.tolist()))

    def __len__(self):
        return len(self.kappas)


def _subset_terms(data: SolitonData):
    """Log-weights and kappa subsets of the tau-function subset expansion.

    det(I + G) with G_nm = c_n xi(i kappa_n) / (kappa_n + kappa_m) expands as
    a sum over index subsets S of

        prod_{n in S} c_n/(2 kappa_n) * prod_{n<m in S} ((k_n-k_m)/(k_n+k_m))^2
        * exp(sum_{n in S} 8 k_n^3 t - 2 k_n x)

    (Cauchy determinant of each principal submatrix).  All weights are
    positive, so the whole sum can be carried in log scale.
    """
    kap = np.asarray(data.kappas)
    cs = np.asarray(data.cs)
    n = len(kap)
    logw = []
    ksum = []  # sum of kappa over subset
    k3sum = []  # sum of kappa^3 over subset
    kvecs = []
    for r in range(n + 1):
        for S in combinations(range(n), r):
            idx = np.array(S, dtype=int)
            lw = 0.0
            if r:
                lw += np.sum(np.log(cs[idx] / (2.0 * kap[idx])))
                for a, b in combinations(idx.tolist(), 2):
                    lw += 2.0 * np.log(
                        abs(kap[a] - kap[b]) / (kap[a] + kap[b])
                    )
            logw.append(lw)
            ksum.append(kap[idx].sum() if r else 0.0)
            k3sum.append((kap[idx] ** 3).sum() if r else 0.0)
            kvecs.append(idx)
    return np.array(logw), np.array(ksum), np.array(k3sum)


@dataclass
class _TauEvaluator:
    data: SolitonData
    logw: np.ndarray = field(init=False)
    ksum: np.ndarray = field(init=False)
    k3sum: np.ndarray = field(init=False)

    def __post_init__(self):
        self.logw, self.ksum, self.k3sum = _subset_terms(self.data)

    def log_tau_and_moments(self, x, t):
        """log tau plus softmax mean/variance of the subset kappa-sums."""
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        # exponents of each subset term
        expo = (
            self.logw
            + 8.0 * t[..., None] * self.k3sum
            - 2.0 * x[..., None] * self.ksum
        )
        m = np.max(expo, axis=-1, keepdims=True)
        w = np.exp(expo - m)
        z = np.sum(w, axis=-1)
        log_tau = np.squeeze(m, axis=-1) + np.log(z)
        p = w / z[..., None]
        mean = np.sum(p * self.ksum, axis=-1)
        var = np.sum(p * self.ksum**2, axis=-1) - mean**2
        return log_tau, mean, var


_tau_cache: dict = {}


def _tau(data: SolitonData) -> _TauEvaluator:
    key = (data.kappas, data.cs)
    if key not in _tau_cache:
        _tau_cache[key] = _TauEvaluator(data)
    return _tau_cache[key]


def n_soliton_logdet(data: SolitonData, x, t):
    """log det(I + G), G_nm = c_n xi_{x,t}(i kappa_n)/(kappa_n + kappa_m)."""
    log_tau, _, _ = _tau(data).log_tau_and_moments(x, t)
    return log_tau


def n_soliton_det(data: SolitonData, x, t):
    """det(I + G); overflows to inf only beyond float range (use the logdet
    variant for extreme arguments)."""
    return np.exp(n_soliton_logdet(data, x, t))


def n_soliton_field(data: SolitonData, x, t):
    """u(x,t) = -2 d^2/dx^2 log det(I+G), evaluated exactly.

    d/dx of each subset exponent is -2*K_S with K_S the subset kappa-sum, so
    the second log-derivative is 4 Var_p(K_S) under the softmax weights p.
    """
    _, _, var = _tau(data).log_tau_and_moments(x, t)
    return -8.0 * var


def soliton_field(kappa, x0, x, t):
    """Single right-moving soliton -2 kappa^2 sech^2(kappa(x - x0) - 4 kappa^3 t)."""
    x = np.asarray(x, dtype=float)
    return -2.0 * kappa**2 / np.cosh(kappa * (x - x0) - 4.0 * kappa**3 * np.asarray(t)) ** 2


def soliton_norming_constant(kappa, x0):
    """Norming constant placing the soliton crest at x0 at t = 0."""
    return 2.0 * kappa * np.exp(2.0 * kappa * x0)


def pure_step_reflection(h, k):
    """Full-line reflection coefficient of the step q = -h^2*(x<0):
    R(k) = -(h/(|k| + sqrt(k^2+h^2)))^2, real and even."""
    k = np.asarray(k, dtype=float)
    return -((h / (np.abs(k) + np.sqrt(k * k + h * h))) ** 2)


def pure_step_rho(h, s):
    """Spectral mass function on [0,h] of the step:
    rho(s) = (1/(3 pi h^2)) (h^3 - (h^2 - s^2)^{3/2})."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0) or np.any(s > h):
        raise ValueError("s must lie in [0, h]")
    return (h**3 - (h * h - s * s) ** 1.5) / (3.0 * np.pi * h * h)


def pure_step_closed_forms(h, k=None, s=None):
    """Bundle of the closed-form step quantities; either argument optional."""
    out = {}
    if k is not None:
        out["R"] = pure_step_reflection(h, k)
    if s is not None:
        out["rho"] = pure_step_rho(h, s)
    return out
