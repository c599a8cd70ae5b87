"""Reduced HJB system for exponential utility.

The value function is ``u_i(t, w) = -exp(-gamma w + phi_i(t))`` with

    phi(t) = -int_t^T~ exp(Q~ (T~ - s)) alpha ds,

where ``alpha_i = zeta_i^2 / 2 + sum_{j != i} [q~_ij log(q~_ij / q_ij) - q~_ij + q_ij]``.
None of this depends on the spot model, only on (zeta, Q, Q~).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRates, InvalidInput, MeasureInequivalence
from .numerics import integrated_matexp_action
from .regime_chain import GeneratorMatrix, MeasurePair


def alpha_vector(zeta, measures: MeasurePair) -> np.ndarray:
    """Per-regime rate alpha_i >= 0. Absent transitions contribute nothing."""
    zeta = np.asarray(zeta, dtype=float)
    q = measures.p_gen.rates
    qt = measures.q_gen.rates
    m = measures.m
    if zeta.shape != (m,):
        raise InvalidInput(f"zeta must have length {m}")
    off = ~np.eye(m, dtype=bool)
    if np.any(((q == 0) != (qt == 0)) & off):
        raise MeasureInequivalence("q and q~ must vanish together")
    live = off & (q > 0)
    ratio = np.where(live, qt, 1.0) / np.where(live, q, 1.0)
    entropy = np.where(live, qt * np.log(ratio) - qt + q, 0.0)
    return 0.5 * zeta ** 2 + entropy.sum(axis=1)


@dataclass(frozen=True, eq=False)
class PhiSolution:
    """phi on ``[0, horizon]``; call it with scalar or array times."""

    q_tilde: np.ndarray
    alpha: np.ndarray
    horizon: float

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t < -1e-12) or np.any(t > self.horizon * (1 + 1e-12) + 1e-12):
            raise InvalidInput(f"t outside [0, {self.horizon}]")
        tau = np.clip(self.horizon - t, 0.0, None)
        uniq, inv = np.unique(tau.reshape(-1), return_inverse=True)
        vals = -integrated_matexp_action(self.q_tilde, self.alpha, uniq)
        vals[uniq == 0.0] = 0.0
        return vals[inv].reshape(t.shape + (len(self.alpha),))

    def regime(self, t, i):
        """phi_i(t) for 1-based regime(s) ``i`` broadcast against ``t``."""
        t, i = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(i))
        out = np.take_along_axis(self(t), (i.astype(int) - 1)[..., None], axis=-1)[..., 0]
        return out[()] if out.ndim == 0 else out


def solve_phi(q_tilde, alpha, horizon: float) -> PhiSolution:
    if not horizon > 0:
        raise InvalidInput("horizon must be > 0")
    qt = q_tilde.rates if isinstance(q_tilde, GeneratorMatrix) else np.asarray(q_tilde, dtype=float)
    return PhiSolution(qt, np.asarray(alpha, dtype=float), float(horizon))


def phi_two_regime(lambdas, alpha, horizon: float, t):
    """Explicit two-regime phi; ``lambdas = (q~_12, q~_21)``."""
    l1, l2 = (float(v) for v in lambdas)
    a1, a2 = (float(v) for v in alpha)
    lam = l1 + l2
    if lam <= 0:
        raise DegenerateRates("q~_12 + q~_21 must be > 0")
    tau = horizon - np.asarray(t, dtype=float)
    base = (l2 * a1 + l1 * a2) * tau
    damp = -np.expm1(-lam * tau) / lam
    phi1 = -(base + l1 * (a1 - a2) * damp) / lam
    phi2 = -(base + l2 * (a2 - a1) * damp) / lam
    return phi1, phi2


@dataclass(frozen=True)
class RiskPreference:
    gamma: float
    w: float = 1.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise InvalidInput("gamma must be > 0")


def value_function(pref: RiskPreference, phi: PhiSolution, t, i):
    return -np.exp(-pref.gamma * pref.w + phi.regime(t, i))


def certainty_equivalent(pref: RiskPreference, phi: PhiSolution, t, i):
    """c_i(t, w) = w - phi_i(t) / gamma."""
    return pref.w - phi.regime(t, i) / pref.gamma


def ce_curve(zeta, measures: MeasurePair, gamma: float, w: float, horizons) -> np.ndarray:
    """Certainty equivalents at t = 0 for each remaining horizon; shape ``(len(horizons), M)``.

    Horizon 0 returns w exactly.
    """
    alpha = alpha_vector(zeta, measures)
    horizons = np.asarray(horizons, dtype=float)
    phi = -integrated_matexp_action(measures.q_gen.rates, alpha, horizons)
    phi[horizons == 0.0] = 0.0
    return w - phi / gamma
