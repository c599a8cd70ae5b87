"""Markov-modulated log-price models (RS-GBM and RS-XOU).

Both models have log-price dynamics ``dX = a~(t, X, i) dt + b(t, X, i) dZ^Q``
with ``b = sigma_i``; the P-drift adds ``zeta_i * sigma_i``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, RegimeOutOfRange
from .regime_chain import MeasurePair


class ModelKind(str, enum.Enum):
    RS_GBM = "rs-gbm"
    RS_XOU = "rs-xou"


def _vec(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RegimeModelSpec:
    """Per-regime coefficients plus the measure pair.

    Use :meth:`rs_gbm` / :meth:`rs_xou` rather than the raw constructor.
    ``mu`` is only meaningful for RS-GBM, ``kappa``/``theta`` for RS-XOU.
    """

    kind: ModelKind
    sigma: np.ndarray
    zeta: np.ndarray
    measures: MeasurePair
    mu: np.ndarray | None = None
    kappa: np.ndarray | None = None
    theta: np.ndarray | None = None

    def __post_init__(self):
        m = self.measures.m
        arrays = {"sigma": self.sigma, "zeta": self.zeta}
        if self.kind is ModelKind.RS_GBM:
            arrays["mu"] = self.mu
        else:
            arrays["kappa"] = self.kappa
            arrays["theta"] = self.theta
        for name, arr in arrays.items():
            if arr is None:
                raise InvalidInput(f"{name} is required for {self.kind.value}")
            if arr.shape != (m,):
                raise InvalidInput(f"{name} has length {arr.size}, expected M = {m}")
        if np.any(self.sigma <= 0):
            raise InvalidInput("sigma must be > 0 in every regime")
        if self.kind is ModelKind.RS_XOU and np.any(self.kappa <= 0):
            raise InvalidInput("kappa must be > 0 in every regime")

    @classmethod
    def rs_gbm(cls, mu, sigma, zeta, measures: MeasurePair) -> "RegimeModelSpec":
        return cls(ModelKind.RS_GBM, _vec(sigma, "sigma"), _vec(zeta, "zeta"), measures,
                   mu=_vec(mu, "mu"))

    @classmethod
    def rs_xou(cls, kappa, theta, sigma, zeta, measures: MeasurePair) -> "RegimeModelSpec":
        return cls(ModelKind.RS_XOU, _vec(sigma, "sigma"), _vec(zeta, "zeta"), measures,
                   kappa=_vec(kappa, "kappa"), theta=_vec(theta, "theta"))

    @property
    def m(self) -> int:
        return self.measures.m

    @property
    def q_p(self) -> np.ndarray:
        """Generator under the physical measure P."""
        return self.measures.p_gen.rates

    @property
    def q_q(self) -> np.ndarray:
        """Generator under the pricing measure Q."""
        return self.measures.q_gen.rates

    def _idx(self, i) -> np.ndarray:
        i = np.asarray(i)
        if np.any((i < 1) | (i > self.m)):
            raise RegimeOutOfRange(f"regime must be in 1..{self.m}")
        return i.astype(int) - 1

    def drift_q(self, t, x, i):
        """Q-drift of the log-price."""
        k = self._idx(i)
        x = np.asarray(x, dtype=float)
        if self.kind is ModelKind.RS_GBM:
            out = self.mu[k] + 0.0 * x
        else:
            out = self.kappa[k] * (self.theta[k] - x)
        return out[()] if np.ndim(out) == 0 else out

    def drift_p(self, t, x, i):
        """P-drift: Q-drift plus the risk-premium shift zeta_i * sigma_i."""
        k = self._idx(i)
        return self.drift_q(t, x, i) + self.zeta[k] * self.sigma[k]

    def vol(self, t, x, i):
        k = self._idx(i)
        out = self.sigma[k] + 0.0 * np.asarray(x, dtype=float)
        return out[()] if np.ndim(out) == 0 else out

    def exact_step(self, x, i, dt, z, measure: str = "P"):
        """Exact Gaussian transition of X over ``dt`` with regime ``i`` frozen.

        ``z`` are standard normals. ``measure`` selects the P or Q drift.
        """
        k = self._idx(i)
        x = np.asarray(x, dtype=float)
        dt = np.asarray(dt, dtype=float)
        shift = self.zeta[k] * self.sigma[k] if measure == "P" else 0.0
        s = self.sigma[k]
        if self.kind is ModelKind.RS_GBM:
            return x + (self.mu[k] + shift) * dt + s * np.sqrt(dt) * z
        kap = self.kappa[k]
        level = self.theta[k] + shift / kap
        decay = np.exp(-kap * dt)
        sd = s * np.sqrt(-np.expm1(-2.0 * kap * dt) / (2.0 * kap))
        return level + (x - level) * decay + sd * z

    def single_regime(self, i: int) -> "RegimeModelSpec":
        """The one-regime model obtained by freezing regime ``i``."""
        k = int(self._idx(i))
        measures = MeasurePair.from_rates([[0.0]])
        if self.kind is ModelKind.RS_GBM:
            return RegimeModelSpec.rs_gbm([self.mu[k]], [self.sigma[k]], [self.zeta[k]], measures)
        return RegimeModelSpec.rs_xou([self.kappa[k]], [self.theta[k]], [self.sigma[k]],
                                      [self.zeta[k]], measures)

    def with_measures(self, measures: MeasurePair) -> "RegimeModelSpec":
        return RegimeModelSpec(self.kind, self.sigma, self.zeta, measures,
                               mu=self.mu, kappa=self.kappa, theta=self.theta)
