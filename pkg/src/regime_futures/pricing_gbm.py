"""Closed-form RS-GBM futures prices.

``F_i(t, x) = e^x g_i(t)`` with ``g(t) = exp((G + Q~)(T - t)) 1`` and
``G = diag(mu_i + sigma_i^2 / 2)``.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DegenerateModel, InvalidInput, TimeBeyondMaturity
from .models import ModelKind, RegimeModelSpec
from .numerics import matrix_exponential

# relative |det Gamma| threshold used when a pricer set is built
DEGENERACY_TOL = 1e-10


def _check_times(t, maturity: float) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    slack = 1e-12 * max(1.0, maturity)
    if np.any(t > maturity + slack):
        raise TimeBeyondMaturity(f"t = {np.max(t)!r} exceeds maturity {maturity!r}")
    if np.any(t < -slack):
        raise InvalidInput("t must be >= 0")
    return np.clip(t, 0.0, maturity)


class GbmPricer:
    """Futures on the RS-GBM spot with a single maturity."""

    def __init__(self, spec: RegimeModelSpec, maturity: float):
        if spec.kind is not ModelKind.RS_GBM:
            raise InvalidInput("GbmPricer needs an RS-GBM spec")
        if not maturity > 0:
            raise InvalidInput("maturity must be > 0")
        self.spec = spec
        self.maturity = float(maturity)
        self.growth = spec.mu + 0.5 * spec.sigma ** 2
        self.system = np.diag(self.growth) + spec.q_q

    def g_vector(self, t) -> np.ndarray:
        """g(t); shape ``(M,)`` for scalar t, ``t.shape + (M,)`` otherwise."""
        t = _check_times(t, self.maturity)
        uniq, inv = np.unique(t.reshape(-1), return_inverse=True)
        e = matrix_exponential((self.maturity - uniq)[:, None, None] * self.system)
        g = e.sum(axis=-1)
        return g[inv].reshape(t.shape + (self.spec.m,))

    def price(self, t, x, i):
        t, x, k = np.broadcast_arrays(np.asarray(t, dtype=float),
                                      np.asarray(x, dtype=float), self.spec._idx(i))
        g = self.g_vector(t)
        out = np.exp(x) * np.take_along_axis(g, k[..., None], axis=-1)[..., 0]
        return out[()] if out.ndim == 0 else out

    def price_dx(self, t, x, i):
        """d/dx of e^x g_i(t) is the price itself."""
        return self.price(t, x, i)


def g_closed_form_single(mu: float, sigma: float, tau: float) -> float:
    """g for one regime: exp((mu + sigma^2/2) tau)."""
    return float(np.exp((mu + 0.5 * sigma ** 2) * tau))


class GbmPricerSet:
    """M futures with maturities T_1 < ... < T_M on one RS-GBM spot.

    Construction raises :class:`DegenerateModel` if the coefficient matrix
    is singular at ``t = T_1``; by the determinant law that settles it for
    every earlier time as well.
    """

    def __init__(self, spec: RegimeModelSpec, maturities: Sequence[float]):
        maturities = [float(T) for T in maturities]
        if len(maturities) != spec.m:
            raise InvalidInput(f"need {spec.m} maturities, got {len(maturities)}")
        if any(b <= a for a, b in zip(maturities, maturities[1:])):
            raise InvalidInput("maturities must be strictly increasing")
        self.spec = spec
        self.maturities = maturities
        self.pricers = [GbmPricer(spec, T) for T in maturities]
        self._check_invertible()

    def __iter__(self):
        return iter(self.pricers)

    def __len__(self):
        return len(self.pricers)

    def __getitem__(self, k):
        return self.pricers[k]

    def g_matrix(self, t) -> np.ndarray:
        """Column k holds g^{(k)}(t); shape ``(..., M, M)`` indexed [regime, maturity]."""
        return np.stack([p.g_vector(t) for p in self.pricers], axis=-1)

    def gamma(self, t: float, x: float, i: int) -> np.ndarray:
        """Coefficient matrix assembled directly from the g-vectors."""
        g = self.g_matrix(t)
        k = i - 1
        rows = [self.spec.sigma[k] * g[k]]
        rows += [g[j] - g[k] for j in range(self.spec.m) if j != k]
        return np.exp(x) * np.array(rows)

    def det_gamma(self, t: float, x: float, i: int) -> float:
        return float(np.linalg.det(self.gamma(t, x, i)))

    def det_law_rate(self) -> float:
        """Rate r with det Gamma(t) = exp(r (t - t0)) det Gamma(t0) at fixed x."""
        return float(-np.sum(self.growth_terms()))

    def growth_terms(self) -> np.ndarray:
        return self.spec.mu + 0.5 * self.spec.sigma ** 2 + np.diag(self.spec.q_q)

    def det_gamma_evolution(self, t0: float, t: float) -> float:
        """Predicted ratio det Gamma(t) / det Gamma(t0) (independent of x and i)."""
        T1 = self.maturities[0]
        if t0 > T1 or t > T1:
            raise TimeBeyondMaturity("t and t0 must not exceed the first maturity")
        return float(np.exp(self.det_law_rate() * (t - t0)))

    def _check_invertible(self) -> None:
        t = self.maturities[0]
        g = self.g_matrix(t)
        for k in range(self.spec.m):
            gam = self.gamma(t, 0.0, k + 1)
            # jump rows are measured against the price level, not their own norm
            scales = [np.linalg.norm(gam[0])] + [np.linalg.norm(g[k])] * (self.spec.m - 1)
            if abs(np.linalg.det(gam)) <= DEGENERACY_TOL * np.prod(scales):
                raise DegenerateModel(
                    f"coefficient matrix singular in regime {k + 1}: "
                    "mu_i + sigma_i^2/2 must separate the regimes"
                )
