"""Coefficient matrix, transformed strategies and futures positions.

Row 0 of the coefficient matrix holds ``sigma_i dF^{(k)}/dx`` across the
maturities; the remaining rows hold ``F_j^{(k)} - F_i^{(k)}`` for ``j != i``
in ascending order. Transformed strategies use the same row order:
``[pi~0, pi~j for j != i ascending]``.

Every function broadcasts over array-valued ``t``, ``x`` and ``i``; the
matrix/vector dimensions sit in the trailing axes.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DegenerateModel, InvalidInput, SingularGamma, TimeBeyondMaturity
from .hjb import PhiSolution
from .models import RegimeModelSpec

# |det| <= tol * prod(row scales) counts as singular
SINGULAR_TOL = 1e-12


def _others(m: int) -> np.ndarray:
    """Row r lists the regimes j != r (0-based, ascending)."""
    return np.array([[j for j in range(m) if j != r] for r in range(m)], dtype=int).reshape(m, m - 1)


def _prices(pricers, spec, t, x, i):
    m = spec.m
    if len(pricers) != m:
        raise InvalidInput(f"need {m} futures (one per regime), got {len(pricers)}")
    t, x, i = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float),
                                  np.asarray(i))
    first = min(p.maturity for p in pricers)
    if np.any(t > first + 1e-12 * max(1.0, first)):
        raise TimeBeyondMaturity("t must not exceed the shortest maturity")
    k = spec._idx(i)
    # levels[..., j, k] = F_j^{(k)}(t, x)
    levels = np.stack(
        [np.stack([np.asarray(p.price(t, x, j + 1), dtype=float) for p in pricers], axis=-1)
         for j in range(m)],
        axis=-2,
    )
    slopes = np.stack([np.asarray(p.price_dx(t, x, i), dtype=float) for p in pricers], axis=-1)
    return k, levels, slopes


def _assemble(spec, k, levels, slopes):
    m = spec.m
    own = np.take_along_axis(levels, k[..., None, None], axis=-2)  # (..., 1, M)
    rows = [spec.sigma[k][..., None] * slopes]
    if m > 1:
        idx = _others(m)[k]  # (..., M-1)
        other = np.take_along_axis(levels, idx[..., None], axis=-2)
        rows.append(other - own)
    gamma = np.concatenate([rows[0][..., None, :]] + rows[1:], axis=-2)
    scales = np.concatenate(
        [np.linalg.norm(rows[0], axis=-1)[..., None],
         np.repeat(np.linalg.norm(own[..., 0, :], axis=-1)[..., None], m - 1, axis=-1)],
        axis=-1,
    )
    return gamma, scales


def build_gamma(pricers: Sequence, spec: RegimeModelSpec, t, x, i) -> np.ndarray:
    """Coefficient matrix, shape ``(..., M, M)``; column k is maturity k."""
    k, levels, slopes = _prices(pricers, spec, t, x, i)
    return _assemble(spec, k, levels, slopes)[0]


def build_gamma_scaled(pricers: Sequence, spec: RegimeModelSpec, t, x, i):
    """Like :func:`build_gamma` but also returns per-row magnitude scales.

    Jump rows are scaled by the norm of the regime-``i`` price row, so a row
    that vanishes up to rounding is recognised as singular.
    """
    k, levels, slopes = _prices(pricers, spec, t, x, i)
    return _assemble(spec, k, levels, slopes)


def log_rate_ratio(spec: RegimeModelSpec) -> np.ndarray:
    """log(q~_ij / q_ij) with 0 on the diagonal and for absent transitions."""
    q, qt = spec.q_p, spec.q_q
    live = (q > 0) & ~np.eye(spec.m, dtype=bool)
    return np.where(live, np.log(np.where(live, qt, 1.0) / np.where(live, q, 1.0)), 0.0)


def jump_exposure(spec: RegimeModelSpec, phi: PhiSolution, t, gamma: float) -> np.ndarray:
    """Full matrix of optimal pi~^{(j)} for every (i, j): shape ``t.shape + (M, M)``."""
    ph = phi(t)
    live = (spec.q_p > 0) & ~np.eye(spec.m, dtype=bool)
    lij = log_rate_ratio(spec) + ph[..., :, None] - ph[..., None, :]
    return np.where(live, -lij / gamma, 0.0)


def optimal_tilde(spec: RegimeModelSpec, phi: PhiSolution, t, i, gamma: float) -> np.ndarray:
    """Optimal transformed strategy ``[zeta_i/gamma, pi~^{(j)}, j != i]``.

    Depends on (t, i) only, never on wealth.
    """
    if not gamma > 0:
        raise InvalidInput("gamma must be > 0")
    t, i = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(i))
    k = spec._idx(i)
    head = (spec.zeta[k] / gamma)[..., None]
    if spec.m == 1:
        return head
    full = jump_exposure(spec, phi, t, gamma)
    row = np.take_along_axis(full, k[..., None, None], axis=-2)[..., 0, :]
    tail = np.take_along_axis(row, _others(spec.m)[k], axis=-1)
    return np.concatenate([head, tail], axis=-1)


def recover_positions(gamma: np.ndarray, tilde: np.ndarray, row_scale=None) -> np.ndarray:
    """Solve ``gamma @ pi = tilde`` (LU with partial pivoting).

    Raises SingularGamma when ``|det| <= 1e-12 * prod(row_scale)``;
    ``row_scale`` defaults to the row norms of ``gamma``.
    """
    gamma = np.asarray(gamma, dtype=float)
    tilde = np.asarray(tilde, dtype=float)
    if row_scale is None:
        row_scale = np.linalg.norm(gamma, axis=-1)
    det = np.linalg.det(gamma)
    if np.any(np.abs(det) <= SINGULAR_TOL * np.prod(row_scale, axis=-1)):
        raise SingularGamma("coefficient matrix is singular")
    return np.linalg.solve(gamma, tilde[..., None])[..., 0]


def optimal_positions(pricers: Sequence, spec: RegimeModelSpec, phi: PhiSolution, t, x, i,
                      gamma: float, with_det: bool = False):
    """Generic pipeline: coefficient matrix, transformed optimum, inversion."""
    gam, scales = build_gamma_scaled(pricers, spec, t, x, i)
    tilde = optimal_tilde(spec, phi, t, i, gamma)
    tilde = np.broadcast_to(tilde, gam.shape[:-1])
    pos = recover_positions(gam, tilde, scales)
    if with_det:
        return pos, np.linalg.det(gam)
    return pos


def _two_regime_parts(spec, phi, t, i, gamma):
    if spec.m != 2:
        raise InvalidInput("two-regime closed form needs M = 2")
    if not gamma > 0:
        raise InvalidInput("gamma must be > 0")
    t, i = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(i))
    k = spec._idx(i)
    j = 1 - k
    ph = phi(t)
    phi_i = np.take_along_axis(ph, k[..., None], axis=-1)[..., 0]
    phi_j = np.take_along_axis(ph, j[..., None], axis=-1)[..., 0]
    lij = log_rate_ratio(spec)[k, j] + phi_i - phi_j
    return k, j, lij


def strategy_two_regime_gbm(spec: RegimeModelSpec, pricers: Sequence, phi: PhiSolution,
                            t, x, i, gamma: float) -> np.ndarray:
    """Explicit RS-GBM positions for two regimes and two maturities."""
    t, x, i = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float),
                                  np.asarray(i))
    k, j, lij = _two_regime_parts(spec, phi, t, i, gamma)
    g1 = pricers[0].g_vector(t)
    g2 = pricers[1].g_vector(t)

    def pick(g, idx):
        return np.take_along_axis(g, idx[..., None], axis=-1)[..., 0]

    g1i, g1j, g2i, g2j = pick(g1, k), pick(g1, j), pick(g2, k), pick(g2, j)
    den = g1i * g2j - g1j * g2i
    if np.any(np.abs(den) <= SINGULAR_TOL * np.abs(g1i * g2j)):
        raise DegenerateModel("g-vectors do not separate the regimes")
    sig, zet = spec.sigma[k], spec.zeta[k]
    pref = -np.exp(-np.asarray(x, dtype=float)) / (gamma * sig * den)
    pi1 = pref * (-zet * (g2j - g2i) - sig * g2i * lij)
    pi2 = pref * (zet * (g1j - g1i) + sig * g1i * lij)
    return np.stack([pi1, pi2], axis=-1)


def strategy_two_regime_xou(surfaces: Sequence, spec: RegimeModelSpec, phi: PhiSolution,
                            t, x, i, gamma: float) -> np.ndarray:
    """Explicit two-regime positions from grid (or separable) price surfaces.

    Uses the regime-i slopes dF_i^{(k)}/dx, which is what inverting the
    2x2 coefficient matrix gives.
    """
    t, x, i = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float),
                                  np.asarray(i))
    k, j, lij = _two_regime_parts(spec, phi, t, i, gamma)
    f1, f2 = surfaces
    d1 = f1.price(t, x, j + 1) - f1.price(t, x, k + 1)
    d2 = f2.price(t, x, j + 1) - f2.price(t, x, k + 1)
    s1 = f1.price_dx(t, x, k + 1)
    s2 = f2.price_dx(t, x, k + 1)
    sig, zet = spec.sigma[k], spec.zeta[k]
    den = sig * (d2 * s1 - d1 * s2)
    scale = sig * np.hypot(s1, s2) * np.hypot(f1.price(t, x, k + 1), f2.price(t, x, k + 1))
    if np.any(np.abs(den) <= SINGULAR_TOL * scale):
        raise SingularGamma("coefficient matrix is singular")
    pref = -1.0 / (gamma * den)
    pi1 = pref * (-zet * d2 - sig * s2 * lij)
    pi2 = pref * (zet * d1 + sig * s1 * lij)
    return np.stack([pi1, pi2], axis=-1)
