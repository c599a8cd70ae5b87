"""RS-XOU futures prices on a grid.

Three routes:

* :func:`price_fdm` - Crank-Nicolson in spot space ``s = e^x`` on the
  geometric grid ``s_m = exp(x_m)``;
* :func:`price_fst` - Fourier space time-stepping in log-price space;
* :func:`price_identical_kappa` - separable form when every regime shares
  the same mean-reversion speed.

All three return objects with ``price(t, x, i)``, ``price_dx(t, x, i)`` and
``maturity``, the interface the strategy engine consumes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    GridTooCoarse,
    InvalidInput,
    KappasDiffer,
    LengthNotPowerOfTwo,
    OutOfGrid,
    StepTooLarge,
    UnstableParameters,
)
from .models import ModelKind, RegimeModelSpec
from .numerics import TridiagonalSystem, dft, idft, is_power_of_two, solve_tridiagonal

# stationary standard deviations kept on each side of the theta range
DOMAIN_WIDTH = 6.0


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Uniform log-price nodes ``x_min..x_max`` (both included) and ``n_t`` steps."""

    x_min: float
    x_max: float
    n_x: int
    n_t: int
    T: float

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise InvalidInput("x_min must be < x_max")
        if self.n_x < 8:
            raise GridTooCoarse(f"n_x = {self.n_x} < 8")
        if self.n_t < 1:
            raise InvalidInput("n_t must be >= 1")
        if not self.T > 0:
            raise InvalidInput("maturity must be > 0")

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_x)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_t + 1)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_x - 1)

    @property
    def dt(self) -> float:
        return self.T / self.n_t

    def central_mask(self) -> np.ndarray:
        """Nodes in the middle half of the domain."""
        x = self.x
        quarter = 0.25 * (self.x_max - self.x_min)
        return (x >= self.x_min + quarter) & (x <= self.x_max - quarter)


def default_domain(spec: RegimeModelSpec, width: float = DOMAIN_WIDTH) -> tuple[float, float]:
    half = width * float(np.max(spec.sigma / np.sqrt(2.0 * spec.kappa)))
    return float(np.min(spec.theta)) - half, float(np.max(spec.theta)) + half


def default_grid(spec: RegimeModelSpec, T: float, n_x: int = 1024, n_t: int = 400) -> SpaceTimeGrid:
    lo, hi = default_domain(spec)
    return SpaceTimeGrid(lo, hi, n_x, n_t, T)


def xou_single_regime_price(kappa, theta, sigma, T, t, x):
    """Closed-form futures price for the one-regime exponential OU model."""
    tau = np.asarray(T, dtype=float) - np.asarray(t, dtype=float)
    decay = np.exp(-kappa * tau)
    return np.exp(decay * x + theta * (1.0 - decay)
                  + sigma ** 2 * (1.0 - decay ** 2) / (4.0 * kappa))


def _require_xou(spec: RegimeModelSpec) -> None:
    if spec.kind is not ModelKind.RS_XOU:
        raise InvalidInput("RS-XOU spec required")


class PricingSurface:
    """Grid-backed ``F_i(t_n, x_m)``: cubic spline in x, linear in t."""

    def __init__(self, grid: SpaceTimeGrid, values: np.ndarray, method: str = ""):
        self.grid = grid
        self.values = values  # (M, n_t + 1, n_x)
        self.method = method
        self.maturity = grid.T
        self._x = grid.x
        spline = CubicSpline(self._x, np.moveaxis(values, -1, 0), axis=0)
        self._c = spline.c  # (4, n_x - 1, M, n_t + 1)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    def _locate(self, t, x, i):
        t, x, i = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float),
                                      np.asarray(i))
        g = self.grid
        tol_t = 1e-12 * max(1.0, g.T)
        tol_x = 1e-12 * max(1.0, abs(g.x_min), abs(g.x_max))
        if np.any((t < -tol_t) | (t > g.T + tol_t)):
            raise OutOfGrid(f"t outside [0, {g.T}]")
        if np.any((x < g.x_min - tol_x) | (x > g.x_max + tol_x)):
            raise OutOfGrid(f"x outside [{g.x_min}, {g.x_max}]")
        if np.any((i < 1) | (i > self.m)):
            raise InvalidInput(f"regime must be in 1..{self.m}")
        u = np.clip(t, 0.0, g.T) / g.dt
        n = np.clip(np.floor(u).astype(int), 0, g.n_t - 1)
        w = u - n
        j = np.clip(np.searchsorted(self._x, x, side="right") - 1, 0, g.n_x - 2)
        h = x - self._x[j]
        return n, w, j, h, i.astype(int) - 1

    def _eval(self, t, x, i, deriv: bool):
        n, w, j, h, k = self._locate(t, x, i)
        c = self._c
        out = 0.0
        for layer, weight in ((n, 1.0 - w), (n + 1, w)):
            c3, c2, c1, c0 = (c[p, j, k, layer] for p in range(4))
            if deriv:
                v = (3.0 * c3 * h + 2.0 * c2) * h + c1
            else:
                v = ((c3 * h + c2) * h + c1) * h + c0
            out = out + weight * v
        return out[()] if np.ndim(out) == 0 else out

    def price(self, t, x, i):
        return self._eval(t, x, i, deriv=False)

    def price_dx(self, t, x, i):
        """Derivative of the cubic interpolant in x."""
        return self._eval(t, x, i, deriv=True)

    surface_dx = price_dx

    def layer(self, n: int) -> np.ndarray:
        """Node values ``(M, n_x)`` on time layer ``n``."""
        return self.values[:, n, :]


# ---------------------------------------------------------------------------
# Crank-Nicolson


def _fdm_operator(spec: RegimeModelSpec, x: np.ndarray):
    """Interior tridiagonal operator (lower, diag, upper) per regime.

    The boundary nodes are eliminated with ``d^2F/ds^2 = 0``, i.e. linear
    extrapolation from the two nearest interior nodes.
    """
    s = np.exp(x)
    hm = s[1:-1] - s[:-2]
    hp = s[2:] - s[1:-1]
    xi = x[1:-1]
    k = spec.kappa[:, None]
    th = spec.theta[:, None]
    sg2 = spec.sigma[:, None] ** 2
    a = (k * (th - xi) + 0.5 * sg2) * s[1:-1]
    b = 0.5 * sg2 * s[1:-1] ** 2
    lo = (-a * hp + 2.0 * b) / (hm * (hm + hp))
    di = (a * (hp - hm) - 2.0 * b) / (hm * hp)
    up = (a * hm + 2.0 * b) / (hp * (hm + hp))
    r0 = (s[1] - s[0]) / (s[2] - s[1])
    rn = (s[-1] - s[-2]) / (s[-2] - s[-3])
    di[:, 0] += lo[:, 0] * (1.0 + r0)
    up[:, 0] -= lo[:, 0] * r0
    di[:, -1] += up[:, -1] * (1.0 + rn)
    lo[:, -1] -= up[:, -1] * rn
    return lo, di, up, r0, rn


def _apply(lo, di, up, v):
    out = di * v
    out[:, 1:] += lo[:, 1:] * v[:, :-1]
    out[:, :-1] += up[:, :-1] * v[:, 1:]
    return out


def price_fdm(spec: RegimeModelSpec, T: float, grid: SpaceTimeGrid) -> PricingSurface:
    """Crank-Nicolson on the s-space pricing PDE.

    Each step is a CN solve per regime with the regime coupling
    ``sum_j q~_ij (F_j - F_i)`` taken explicitly at a predicted midpoint;
    the predictor is an implicit half step.
    """
    _require_xou(spec)
    if abs(grid.T - T) > 1e-12 * max(1.0, T):
        raise InvalidInput("grid maturity does not match T")
    x = grid.x
    lo, di, up, r0, rn = _fdm_operator(spec, x)
    q = spec.q_q
    h = grid.dt
    m = spec.m

    def implicit(rhs, dtau):
        out = np.empty_like(rhs)
        for r in range(m):
            system = TridiagonalSystem(-dtau * lo[r, 1:], 1.0 - dtau * di[r], -dtau * up[r, :-1], rhs[r])
            out[r] = solve_tridiagonal(system)
        return out

    values = np.empty((m, grid.n_t + 1, grid.n_x))
    f = np.broadcast_to(np.exp(x), (m, grid.n_x)).copy()
    values[:, grid.n_t] = f
    for n in range(grid.n_t - 1, -1, -1):
        fi = f[:, 1:-1]
        mid = implicit(fi + 0.5 * h * (q @ fi), 0.5 * h)
        rhs = fi + 0.5 * h * _apply(lo, di, up, fi) + h * (q @ mid)
        new = implicit(rhs, 0.5 * h)
        f[:, 1:-1] = new
        f[:, 0] = (1.0 + r0) * new[:, 0] - r0 * new[:, 1]
        f[:, -1] = (1.0 + rn) * new[:, -1] - rn * new[:, -2]
        if np.any(new <= 0) or not np.all(np.isfinite(new)):
            raise UnstableParameters(f"non-positive or non-finite price at step {n}")
        values[:, n] = f
    return PricingSurface(grid, values, method="fdm")


# ---------------------------------------------------------------------------
# Fourier space time-stepping


def chain_step_matrix(q_tilde: np.ndarray, dt: float) -> np.ndarray:
    """First-order transition matrix I + Q~ dt of the discretised chain."""
    p = np.eye(q_tilde.shape[0]) + q_tilde * dt
    if np.any(np.diag(p) < 0):
        raise StepTooLarge(f"1 + q~_ii dt < 0 for dt = {dt}")
    return p


def characteristic_factor(kappa, theta, sigma, dt, omega):
    """Per-step multiplier in frequency space along the characteristics."""
    e1 = np.exp(kappa * dt)
    e2 = np.exp(2.0 * kappa * dt)
    return np.exp(kappa * dt - theta * 1j * omega * (1.0 - e1)
                  + sigma ** 2 * omega ** 2 * (1.0 - e2) / (4.0 * kappa))


def price_fst(spec: RegimeModelSpec, T: float, grid: SpaceTimeGrid,
              resample: str = "exact") -> PricingSurface:
    """Fourier space time-stepping.

    Per step and regime: transform the layer, evaluate it at the dilated
    frequencies ``e^{kappa dt} omega`` (zero beyond Nyquist), multiply by the
    characteristic factor, mix regimes with ``I + Q~ dt`` and invert.

    ``resample`` picks how the dilated frequencies are reached:
    ``"linear"`` interpolates the FFT spectrum; ``"exact"`` evaluates the
    transform of the sampled layer directly at the off-grid frequencies.
    """
    _require_xou(spec)
    if resample not in ("exact", "linear"):
        raise InvalidInput(f"unknown resample mode {resample!r}")
    n = grid.n_x
    if not is_power_of_two(n):
        raise LengthNotPowerOfTwo(f"n_x = {n} is not a power of two")
    dt = grid.dt
    p = chain_step_matrix(spec.q_q, dt)
    x = grid.x
    dx = grid.dx
    # frequencies are referenced to the window centre to keep phases slow
    centre = x[0] + (n // 2) * dx
    y = x - centre
    omega = 2.0 * np.pi * np.fft.fftfreq(n, d=dx)
    nyquist = np.pi / dx
    m = spec.m

    factors = []
    scaled = []
    for r in range(m):
        w = np.exp(spec.kappa[r] * dt) * omega
        inside = np.abs(w) <= nyquist
        fac = characteristic_factor(spec.kappa[r], spec.theta[r] - centre, spec.sigma[r], dt, omega)
        factors.append(np.where(inside, fac, 0.0))
        scaled.append(w)

    to_spec = dx * np.exp(-1j * omega * y[0])
    from_spec = np.exp(1j * omega * y[0]) / dx

    if resample == "exact":
        kernels = [dx * np.exp(-1j * np.outer(w, y)) for w in scaled]

        def dilated(r, f):
            return kernels[r] @ f
    else:
        order = np.argsort(omega)
        om_sorted = omega[order]

        def dilated(r, f):
            spec_r = (to_spec * dft(f))[order]
            w = scaled[r]
            return (np.interp(w, om_sorted, spec_r.real, left=0.0, right=0.0)
                    + 1j * np.interp(w, om_sorted, spec_r.imag, left=0.0, right=0.0))

    # The chord through the window endpoints is removed before transforming,
    # so the periodic extension of what is transformed has no jump. A linear
    # function steps back exactly: E[a + b X'] = a + b (theta + (x - theta) e^{-kappa dt}).
    decay = np.exp(-spec.kappa * dt)
    span = x[-1] - x[0]

    values = np.empty((m, grid.n_t + 1, n))
    f = np.broadcast_to(np.exp(x), (m, n)).copy()
    values[:, grid.n_t] = f
    for step in range(grid.n_t - 1, -1, -1):
        slope = (f[:, -1] - f[:, 0]) / span
        chord = f[:, :1] + slope[:, None] * (x - x[0])
        rest = f - chord
        g = np.array([factors[r] * dilated(r, rest[r]) for r in range(m)])
        line = (f[:, :1] + slope[:, None] * ((spec.theta - x[0]) * (1.0 - decay))[:, None]
                + (slope * decay)[:, None] * (x - x[0]))
        f = idft((p @ g) * from_spec).real + p @ line
        values[:, step] = f
    return PricingSurface(grid, values, method=f"fst-{resample}")


# ---------------------------------------------------------------------------
# identical kappa: F_i = exp(e^{-kappa (T - t)} x) h_i(t)


class SeparableSurface:
    """Futures prices when all regimes share one kappa.

    ``t_grid`` and ``h`` (shape ``(n_t + 1, M)``) hold the ODE solution;
    between nodes h is interpolated with a cubic spline in t.
    """

    method = "separable"

    def __init__(self, spec: RegimeModelSpec, T: float, t_grid: np.ndarray, h: np.ndarray):
        self.spec = spec
        self.maturity = float(T)
        self.kappa = float(spec.kappa[0])
        self.t_grid = t_grid
        self.h = h
        self._log_h = CubicSpline(t_grid, np.log(h), axis=0)

    @property
    def m(self) -> int:
        return self.spec.m

    def h_at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any((t < -1e-12) | (t > self.maturity + 1e-12)):
            raise OutOfGrid(f"t outside [0, {self.maturity}]")
        return np.exp(self._log_h(np.clip(t, 0.0, self.maturity)))

    def price(self, t, x, i):
        t, x, k = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float),
                                      self.spec._idx(i))
        hk = np.take_along_axis(self.h_at(t), k[..., None], axis=-1)[..., 0]
        out = np.exp(np.exp(-self.kappa * (self.maturity - t)) * x) * hk
        return out[()] if out.ndim == 0 else out

    def price_dx(self, t, x, i):
        out = np.exp(-self.kappa * (self.maturity - np.asarray(t, dtype=float))) * self.price(t, x, i)
        return out[()] if np.ndim(out) == 0 else out

    surface_dx = price_dx


def price_identical_kappa(spec: RegimeModelSpec, T: float, n_t: int = 1000) -> SeparableSurface:
    """Solve the h ODE system backward from h(T) = 1 with classical RK4."""
    _require_xou(spec)
    if not np.allclose(spec.kappa, spec.kappa[0], rtol=0.0, atol=0.0):
        raise KappasDiffer(f"kappa differs across regimes: {spec.kappa.tolist()}")
    if n_t < 1:
        raise InvalidInput("n_t must be >= 1")
    kap = float(spec.kappa[0])
    q = spec.q_q
    theta, sig2 = spec.theta, spec.sigma ** 2

    def rhs(tau, h):
        # dh/dtau with tau = T - t
        e = np.exp(-kap * tau)
        return (kap * theta * e + 0.5 * sig2 * e * e) * h + q @ h

    d = T / n_t
    h = np.ones(spec.m)
    out = np.empty((n_t + 1, spec.m))
    out[n_t] = h
    for step in range(n_t):
        tau = step * d
        k1 = rhs(tau, h)
        k2 = rhs(tau + 0.5 * d, h + 0.5 * d * k1)
        k3 = rhs(tau + 0.5 * d, h + 0.5 * d * k2)
        k4 = rhs(tau + d, h + d * k3)
        h = h + d * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        out[n_t - step - 1] = h
    if np.any(out <= 0):
        raise UnstableParameters("h became non-positive")
    return SeparableSurface(spec, T, np.linspace(0.0, T, n_t + 1), out)


def max_rel_diff_central(a, b, grid: SpaceTimeGrid, t: float = 0.0) -> float:
    """sup |a - b| / |b| over regimes and central-half nodes at time ``t``."""
    x = grid.x[grid.central_mask()]
    worst = 0.0
    for i in range(1, a.m + 1):
        fa = a.price(t, x, i)
        fb = b.price(t, x, i)
        worst = max(worst, float(np.max(np.abs(fa - fb) / np.abs(fb))))
    return worst
