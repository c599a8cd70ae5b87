"""Joint simulation of regime, spot, futures, optimal positions and wealth under P.

Each path owns a random stream derived from ``(seed, path index)``, and paths
are processed in fixed-size chunks, so the output does not depend on how many
worker threads run the chunks.

Regime-switch instants are inserted into the time grid twice: once with the
pre-switch regime and once with the post-switch regime. The spot does not move
between the two rows, while futures (and positions) jump.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidInput
from .hjb import PhiSolution, alpha_vector, solve_phi
from .models import ModelKind, RegimeModelSpec
from .pricing_gbm import GbmPricerSet
from .pricing_xou import default_grid, price_fdm, price_fst, price_identical_kappa
from .regime_chain import RegimePath, sample_path
from .strategy import jump_exposure, optimal_positions

CHUNK_SIZE = 256
XOU_METHODS = ("fdm", "fst", "separable")


@dataclass(frozen=True, eq=False)
class SimConfig:
    """Inputs for one simulation experiment.

    ``forced_switches`` fixes the regime path for every scenario as a
    sequence of ``(time, new_regime)``; otherwise paths are sampled under P.
    ``dt`` defaults to ``horizon / 1000``.
    """

    spec: RegimeModelSpec
    maturities: tuple
    horizon: float
    gamma: float
    x0: float
    i0: int
    w0: float = 1.0
    dt: float | None = None
    n_paths: int = 1
    seed: int = 0
    forced_switches: tuple | None = None
    workers: int = 1
    pricing_method: str = "fdm"
    n_x: int = 1024
    n_t: int = 400

    def __post_init__(self):
        mats = tuple(float(T) for T in self.maturities)
        object.__setattr__(self, "maturities", mats)
        if len(mats) != self.spec.m:
            raise InvalidInput(f"need {self.spec.m} maturities, got {len(mats)}")
        if any(b <= a for a, b in zip(mats, mats[1:])):
            raise InvalidInput("maturities must be strictly increasing")
        if not 0 < self.horizon <= mats[0]:
            raise InvalidInput("horizon must satisfy 0 < horizon <= T1")
        if self.dt is not None and not self.dt > 0:
            raise InvalidInput("dt must be > 0")
        if not self.gamma > 0:
            raise InvalidInput("gamma must be > 0")
        if self.n_paths < 1 or self.workers < 1:
            raise InvalidInput("n_paths and workers must be >= 1")
        self.spec._idx(self.i0)
        if self.pricing_method not in XOU_METHODS:
            raise InvalidInput(f"pricing_method must be one of {XOU_METHODS}")
        if self.forced_switches is not None:
            jumps = tuple((float(t), int(s)) for t, s in self.forced_switches)
            object.__setattr__(self, "forced_switches", jumps)
            RegimePath(0.0, self.horizon, int(self.i0), jumps)

    @property
    def step(self) -> float:
        return self.horizon / self.n_steps

    @property
    def n_steps(self) -> int:
        dt = self.dt if self.dt is not None else 1e-3 * self.horizon
        return max(1, int(round(self.horizon / dt)))


@dataclass(frozen=True, eq=False)
class Market:
    """Everything a path needs that does not depend on randomness."""

    spec: RegimeModelSpec
    pricers: Sequence
    phi: PhiSolution
    gamma: float


def build_pricers(spec: RegimeModelSpec, maturities, method: str = "fdm",
                  n_x: int = 1024, n_t: int = 400):
    """One pricer per maturity: closed form for RS-GBM, a surface for RS-XOU."""
    if spec.kind is ModelKind.RS_GBM:
        return GbmPricerSet(spec, maturities)
    out = []
    for T in maturities:
        if method == "separable":
            out.append(price_identical_kappa(spec, T, n_t=max(n_t, 1000)))
        elif method == "fst":
            out.append(price_fst(spec, T, default_grid(spec, T, n_x, n_t)))
        elif method == "fdm":
            out.append(price_fdm(spec, T, default_grid(spec, T, n_x, n_t)))
        else:
            raise InvalidInput(f"unknown pricing method {method!r}")
    return out


def prepare_market(config: SimConfig) -> Market:
    spec = config.spec
    pricers = build_pricers(spec, config.maturities, config.pricing_method, config.n_x, config.n_t)
    phi = solve_phi(spec.q_q, alpha_vector(spec.zeta, spec.measures), config.horizon)
    return Market(spec, pricers, phi, config.gamma)


# ---------------------------------------------------------------------------
# building blocks


def path_rows(grid: np.ndarray, regime_path: RegimePath):
    """Merge a time grid with the switch instants of ``regime_path``.

    Returns ``(t, regime)``; each switch contributes a pre- and a post-switch row.
    """
    sw = regime_path.switch_times
    states = [regime_path.initial_state] + [s for _, s in regime_path.jumps]
    t = np.concatenate([grid, sw, sw])
    reg = np.concatenate([regime_path.state_at(grid), states[:-1], states[1:]]).astype(int)
    kind = np.concatenate([np.full(grid.size, 2), np.zeros(sw.size), np.ones(sw.size)])
    order = np.lexsort((kind, t))
    return t[order], reg[order]


def step_spot(spec: RegimeModelSpec, x0, t: np.ndarray, regime: np.ndarray, z: np.ndarray):
    """Exact P-transitions along rows; ``z`` has one fewer column than ``t``.

    Returns ``(x, dz)`` where ``dz = sqrt(dt) z`` is the Gaussian shock used
    on each interval. Zero-length intervals leave x untouched.
    """
    t = np.atleast_2d(t)
    regime = np.atleast_2d(regime)
    z = np.atleast_2d(z)
    dt = np.diff(t, axis=-1)
    x = np.empty(t.shape)
    x[:, 0] = x0
    for r in range(dt.shape[1]):
        moved = spec.exact_step(x[:, r], regime[:, r], dt[:, r], z[:, r], measure="P")
        x[:, r + 1] = np.where(dt[:, r] > 0, moved, x[:, r])
    return x, np.sqrt(dt) * z


def simulate_spot(spec: RegimeModelSpec, regime_path: RegimePath, x0: float, dt: float,
                  rng: np.random.Generator):
    """Log-spot along one regime path on a grid of step ``dt`` plus switch rows.

    Returns ``(t, regime, x)``.
    """
    n = max(1, int(round((regime_path.t1 - regime_path.t0) / dt)))
    grid = np.linspace(regime_path.t0, regime_path.t1, n + 1)
    t, reg = path_rows(grid, regime_path)
    z = rng.standard_normal(t.size - 1)
    x, _ = step_spot(spec, x0, t, reg, z)
    return t, reg, x[0]


def mark_to_market(pricers: Sequence, t, x, regime) -> np.ndarray:
    """Futures prices F^{(k)}_{regime}(t, x); trailing axis is the maturity."""
    return np.stack([np.asarray(p.price(t, x, regime), dtype=float) for p in pricers], axis=-1)


def simulate_optimal_wealth(positions: np.ndarray, futures: np.ndarray, w0: float) -> np.ndarray:
    """Self-financing wealth with positions held from each row to the next."""
    inc = np.sum(positions[..., :-1, :] * np.diff(futures, axis=-2), axis=-1)
    w = np.empty(futures.shape[:-1])
    w[..., 0] = w0
    w[..., 1:] = w0 + np.cumsum(inc, axis=-1)
    return w


def euler_optimal_wealth(market: Market, t: np.ndarray, regime: np.ndarray, dz: np.ndarray,
                         w0: float) -> np.ndarray:
    """Euler scheme for the optimal wealth dynamics under P.

    drift ``zeta_i^2/gamma - sum_j q~_ij pi~_j``, diffusion ``zeta_i/gamma dZ``,
    and a jump of ``pi~_j`` when the regime moves from i to j.
    """
    spec, gamma = market.spec, market.gamma
    k = regime - 1
    exposure = jump_exposure(spec, market.phi, t, gamma)  # (..., M, M)
    row = np.take_along_axis(exposure, k[..., None, None], axis=-2)[..., 0, :]
    drift = spec.zeta[k] ** 2 / gamma - np.sum(spec.q_q[k] * row, axis=-1)
    dt = np.diff(t, axis=-1)
    nxt = k[..., 1:]
    jump = np.where(nxt != k[..., :-1],
                    np.take_along_axis(row[..., :-1, :], nxt[..., None], axis=-1)[..., 0], 0.0)
    inc = drift[..., :-1] * dt + spec.zeta[k[..., :-1]] / gamma * dz + jump
    w = np.empty(t.shape)
    w[..., 0] = w0
    w[..., 1:] = w0 + np.cumsum(inc, axis=-1)
    return w


def evaluate_rows(market: Market, t, regime, x, dz, w0: float) -> dict:
    """Futures, positions, |det Gamma| and both wealth series along given rows."""
    futures = mark_to_market(market.pricers, t, x, regime)
    pos, det = optimal_positions(market.pricers, market.spec, market.phi, t, x, regime,
                                 market.gamma, with_det=True)
    return {
        "futures": futures,
        "positions": pos,
        "abs_det_gamma": np.abs(det),
        "wealth": simulate_optimal_wealth(pos, futures, w0),
        "euler_wealth": euler_optimal_wealth(market, t, regime, dz, w0),
    }


# ---------------------------------------------------------------------------
# experiment driver


@dataclass(frozen=True, eq=False)
class PathBundle:
    """Aligned series for one scenario (one row per grid point or switch side)."""

    t: np.ndarray
    regime: np.ndarray
    log_spot: np.ndarray
    futures: np.ndarray
    positions: np.ndarray
    wealth: np.ndarray
    abs_det_gamma: np.ndarray
    euler_wealth: np.ndarray
    dz: np.ndarray

    @property
    def spot(self) -> np.ndarray:
        return np.exp(self.log_spot)

    def switch_rows(self) -> np.ndarray:
        """Row indices r where the regime changes between r and r + 1."""
        return np.flatnonzero(np.diff(self.regime) != 0)


@dataclass(frozen=True, eq=False)
class PathBatch:
    """Padded per-path arrays; ``lengths[p]`` rows are meaningful for path p."""

    lengths: np.ndarray
    arrays: dict = field(repr=False)

    @property
    def n_paths(self) -> int:
        return self.lengths.size

    def path(self, p: int) -> PathBundle:
        n = int(self.lengths[p])
        a = self.arrays
        return PathBundle(
            t=a["t"][p, :n], regime=a["regime"][p, :n], log_spot=a["log_spot"][p, :n],
            futures=a["futures"][p, :n], positions=a["positions"][p, :n],
            wealth=a["wealth"][p, :n], abs_det_gamma=a["abs_det_gamma"][p, :n],
            euler_wealth=a["euler_wealth"][p, :n], dz=a["dz"][p, :n - 1],
        )

    def __iter__(self):
        return (self.path(p) for p in range(self.n_paths))

    def terminal(self, name: str) -> np.ndarray:
        arr = self.arrays[name]
        return arr[np.arange(self.n_paths), self.lengths - 1]


def _path_stream(seed: int, p: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(p,)))


def _run_chunk(config: SimConfig, market: Market, start: int, stop: int) -> dict:
    grid = np.linspace(0.0, config.horizon, config.n_steps + 1)
    gen = config.spec.measures.p_gen
    rows = []
    for p in range(start, stop):
        rng = _path_stream(config.seed, p)
        if config.forced_switches is None:
            rp = sample_path(gen, 0.0, config.horizon, int(config.i0), rng)
        else:
            rp = RegimePath(0.0, config.horizon, int(config.i0), config.forced_switches)
        t, reg = path_rows(grid, rp)
        rows.append((t, reg, rng.standard_normal(t.size - 1)))
    lengths = np.array([r[0].size for r in rows])
    width = lengths.max()
    n = len(rows)
    t = np.full((n, width), config.horizon)
    reg = np.empty((n, width), dtype=int)
    z = np.zeros((n, width - 1))
    for q, (tq, rq, zq) in enumerate(rows):
        t[q, :tq.size] = tq
        reg[q, :rq.size] = rq
        reg[q, rq.size:] = rq[-1]
        z[q, :zq.size] = zq
    x, dz = step_spot(config.spec, config.x0, t, reg, z)
    out = evaluate_rows(market, t, reg, x, dz, config.w0)
    out.update(t=t, regime=reg, log_spot=x, dz=dz, lengths=lengths)
    return out


def run_experiment(config: SimConfig, market: Market | None = None) -> PathBatch:
    """Simulate ``config.n_paths`` scenarios; deterministic given the seed."""
    if market is None:
        market = prepare_market(config)
    bounds = [(s, min(s + CHUNK_SIZE, config.n_paths)) for s in range(0, config.n_paths, CHUNK_SIZE)]
    if config.workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            chunks = list(pool.map(lambda b: _run_chunk(config, market, *b), bounds))
    else:
        chunks = [_run_chunk(config, market, *b) for b in bounds]
    lengths = np.concatenate([c.pop("lengths") for c in chunks])
    width = int(lengths.max())
    arrays = {}
    for name in chunks[0]:
        parts = []
        for c in chunks:
            a = c[name]
            pad = width - (1 if name == "dz" else 0) - a.shape[1]
            if pad:
                # repeat the final row so padding stays inert
                a = np.concatenate([a, np.repeat(a[:, -1:], pad, axis=1)], axis=1)
                if name == "dz":
                    a[:, -pad:] = 0.0
            parts.append(a)
        arrays[name] = np.concatenate(parts, axis=0)
    return PathBatch(lengths, arrays)
