"""Continuous-time Markov regime chain under the physical and pricing measures.

Regimes are labelled 1..M at every public interface.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import (
    InvalidInput,
    MeasureInequivalence,
    NegativeOffDiagonal,
    NonFinite,
    NonSquare,
    RegimeOutOfRange,
    RowSumNonzero,
)
from .numerics import matrix_exponential

ROW_SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    """Validated rate matrix; build with :func:`validate_generator`."""

    rates: np.ndarray

    @property
    def m(self) -> int:
        return self.rates.shape[0]

    def exit_rates(self) -> np.ndarray:
        return -np.diag(self.rates)

    def off_diagonal(self, i: int, j: int) -> float:
        """q(i, j) with 1-based labels."""
        return float(self.rates[i - 1, j - 1])

    def __eq__(self, other):
        return isinstance(other, GeneratorMatrix) and np.array_equal(self.rates, other.rates)

    def __repr__(self):
        return f"GeneratorMatrix({self.rates.tolist()})"


def validate_generator(rates) -> GeneratorMatrix:
    """Check that ``rates`` is a generator; no renormalisation is attempted."""
    q = np.array(rates, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] == 0:
        raise NonSquare(f"generator must be a non-empty square matrix, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise NonFinite("generator has non-finite entries")
    off = q[~np.eye(q.shape[0], dtype=bool)]
    if np.any(off < 0):
        raise NegativeOffDiagonal("off-diagonal rates must be >= 0")
    row_sums = q.sum(axis=1)
    bad = np.flatnonzero(np.abs(row_sums) > ROW_SUM_TOL)
    if bad.size:
        raise RowSumNonzero(
            f"row {bad[0] + 1} sums to {row_sums[bad[0]]!r}, expected 0"
        )
    q.setflags(write=False)
    return GeneratorMatrix(q)


@dataclass(frozen=True)
class MeasurePair:
    """Generators of the chain under P (``p_gen``) and Q (``q_gen``)."""

    p_gen: GeneratorMatrix
    q_gen: GeneratorMatrix

    def __post_init__(self):
        if self.p_gen.m != self.q_gen.m:
            raise InvalidInput(
                f"generator sizes differ: P has {self.p_gen.m}, Q has {self.q_gen.m}"
            )
        off = ~np.eye(self.m, dtype=bool)
        zp = (self.p_gen.rates == 0) & off
        zq = (self.q_gen.rates == 0) & off
        if np.any(zp != zq):
            i, j = np.argwhere(zp != zq)[0] + 1
            raise MeasureInequivalence(
                f"q({i},{j}) and q~({i},{j}) must be zero together"
            )

    @property
    def m(self) -> int:
        return self.p_gen.m

    @classmethod
    def from_rates(cls, p_rates, q_rates=None) -> "MeasurePair":
        p = validate_generator(p_rates)
        q = p if q_rates is None else validate_generator(q_rates)
        return cls(p, q)


@dataclass(frozen=True)
class RegimePath:
    """Piecewise-constant regime trajectory on ``[t0, t1]``.

    ``jumps`` is a tuple of ``(time, new_state)`` pairs with strictly
    increasing times in ``(t0, t1]``.
    """

    t0: float
    t1: float
    initial_state: int
    jumps: tuple = field(default_factory=tuple)

    def __post_init__(self):
        prev_t, prev_s = self.t0, self.initial_state
        for t, s in self.jumps:
            if not (prev_t < t <= self.t1):
                raise InvalidInput(f"jump time {t} out of order or outside ({self.t0}, {self.t1}]")
            if s == prev_s:
                raise InvalidInput(f"jump at {t} does not change state")
            prev_t, prev_s = t, s

    @property
    def switch_times(self) -> np.ndarray:
        return np.array([t for t, _ in self.jumps], dtype=float)

    def state_at(self, t):
        """Regime in force at ``t`` (right-continuous)."""
        times = self.switch_times
        states = np.array([self.initial_state] + [s for _, s in self.jumps])
        return states[np.searchsorted(times, t, side="right")]

    def occupation_times(self, m: int) -> np.ndarray:
        occ = np.zeros(m)
        edges = [self.t0] + [t for t, _ in self.jumps] + [self.t1]
        states = [self.initial_state] + [s for _, s in self.jumps]
        for s, a, b in zip(states, edges[:-1], edges[1:]):
            occ[s - 1] += b - a
        return occ


def transition_matrix(gen: GeneratorMatrix, dt: float) -> np.ndarray:
    """P(dt) = exp(Q dt)."""
    if dt < 0:
        raise InvalidInput("dt must be >= 0")
    return matrix_exponential(gen.rates * dt)


def stationary_distribution(gen: GeneratorMatrix) -> np.ndarray:
    """Solve pi Q = 0, sum(pi) = 1 (assumes an irreducible chain)."""
    m = gen.m
    a = np.vstack([gen.rates.T, np.ones(m)])
    b = np.zeros(m + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    return pi


def _check_state(gen: GeneratorMatrix, i) -> None:
    i = np.asarray(i)
    if np.any((i < 1) | (i > gen.m)):
        raise RegimeOutOfRange(f"regime must be in 1..{gen.m}")


def _jump_cdf(gen: GeneratorMatrix) -> np.ndarray:
    """Row-wise CDF of the embedded jump chain (absorbing rows stay put)."""
    q = gen.rates
    rates = -np.diag(q)
    probs = np.where(np.eye(gen.m, dtype=bool), 0.0, q)
    with np.errstate(invalid="ignore", divide="ignore"):
        probs = np.where(rates[:, None] > 0, probs / rates[:, None], np.eye(gen.m))
    cdf = np.cumsum(probs, axis=1)
    cdf[:, -1] = 1.0
    return cdf


def sample_path(gen: GeneratorMatrix, t0: float, t1: float, i0: int,
                rng: np.random.Generator) -> RegimePath:
    """Draw one regime path with exponential holding times and embedded jumps."""
    if not t0 < t1:
        raise InvalidInput("t0 must be < t1")
    _check_state(gen, i0)
    rates = gen.exit_rates()
    cdf = _jump_cdf(gen)
    jumps = []
    t, s = t0, int(i0)
    while True:
        rate = rates[s - 1]
        if rate <= 0:
            break
        t += rng.exponential(1.0 / rate)
        if t > t1:
            break
        s = int(np.searchsorted(cdf[s - 1], rng.random(), side="right")) + 1
        jumps.append((t, s))
    return RegimePath(t0, t1, int(i0), tuple(jumps))


def iter_segments(gen: GeneratorMatrix, t0: float, t1: float, i0, n_paths: int,
                  rng: np.random.Generator) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Vectorised chain simulation for Monte Carlo.

    Yields ``(state, duration, start)`` arrays, one entry per path, for each
    successive holding segment; ``duration`` is zero for paths that have
    already reached ``t1``. The final ``state`` yielded is the state at ``t1``.
    """
    _check_state(gen, i0)
    rates = gen.exit_rates()
    cdf = _jump_cdf(gen)
    state = np.broadcast_to(np.asarray(i0, dtype=int), (n_paths,)).copy()
    t = np.full(n_paths, float(t0))
    active = np.ones(n_paths, dtype=bool)
    while active.any():
        r = rates[state - 1]
        hold = np.full(n_paths, np.inf)
        live = active & (r > 0)
        hold[live] = rng.exponential(1.0, live.sum()) / r[live]
        end = np.minimum(t + hold, t1)
        dur = np.where(active, end - t, 0.0)
        yield state.copy(), dur, t.copy()
        jumped = active & (t + hold <= t1)
        if jumped.any():
            u = rng.random(jumped.sum())
            rows = cdf[state[jumped] - 1]
            state[jumped] = (u[:, None] >= rows).sum(axis=1) + 1
        t = np.where(active, end, t)
        active = jumped
