"""Shared numerical kernels.

Matrix exponential (Pade scaling-and-squaring), integrated exponential
action via an augmented matrix, a Thomas tridiagonal solver and a
power-of-two DFT wrapper.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, LengthNotPowerOfTwo, NonFinite, NonSquare, ZeroPivot

__all__ = [
    "matrix_exponential",
    "integrated_matexp_action",
    "TridiagonalSystem",
    "solve_tridiagonal",
    "dft",
    "idft",
    "is_power_of_two",
]

# Higham (2005), table 2.3: backward-error thresholds for degrees 3..13.
_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}

_PADE_COEFFS = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (
        17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0,
    ),
    13: (
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0, 129060195264000.0, 10559470521600.0,
        670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
        960960.0, 16380.0, 182.0, 1.0,
    ),
}


def _pade(a: np.ndarray, m: int) -> np.ndarray:
    """[m/m] Pade approximant of exp for a stack of matrices."""
    b = _PADE_COEFFS[m]
    ident = np.broadcast_to(np.eye(a.shape[-1], dtype=a.dtype), a.shape)
    a2 = a @ a
    if m == 13:
        a4 = a2 @ a2
        a6 = a4 @ a2
        u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
                 + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
        v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
             + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident)
    else:
        powers = [ident, a2]
        for _ in range(2, m // 2 + 1):
            powers.append(powers[-1] @ a2)
        u_inner = sum(b[2 * k + 1] * powers[k] for k in range(m // 2 + 1))
        u = a @ u_inner
        v = sum(b[2 * k] * powers[k] for k in range(m // 2 + 1))
    return np.linalg.solve(v - u, v + u)


def matrix_exponential(a) -> np.ndarray:
    """exp(a) by Pade scaling-and-squaring (Higham 2005).

    Accepts a single square matrix or a stack ``(..., n, n)``; each matrix in
    the stack gets its own degree and scaling.
    """
    a = np.asarray(a)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise NonSquare(f"expected square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFinite("matrix has non-finite entries")
    dtype = np.result_type(a.dtype, np.float64)
    n = a.shape[-1]
    flat = a.reshape(-1, n, n).astype(dtype)
    out = np.empty_like(flat)
    norms = np.abs(flat).sum(axis=-2).max(axis=-1) if n else np.zeros(len(flat))

    done = np.zeros(len(flat), dtype=bool)
    for m in (3, 5, 7, 9):
        sel = ~done & (norms <= _THETA[m])
        if sel.any():
            out[sel] = _pade(flat[sel], m)
            done |= sel
    rest = ~done
    if rest.any():
        s = np.maximum(0, np.ceil(np.log2(norms[rest] / _THETA[13]))).astype(int)
        r = _pade(flat[rest] / (2.0 ** s)[:, None, None], 13)
        for k in range(int(s.max())):
            sq = s > k
            r[sq] = r[sq] @ r[sq]
        out[rest] = r
    return out.reshape(a.shape)


def integrated_matexp_action(a, v, tau) -> np.ndarray:
    """Compute ``int_0^tau exp(a s) v ds``.

    Exponentiates the block matrix ``[[a, v], [0, 0]] * tau`` and reads off the
    top-right column, so singular ``a`` (e.g. a generator) is fine. ``tau``
    may be an array; the result then has shape ``tau.shape + (n,)``.
    """
    a = np.asarray(a, dtype=float)
    v = np.asarray(v, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NonSquare(f"expected square matrix, got shape {a.shape}")
    n = a.shape[0]
    if v.shape != (n,):
        raise InvalidInput(f"vector of length {n} expected, got shape {v.shape}")
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise InvalidInput("tau must be >= 0")
    aug = np.zeros((n + 1, n + 1))
    aug[:n, :n] = a
    aug[:n, n] = v
    e = matrix_exponential(tau[..., None, None] * aug)
    return e[..., :n, n]


@dataclass(frozen=True)
class TridiagonalSystem:
    """``lower`` and ``upper`` hold the n-1 off-diagonal entries."""

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        n = len(self.diag)
        if n == 0:
            raise InvalidInput("empty system")
        if len(self.rhs) != n or len(self.lower) != n - 1 or len(self.upper) != n - 1:
            raise InvalidInput(
                f"inconsistent sizes: diag {n}, lower {len(self.lower)}, "
                f"upper {len(self.upper)}, rhs {len(self.rhs)}"
            )


def solve_tridiagonal(system: TridiagonalSystem) -> np.ndarray:
    """Thomas algorithm without pivoting; raises ZeroPivot on breakdown."""
    a = np.asarray(system.lower, dtype=float).tolist()
    b = np.asarray(system.diag, dtype=float).tolist()
    c = np.asarray(system.upper, dtype=float).tolist()
    d = np.asarray(system.rhs, dtype=float).tolist()
    n = len(b)
    scale = max(max(map(abs, b)), max(map(abs, a), default=0.0), max(map(abs, c), default=0.0))
    tiny = 64 * np.finfo(float).eps * scale

    cp = [0.0] * n
    dp = [0.0] * n
    piv = b[0]
    if abs(piv) <= tiny:
        raise ZeroPivot("zero pivot in row 0")
    if n > 1:
        cp[0] = c[0] / piv
    dp[0] = d[0] / piv
    for k in range(1, n):
        piv = b[k] - a[k - 1] * cp[k - 1]
        if abs(piv) <= tiny:
            raise ZeroPivot(f"zero pivot in row {k}")
        if k < n - 1:
            cp[k] = c[k] / piv
        dp[k] = (d[k] - a[k - 1] * dp[k - 1]) / piv

    x = dp
    for k in range(n - 2, -1, -1):
        x[k] -= cp[k] * x[k + 1]
    return np.array(x)


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def dft(values) -> np.ndarray:
    """Forward DFT, ``X_k = sum_m x_m exp(-2 pi i k m / n)``; n must be 2^p."""
    values = np.asarray(values, dtype=complex)
    if not is_power_of_two(values.shape[-1]):
        raise LengthNotPowerOfTwo(f"length {values.shape[-1]} is not a power of two")
    return np.fft.fft(values, axis=-1)


def idft(values) -> np.ndarray:
    """Inverse of :func:`dft` (includes the 1/n factor)."""
    values = np.asarray(values, dtype=complex)
    if not is_power_of_two(values.shape[-1]):
        raise LengthNotPowerOfTwo(f"length {values.shape[-1]} is not a power of two")
    return np.fft.ifft(values, axis=-1)
