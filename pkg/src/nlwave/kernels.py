"""Convolution kernels and their second-difference stencils.

A kernel ``beta`` enters the scheme only through the weights

    b_k = h * (D+D- beta_h)_k = (beta((k+1)h) - 2 beta(kh) + beta((k-1)h)) / h,

so kernels whose second derivative is a measure (kinks, compact support) need
no special treatment.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import fft as sfft
from scipy.linalg import toeplitz

from .grid_ops import GridSequence, MeshMismatchError

DECAY_CLASSES = ("compact", "exponential", "algebraic")

# Closed-form total variations of beta'' for the smooth built-ins: beta''
# changes sign once on each half-line, so |mu|(R) = 4 |beta'(x*)| at the
# inflection point x*.
LORENTZIAN_TV = 3.0 * math.sqrt(3.0) / (2.0 * math.pi)
SECH2_TV = 2.0 / (3.0 * math.sqrt(3.0))


class KernelWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Kernel:
    """An even, integrable kernel with ``beta''`` a finite measure.

    Attributes:
        name: identifier used in configs and reports.
        evaluate: vectorized ``x -> beta(x)``.
        tv_mass: total variation ``|mu|(R)`` of ``mu = beta''``.
        support_radius: half-width of the support, ``math.inf`` if unbounded.
        decay_class: one of ``compact``, ``exponential``, ``algebraic``.
        second_derivative: optional closed form of the absolutely continuous
            part of ``beta''`` (used only by bound checks).
    """

    name: str
    evaluate: Callable[[np.ndarray], np.ndarray]
    tv_mass: float
    support_radius: float = math.inf
    decay_class: str = "exponential"
    second_derivative: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __call__(self, x):
        return self.evaluate(np.asarray(x, dtype=float))

    def tail_mass(self, radius: float) -> float:
        """Bound on ``int_{|x|>radius} beta``; zero beyond compact support."""
        if radius >= self.support_radius:
            return 0.0
        return _TAILS.get(self.name, lambda r: math.inf)(radius)


def _exp(x):
    return 0.5 * np.exp(-np.abs(x))


def _lorentz(x):
    return 1.0 / (np.pi * (1.0 + x * x))


def _lorentz_dd(x):
    return (6.0 * x * x - 2.0) / (np.pi * (1.0 + x * x) ** 3)


def _sech2(x):
    # 1/(e^x + e^-x + 2) written to avoid overflow for large |x|
    e = np.exp(-np.abs(x))
    return e / (1.0 + e) ** 2


def _sech2_dd(x):
    e = np.exp(-np.abs(x))
    s2 = 4.0 * e / (1.0 + e) ** 2  # sech^2(x/2)
    t = (1.0 - e) / (1.0 + e)  # tanh(|x|/2)
    return 0.125 * s2 * (3.0 * t * t - 1.0)


def _triangle(x):
    return np.maximum(0.0, 1.0 - np.abs(x))


_TAILS = {
    "exp": lambda r: math.exp(-r),
    "lorentz": lambda r: 1.0 - 2.0 * math.atan(r) / math.pi,
    "sech2": lambda r: 2.0 * math.exp(-r) / (1.0 + math.exp(-r)),
}


def kernel_exponential() -> Kernel:
    """``beta(x) = exp(-|x|)/2``; ``beta'' = beta - delta`` so ``|mu|(R) = 2``."""
    return Kernel("exp", _exp, 2.0, math.inf, "exponential",
                  second_derivative=_exp)


def kernel_lorentzian() -> Kernel:
    """``beta(x) = 1/(pi (1 + x^2))``."""
    return Kernel("lorentz", _lorentz, LORENTZIAN_TV, math.inf, "algebraic",
                  second_derivative=_lorentz_dd)


def kernel_sech2() -> Kernel:
    """``beta(x) = 1/(e^x + e^-x + 2) = sech^2(x/2)/4``."""
    return Kernel("sech2", _sech2, SECH2_TV, math.inf, "exponential",
                  second_derivative=_sech2_dd)


def kernel_triangular() -> Kernel:
    """``beta(x) = max(0, 1 - |x|)``; point masses 1, -2, 1 give ``|mu|(R) = 4``."""
    return Kernel("triangle", _triangle, 4.0, 1.0, "compact")


BUILTIN_KERNELS = {
    "exp": kernel_exponential,
    "lorentz": kernel_lorentzian,
    "sech2": kernel_sech2,
    "triangle": kernel_triangular,
}


def kernel_by_name(name: str) -> Kernel:
    try:
        return BUILTIN_KERNELS[name]()
    except KeyError:
        raise KeyError(f"unknown kernel {name!r}; expected one of {sorted(BUILTIN_KERNELS)}") from None


def kernel_custom(
    evaluate: Callable[[np.ndarray], np.ndarray],
    tv_mass: float,
    support_radius: float = math.inf,
    decay_class: str = "exponential",
    name: str = "custom",
    seed: int = 0,
) -> Kernel:
    """Wrap a user kernel.

    Evenness is spot-checked on 16 random probes and only warned about;
    non-finite values at the probes are rejected.
    """
    if not tv_mass >= 0:
        raise ValueError(f"tv_mass must be non-negative, got {tv_mass}")
    if decay_class not in DECAY_CLASSES:
        raise ValueError(f"decay_class must be one of {DECAY_CLASSES}")
    rng = np.random.default_rng(seed)
    scale = support_radius if math.isfinite(support_radius) else 10.0
    probes = rng.uniform(-scale, scale, 16)

    def wrapped(x):
        return np.asarray(evaluate(np.asarray(x, dtype=float)), dtype=float) * np.ones_like(x, dtype=float)

    left, right = wrapped(probes), wrapped(-probes)
    if not (np.all(np.isfinite(left)) and np.all(np.isfinite(right))):
        raise ValueError("kernel returned non-finite values at probe points")
    if not np.allclose(left, right, rtol=1e-10, atol=1e-14):
        warnings.warn(f"kernel {name!r} is not even at probe points", KernelWarning, stacklevel=2)
    return Kernel(name, wrapped, float(tv_mass), support_radius, decay_class)


def load_tabulated_kernel(path: str | Path, tv_mass: float | None = None, name: str | None = None) -> Kernel:
    """Kernel from a two-column ``x beta(x)`` text file.

    Values are linearly interpolated and zero outside the table, so the
    stencil is only first-order accurate in the table spacing. When
    ``tv_mass`` is not given it is estimated from the table's second
    differences (the total variation of the interpolant's derivative).
    """
    data = np.loadtxt(path, ndmin=2)
    if data.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns, got {data.shape[1]}")
    order = np.argsort(data[:, 0])
    xs, ys = data[order, 0], data[order, 1]
    if tv_mass is None:
        xe = np.concatenate(([xs[0] - 1.0], xs, [xs[-1] + 1.0]))
        ye = np.concatenate(([0.0], ys, [0.0]))
        slopes = np.diff(ye) / np.diff(xe)
        tv_mass = float(np.abs(np.diff(slopes)).sum())
    radius = float(max(abs(xs[0]), abs(xs[-1])))

    def evaluate(x):
        return np.interp(x, xs, ys, left=0.0, right=0.0)

    return kernel_custom(evaluate, tv_mass, radius, "compact", name or Path(path).stem)


# -- second-difference weights --------------------------------------------------

@dataclass(frozen=True, eq=False)
class KernelWeights:
    """Toeplitz stencil ``b_k`` for ``-K <= k <= K`` on mesh ``grid_h``.

    ``weights[K + k]`` holds ``b_k``. ``dropped`` counts entries zeroed by an
    opt-in cutoff.
    """

    grid_h: float
    K: int
    weights: np.ndarray
    kernel_name: str = ""
    dropped: int = 0

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.shape != (2 * self.K + 1,):
            raise ValueError("weights must have length 2K+1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    def __getitem__(self, k: int) -> float:
        return float(self.weights[self.K + k]) if abs(k) <= self.K else 0.0

    @property
    def l1(self) -> float:
        """``sum_k |b_k|``, which equals ``||D+D- beta_h||_{l_h^1}``."""
        return float(np.abs(self.weights).sum())

    @property
    def row_sum(self) -> float:
        return float(self.weights.sum())

    def operator(self, n: int, method: str = "auto") -> "ToeplitzOperator":
        return ToeplitzOperator(self, n, method)


def second_difference_weights(kernel: Kernel, h: float, K: int, cutoff: bool = False) -> KernelWeights:
    """Weights ``b_k = (beta((k+1)h) - 2beta(kh) + beta((k-1)h))/h``, ``|k| <= K``.

    The stencil is symmetrized from the ``k >= 0`` half so that
    ``b_k == b_{-k}`` holds exactly. With ``cutoff=True`` entries with
    ``|b_k| < 1e-15 max|b|`` are zeroed and counted in ``dropped``.
    """
    if not h > 0:
        raise ValueError(f"h must be positive, got {h}")
    if K < 1:
        raise ValueError(f"K must be at least 1, got {K}")
    k = np.arange(K + 1, dtype=float)
    half = (kernel(k * h + h) - 2.0 * kernel(k * h) + kernel(k * h - h)) / h
    dropped = 0
    if cutoff:
        small = np.abs(half) < 1e-15 * np.abs(half).max()
        dropped = int(2 * small[1:].sum() + small[0])
        half = np.where(small, 0.0, half)
    weights = np.concatenate((half[:0:-1], half))
    return KernelWeights(h, K, weights, kernel.name, dropped)


def weights_for_grid(kernel: Kernel, grid, cutoff: bool = False) -> KernelWeights:
    """Full-width stencil ``K = i_max - i_min`` (the dense truncated matrix)."""
    return second_difference_weights(kernel, grid.h, max(1, grid.size - 1), cutoff)


def telescoping_tail_bound(kernel: Kernel, h: float, K: int) -> float:
    """Bound on ``|sum_{|k|<=K} b_k|``; the second differences telescope."""
    return 2.0 * (abs(float(kernel(K * h))) + abs(float(kernel((K + 1) * h)))) / h


# -- Toeplitz products -----------------------------------------------------------

_DENSE_LIMIT = 2048


class ToeplitzOperator:
    """The map ``g -> (sum_k b_k g_{i-k})_i`` on ``n`` consecutive indices.

    ``method`` picks the execution path: ``direct`` (reference loop with a
    fixed summation order), ``dense`` (explicit matrix), ``fft``, or ``auto``
    (dense up to 2048 points, FFT beyond).
    """

    def __init__(self, weights: KernelWeights, n: int, method: str = "auto"):
        if method == "auto":
            method = "dense" if n <= _DENSE_LIMIT else "fft"
        if method not in ("direct", "dense", "fft"):
            raise ValueError(f"unknown method {method!r}")
        self.weights = weights
        self.n = n
        self.method = method
        K = weights.K
        # b_k for 0 <= k <= n-1, zero beyond the stencil
        col = np.zeros(n)
        m = min(n, K + 1)
        col[:m] = weights.weights[K:K + m]
        self._col = col
        if method == "dense":
            self._matrix = toeplitz(col)
        elif method == "fft":
            self._nfft = sfft.next_fast_len(2 * n - 1, real=True)
            circ = np.zeros(self._nfft)
            circ[:n] = col
            circ[self._nfft - n + 1:] = col[1:][::-1]
            self._spectrum = sfft.rfft(circ)

    def __call__(self, g: np.ndarray) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        if g.shape != (self.n,):
            raise ValueError(f"expected vector of length {self.n}, got {g.shape}")
        if self.method == "dense":
            return self._matrix @ g
        if self.method == "fft":
            return sfft.irfft(sfft.rfft(g, self._nfft) * self._spectrum, self._nfft)[:self.n]
        return _toeplitz_direct(self._col, g)


def _toeplitz_direct(col, g):
    n = g.size
    out = np.empty(n)
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += col[abs(i - j)] * g[j]
        out[i] = acc
    return out


def apply_weights(w: KernelWeights, g: GridSequence, method: str = "auto") -> GridSequence:
    """``(B g)_i = sum_k b_k g_{i-k}`` on g's range with zero extension."""
    if w.grid_h != g.h:
        raise MeshMismatchError(f"weights built for h={w.grid_h}, sequence has h={g.h}")
    return g.with_values(ToeplitzOperator(w, g.grid.size, method)(g.values))
