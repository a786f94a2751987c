"""Sequence algebra on uniform one-dimensional grids.

Two-sided infinite sequences are represented by finite slices over an index
range ``[i_min, i_max]``; every value outside that range is read as zero.
Grid point ``i`` sits at ``x_i = i * h``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import signal

RealFunction = Callable[[np.ndarray], np.ndarray]


class MeshMismatchError(ValueError):
    """Raised when two sequences on different mesh sizes are combined."""


@dataclass(frozen=True)
class Grid:
    """Uniform grid ``x_i = i*h`` for ``i_min <= i <= i_max``."""

    h: float
    i_min: int
    i_max: int

    def __post_init__(self):
        if not (self.h > 0 and np.isfinite(self.h)):
            raise ValueError(f"mesh size must be positive, got h={self.h}")
        if int(self.i_min) != self.i_min or int(self.i_max) != self.i_max:
            raise ValueError("index bounds must be integers")
        object.__setattr__(self, "i_min", int(self.i_min))
        object.__setattr__(self, "i_max", int(self.i_max))
        if self.i_min > self.i_max:
            raise ValueError(f"empty index range [{self.i_min}, {self.i_max}]")

    @classmethod
    def symmetric(cls, h: float, n: int) -> "Grid":
        """The grid ``-n <= i <= n``."""
        return cls(h, -n, n)

    @classmethod
    def from_interval(cls, h: float, x_left: float, x_right: float, rtol: float = 1e-12) -> "Grid":
        """Grid whose end points are ``x_left`` and ``x_right``.

        Both ends must be integer multiples of ``h`` to relative precision
        ``rtol``.
        """
        if not x_left < x_right:
            raise ValueError(f"need x_left < x_right, got [{x_left}, {x_right}]")
        scale = max(abs(x_left), abs(x_right), h)
        bounds = []
        for end in (x_left, x_right):
            k = round(end / h)
            if abs(k * h - end) > rtol * scale:
                raise ValueError(f"h={h} does not divide the interval [{x_left}, {x_right}]")
            bounds.append(k)
        return cls(h, bounds[0], bounds[1])

    @property
    def size(self) -> int:
        return self.i_max - self.i_min + 1

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.i_min, self.i_max + 1)

    @property
    def x(self) -> np.ndarray:
        return self.indices * self.h

    def point(self, i: int) -> float:
        return i * self.h

    def shifted(self, k: int) -> "Grid":
        return Grid(self.h, self.i_min + k, self.i_max + k)


@dataclass(frozen=True, eq=False)
class GridSequence:
    """Values on a :class:`Grid`, zero outside its index range.

    ``diverged`` marks a sequence produced from overflowing arithmetic; only
    such sequences may hold non-finite values.
    """

    grid: Grid
    values: np.ndarray
    diverged: bool = field(default=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 1 or vals.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} values, got shape {vals.shape}")
        if not self.diverged and not np.all(np.isfinite(vals)):
            raise ValueError("non-finite values in a sequence not flagged as diverged")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, grid: Grid) -> "GridSequence":
        return cls(grid, np.zeros(grid.size))

    @classmethod
    def delta(cls, grid: Grid, i: int = 0, height: float = 1.0) -> "GridSequence":
        vals = np.zeros(grid.size)
        vals[i - grid.i_min] = height
        return cls(grid, vals)

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def __len__(self):
        return self.grid.size

    def __getitem__(self, i: int) -> float:
        """Value at grid index ``i`` (zero outside the range)."""
        if self.grid.i_min <= i <= self.grid.i_max:
            return float(self.values[i - self.grid.i_min])
        return 0.0

    def with_values(self, values) -> "GridSequence":
        return GridSequence(self.grid, values)

    def on(self, grid: Grid) -> "GridSequence":
        """Re-slice onto another range of the same mesh, zero filling."""
        _check_mesh(self.h, grid.h)
        out = np.zeros(grid.size)
        lo = max(grid.i_min, self.grid.i_min)
        hi = min(grid.i_max, self.grid.i_max)
        if lo <= hi:
            out[lo - grid.i_min:hi - grid.i_min + 1] = self.values[lo - self.grid.i_min:hi - self.grid.i_min + 1]
        return GridSequence(grid, out)

    def shift(self, k: int) -> "GridSequence":
        """The sequence ``(u_{i-k})`` kept on the same index range."""
        return GridSequence(self.grid.shifted(k), self.values).on(self.grid)


def _check_mesh(h1: float, h2: float):
    if h1 != h2:
        raise MeshMismatchError(f"mesh sizes differ: {h1} != {h2}")


# -- norms -----------------------------------------------------------------

def norm_lp(u: GridSequence, p: float) -> float:
    """The ``l_h^p`` norm ``(sum_i h |u_i|^p)^(1/p)``; ``p`` may be inf."""
    if p == np.inf:
        return norm_linf(u)
    if p not in (1, 2):
        raise ValueError(f"p must be 1, 2 or inf, got {p}")
    a = np.abs(u.values)
    if p == 1:
        return float(u.h * a.sum())
    return float(np.sqrt(u.h * np.dot(a, a)))


def norm_linf(u: GridSequence) -> float:
    if u.values.size == 0:
        return 0.0
    return float(np.max(np.abs(u.values)))


def inner(u: GridSequence, v: GridSequence) -> float:
    """``<u, v>`` in ``l_h^2`` over the union of both ranges."""
    _check_mesh(u.h, v.h)
    grid = Grid(u.h, min(u.grid.i_min, v.grid.i_min), max(u.grid.i_max, v.grid.i_max))
    return float(u.h * np.dot(u.on(grid).values, v.on(grid).values))


# -- convolution -------------------------------------------------------------

def convolve(u: GridSequence, v: GridSequence, method: str = "fast") -> GridSequence:
    """Discrete convolution ``(u*v)_i = sum_j h u_{i-j} v_j`` on v's range.

    ``method="direct"`` is the reference double loop with a fixed summation
    order per output index; ``method="fast"`` uses FFT convolution.
    """
    _check_mesh(u.h, v.h)
    h = u.h
    if method == "direct":
        out = _convolve_direct(u.values, u.grid.i_min, v.values, v.grid.i_min, v.grid.i_max)
    elif method == "fast":
        full = signal.fftconvolve(u.values, v.values)
        # full[m] sits at index u.i_min + v.i_min + m
        start = u.grid.i_min + v.grid.i_min
        out = np.zeros(v.grid.size)
        lo = max(v.grid.i_min, start)
        hi = min(v.grid.i_max, start + full.size - 1)
        if lo <= hi:
            out[lo - v.grid.i_min:hi - v.grid.i_min + 1] = full[lo - start:hi - start + 1]
    else:
        raise ValueError(f"unknown convolution method {method!r}")
    return GridSequence(v.grid, h * out)


def _convolve_direct(u, u_min, v, v_min, v_max):
    nu = u.size
    out = np.zeros(v_max - v_min + 1)
    for i in range(v_min, v_max + 1):
        acc = 0.0
        for j in range(v_min, v_max + 1):
            k = i - j - u_min
            if 0 <= k < nu:
                acc += u[k] * v[j - v_min]
        out[i - v_min] = acc
    return out


# -- difference operators ----------------------------------------------------

def _padded(u: GridSequence) -> np.ndarray:
    return np.concatenate(([0.0], u.values, [0.0]))


def diff_forward(u: GridSequence) -> GridSequence:
    """``(D+ u)_i = (u_{i+1} - u_i)/h``."""
    p = _padded(u)
    return u.with_values((p[2:] - p[1:-1]) / u.h)


def diff_backward(u: GridSequence) -> GridSequence:
    """``(D- u)_i = (u_i - u_{i-1})/h``."""
    p = _padded(u)
    return u.with_values((p[1:-1] - p[:-2]) / u.h)


def diff_second(u: GridSequence) -> GridSequence:
    """``(D+D- u)_i = (u_{i+1} - 2u_i + u_{i-1})/h^2``.

    Evaluated as a difference of first differences so that it is bit-equal
    to ``diff_forward(diff_backward(u))`` at interior indices.
    """
    p = _padded(u)
    back = (p[1:] - p[:-1]) / u.h
    return u.with_values((back[1:] - back[:-1]) / u.h)


# -- restriction and extension -----------------------------------------------

def restrict(f: RealFunction, grid: Grid) -> GridSequence:
    """Point samples ``(f(x_i))``."""
    vals = np.asarray(f(grid.x), dtype=float)
    if vals.shape == ():
        vals = np.full(grid.size, float(vals))
    return GridSequence(grid, vals)


def extend_p0(u: GridSequence) -> RealFunction:
    """Right-continuous step function taking ``u_i`` on ``[x_i, x_{i+1})``."""
    h, i_min, vals = u.h, u.grid.i_min, u.values

    def p0(x):
        x = np.asarray(x, dtype=float)
        k = np.floor(x / h).astype(np.int64) - i_min
        inside = (k >= 0) & (k < vals.size)
        return np.where(inside, vals[np.clip(k, 0, vals.size - 1)], 0.0)

    return p0


def extend_p1(u: GridSequence) -> RealFunction:
    """Piecewise linear interpolant of the nodes ``(x_i, u_i)``.

    On the last cell ``[x_{i_max}, x_{i_max}+h)`` it falls linearly to the
    implicit zero at ``i_max + 1``.
    """
    h, i_min = u.h, u.grid.i_min
    vals = np.concatenate((u.values, [0.0]))

    def p1(x):
        x = np.asarray(x, dtype=float)
        s = x / h
        k = np.floor(s).astype(np.int64)
        frac = s - k
        k = k - i_min
        inside = (k >= 0) & (k < vals.size - 1)
        kc = np.clip(k, 0, vals.size - 2)
        return np.where(inside, vals[kc] + (vals[kc + 1] - vals[kc]) * frac, 0.0)

    return p1


# -- continuous-function reference quadrature ---------------------------------

def support_window(f: RealFunction, tol: float = 1e-14, start: float = 1.0, limit: float = 1e4) -> float:
    """Half-width ``R`` beyond which ``|f| <= tol`` on a probe lattice."""
    radius = start
    while radius < limit:
        probe = np.linspace(radius, 2 * radius, 257)
        if max(np.abs(f(probe)).max(), np.abs(f(-probe)).max()) <= tol:
            return radius
        radius *= 2
    return limit


def lp_norm_function(f: RealFunction, p: float, a: float, b: float, h_ref: float) -> float:
    """L^p norm of ``f`` on ``[a, b]`` by composite trapezoid at mesh ``h_ref``."""
    n = max(2, int(np.ceil((b - a) / h_ref)) + 1)
    x = np.linspace(a, b, n)
    y = np.abs(f(x))
    if p == np.inf:
        return float(y.max())
    return float(np.trapezoid(y ** p, x) ** (1.0 / p))


@dataclass(frozen=True)
class QuadratureCheck:
    """Outcome of comparing ``sum_i h f(x_i)`` with ``int f``."""

    h: float
    integral: float
    riemann_sum: float
    error: float
    bound_first: float | None
    bound_second: float | None

    @property
    def violated(self) -> bool:
        bounds = [b for b in (self.bound_first, self.bound_second) if b is not None]
        return any(self.error > b for b in bounds)


def quadrature_error_bound_check(
    f: RealFunction,
    grid: Grid,
    *,
    integral: float | None = None,
    df_l1: float | None = None,
    second_variation: float | None = None,
    tail: float = 0.0,
) -> QuadratureCheck:
    """Measure ``|int f - sum h f(x_i)|`` against its first- and second-order bounds.

    ``df_l1`` is ``||f'||_{L^1}`` and ``second_variation`` the total variation
    of ``f''`` (a measure when ``f'`` jumps). When ``integral`` is not given it
    is computed by the reference trapezoid rule at mesh ``h/100`` over the
    grid span. ``tail`` is added to both bounds to account for mass outside
    the grid.
    """
    s = grid.h * float(np.sum(f(grid.x)))
    if integral is None:
        a, b = grid.x[0], grid.x[-1]
        x = np.linspace(a, b, (grid.size - 1) * 100 + 1)
        integral = float(np.trapezoid(f(x), x))
    err = abs(integral - s)
    b1 = None if df_l1 is None else grid.h * df_l1 + tail
    b2 = None if second_variation is None else grid.h ** 2 * second_variation + tail
    return QuadratureCheck(grid.h, integral, s, err, b1, b2)
