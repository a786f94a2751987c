"""The truncated semi-discrete system ``v'' = B f(v)`` on a finite grid.

Row ``i`` of ``B`` holds ``b_{i-j}``; indices outside the grid are dropped,
which is the same as zero-extending ``v`` there.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .grid_ops import Grid, GridSequence, restrict
from .kernels import Kernel, KernelWeights, ToeplitzOperator, weights_for_grid


@dataclass(frozen=True)
class Nonlinearity:
    """Pointwise nonlinearity ``f`` with ``f(0) = 0``."""

    name: str
    apply: Callable[[np.ndarray], np.ndarray]
    # max |f(z)/z| for |z| <= M, used by decay envelopes; None when unknown
    slope_bound: Callable[[float], float] | None = None

    def __call__(self, u):
        return self.apply(u)


def nonlinearity_quadratic() -> Nonlinearity:
    """``f(u) = u + u^2``."""
    return Nonlinearity("quadratic", lambda u: u + u * u, lambda m: 1.0 + m)


def nonlinearity_power(p: int) -> Nonlinearity:
    """``f(u) = u + u^p`` for an integer ``p >= 2``."""
    if int(p) != p or p < 2:
        raise ValueError(f"power must be an integer >= 2, got {p}")
    p = int(p)
    return Nonlinearity(f"power{p}", lambda u: u + u ** p, lambda m: 1.0 + m ** (p - 1))


def nonlinearity_linear() -> Nonlinearity:
    return Nonlinearity("linear", lambda u: 1.0 * u, lambda m: 1.0)


def nonlinearity_custom(fn: Callable[[np.ndarray], np.ndarray], name: str = "custom") -> Nonlinearity:
    f0 = float(np.asarray(fn(np.zeros(1)))[0])
    if abs(f0) > 1e-14:
        raise ValueError(f"nonlinearity must vanish at zero, got f(0) = {f0}")
    return Nonlinearity(name, fn)


NONLINEARITIES = {
    "quadratic": nonlinearity_quadratic,
    "linear": nonlinearity_linear,
}


def nonlinearity_by_name(name: str, power: int | None = None) -> Nonlinearity:
    if name == "power":
        return nonlinearity_power(3 if power is None else power)
    try:
        return NONLINEARITIES[name]()
    except KeyError:
        raise KeyError(f"unknown nonlinearity {name!r}") from None


@dataclass(frozen=True, eq=False)
class SystemState:
    """Displacement ``v`` and velocity ``w = dv/dt`` at time ``t``."""

    t: float
    v: GridSequence
    w: GridSequence

    def __post_init__(self):
        if self.v.grid != self.w.grid:
            raise ValueError("v and w must share one grid")

    @property
    def grid(self) -> Grid:
        return self.v.grid

    @property
    def diverged(self) -> bool:
        return self.v.diverged or self.w.diverged

    def as_vector(self) -> np.ndarray:
        return np.concatenate((self.v.values, self.w.values))

    @classmethod
    def from_vector(cls, t: float, grid: Grid, y: np.ndarray) -> "SystemState":
        n = grid.size
        bad = not np.all(np.isfinite(y))
        return cls(t, GridSequence(grid, y[:n], diverged=bad), GridSequence(grid, y[n:], diverged=bad))


@dataclass(frozen=True, eq=False)
class Problem:
    """Kernel weights, nonlinearity and initial data on one grid."""

    kernel_weights: KernelWeights
    nonlinearity: Nonlinearity
    grid: Grid
    initial_v: GridSequence
    initial_w: GridSequence
    method: str = "auto"

    def __post_init__(self):
        if self.initial_v.grid != self.grid or self.initial_w.grid != self.grid:
            raise ValueError("initial data must live on the problem grid")
        if self.kernel_weights.grid_h != self.grid.h:
            raise ValueError("kernel weights built for a different mesh size")

    @classmethod
    def build(
        cls,
        kernel: Kernel,
        nonlinearity: Nonlinearity,
        grid: Grid,
        phi: Callable[[np.ndarray], np.ndarray],
        psi: Callable[[np.ndarray], np.ndarray],
        method: str = "auto",
        cutoff: bool = False,
    ) -> "Problem":
        v0, w0 = restrict_initial_data(phi, psi, grid)
        return cls(weights_for_grid(kernel, grid, cutoff), nonlinearity, grid, v0, w0, method)

    @cached_property
    def operator(self) -> ToeplitzOperator:
        return ToeplitzOperator(self.kernel_weights, self.grid.size, self.method)

    def initial_state(self) -> SystemState:
        return SystemState(0.0, self.initial_v, self.initial_w)

    def acceleration(self, v: np.ndarray) -> np.ndarray:
        """``B f(v)`` on raw arrays; non-finite input propagates."""
        with np.errstate(over="ignore", invalid="ignore"):
            return self.operator(self.nonlinearity(v))

    def vector_field(self, t: float, y: np.ndarray) -> np.ndarray:
        """First-order form ``(v, w) -> (w, B f(v))`` on the stacked vector."""
        n = self.grid.size
        return np.concatenate((y[n:], self.acceleration(y[:n])))


def rhs(problem: Problem, state: SystemState) -> tuple[GridSequence, GridSequence]:
    """``(dv, dw) = (w, B f(v))``; overflow yields sequences flagged diverged."""
    if state.grid != problem.grid:
        raise ValueError("state is not on the problem grid")
    dw = problem.acceleration(state.v.values)
    bad = state.diverged or not np.all(np.isfinite(dw))
    return (GridSequence(problem.grid, state.w.values, diverged=state.w.diverged),
            GridSequence(problem.grid, dw, diverged=bad))


def restrict_initial_data(phi, psi, grid: Grid) -> tuple[GridSequence, GridSequence]:
    return restrict(phi, grid), restrict(psi, grid)
