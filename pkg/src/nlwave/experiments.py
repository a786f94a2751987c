"""Reproduction harness: solitary-wave accuracy, blow-up times, decay checks."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .grid_ops import Grid, GridSequence
from .integrator import COMPLETED, IntegrationOutcome, IntegratorConfig, integrate
from .kernels import Kernel, kernel_exponential
from .semidiscrete import Nonlinearity, Problem, nonlinearity_quadratic

REFERENCE_BLOWUP_TIMES = {"exp": 1.804484, "lorentz": 2.689993, "sech2": 4.396459, "triangle": 1.135569}


class StudyError(RuntimeError):
    """A run inside a study did not reach its final time."""


def thread_count() -> int:
    env = os.environ.get("NLWAVE_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _map(fn, items):
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, items))


# -- initial data ------------------------------------------------------------------

@dataclass(frozen=True)
class SolitaryWave:
    """``u = A sech^2(B (x - c t - x0))`` with ``A = 3(c^2-1)/2``, ``B = sqrt(A)/(sqrt(6) c)``."""

    c: float
    x0: float
    A: float
    B_width: float

    def __post_init__(self):
        if not abs(self.c) > 1:
            raise ValueError(f"solitary waves need |c| > 1, got c={self.c}")
        A, B = _solitary_shape(self.c)
        if self.A != A or self.B_width != B:
            raise ValueError("amplitude and width are inconsistent with the speed")

    @classmethod
    def from_speed(cls, c: float = 1.5, x0: float = -15.0) -> "SolitaryWave":
        A, B = _solitary_shape(c)
        return cls(c, x0, A, B)


def _solitary_shape(c):
    A = 3.0 * (c * c - 1.0) / 2.0
    return A, math.sqrt(A) / (math.sqrt(6.0) * c)


def solitary_exact(wave: SolitaryWave, x, t: float):
    z = wave.B_width * (np.asarray(x, dtype=float) - wave.c * t - wave.x0)
    return wave.A / np.cosh(z) ** 2


def solitary_initial_data(wave: SolitaryWave):
    """Displacement and velocity of the wave at ``t = 0``."""
    A, B, c, x0 = wave.A, wave.B_width, wave.c, wave.x0

    def phi(x):
        return A / np.cosh(B * (np.asarray(x, dtype=float) - x0)) ** 2

    def psi(x):
        z = B * (np.asarray(x, dtype=float) - x0)
        return 2.0 * A * B * c / np.cosh(z) ** 2 * np.tanh(z)

    return phi, psi


def blowup_initial_data():
    """``u(x,0) = 4(2x^2/3 - 1) e^{-x^2/3}``, ``u_t(x,0) = (x^2 - 1) e^{-x^2/2}``."""

    def phi(x):
        x = np.asarray(x, dtype=float)
        return 4.0 * (2.0 * x * x / 3.0 - 1.0) * np.exp(-x * x / 3.0)

    def psi(x):
        x = np.asarray(x, dtype=float)
        return (x * x - 1.0) * np.exp(-x * x / 2.0)

    return phi, psi


def load_initial_data(path: str | Path):
    """Initial data from ``x u`` or ``x u u_t`` columns, linearly interpolated."""
    data = np.loadtxt(path, ndmin=2)
    if data.shape[1] not in (2, 3):
        raise ValueError(f"{path}: expected 2 or 3 columns, got {data.shape[1]}")
    order = np.argsort(data[:, 0])
    xs = data[order, 0]
    us = data[order, 1]
    vs = data[order, 2] if data.shape[1] == 3 else np.zeros_like(us)
    return (lambda x: np.interp(x, xs, us, left=0.0, right=0.0),
            lambda x: np.interp(x, xs, vs, left=0.0, right=0.0))


# -- errors and rates -------------------------------------------------------------

def error_linf(numerical: GridSequence, exact_fn: Callable, t: float) -> float:
    """``max_i |u(x_i, t) - v_i|`` over the grid of ``numerical``."""
    return float(np.max(np.abs(exact_fn(numerical.x, t) - numerical.values)))


def convergence_rates(h: Sequence[float], errors: Sequence[float]) -> list[float | None]:
    """Observed orders between consecutive rows; the first entry is None.

    For a halving sequence this is ``log2(E_{2h}/E_h)``. A pair with a
    zero error has no defined order and gives None.
    """
    rates: list[float | None] = [None]
    for k in range(1, len(errors)):
        if not (errors[k] > 0 and errors[k - 1] > 0):
            rates.append(None)
            continue
        rates.append(math.log(errors[k - 1] / errors[k]) / math.log(h[k - 1] / h[k]))
    return rates


@dataclass
class ConvergenceRow:
    h: float
    N: int
    error: float
    rho: float | None


@dataclass
class ConvergenceReport:
    rows: list[ConvergenceRow]
    times: list[float]

    def rate_at(self, h: float) -> float | None:
        for row in self.rows:
            if math.isclose(row.h, h):
                return row.rho
        raise KeyError(h)


def _half_count(grid: Grid) -> int:
    # N is half the number of subintervals
    return (grid.size - 1) // 2


def _check(outcome: IntegrationOutcome, label: str):
    if outcome.status != COMPLETED:
        raise StudyError(
            f"{label}: run ended with {outcome.status} at t={outcome.final_state.t:.6g} "
            f"(||v||_inf={np.max(np.abs(outcome.final_state.v.values)):.3g})")


def convergence_study(
    h_list: Sequence[float],
    t_eval: float = 20.0,
    wave: SolitaryWave | None = None,
    kernel: Kernel | None = None,
    f: Nonlinearity | None = None,
    domain: tuple[float, float] = (-30.0, 30.0),
    config: IntegratorConfig | None = None,
) -> ConvergenceReport:
    """Errors against the exact solitary wave on a fixed domain for each ``h``."""
    wave = wave or SolitaryWave.from_speed()
    kernel = kernel or kernel_exponential()
    f = f or nonlinearity_quadratic()
    config = _with_t_end(config, t_eval)
    h_list = sorted(h_list, reverse=True)
    phi, psi = solitary_initial_data(wave)

    def run(h):
        grid = Grid.from_interval(h, *domain)
        outcome = integrate(Problem.build(kernel, f, grid, phi, psi), config)
        _check(outcome, f"h={h}")
        err = error_linf(outcome.final_state.v, lambda x, t: solitary_exact(wave, x, t), t_eval)
        return _half_count(grid), err

    results = _map(run, h_list)
    errors = [e for _, e in results]
    rates = convergence_rates(h_list, errors)
    rows = [ConvergenceRow(h, N, e, r) for h, (N, e), r in zip(h_list, results, rates)]
    return ConvergenceReport(rows, [t_eval])


def self_convergence_study(
    h_list: Sequence[float],
    t_eval: float,
    kernel: Kernel,
    f: Nonlinearity,
    phi: Callable,
    psi: Callable,
    domain: tuple[float, float],
    config: IntegratorConfig | None = None,
    refinement: int = 4,
) -> ConvergenceReport:
    """Errors against a reference run at ``h/refinement`` when no exact solution exists.

    Each coarse grid point coincides with every ``refinement``-th reference
    point, so the comparison needs no interpolation.
    """
    config = _with_t_end(config, t_eval)
    h_list = sorted(h_list, reverse=True)

    def final(h):
        grid = Grid.from_interval(h, *domain)
        outcome = integrate(Problem.build(kernel, f, grid, phi, psi), config)
        _check(outcome, f"h={h}")
        return outcome.final_state.v

    def run(h):
        coarse = final(h)
        fine = final(h / refinement)
        ref = fine.values[::refinement]
        return _half_count(coarse.grid), float(np.max(np.abs(coarse.values - ref)))

    results = _map(run, h_list)
    errors = [e for _, e in results]
    rates = convergence_rates(h_list, errors)
    rows = [ConvergenceRow(h, N, e, r) for h, (N, e), r in zip(h_list, results, rates)]
    return ConvergenceReport(rows, [t_eval])


def _with_t_end(config, t_end):
    base = config or IntegratorConfig()
    return IntegratorConfig(**{**base.__dict__, "t_end": t_end})


# -- truncated-domain study -------------------------------------------------------------

@dataclass
class DomainRow:
    N: int
    domain: tuple[float, float]
    errors: dict[float, float]
    status: str = COMPLETED

    @property
    def maximum(self) -> float:
        return max(self.errors.values()) if self.errors else math.nan


@dataclass
class DomainReport:
    h: float
    times: list[float]
    rows: list[DomainRow]


def domain_study(
    N_list: Sequence[int],
    h_fixed: float = 0.1,
    t_list: Sequence[float] = (5.0, 10.0, 15.0, 20.0),
    wave: SolitaryWave | None = None,
    kernel: Kernel | None = None,
    f: Nonlinearity | None = None,
    config: IntegratorConfig | None = None,
    on_diverge: str = "raise",
) -> DomainReport:
    """Errors at several times on ``[-N h, N h]`` for growing ``N``.

    ``on_diverge="record"`` keeps rows whose run stopped early (errors only
    for the times reached) instead of raising :class:`StudyError`.
    """
    wave = wave or SolitaryWave.from_speed()
    kernel = kernel or kernel_exponential()
    f = f or nonlinearity_quadratic()
    t_list = sorted(float(t) for t in t_list)
    config = _with_t_end(config, t_list[-1])
    phi, psi = solitary_initial_data(wave)

    def run(N):
        grid = Grid.symmetric(h_fixed, N)
        outcome = integrate(Problem.build(kernel, f, grid, phi, psi), config, t_eval=t_list)
        if on_diverge == "raise":
            _check(outcome, f"N={N}")
        errors = {t: error_linf(outcome.snapshots[t].v, lambda x, s: solitary_exact(wave, x, s), t)
                  for t in t_list if t in outcome.snapshots}
        return DomainRow(N, (grid.x[0], grid.x[-1]), errors, outcome.status)

    return DomainReport(h_fixed, t_list, _map(run, sorted(N_list)))


# -- blow-up studies ------------------------------------------------------------------

@dataclass
class BlowupRow:
    label: str
    h: float
    N: int
    threshold: float
    status: str
    t_star: float | None
    trace_t: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))
    trace_linf: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))


def blowup_run(kernel: Kernel, grid: Grid, threshold: float = 1e8, t_end: float = 10.0,
               f: Nonlinearity | None = None, config: IntegratorConfig | None = None) -> IntegrationOutcome:
    phi, psi = blowup_initial_data()
    base = config or IntegratorConfig()
    cfg = IntegratorConfig(**{**base.__dict__, "t_end": t_end, "blowup_threshold": threshold})
    return integrate(Problem.build(kernel, f or nonlinearity_quadratic(), grid, phi, psi), cfg)


def blowup_study(
    kernels: Sequence[Kernel],
    h: float = 0.1,
    domain: tuple[float, float] = (-10.0, 10.0),
    threshold: float | Sequence[float] = 1e8,
    t_end: float = 10.0,
    config: IntegratorConfig | None = None,
) -> list[BlowupRow]:
    """Blow-up time per kernel (and per threshold) for the Gaussian-type data.

    A run that reaches ``t_end`` is reported with status ``completed`` and no
    blow-up time.
    """
    thresholds = [threshold] if np.isscalar(threshold) else list(threshold)
    grid = Grid.from_interval(h, *domain)
    jobs = [(k, thr) for k in kernels for thr in thresholds]

    def run(job):
        kernel, thr = job
        out = blowup_run(kernel, grid, thr, t_end, config=config)
        return BlowupRow(kernel.name, h, _half_count(grid), thr, out.status,
                         out.blowup_time_estimate, out.trace_t, out.trace_linf)

    return _map(run, jobs)


def blowup_refinement_study(
    kernel: Kernel | None = None,
    N_list: Sequence[int] = (2, 5, 10, 20, 40, 60, 80, 100),
    half_width: float = 10.0,
    threshold: float = 1e8,
    t_end: float = 10.0,
    config: IntegratorConfig | None = None,
) -> list[BlowupRow]:
    """Blow-up time on ``[-L, L]`` with ``h = L/N`` for each ``N``."""
    kernel = kernel or kernel_exponential()

    def run(N):
        grid = Grid(half_width / N, -N, N)
        out = blowup_run(kernel, grid, threshold, t_end, config=config)
        return BlowupRow(f"N={N}", grid.h, N, threshold, out.status,
                         out.blowup_time_estimate, out.trace_t, out.trace_linf)

    return _map(run, sorted(N_list))


# -- decay envelope -------------------------------------------------------------------------

@dataclass
class DecayCheckReport:
    """Spatial decay check ``|u(x_i,t)| <= C e^{-r|x_i|} e^{kappa t}``.

    ``fitted_C`` and ``kappa`` form the Gronwall envelope; ``kappa_observed``
    is the smallest rate that would still cover every sample.
    """

    r: float
    fitted_C: float
    kappa: float
    kappa_observed: float
    violations: int
    samples: int
    times: list[float]

    @property
    def passed(self) -> bool:
        return self.violations == 0


def weighted_stencil_mass(problem: Problem, r: float) -> float:
    """``sum_k |b_k| e^{r |k| h}``, the discrete constant in ``(|beta''| * w) <= C w``."""
    w = problem.kernel_weights
    return float(np.sum(np.abs(w.weights) * np.exp(r * np.abs(w.offsets) * w.grid_h)))


def decay_check(
    problem: Problem,
    r: float,
    t_list: Sequence[float],
    sample_band: tuple[float, float] = (0.5, 0.9),
    config: IntegratorConfig | None = None,
) -> DecayCheckReport:
    """Check that the solution keeps the exponential decay of its initial data.

    With ``w(x) = e^{-r|x|}`` the envelope constant is
    ``C = ||phi/w||_inf + T ||psi/w||_inf`` over the grid and the growth rate
    is ``kappa = S K_M T`` where ``S`` is :func:`weighted_stencil_mass`,
    ``K_M = max_{|z|<=M} |f(z)/z|`` and ``M`` the largest ``|v|`` seen. Only
    points with ``lo*R <= |x| <= hi*R`` (``R`` the domain half-width) are
    tested, away from the truncation fringe.
    """
    if not r > 0:
        raise ValueError("decay rate r must be positive")
    t_list = sorted(float(t) for t in t_list)
    T = t_list[-1]
    grid = problem.grid
    x = grid.x
    weight_inv = np.exp(r * np.abs(x))
    R = max(abs(x[0]), abs(x[-1]))
    band = (np.abs(x) >= sample_band[0] * R) & (np.abs(x) <= sample_band[1] * R)

    if T > 0:
        base = config or IntegratorConfig()
        cfg = IntegratorConfig(**{**base.__dict__, "t_end": T})
        outcome = integrate(problem, cfg, t_eval=t_list)
        _check(outcome, "decay run")
        states = {t: outcome.snapshots[t].v.values for t in t_list if t > 0}
    else:
        states = {}
    states[0.0] = problem.initial_v.values

    C = (float(np.max(np.abs(problem.initial_v.values) * weight_inv))
         + T * float(np.max(np.abs(problem.initial_w.values) * weight_inv)))
    M = max(float(np.max(np.abs(v))) for v in states.values())
    slope = problem.nonlinearity.slope_bound
    K_M = slope(M) if slope is not None else math.inf
    kappa = weighted_stencil_mass(problem, r) * K_M * T

    violations = 0
    kappa_obs = 0.0
    for t, v in sorted(states.items()):
        ratio = np.abs(v[band]) * weight_inv[band]
        envelope = C * math.exp(kappa * t) if kappa * t < 700 else math.inf
        violations += int(np.count_nonzero(ratio > envelope))
        worst = float(ratio.max()) if ratio.size else 0.0
        if t > 0 and C > 0 and worst > C:
            kappa_obs = max(kappa_obs, math.log(worst / C) / t)
    samples = int(band.sum()) * len(states)
    return DecayCheckReport(r, C, kappa, kappa_obs, violations, samples, sorted(states))
