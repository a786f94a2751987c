"""Time integration of ``v' = w, w' = B f(v)`` with blow-up monitoring.

Two methods are available: fixed-step classical RK4 and the Dormand-Prince
5(4) embedded pair with a PI step-size controller. Both land exactly on the
requested output times. A run stops early once ``||v||_inf`` crosses the
blow-up threshold; the crossing time is then refined by bisection inside
the last step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .semidiscrete import Problem, SystemState

log = logging.getLogger(__name__)

COMPLETED = "completed"
BLOWUP = "blowup_detected"
UNDERFLOW = "step_underflow"

METHODS = ("rk4_fixed", "rk45_adaptive")


@dataclass(frozen=True)
class IntegratorConfig:
    """Integration settings.

    ``dt`` is the step for ``rk4_fixed`` and the initial trial step for
    ``rk45_adaptive`` (``None`` picks one automatically).
    """

    method: str = "rk45_adaptive"
    dt: float | None = None
    rel_tol: float = 1e-10
    abs_tol: float = 1e-10
    t_end: float = 20.0
    blowup_threshold: float = 1e8
    min_step: float = 1e-12
    trace_samples: int = 200
    max_steps: int = 50_000_000

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.method == "rk4_fixed" and self.dt is None:
            raise ValueError("rk4_fixed needs a step size dt")
        for name in ("rel_tol", "abs_tol", "t_end", "blowup_threshold", "min_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.trace_samples < 1:
            raise ValueError("trace_samples must be at least 1")


@dataclass
class IntegrationOutcome:
    status: str
    final_state: SystemState
    blowup_time_estimate: float | None = None
    trace_t: np.ndarray = field(default_factory=lambda: np.empty(0))
    trace_linf: np.ndarray = field(default_factory=lambda: np.empty(0))
    snapshots: dict[float, SystemState] = field(default_factory=dict)
    steps: int = 0
    rejected: int = 0

    @property
    def completed(self) -> bool:
        return self.status == COMPLETED


# -- single steps ---------------------------------------------------------------

def _rk4(fun, t, y, dt):
    k1 = fun(t, y)
    k2 = fun(t + dt / 2, y + dt / 2 * k1)
    k3 = fun(t + dt / 2, y + dt / 2 * k2)
    k4 = fun(t + dt, y + dt * k3)
    return y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def step_rk4(problem: Problem, state: SystemState, dt: float) -> SystemState:
    """One classical RK4 step of size ``dt``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    with np.errstate(over="ignore", invalid="ignore"):
        y = _rk4(problem.vector_field, state.t, state.as_vector(), dt)
    return SystemState.from_vector(state.t + dt, problem.grid, y)


# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
# fifth-order weights minus embedded fourth-order weights
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


def _dopri(fun, t, y, k1, h):
    """One DP5(4) step; returns the new state, error vector and FSAL slope."""
    ks = [k1]
    for i in range(1, 7):
        yi = y.copy()
        for a, k in zip(_A[i], ks):
            if a:
                yi += (h * a) * k
        ks.append(fun(t + _C[i] * h, yi))
    y_new = yi  # stage 7 sits at the fifth-order solution
    err = np.zeros_like(y)
    for e, k in zip(_E, ks):
        if e:
            err += (h * e) * k
    return y_new, err, ks[6]


# -- blow-up detection -----------------------------------------------------------

def detect_blowup(
    trace: Iterable[tuple[float, float]],
    threshold: float,
    evaluate: Callable[[float], float] | None = None,
    resolution: float = 1e-6,
) -> float | None:
    """First time a ``(t, ||v||_inf)`` trace reaches ``threshold``.

    With ``evaluate`` (``t -> ||v(t)||_inf`` inside the bracketing interval)
    the crossing is bisected to ``resolution``; otherwise it is interpolated
    linearly in ``log ||v||``. Returns None if the threshold is never reached.
    """
    prev = None
    for t, value in trace:
        if not np.isfinite(value) or value >= threshold:
            if prev is None:
                return float(t)
            lo, hi = prev[0], float(t)
            if evaluate is not None:
                while hi - lo > resolution:
                    mid = 0.5 * (lo + hi)
                    m = evaluate(mid)
                    if np.isfinite(m) and m < threshold:
                        lo = mid
                    else:
                        hi = mid
                return 0.5 * (lo + hi)
            if not np.isfinite(value) or prev[1] <= 0:
                return hi
            a, b = np.log(prev[1]), np.log(value)
            return float(lo + (hi - lo) * (np.log(threshold) - a) / (b - a))
        prev = (float(t), float(value))
    return None


# -- driver ----------------------------------------------------------------------

def _error_norm(err, y, y_new, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def _initial_step(fun, t, y, f0, rtol, atol, t_span):
    # Hairer-Norsett-Wanner starting step for a fifth-order method
    scale = atol + rtol * np.abs(y)
    d0 = np.sqrt(np.mean((y / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, t_span)
    f1 = fun(t + h0, y + h0 * f0)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, t_span)


def _merge_times(base: Sequence[float], exact: Sequence[float], t_end: float) -> np.ndarray:
    """Sorted stop times; entries of ``exact`` replace near-equal ``base`` ones."""
    tol = 1e-9 * max(1.0, t_end)
    out = sorted(float(t) for t in exact if 0 < t < t_end)
    for t in base:
        if 0 < t < t_end and all(abs(t - e) > tol for e in out):
            out.append(float(t))
    out.append(float(t_end))
    return np.array(sorted(set(out)))


def integrate(problem: Problem, config: IntegratorConfig, t_eval: Sequence[float] = ()) -> IntegrationOutcome:
    """Advance ``problem`` from its initial state to ``config.t_end``.

    States at the times in ``t_eval`` are returned in ``snapshots``. The trace
    holds ``||v||_inf`` at ``trace_samples`` uniform times (the adaptive
    method lands on them; fixed-step RK4 records the first step end at or
    after each) plus every accepted step once the norm exceeds ten times
    its initial size.
    """
    fun = problem.vector_field
    grid = problem.grid
    n = grid.size
    adaptive = config.method == "rk45_adaptive"
    t_end = config.t_end
    samples = np.linspace(0.0, t_end, config.trace_samples + 1)[1:]
    stops = _merge_times(samples if adaptive else (), t_eval, t_end)
    eval_set = {float(s) for s in t_eval}

    y = problem.initial_state().as_vector()
    t = 0.0
    snapshots: dict[float, SystemState] = {}
    if 0.0 in eval_set:
        snapshots[0.0] = problem.initial_state()
    v_now = float(np.max(np.abs(y[:n]))) if n else 0.0
    dense_level = 10.0 * max(v_now, 1.0)
    trace_t, trace_v = [0.0], [v_now]
    next_sample = 0

    rtol, atol = config.rel_tol, config.abs_tol
    steps = rejected = 0
    err_prev = 1.0
    with np.errstate(over="ignore", invalid="ignore"):
        k1 = fun(t, y)
        h = config.dt if config.dt else _initial_step(fun, t, y, k1, rtol, atol, t_end)
        stop_idx = 0
        while stop_idx < len(stops):
            target = stops[stop_idx]
            if steps >= config.max_steps:
                raise RuntimeError(f"exceeded {config.max_steps} steps at t={t}")
            landing = t + h >= target - 1e-12 * max(1.0, target)
            step = target - t if landing else h

            if adaptive:
                y_new, err, k_next = _dopri(fun, t, y, k1, step)
                en = _error_norm(err, y, y_new, rtol, atol) if np.all(np.isfinite(y_new)) else np.inf
                if not en <= 1.0:
                    rejected += 1
                    h = step * (max(0.2, 0.9 * en ** -0.2) if np.isfinite(en) else 0.2)
                    if h < config.min_step:
                        log.info("step underflow at t=%.9g (h=%.3g)", t, h)
                        return _finish(UNDERFLOW, t, grid, y, t, trace_t, trace_v, snapshots, steps, rejected)
                    continue
                en = max(en, 1e-10)
                factor = min(5.0, max(0.2, 0.9 * en ** -0.14 * err_prev ** 0.08))
                err_prev = en
                # a step clipped onto an output time keeps the earlier proposal
                h = max(h, step * factor) if step < h else step * factor
            else:
                y_new = _rk4(fun, t, y, step)

            steps += 1
            vmax = float(np.max(np.abs(y_new[:n]))) if n else 0.0
            if not np.isfinite(vmax) or vmax >= config.blowup_threshold:
                t_star = _refine_crossing(fun, problem, t, y, k1, step, v_now, vmax,
                                          config.blowup_threshold, adaptive)
                y_star = _advance(fun, t, y, k1, t_star - t, adaptive)
                trace_t.append(t_star)
                trace_v.append(float(np.max(np.abs(y_star[:n]))))
                log.info("blow-up threshold %.3g crossed at t=%.9f", config.blowup_threshold, t_star)
                return _finish(BLOWUP, t_star, grid, y_star, t_star, trace_t, trace_v, snapshots, steps, rejected)

            t = float(target) if landing else t + step
            y = y_new
            v_now = vmax
            k1 = k_next if adaptive else fun(t, y)
            if landing:
                stop_idx += 1
                if t in eval_set:
                    snapshots[t] = SystemState.from_vector(t, grid, y.copy())
            sampled = False
            while next_sample < samples.size and t >= samples[next_sample] - 1e-9 * max(1.0, t_end):
                next_sample += 1
                sampled = True
            if (sampled or vmax > dense_level) and t > trace_t[-1]:
                trace_t.append(t)
                trace_v.append(vmax)

    return _finish(COMPLETED, t, grid, y, None, trace_t, trace_v, snapshots, steps, rejected)


def _advance(fun, t, y, k1, s, adaptive):
    if s <= 0:
        return y
    if adaptive:
        return _dopri(fun, t, y, k1, s)[0]
    return _rk4(fun, t, y, s)


def _refine_crossing(fun, problem, t, y, k1, step, v_start, v_end, threshold, adaptive):
    n = problem.grid.size

    def norm_at(tau):
        y_tau = _advance(fun, t, y, k1, tau - t, adaptive)
        return float(np.max(np.abs(y_tau[:n])))

    return detect_blowup([(t, v_start), (t + step, v_end)], threshold, evaluate=norm_at)


def _finish(status, t, grid, y, estimate, trace_t, trace_v, snapshots, steps, rejected):
    return IntegrationOutcome(
        status=status,
        final_state=SystemState.from_vector(t, grid, y.copy()),
        blowup_time_estimate=estimate,
        trace_t=np.asarray(trace_t),
        trace_linf=np.asarray(trace_v),
        snapshots=snapshots,
        steps=steps,
        rejected=rejected,
    )
