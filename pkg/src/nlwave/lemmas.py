"""Numerical checks of the discretization error bounds on a test corpus.

Each check samples a smooth, rapidly decaying function on a grid that covers
its numerical support, measures a discretization error and compares it with
the corresponding a-priori bound. Continuous norms are evaluated by
composite trapezoid quadrature at mesh ``h/100``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import grid_ops as go
from .grid_ops import Grid, GridSequence
from .kernels import BUILTIN_KERNELS, second_difference_weights

DEFAULT_H = (0.4, 0.2, 0.1, 0.05)
REF_REFINEMENT = 100


@dataclass(frozen=True)
class TestFunction:
    """A corpus entry: the function, its first four derivatives and its integral."""

    name: str
    derivatives: tuple[Callable[[np.ndarray], np.ndarray], ...]
    integral: float

    def __call__(self, x):
        return self.derivatives[0](x)

    def d(self, k: int):
        return self.derivatives[k]


def _gauss(x):
    return np.exp(-x * x)


def gaussian() -> TestFunction:
    g = _gauss
    return TestFunction("gaussian", (
        g,
        lambda x: -2 * x * g(x),
        lambda x: (4 * x ** 2 - 2) * g(x),
        lambda x: (-8 * x ** 3 + 12 * x) * g(x),
        lambda x: (16 * x ** 4 - 48 * x ** 2 + 12) * g(x),
    ), math.sqrt(math.pi))


def sech2() -> TestFunction:
    def s(x):
        e = np.exp(-2.0 * np.abs(x))
        return 4.0 * e / (1.0 + e) ** 2

    t = np.tanh
    return TestFunction("sech2", (
        s,
        lambda x: -2 * s(x) * t(x),
        lambda x: s(x) * (6 * t(x) ** 2 - 2),
        lambda x: s(x) * t(x) * (16 - 24 * t(x) ** 2),
        lambda x: s(x) * (120 * t(x) ** 4 - 120 * t(x) ** 2 + 16),
    ), 2.0)


def x_gaussian() -> TestFunction:
    g = _gauss
    return TestFunction("x_gaussian", (
        lambda x: x * g(x),
        lambda x: (1 - 2 * x ** 2) * g(x),
        lambda x: (4 * x ** 3 - 6 * x) * g(x),
        lambda x: (-8 * x ** 4 + 24 * x ** 2 - 6) * g(x),
        lambda x: (16 * x ** 5 - 80 * x ** 3 + 60 * x) * g(x),
    ), 0.0)


CORPUS = {"gaussian": gaussian, "sech2": sech2, "x_gaussian": x_gaussian}


def default_corpus() -> list[TestFunction]:
    return [make() for make in CORPUS.values()]


@dataclass
class LemmaRow:
    check: str
    subject: str
    h: float
    measured: float
    bound: float
    rate: float | None = None
    min_rate: float | None = None

    @property
    def ok(self) -> bool:
        if not self.measured <= self.bound:
            return False
        return self.rate is None or self.min_rate is None or self.rate >= self.min_rate


@dataclass
class LemmaReport:
    rows: list[LemmaRow]

    @property
    def violations(self) -> list[LemmaRow]:
        return [r for r in self.rows if not r.ok]

    @property
    def passed(self) -> bool:
        return not self.violations


def covering_grid(fn: TestFunction, h: float) -> Grid:
    """Symmetric grid over the window where some derivative exceeds 1e-14."""
    radius = max(go.support_window(fn.d(k)) for k in range(5))
    n = int(math.ceil(radius / h)) + 2
    return Grid.symmetric(h, n)


def _cells(grid: Grid, m: int = REF_REFINEMENT) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell fine points ``x_c + s h/m`` (shape cells x (m+1)) and offsets."""
    s = np.linspace(0.0, 1.0, m + 1)
    left = grid.x[:-1]
    return left[:, None] + grid.h * s[None, :], s


def _cell_lp(values: np.ndarray, grid: Grid, p: float) -> float:
    # trapezoid within each cell, summed; values has shape cells x (m+1)
    a = np.abs(values)
    if p == np.inf:
        return float(a.max())
    dx = grid.h / (values.shape[1] - 1)
    per_cell = dx * (a[:, 1:-1] ** p).sum(axis=1) + 0.5 * dx * (a[:, 0] ** p + a[:, -1] ** p)
    return float(per_cell.sum() ** (1.0 / p))


def extension_errors(fn: TestFunction, h: float, p: float) -> tuple[float, float, float, float]:
    """``(||u - P0 Ru||, h ||u'||, ||u - P1 Ru||, h^2 ||u''||)`` in ``L^p``."""
    grid = covering_grid(fn, h)
    u = go.restrict(fn, grid)
    xf, s = _cells(grid)
    exact = fn(xf)
    # the step function holds u_c across the whole closed cell (left limits at the right end)
    p0 = np.repeat(u.values[:-1, None], xf.shape[1], axis=1)
    p1 = u.values[:-1, None] + (u.values[1:] - u.values[:-1])[:, None] * s[None, :]
    e0 = _cell_lp(exact - p0, grid, p)
    e1 = _cell_lp(exact - p1, grid, p)
    d1 = _cell_lp(fn.d(1)(xf), grid, p)
    d2 = _cell_lp(fn.d(2)(xf), grid, p)
    return e0, h * d1, e1, h * h * d2


def _sup(fn, grid: Grid) -> float:
    xf, _ = _cells(grid)
    return float(np.abs(fn(xf)).max())


def _diff_ops(corrupt: bool):
    if not corrupt:
        return go.diff_forward, go.diff_backward, go.diff_second

    # negative control: wrong stencils
    def fwd(u):
        return u.with_values((u.shift(-2).values - u.values) / u.h)

    def bwd(u):
        return u.with_values((u.values - u.shift(2).values) / u.h)

    def second(u):
        return u.with_values(1.5 * go.diff_second(u).values)

    return fwd, bwd, second


def difference_errors(fn: TestFunction, h: float, corrupt: bool = False) -> dict[str, float]:
    """Errors of ``D+``, ``D-`` and ``D+D-`` against sampled derivatives.

    Keys ``linf_*`` are ``l^inf`` errors over interior indices and
    ``l1_*``/``l2_*`` the ``l_h^p`` versions.
    """
    fwd, bwd, second = _diff_ops(corrupt)
    grid = covering_grid(fn, h)
    u = go.restrict(fn, grid)
    d1 = go.restrict(fn.d(1), grid).values
    d2 = go.restrict(fn.d(2), grid).values
    inner = slice(2, -2)
    out = {}
    for key, approx, exact in (("plus", fwd(u).values, d1),
                               ("minus", bwd(u).values, d1),
                               ("second", second(u).values, d2)):
        e = GridSequence(Grid(h, 0, grid.size - 5), (approx - exact)[inner])
        out[f"linf_{key}"] = go.norm_linf(e)
        out[f"l1_{key}"] = go.norm_lp(e, 1)
        out[f"l2_{key}"] = go.norm_lp(e, 2)
    return out


def _rates(values: Sequence[float], hs: Sequence[float]) -> list[float | None]:
    rates: list[float | None] = [None]
    for k in range(1, len(values)):
        if values[k] <= 0 or values[k - 1] <= 0:
            rates.append(None)
        else:
            rates.append(math.log(values[k - 1] / values[k]) / math.log(hs[k - 1] / hs[k]))
    return rates


def lemma_check(
    corpus: Sequence[TestFunction] | None = None,
    h_list: Sequence[float] = DEFAULT_H,
    corrupt: bool = False,
    kernel_h: Sequence[float] | None = None,
    rate_h_max: float = 0.2,
) -> LemmaReport:
    """Run every bound check; ``corrupt=True`` swaps in wrong difference stencils.

    Lp-form rate checks (first order for ``D+-``, second for ``D+D-``) use
    the observed order between consecutive ``h`` with floors 0.9 and 1.9,
    enforced only once the coarser mesh of the pair is at most
    ``rate_h_max`` (coarser pairs are pre-asymptotic for the unit-width
    corpus).
    """
    corpus = list(corpus) if corpus is not None else default_corpus()
    hs = sorted(h_list, reverse=True)
    rows: list[LemmaRow] = []

    for fn in corpus:
        for p in (1, 2):
            for h in hs:
                e0, b0, e1, b1 = extension_errors(fn, h, p)
                rows.append(LemmaRow(f"P0 extension L{p}", fn.name, h, e0, b0))
                rows.append(LemmaRow(f"P1 extension L{p}", fn.name, h, e1, b1))

        diffs = [difference_errors(fn, h, corrupt) for h in hs]
        sup2 = [_sup(fn.d(2), covering_grid(fn, h)) for h in hs]
        sup4 = [_sup(fn.d(4), covering_grid(fn, h)) for h in hs]
        for key in ("plus", "minus"):
            meas = [d[f"linf_{key}"] for d in diffs]
            for h, m, s, r in zip(hs, meas, sup2, _rates(meas, hs)):
                rows.append(LemmaRow(f"D{'+' if key == 'plus' else '-'} sup error", fn.name, h, m, h / 2 * s, r))
        meas = [d["linf_second"] for d in diffs]
        for h, m, s, r in zip(hs, meas, sup4, _rates(meas, hs)):
            rows.append(LemmaRow("D+D- sup error", fn.name, h, m, h * h / 12 * s, r))

        for p in (1, 2):
            for key, order, dk in (("plus", 1, 2), ("minus", 1, 2), ("second", 2, 4)):
                meas = [d[f"l{p}_{key}"] for d in diffs]
                norms = [_cell_lp(fn.d(dk)(_cells(covering_grid(fn, h))[0]), covering_grid(fn, h), p) for h in hs]
                # the constant is fitted on the coarsest mesh and doubled
                const = 2.0 * meas[0] / (hs[0] ** order * norms[0]) if norms[0] > 0 else math.inf
                label = {"plus": "D+", "minus": "D-", "second": "D+D-"}[key]
                floor = 0.9 if order == 1 else 1.9
                for k, (h, m, nm, r) in enumerate(zip(hs, meas, norms, _rates(meas, hs))):
                    enforced = k > 0 and hs[k - 1] <= rate_h_max + 1e-12
                    rows.append(LemmaRow(f"{label} l{p} error", fn.name, h, m, const * h ** order * nm,
                                         r, floor if enforced else None))

        for h in hs:
            grid = covering_grid(fn, h)
            d1 = _cell_lp(fn.d(1)(_cells(grid)[0]), grid, 1)
            d2 = _cell_lp(fn.d(2)(_cells(grid)[0]), grid, 1)
            q = go.quadrature_error_bound_check(fn, grid, integral=fn.integral, df_l1=d1, second_variation=d2)
            rows.append(LemmaRow("quadrature first order", fn.name, h, q.error, q.bound_first))
            rows.append(LemmaRow("quadrature second order", fn.name, h, q.error, q.bound_second))

    for name, make in BUILTIN_KERNELS.items():
        kernel = make()
        for h in (kernel_h or hs):
            K = int(math.ceil(60.0 / h))
            w = second_difference_weights(kernel, h, K)
            rows.append(LemmaRow("weight l1 bound", name, h, w.l1, 2 * kernel.tv_mass))
            grid = Grid.symmetric(h, K)
            q = go.quadrature_error_bound_check(kernel, grid, integral=1.0, second_variation=kernel.tv_mass,
                                                tail=kernel.tail_mass(K * h))
            rows.append(LemmaRow("kernel normalization", name, h, q.error, q.bound_second))
    return LemmaReport(rows)
