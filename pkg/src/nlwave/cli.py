"""Command-line front end: ``nlwave <command> [--config FILE] [--key value ...]``.

Exit codes: 0 success, 1 configuration error, 2 runtime error, 3 blow-up
detected, 4 a checked bound was violated (lemma-check, kernel-info, decay).
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from . import config as cfgmod
from . import experiments as ex
from . import output
from .config import ConfigError, RunConfig
from .grid_ops import Grid, quadrature_error_bound_check
from .integrator import BLOWUP, COMPLETED, UNDERFLOW, integrate
from .kernels import BUILTIN_KERNELS, Kernel, kernel_by_name, load_tabulated_kernel, second_difference_weights
from .lemmas import lemma_check
from .semidiscrete import Nonlinearity, Problem, nonlinearity_by_name

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_BLOWUP = 3
EXIT_VIOLATION = 4


def make_kernel(name: str, tv_mass: float | None = None) -> Kernel:
    if name in BUILTIN_KERNELS:
        return kernel_by_name(name)
    return load_tabulated_kernel(name, tv_mass=tv_mass)


def make_nonlinearity(config: RunConfig) -> Nonlinearity:
    return nonlinearity_by_name(config.nonlinearity.name, config.nonlinearity.power)


def make_wave(config: RunConfig) -> ex.SolitaryWave:
    return ex.SolitaryWave.from_speed(config.initial_data.c, config.initial_data.x0)


def make_initial_data(config: RunConfig):
    preset = config.initial_data.preset
    if preset == "solitary":
        return ex.solitary_initial_data(make_wave(config))
    if preset == "blowup-gaussian":
        return ex.blowup_initial_data()
    return ex.load_initial_data(preset)


def make_problem(config: RunConfig, grid: Grid | None = None) -> Problem:
    phi, psi = make_initial_data(config)
    kernel = make_kernel(config.kernel.name, config.kernel.tv_mass)
    return Problem.build(kernel, make_nonlinearity(config), grid or config.build_grid(), phi, psi)


def metadata(config: RunConfig, **extra) -> list[tuple[str, str]]:
    meta = [("nlwave_version", __version__)] + cfgmod.to_pairs(config)
    meta += [(k, output._cell(v)) for k, v in extra.items()]
    return meta


class Emitter:
    """Writes the main table to ``output.path`` (or stdout) plus sibling files."""

    def __init__(self, config: RunConfig, stdout=None):
        self.config = config
        self.stdout = stdout or sys.stdout
        self.written: list[Path] = []

    @property
    def fmt(self) -> str:
        return self.config.output.format

    def main(self, table: output.Table):
        path = self.config.output.path
        if path:
            self.written.append(output.write(table, path, self.fmt))
        else:
            self.stdout.write(output.render(table, self.fmt))

    def extra(self, suffix: str, table: output.Table):
        # side files only exist next to a main output file
        path = self.config.output.path
        if path:
            self.written.append(output.write(table, output.sibling(path, suffix, self.fmt), self.fmt))


def _note(msg: str):
    print(msg, file=sys.stderr)


def _trace_table(config, t, linf, **extra) -> output.Table:
    return output.series_table(["t", "linf_u"], [t, linf], metadata(config, **extra))


# -- commands -------------------------------------------------------------------------------

def cmd_run(config: RunConfig, emit: Emitter) -> int:
    problem = make_problem(config)
    outcome = integrate(problem, config.integrator)
    state = outcome.final_state
    extra = {"status": outcome.status, "t_final": state.t, "steps": outcome.steps, "rejected": outcome.rejected}
    if outcome.blowup_time_estimate is not None:
        extra["t_star"] = outcome.blowup_time_estimate
    if config.initial_data.preset == "solitary" and outcome.status == COMPLETED:
        wave = make_wave(config)
        extra["error_linf"] = ex.error_linf(state.v, lambda x, t: ex.solitary_exact(wave, x, t), state.t)
    table = output.series_table(["x", "u", "u_t"], [state.grid.x, state.v.values, state.w.values],
                                metadata(config, **extra))
    emit.main(table)
    emit.extra("trace", _trace_table(config, outcome.trace_t, outcome.trace_linf, status=outcome.status))
    summary = ", ".join(f"{k}={output._cell(v)}" for k, v in extra.items())
    _note(f"run: {summary}")
    return EXIT_BLOWUP if outcome.status in (BLOWUP, UNDERFLOW) else EXIT_OK


def cmd_converge(config: RunConfig, emit: Emitter) -> int:
    kernel = make_kernel(config.kernel.name, config.kernel.tv_mass)
    f = make_nonlinearity(config)
    t_end = config.integrator.t_end
    if config.initial_data.preset == "solitary":
        report = ex.convergence_study(config.study.h_list, t_end, make_wave(config), kernel, f,
                                      config.domain(), config.integrator)
        reference = "exact"
    else:
        phi, psi = make_initial_data(config)
        report = ex.self_convergence_study(config.study.h_list, t_end, kernel, f, phi, psi,
                                           config.domain(), config.integrator)
        reference = "self (h/4)"
    rows = [[r.h, r.N, r.error, r.rho] for r in report.rows]
    emit.main(output.Table(["h", "N", "E", "order"], rows, metadata(config, reference=reference)))
    for r in report.rows:
        rho = "-" if r.rho is None else f"{r.rho:.4f}"
        _note(f"h={r.h:<8g} N={r.N:<5d} E={r.error:.8e} order={rho}")
    return EXIT_OK


def cmd_domain_study(config: RunConfig, emit: Emitter) -> int:
    kernel = make_kernel(config.kernel.name, config.kernel.tv_mass)
    report = ex.domain_study(config.study.N_list, config.grid.h, config.study.t_list, make_wave(config),
                             kernel, make_nonlinearity(config), config.integrator,
                             on_diverge=config.study.on_diverge)
    cols = ["N", "x_left", "x_right"] + [f"E_t{t:g}" for t in report.times] + ["E_max", "status"]
    rows = []
    for r in report.rows:
        errs = [r.errors.get(t) for t in report.times]
        rows.append([r.N, float(r.domain[0]), float(r.domain[1]), *errs,
                     r.maximum if r.status == COMPLETED else None, r.status])
        _note(f"N={r.N:<5d} " + " ".join("-" if e is None else f"{e:.3e}" for e in errs) + f" {r.status}")
    emit.main(output.Table(cols, rows, metadata(config)))
    return EXIT_OK


def _blowup_rows(config, emit, rows, with_reference: bool) -> int:
    out = []
    for r in rows:
        ref = ex.REFERENCE_BLOWUP_TIMES.get(r.label) if with_reference else None
        rel = abs(r.t_star - ref) / ref if (ref and r.t_star is not None) else None
        line = [r.label, r.h, r.N, r.threshold, r.status, r.t_star]
        out.append(line + ([ref, rel] if with_reference else []))
        suffix = f"trace_{r.label}_{r.threshold:g}".replace("=", "").replace("+", "")
        emit.extra(suffix, _trace_table(config, r.trace_t, r.trace_linf, label=r.label, status=r.status))
        t_star = "none" if r.t_star is None else f"{r.t_star:.6f}"
        _note(f"{r.label}: status={r.status} t*={t_star} threshold={r.threshold:g}")
    cols = ["label", "h", "N", "threshold", "status", "t_star"] + (["reference_t_star", "rel_diff"] if with_reference else [])
    emit.main(output.Table(cols, out, metadata(config)))
    return EXIT_BLOWUP if any(r.status in (BLOWUP, UNDERFLOW) for r in rows) else EXIT_OK


def cmd_blowup(config: RunConfig, emit: Emitter) -> int:
    names = config.study.kernels or (config.kernel.name,)
    kernels = [make_kernel(n, config.kernel.tv_mass) for n in names]
    if config.initial_data.preset != "blowup-gaussian":
        # generic data: same machinery, user-supplied phi/psi
        phi, psi = make_initial_data(config)
        rows = []
        grid = config.build_grid()
        for k in kernels:
            for thr in config.study.thresholds:
                icfg = replace(config.integrator, blowup_threshold=thr)
                out = integrate(Problem.build(k, make_nonlinearity(config), grid, phi, psi), icfg)
                rows.append(ex.BlowupRow(k.name, grid.h, (grid.size - 1) // 2, thr, out.status,
                                         out.blowup_time_estimate, out.trace_t, out.trace_linf))
        return _blowup_rows(config, emit, rows, with_reference=False)
    rows = ex.blowup_study(kernels, config.grid.h, config.domain(), list(config.study.thresholds),
                           config.integrator.t_end, config.integrator)
    return _blowup_rows(config, emit, rows, with_reference=True)


def cmd_blowup_refine(config: RunConfig, emit: Emitter) -> int:
    kernel = make_kernel(config.kernel.name, config.kernel.tv_mass)
    rows = ex.blowup_refinement_study(kernel, config.study.N_list, config.study.half_width,
                                      config.study.thresholds[0], config.integrator.t_end, config.integrator)
    return _blowup_rows(config, emit, rows, with_reference=False)


def cmd_decay(config: RunConfig, emit: Emitter) -> int:
    problem = make_problem(config)
    r = config.study.r
    if r is None:
        r = 0.9 * min(1.0, 2.0 * make_wave(config).B_width)
    report = ex.decay_check(problem, r, config.study.t_list, tuple(config.study.sample_band), config.integrator)
    cols = ["r", "C", "kappa", "kappa_observed", "samples", "violations", "passed"]
    row = [report.r, report.fitted_C, report.kappa, report.kappa_observed, report.samples,
           report.violations, report.passed]
    emit.main(output.Table(cols, [row], metadata(config)))
    _note(f"decay: r={r:.6g} C={report.fitted_C:.6g} kappa={report.kappa:.6g} violations={report.violations}")
    return EXIT_OK if report.passed else EXIT_VIOLATION


def cmd_kernel_info(config: RunConfig, emit: Emitter) -> int:
    kernel = make_kernel(config.kernel.name, config.kernel.tv_mass)
    rows = []
    ok_all = True
    for h in config.study.h_list:
        K = int(math.ceil(60.0 / h))
        w = second_difference_weights(kernel, h, K)
        q = quadrature_error_bound_check(kernel, Grid.symmetric(h, K), integral=1.0,
                                         second_variation=kernel.tv_mass, tail=kernel.tail_mass(K * h))
        ok = w.l1 <= 2 * kernel.tv_mass and not q.violated
        ok_all &= ok
        rows.append([h, K, q.riemann_sum, w.row_sum, w.l1, 2 * kernel.tv_mass, ok])
    cols = ["h", "K", "normalization_sum", "weight_row_sum", "weight_l1", "l1_bound", "ok"]
    emit.main(output.Table(cols, rows, metadata(config, kernel=kernel.name, tv_mass=kernel.tv_mass,
                                                decay_class=kernel.decay_class)))
    _note(f"{kernel.name}: tv_mass={kernel.tv_mass:.12g} decay={kernel.decay_class} "
          f"l1 bound check {'pass' if ok_all else 'FAIL'}")
    return EXIT_OK if ok_all else EXIT_VIOLATION


def cmd_lemma_check(config: RunConfig, emit: Emitter) -> int:
    report = lemma_check(h_list=config.study.h_list)
    rows = [[r.check, r.subject, r.h, r.measured, r.bound, r.rate, r.ok] for r in report.rows]
    emit.main(output.Table(["check", "subject", "h", "measured", "bound", "rate", "ok"], rows,
                           metadata(config, violations=len(report.violations))))
    for r in report.violations:
        _note(f"VIOLATION {r.check} [{r.subject}] h={r.h:g}: {r.measured:.4e} > {r.bound:.4e} rate={r.rate}")
    _note(f"lemma-check: {len(report.rows)} checks, {len(report.violations)} violations")
    return EXIT_OK if report.passed else EXIT_VIOLATION


COMMANDS: dict[str, Callable[[RunConfig, Emitter], int]] = {
    "run": cmd_run,
    "converge": cmd_converge,
    "domain-study": cmd_domain_study,
    "blowup": cmd_blowup,
    "blowup-refine": cmd_blowup_refine,
    "decay": cmd_decay,
    "kernel-info": cmd_kernel_info,
    "lemma-check": cmd_lemma_check,
}


def execute(config: RunConfig, stdout=None) -> int:
    """Run one configured command and return its exit code."""
    emit = Emitter(config, stdout)
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            return COMMANDS[config.command](config, emit)
    except ex.StudyError as exc:
        _note(f"error: {exc}")
        return EXIT_RUNTIME
    except OSError as exc:
        where = exc.filename or config.output.path or "<output>"
        _note(f"error: {where}: {exc.strerror or exc}")
        return EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nlwave",
        description="Semi-discrete solver for u_tt = (beta * f(u))_xx.",
        epilog="Any configuration key may be given as --key value, e.g. --grid.h 0.1 "
               "--integrator.rel_tol 1e-8 --kernel lorentz. Use --dump-config to see all keys.",
    )
    p.add_argument("command", choices=cfgmod.COMMANDS)
    p.add_argument("target", nargs="?", help="kernel name (kernel-info) or config shorthand")
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--dump-config", action="store_true", help="print the resolved configuration and exit")
    p.add_argument("--version", action="version", version=f"nlwave {__version__}")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, rest = parser.parse_known_args(argv)
    try:
        overrides = list(rest)
        if args.target is not None:
            overrides = ["--kernel.name", args.target] + overrides
        config = cfgmod.load(args.config, overrides, command=args.command)
        if args.dump_config:
            sys.stdout.write(cfgmod.emit(config))
            return EXIT_OK
        # tabulated inputs fail here rather than mid-run
        make_kernel(config.kernel.name, config.kernel.tv_mass)
        for name in config.study.kernels:
            make_kernel(name, config.kernel.tv_mass)
        if config.initial_data.preset not in cfgmod.PRESETS:
            make_initial_data(config)
    except ConfigError as exc:
        _note(f"config error: {exc}")
        return EXIT_CONFIG
    except (ValueError, OSError) as exc:
        _note(f"config error: {exc}")
        return EXIT_CONFIG
    return execute(config)


if __name__ == "__main__":
    sys.exit(main())
