"""Experiment harness: built-in problems, study recipes, CSV output, CLI.

Three study families are wired up, selected by the built-in problem name:

* ``error_equation`` -- homogeneous 1d problem (zero data) whose Schwarz
  iterates are the iteration error; runs measure contraction factors from
  random interface guesses, averaged over seeds.
* ``analytic_1d`` -- manufactured 1d solution for accuracy/observed-order
  sweeps over the time step, monodomain or localized.
* ``analytic_2d`` -- manufactured 2d solution; reports the final-time
  max-norm error for monodomain and fixed-budget iterative runs.

Each run writes a decay-curve CSV (``run_id,iteration,time_level,interface,
raw_update,normalized_error``) and a summary CSV (``run_id,delta_cells,dt,T,
P,scheme,solver,contraction,linf_error,observed_order,iters_used``).  Bodies
are deterministic for a fixed seed; wall-clock data stays in the ``#`` header.
"""
from __future__ import annotations

import argparse
import math
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .analysis import estimate_contraction, observed_order
from .geometry import (
    Problem1D,
    Problem2D,
    decompose_1d,
    decompose_2d,
    make_grid_1d,
    make_grid_2d,
)
from .matfunc import (
    build_laplacian_1d,
    build_laplacian_2d,
    spectral_factorization,
    spectral_factorization_2d,
)
from .schwarz import (
    SolverConfig,
    build_local_pieces,
    build_local_pieces_2d,
    method1_advance,
    method1_march,
    method2_solve,
    random_trace_guess,
)
from .steppers import TimeGrid, make_workspace, run_monodomain

PROBLEMS = ("error_equation", "analytic_1d", "analytic_2d")
SOLVERS = ("mono", "method1", "method2")

DECAY_COLUMNS = "run_id,iteration,time_level,interface,raw_update,normalized_error"
SUMMARY_COLUMNS = (
    "run_id,delta_cells,dt,T,P,scheme,solver,contraction,linf_error,"
    "observed_order,iters_used"
)

#: iteration budgets used by the rate studies (fixed sweep counts per run)
RATE_BUDGET = {"method1": 30, "method2": 60}
#: default stopping tolerances for "converged" localized solutions
DEFAULT_TOL = {"etd1": 1e-4, "etd2": 1e-6}


def builtin_problem(name: str, horizon: Optional[float] = None):
    """Named data sets for the studies; ``horizon`` overrides the default T."""
    if name == "error_equation":
        zero2 = lambda x, t: np.zeros_like(np.asarray(x, dtype=float))
        return Problem1D(
            nu=1.0, length=2.0, horizon=1.0 if horizon is None else horizon,
            source=zero2,
            boundary_left=lambda t: 0.0, boundary_right=lambda t: 0.0,
            initial=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
            exact=lambda x, t: np.zeros_like(np.asarray(x, dtype=float)),
        )
    if name == "analytic_1d":
        pi2 = math.pi ** 2
        u = lambda x, t: np.exp(pi2 * t) * np.sin(np.pi * (x - 0.25))
        return Problem1D(
            nu=1.0, length=2.0, horizon=0.25 if horizon is None else horizon,
            source=lambda x, t: 2.0 * pi2 * u(x, t),
            boundary_left=lambda t: float(u(-1.0, t)),
            boundary_right=lambda t: float(u(1.0, t)),
            initial=lambda x: u(x, 0.0),
            exact=u,
            origin=-1.0,
        )
    if name == "analytic_2d":
        u = lambda x, y, t: np.exp(-4.0 * t) * np.sin(x - 0.25) * np.sin(2.0 * (y - 0.125))
        return Problem2D(
            nu=1.0, lengths=(math.pi, math.pi),
            horizon=0.5 if horizon is None else horizon,
            source=lambda x, y, t: u(x, y, t),
            boundary=u,
            initial=lambda x, y: u(x, y, 0.0),
            exact=u,
        )
    raise ValueError(f"unknown builtin problem {name!r}")


@dataclass
class ExperimentConfig:
    problem: str = "error_equation"
    solver: str = "method2"
    scheme: str = "etd1"
    n: int = 255
    ny: Optional[int] = None
    dts: tuple = (0.01,)
    horizon: float = 1.0
    px: int = 2
    py: int = 1
    overlaps: tuple = (8,)
    overlap_convention: str = "full"
    tolerance: Optional[float] = None
    max_iterations: int = 2000
    fixed_iterations: Optional[int] = None
    seed: int = 0
    seeds: int = 5
    window_steps: Optional[int] = None
    out: Optional[str] = None

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.scheme not in ("etd1", "etd2"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.problem == "error_equation" and self.solver == "mono":
            raise ValueError("the error equation studies iterative solvers only")
        if not self.dts or any(dt <= 0 for dt in self.dts):
            raise ValueError("time steps must be positive")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.seeds < 1:
            raise ValueError("need at least one seed")
        for dt in self.dts:
            steps = self.horizon / dt
            if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
                raise ValueError(f"dt {dt} does not divide the horizon {self.horizon}")

    def effective_tolerance(self) -> float:
        return DEFAULT_TOL[self.scheme] if self.tolerance is None else self.tolerance

    def solver_config(self, budget: Optional[int] = None) -> SolverConfig:
        if budget is not None or self.fixed_iterations is not None:
            k = self.fixed_iterations if budget is None else budget
            return SolverConfig(scheme=self.scheme, mode="fixed", fixed_iterations=k,
                                window_steps=self.window_steps)
        return SolverConfig(
            scheme=self.scheme, mode="tolerance",
            tolerance=self.effective_tolerance(),
            max_iterations=self.max_iterations,
            window_steps=self.window_steps,
        )


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    summary_rows: list = field(default_factory=list)
    decay_rows: list = field(default_factory=list)
    wall_time: float = 0.0
    notes: dict = field(default_factory=dict)

    def header_lines(self) -> list:
        c = self.config
        lines = [
            f"# problem: {c.problem}", f"# solver: {c.solver}", f"# scheme: {c.scheme}",
            f"# n: {c.n}", f"# ny: {'' if c.ny is None else c.ny}",
            f"# dt: {','.join(_fmt(dt) for dt in c.dts)}",
            f"# T: {_fmt(c.horizon)}",
            f"# subdomains: {c.px}x{c.py}",
            f"# overlap_cells: {','.join(str(o) for o in c.overlaps)}",
            f"# overlap_convention: {c.overlap_convention}",
            f"# tolerance: {_fmt(c.effective_tolerance())}",
            f"# max_iterations: {c.max_iterations}",
            f"# fixed_iterations: {'' if c.fixed_iterations is None else c.fixed_iterations}",
            f"# seed: {c.seed}", f"# seeds: {c.seeds}",
            f"# window_steps: {'' if c.window_steps is None else c.window_steps}",
        ]
        lines += [f"# {k}: {v}" for k, v in sorted(self.notes.items())]
        lines.append(f"# wall_time_s: {self.wall_time:.3f}")
        return lines

    def decay_csv(self) -> str:
        body = [DECAY_COLUMNS] + [_join(r) for r in self.decay_rows]
        return "\n".join(self.header_lines() + body) + "\n"

    def summary_csv(self) -> str:
        body = [SUMMARY_COLUMNS] + [_join(r) for r in self.summary_rows]
        return "\n".join(self.header_lines() + body) + "\n"

    def write(self, out_dir: Union[str, Path]) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "decay.csv").write_text(self.decay_csv())
        (out / "summary.csv").write_text(self.summary_csv())


def _fmt(x) -> str:
    if x is None or x == "":
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def _join(row) -> str:
    return ",".join(x if isinstance(x, str) else _fmt(x) for x in row)


def _decay_from_log(rows, run_id, log, time_level) -> None:
    """Append per-interface decay rows; errors preferred, updates otherwise."""
    if log.errors is not None:
        curves = log.errors  # (K+1, n_if), row 0 is the initial guess
        start = 0
    else:
        curves = log.updates  # (K, n_if)
        start = 1
    if curves.size == 0:
        return
    base = curves[0].copy()
    base[base == 0.0] = 1.0
    for k in range(curves.shape[0]):
        for j in range(curves.shape[1]):
            rows.append((run_id, start + k, time_level, j,
                         curves[k, j], curves[k, j] / base[j]))


# ---------------------------------------------------------------------------
# rate studies on the error equation
# ---------------------------------------------------------------------------

def _zero_reference(interfaces, steps=None):
    if steps is None:
        return [np.zeros(itf.size) for itf in interfaces]
    return [np.zeros((steps + 1, itf.size)) for itf in interfaces]


def _rate_study(config: ExperimentConfig, result: ExperimentResult) -> None:
    problem = builtin_problem("error_equation", config.horizon)
    grid = make_grid_1d(config.n, problem.length)
    budget = RATE_BUDGET[config.solver] if config.fixed_iterations is None \
        else config.fixed_iterations
    scfg = SolverConfig(scheme=config.scheme, mode="fixed", fixed_iterations=budget,
                        window_steps=config.window_steps)
    for delta in config.overlaps:
        layout = decompose_1d(grid, config.px, delta)
        for dt in config.dts:
            steps = int(round(config.horizon / dt))
            timegrid = TimeGrid(config.horizon, steps)
            pieces = build_local_pieces(problem, grid, layout, timegrid.dt)
            tag = (f"{config.problem}-{config.solver}-{config.scheme}"
                   f"-d{delta}-dt{dt:g}-T{config.horizon:g}-P{config.px}")
            rates = []
            for s in range(config.seeds):
                seed = config.seed + s
                run_id = f"{tag}-s{seed}"
                if config.solver == "method1":
                    states = [p.u0 for p in pieces]
                    guess = random_trace_guess(layout.interfaces, seed)
                    _, log = method1_advance(
                        pieces, layout.interfaces, states, 0.0, timegrid.dt, scfg,
                        init_guess=guess,
                        reference=_zero_reference(layout.interfaces),
                    )
                    _decay_from_log(result.decay_rows, run_id, log, time_level=1)
                else:
                    guess = random_trace_guess(layout.interfaces, seed, steps=steps)
                    _, log = method2_solve(
                        pieces, layout.interfaces, timegrid, scfg,
                        init_guess=guess,
                        reference=_zero_reference(layout.interfaces, steps),
                    )
                    _decay_from_log(result.decay_rows, run_id, log, time_level=0)
                two_step = estimate_contraction(log.curve())
                rates.append(math.sqrt(two_step))
            result.summary_rows.append(
                (tag, delta, dt, config.horizon, config.px, config.scheme,
                 config.solver, float(np.mean(rates)), "", "", budget))


# ---------------------------------------------------------------------------
# 1d accuracy studies
# ---------------------------------------------------------------------------

def _exact_blocks_1d(problem, grid, layout, timegrid):
    times = timegrid.times()
    blocks = []
    for piece in layout.pieces:
        xs = grid.x(np.arange(piece.lo, piece.hi + 1))
        blocks.append(problem.exact(xs[None, :], times[:, None]))
    return blocks


def _accuracy_study_1d(config: ExperimentConfig, result: ExperimentResult) -> None:
    problem = builtin_problem("analytic_1d", config.horizon)
    grid = make_grid_1d(config.n, problem.length, origin=problem.origin)
    xs = grid.interior()
    if config.solver == "mono":
        loops = [("", None)]
    else:
        loops = [(delta, decompose_1d(grid, config.px, delta))
                 for delta in config.overlaps]
    for delta, layout in loops:
        errors, order_in = [], []
        for dt in config.dts:
            steps = int(round(config.horizon / dt))
            timegrid = TimeGrid(config.horizon, steps)
            times = timegrid.times()
            exact_full = problem.exact(xs[None, :], times[:, None])
            scale = float(np.abs(exact_full).max())
            tag = (f"{config.problem}-{config.solver}-{config.scheme}"
                   + (f"-d{delta}" if delta != "" else "")
                   + f"-dt{dt:g}-T{config.horizon:g}")
            if config.solver == "mono":
                ws = make_workspace(
                    spectral_factorization(build_laplacian_1d(config.n, problem.nu, grid.h)),
                    timegrid.dt)
                traj = run_monodomain(problem, grid, timegrid, config.scheme, ws)
                abs_err = float(np.abs(traj - exact_full).max())
                iters = ""
            else:
                pieces = build_local_pieces(problem, grid, layout, timegrid.dt)
                scfg = config.solver_config()
                if config.solver == "method1":
                    trajs, logs = method1_march(pieces, layout.interfaces, timegrid, scfg)
                    iters = sum(log.iterations for log in logs)
                    for m, log in enumerate(logs):
                        _decay_from_log(result.decay_rows, tag, log, time_level=m + 1)
                else:
                    trajs, log = method2_solve(pieces, layout.interfaces, timegrid, scfg)
                    iters = log.iterations
                    _decay_from_log(result.decay_rows, tag, log, time_level=0)
                abs_err = 0.0
                for block, traj in zip(_exact_blocks_1d(problem, grid, layout, timegrid), trajs):
                    abs_err = max(abs_err, float(np.abs(traj - block).max()))
            rel = abs_err / scale
            errors.append(rel)
            order = "" if not order_in else math.log2(order_in[-1] / rel)
            order_in.append(rel)
            result.summary_rows.append(
                (tag, delta if delta != "" else 0, dt, config.horizon,
                 1 if config.solver == "mono" else config.px,
                 config.scheme, config.solver, "", rel, order, iters))
    result.notes["error_normalization"] = "space-time max of the exact solution"


# ---------------------------------------------------------------------------
# 2d accuracy study (final-time error)
# ---------------------------------------------------------------------------

def _final_error_2d(problem, grid, layout, trajs, t_end) -> float:
    err = 0.0
    for rect, traj in zip(layout.subrects, trajs):
        lx = grid.x.x(np.arange(rect.xpiece.lo, rect.xpiece.hi + 1))
        ly = grid.y.x(np.arange(rect.ypiece.lo, rect.ypiece.hi + 1))
        exact = problem.exact(lx[:, None], ly[None, :], t_end)
        err = max(err, float(np.abs(traj[-1] - exact).max()))
    return err


def _accuracy_study_2d(config: ExperimentConfig, result: ExperimentResult) -> None:
    problem = builtin_problem("analytic_2d", config.horizon)
    ny = config.n if config.ny is None else config.ny
    grid = make_grid_2d(config.n, ny, problem.lengths)
    dt = config.dts[0]
    steps = int(round(config.horizon / dt))
    timegrid = TimeGrid(config.horizon, steps)
    xs, ys = grid.x.interior(), grid.y.interior()
    tag = (f"{config.problem}-{config.solver}-{config.scheme}"
           f"-dt{dt:g}-T{config.horizon:g}-P{config.px}x{config.py}")
    if config.solver == "mono":
        ws = make_workspace(
            spectral_factorization_2d(
                build_laplacian_2d(config.n, ny, problem.nu, grid.x.h, grid.y.h)),
            timegrid.dt)
        traj = run_monodomain(problem, grid, timegrid, config.scheme, ws)
        exact = problem.exact(xs[:, None], ys[None, :], config.horizon)
        err = float(np.abs(traj[-1] - exact).max())
        result.summary_rows.append(
            (tag, "", dt, config.horizon, 1, config.scheme, "mono", "", err, "", ""))
    else:
        delta = config.overlaps[0]
        layout = decompose_2d(config.n, ny, config.px, config.py, delta,
                              convention=config.overlap_convention)
        pieces = build_local_pieces_2d(problem, grid, layout, timegrid.dt)
        scfg = config.solver_config()
        if config.solver == "method1":
            trajs, logs = method1_march(pieces, layout.interfaces, timegrid, scfg)
            iters = max((log.iterations for log in logs), default=0)
            for m, log in enumerate(logs[:4]):
                _decay_from_log(result.decay_rows, tag, log, time_level=m + 1)
        else:
            guess = random_trace_guess(layout.interfaces, config.seed, steps=steps)
            trajs, log = method2_solve(pieces, layout.interfaces, timegrid, scfg,
                                       init_guess=guess)
            iters = log.iterations
            _decay_from_log(result.decay_rows, tag, log, time_level=0)
        err = _final_error_2d(problem, grid, layout, trajs, config.horizon)
        result.summary_rows.append(
            (tag, delta, dt, config.horizon, config.px, config.scheme,
             config.solver, "", err, "", iters))
    result.notes["error_normalization"] = "absolute max-norm error at the final time"


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Dispatch on the problem family; optionally write CSVs to config.out."""
    result = ExperimentResult(config=config)
    start = time.perf_counter()
    if config.problem == "error_equation":
        _rate_study(config, result)
    elif config.problem == "analytic_1d":
        _accuracy_study_1d(config, result)
    else:
        _accuracy_study_2d(config, result)
    result.wall_time = time.perf_counter() - start
    if config.out is not None:
        result.write(config.out)
    return result


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def _parse_subdomains(text: str):
    parts = text.lower().split("x")
    if len(parts) == 1:
        return int(parts[0]), 1
    if len(parts) == 2:
        return int(parts[0]), int(parts[1])
    raise ValueError(f"cannot parse subdomain count {text!r}")


def _read_config_file(path: str) -> dict:
    values = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"bad config line {raw!r}")
        key, _, val = line.partition("=")
        values[key.strip().replace("-", "_")] = val.strip()
    return values


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="letd",
        description="Localized exponential time differencing experiment runner.")
    p.add_argument("--config", help="key = value file; explicit flags override it")
    p.add_argument("--problem", choices=PROBLEMS)
    p.add_argument("--solver", choices=SOLVERS)
    p.add_argument("--scheme", choices=("etd1", "etd2"))
    p.add_argument("--n", type=int, help="interior nodes per direction")
    p.add_argument("--ny", type=int, help="interior nodes in y (2d only)")
    p.add_argument("--dt", help="time step, or comma-separated sweep")
    p.add_argument("--T", dest="horizon", type=float, help="time horizon")
    p.add_argument("--subdomains", help="P or PxQ")
    p.add_argument("--overlap-cells", help="cells, or comma-separated sweep")
    p.add_argument("--overlap-convention", choices=("half", "full"))
    p.add_argument("--tol", type=float, help="stopping tolerance")
    p.add_argument("--max-iters", type=int)
    p.add_argument("--fixed-iters", type=int, help="fixed sweep budget")
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", type=int, help="number of seeds to average")
    p.add_argument("--window-steps", type=int, help="waveform window length")
    p.add_argument("--out", help="output directory for CSV files")
    return p


_CONFIG_KEYS = {
    "problem": str, "solver": str, "scheme": str, "n": int, "ny": int,
    "dt": str, "T": float, "horizon": float, "subdomains": str,
    "overlap_cells": str, "overlap_convention": str, "tol": float,
    "max_iters": int, "fixed_iters": int, "seed": int, "seeds": int,
    "window_steps": int, "out": str,
}


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    merged = {}
    if args.config:
        for key, val in _read_config_file(args.config).items():
            if key not in _CONFIG_KEYS:
                raise ValueError(f"unknown config key {key!r}")
            merged[key] = _CONFIG_KEYS[key](val)
    cli = {
        "problem": args.problem, "solver": args.solver, "scheme": args.scheme,
        "n": args.n, "ny": args.ny, "dt": args.dt, "horizon": args.horizon,
        "subdomains": args.subdomains, "overlap_cells": args.overlap_cells,
        "overlap_convention": args.overlap_convention, "tol": args.tol,
        "max_iters": args.max_iters, "fixed_iters": args.fixed_iters,
        "seed": args.seed, "seeds": args.seeds,
        "window_steps": args.window_steps, "out": args.out,
    }
    merged.update({k: v for k, v in cli.items() if v is not None})
    merged.setdefault("T", merged.pop("horizon", None))
    if merged.get("T") is None:
        merged.pop("T", None)

    kwargs = {}
    for src, dst in (("problem", "problem"), ("solver", "solver"),
                     ("scheme", "scheme"), ("n", "n"), ("ny", "ny"),
                     ("T", "horizon"), ("overlap_convention", "overlap_convention"),
                     ("tol", "tolerance"), ("max_iters", "max_iterations"),
                     ("fixed_iters", "fixed_iterations"), ("seed", "seed"),
                     ("seeds", "seeds"), ("window_steps", "window_steps"),
                     ("out", "out")):
        if merged.get(src) is not None:
            kwargs[dst] = merged[src]
    if merged.get("dt") is not None:
        kwargs["dts"] = tuple(float(v) for v in str(merged["dt"]).split(","))
    if merged.get("subdomains") is not None:
        kwargs["px"], kwargs["py"] = _parse_subdomains(str(merged["subdomains"]))
    if merged.get("overlap_cells") is not None:
        kwargs["overlaps"] = tuple(int(v) for v in str(merged["overlap_cells"]).split(","))
    return ExperimentConfig(**kwargs)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
        result = run_experiment(config)
    except (ValueError, OSError) as exc:
        print(f"letd: {exc}", file=sys.stderr)
        return 2
    if config.out is None:
        sys.stdout.write(result.summary_csv())
    else:
        print(f"wrote {Path(config.out) / 'summary.csv'} "
              f"and {Path(config.out) / 'decay.csv'} "
              f"({result.wall_time:.2f} s)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
