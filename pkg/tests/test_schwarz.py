"""Iterative drivers: per-step interface iteration and waveform relaxation."""
import math

import numpy as np
import pytest

from letd.geometry import Problem1D, decompose_1d, make_grid_1d
from letd.matfunc import build_laplacian_1d, spectral_factorization
from letd.schwarz import (
    SolverConfig,
    build_local_pieces,
    method1_advance,
    method1_march,
    method2_solve,
    random_trace_guess,
    superlinear_bound,
    theoretical_rate,
)
from letd.steppers import TimeGrid, coupled_step_direct, make_workspace, run_monodomain

PI2 = math.pi ** 2


def zero_problem(horizon=1.0):
    z = lambda x, t=None: np.zeros_like(np.asarray(x, dtype=float))
    return Problem1D(
        nu=1.0, length=2.0, horizon=horizon,
        source=lambda x, t: z(x),
        boundary_left=lambda t: 0.0, boundary_right=lambda t: 0.0,
        initial=z, exact=lambda x, t: z(x),
    )


def analytic_problem():
    u = lambda x, t: np.exp(PI2 * t) * np.sin(np.pi * (x - 0.25))
    return Problem1D(
        nu=1.0, length=2.0, horizon=0.25,
        source=lambda x, t: 2.0 * PI2 * u(x, t),
        boundary_left=lambda t: float(u(-1.0, t)),
        boundary_right=lambda t: float(u(1.0, t)),
        initial=lambda x: u(x, 0.0),
        exact=u, origin=-1.0,
    )


def zero_reference(interfaces, steps=None):
    if steps is None:
        return [np.zeros(i.size) for i in interfaces]
    return [np.zeros((steps + 1, i.size)) for i in interfaces]


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(scheme="rk4")
    with pytest.raises(ValueError):
        SolverConfig(tolerance=-1.0)
    with pytest.raises(ValueError):
        SolverConfig(mode="fixed")  # needs a budget
    with pytest.raises(ValueError):
        SolverConfig(mode="nonsense")
    with pytest.raises(ValueError):
        SolverConfig(window_steps=0)
    cfg = SolverConfig(mode="fixed", fixed_iterations=7)
    assert cfg.budget == 7


def test_random_trace_guess_properties():
    g = make_grid_1d(63, 2.0)
    lay = decompose_1d(g, 2, 2)
    a = random_trace_guess(lay.interfaces, seed=3)
    b = random_trace_guess(lay.interfaces, seed=3)
    c = random_trace_guess(lay.interfaces, seed=4)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)
    assert any(not np.array_equal(x, y) for x, y in zip(a, c))
    for x in a:
        assert ((x > 0) & (x < 1)).all()
    t = random_trace_guess(lay.interfaces, seed=0, steps=10)
    assert all(x.shape == (11, 1) for x in t)


def test_zero_guess_on_zero_problem_converges_immediately():
    prob = zero_problem()
    grid = make_grid_1d(127, prob.length)
    lay = decompose_1d(grid, 2, 4)
    pieces = build_local_pieces(prob, grid, lay, 0.01)
    cfg = SolverConfig(scheme="etd1", tolerance=1e-8)
    states = [p.u0 for p in pieces]
    new_states, log = method1_advance(pieces, lay.interfaces, states, 0.0, 0.01, cfg)
    assert log.converged and log.iterations == 1
    for s in new_states:
        assert np.abs(s).max() == 0.0


def test_fixed_mode_runs_exactly_the_budget():
    prob = zero_problem()
    grid = make_grid_1d(127, prob.length)
    lay = decompose_1d(grid, 2, 4)
    pieces = build_local_pieces(prob, grid, lay, 0.01)
    cfg = SolverConfig(scheme="etd1", mode="fixed", fixed_iterations=9)
    guess = random_trace_guess(lay.interfaces, seed=1)
    _, log = method1_advance(pieces, lay.interfaces, [p.u0 for p in pieces],
                             0.0, 0.01, cfg, init_guess=guess)
    assert log.iterations == 9 and log.updates.shape[0] == 9 and log.converged


@pytest.mark.parametrize("scheme", ["etd1", "etd2"])
def test_per_step_iteration_matches_direct_coupled_solve(scheme):
    prob = analytic_problem()
    grid = make_grid_1d(255, prob.length, origin=prob.origin)
    lay = decompose_1d(grid, 2, 8)
    dt = 0.0125
    pieces = build_local_pieces(prob, grid, lay, dt)
    cfg = SolverConfig(scheme=scheme, tolerance=1e-14, max_iterations=500)
    states = [p.u0 for p in pieces]
    new_states, log = method1_advance(pieces, lay.interfaces, states, 0.0, dt, cfg)
    assert log.converged

    p1, p2 = lay.pieces
    ws1 = make_workspace(spectral_factorization(build_laplacian_1d(p1.size, prob.nu, grid.h)), dt)
    ws2 = make_workspace(spectral_factorization(build_laplacian_1d(p2.size, prob.nu, grid.h)), dt)
    v1, v2 = coupled_step_direct(ws1, ws2, scheme, states[0], states[1],
                                 prob, grid, lay, 0.0, dt)
    scale = max(np.abs(v1).max(), np.abs(v2).max())
    assert np.abs(new_states[0] - v1).max() < 1e-12 * scale
    assert np.abs(new_states[1] - v2).max() < 1e-12 * scale


def test_single_piece_march_matches_monodomain():
    prob = analytic_problem()
    n = 255
    grid = make_grid_1d(n, prob.length, origin=prob.origin)
    tg = TimeGrid(prob.horizon, 20)
    lay = decompose_1d(grid, 1, 0)
    pieces = build_local_pieces(prob, grid, lay, tg.dt)
    cfg = SolverConfig(scheme="etd2", tolerance=1e-10)
    trajs, logs = method1_march(pieces, lay.interfaces, tg, cfg)
    ws = make_workspace(spectral_factorization(build_laplacian_1d(n, prob.nu, grid.h)), tg.dt)
    mono = run_monodomain(prob, grid, tg, "etd2", ws)
    assert np.abs(trajs[0] - mono).max() < 1e-11 * np.abs(mono).max()


@pytest.mark.parametrize("scheme", ["etd1", "etd2"])
def test_waveform_and_per_step_drivers_agree_when_converged(scheme):
    prob = analytic_problem()
    grid = make_grid_1d(255, prob.length, origin=prob.origin)
    lay = decompose_1d(grid, 2, 8)
    tg = TimeGrid(prob.horizon, 25)
    pieces = build_local_pieces(prob, grid, lay, tg.dt)
    cfg = SolverConfig(scheme=scheme, tolerance=1e-12, max_iterations=5000)
    t1, logs1 = method1_march(pieces, lay.interfaces, tg, cfg)
    t2, log2 = method2_solve(pieces, lay.interfaces, tg, cfg)
    assert all(log.converged for log in logs1) and log2.converged
    scale = max(np.abs(t).max() for t in t1)
    for a, b in zip(t1, t2):
        assert np.abs(a - b).max() < 1e-10 * scale


def test_time_windows_reproduce_the_unwindowed_solution():
    prob = analytic_problem()
    grid = make_grid_1d(255, prob.length, origin=prob.origin)
    lay = decompose_1d(grid, 2, 4)
    tg = TimeGrid(prob.horizon, 24)
    pieces = build_local_pieces(prob, grid, lay, tg.dt)
    full = SolverConfig(scheme="etd2", tolerance=1e-12, max_iterations=5000)
    wined = SolverConfig(scheme="etd2", tolerance=1e-12, max_iterations=5000, window_steps=6)
    ta, la = method2_solve(pieces, lay.interfaces, tg, full)
    tb, lb = method2_solve(pieces, lay.interfaces, tg, wined)
    assert la.converged and lb.converged
    assert len(lb.windows) == 4 and all(w.converged for w in lb.windows)
    assert lb.iterations == sum(w.iterations for w in lb.windows)
    scale = max(np.abs(t).max() for t in ta)
    for a, b in zip(ta, tb):
        assert np.abs(a - b).max() < 1e-10 * scale


def test_ragged_final_window_is_handled():
    prob = analytic_problem()
    grid = make_grid_1d(63, prob.length, origin=prob.origin)
    lay = decompose_1d(grid, 2, 2)
    tg = TimeGrid(prob.horizon, 10)
    pieces = build_local_pieces(prob, grid, lay, tg.dt)
    full = SolverConfig(scheme="etd1", tolerance=1e-12, max_iterations=5000)
    wined = SolverConfig(scheme="etd1", tolerance=1e-12, max_iterations=5000, window_steps=4)
    ta, _ = method2_solve(pieces, lay.interfaces, tg, full)
    tb, lb = method2_solve(pieces, lay.interfaces, tg, wined)
    assert len(lb.windows) == 3  # 4 + 4 + 2 steps
    scale = max(np.abs(t).max() for t in ta)
    for a, b in zip(ta, tb):
        assert np.abs(a - b).max() < 1e-10 * scale


@pytest.mark.parametrize("solver", ["method1", "method2"])
@pytest.mark.parametrize("scheme", ["etd1", "etd2"])
def test_interface_errors_contract_at_least_at_the_two_piece_rate(solver, scheme):
    # on the homogeneous problem the iterates are the errors; every two
    # sweeps they must shrink by at least the overlap contraction factor
    prob = zero_problem()
    grid = make_grid_1d(127, prob.length)
    lay = decompose_1d(grid, 2, 4)
    kappa = theoretical_rate(*lay.overlap_fractions())
    steps = 50
    tg = TimeGrid(prob.horizon, steps)
    pieces = build_local_pieces(prob, grid, lay, tg.dt)
    budget = 24
    cfg = SolverConfig(scheme=scheme, mode="fixed", fixed_iterations=budget)
    for seed in (0, 1, 2):
        if solver == "method1":
            guess = random_trace_guess(lay.interfaces, seed)
            _, log = method1_advance(pieces, lay.interfaces, [p.u0 for p in pieces],
                                     0.0, tg.dt, cfg, init_guess=guess,
                                     reference=zero_reference(lay.interfaces))
        else:
            guess = random_trace_guess(lay.interfaces, seed, steps=steps)
            _, log = method2_solve(pieces, lay.interfaces, tg, cfg,
                                   init_guess=guess,
                                   reference=zero_reference(lay.interfaces, steps))
        curve = log.curve()
        for k in range(budget // 2 + 1):
            assert curve[2 * k] <= kappa**k * curve[0] + 1e-10, (
                solver, scheme, seed, k, curve[2 * k], kappa**k * curve[0])


def test_waveform_contraction_improves_with_overlap():
    prob = zero_problem()
    grid = make_grid_1d(255, prob.length)
    tg = TimeGrid(1.0, 50)
    rates = []
    for delta in (1, 4, 16):
        lay = decompose_1d(grid, 2, delta)
        pieces = build_local_pieces(prob, grid, lay, tg.dt)
        cfg = SolverConfig(scheme="etd1", mode="fixed", fixed_iterations=40)
        guess = random_trace_guess(lay.interfaces, seed=0, steps=50)
        _, log = method2_solve(pieces, lay.interfaces, tg, cfg, init_guess=guess,
                               reference=zero_reference(lay.interfaces, 50))
        from letd.analysis import estimate_contraction
        rates.append(math.sqrt(estimate_contraction(log.curve())))
    assert rates[0] > rates[1] > rates[2], rates


def test_per_step_contraction_improves_as_the_step_shrinks():
    prob = zero_problem()
    grid = make_grid_1d(255, prob.length)
    lay = decompose_1d(grid, 2, 8)
    from letd.analysis import estimate_contraction
    rates = []
    for dt in (0.2, 0.025):
        pieces = build_local_pieces(prob, grid, lay, dt)
        cfg = SolverConfig(scheme="etd1", mode="fixed", fixed_iterations=30)
        guess = random_trace_guess(lay.interfaces, seed=0)
        _, log = method1_advance(pieces, lay.interfaces, [p.u0 for p in pieces],
                                 0.0, dt, cfg, init_guess=guess,
                                 reference=zero_reference(lay.interfaces))
        rates.append(math.sqrt(estimate_contraction(log.curve())))
    assert rates[0] > rates[1], rates


def test_superlinear_bound_formula_and_monotonicity():
    val = superlinear_bound(3, 0.46875, 0.53125, length=2.0, nu=1.0, horizon=1.0)
    want = math.erfc(3 * (0.53125 - 0.46875) * 2.0 / (2.0 * math.sqrt(1.0 * 1.0)))
    assert val == pytest.approx(want, rel=1e-14)
    vals = [superlinear_bound(k, 0.4, 0.6, 2.0, 1.0, 0.25) for k in range(1, 6)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_normalized_decay_curve_starts_at_one():
    prob = zero_problem()
    grid = make_grid_1d(127, prob.length)
    lay = decompose_1d(grid, 2, 4)
    pieces = build_local_pieces(prob, grid, lay, 0.02)
    cfg = SolverConfig(scheme="etd2", mode="fixed", fixed_iterations=10)
    guess = random_trace_guess(lay.interfaces, seed=5)
    _, log = method1_advance(pieces, lay.interfaces, [p.u0 for p in pieces],
                             0.0, 0.02, cfg, init_guess=guess,
                             reference=zero_reference(lay.interfaces))
    norm = log.normalized()
    assert norm[0] == pytest.approx(1.0)
    assert (np.diff(np.log(norm[: 6])) < 0).all()
