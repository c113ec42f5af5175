"""Implicit time stepping: oracles, certificates, energy bookkeeping."""

import numpy as np
import pytest

from ferrosolve import (AssembledSystem, BallIndicator, Grid,
                        LoadSchedule, LogSaturationRadial, PowerLaw,
                        Quadratic, StepSolveFailure, SteppedProblem, TimeGrid,
                        average_loads, energy_report, interpolant_gap,
                        make_tensors)
from ferrosolve.potentials import full_value
from ferrosolve.rothe import _pw_linear_average


def _single_cell_problem(f_spec, g_spec, level=3, hardening=0.2, coupling=0.6):
    grid = Grid(1, 1)
    t = make_tensors(1, 1.0, 1.0, coupling=coupling, hardening=hardening)
    sys_ = AssembledSystem(grid, t)
    return grid, sys_, SteppedProblem(sys_, f_spec, g_spec, level, T=1.0)


def test_time_grid_dyadic():
    tg = TimeGrid(T=2.0, level=3)
    assert tg.n_steps == 8
    assert tg.h == pytest.approx(0.25)
    assert np.allclose(tg.times, np.linspace(0, 2, 9))


def test_pw_linear_average_exact():
    ts = np.array([0.0, 0.5, 1.0])
    vs = np.array([0.0, 1.0, 0.0])
    # average of the tent function over [0.25, 0.75]
    assert _pw_linear_average(ts, vs, 0.25, 0.75) == pytest.approx(0.75)
    # and over a piece inside one segment
    assert _pw_linear_average(ts, vs, 0.0, 0.25) == pytest.approx(0.25)


def test_average_loads_linear_in_loads():
    grid = Grid(1, 4)
    t = make_tensors(1, 1.0, 1.0, coupling=0.3)
    sys_ = AssembledSystem(grid, t)
    tg = TimeGrid(T=1.0, level=2)
    s1 = LoadSchedule.uniform([0.0, 1.0], [[0.0], [2.0]], [0.0, 1.0], grid)
    s2 = LoadSchedule.uniform([0.0, 1.0], [[0.0], [4.0]], [0.0, 2.0], grid)
    z1 = average_loads(sys_, s1, tg)
    z2 = average_loads(sys_, s2, tg)
    assert np.allclose(z2, 2.0 * z1, atol=1e-12)
    # exact step averages of a linear ramp: values at step midpoints
    b_avg, q_avg = s1.step_averages(tg)
    mids = (np.arange(4) + 0.5) * tg.h
    assert np.allclose(b_avg[:, 0, 0], 2.0 * mids, atol=1e-14)
    assert np.allclose(q_avg[:, 0], mids, atol=1e-14)


# ---------------------------------------------------------------------------
# oracle (a): quadratic f + p=2 power law g has a closed-form linear step


def test_step_matches_closed_form_linear_oracle():
    c_g = 0.8
    H = np.diag([0.5, 1.5])
    f_spec = Quadratic(H)
    g_spec = PowerLaw(c_g, 2.0)
    grid, sys_, prob = _single_cell_problem(f_spec, g_spec)
    h = prob.h
    z_prev = np.array([[0.1, -0.3]])
    zhat = np.array([[0.7, 0.4]])

    z, Sigma, cert = prob.step(z_prev, zhat, step_tol=1e-14, fp_tol=1e-13)

    # optimality: (v - z_prev)/(2 c h) + (M_m + H) v = zhat + z_prev/(2 c h)
    Mm = sys_.assemble_M_matrix() + prob.L + prob.reg * np.eye(2)
    A = np.eye(2) / (2 * c_g * h) + Mm + H
    v_ref = np.linalg.solve(A, zhat[0] + z_prev[0] / (2 * c_g * h))
    assert np.abs(z[0] - v_ref).max() <= 1e-9
    assert cert.residual <= 1e-14


# ---------------------------------------------------------------------------
# oracle (b): indicator g + log-saturation f vs brute-force grid search


def test_step_matches_grid_search_oracle():
    f_spec = LogSaturationRadial(1.0)
    g_spec = BallIndicator(0.5)
    grid, sys_, prob = _single_cell_problem(f_spec, g_spec, level=2)
    h = prob.h
    z_prev = np.array([[0.05, 0.1]])
    zhat = np.array([[0.9, 0.8]])
    z, Sigma, cert = prob.step(z_prev, zhat, step_tol=1e-12, fp_tol=1e-12)

    # brute force on a 400 x 400 lattice over (r, P)
    Mm = sys_.assemble_M_matrix() + prob.L + prob.reg * np.eye(2)
    r_grid = np.linspace(-1.0, 1.0, 400)
    P_grid = np.linspace(-0.999, 0.999, 400)
    R, P = np.meshgrid(r_grid, P_grid, indexing="ij")
    V = np.stack([R.ravel(), P.ravel()], axis=-1)
    rate = (V - z_prev[0]) / h
    obj = (h * g_spec.conjugate_value(rate)
           + 0.5 * np.sum((V @ Mm.T) * V, axis=-1)
           + full_value(f_spec, V, 1)
           - V @ zhat[0])
    best = V[np.argmin(np.where(np.isfinite(obj), obj, np.inf))]
    spacing = max(r_grid[1] - r_grid[0], P_grid[1] - P_grid[0])
    assert np.abs(z[0] - best).max() <= spacing


# ---------------------------------------------------------------------------
# uniqueness, certificates, energy


def _reference_run(level=4, g_spec=None, f_spec=None, hardening=0.2,
                   step_tol=1e-9, fp_tol=1e-11):
    grid = Grid(1, 16)
    t = make_tensors(1, 2.0, 1.0, coupling=0.5, hardening=hardening)
    sys_ = AssembledSystem(grid, t)
    f_spec = f_spec or Quadratic(np.eye(grid.internal_dim))
    g_spec = g_spec or PowerLaw(1.0, 2.0)
    prob = SteppedProblem(sys_, f_spec, g_spec, level, T=1.0)
    sched = LoadSchedule.uniform([0.0, 1.0], [[0.0], [0.8]], [0.0, 0.4], grid)
    zhat = average_loads(sys_, sched, prob.time_grid)
    z0 = np.zeros((grid.n_cells, grid.internal_dim))
    traj, ledger = prob.run(z0, zhat, step_tol=step_tol, fp_tol=fp_tol)
    return grid, prob, zhat, traj, ledger


def test_step_uniqueness_random_restarts():
    grid, prob, zhat, traj, _ = _reference_run(level=3)
    rng = np.random.default_rng(77)
    n = 4  # restart a mid-trajectory step
    z_prev = traj.z_nodes[n]
    z_ref = traj.z_nodes[n + 1]
    for _ in range(5):
        y0 = z_prev + 0.5 * rng.standard_normal(z_prev.shape)
        z, _, _ = prob.step(z_prev, zhat[n], step_tol=1e-10, fp_tol=1e-12, y0=y0)
        assert np.abs(z - z_ref).max() <= 1e-7


def test_certificates_below_tolerance():
    _, _, _, traj, _ = _reference_run(level=4, step_tol=1e-8)
    assert all(c.residual <= 1e-8 for c in traj.certificates)


def test_energy_slack_nonnegative_rate_dependent():
    # L = 0, coercive quadratic f (the unregularized regime)
    _, _, _, traj, ledger = _reference_run(hardening=None, step_tol=1e-10)
    rep = energy_report(ledger)
    assert rep["slack"].min() >= -1e-8


def test_energy_slack_and_constraint_rate_independent():
    g = BallIndicator(0.4)
    _, prob, zhat, traj, ledger = _reference_run(
        level=4, g_spec=g, hardening=0.3, step_tol=1e-10, fp_tol=1e-12)
    rep = energy_report(ledger)
    assert rep["slack"].min() >= -1e-8
    # driving force stays in K (constraint violation within certificate budget)
    for cert in traj.certificates:
        assert cert.constraint_violation <= 1e-8


def test_dissipation_nonnegative():
    for hardening in (None, 0.3):
        _, _, _, _, ledger = _reference_run(hardening=hardening, step_tol=1e-10)
        assert ledger.dissipation.min() >= -1e-10


def test_interpolant_gap_identity():
    grid, prob, zhat, traj, _ = _reference_run(level=4)
    lhs, rhs = interpolant_gap(traj, grid.volumes, p_star=2.0)
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_zero_scenario_stays_zero():
    grid = Grid(1, 8)
    t = make_tensors(1, 1.0, 1.0, coupling=0.2, hardening=0.1)
    sys_ = AssembledSystem(grid, t)
    prob = SteppedProblem(sys_, Quadratic(np.eye(2)), PowerLaw(1.0, 2.0), 3, T=1.0)
    zhat = np.zeros((prob.time_grid.n_steps, grid.n_cells, 2))
    traj, ledger = prob.run(np.zeros((grid.n_cells, 2)), zhat)
    assert np.abs(traj.z_nodes).max() == 0.0
    assert np.abs(ledger.slack()).max() == 0.0
    assert np.abs(ledger.dissipation).max() == 0.0


def test_discrete_chain_rule_quadratic_f():
    """Convexity inequality: I_f(z^n) - I_f(z^{n-1}) <= <grad f(z^n), dz>."""
    grid, prob, zhat, traj, _ = _reference_run(level=4)
    H = np.eye(grid.internal_dim)
    vol = grid.volumes
    for n in range(traj.time_grid.n_steps):
        za, zb = traj.z_nodes[n], traj.z_nodes[n + 1]
        If_a = 0.5 * np.sum(vol[:, None] * (za @ H) * za)
        If_b = 0.5 * np.sum(vol[:, None] * (zb @ H) * zb)
        pairing = np.sum(vol[:, None] * (zb @ H) * (zb - za))
        assert If_b - If_a <= pairing + 1e-12


def test_unattainable_tolerance_raises():
    grid = Grid(1, 4)
    t = make_tensors(1, 1.0, 1.0, coupling=0.5, hardening=0.1)
    sys_ = AssembledSystem(grid, t)
    prob = SteppedProblem(sys_, Quadratic(np.eye(2)), PowerLaw(1.0, 2.0), 2, T=1.0)
    sched = LoadSchedule.uniform([0.0, 1.0], [[1.0], [1.0]], [0.5, 0.5], grid)
    zhat = average_loads(sys_, sched, prob.time_grid)
    with pytest.raises(StepSolveFailure):
        prob.run(np.zeros((grid.n_cells, 2)), zhat, step_tol=0.0,
                 fp_tol=0.0, max_iter=50)


def test_affine_and_constant_interpolants():
    _, _, _, traj, _ = _reference_run(level=3)
    h = traj.time_grid.h
    # affine interpolant hits the nodes and is linear inside each step
    assert np.allclose(traj.z_affine(2 * h), traj.z_nodes[2])
    mid = traj.z_affine(1.5 * h)
    assert np.allclose(mid, 0.5 * (traj.z_nodes[1] + traj.z_nodes[2]))
    # piecewise-constant interpolant jumps to the right endpoint
    assert np.allclose(traj.z_const(1.5 * h), traj.z_nodes[2])
    assert np.allclose(traj.z_const(0.0), traj.z_nodes[0])
