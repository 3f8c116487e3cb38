import copy
import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from willmore_pf.grid import Grid
from willmore_pf.minimizer import MinimizeConfig
from willmore_pf.potential import polynomial_potential, quartic_double_well
from willmore_pf.scheme import (
    PotentialRejected,
    StepFailure,
    check_estimates,
    dyadic_pairs,
    evaluate_interpolant,
    interpolant_index,
    num_steps,
    refinement_experiment,
    run,
    stability_experiment,
)

P = quartic_double_well()


@pytest.fixture(scope="module")
def cos_run():
    grid = Grid(32)
    (x,) = grid.coordinates()
    v0 = 0.3 * np.cos(np.pi * x) + 0.1
    trace, states = run(grid, v0, 2e-3, 0.05, P)
    return grid, trace, states


@pytest.mark.parametrize("c", [1.0, -1.0])
def test_stationary_wells(c):
    grid = Grid(16)
    v0 = grid.constant(c)
    trace, states = run(grid, v0, 0.01, 0.1, P)
    assert len(states) == 11
    for s in states:
        assert np.array_equal(s.v, v0)
        assert abs(s.energy) <= 1e-14
    assert all(r.inner_iters == 0 and r.converged for r in trace.rows[1:])


def test_run_invariants(cos_run):
    grid, trace, states = cos_run
    assert [r.n for r in trace.rows] == list(range(26))
    E = trace.column("energy")
    assert np.all(np.diff(E) <= 10 * trace.tol_grad * (1 + trace.E0))
    assert E[-1] < E[0]
    m = trace.column("mean")
    assert np.max(np.abs(m - trace.alpha)) <= 1e-12 * (1 + abs(trace.alpha))
    assert trace.alpha == pytest.approx(0.1, abs=1e-15)
    assert all(r.converged for r in trace.rows)
    rep = check_estimates(trace, states, grid)
    assert rep.passed, rep.summary()


def test_trace_matches_states(cos_run):
    grid, trace, states = cos_run
    for r, s in zip(trace.rows, states):
        assert r.energy == s.energy
        assert r.t == s.t
        assert r.el_residual == s.residual_norm
    assert trace.rows[0].step_l2 == 0.0
    assert trace.rows[3].step_l2 == pytest.approx(grid.norm(states[3].v - states[2].v), rel=1e-12)


@pytest.mark.parametrize("tau, T, n", [(1e-3, 0.1, 100), (0.03, 0.1, 4), (0.25, 1.0, 4), (0.3, 0.1, 1)])
def test_num_steps(tau, T, n):
    assert num_steps(tau, T) == n


def test_interpolant(cos_run):
    _, trace, states = cos_run
    tau = trace.tau
    assert evaluate_interpolant(states, 0.0) is states[0]
    assert evaluate_interpolant(states, 1.5 * tau) is states[1]
    assert evaluate_interpolant(states, 7 * tau) is states[7]
    assert evaluate_interpolant(states, states[-1].t) is states[-1]
    with pytest.raises(ValueError):
        evaluate_interpolant(states, states[-1].t + tau)


@given(st.integers(0, 10_000), st.sampled_from([1e-3, 5e-4, 2e-3, 0.01, 0.003]))
def test_interpolant_index_at_grid_times(n, tau):
    assert interpolant_index(tau, n * tau) == n


def test_dyadic_pairs():
    assert list(dyadic_pairs(3)) == [(0, 1), (1, 2), (2, 3), (0, 2), (1, 3)]


def test_corrupted_trace_flagged(cos_run):
    grid, trace, states = cos_run
    bad = copy.deepcopy(trace)
    bad.rows[7].energy = bad.rows[6].energy + 1e-3
    rep = check_estimates(bad)
    assert not rep.passed
    assert rep["energy monotonicity"].violations == [7]
    assert check_estimates(trace).passed


def test_mean_drift_flagged(cos_run):
    _, trace, _ = cos_run
    bad = copy.deepcopy(trace)
    bad.rows[4].mean += 1e-9
    rep = check_estimates(bad)
    assert rep["mean conservation"].violations == [4]


def test_step_failure_carries_partial_run():
    grid = Grid(32)
    (x,) = grid.coordinates()
    v0 = np.tanh((x - 0.5) / 0.1)
    with pytest.raises(StepFailure) as exc:
        run(grid, v0, 1e-3, 0.01, P, MinimizeConfig(max_iters=1))
    assert len(exc.value.trace.rows) == 2
    assert not exc.value.trace.rows[-1].converged


def test_warn_keeps_going(caplog):
    grid = Grid(32)
    (x,) = grid.coordinates()
    v0 = np.tanh((x - 0.5) / 0.1)
    with caplog.at_level(logging.WARNING):
        trace, _ = run(grid, v0, 1e-3, 0.005, P, MinimizeConfig(max_iters=1), on_failure="warn")
    assert len(trace.rows) == 6
    assert "did not converge" in caplog.text


def test_rejected_potential():
    bad = polynomial_potential([0, 0, -1], [0], sigma_dd_bound=1.0, C0=1.0)
    grid = Grid(8)
    with pytest.raises(PotentialRejected):
        run(grid, grid.zeros(), 0.01, 0.05, bad)


@pytest.mark.parametrize("tau, T", [(0.0, 1.0), (1.0, 1.0), (0.1, 0.0)])
def test_bad_time_arguments(tau, T):
    grid = Grid(8)
    with pytest.raises(ValueError):
        run(grid, grid.zeros(), tau, T, P)


def test_deterministic():
    grid = Grid((12, 12))
    v0 = 0.2 * np.random.default_rng(5).uniform(-1, 1, grid.shape)
    a, sa = run(grid, v0, 1e-3, 0.01, P)
    b, sb = run(grid, v0, 1e-3, 0.01, P)
    assert a.rows == b.rows
    assert all(np.array_equal(x.v, y.v) for x, y in zip(sa, sb))


def test_stability_identical_inputs():
    grid = Grid(16)
    (x,) = grid.coordinates()
    v0 = 0.3 * np.cos(np.pi * x)
    rep = stability_experiment(grid, v0, v0.copy(), 1e-3, 0.01, P)
    assert rep.identical and rep.passed
    assert np.all(rep.distances == 0)


def test_stability_small_perturbation():
    grid = Grid(32)
    (x,) = grid.coordinates()
    v0 = 0.3 * np.cos(np.pi * x)
    noise = grid.project_mean_zero(np.random.default_rng(0).standard_normal(grid.shape))
    noise *= 1e-4 / grid.norm(noise)
    rep = stability_experiment(grid, v0, v0 + noise, 2e-3, 0.04, P)
    assert rep.distances[0] == pytest.approx(1e-4)
    assert rep.passed, rep.summary()


def test_refinement_stationary():
    grid = Grid(16)
    rep = refinement_experiment(grid, grid.constant(1.0), [4e-3, 2e-3, 1e-3], 0.02, P)
    assert rep.deltas == [0.0, 0.0]
    assert rep.passed


def test_refinement_rejects_bad_list():
    grid = Grid(8)
    with pytest.raises(ValueError):
        refinement_experiment(grid, grid.zeros(), [1e-3, 2e-3], 0.01, P)
