"""Minimizing-movement time stepping and checks of its discrete estimates.

Starting from ``v_0``, each state ``v_{n+1}`` minimizes
``1/2 |w - v_n|^2 + tau E(w)`` among fields with the mean of ``v_0``.  The
states define piecewise-constant-in-time interpolants on ``[n tau, (n+1) tau)``.
Along any such sequence the following hold (``E0 = E(v_0)``):

* energy monotonicity: ``E(v_{n+1}) <= E(v_n) <= E0``;
* per-step inequality: ``|v_{n+1} - v_n|^2 / (2 tau) + E(v_{n+1}) <= E(v_n)``;
* dissipation budget: ``sum_n |v_{n+1} - v_n|^2 / (2 tau) <= E0``;
* Hoelder bound: ``|v(t2) - v(t1)|^2 <= 2 E0 (tau + t2 - t1)``;
* residual bound: ``|r(v_{n+1})| <= |v_{n+1} - v_n| / tau`` for the
  Euler-Lagrange residual ``r``, and hence ``tau sum_{n>=1} |r(v_n)|^2 <= 2 E0``.

:func:`check_estimates` verifies all of them on a computed trajectory, with a
slack proportional to the inner solver tolerance.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .energy import assemble
from .grid import Grid
from .minimizer import MinimizeConfig, minimize_step
from .potential import Potential, validate_assumptions

logger = logging.getLogger(__name__)

MEAN_RTOL = 1e-12


@dataclass
class SchemeState:
    n: int
    t: float
    v: np.ndarray
    mu: np.ndarray
    M: float
    energy: float
    alpha: float
    step_norm: float
    residual_norm: float


@dataclass
class TraceRow:
    n: int
    t: float
    energy: float
    mean: float
    step_l2: float
    el_residual: float
    inner_iters: int
    converged: bool


@dataclass
class Trace:
    tau: float
    E0: float
    alpha: float
    tol_grad: float
    rows: list[TraceRow] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)


class PotentialRejected(ValueError):
    """The potential failed :func:`validate_assumptions` on the solution range."""

    def __init__(self, report):
        super().__init__("potential violates its structural assumptions:\n" + report.summary())
        self.report = report


class StepFailure(RuntimeError):
    """An inner solve did not converge; carries the partial run."""

    def __init__(self, message: str, trace: Trace, states: list[SchemeState]):
        super().__init__(message)
        self.trace = trace
        self.states = states


def num_steps(tau: float, t_final: float) -> int:
    """``ceil(t_final / tau)``, robust against quotients like ``0.1/0.001``."""
    q = t_final / tau
    n = math.ceil(q)
    if n - q > 1 - 1e-9 * max(1.0, q):
        n -= 1
    return n


def make_state(grid: Grid, p: Potential, v: np.ndarray, n: int, tau: float, alpha: float, step_norm: float) -> SchemeState:
    a = assemble(grid, v, p)
    return SchemeState(n, n * tau, v, a.mu, a.M, a.energy, alpha, step_norm, a.residual_norm)


def run(
    grid: Grid,
    v0: np.ndarray,
    tau: float,
    t_final: float,
    p: Potential,
    cfg: MinimizeConfig | None = None,
    *,
    on_failure: str = "abort",
    validate: bool = True,
    start_index: int = 0,
) -> tuple[Trace, list[SchemeState]]:
    """Run the scheme from `v0` up to ``t_final``.

    Produces states ``n = 0 .. ceil(t_final / tau)``.  With
    ``on_failure="abort"`` a non-converged inner solve raises
    :class:`StepFailure` holding the partial trace; with ``"warn"`` the step is
    logged and kept.  `start_index` offsets step numbers and times, which is
    used to continue a run from a snapshot.
    """
    cfg = cfg or MinimizeConfig()
    tau = float(tau)
    if not 0 < tau < 1:
        raise ValueError(f"tau must be positive and < 1, got {tau}")
    if not t_final > 0:
        raise ValueError(f"t_final must be positive, got {t_final}")
    if on_failure not in ("abort", "warn"):
        raise ValueError("on_failure must be 'abort' or 'warn'")
    v0 = grid.check(v0, "v0")
    if validate:
        R = 10.0 * (1.0 + float(np.max(np.abs(v0))))
        report = validate_assumptions(p, -R, R, 10_000)
        if not report.passed:
            raise PotentialRejected(report)

    alpha = grid.mean(v0)
    state = make_state(grid, p, v0.copy(), start_index, tau, alpha, 0.0)
    trace = Trace(tau=tau, E0=state.energy, alpha=alpha, tol_grad=cfg.tol_grad)
    trace.rows.append(_row(state, 0, True))
    states = [state]

    for k in range(num_steps(tau, t_final)):
        v_new, rep = minimize_step(grid, state.v, tau, p, cfg)
        step_norm = grid.norm(v_new - state.v)
        state = make_state(grid, p, v_new, state.n + 1, tau, alpha, step_norm)
        states.append(state)
        trace.rows.append(_row(state, rep.iters, rep.converged))
        if not rep.converged:
            msg = (
                f"inner solve at step {state.n} did not converge ({rep.reason}, "
                f"|grad|/tau = {rep.final_grad_norm:.3e} > tol_grad = {cfg.tol_grad:.1e})"
            )
            if on_failure == "abort":
                raise StepFailure(msg, trace, states)
            logger.warning(msg)
    return trace, states


def _row(state: SchemeState, iters: int, converged: bool) -> TraceRow:
    return TraceRow(
        n=state.n,
        t=state.t,
        energy=state.energy,
        mean=float(np.sum(state.v) / state.v.size),
        step_l2=state.step_norm,
        el_residual=state.residual_norm,
        inner_iters=iters,
        converged=converged,
    )


def interpolant_index(tau: float, t: float) -> int:
    """Index ``n`` with ``n tau <= t < (n+1) tau``, using the products ``n * tau``."""
    n = int(math.floor(t / tau))
    while n > 0 and n * tau > t:
        n -= 1
    while (n + 1) * tau <= t:
        n += 1
    return n


def evaluate_interpolant(states: Sequence[SchemeState], t: float, tau: float | None = None) -> SchemeState:
    """Piecewise-constant interpolant: the state with ``n = floor(t / tau)``."""
    if not states:
        raise ValueError("no states")
    if tau is None:
        if len(states) < 2:
            if t == states[0].t:
                return states[0]
            raise ValueError("cannot infer tau from a single state")
        tau = states[1].t - states[0].t
    n0 = states[0].n
    t_end = states[-1].t
    if not states[0].t <= t <= t_end:
        raise ValueError(f"t = {t} outside [{states[0].t}, {t_end}]")
    n = interpolant_index(tau, t)
    return states[min(n - n0, len(states) - 1)]


# estimate checks -------------------------------------------------------------


@dataclass
class EstimateCheck:
    name: str
    passed: bool
    margin: float
    violations: list[int] = field(default_factory=list)
    detail: str = ""


@dataclass
class EstimateReport:
    slack: float
    checks: list[EstimateCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, key: str) -> EstimateCheck:
        for c in self.checks:
            if c.name == key or c.name.startswith(key):
                return c
        raise KeyError(key)

    def summary(self) -> str:
        lines = [f"estimate checks (slack {self.slack:.3e})"]
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            extra = f" violations at {c.violations[:10]}" if c.violations else ""
            lines.append(f"  {status}  {c.name:<38} margin {c.margin:+.3e}{extra} {c.detail}".rstrip())
        return "\n".join(lines)


def default_slack(trace: Trace) -> float:
    return 10.0 * trace.tol_grad * (1.0 + trace.E0)


def dyadic_pairs(n_max: int):
    """Index pairs ``(n1, n1 + k)`` for gaps ``k = 1, 2, 4, ...``."""
    k = 1
    while k <= n_max:
        for n1 in range(0, n_max - k + 1):
            yield n1, n1 + k
        k *= 2


def check_estimates(
    trace: Trace,
    states: Sequence[SchemeState] | None = None,
    grid: Grid | None = None,
    slack: float | None = None,
) -> EstimateReport:
    """Verify the discrete estimates on a (possibly partial) run.

    The Hoelder check uses the stored fields when `states` and `grid` are
    given; otherwise it falls back to the triangle inequality on the step
    norms, which is a sufficient but not necessary test.  Margins are
    ``bound + slack - lhs`` minimized over all tested instances.
    """
    if slack is None:
        slack = default_slack(trace)
    tau = trace.tau
    E0 = trace.E0
    E = trace.column("energy")
    step = trace.column("step_l2")
    res = trace.column("el_residual")
    mean = trace.column("mean")
    rows = [r.n for r in trace.rows]
    N = len(rows) - 1
    checks = []

    # energy monotonicity
    m = np.empty(N + 1)
    m[0] = E0 + slack - E[0]
    m[1:] = E[:-1] + slack - E[1:]
    bad = [rows[i] for i in np.flatnonzero(m < 0)]
    bad += [rows[i] for i in np.flatnonzero(E > E0 + slack) if rows[i] not in bad]
    checks.append(EstimateCheck("energy monotonicity", not bad, float(m.min()), sorted(bad)))

    # per-step energy inequality
    if N:
        lhs = step[1:] ** 2 / (2 * tau) + E[1:]
        m = E[:-1] + slack - lhs
        bad = [rows[i + 1] for i in np.flatnonzero(m < 0)]
        checks.append(EstimateCheck("per-step energy inequality", not bad, float(m.min()), bad))
    else:
        checks.append(EstimateCheck("per-step energy inequality", True, math.inf))

    # dissipation budget, running partial sums
    partial = np.cumsum(step[1:] ** 2 / (2 * tau)) if N else np.zeros(0)
    m = E0 + slack - partial
    bad = [rows[i + 1] for i in np.flatnonzero(m < 0)]
    checks.append(
        EstimateCheck(
            "dissipation budget",
            not bad,
            float(m.min()) if N else E0 + slack,
            bad,
            f"sum={partial[-1] if N else 0.0:.6g} E0={E0:.6g}",
        )
    )

    # residual dissipation, from n = 1 on
    partial = tau * np.cumsum(res[1:] ** 2) if N else np.zeros(0)
    m = 2 * E0 + slack - partial
    bad = [rows[i + 1] for i in np.flatnonzero(m < 0)]
    checks.append(
        EstimateCheck(
            "residual dissipation",
            not bad,
            float(m.min()) if N else 2 * E0 + slack,
            bad,
            f"sum={partial[-1] if N else 0.0:.6g} 2E0={2 * E0:.6g}",
        )
    )

    # Euler-Lagrange residual bound at each accepted step
    if N:
        m = step[1:] / tau + trace.tol_grad - res[1:]
        bad = [rows[i + 1] for i in np.flatnonzero(m < 0)]
        checks.append(EstimateCheck("residual bound", not bad, float(m.min()), bad))
    else:
        checks.append(EstimateCheck("residual bound", True, math.inf))

    # Hoelder-1/2 bound on dyadic pairs
    worst = math.inf
    bad = []
    cum = np.concatenate([[0.0], np.cumsum(step[1:])])
    exact = states is not None and grid is not None and len(states) == N + 1
    for n1, n2 in dyadic_pairs(N):
        if exact:
            d2 = grid.norm(states[n2].v - states[n1].v) ** 2
        else:
            d2 = (cum[n2] - cum[n1]) ** 2
        bound = 2 * E0 * (tau + (n2 - n1) * tau)
        margin = bound + slack - d2
        worst = min(worst, margin)
        if margin < 0:
            bad.append(rows[n2])
    mode = "fields" if exact else "triangle-inequality bound"
    checks.append(EstimateCheck("Hoelder bound", not bad, worst, sorted(set(bad)), f"[{mode}]"))

    # mean conservation
    dev = np.abs(mean - trace.alpha)
    tol = MEAN_RTOL * (1 + abs(trace.alpha))
    bad = [rows[i] for i in np.flatnonzero(dev > tol)]
    checks.append(EstimateCheck("mean conservation", not bad, float(tol - dev.max()), bad))

    return EstimateReport(slack, checks)


# experiments -----------------------------------------------------------------


@dataclass
class StabilityReport:
    times: np.ndarray
    distances: np.ndarray
    ratios: np.ndarray
    half_distances: np.ndarray | None
    cap: float
    passed_cap: bool
    linearity_ratio: float
    passed_linearity: bool
    identical: bool = False
    diagnosis: str = ""

    @property
    def passed(self) -> bool:
        return self.passed_cap and self.passed_linearity

    def summary(self) -> str:
        if self.identical:
            return "identical initial data: trajectories bitwise equal"
        lines = [
            f"initial distance {self.distances[0]:.6e}",
            f"final distance   {self.distances[-1]:.6e}",
            f"max ratio        {self.ratios.max():.6e} (cap {self.cap:g}) {'pass' if self.passed_cap else 'FAIL'}",
            f"halved perturbation: final distance ratio {self.linearity_ratio:.4f} "
            f"(target 0.5 +- 20%) {'pass' if self.passed_linearity else 'FAIL'}",
        ]
        if self.diagnosis:
            lines.append(self.diagnosis)
        return "\n".join(lines)


def _distances(grid, states_a, states_b):
    return np.array([grid.norm(a.v - b.v) for a, b in zip(states_a, states_b)])


def stability_experiment(
    grid: Grid,
    v0_a: np.ndarray,
    v0_b: np.ndarray,
    tau: float,
    t_final: float,
    p: Potential,
    cfg: MinimizeConfig | None = None,
    cap: float = 1e3,
    linearity_rtol: float = 0.2,
) -> StabilityReport:
    """Two-trajectory stability test.

    Reports ``rho(t) = |v_a(t) - v_b(t)| / |v_a(0) - v_b(0)|`` and passes when
    ``rho <= cap`` throughout.  A third run from the midpoint
    ``v_a + (v_b - v_a)/2`` checks first-order behavior: its final distance to
    ``v_a`` must be half of the full one within `linearity_rtol`.
    """
    cfg = cfg or MinimizeConfig()
    v0_a = grid.check(v0_a, "v0_a")
    v0_b = grid.check(v0_b, "v0_b")
    ma, mb = grid.mean(v0_a), grid.mean(v0_b)
    if abs(ma - mb) > 1e-12 * (1 + abs(ma)):
        raise ValueError("both initial fields must have the same mean")

    _, sa = run(grid, v0_a, tau, t_final, p, cfg)
    times = np.array([s.t for s in sa])
    if np.array_equal(v0_a, v0_b):
        _, sb = run(grid, v0_b, tau, t_final, p, cfg)
        same = all(np.array_equal(a.v, b.v) for a, b in zip(sa, sb))
        zeros = np.zeros(len(sa))
        return StabilityReport(times, zeros, zeros, None, cap, same, 0.5, same, identical=True)

    _, sb = run(grid, v0_b, tau, t_final, p, cfg)
    dist = _distances(grid, sa, sb)
    ratios = dist / dist[0]
    passed_cap = bool(np.all(ratios <= cap))

    _, sh = run(grid, v0_a + 0.5 * (v0_b - v0_a), tau, t_final, p, cfg)
    half = _distances(grid, sa, sh)
    lin = float(half[-1] / dist[-1]) if dist[-1] > 0 else math.nan
    passed_lin = bool(abs(lin - 0.5) <= linearity_rtol * 0.5)

    diagnosis = ""
    if not passed_cap:
        tight = replace(cfg, tol_grad=cfg.tol_grad / 100)
        _, ta = run(grid, v0_a, tau, t_final, p, tight, on_failure="warn")
        _, tb = run(grid, v0_b, tau, t_final, p, tight, on_failure="warn")
        r2 = _distances(grid, ta, tb) / dist[0]
        if abs(r2.max() - ratios.max()) <= 0.1 * ratios.max():
            diagnosis = "ratio unchanged at tol_grad/100: genuine growth along this branch"
        else:
            diagnosis = f"ratio changes to {r2.max():.3e} at tol_grad/100: inner solver accuracy is limiting"

    return StabilityReport(times, dist, ratios, half, cap, passed_cap, lin, passed_lin, diagnosis=diagnosis)


@dataclass
class RefinementReport:
    taus: list[float]
    deltas: list[float]
    exponent: float
    exponent_window: tuple[float, float]
    monotone: bool
    in_window: bool

    @property
    def passed(self) -> bool:
        return self.monotone and self.in_window

    def table(self) -> str:
        lines = [f"{'tau':>12} {'delta(tau)':>14}"]
        for tau, d in zip(self.taus, self.deltas):
            lines.append(f"{tau:12.4e} {d:14.6e}")
        lines.append(
            f"fitted exponent {self.exponent:.3f} in [{self.exponent_window[0]}, {self.exponent_window[1]}]: "
            f"{'pass' if self.in_window else 'FAIL'}; decreasing: {'pass' if self.monotone else 'FAIL'}"
        )
        return "\n".join(lines)


def refinement_experiment(
    grid: Grid,
    v0: np.ndarray,
    tau_list: Sequence[float],
    t_final: float,
    p: Potential,
    cfg: MinimizeConfig | None = None,
    exponent_window: tuple[float, float] = (0.4, 1.5),
) -> RefinementReport:
    """Time-step refinement sweep.

    For consecutive entries ``tau_i > tau_{i+1}`` reports
    ``delta(tau_i) = max_t |v^{tau_i}(t) - v^{tau_{i+1}}(t)|`` over the time
    levels of the coarser run, and the least-squares slope of
    ``log delta`` against ``log tau``.
    """
    taus = [float(t) for t in tau_list]
    if len(taus) < 2 or any(b >= a for a, b in zip(taus, taus[1:])):
        raise ValueError("tau_list must hold at least two strictly decreasing values")
    runs = [run(grid, v0, tau, t_final, p, cfg)[1] for tau in taus]

    deltas = []
    for (tc, coarse), (tf, fine) in zip(zip(taus, runs), zip(taus[1:], runs[1:])):
        d = 0.0
        for s in coarse:
            if s.t > fine[-1].t:
                break
            other = evaluate_interpolant(fine, s.t, tf)
            d = max(d, grid.norm(s.v - other.v))
        deltas.append(d)

    coarse_taus = taus[:-1]
    monotone = all(b <= a for a, b in zip(deltas, deltas[1:]))
    if all(d > 0 for d in deltas) and len(deltas) >= 2:
        exponent = float(np.polyfit(np.log(coarse_taus), np.log(deltas), 1)[0])
    else:
        exponent = math.nan
    in_window = bool(exponent_window[0] <= exponent <= exponent_window[1])
    if all(d == 0 for d in deltas):
        # stationary data: nothing to refine
        in_window = True
    return RefinementReport(coarse_taus, deltas, exponent, exponent_window, monotone, in_window)
