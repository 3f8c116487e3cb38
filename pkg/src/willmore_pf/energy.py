"""Chemical potential, Willmore-type energy and the minimizing-movement functional.

For a field ``w`` on a :class:`~willmore_pf.grid.Grid` and a potential ``p``::

    mu   = -lap(w) + p.d1(w)
    E(w) = 1/2 <mu, mu>
    F(w) = 1/2 |w - f|^2 + tau E(w)

The gradient is the Riesz representative of the first variation of the
*discrete* functional with respect to :meth:`Grid.inner`, restricted to
mean-zero directions.  Because the Neumann stencil is symmetric it coincides
with the discretized PDE operator ``-lap(mu) + p.d2(w) mu`` minus its mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid
from .potential import Potential


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    return tau


def chemical_potential(grid: Grid, w: np.ndarray, p: Potential) -> np.ndarray:
    w = grid.check(w)
    return -grid.laplacian(w) + p.d1(w)


def willmore_energy(grid: Grid, w: np.ndarray, p: Potential) -> float:
    mu = chemical_potential(grid, w, p)
    return 0.5 * grid.inner(mu, mu)


def mm_functional(grid: Grid, w: np.ndarray, f: np.ndarray, tau: float, p: Potential) -> float:
    """``F_{tau,f}(w) = 1/2 |w - f|^2 + tau E(w)``."""
    tau = _check_tau(tau)
    w = grid.check(w)
    f = grid.check(f, "f")
    d = w - f
    return 0.5 * grid.inner(d, d) + tau * willmore_energy(grid, w, p)


def mm_decrement(
    grid: Grid, w: np.ndarray, step: np.ndarray, f: np.ndarray, tau: float, p: Potential, mu: np.ndarray | None = None
) -> float:
    """``F(w + step) - F(w)`` evaluated without subtracting two large numbers.

    Both terms are rewritten as pairings with the increment, so the result
    keeps its relative accuracy even when the decrement is far below the
    rounding level of ``F`` itself.
    """
    w_new = w + step
    if mu is None:
        mu = chemical_potential(grid, w, p)
    fidelity = grid.inner(step, 0.5 * (w_new + w) - f)
    dmu = -grid.laplacian(step) + (p.d1(w_new) - p.d1(w))
    return fidelity + tau * grid.inner(dmu, mu + 0.5 * dmu)


def flow_operator(grid: Grid, w: np.ndarray, p: Potential, mu: np.ndarray | None = None) -> np.ndarray:
    """``-lap(mu) + p.d2(w) mu`` before the mean is removed."""
    if mu is None:
        mu = chemical_potential(grid, w, p)
    return -grid.laplacian(mu) + p.d2(w) * mu


def gradient_mm(grid: Grid, w: np.ndarray, f: np.ndarray, tau: float, p: Potential) -> np.ndarray:
    """Constrained gradient of ``F_{tau,f}`` at `w`.

    Returns ``project_mean_zero((w - f) + tau (-lap(mu) + p.d2(w) mu))``,
    which satisfies ``<grad, d> = dF(w)[d]`` for every mean-zero ``d``.
    `w` and `f` must share their mean.
    """
    tau = _check_tau(tau)
    w = grid.check(w)
    f = grid.check(f, "f")
    mw, mf = grid.mean(w), grid.mean(f)
    if abs(mw - mf) > 1e-10 * (1.0 + abs(mf)):
        raise ValueError(f"w and f must have the same mean ({mw!r} != {mf!r})")
    return grid.project_mean_zero((w - f) + tau * flow_operator(grid, w, p))


def el_residual(grid: Grid, w: np.ndarray, p: Potential) -> tuple[np.ndarray, float]:
    """Euler-Lagrange residual ``-lap(mu) + p.d2(w) mu - M`` and its L2 norm.

    At a minimizer of ``F_{tau,f}`` this field equals ``-(w - f)/tau``.
    """
    w = grid.check(w)
    r = grid.project_mean_zero(flow_operator(grid, w, p))
    return r, grid.norm(r)


@dataclass
class EnergyAssembly:
    mu: np.ndarray
    energy: float
    M: float
    residual: np.ndarray
    residual_norm: float


def assemble(grid: Grid, w: np.ndarray, p: Potential) -> EnergyAssembly:
    """All derived quantities of a state in one pass."""
    w = grid.check(w)
    mu = chemical_potential(grid, w, p)
    coupling = p.d2(w) * mu
    M = grid.mean(coupling)
    # subtracting the full mean equals subtracting M since mean(lap(mu)) = 0
    r = grid.project_mean_zero(-grid.laplacian(mu) + coupling)
    return EnergyAssembly(mu, 0.5 * grid.inner(mu, mu), M, r, grid.norm(r))
