"""Split double-well nonlinearities ``j + sigma``.

A :class:`Potential` holds a convex part ``j`` with ``j(0) = j'(0) = 0`` and a
smooth part ``sigma`` with bounded second derivative, each with derivatives
through third order.  The structural assumptions are not trusted; they are
checked on a sampling grid by :func:`validate_assumptions`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial

ScalarFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Potential:
    name: str
    j: ScalarFn
    dj: ScalarFn
    d2j: ScalarFn
    d3j: ScalarFn
    sigma: ScalarFn
    dsigma: ScalarFn
    d2sigma: ScalarFn
    d3sigma: ScalarFn
    sigma_dd_bound: float
    C0: float

    def value(self, r):
        return self.j(r) + self.sigma(r)

    def d1(self, r):
        return self.dj(r) + self.dsigma(r)

    def d2(self, r):
        return self.d2j(r) + self.d2sigma(r)

    def d3(self, r):
        return self.d3j(r) + self.d3sigma(r)

    def with_constants(self, *, sigma_dd_bound: float | None = None, C0: float | None = None) -> Potential:
        changes = {}
        if sigma_dd_bound is not None:
            changes["sigma_dd_bound"] = float(sigma_dd_bound)
        if C0 is not None:
            changes["C0"] = float(C0)
        return replace(self, **changes)


def _poly_chain(coeffs: Sequence[float]) -> list[Polynomial]:
    p = Polynomial(np.asarray(coeffs, dtype=float))
    return [p, p.deriv(1), p.deriv(2), p.deriv(3)]


def polynomial_potential(
    j_coeffs: Sequence[float],
    sigma_coeffs: Sequence[float],
    sigma_dd_bound: float,
    C0: float,
    name: str = "polynomial",
) -> Potential:
    """Potential with polynomial parts given by ascending coefficient lists."""
    jp = _poly_chain(j_coeffs)
    sp = _poly_chain(sigma_coeffs)
    return Potential(name, *jp, *sp, sigma_dd_bound=float(sigma_dd_bound), C0=float(C0))


def quartic_double_well() -> Potential:
    """``(r^2 - 1)^2 / 4`` split as ``j = r^4/4`` and ``sigma = (1 - 2 r^2)/4``."""
    return Potential(
        name="quartic",
        j=lambda r: 0.25 * r**4,
        dj=lambda r: r**3,
        d2j=lambda r: 3.0 * r**2,
        d3j=lambda r: 6.0 * r,
        sigma=lambda r: 0.25 - 0.5 * r**2,
        dsigma=lambda r: -r,
        d2sigma=lambda r: np.full_like(np.asarray(r, dtype=float), -1.0),
        d3sigma=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        sigma_dd_bound=1.0,
        C0=0.25,
    )


@dataclass
class AssumptionCheck:
    name: str
    passed: bool
    worst_r: float
    worst_value: float
    detail: str = ""


@dataclass
class ValidationReport:
    potential: str
    r_min: float
    r_max: float
    samples: int
    checks: list[AssumptionCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[AssumptionCheck]:
        return [c for c in self.checks if not c.passed]

    def summary(self) -> str:
        lines = [f"potential {self.potential!r} on [{self.r_min:g}, {self.r_max:g}], {self.samples} samples"]
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            lines.append(f"  {status}  {c.name:<34} worst at r={c.worst_r:.6g}: {c.worst_value:.6g}  {c.detail}")
        return "\n".join(lines)


def _worst(name: str, r: np.ndarray, margin: np.ndarray, detail: str = "") -> AssumptionCheck:
    # margin >= 0 means the assumption holds at that sample
    k = int(np.argmin(margin))
    return AssumptionCheck(name, bool(margin[k] >= 0), float(r[k]), float(margin[k]), detail)


def validate_assumptions(
    p: Potential, r_min: float = -10.0, r_max: float = 10.0, samples: int = 10_000, fd_rtol: float = 1e-6
) -> ValidationReport:
    """Check convexity of ``j``, boundedness of ``sigma''``, positivity and the
    coercivity bound ``r (j + sigma)'(r) >= -C0`` on ``samples`` equispaced points.

    Also checks that each supplied derivative agrees with a central difference
    of the previous one (step ``1e-5 max(1, |r|)``, relative tolerance
    `fd_rtol`).  The ``worst_value`` of a check is its smallest margin; a
    negative margin is a violation.
    """
    if not r_min < r_max:
        raise ValueError("need r_min < r_max")
    if samples < 100:
        raise ValueError("need at least 100 samples")
    r = np.linspace(r_min, r_max, samples)
    checks = []

    zero = np.zeros(1)
    j0 = float(np.abs(p.j(zero))[0])
    dj0 = float(np.abs(p.dj(zero))[0])
    checks.append(AssumptionCheck("j(0) = 0", j0 <= 1e-14, 0.0, -j0))
    checks.append(AssumptionCheck("j'(0) = 0", dj0 <= 1e-14, 0.0, -dj0))
    checks.append(_worst("j convex (j'' >= 0)", r, p.d2j(r)))
    checks.append(
        _worst("|sigma''| <= sigma_dd_bound", r, p.sigma_dd_bound - np.abs(p.d2sigma(r)), f"bound={p.sigma_dd_bound:g}")
    )
    checks.append(_worst("(j+sigma) >= 0", r, p.value(r)))
    checks.append(_worst("r (j+sigma)'(r) >= -C0", r, r * p.d1(r) + p.C0, f"C0={p.C0:g}"))

    step = 1e-5 * np.maximum(1.0, np.abs(r))
    chains = [
        ("j", [p.j, p.dj, p.d2j, p.d3j]),
        ("sigma", [p.sigma, p.dsigma, p.d2sigma, p.d3sigma]),
    ]
    for label, fns in chains:
        for order in range(1, 4):
            fd = (fns[order - 1](r + step) - fns[order - 1](r - step)) / (2.0 * step)
            exact = np.asarray(fns[order](r), dtype=float) * np.ones_like(r)
            rel = np.abs(fd - exact) / np.maximum(1.0, np.abs(exact))
            checks.append(_worst(f"{label} derivative {order} consistent", r, fd_rtol - rel, f"rtol={fd_rtol:g}"))

    return ValidationReport(p.name, float(r_min), float(r_max), int(samples), checks)
