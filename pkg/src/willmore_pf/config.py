"""Plain ``key = value`` run configuration.

Grammar: one ``key = value`` per line, ``#`` starts a comment, blank lines are
ignored, keys are case-sensitive.  Unknown keys and malformed values are
collected and reported together with their line numbers.

=====================  ===========  ==============================================
key                    default      meaning
=====================  ===========  ==============================================
dim                    1            space dimension, 1 to 3
nx, ny, nz             64, nx, nx   cells per axis (at least 3)
length                 1.0          side length of every axis
lx, ly, lz             length       per-axis side lengths
tau                    required     time step, ``0 < tau < 1``
t_final                required     final time, ``> 0``
potential              quartic      ``quartic`` or ``polynomial``
j_coeffs               --           ascending coefficients of ``j`` (polynomial)
sigma_coeffs           --           ascending coefficients of ``sigma``
sigma_dd_bound         --           claimed ``sup |sigma''|`` (polynomial)
c0                     --           claimed ``C0`` (polynomial)
initial                cosine:0.3,1 initial condition, see :func:`initial_field`
tol_grad               1e-8         inner stopping tolerance
max_iters              5000         inner iteration cap
precondition           true         DCT preconditioning of the inner solver
on_failure             abort        ``abort`` or ``warn`` on inner non-convergence
output_dir             output       directory for trace, snapshots and report
snapshot_every         10           write a snapshot every N steps (0: none)
write_fields           true         write snapshot files at all
mode                   flow         ``flow``, ``stability`` or ``refinement``
perturbation_seed      0            seed of the stability perturbation
perturbation_amplitude 1e-4         L2 norm of the stability perturbation
stability_cap          1000         cap on the distance ratio
tau_list               4e-3,...     refinement time steps, strictly decreasing
=====================  ===========  ==============================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import Grid
from .minimizer import MinimizeConfig
from .potential import Potential, polynomial_potential, quartic_double_well


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("invalid configuration:\n" + "\n".join(f"  {e}" for e in errors))
        self.errors = errors


@dataclass
class RunConfig:
    tau: float
    t_final: float
    dim: int = 1
    cells: tuple[int, ...] = (64,)
    lengths: tuple[float, ...] = (1.0,)
    potential: str = "quartic"
    j_coeffs: tuple[float, ...] | None = None
    sigma_coeffs: tuple[float, ...] | None = None
    sigma_dd_bound: float | None = None
    c0: float | None = None
    initial: str = "cosine:0.3,1"
    tol_grad: float = 1e-8
    max_iters: int = 5000
    precondition: bool = True
    on_failure: str = "abort"
    output_dir: str = "output"
    snapshot_every: int = 10
    write_fields: bool = True
    mode: str = "flow"
    perturbation_seed: int = 0
    perturbation_amplitude: float = 1e-4
    stability_cap: float = 1e3
    tau_list: tuple[float, ...] = (4e-3, 2e-3, 1e-3, 5e-4)
    base_dir: Path = field(default_factory=Path.cwd)

    def grid(self) -> Grid:
        return Grid(self.cells, self.lengths)

    def build_potential(self) -> Potential:
        if self.potential == "quartic":
            return quartic_double_well()
        return polynomial_potential(self.j_coeffs, self.sigma_coeffs, self.sigma_dd_bound, self.c0)

    def minimize_config(self) -> MinimizeConfig:
        return MinimizeConfig(tol_grad=self.tol_grad, max_iters=self.max_iters, precondition=self.precondition)

    def initial_field(self, grid: Grid | None = None) -> np.ndarray:
        return initial_field(self.initial, grid or self.grid(), self.base_dir)


def _float(s):
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _int(s):
    f = float(s)
    if f != int(f):
        raise ValueError("must be an integer")
    return int(f)


def _bool(s):
    t = s.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("must be true or false")


def _floats(s):
    return tuple(_float(x) for x in s.split(",") if x.strip())


def _choice(*options):
    def conv(s):
        if s not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return s

    return conv


_KEYS = {
    "dim": _int,
    "nx": _int,
    "ny": _int,
    "nz": _int,
    "length": _float,
    "lx": _float,
    "ly": _float,
    "lz": _float,
    "tau": _float,
    "t_final": _float,
    "potential": _choice("quartic", "polynomial"),
    "j_coeffs": _floats,
    "sigma_coeffs": _floats,
    "sigma_dd_bound": _float,
    "c0": _float,
    "initial": str,
    "tol_grad": _float,
    "max_iters": _int,
    "precondition": _bool,
    "on_failure": _choice("abort", "warn"),
    "output_dir": str,
    "snapshot_every": _int,
    "write_fields": _bool,
    "mode": _choice("flow", "stability", "refinement"),
    "perturbation_seed": _int,
    "perturbation_amplitude": _float,
    "stability_cap": _float,
    "tau_list": _floats,
}


def parse_config(text: str, base_dir: str | Path | None = None) -> RunConfig:
    """Parse and validate a configuration; raise :class:`ConfigError` listing every problem."""
    errors: list[str] = []
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in values:
            errors.append(f"line {lineno}: duplicate key {key!r} (first set on line {lines[key]})")
            continue
        try:
            values[key] = _KEYS[key](value)
        except ValueError as exc:
            errors.append(f"line {lineno}: {key}: {exc} (got {value!r})")
            continue
        lines[key] = lineno

    def where(key):
        return f"line {lines[key]}: " if key in lines else ""

    dim = values.get("dim", 1)
    if dim not in (1, 2, 3):
        errors.append(f"{where('dim')}dim must be 1, 2 or 3 (got {dim})")
        dim = 1
    nx = values.get("nx", 64)
    cells = tuple([nx, values.get("ny", nx), values.get("nz", nx)][:dim])
    for axis, key in zip(range(dim), ("nx", "ny", "nz")):
        if cells[axis] < 3:
            errors.append(f"{where(key)}{key} must be at least 3 (got {cells[axis]})")
    length = values.get("length", 1.0)
    lengths = tuple([values.get("lx", length), values.get("ly", length), values.get("lz", length)][:dim])
    for axis, key in zip(range(dim), ("lx", "ly", "lz")):
        if not lengths[axis] > 0:
            errors.append(f"{where(key) or where('length')}side lengths must be positive (got {lengths[axis]})")
    for axis_key, axis in (("ny", 1), ("nz", 2), ("ly", 1), ("lz", 2)):
        if axis_key in values and axis >= dim:
            errors.append(f"{where(axis_key)}{axis_key} given but dim = {dim}")

    for key in ("tau", "t_final"):
        # a malformed value was already reported
        if key not in values and not any(f": {key}:" in e for e in errors):
            errors.append(f"missing required key {key!r}")
    tau = values.get("tau")
    if tau is not None and not 0 < tau < 1:
        errors.append(f"{where('tau')}tau must be positive and < 1 (got {tau})")
    t_final = values.get("t_final")
    if t_final is not None and not t_final > 0:
        errors.append(f"{where('t_final')}t_final must be positive (got {t_final})")

    if values.get("potential", "quartic") == "polynomial":
        for key in ("j_coeffs", "sigma_coeffs", "sigma_dd_bound", "c0"):
            if key not in values:
                errors.append(f"missing key {key!r} required by potential = polynomial")
    else:
        for key in ("j_coeffs", "sigma_coeffs", "sigma_dd_bound", "c0"):
            if key in values:
                errors.append(f"{where(key)}{key} only applies to potential = polynomial")
    if "sigma_dd_bound" in values and not values["sigma_dd_bound"] > 0:
        errors.append(f"{where('sigma_dd_bound')}sigma_dd_bound must be positive")

    if "tol_grad" in values and not values["tol_grad"] > 0:
        errors.append(f"{where('tol_grad')}tol_grad must be positive")
    if "max_iters" in values and values["max_iters"] < 1:
        errors.append(f"{where('max_iters')}max_iters must be at least 1")
    if "snapshot_every" in values and values["snapshot_every"] < 0:
        errors.append(f"{where('snapshot_every')}snapshot_every must be >= 0")
    if "perturbation_amplitude" in values and not values["perturbation_amplitude"] > 0:
        errors.append(f"{where('perturbation_amplitude')}perturbation_amplitude must be positive")
    if "stability_cap" in values and not values["stability_cap"] > 0:
        errors.append(f"{where('stability_cap')}stability_cap must be positive")
    if "tau_list" in values:
        tl = values["tau_list"]
        if len(tl) < 2 or any(b >= a for a, b in zip(tl, tl[1:])) or any(not 0 < t < 1 for t in tl):
            errors.append(f"{where('tau_list')}tau_list must hold at least two strictly decreasing values in (0, 1)")
    if "initial" in values:
        try:
            _parse_initial(values["initial"])
        except ValueError as exc:
            errors.append(f"{where('initial')}initial: {exc}")

    if errors:
        raise ConfigError(errors)
    kwargs = {k: v for k, v in values.items() if k not in ("dim", "nx", "ny", "nz", "length", "lx", "ly", "lz")}
    return RunConfig(
        dim=dim,
        cells=cells,
        lengths=lengths,
        base_dir=Path(base_dir) if base_dir is not None else Path.cwd(),
        **kwargs,
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), base_dir=path.parent)


# initial conditions ----------------------------------------------------------


def _parse_initial(spec: str) -> tuple[str, list[str]]:
    kind, _, rest = spec.partition(":")
    kind = kind.strip()
    args = [a.strip() for a in rest.split(",")] if rest.strip() else []
    nargs = {"constant": (1, 1), "cosine": (2, 3), "tanh": (1, 2), "random": (3, 3), "file": (1, 1)}
    if kind not in nargs:
        raise ValueError(f"unknown kind {kind!r}; use constant, cosine, tanh, random or file")
    lo, hi = nargs[kind]
    if not lo <= len(args) <= hi:
        raise ValueError(f"{kind} takes {lo}..{hi} arguments, got {len(args)}")
    if kind != "file":
        for a in args:
            float(a)
    if kind == "tanh" and not float(args[0]) > 0:
        raise ValueError("tanh width must be positive")
    return kind, args


def initial_field(spec: str, grid: Grid, base_dir: str | Path = ".") -> np.ndarray:
    """Build an initial field from a specification string.

    * ``constant:c``: the constant ``c``;
    * ``cosine:A,k[,offset]``: ``offset + A prod_a cos(k pi x_a / L_a)``;
    * ``tanh:width[,center]``: ``tanh((x_1 - center L_1) / width)``, center
      given as a fraction of the first side (default 0.5);
    * ``random:seed,amplitude,mean``: ``mean + amplitude (u - mean(u))`` with
      ``u`` uniform on ``[-1, 1)`` from numpy's PCG64 generator
      (``numpy.random.default_rng(seed)``), one draw per cell in row-major
      order;
    * ``file:path``: the ``v`` column of a snapshot CSV (path relative to the
      configuration file).
    """
    kind, args = _parse_initial(spec)
    if kind == "constant":
        return grid.constant(float(args[0]))
    if kind == "cosine":
        amp, mode = float(args[0]), float(args[1])
        offset = float(args[2]) if len(args) > 2 else 0.0
        out = np.ones(grid.shape)
        for x, length in zip(grid.coordinates(), grid.lengths):
            out = out * np.cos(mode * np.pi * x / length)
        return offset + amp * out
    if kind == "tanh":
        width = float(args[0])
        center = float(args[1]) if len(args) > 1 else 0.5
        x = grid.coordinates()[0]
        return np.tanh((x - center * grid.lengths[0]) / width)
    if kind == "random":
        seed, amp, mean = int(float(args[0])), float(args[1]), float(args[2])
        u = np.random.default_rng(seed).uniform(-1.0, 1.0, grid.size).reshape(grid.shape)
        return mean + amp * grid.project_mean_zero(u)
    from .io import read_snapshot

    path = Path(args[0])
    if not path.is_absolute():
        path = Path(base_dir) / path
    snap_grid, v, _ = read_snapshot(path)
    if snap_grid.shape != grid.shape:
        raise ValueError(f"snapshot {path} has shape {snap_grid.shape}, config asks for {grid.shape}")
    return v


def perturbation(grid: Grid, seed: int, amplitude: float) -> np.ndarray:
    """Mean-zero Gaussian noise (PCG64, seeded) scaled to L2 norm `amplitude`."""
    noise = grid.project_mean_zero(np.random.default_rng(seed).standard_normal(grid.size).reshape(grid.shape))
    return noise * (amplitude / grid.norm(noise))
