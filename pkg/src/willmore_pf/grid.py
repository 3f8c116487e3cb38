"""Uniform cell-centered grids on boxes with a homogeneous Neumann Laplacian.

Fields are plain numpy arrays of shape ``grid.shape`` stored in C order, so
``field.ravel()`` enumerates cells with the last axis varying fastest.  The
value ``field[i, j, k]`` lives at the cell center ``((i + 1/2) h_x, ...)``.

The Laplacian uses the 3-point stencil per axis with mirror ghost cells (the
ghost takes the value of the adjacent interior cell).  This makes the discrete
operator exactly symmetric with respect to :meth:`Grid.inner` and gives it an
exactly vanishing mean, so the flux through the boundary is zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import fft


class GridMismatchError(ValueError):
    """Raised when a field does not match the grid it is used with."""


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered grid of the box ``[0, L_1] x ... x [0, L_dim]``.

    Args:
        cells: number of cells along each axis (each at least 3)
        lengths: physical side lengths; a scalar is broadcast to all axes
    """

    cells: tuple[int, ...]
    lengths: tuple[float, ...]
    spacing: tuple[float, ...] = field(init=False)
    cell_volume: float = field(init=False)

    def __init__(self, cells: int | Sequence[int], lengths: float | Sequence[float] = 1.0):
        cells_t = (int(cells),) if np.isscalar(cells) else tuple(int(c) for c in cells)
        if not 1 <= len(cells_t) <= 3:
            raise ValueError(f"grid dimension must be 1, 2 or 3, got {len(cells_t)}")
        if np.isscalar(lengths):
            lengths_t = (float(lengths),) * len(cells_t)
        else:
            lengths_t = tuple(float(x) for x in lengths)
        if len(lengths_t) != len(cells_t):
            raise ValueError("need one length per axis")
        for n in cells_t:
            if n < 3:
                raise ValueError(f"need at least 3 cells per axis, got {n}")
        for length in lengths_t:
            if not (math.isfinite(length) and length > 0):
                raise ValueError(f"side lengths must be positive, got {length}")
        spacing = tuple(length / n for length, n in zip(lengths_t, cells_t))
        object.__setattr__(self, "cells", cells_t)
        object.__setattr__(self, "lengths", lengths_t)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "cell_volume", math.prod(spacing))

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def size(self) -> int:
        return math.prod(self.cells)

    @property
    def volume(self) -> float:
        """Measure of the domain, ``|Omega|``."""
        return self.cell_volume * self.size

    def axis_coordinates(self, axis: int) -> np.ndarray:
        h = self.spacing[axis]
        return (np.arange(self.cells[axis]) + 0.5) * h

    def coordinates(self) -> list[np.ndarray]:
        """Cell-center coordinates, one array of shape ``self.shape`` per axis."""
        axes = [self.axis_coordinates(a) for a in range(self.dim)]
        return list(np.meshgrid(*axes, indexing="ij"))

    def check(self, f: np.ndarray, name: str = "field") -> np.ndarray:
        """Return `f` as a float array after checking its shape and finiteness."""
        f = np.asarray(f, dtype=float)
        if f.shape != self.shape:
            raise GridMismatchError(f"{name} has shape {f.shape}, grid has shape {self.shape}")
        if not np.all(np.isfinite(f)):
            raise FloatingPointError(f"{name} contains non-finite values")
        return f

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def constant(self, value: float) -> np.ndarray:
        return np.full(self.shape, float(value))

    # reductions -------------------------------------------------------------
    # np.sum over a contiguous array of fixed shape uses a fixed (pairwise)
    # summation order, so all reductions are reproducible bit-for-bit.

    def mean(self, f: np.ndarray) -> float:
        """Spatial mean value; on a uniform grid the arithmetic mean."""
        f = self.check(f)
        return float(np.sum(f) / self.size)

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        """Discrete L2 pairing ``cell_volume * sum(f * g)``."""
        f = self.check(f)
        g = self.check(g, "second field")
        return float(self.cell_volume * np.sum(f * g))

    def norm(self, f: np.ndarray) -> float:
        return math.sqrt(self.inner(f, f))

    def project_mean_zero(self, f: np.ndarray) -> np.ndarray:
        f = self.check(f)
        return f - np.sum(f) / self.size

    # differential operators -------------------------------------------------

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        """Neumann Laplacian via mirror ghost cells."""
        f = self.check(f)
        out = np.zeros_like(f)
        for axis, h in enumerate(self.spacing):
            pad = [(0, 0)] * self.dim
            pad[axis] = (1, 1)
            g = np.pad(f, pad, mode="edge")
            lo = [slice(None)] * self.dim
            hi = [slice(None)] * self.dim
            lo[axis] = slice(0, -2)
            hi[axis] = slice(2, None)
            out += (g[tuple(lo)] - 2.0 * f + g[tuple(hi)]) / (h * h)
        return out

    def laplacian_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of :meth:`laplacian` in the DCT-II basis.

        The eigenvector with multi-index ``k`` is the product over axes of
        ``cos(pi k_a (i_a + 1/2) / n_a)`` and its eigenvalue is the sum of
        ``-(2 / h_a^2) (1 - cos(pi k_a / n_a))``.
        """
        out = np.zeros(self.shape)
        for axis, (n, h) in enumerate(zip(self.cells, self.spacing)):
            lam = -(2.0 / (h * h)) * (1.0 - np.cos(np.pi * np.arange(n) / n))
            shape = [1] * self.dim
            shape[axis] = n
            out = out + lam.reshape(shape)
        return out

    def dct(self, f: np.ndarray) -> np.ndarray:
        """Orthonormal DCT-II; diagonalizes :meth:`laplacian`."""
        return fft.dctn(f, type=2, norm="ortho")

    def idct(self, coeffs: np.ndarray) -> np.ndarray:
        return fft.idctn(coeffs, type=2, norm="ortho")


def laplacian_neumann(grid: Grid, f: np.ndarray) -> np.ndarray:
    return grid.laplacian(f)


def mean(grid: Grid, f: np.ndarray) -> float:
    return grid.mean(f)


def inner(grid: Grid, f: np.ndarray, g: np.ndarray) -> float:
    return grid.inner(f, g)


def project_mean_zero(grid: Grid, f: np.ndarray) -> np.ndarray:
    return grid.project_mean_zero(f)
