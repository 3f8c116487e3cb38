"""The discrete Neumann Laplacian and its spectral basis.

Cell-centered cosines cos(k pi x) are exact eigenvectors of the mirror-ghost
stencil, with eigenvalues -(2/h^2)(1 - cos(pi k / n)).  The same basis
(orthonormal DCT-II) is what the inner solver uses as a preconditioner.
"""

import numpy as np

from willmore_pf import Grid

grid = Grid(16)
(x,) = grid.coordinates()
h = grid.spacing[0]

print(" k   predicted eigenvalue   max |lap(w) - lam w|")
for k in (0, 1, 2, 5, 15):
    w = np.cos(k * np.pi * x)
    lam = -(2 / h**2) * (1 - np.cos(np.pi * k / grid.cells[0]))
    print(f"{k:2d}   {lam:20.10f}   {np.abs(grid.laplacian(w) - lam * w).max():.2e}")

# the operator conserves the mean and is symmetric
rng = np.random.default_rng(0)
f, g = rng.standard_normal((2, 16))
print(f"\nmean(lap f)                  = {grid.mean(grid.laplacian(f)):+.2e}")
print(f"<lap f, g> - <f, lap g>      = {grid.inner(grid.laplacian(f), g) - grid.inner(f, grid.laplacian(g)):+.2e}")
print(f"<lap f, f> (must be <= 0)    = {grid.inner(grid.laplacian(f), f):+.4f}")

# spectral application agrees with the stencil
spectral = grid.idct(grid.laplacian_eigenvalues() * grid.dct(f))
print(f"stencil vs DCT application   = {np.abs(spectral - grid.laplacian(f)).max():.2e}")
