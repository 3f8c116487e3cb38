"""Independent reference implementations used by the tests.

Nothing here calls the package's operators: the Laplacian is assembled as a
dense matrix cell by cell, reductions are plain Python loops, and the implicit
step is solved by a damped Newton iteration on the Lagrange system.
"""

import itertools
import math

import numpy as np


def dense_laplacian(cells, lengths):
    """Dense Neumann Laplacian on a cell-centered grid, mirror ghosts."""
    cells = tuple(cells)
    size = math.prod(cells)
    spacing = [L / n for L, n in zip(lengths, cells)]
    index = {idx: k for k, idx in enumerate(itertools.product(*[range(n) for n in cells]))}
    D = np.zeros((size, size))
    for idx, row in index.items():
        for axis, (n, h) in enumerate(zip(cells, spacing)):
            for step in (-1, 1):
                nb = list(idx)
                nb[axis] += step
                if 0 <= nb[axis] < n:
                    D[row, index[tuple(nb)]] += 1 / h**2
                else:
                    # ghost mirrors the cell itself
                    D[row, row] += 1 / h**2
                D[row, row] -= 1 / h**2
    return D


def loop_inner(f, g, cell_volume):
    total = 0.0
    for a, b in zip(np.ravel(f), np.ravel(g)):
        total += a * b
    return cell_volume * total


def loop_energy(w, D, dphi, cell_volume):
    mu = -D @ np.ravel(w) + dphi(np.ravel(w))
    total = 0.0
    for m in mu:
        total += m * m
    return 0.5 * cell_volume * total


def dense_mm_functional(w, f, tau, D, dphi, cell_volume):
    d = np.ravel(w) - np.ravel(f)
    return 0.5 * loop_inner(d, d, cell_volume) + tau * loop_energy(w, D, dphi, cell_volume)


def dense_residual(w, D, dphi, d2phi):
    """``-D mu + phi''(w) mu - mean(phi''(w) mu)`` with dense algebra."""
    w = np.ravel(w)
    mu = -D @ w + dphi(w)
    c = d2phi(w) * mu
    return -D @ mu + c - c.mean()


def newton_step(f, tau, D, dphi, d2phi, d3phi, tol=1e-14, max_iter=100):
    """Solve the constrained Euler-Lagrange system of one implicit step.

    Unknowns ``(w, lam)``::

        (w - f) + tau (-D mu + phi''(w) mu) - lam = 0,   mean(w) = mean(f),
        mu = -D w + phi'(w)

    by Newton's method with step halving on the residual norm, started at
    ``w = f``.
    """
    shape = np.shape(f)
    f = np.ravel(f).astype(float)
    n = f.size
    I = np.eye(n)

    def residual(x):
        w, lam = x[:n], x[n]
        mu = -D @ w + dphi(w)
        r = (w - f) + tau * (-D @ mu + d2phi(w) * mu) - lam
        return np.concatenate([r, [w.mean() - f.mean()]])

    def jacobian(x):
        w = x[:n]
        mu = -D @ w + dphi(w)
        B = -D + np.diag(d2phi(w))
        J = np.zeros((n + 1, n + 1))
        J[:n, :n] = I + tau * (B @ B + np.diag(d3phi(w) * mu))
        J[:n, n] = -1.0
        J[n, :n] = 1.0 / n
        return J

    x = np.concatenate([f, [0.0]])
    r = residual(x)
    x[n] = np.mean(r[:n])
    r = residual(x)
    for _ in range(max_iter):
        nr = np.linalg.norm(r)
        if nr <= tol:
            break
        dx = np.linalg.solve(jacobian(x), -r)
        t = 1.0
        while t > 1e-8:
            x_new = x + t * dx
            r_new = residual(x_new)
            if np.linalg.norm(r_new) < nr:
                break
            t *= 0.5
        else:
            break
        x, r = x_new, r_new
    return x[:n].reshape(shape)
