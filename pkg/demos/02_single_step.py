"""One implicit step of the scheme.

minimize_step returns the minimizer of 1/2 |w - f|^2 + tau E(w) among fields
with the mean of f.  The printout shows how fast the preconditioned
Barzilai-Borwein iteration converges and which one-step estimates hold.
"""

import numpy as np

from willmore_pf import Grid, MinimizeConfig, el_residual, minimize_step, quartic_double_well, willmore_energy

p = quartic_double_well()
grid = Grid(64)
(x,) = grid.coordinates()
f = np.tanh((x - 0.5) / 0.1)
tau = 1e-3

for precondition in (True, False):
    cfg = MinimizeConfig(tol_grad=1e-8, precondition=precondition)
    w, rep = minimize_step(grid, f, tau, p, cfg)
    print(f"precondition={precondition!s:5}: {rep.iters:5d} iterations, {rep.reason}, |grad|/tau = {rep.final_grad_norm:.2e}")

w, rep = minimize_step(grid, f, tau, p)
step = grid.norm(w - f)
E_f, E_w = willmore_energy(grid, f, p), willmore_energy(grid, w, p)
_, res = el_residual(grid, w, p)
print(f"\nmean before / after           {grid.mean(f):+.3e} / {grid.mean(w):+.3e}")
print(f"E(f), E(w)                    {E_f:.6f}, {E_w:.6f}")
print(f"|w-f|^2/(2 tau) + E(w) <= E(f): {step**2 / (2 * tau) + E_w:.6f} <= {E_f:.6f}")
print(f"|residual| <= |w-f|/tau + tol : {res:.6f} <= {step / tau + 1e-8:.6f}")
