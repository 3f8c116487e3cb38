"""Two experiments on the discrete trajectories.

Stability: a mean-zero perturbation of size 1e-4 does not grow, and halving
it halves the final distance.  Refinement: trajectories for tau and tau/2
approach each other roughly linearly in tau.
"""

from willmore_pf import Grid, quartic_double_well, refinement_experiment, stability_experiment
from willmore_pf.config import initial_field, perturbation

p = quartic_double_well()
grid = Grid(64)
v0 = initial_field("tanh:0.1", grid)

stab = stability_experiment(grid, v0, v0 + perturbation(grid, seed=0, amplitude=1e-4), 1e-3, 0.1, p)
print(stab.summary())

print()
ref = refinement_experiment(grid, initial_field("cosine:0.3,1", grid), [4e-3, 2e-3, 1e-3, 5e-4], 0.1, p)
print(ref.table())
