"""
Acoustic branches of a cubic crystal
====================================

Average a noisy elastic tensor over the octahedral group, trace the
dispersion along a path through the Brillouin zone and run a plane wave
through the leapfrog solver.
"""

import numpy as np

from crystorus import crystal as cr
from crystorus import phonon as ph

rng = np.random.default_rng(0)

###############################################################################
# Three numbers survive the group average
# ---------------------------------------

sg = cr.symmorphic_space_group(cr.Lattice.cubic(3), cr.OH_GENERATORS)
R = cr.cartesian_representation(sg)
print("invariant objective tensors:", ph.averaging_rank(R))

m = ph.CubicModuli(c11=1.0, c12=0.5, c44=0.3, rho=1.0)
rho, C = ph.assemble_cubic(m)
noise = np.einsum("n,nabij->abij", 0.05 * rng.standard_normal(21), ph.objective_basis(3))
noisy = ph.ElasticTensor(C.coeffs + noise, objective=True)
clean = ph.project_invariant(noisy, R)
print("C11, C12, C44 after averaging:", clean.coeffs[0, 0, 0, 0], clean.coeffs[0, 1, 0, 1], clean.coeffs[0, 0, 1, 1])

###############################################################################
# Dispersion along [100] and [111]
# --------------------------------

for label, n in (("[100]", [1, 0, 0]), ("[111]", np.ones(3) / np.sqrt(3))):
    w2 = ph.dispersion(rho, C, n).eigenvalues
    print(label, "omega^2 / k^2 =", np.round(w2, 6))

table = ph.kpath_sweep(rho, C, [[0, 0, 0], [1, 0, 0], [1, 1, 0], [1, 1, 1], [0, 0, 0]], 10)
print(table.to_csv().splitlines()[:3])

###############################################################################
# A longitudinal wave along [100]
# -------------------------------
#
# The measured frequency approaches 2 pi sqrt(C11 / rho) as the grid is
# refined, and the discrete energy stays put.

for n in (64, 128, 256):
    state = ph.plane_wave_state(rho, C, [1, 0, 0], n, branch=2)
    traj = ph.simulate_wave(rho, C, state, ph.stable_dt(rho, C, state), 4000)
    print(n, traj.observed_omegas[2], traj.predicted_omegas[2], f"drift {traj.relative_drift:.1e}")
