"""
Repeated eigenvalues among the targets
======================================

When two wanted eigenvalues coincide the plain update divides by tiny
differences of Rayleigh quotients and blows up.  A Rayleigh-Ritz step on
the current block removes those denominators altogether.
"""

import numpy as np

from eigrefine import RefineConfig, gen_spectrum, run
from eigrefine.oracle import perturb_basis, principal_angle_sin

lam = np.concatenate([[1.0, 1.0, 0.9, 0.8, 0.7], np.linspace(0.5, 0.01, 195)])
A, Q = gen_spectrum(lam, seed=3)
X0, err0 = perturb_basis(Q[:, :5], 1e-4, seed=0)
print(f"initial subspace error {err0:.1e}")

plain = run(A, X0, RefineConfig(k=5))
print("plain:", plain.status.value, "-", plain.message)

fixed = run(A, X0, RefineConfig(k=5, preprocess="always", beta="zero"))
print(f"Rayleigh-Ritz every step: {fixed.status.value} in {fixed.iterations} iterations, "
      f"subspace error {principal_angle_sin(fixed.X, Q[:, :5]):.1e}")

# "auto" starts plain and restarts with the preprocessing once it sees trouble
auto = run(A, X0, RefineConfig(k=5, preprocess="auto", beta="zero"))
print(f"auto: {auto.status.value}, restarts={auto.restarts}, iterations={auto.iterations}")
