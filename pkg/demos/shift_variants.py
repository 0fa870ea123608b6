"""
Smallest and smallest-magnitude eigenvalues
===========================================

The iteration converges to the dominant part of the spectrum.  A shift
``A - alpha I`` makes the smallest eigenvalues dominant, and
``A^2 - alpha I`` does the same for those closest to zero.
"""

import numpy as np

from eigrefine import RefineConfig, gen_spectrum, run
from eigrefine.linalg import make_rng
from eigrefine.oracle import round_binary32
from eigrefine.variants import TargetSpec, eigenvalues_of, make_operator, resolve_shift

# smallest eigenvalues of a positive definite matrix
lam = np.concatenate([[0.02, 0.05], np.linspace(0.2, 1.0, 48)])
A, Q = gen_spectrum(lam, seed=11)
X0 = round_binary32(Q[:, :2])
spec = resolve_shift(A, TargetSpec("smallest"), X0, k=2)
print(f"shift {spec.shift:.4f} from lambda_next estimate {spec.lambda_next:.4f}")
out = run(make_operator(A, spec), X0, RefineConfig(k=2, corr_tol=1e-30, resid_tol=1e-14, max_iter=5000))
print(out.status.value, out.iterations, "iterations, eigenvalues", eigenvalues_of(A, out.X))

# an indefinite matrix whose eigenvalue nearest zero is 0.05
rng = make_rng(0)
lam = np.concatenate([[0.05], rng.uniform(0.3, 1.0, 49) * rng.choice([-1.0, 1.0], 49)])
B, P = gen_spectrum(lam, seed=12)
Y0 = round_binary32(P[:, :1])
spec = resolve_shift(B, TargetSpec("smallest-magnitude"), Y0, k=1)
out = run(make_operator(B, spec), Y0, RefineConfig(k=1, corr_tol=1e-30, resid_tol=1e-14, max_iter=5000))
print(out.status.value, out.iterations, "iterations, eigenvalue", eigenvalues_of(B, out.X))
# the ratio here is close to 1, which is why this takes far more iterations
