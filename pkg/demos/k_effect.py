"""
Refining extra vectors speeds up the slowest target
===================================================

With evenly spaced eigenvalues the ratio between the last wanted
eigenvalue and the first unwanted one is close to 1, so convergence is
slow.  Carrying more columns (K > k) moves the unwanted eigenvalue further
down and the ratio improves.
"""

import numpy as np

from eigrefine import RefineConfig, gen_randsvd_like, run
from eigrefine.oracle import principal_angle_sin, round_binary32

A, model, Q = gen_randsvd_like(100, 1e5, mode=4, seed=0)
lam = model.lambdas
k = 5

for K in (5, 10, 20):
    errs = []
    cfg = RefineConfig(k=k, K=K, corr_tol=1e-300, max_iter=80)
    run(A, round_binary32(Q[:, :K]), cfg, callback=lambda rep, X: errs.append(principal_angle_sin(X[:, k - 1], Q[:, k - 1])))
    e = np.array(errs)
    last = np.nonzero(e > 1e-12)[0][-1]
    ratio = (e[last] / e[5]) ** (1.0 / (last - 5))
    print(f"K={K:2d}: predicted ratio {lam[K] / lam[k - 1]:.3f}, measured {ratio:.3f}")
