"""
How far from the answer can we start?
=====================================

The convergence analysis gives closed-form constants, a one-step
contraction bound and a table of the separation ratio below which
convergence is guaranteed.
"""

import numpy as np

from eigrefine.theory import analyze, chi, eps_max, eta, omega, alpha_table

for e in (0.0, 0.001, 0.01, 0.1):
    print(f"eps={e:<6} chi={chi(e):.4f} eta={eta(e):.4f} omega={omega(e):.4f}")
print(f"eta is finite for eps < {eps_max():.6f}")

print("\nguaranteed separation ratio, rows rho1 = 10..1e4, columns rho2 = 10..1e4")
for row in alpha_table():
    print("  ".join(f"{a:8.4f}" for a in row))

lam = np.concatenate([[1.0, 0.7], np.linspace(0.5, 0.01, 50)])
rep = analyze(lam, k=2, eps=1e-6)
print(f"\ngamma = {rep.gamma:.3f}; sufficient condition holds: {rep.sufficient['holds']}")
for row in rep.bound_curve[:4]:
    print(row)
