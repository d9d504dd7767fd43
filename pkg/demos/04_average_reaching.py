"""
Finite-time reaching of the average loop
========================================

The average gradient estimate obeys dG/dt = H K G/|G|.  With a verified
certificate it reaches the origin no later than V0 / lambda_min(Q).
"""

import numpy as np

from uvesc.polytope import build_scaled_polytope, sample_uniform
from uvesc.simulator import simulate_average
from uvesc.synthesis import SynthesisProblem, reaching_time_bound, solve

H0 = np.array([[100.0, 30.0], [30.0, 20.0]])
poly = build_scaled_polytope(H0, 0.1)
res = solve(SynthesisProblem(poly, 32.9034, 0.4))

# the closed form first: H = I, K = -I moves G straight in at unit speed
_, reach = simulate_average(-np.eye(2), np.eye(2), [1.0, 0.0])
print("radial reach time:", reach)

theta0, thetastar = np.array([2.5, 6.0]), np.array([2.0, 4.0])
for seed in range(5):
    _, H = sample_uniform(poly, seed)
    g0 = H @ (theta0 - thetastar)
    V0, bound = reaching_time_bound(res.P, res.Qmat, g0)
    tr, reach = simulate_average(res.K, H, g0, t_end=2 * bound)
    print(f"seed {seed}: reach {reach:.3f} s, bound {bound:.3f} s, V0 {V0:.2f}")
