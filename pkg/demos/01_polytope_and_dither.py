"""
Hessian polytope and dither signals
===================================

The unknown Hessian is only known to lie between two scaled copies of a
nominal matrix.  The dither perturbs each input at its own frequency.
"""

import numpy as np

from uvesc.dither import (DitherConfig, common_period, delta_matrix, demodulation, perturbation,
                          signal_average, validate_frequencies)
from uvesc.polytope import build_scaled_polytope, evaluate, sample_uniform

# nominal Hessian with +-10 % uncertainty
H0 = np.array([[100.0, 30.0], [30.0, 20.0]])
poly = build_scaled_polytope(H0, 0.1)
for i, H in enumerate(poly.vertices, 1):
    print(f"vertex {i}:\n{H}")
print("midpoint recovers H0:", np.allclose(evaluate(poly, (0.5, 0.5)), H0))

# a Hessian drawn uniformly from the polytope; the seed fixes it
alpha, H = sample_uniform(poly, seed=0)
print("alpha =", alpha.weights, "\nH =\n", H)

# frequencies 10 and 70 rad/s; (1, 2) would put a beat on top of a channel
print("(1, 7) valid:", validate_frequencies((1, 7)).valid)
print("(1, 2) violations:", validate_frequencies((1, 2)).violations)

dither = DitherConfig([0.1, 0.1], (1, 7), 10.0)
T, omega = common_period(dither)
print(f"common period T = {T:.6f} s")

# M S^T = I + Delta with Delta averaging to zero over T
t = 0.123
print("M S^T - I - Delta:",
      np.linalg.norm(np.outer(demodulation(t, dither), perturbation(t, dither))
                     - np.eye(2) - delta_matrix(t, dither)))
print("average of Delta over T:\n", signal_average(lambda s: delta_matrix(s, dither), T))
