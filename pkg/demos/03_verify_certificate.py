"""
Independent checks of a certificate
===================================

The verifier rebuilds each matrix inequality from X, M and K and looks at
its eigenvalues.  It also samples the decrease of V(g) = g'Pg/|g|.
"""

import numpy as np

from uvesc.polytope import build_scaled_polytope
from uvesc.synthesis import SynthesisProblem, SynthesisResult, certify_gain, solve
from uvesc.verifier import (check_certificate, check_descent_condition,
                            check_finite_time_decrease)

H0 = np.array([[100.0, 30.0], [30.0, 20.0]])
poly = build_scaled_polytope(H0, 0.1)
mu = 32.9034
res = solve(SynthesisProblem(poly, mu, 0.4))

print("certificate passes:", check_certificate(res, poly, mu, varphi=0.4).passed)
print("descent condition passes:",
      check_descent_condition(res.K, res.P, res.Qmat, mu, poly).passed)
dec = check_finite_time_decrease(res.K, res.P, poly, samples=1000, Qmat=res.Qmat)
print(f"smallest decrease rate {dec.min_margin:.4f} >= lambda_min(Q) {dec.lambda_min_Q:.4f}")

# a wrong-sign perturbation of the gain is caught
X = np.array(res.X)
bad = SynthesisResult.from_decision(X, res.Mdec, (res.K + 10 * np.eye(2)) @ X, mu)
print("perturbed gain:", check_certificate(bad, poly, mu).worst.to_dict())

# a gain from elsewhere can be certified by searching X and M for it
K_reference = np.array([[-0.2393, 0.3589], [0.3589, -1.1965]])
print("reference gain certified:", certify_gain(poly, mu, K_reference).certificate.passed)
