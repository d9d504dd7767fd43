"""
How close is the full loop to its average?
==========================================

Doubling every dither frequency should roughly halve the largest distance
between the full-loop estimate and the average-loop prediction.
"""

import numpy as np

from uvesc.dither import DitherConfig
from uvesc.polytope import build_scaled_polytope, sample_uniform
from uvesc.simulator import MapSpec, SimConfig, averaging_gap
from uvesc.synthesis import SynthesisProblem, solve

H0 = np.array([[100.0, 30.0], [30.0, 20.0]])
poly = build_scaled_polytope(H0, 0.1)
K = solve(SynthesisProblem(poly, 32.9034, 0.4)).K
_, H = sample_uniform(poly, seed=0)
cfg = SimConfig(MapSpec(10.0, [2.0, 4.0], H), DitherConfig([0.1, 0.1], (1, 7), 10.0),
                K, theta0=[2.5, 6.0], t_end=15.0)

gaps = averaging_gap(cfg, [10.0, 20.0, 40.0])
for (w, g), nxt in zip(gaps, gaps[1:] + [None]):
    ratio = f"  ratio to next {nxt[1] / g:.3f}" if nxt else ""
    print(f"omega = {w:5.1f}  gap = {g:.4f}{ratio}")
