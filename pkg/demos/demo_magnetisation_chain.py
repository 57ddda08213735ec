"""
The magnetisation chain inside one mode
=======================================

Near the critical point each mode behaves like a well: the drift of the
colour proportions pulls back toward the mode centre, single-step jumps have
variance of order 1/M^2, and the chain restricted to a box around a mode
contracts in Wasserstein distance.
"""
from multimodal_smc.potts.analysis import (coupling_tail, curvature_check, drift_verify,
                                           jump_variance_min)

############################################################
# Drift and jump variance

for M in (50, 100, 200):
    d = drift_verify(M)
    j = jump_variance_min(M)
    print(f"M={M:>4}: worst drift slack {d.worst_slack:+.2e}, min M^2 Var {j.min_scaled:.4f}")

############################################################
# Coarse Ricci curvature on sampled neighbouring pairs

for mode in (1, 4):
    c = curvature_check(10 ** 6, 1e-4, mode, samples=500, seed=1)
    print(f"mode {mode}: min kappa * M over {c.pairs} pairs = {c.min_kappa_M:.4f}")

############################################################
# Coupling time of two magnetisation chains

res = coupling_tail(30, [150, 600], 2000, seed=5)
for t, p, b in zip(res.times, res.tail, res.bound):
    print(f"t={t:>4}: P(tau > t) = {p:.4f}  (bound {b:.3f})")
