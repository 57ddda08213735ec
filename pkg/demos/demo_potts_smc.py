"""
SMC on the critical mean-field Potts model
==========================================

At the critical inverse temperature the three-colour mean-field Potts model
has four modes: three ordered ones and the disordered centre. Glauber
dynamics alone stays trapped in one of them. An SMC sampler that grows the
system one spin at a time recovers all four mode masses.
"""
import numpy as np

from multimodal_smc.potts.analysis import count_local_maxima, potts_smc_mode_masses
from multimodal_smc.potts.model import BETA_C, PottsParams, magnetisation_log_pmf

############################################################
# Exact mode masses from the magnetisation law

M = 40
exact = magnetisation_log_pmf(PottsParams(M, BETA_C)).mode_masses()
print("exact mode masses:", np.round(exact, 4))

############################################################
# Number of local maxima of the limiting log-density on either side of beta_c

for label, beta in (("beta_c / 2", BETA_C / 2), ("beta_c", BETA_C), ("2 beta_c", 2 * BETA_C)):
    n, points = count_local_maxima(beta, 1000)
    print(f"{label:>10}: {n} local maxima at", [np.round(x, 3).tolist() for x in points])

############################################################
# Replicated SMC runs

R, N = 8, 2000
ests = np.array([potts_smc_mode_masses(M, N, seed=3, replicate=r)[0] for r in range(R)])
se = ests.std(axis=0, ddof=1) / np.sqrt(R)
for m in range(4):
    print(f"mode {m + 1}: SMC {ests[:, m].mean():.4f} +/- {se[m]:.4f}   exact {exact[m]:.4f}")
