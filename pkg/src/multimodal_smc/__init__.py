"""Sequential Monte Carlo for multimodal targets: exact variance oracles, bounds and a Potts application."""
from .fk import (BridgingSequence, FiniteDistribution, LeakyBlockError, MetastableKernel,
                 RegionStructure, TransitionKernel, VarianceReport, asymptotic_variance_exact,
                 metastable_kernel, metastable_t_kernel, mixing_constants, operator_gap_l2,
                 sup_operator_distance)
from .smc import (ParticleDeathError, ParticleEnsemble, ResamplingPolicy, effective_sample_size,
                  multinomial_resample, replicate_asymptotic_variance, run_smc,
                  run_smc_occupancy, stream)
from .bounds import (BoundReport, BoundViolation, bound_global, bound_metastable_quality,
                     bound_no_mixing, bound_with_mixing, counterexample_instance, growth_within_mode)

__version__ = "0.1.0"
