"""
Sequential Monte Carlo over a bridging sequence.

The particle system starts from N i.i.d. draws of mu_0; stage k -> k+1
weights the particles by g_{k,k+1}, resamples multinomially and then moves
every particle with K_{k+1}. A replication harness turns independent runs
into an estimate of the asymptotic variance.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

from .fk import BridgingSequence

# stream purposes
INIT, RESAMPLE, MUTATE = 0, 1, 2


def stream(seed, replicate=0, stage=0, purpose=0):
    """Counter-based generator keyed by (seed, replicate, stage, purpose)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replicate), int(stage), int(purpose)))
    return np.random.Generator(np.random.Philox(ss))


class ParticleDeathError(RuntimeError):
    """All weights vanished at some stage."""

    def __init__(self, stage):
        self.stage = stage
        super().__init__(f"all particle weights are zero at stage {stage}")


@dataclass(frozen=True)
class ResamplingPolicy:
    """Resample at every stage, or only when ESS < threshold * N.

    The threshold mode is an extension outside the analysed algorithm and
    is reported as experimental.
    """
    mode: str = "every-stage"
    threshold: float = 0.5

    def __post_init__(self):
        if self.mode not in ("every-stage", "ess-threshold"):
            raise ValueError(f"unknown resampling mode {self.mode!r}")
        if not 0 < self.threshold <= 1:
            raise ValueError("threshold must lie in (0, 1]")

    @property
    def experimental(self):
        return self.mode == "ess-threshold"


@dataclass(frozen=True)
class ParticleEnsemble:
    stage: int
    particles: object
    seed_lineage: tuple


@dataclass(frozen=True)
class SMCResult:
    estimate: float
    ess_trace: tuple
    ensemble: ParticleEnsemble
    final_weights: Optional[np.ndarray] = None
    experimental: bool = False


def effective_sample_size(w):
    """(sum w)^2 / sum w^2."""
    w = np.asarray(w, dtype=float)
    top = w.max() if w.size else 0.0
    if not top > 0:
        return 0.0
    w = w / top  # guards against underflow of w @ w
    return float(w.sum() ** 2 / np.dot(w, w))


def multinomial_resample(weights, rng, n=None):
    """Parent indices drawn i.i.d. with P(i) = w_i / sum(w)."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    tot = w.sum()
    if tot <= 0:
        raise ValueError("weights sum to zero")
    n = w.size if n is None else int(n)
    cdf = np.cumsum(w)
    idx = np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right")
    return np.minimum(idx, w.size - 1)


class FiniteModel:
    """Sampler view of a finite BridgingSequence (particles are state indices)."""

    def __init__(self, seq: BridgingSequence):
        self.seq = seq
        self._cdf0 = np.cumsum(seq.distributions[0].weights)
        self._cdfs = [np.cumsum(K.rows, axis=1) for K in seq.kernels]

    @property
    def n_stages(self):
        return self.seq.n

    def sample_initial(self, N, rng):
        u = rng.random(N) * self._cdf0[-1]
        return np.minimum(np.searchsorted(self._cdf0, u, side="right"), self._cdf0.size - 1)

    def weight(self, k, x):
        return self.seq.weights[k][x]

    def mutate(self, k, x, rng):
        cdf = self._cdfs[k - 1][x]
        u = rng.random(x.size) * cdf[:, -1]
        return np.minimum((cdf <= u[:, None]).sum(axis=1), cdf.shape[1] - 1)

    def take(self, x, idx):
        return x[idx]

    def evaluate(self, phi, x):
        if callable(phi):
            return np.asarray(phi(x), dtype=float)
        return np.asarray(phi, dtype=float)[x]


def _as_model(model):
    return FiniteModel(model) if isinstance(model, BridgingSequence) else model


def _take(model, x, idx):
    take = getattr(model, "take", None)
    return take(x, idx) if take is not None else x[idx]


def run_smc(model, N, seed, policy=None, phi=None, replicate=0):
    """Run the particle algorithm once.

    Parameters
    ----------
    model : BridgingSequence or sampler model
        A sampler model provides ``n_stages``, ``sample_initial(N, rng)``,
        ``weight(k, x)`` (g_{k,k+1} at stage-k particles), ``mutate(k, x, rng)``
        (apply K_k) and ``evaluate(phi, x)``.
    N : int
        Number of particles, at least 2.
    seed : int
    policy : ResamplingPolicy, optional
    phi : test function, optional
        Vector over states (finite models) or callable on particles.
    replicate : int
        Replicate id used in the RNG stream keys.

    Returns
    -------
    SMCResult
    """
    if N < 2:
        raise ValueError("need at least 2 particles")
    model = _as_model(model)
    policy = policy or ResamplingPolicy()
    x = model.sample_initial(N, stream(seed, replicate, 0, INIT))
    logw = np.zeros(N)
    ess_trace = []
    for k in range(model.n_stages):
        g = np.asarray(model.weight(k, x), dtype=float)
        with np.errstate(divide="ignore"):
            logw = logw + np.log(g)
        top = logw.max()
        if not np.isfinite(top):
            raise ParticleDeathError(k)
        w = np.exp(logw - top)
        ess = effective_sample_size(w)
        ess_trace.append(ess)
        if policy.mode == "every-stage" or ess < policy.threshold * N:
            idx = multinomial_resample(w, stream(seed, replicate, k, RESAMPLE))
            x = _take(model, x, idx)
            logw = np.zeros(N)
        x = model.mutate(k + 1, x, stream(seed, replicate, k + 1, MUTATE))
    w = np.exp(logw - logw.max())
    estimate = float("nan")
    if phi is not None:
        vals = model.evaluate(phi, x)
        estimate = float(vals.mean()) if policy.mode == "every-stage" else float(w @ vals / w.sum())
    ens = ParticleEnsemble(model.n_stages, x, (int(seed), int(replicate), model.n_stages))
    return SMCResult(estimate, tuple(ess_trace), ens, w, policy.experimental)


def run_smc_occupancy(seq: BridgingSequence, N, seed, phi, replicate=0):
    """Every-stage multinomial SMC on a finite space, tracked by state counts.

    Particles on a finite space are exchangeable, so the occupancy vector is
    a sufficient description: resampling draws Multinomial(N, c * g) and
    mutation draws Multinomial(c_s, K[s]) for each occupied state s. The
    estimator has exactly the law of ``run_smc`` with the default policy,
    at O(S^2) cost per stage instead of O(N log N).

    Returns the estimate of mu_n(phi).
    """
    if N < 2:
        raise ValueError("need at least 2 particles")
    phi = np.asarray(phi, dtype=float)
    c = stream(seed, replicate, 0, INIT).multinomial(N, seq.distributions[0].weights)
    for k in range(seq.n):
        w = c * seq.weights[k]
        tot = w.sum()
        if not tot > 0:
            raise ParticleDeathError(k)
        c = stream(seed, replicate, k, RESAMPLE).multinomial(N, w / tot)
        rows = seq.kernels[k].rows
        occ = np.flatnonzero(c)
        c = stream(seed, replicate, k + 1, MUTATE).multinomial(c[occ], rows[occ]).sum(axis=0)
    return float(c @ phi / N)


@dataclass(frozen=True)
class ReplicateVariance:
    """N times the sample variance of R estimates with a jackknife CI."""
    value: float
    ci: tuple
    deaths: int
    estimates: np.ndarray
    N: int

    def brackets(self, v):
        return self.ci[0] <= v <= self.ci[1]


def jackknife_variance_ci(estimates, N, level=0.99):
    """Jackknife CI for N * sample variance, using closed-form leave-one-out values."""
    x = np.asarray(estimates, dtype=float)
    R = x.size
    if R < 2:
        raise ValueError("need at least 2 replicates")
    mean = x.mean()
    ss = np.sum((x - mean) ** 2)
    if R == 2:
        return N * ss, (0.0, float("inf"))
    # leave-one-out sample variances
    loo_ss = ss - (x - mean) ** 2 * R / (R - 1)
    loo = loo_ss / (R - 2)
    full = ss / (R - 1)
    pseudo = R * full - (R - 1) * loo
    centre = pseudo.mean()
    se = pseudo.std(ddof=1) / np.sqrt(R)
    z = stats.t.ppf(0.5 + level / 2, R - 1)
    return N * full, (N * (centre - z * se), N * (centre + z * se))


def default_threads():
    return os.cpu_count() or 1


def replicate_asymptotic_variance(model, phi, N, R, seed, policy=None, level=0.99, threads=None,
                                  occupancy=None):
    """Empirical N * Var of the SMC estimate over R independent replicates.

    Replicates use disjoint RNG streams and are gathered in replicate order,
    so the result does not depend on ``threads``. Replicates that suffer
    particle death are excluded and counted. ``occupancy`` (default: on for
    finite sequences under every-stage resampling) switches to the
    equivalent count-based sampler ``run_smc_occupancy``.
    """
    if R < 2:
        raise ValueError("need at least 2 replicates")
    every = policy is None or policy.mode == "every-stage"
    if occupancy is None:
        occupancy = isinstance(model, BridgingSequence) and every
    if occupancy and not (isinstance(model, BridgingSequence) and every):
        raise ValueError("occupancy sampling needs a finite sequence and every-stage resampling")
    seq = model
    model = _as_model(model)

    def one(r):
        try:
            if occupancy:
                return run_smc_occupancy(seq, N, seed, phi, replicate=r)
            return run_smc(model, N, seed, policy, phi, replicate=r).estimate
        except ParticleDeathError:
            return None

    threads = threads or default_threads()
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            out = list(ex.map(one, range(R)))
    else:
        out = [one(r) for r in range(R)]
    est = np.array([e for e in out if e is not None])
    deaths = R - est.size
    value, ci = jackknife_variance_ci(est, N, level)
    return ReplicateVariance(float(value), (float(ci[0]), float(ci[1])), deaths, est, N)
