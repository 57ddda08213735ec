"""
Mean-field three-colour Potts model.

The Gibbs measure on {0,1,2}^M is proportional to exp(beta * sum_c n_c^2 / M)
where n_c counts the spins of colour c. Everything exact is done on the
magnetisation lattice {(n_1, n_2, n_3): n_1 + n_2 + n_3 = M}.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, logsumexp

from ..smc import ParticleEnsemble
from . import kernels
from .geometry import mode_of_counts

BETA_C = 2.0 * math.log(2.0)
LOG3 = math.log(3.0)


@dataclass(frozen=True)
class PottsParams:
    M: int
    beta_tilde: float = BETA_C

    def __post_init__(self):
        if int(self.M) < 1:
            raise ValueError("M must be at least 1")
        if self.beta_tilde < 0:
            raise ValueError("beta_tilde must be nonnegative")
        object.__setattr__(self, "M", int(self.M))


def lattice(M):
    """All colour-count vectors of total M, ordered by (n_1, n_2); shape (K, 3)."""
    n1, n2 = np.meshgrid(np.arange(M + 1), np.arange(M + 1), indexing="ij")
    keep = n1 + n2 <= M
    n1, n2 = n1[keep], n2[keep]
    return np.column_stack([n1, n2, M - n1 - n2]).astype(np.int64)


def lattice_index(counts, M):
    """Position of counts in :func:`lattice` order."""
    counts = np.asarray(counts)
    n1, n2 = counts[..., 0], counts[..., 1]
    return n1 * (M + 1) - n1 * (n1 - 1) // 2 + n2


def log_multinomial(counts):
    counts = np.asarray(counts)
    return gammaln(counts.sum(axis=-1) + 1.0) - gammaln(counts + 1.0).sum(axis=-1)


def log_weight(counts, beta):
    """log of (number of spin configurations) * exp(beta sum n^2 / M)."""
    counts = np.asarray(counts)
    M = counts.sum(axis=-1)
    Q = (counts.astype(float) ** 2).sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        energy = np.where(M > 0, beta * Q / np.maximum(M, 1), 0.0)
    return log_multinomial(counts) + energy


@dataclass(frozen=True)
class MagnetisationPMF:
    """Exact law of the colour counts.

    Attributes
    ----------
    M, beta : size and inverse temperature.
    counts : (K, 3) lattice states.
    logp : (K, ) normalised log-probabilities.
    log_z : log of the spin-level partition function sum_sigma exp(beta Q / M).
    """
    M: int
    beta: float
    counts: np.ndarray
    logp: np.ndarray
    log_z: float

    @property
    def p(self):
        return np.exp(self.logp)

    def index(self, counts):
        return lattice_index(counts, self.M)

    def log_prob(self, counts):
        return self.logp[self.index(counts)]

    def grid(self):
        """(M+1, M+1) array over (n_1, n_2) with -inf off the simplex."""
        g = np.full((self.M + 1, self.M + 1), -np.inf)
        g[self.counts[:, 0], self.counts[:, 1]] = self.logp
        return g

    def mode_masses(self, modes=None):
        """Masses of the four strict-majority modes."""
        modes = mode_of_counts(self.counts) if modes is None else modes
        p = self.p
        return np.array([p[modes == m].sum() for m in (1, 2, 3, 4)])


@lru_cache(maxsize=8)
def _pmf(M, beta):
    counts = lattice(M)
    lw = log_weight(counts, beta)
    log_z = float(logsumexp(lw))
    logp = lw - log_z
    counts.setflags(write=False)
    logp.setflags(write=False)
    return MagnetisationPMF(M, beta, counts, logp, log_z)


def magnetisation_log_pmf(params: PottsParams):
    return _pmf(params.M, float(params.beta_tilde))


def log_partition(k, beta=BETA_C):
    """log Z_k = log sum over {0,1,2}^k of exp(beta Q / k); Z_0 = 1."""
    if k == 0:
        return 0.0
    return _pmf(int(k), float(beta)).log_z


def transition_probabilities(counts, beta):
    """Off-diagonal count moves P[..., i, j] (colour i -> j) of one Glauber step.

    P_{i->j} = (n_i/M) exp(2 beta n_j/M) / (exp(2 beta (n_i - 1)/M) + sum_{c != i} exp(2 beta n_c/M)).
    """
    n = np.asarray(counts, dtype=float)
    M = n.sum(axis=-1, keepdims=True)
    s = n / M
    out = np.zeros(n.shape + (3,))
    for i in range(3):
        logits = 2.0 * beta * s
        logits[..., i] -= 2.0 * beta / M[..., 0]
        top = logits.max(axis=-1, keepdims=True)
        e = np.exp(logits - top)
        cond = e / e.sum(axis=-1, keepdims=True)
        out[..., i, :] = s[..., i:i + 1] * cond
        out[..., i, i] = 0.0
    return out


def magnetisation_transitions(counts, params: PottsParams):
    """Up to seven (next counts, probability) pairs from one Glauber step."""
    n = np.asarray(counts, dtype=np.int64)
    if n.shape != (3,) or n.sum() != params.M or np.any(n < 0):
        raise ValueError("counts must be a nonnegative 3-vector summing to M")
    P = transition_probabilities(n, params.beta_tilde)
    out = []
    for i in range(3):
        for j in range(3):
            if i != j and n[i] > 0:
                m = n.copy()
                m[i] -= 1
                m[j] += 1
                out.append((tuple(int(v) for v in m), float(P[i, j])))
    out.append((tuple(int(v) for v in n), float(max(0.0, 1.0 - P.sum()))))
    return out


def conditional_table(k, beta):
    """exp(2 beta n / k) for n = 0..k (single-site conditional weights)."""
    return np.exp(2.0 * beta * np.arange(k + 1) / max(k, 1))


def spin_counts(spins, k=None):
    """Colour counts of the first k spins, per configuration row."""
    spins = np.asarray(spins)
    sub = spins if k is None else spins[..., :k]
    return np.stack([(sub == c).sum(axis=-1) for c in range(3)], axis=-1).astype(np.int64)


def glauber_step(sigma, params: PottsParams, rng):
    """One heat-bath update of a single uniformly chosen spin (colours 0..2)."""
    s = np.array(sigma, dtype=np.int8).reshape(1, -1)
    if s.shape[1] != params.M:
        raise ValueError("configuration length must be M")
    c = spin_counts(s)
    kernels.glauber_sweeps(s, c, params.M, 1, conditional_table(params.M, params.beta_tilde), rng)
    return s[0]


def glauber_run(spins, params: PottsParams, steps, rng, k=None):
    """Apply ``steps`` Glauber updates on the first k spins of each row, in place."""
    spins = np.ascontiguousarray(spins, dtype=np.int8)
    k = params.M if k is None else int(k)
    if k > 0 and steps > 0:
        c = spin_counts(spins, k)
        kernels.glauber_sweeps(spins, c, k, int(steps), conditional_table(k, params.beta_tilde), rng)
    return spins


def step_schedule(k, c1=1.0):
    """t_k = ceil(c1 * k * log(k)^2), with t_0 = t_1 = 0."""
    if k <= 1:
        return 0
    return int(math.ceil(c1 * k * math.log(k) ** 2))


@dataclass(frozen=True)
class PottsBridging:
    """Bridging sequence for the Potts model, usable as an SMC model.

    kind "interpolation": mu_k is the k-spin Potts law on the first k spins
    times uniform colours on the rest (stages k = 0..M).
    kind "tempering": mu_i is the M-spin Potts law at beta * i / n.
    """
    kind: str
    params: PottsParams
    stage_count: int
    log_z: tuple
    steps: tuple
    betas: tuple = ()
    flagged: bool = False

    @property
    def n_stages(self):
        return self.stage_count

    # SMC model interface -------------------------------------------------
    def sample_initial(self, N, rng):
        return rng.integers(0, 3, size=(N, self.params.M), dtype=np.int8)

    def log_weight(self, k, spins):
        """log g_{k,k+1} at stage-k configurations."""
        beta = self.params.beta_tilde
        if self.kind == "interpolation":
            c = spin_counts(spins, k)
            qk = (c.astype(float) ** 2).sum(axis=-1)
            new = spins[..., k].astype(np.int64)
            q1 = qk + 2.0 * np.take_along_axis(c, new[..., None], axis=-1)[..., 0] + 1.0
            ek = beta * qk / k if k > 0 else 0.0
            return LOG3 + self.log_z[k] - self.log_z[k + 1] + beta * q1 / (k + 1) - ek
        c = spin_counts(spins)
        q = (c.astype(float) ** 2).sum(axis=-1) / self.params.M
        return (self.betas[k + 1] - self.betas[k]) * q + self.log_z[k] - self.log_z[k + 1]

    def weight(self, k, spins):
        return np.exp(self.log_weight(k, spins))

    def mutate(self, k, spins, rng):
        """Apply K_k: t_k Glauber steps, then (interpolation) refresh the tail."""
        spins = np.ascontiguousarray(spins, dtype=np.int8)
        M = self.params.M
        if self.kind == "interpolation":
            if k > 0 and self.steps[k] > 0:
                c = spin_counts(spins, k)
                kernels.glauber_sweeps(spins, c, k, self.steps[k],
                                       conditional_table(k, self.params.beta_tilde), rng)
            if k < M:
                spins[:, k:] = rng.integers(0, 3, size=(spins.shape[0], M - k), dtype=np.int8)
        else:
            c = spin_counts(spins)
            kernels.glauber_sweeps(spins, c, M, self.steps[k], conditional_table(M, self.betas[k]), rng)
        return spins

    def take(self, spins, idx):
        return spins[idx]

    def evaluate(self, phi, spins):
        return np.asarray(phi(spins), dtype=float)

    # exact magnetisation-level quantities --------------------------------
    def stage_log_weights(self, k):
        """log g_{k,k+1} over (prefix counts of size k, next colour): arrays (K, 3) and (K, 3)."""
        beta = self.params.beta_tilde
        if self.kind != "interpolation":
            pmf = _pmf(self.params.M, float(self.betas[k]))
            q = (pmf.counts.astype(float) ** 2).sum(axis=-1) / self.params.M
            lw = (self.betas[k + 1] - self.betas[k]) * q + self.log_z[k] - self.log_z[k + 1]
            return pmf.counts, lw
        counts = lattice(k)
        qk = (counts.astype(float) ** 2).sum(axis=-1)
        ek = beta * qk / k if k > 0 else np.zeros(len(counts))
        lw = np.empty((len(counts), 3))
        for c in range(3):
            q1 = qk + 2.0 * counts[:, c] + 1.0
            lw[:, c] = LOG3 + self.log_z[k] - self.log_z[k + 1] + beta * q1 / (k + 1) - ek
        return counts, lw

    def max_weight(self, k):
        return float(np.exp(self.stage_log_weights(k)[1].max()))


def bridging_builder(kind, params: PottsParams, n_stages=None, c1=1.0, steps=None):
    """Build an interpolation-to-independence or tempering bridging sequence.

    Parameters
    ----------
    kind : {"interpolation", "tempering"}
    params : PottsParams
    n_stages : int, optional
        Interpolation always uses M stages; tempering defaults to M.
    c1 : float
        Constant of the step schedule t_k = ceil(c1 k log(k)^2).
    steps : sequence of int, optional
        Explicit Glauber steps per stage k = 0..n (overrides the schedule).
    """
    M, beta = params.M, float(params.beta_tilde)
    flagged = False
    if kind == "interpolation":
        n = M if n_stages is None else int(n_stages)
        if n != M:
            raise ValueError("the interpolation sequence needs exactly M stages")
        if abs(beta - BETA_C) > 1e-12:
            warnings.warn("interpolation analysed at the critical temperature only", stacklevel=2)
            flagged = True
        log_z = tuple(log_partition(k, beta) for k in range(M + 1))
        sched = tuple(step_schedule(k, c1) for k in range(M + 1))
        betas = ()
    elif kind == "tempering":
        n = M if n_stages is None else int(n_stages)
        if n < 1:
            raise ValueError("tempering needs at least one stage")
        betas = tuple(beta * i / n for i in range(n + 1))
        log_z = tuple(log_partition(M, b) for b in betas)
        sched = tuple([0] + [step_schedule(M, c1)] * n)
    else:
        raise ValueError(f"unknown bridging kind {kind!r}")
    if steps is not None:
        if len(steps) < n + 1:
            raise ValueError("stage schedule shorter than the number of stages")
        sched = tuple(int(s) for s in steps[:n + 1])
    return PottsBridging(kind, params, n, log_z, sched, betas, flagged)


def prefix_log_pmf_from_larger(pmf_next: MagnetisationPMF):
    """Law of the first j spins' counts under the (j+1)-spin Potts law.

    By exchangeability the dropped spin is uniform among the j+1 spins, so
    P(prefix = m) = sum_c P(m + e_c) (m_c + 1) / (j + 1).
    """
    j = pmf_next.M - 1
    counts = lattice(j)
    p = np.zeros(len(counts))
    for c in range(3):
        up = counts.copy()
        up[:, c] += 1
        p += np.exp(pmf_next.log_prob(up)) * (counts[:, c] + 1) / (j + 1)
    return counts, p


def mode_mass_series(bridging: PottsBridging):
    """Masses of the four modes of the full configuration at every stage.

    For interpolation, stage k mixes the k-spin Potts prefix with uniform
    spins; the four modes refer to counts over all M spins.
    """
    M = bridging.params.M
    out = []
    for k in range(bridging.stage_count + 1):
        if bridging.kind == "tempering":
            out.append(_pmf(M, float(bridging.betas[k])).mode_masses())
        else:
            out.append(interpolation_stage_pmf(M, k, bridging.params.beta_tilde).mode_masses())
    return np.array(out)


def interpolation_stage_pmf(M, k, beta=BETA_C):
    """Law of the total colour counts under mu_k (k-spin Potts prefix, uniform tail)."""
    head = _pmf(k, float(beta)) if k > 0 else None
    tail = _pmf(M - k, 0.0) if k < M else None
    if head is None:
        return tail
    if tail is None:
        return head
    counts = lattice(M)
    p = np.zeros((M + 1, M + 1))
    hp, tp = head.p, tail.p
    for a, (h1, h2, _) in enumerate(head.counts):
        p[h1:h1 + M - k + 1, h2:h2 + M - k + 1][tail.counts[:, 0], tail.counts[:, 1]] += hp[a] * tp
    logp = np.log(np.maximum(p[counts[:, 0], counts[:, 1]], 1e-300))
    return MagnetisationPMF(M, float(beta), counts, logp, float("nan"))


def initial_pair(M, rng):
    """Two spin configurations with equal colour counts (second one shuffled)."""
    a = rng.integers(0, 3, size=M).astype(np.int8)
    return a, rng.permutation(a)
