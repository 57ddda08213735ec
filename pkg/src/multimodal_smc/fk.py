"""
Exact finite-state Feynman--Kac structures.

Distributions, Markov kernels and bridging sequences on an indexed state
set {0, ..., S-1}, together with the asymptotic variance expansion of the
SMC estimator, L2 mixing constants and metastable kernel approximations.
All objects are immutable after construction.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

STOCHASTIC_TOL = 1e-12
INVARIANCE_TOL = 1e-10
RATIO_RTOL = 1e-10


class LeakyBlockError(ValueError):
    """A kernel moves mass out of a partition cell."""

    def __init__(self, stage, cell, leak):
        self.stage = stage
        self.cell = cell
        self.leak = leak
        super().__init__(f"kernel K_{stage} leaks mass {leak:.3g} out of cell {cell}")


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FiniteDistribution:
    """Probability vector over state indices.

    Parameters
    ----------
    weights : array_like (S, )
        Nonnegative entries summing to one within ``1e-12``.
    """
    weights: np.ndarray

    def __post_init__(self):
        w = _frozen(self.weights)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a nonempty vector")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > STOCHASTIC_TOL:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def normalised(cls, w):
        w = np.asarray(w, dtype=float)
        return cls(w / w.sum())

    @classmethod
    def uniform(cls, S):
        return cls(np.full(S, 1.0 / S))

    @property
    def state_count(self):
        return self.weights.size

    @property
    def support(self):
        return self.weights > 0

    def expect(self, phi):
        return float(self.weights @ np.asarray(phi, dtype=float))

    def variance(self, phi):
        phi = np.asarray(phi, dtype=float)
        c = phi - self.expect(phi)
        return float(self.weights @ (c * c))

    def mass(self, cell):
        """Mass of a boolean mask or index set."""
        return float(self.weights[cell].sum())

    def restrict(self, cell):
        """Normalised restriction to a cell, as a distribution on the full state set."""
        m = np.zeros_like(self.weights)
        m[cell] = self.weights[cell]
        tot = m.sum()
        if tot <= 0:
            raise ValueError("cannot restrict to a cell of zero mass")
        return m / tot


@dataclass(frozen=True)
class TransitionKernel:
    """Row-stochastic matrix. Rows sum to one within ``1e-12``."""
    rows: np.ndarray

    def __post_init__(self):
        K = _frozen(self.rows)
        if K.ndim != 2 or K.shape[0] != K.shape[1] or K.shape[0] == 0:
            raise ValueError("kernel must be a nonempty square matrix")
        if not np.all(np.isfinite(K)) or np.any(K < 0):
            raise ValueError("kernel entries must be finite and nonnegative")
        dev = np.max(np.abs(K.sum(axis=1) - 1.0))
        if dev > STOCHASTIC_TOL:
            raise ValueError(f"kernel rows deviate from 1 by {dev:.3g}")
        object.__setattr__(self, "rows", K)

    @classmethod
    def normalised(cls, rows):
        rows = np.asarray(rows, dtype=float)
        return cls(rows / rows.sum(axis=1, keepdims=True))

    @classmethod
    def perfect_mixing(cls, mu):
        w = _weights(mu)
        return cls(np.tile(w, (w.size, 1)))

    @property
    def state_count(self):
        return self.rows.shape[0]

    def invariance_error(self, mu):
        w = _weights(mu)
        return float(np.max(np.abs(w @ self.rows - w)))

    def is_invariant(self, mu, tol=INVARIANCE_TOL):
        return self.invariance_error(mu) <= tol


def _weights(mu):
    if isinstance(mu, FiniteDistribution):
        return mu.weights
    return np.asarray(mu, dtype=float)


def _matrix(K):
    if isinstance(K, TransitionKernel):
        return K.rows
    return np.asarray(K, dtype=float)


def _cells(labels):
    """Boolean masks for each distinct label, in sorted label order."""
    labels = np.asarray(labels)
    return [labels == r for r in np.unique(labels)]


def density_ratio(mu, nu):
    """g = nu/mu on the support of mu, zero elsewhere."""
    mu, nu = _weights(mu), _weights(nu)
    g = np.zeros_like(mu)
    pos = mu > 0
    g[pos] = nu[pos] / mu[pos]
    return g


@dataclass(frozen=True)
class BridgingSequence:
    """Bridging distributions mu_0..mu_n with kernels K_1..K_n.

    Parameters
    ----------
    distributions : sequence of FiniteDistribution (n+1)
    kernels : sequence of TransitionKernel (n)
        ``kernels[k-1]`` is K_k and must leave mu_k invariant.
    partitions : sequence of label vectors (n+1), optional
        Mode label per state at each stage. A single label vector is
        broadcast to every stage.
    invariance_tol : float
        Tolerance on ``|mu_k K_k - mu_k|``.
    """
    distributions: tuple
    kernels: tuple
    partitions: Optional[tuple] = None
    invariance_tol: float = INVARIANCE_TOL
    weights: tuple = field(init=False, repr=False)

    def __post_init__(self):
        dists = tuple(d if isinstance(d, FiniteDistribution) else FiniteDistribution(d)
                      for d in self.distributions)
        kers = tuple(K if isinstance(K, TransitionKernel) else TransitionKernel(K)
                     for K in self.kernels)
        if len(dists) < 1 or len(kers) != len(dists) - 1:
            raise ValueError("need n+1 distributions and n kernels")
        S = dists[0].state_count
        if any(d.state_count != S for d in dists) or any(K.state_count != S for K in kers):
            raise ValueError("dimension mismatch between distributions and kernels")
        for k in range(len(dists) - 1):
            bad = (dists[k].weights == 0) & (dists[k + 1].weights > 0)
            if np.any(bad):
                raise ValueError(f"mu_{k + 1} is not absolutely continuous w.r.t. mu_{k} "
                                 f"(state {int(np.argmax(bad))})")
        for k, K in enumerate(kers, start=1):
            err = K.invariance_error(dists[k])
            if err > self.invariance_tol:
                raise ValueError(f"K_{k} is not invariant for mu_{k} (error {err:.3g})")
        parts = self.partitions
        if parts is not None:
            parts = np.asarray(parts)
            if parts.ndim == 1:
                parts = np.tile(parts, (len(dists), 1))
            if parts.shape != (len(dists), S):
                raise ValueError("partitions must give one label per state and stage")
            for k in range(len(dists)):
                for r, cell in enumerate(_cells(parts[k])):
                    if dists[k].mass(cell) <= 0:
                        raise ValueError(f"cell {r} has zero mass under mu_{k}")
            parts = tuple(_frozen(p, dtype=int) for p in parts)
        object.__setattr__(self, "distributions", dists)
        object.__setattr__(self, "kernels", kers)
        object.__setattr__(self, "partitions", parts)
        g = tuple(_frozen(density_ratio(dists[k], dists[k + 1])) for k in range(len(dists) - 1))
        object.__setattr__(self, "weights", g)

    @property
    def n(self):
        return len(self.kernels)

    @property
    def state_count(self):
        return self.distributions[0].state_count

    def to_json(self):
        doc = {
            "states": self.state_count,
            "distributions": [d.weights.tolist() for d in self.distributions],
            "kernels": [K.rows.tolist() for K in self.kernels],
        }
        if self.partitions is not None:
            doc["partitions"] = [p.tolist() for p in self.partitions]
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text, invariance_tol=INVARIANCE_TOL):
        doc = json.loads(text)
        S = int(doc["states"])
        dists = [np.asarray(d, dtype=float) for d in doc["distributions"]]
        if any(d.shape != (S,) for d in dists):
            raise ValueError("distribution length does not match 'states'")
        return cls(dists, [np.asarray(K, dtype=float) for K in doc["kernels"]],
                   doc.get("partitions"), invariance_tol=invariance_tol)


@dataclass(frozen=True)
class VarianceReport:
    """Terms V_{k,n}, their total V_n and Var_{mu_n}(phi)."""
    terms: tuple
    total: float
    variance: float
    norm: str = "current"


def asymptotic_variance_exact(seq: BridgingSequence, phi, norm="current"):
    """Exact asymptotic variance of the SMC estimate of mu_n(phi).

    With phi_bar = phi - mu_n(phi), f_n = phi_bar and
    f_k = g_{k,k+1} K_{k+1} f_{k+1}, the terms are V_{k,n} = mu_k(f_k^2).

    Parameters
    ----------
    seq : BridgingSequence
    phi : array_like (S, )
    norm : {"current", "next"}
        ``"current"`` is the CLT variance (f_k measured in L2(mu_k)).
        ``"next"`` measures f_k in L2(mu_{k+1}) for k < n, a convention
        that some published tables use; it is not the CLT variance.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (seq.state_count,):
        raise ValueError("phi has the wrong dimension")
    if norm not in ("current", "next"):
        raise ValueError("norm must be 'current' or 'next'")
    mun = seq.distributions[-1]
    if not np.all(np.isfinite(phi[mun.support])):
        raise ValueError("phi must be finite on the support of mu_n")
    phi = np.where(np.isfinite(phi), phi, 0.0)
    f = phi - mun.expect(phi)
    terms = [float(mun.weights @ (f * f))]
    for k in range(seq.n - 1, -1, -1):
        f = seq.weights[k] * (seq.kernels[k].rows @ f)
        w = seq.distributions[k + 1 if norm == "next" else k].weights
        terms.append(float(w @ (f * f)))
    terms = tuple(reversed(terms))
    return VarianceReport(terms, float(np.sum(terms)), terms[-1], norm)


def operator_gap_l2(K, mu):
    """Norm of K - 1 mu^T on L2(mu), zero-mass states dropped."""
    P, w = _matrix(K), _weights(mu)
    if P.shape != (w.size, w.size):
        raise ValueError("dimension mismatch")
    keep = w > 0
    if not np.any(keep):
        raise ValueError("distribution has empty support")
    P, w = P[np.ix_(keep, keep)], w[keep]
    w = w / w.sum()
    sq = np.sqrt(w)
    A = sq[:, None] * (P - w[None, :]) / sq[None, :]
    return float(np.linalg.norm(A, 2))


def restricted_kernel(K, mu, cell, stage=None, index=None, tol=STOCHASTIC_TOL):
    """Kernel and distribution restricted to a block; raise if the block leaks."""
    P, w = _matrix(K), _weights(mu)
    idx = np.flatnonzero(cell)
    block = P[np.ix_(idx, idx)]
    leak = float(np.max(np.abs(block.sum(axis=1) - 1.0)))
    if leak > tol:
        raise LeakyBlockError(stage, index, leak)
    return block, w[idx] / w[idx].sum()


@dataclass(frozen=True)
class MixingConstants:
    gamma_g: float
    gamma_k: float
    gamma_k_loc: Optional[float] = None


def mixing_constants(seq: BridgingSequence, local=False):
    """Gamma_g, gamma_K and optionally the block-restricted gamma_K^loc."""
    gamma_g = max((float(g.max()) for g in seq.weights), default=1.0)
    gaps = [operator_gap_l2(seq.kernels[k - 1], seq.distributions[k]) for k in range(1, seq.n + 1)]
    gamma_k = 1.0 - max(gaps, default=0.0)
    loc = None
    if local:
        if seq.partitions is None:
            raise ValueError("gamma_K^loc needs partitions")
        worst = 0.0
        for k in range(1, seq.n + 1):
            for r, cell in enumerate(_cells(seq.partitions[k])):
                block, w = restricted_kernel(seq.kernels[k - 1], seq.distributions[k], cell, k, r)
                worst = max(worst, operator_gap_l2(block, w))
        loc = 1.0 - worst
    return MixingConstants(gamma_g, gamma_k, loc)


@dataclass(frozen=True)
class MetastableKernel:
    """mu_hat(x, .) = sum_r alpha[x, r] mu_r(.)."""
    alpha: np.ndarray
    local_restrictions: tuple

    def __post_init__(self):
        a = _frozen(self.alpha)
        if np.any(a < 0) or np.any(a.sum(axis=1) > 1 + STOCHASTIC_TOL):
            raise ValueError("alpha must be nonnegative with row sums at most 1")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "local_restrictions",
                           tuple(_frozen(m) for m in self.local_restrictions))

    def matrix(self):
        return self.alpha @ np.vstack(self.local_restrictions)


def metastable_kernel(mu, partition, alpha_rule="exit", K=None):
    """Metastable state approximation of a kernel.

    Parameters
    ----------
    mu : FiniteDistribution
    partition : array_like (S, )
        Mode label per state.
    alpha_rule : {"exit", "stationary"}
        ``"exit"`` uses alpha_r(x) = K(x, F_r) and needs ``K``;
        ``"stationary"`` uses alpha_r(x) = mu(F_r), so every row equals mu.
    """
    w = _weights(mu)
    cells = _cells(partition)
    locs = []
    for r, cell in enumerate(cells):
        if not np.any(cell) or w[cell].sum() <= 0:
            raise ValueError(f"mode {r} is empty or has zero mass")
        locs.append(np.where(cell, w, 0.0) / w[cell].sum())
    if alpha_rule == "exit":
        if K is None:
            raise ValueError("exit rule needs the kernel K")
        P = _matrix(K)
        alpha = np.column_stack([P[:, cell].sum(axis=1) for cell in cells])
    elif alpha_rule == "stationary":
        alpha = np.tile([w[cell].sum() for cell in cells], (w.size, 1))
    else:
        raise ValueError(f"unknown alpha rule {alpha_rule!r}")
    return MetastableKernel(np.minimum(alpha, 1.0), locs)


@dataclass(frozen=True)
class RegionStructure:
    """Modes split into inner and border regions.

    Parameters
    ----------
    mode_of : array_like of int (S, )
        Mode label per state (any integers; sorted order defines the modes).
    is_inner : array_like of bool (S, )
    """
    mode_of: np.ndarray
    is_inner: np.ndarray

    def __post_init__(self):
        m = _frozen(self.mode_of, dtype=int)
        inner = _frozen(self.is_inner, dtype=bool)
        if m.shape != inner.shape or m.ndim != 1:
            raise ValueError("mode_of and is_inner must be vectors of equal length")
        for lab in np.unique(m):
            if not np.any(inner & (m == lab)):
                raise ValueError(f"mode {lab} has an empty inner region")
        object.__setattr__(self, "mode_of", m)
        object.__setattr__(self, "is_inner", inner)

    @property
    def modes(self):
        return np.unique(self.mode_of)

    def inner_cells(self):
        return [self.is_inner & (self.mode_of == lab) for lab in self.modes]

    def mode_cells(self):
        return [self.mode_of == lab for lab in self.modes]


def absorption_probabilities(P, regions: RegionStructure, u):
    """q[x, j]: probability of having entered inner region j within u steps.

    Inner states are absorbing; computed by u matrix-vector sweeps.
    """
    P = _matrix(P)
    inner = regions.is_inner
    Q = P.copy()
    Q[inner] = 0.0
    idx = np.flatnonzero(inner)
    Q[idx, idx] = 1.0
    H = np.column_stack([c.astype(float) for c in regions.inner_cells()])
    for _ in range(int(u)):
        H = Q @ H
    return H


def mode_restrictions(regions, mu):
    """Rows mu^(j): mu restricted to mode F^(j) and renormalised."""
    w = _weights(mu)
    out = []
    for cell in regions.mode_cells():
        if w[cell].sum() <= 0:
            raise ValueError("mode with zero mass")
        out.append(np.where(cell, w, 0.0) / w[cell].sum())
    return np.vstack(out)


def metastable_t_kernel(P, t, regions: RegionStructure, mu):
    """Sub-Markov kernel pi_hat^(t).

    Inner rows equal mu^(j), the restriction of mu to their own mode;
    border rows mix the mu^(j) with the probabilities q^(j)(x, floor(t/2))
    of leaving the border into inner region j.
    """
    if int(t) < 1:
        raise ValueError("t must be at least 1")
    P = _matrix(P)
    if P.shape[0] != regions.mode_of.size:
        raise ValueError("dimension mismatch")
    locs = mode_restrictions(regions, mu)
    q = absorption_probabilities(P, regions, int(t) // 2)
    out = q @ locs
    for j, cell in enumerate(regions.inner_cells()):
        out[cell] = locs[j]
    return out


def sup_operator_distance(K, L):
    """max_x sum_y |K(x,y) - L(x,y)|."""
    A, B = _matrix(K), _matrix(L)
    if A.shape != B.shape:
        raise ValueError("dimension mismatch")
    return float(np.max(np.abs(A - B).sum(axis=1)))
