"""
Random finite instances for oracle checks and bound domination sweeps.
"""
from __future__ import annotations

import numpy as np

from .fk import BridgingSequence, RegionStructure


def random_distribution(S, rng, concentration=1.0):
    w = rng.dirichlet(np.full(S, concentration))
    w = np.maximum(w, 1e-3)
    return w / w.sum()


def metropolis_kernel(mu, Q):
    """Metropolis kernel for mu with symmetric proposal Q (reversible)."""
    mu = np.asarray(mu, dtype=float)
    ratio = np.minimum(1.0, mu[None, :] / mu[:, None])
    K = Q * ratio
    np.fill_diagonal(K, 0.0)
    np.fill_diagonal(K, np.maximum(1.0 - K.sum(axis=1), 0.0))
    return K


def random_symmetric_proposal(S, rng, blocks=None):
    """Symmetric stochastic proposal; restricted to blocks when given."""
    A = rng.random((S, S))
    A = (A + A.T) / 2
    if blocks is not None:
        blocks = np.asarray(blocks)
        A = A * (blocks[:, None] == blocks[None, :])
    np.fill_diagonal(A, 0.0)
    return A / max(A.sum(axis=1).max(), 1e-300)


def random_reversible_kernel(mu, rng, blocks=None, laziness=0.0, power=1):
    K = metropolis_kernel(mu, random_symmetric_proposal(len(mu), rng, blocks))
    K = laziness * np.eye(len(mu)) + (1 - laziness) * K
    return np.maximum(np.linalg.matrix_power(K, power), 0.0)


def block_mixing_kernel(mu, blocks, weight, rng=None):
    """weight * (perfect mixing within blocks) + (1-weight) * Metropolis within blocks."""
    mu = np.asarray(mu, dtype=float)
    blocks = np.asarray(blocks)
    same = blocks[:, None] == blocks[None, :]
    loc = same * mu[None, :]
    loc = loc / loc.sum(axis=1, keepdims=True)
    rng = rng or np.random.default_rng(0)
    return weight * loc + (1 - weight) * random_reversible_kernel(mu, rng, blocks)


def geometric_path(mu0, mun, n):
    """mu_k proportional to mu0^(1-k/n) mun^(k/n)."""
    out = []
    for k in range(n + 1):
        lw = (1 - k / n) * np.log(mu0) + (k / n) * np.log(mun)
        w = np.exp(lw - lw.max())
        out.append(w / w.sum())
    return out


def random_bridging_sequence(rng, S=None, n=None, blocks=None, concentration=1.0,
                             mixing=None, power=None):
    """Random finite bridging sequence with reversible Metropolis kernels.

    Parameters
    ----------
    rng : numpy Generator
    S, n : int, optional
        State count (default 4..8) and number of stages (default 1..6).
    blocks : label vector, optional
        When given, kernels never leave a block and the labels are attached
        as the partition at every stage.
    concentration : float
        Dirichlet concentration of the end points; large values give
        nearby distributions and small density ratios.
    mixing : float, optional
        Weight of exact within-block (or global) resampling mixed into
        every kernel.
    power : int, optional
        Number of Metropolis steps per kernel (default random 1..3).
    """
    S = S or int(rng.integers(4, 9))
    n = n or int(rng.integers(1, 7))
    mu0 = random_distribution(S, rng, concentration)
    mun = random_distribution(S, rng, concentration)
    dists = geometric_path(mu0, mun, n)
    kernels = []
    for k in range(1, n + 1):
        p = power or int(rng.integers(1, 4))
        K = random_reversible_kernel(dists[k], rng, blocks, power=p)
        if mixing:
            lab = np.zeros(S, int) if blocks is None else np.asarray(blocks)
            same = lab[:, None] == lab[None, :]
            loc = same * dists[k][None, :]
            loc = loc / loc.sum(axis=1, keepdims=True)
            K = mixing * loc + (1 - mixing) * K
        kernels.append(K)
    return BridgingSequence(dists, kernels, blocks)


def random_region_chain(rng, S=None, modes=None, stickiness=None):
    """Random reversible chain with a mode/inner/border structure.

    Returns (P, mu, regions). Modes are contiguous blocks; each has at least
    one inner state and possibly border states. Transitions between modes
    are damped by ``stickiness`` so that the chain is metastable.
    """
    S = S or int(rng.integers(4, 10))
    m = modes or int(rng.integers(1, min(3, S // 2) + 1))
    cuts = np.sort(rng.choice(np.arange(1, S), size=m - 1, replace=False)) if m > 1 else []
    mode_of = np.zeros(S, int)
    for c in cuts:
        mode_of[c:] += 1
    is_inner = np.zeros(S, bool)
    for j in range(m):
        idx = np.flatnonzero(mode_of == j)
        k = int(rng.integers(1, idx.size + 1))
        is_inner[rng.choice(idx, size=k, replace=False)] = True
    mu = random_distribution(S, rng)
    A = rng.random((S, S))
    A = (A + A.T) / 2
    damp = stickiness if stickiness is not None else float(rng.uniform(0.0, 0.3))
    A = A * np.where(mode_of[:, None] == mode_of[None, :], 1.0, damp)
    np.fill_diagonal(A, 0.0)
    Q = A / A.sum(axis=1).max()
    P = metropolis_kernel(mu, Q)
    return P, mu, RegionStructure(mode_of, is_inner)
