"""
Evaluators for the asymptotic variance bounds.

Each evaluator returns a BoundReport holding the constants it used, whether
the theorem's precondition holds, the bound (``inf`` when it does not) and,
when available, the exact variance from :func:`asymptotic_variance_exact`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .fk import (BridgingSequence, FiniteDistribution, RegionStructure, TransitionKernel,
                 _cells, _matrix, _weights, absorption_probabilities, asymptotic_variance_exact,
                 metastable_kernel, metastable_t_kernel, mixing_constants, mode_restrictions,
                 operator_gap_l2, restricted_kernel, sup_operator_distance)


class BoundViolation(AssertionError):
    """An exact value exceeded a bound that should dominate it."""


@dataclass(frozen=True)
class BoundReport:
    bound_name: str
    constants: dict
    precondition_ok: bool
    bound_value: float
    exact_value: Optional[float] = None
    notes: tuple = ()

    def __post_init__(self):
        if (self.precondition_ok and self.exact_value is not None
                and not self.exact_value <= self.bound_value + 1e-9):
            raise BoundViolation(f"{self.bound_name}: exact {self.exact_value!r} "
                                 f"exceeds bound {self.bound_value!r}")

    def as_dict(self):
        return {"bound_name": self.bound_name, "constants": self.constants,
                "precondition_ok": self.precondition_ok, "bound_value": self.bound_value,
                "exact_value": self.exact_value, "notes": list(self.notes)}


def global_bound_value(variance, gamma_g, gamma_k):
    """Var / (1 - (1-gamma_K)^2 Gamma_g), or inf when the precondition fails."""
    c = (1.0 - gamma_k) ** 2 * gamma_g
    return (variance / (1.0 - c), True) if c < 1.0 else (math.inf, False)


def bound_global(seq: BridgingSequence, phi):
    """Bound under a global L2 mixing assumption."""
    mc = mixing_constants(seq)
    var = seq.distributions[-1].variance(phi)
    value, ok = global_bound_value(var, mc.gamma_g, mc.gamma_k)
    exact = asymptotic_variance_exact(seq, phi).total
    return BoundReport("global", {"Gamma_g": mc.gamma_g, "gamma_K": mc.gamma_k, "Var": var},
                       ok, value, exact)


def growth_constant_A(seq: BridgingSequence, partition):
    """max over j < k and cells r of mu_k(F_r) / mu_j(F_r)."""
    best = 1.0
    for cell in _cells(partition):
        m = np.array([d.mass(cell) for d in seq.distributions])
        if np.any(m <= 0):
            raise ValueError("partition cell with zero mass")
        for j in range(seq.n):
            best = max(best, float(np.max(m[j + 1:] / m[j])))
    return best


def local_gap(seq: BridgingSequence, partition):
    """gamma_K^loc for a fixed partition; raises LeakyBlockError on leaks."""
    worst = 0.0
    for k in range(1, seq.n + 1):
        for r, cell in enumerate(_cells(partition)):
            block, w = restricted_kernel(seq.kernels[k - 1], seq.distributions[k], cell, k, r)
            worst = max(worst, operator_gap_l2(block, w))
    return 1.0 - worst


def bound_no_mixing(seq: BridgingSequence, partition, phi):
    """Bound for block-preserving kernels on a fixed partition."""
    partition = np.asarray(partition)
    gamma_loc = local_gap(seq, partition)
    gamma_g = mixing_constants(seq).gamma_g
    A = growth_constant_A(seq, partition)
    var = seq.distributions[-1].variance(phi)
    c = (1.0 - gamma_loc) ** 2 * gamma_g
    ok = c < 1.0
    value = (1.0 + seq.n * A * gamma_g / (1.0 - c)) * var if ok else math.inf
    exact = asymptotic_variance_exact(seq, phi).total
    return BoundReport("no-mixing", {"Gamma_g": gamma_g, "gamma_K_loc": gamma_loc, "A": A,
                                     "Var": var, "n": seq.n}, ok, value, exact)


def growth_within_mode(seq: BridgingSequence, partitions=None):
    """B_{k,k+1} = max_r mu_{k+1}(F_k^r) / mu_k(F_k^r) for k = 0..n-1."""
    parts = seq.partitions if partitions is None else _stage_partitions(partitions, seq)
    if parts is None:
        raise ValueError("per-stage partitions are required")
    out = []
    for k in range(seq.n):
        best = -math.inf
        for r, cell in enumerate(_cells(parts[k])):
            mk = seq.distributions[k].mass(cell)
            if mk <= 0:
                raise ValueError(f"cell {r} at stage {k} has zero mass")
            best = max(best, seq.distributions[k + 1].mass(cell) / mk)
        out.append(best)
    return out


def _stage_partitions(partitions, seq):
    p = np.asarray(partitions)
    if p.ndim == 1:
        p = np.tile(p, (seq.n + 1, 1))
    if p.shape != (seq.n + 1, seq.state_count):
        raise ValueError("partitions must give one label per state and stage")
    return p


def bound_with_mixing(seq: BridgingSequence, partitions, metastable, phi):
    """Bound for the multimodal case with mixing between modes.

    Parameters
    ----------
    seq : BridgingSequence
    partitions : label vectors, one per stage (or a single vector)
    metastable : {"exit", "stationary"} or list of n matrices
        The metastable kernels mu_hat_1..mu_hat_n, either given or built
        from the stage partitions with the named alpha rule.
    phi : array_like
        The sup norm is taken of phi - mu_n(phi), since the variance only
        sees the centred function; the k = n term is bounded by the same
        squared sup norm.
    """
    if partitions is None:
        raise ValueError("per-stage partitions are required")
    parts = _stage_partitions(partitions, seq)
    n = seq.n
    if isinstance(metastable, str):
        hats = [metastable_kernel(seq.distributions[j], parts[j], metastable,
                                  seq.kernels[j - 1]).matrix() for j in range(1, n + 1)]
    else:
        hats = [np.asarray(m, dtype=float) for m in metastable]
        if len(hats) != n:
            raise ValueError("need one metastable kernel per stage 1..n")
    gamma_g = mixing_constants(seq).gamma_g
    B = growth_within_mode(seq, parts)
    dist = [sup_operator_distance(seq.kernels[j - 1], hats[j - 1]) for j in range(1, n + 1)]
    phi = np.asarray(phi, dtype=float)
    sup2 = float(np.max(np.abs(phi - seq.distributions[-1].expect(phi)))) ** 2
    factors = [B[j] + gamma_g * dist[j - 1] for j in range(1, n)]  # j = 1..n-1
    terms = []
    for k in range(n):
        terms.append(gamma_g * float(np.prod(factors[k:])) * sup2)
    terms.append(sup2)
    exact = asymptotic_variance_exact(seq, phi).total
    consts = {"Gamma_g": gamma_g, "B": B, "metastable_distance": dist, "phi_sup_centred": math.sqrt(sup2),
              "term_bounds": terms}
    return BoundReport("with-mixing", consts, True, float(sum(terms)), exact,
                       ("k=n term bounded by ||phi - mu_n(phi)||_inf^2",))


@dataclass(frozen=True)
class MetastableQuality:
    stay_term: float
    tv_term: float
    rhs: float
    lhs: float


def stay_in_border_probability(P, regions: RegionStructure, u):
    """max over border x of P(X_s in B for s = 0..u | X_0 = x)."""
    P = _matrix(P)
    border = ~regions.is_inner
    if not np.any(border):
        return 0.0
    Q = P[np.ix_(border, border)]
    h = np.ones(Q.shape[0])
    for _ in range(int(u)):
        h = Q @ h
    return float(h.max())


def bound_metastable_quality(P, t, regions: RegionStructure, mu, check=True):
    """Right-hand side of the metastable approximation bound for P^t.

    Returns the stay-in-border term, the local total variation term, their
    sum and the exact left-hand side sup-norm distance; raises
    BoundViolation if the left side exceeds the right side by more than 1e-9.
    """
    t = int(t)
    if t < 2:
        raise ValueError("t must be at least 2")
    P = _matrix(P)
    stay = stay_in_border_probability(P, regions, t // 2)
    locs = mode_restrictions(regions, mu)
    lo = (t + 1) // 2
    tv = 0.0
    for j, cell in enumerate(regions.inner_cells()):
        rows = np.linalg.matrix_power(P, lo)[cell] if lo > 0 else np.eye(P.shape[0])[cell]
        for r in range(lo, t + 1):
            tv = max(tv, float(0.5 * np.max(np.abs(rows - locs[j]).sum(axis=1))))
            rows = rows @ P
    rhs = stay + 2.0 * tv
    Pt = np.linalg.matrix_power(P, t)
    lhs = sup_operator_distance(Pt, metastable_t_kernel(P, t, regions, mu))
    if check and lhs > rhs + 1e-9:
        raise BoundViolation(f"metastable quality: lhs {lhs!r} > rhs {rhs!r}")
    return MetastableQuality(stay, 2.0 * tv, rhs, lhs)


# Counterexample instance with and without mixing between two modes.
CE_MU1 = (0.1319, 0.1778, 0.0638, 0.6265)
CE_K1 = ((0.5520, 0.1858, 0.0413, 0.2209),
         (0.1378, 0.7837, 0.0769, 0.0016),
         (0.0853, 0.2145, 0.6311, 0.0691),
         (0.0465, 0.0004, 0.0070, 0.9460))
CE_K1_NOMIX = ((0.8142, 0.1858, 0.0, 0.0),
               (0.1378, 0.8622, 0.0, 0.0),
               (0.0, 0.0, 0.9309, 0.0691),
               (0.0, 0.0, 0.0070, 0.9930))
CE_PHI = (0.3973, -0.5697, -0.3222, 0.1109)
CE_PARTITION = (0, 0, 1, 1)
CE_INVARIANCE_TOL = 5e-4


@dataclass(frozen=True)
class Counterexample:
    mixing: BridgingSequence
    no_mixing: BridgingSequence
    phi: np.ndarray
    partition: np.ndarray
    row_factors: dict = field(default_factory=dict)


def counterexample_instance():
    """Two-stage, four-state instance where mixing increases the variance.

    The printed values are rounded to four decimals; the first distribution
    and kernel rows are renormalised and the renormalisation factors kept.
    """
    mu1 = np.array(CE_MU1)
    mu1_scale = 1.0 / mu1.sum()
    mu1 = mu1 * mu1_scale
    mu0 = np.full(4, 0.25)
    out, factors = [], {"mu_1": mu1_scale}
    for name, K in (("K_1", CE_K1), ("K_1_nomix", CE_K1_NOMIX)):
        K = np.array(K)
        f = 1.0 / K.sum(axis=1)
        factors[name] = f.tolist()
        out.append(BridgingSequence([mu0, mu1], [K * f[:, None]], CE_PARTITION,
                                    invariance_tol=CE_INVARIANCE_TOL))
    return Counterexample(out[0], out[1], np.array(CE_PHI), np.array(CE_PARTITION), factors)
