"""
Barycentric geometry of the three-colour magnetisation simplex.

Points are colour ratios s = (s_1, s_2, s_3). Four centres mark the modes of
the critical magnetisation law: three near the corners and the centre of the
simplex.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SQRT3 = math.sqrt(3.0)
CENTERS = np.array([[2 / 3, 1 / 6, 1 / 6],
                    [1 / 6, 2 / 3, 1 / 6],
                    [1 / 6, 1 / 6, 2 / 3],
                    [1 / 3, 1 / 3, 1 / 3]])
CENTERS.setflags(write=False)
DEFAULT_RHO = 1e-6
DEFAULT_J0 = 10 ** 7

# piecewise linear drift test function, knots in d_C
PHI_KNOTS_X = np.array([0.0, SQRT3 / 24, SQRT3 / 12, SQRT3 / 6])
PHI_KNOTS_Y = np.array([0.0, 0.002, 0.0, 0.002])


@dataclass(frozen=True)
class BarycentricGeometry:
    """Centres, unit moves and the region scale rho."""
    rho: float = DEFAULT_RHO
    j0: int = DEFAULT_J0

    centers = CENTERS

    @staticmethod
    def basis():
        """Planar corners e_1, e_2, e_3 of a unit-side triangle, each of length sqrt(3)/3."""
        ang = np.pi / 2 + 2 * np.pi * np.arange(3) / 3
        return (SQRT3 / 3) * np.column_stack([np.cos(ang), np.sin(ang)])

    @classmethod
    def embed(cls, s):
        """C(s) = s_1 e_1 + s_2 e_2 + s_3 e_3."""
        return np.asarray(s, dtype=float) @ cls.basis()


def distance(s, t):
    """d(s, t) = |s - t|_2 / sqrt(2); broadcasts over leading axes."""
    s, t = np.asarray(s, dtype=float), np.asarray(t, dtype=float)
    return np.sqrt(np.sum((s - t) ** 2, axis=-1) / 2.0)


def center_distances(s):
    """Distances to the four centres, shape (..., 4)."""
    s = np.asarray(s, dtype=float)
    return distance(s[..., None, :], CENTERS)


def drift_phi(t):
    """Piecewise linear function with knots (0,0), (r/24,.002), (r/12,0), (r/6,.002), r = sqrt(3)."""
    return np.interp(t, PHI_KNOTS_X, PHI_KNOTS_Y)


def center_geometry(s):
    """(d_C(s), index of nearest centre in 1..4, drift_phi(d_C(s)))."""
    dc = center_distances(s)
    idx = np.argmin(dc, axis=-1)
    d = np.min(dc, axis=-1)
    if np.ndim(d) == 0:
        return float(d), int(idx) + 1, float(drift_phi(d))
    return d, idx + 1, drift_phi(d)


def mode_of_ratios(s):
    """Strict-majority rule: mode i in 1..3 when s_i > 1/2, else 4."""
    s = np.asarray(s, dtype=float)
    big = s > 0.5
    return np.where(big.any(axis=-1), np.argmax(big, axis=-1) + 1, 4)


def mode_of_counts(counts, j=None):
    """Mode of integer prefix counts (exact comparison 2 n_i > j)."""
    counts = np.asarray(counts)
    j = counts.sum(axis=-1) if j is None else j
    big = 2 * counts > np.asarray(j)[..., None]
    return np.where(big.any(axis=-1), np.argmax(big, axis=-1) + 1, 4)


def _within(counts, j, mode, lo, hi):
    s = np.asarray(counts, dtype=float) / np.asarray(j, dtype=float)[..., None]
    dev = s - CENTERS[np.asarray(mode) - 1]
    return np.all((dev >= lo) & (dev <= hi), axis=-1)


def mode_and_region(counts, j=None, rho=DEFAULT_RHO, j0=DEFAULT_J0):
    """Mode index and inner flag for prefix colour counts of length j.

    For j <= j0 there is a single mode (index 1) and every state is inner.
    Otherwise the mode follows the strict-majority rule, and a state is inner
    when every coordinate deviation from the mode centre lies in
    [-rho/4, rho/2].
    """
    counts = np.asarray(counts)
    j = counts.sum(axis=-1) if j is None else np.broadcast_to(j, counts.shape[:-1])
    mode = mode_of_counts(counts, j)
    inner = _within(counts, j, mode, -rho / 4, rho / 2)
    single = j <= j0
    mode = np.where(single, 1, mode)
    inner = np.where(single, True, inner)
    if counts.ndim == 1:
        return int(mode), bool(inner)
    return mode, inner


def in_lambda(counts, mode, rho, j=None):
    """Enlarged region Lambda: deviations from the mode centre in [-rho, 2 rho]."""
    counts = np.asarray(counts)
    j = counts.sum(axis=-1) if j is None else j
    return _within(counts, j, mode, -rho, 2 * rho)


def in_inner(counts, mode, rho, j=None):
    counts = np.asarray(counts)
    j = counts.sum(axis=-1) if j is None else j
    return _within(counts, j, mode, -rho / 4, rho / 2)
