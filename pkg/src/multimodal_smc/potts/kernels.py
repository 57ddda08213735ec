"""
Compiled inner loops for spin and magnetisation chains.

Colours are coded 0, 1, 2. Every function takes a numpy Generator so the
random streams stay under the caller's control.
"""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def _draw_colour(w0, w1, w2, u):
    x = u * (w0 + w1 + w2)
    if x < w0:
        return 0
    if x < w0 + w1:
        return 1
    return 2


@njit(cache=True)
def glauber_sweeps(spins, counts, k, steps, expo, rng):
    """Run ``steps`` heat-bath updates on spins[:, :k] of every row in place.

    ``counts`` holds the colour counts of the first k spins per row and
    ``expo[n] = exp(2 beta n / k)``.
    """
    N = spins.shape[0]
    for p in range(N):
        c = counts[p]
        for _ in range(steps):
            site = int(rng.random() * k)
            old = spins[p, site]
            c[old] -= 1
            new = _draw_colour(expo[c[0]], expo[c[1]], expo[c[2]], rng.random())
            c[new] += 1
            spins[p, site] = new


@njit(cache=True)
def magnetisation_step(n, M, expo, rng):
    """One Glauber step seen through the colour counts n (modified in place)."""
    x = rng.random() * M
    if x < n[0]:
        i = 0
    elif x < n[0] + n[1]:
        i = 1
    else:
        i = 2
    n[i] -= 1
    j = _draw_colour(expo[n[0]], expo[n[1]], expo[n[2]], rng.random())
    n[j] += 1


@njit(cache=True)
def _dc(n, M, centers):
    best = 1e300
    for c in range(centers.shape[0]):
        acc = 0.0
        for a in range(3):
            d = n[a] / M - centers[c, a]
            acc += d * d
        best = min(best, math.sqrt(acc / 2.0))
    return best


@njit(cache=True)
def hitting_times(starts, M, expo, radius, max_steps, centers, rng):
    """First time d_C <= radius for each start (counts rows); -1 if not reached."""
    R = starts.shape[0]
    out = np.empty(R, np.int64)
    n = np.empty(3, np.int64)
    for r in range(R):
        for a in range(3):
            n[a] = starts[r, a]
        t = 0
        out[r] = -1
        while True:
            if _dc(n, M, centers) <= radius:
                out[r] = t
                break
            if t >= max_steps:
                break
            magnetisation_step(n, M, expo, rng)
            t += 1
    return out


@njit(cache=True)
def escape_runs(starts, M, expo, radius, steps, centers, rng):
    """Per start, first step at which d_C > radius within ``steps``; -1 if never."""
    R = starts.shape[0]
    out = np.empty(R, np.int64)
    n = np.empty(3, np.int64)
    for r in range(R):
        for a in range(3):
            n[a] = starts[r, a]
        out[r] = -1
        for t in range(1, steps + 1):
            magnetisation_step(n, M, expo, rng)
            if _dc(n, M, centers) > radius:
                out[r] = t
                break
    return out


@njit(cache=True)
def coupled_glauber(a, b, expo, t_max, rng):
    """Site-matched coupling of two Glauber chains with equal colour counts.

    Both chains share the updated site (or a matched site of the same colour
    in the second chain) and the new colour. Returns (tau, monotone) where
    tau is the coupling time (-1 if beyond t_max) and monotone records that
    the Hamming distance never increased. Arrays are modified in place.
    """
    M = a.shape[0]
    n = np.zeros(3, np.int64)
    D = 0
    for l in range(M):
        n[a[l]] += 1
        if a[l] != b[l]:
            D += 1
    monotone = True
    if D == 0:
        return 0, monotone
    for t in range(1, t_max + 1):
        site = int(rng.random() * M)
        i = a[site]
        n[i] -= 1
        z = _draw_colour(expo[n[0]], expo[n[1]], expo[n[2]], rng.random())
        n[z] += 1
        if a[site] == b[site]:
            a[site] = z
            b[site] = z
        else:
            cnt = 0
            for l in range(M):
                if b[l] == i and b[l] != a[l]:
                    cnt += 1
            pick = int(rng.random() * cnt)
            other = -1
            for l in range(M):
                if b[l] == i and b[l] != a[l]:
                    if pick == 0:
                        other = l
                        break
                    pick -= 1
            before = int(a[site] != b[site]) + int(a[other] != b[other])
            a[site] = z
            b[other] = z
            after = int(a[site] != b[site]) + int(a[other] != b[other])
            if after > before:
                monotone = False
            D += after - before
        if D == 0:
            return t, monotone
    return -1, monotone
