"""
Exact and simulated checks of the Potts model propositions and lemmas.

Every exact evaluator works on the magnetisation lattice; simulations run the
compiled magnetisation or spin chains with explicit RNG streams.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy import ndimage

from ..smc import stream
from . import kernels
from .geometry import (CENTERS, SQRT3, center_distances, drift_phi, in_inner, in_lambda,
                       mode_of_counts)
from .model import (BETA_C, PottsParams, bridging_builder, conditional_table, lattice,
                    magnetisation_log_pmf, prefix_log_pmf_from_larger, transition_probabilities)
from .transport import transport_simplex


@dataclass(frozen=True)
class SeriesReport:
    """Named equal-length columns plus a summary dictionary."""
    columns: dict
    summary: dict = field(default_factory=dict)

    def __post_init__(self):
        lens = {len(v) for v in self.columns.values()}
        if len(lens) > 1:
            raise ValueError("columns must have equal length")

    def header(self):
        return list(self.columns)

    def rows(self):
        cols = [np.asarray(v) for v in self.columns.values()]
        return [tuple(c[i] for c in cols) for i in range(len(cols[0]) if cols else 0)]

    def __len__(self):
        return len(next(iter(self.columns.values()))) if self.columns else 0


def trend_slope(x, y):
    """Least-squares slope of y on x."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    if x.size < 2:
        return 0.0
    return float(np.polyfit(x, y, 1)[0])


def _neighbours(counts):
    """Counts after each move i -> j, shape (..., 3, 3, 3); diagonal = stay."""
    n = np.asarray(counts, dtype=np.int64)
    out = np.repeat(np.repeat(n[..., None, None, :], 3, axis=-3), 3, axis=-2)
    for i in range(3):
        for j in range(3):
            if i != j:
                out[..., i, j, i] -= 1
                out[..., i, j, j] += 1
    return out


# growth within mode ----------------------------------------------------------

def growth_constant(j, beta=BETA_C):
    """B_{j,j+1} for the interpolation sequence with strict-majority modes on the prefix."""
    if j == 0:
        return 1.0, 1.0
    pj = magnetisation_log_pmf(PottsParams(j, beta))
    counts, pnext = prefix_log_pmf_from_larger(magnetisation_log_pmf(PottsParams(j + 1, beta)))
    modes = mode_of_counts(counts)
    p = pj.p
    ratios = []
    for m in (1, 2, 3, 4):
        cell = modes == m
        mass = p[cell].sum()
        if mass > 0:
            ratios.append(pnext[cell].sum() / mass)
    return max(ratios), min(ratios)


def growth_constants_series(j_max, beta=BETA_C):
    """B_{j,j+1} for j = 0..j_max-1 and the normalised excess (B-1) j^1.5 / log(j)^1.5."""
    if j_max < 3:
        raise ValueError("j_max must be at least 3")
    js, B, Bmin = [], [], []
    for j in range(j_max):
        b, bmin = growth_constant(j, beta)
        js.append(j)
        B.append(b)
        Bmin.append(bmin)
    js, B = np.array(js), np.array(B)
    ratio = np.full(js.size, np.nan)
    sel = js >= 2
    ratio[sel] = (B[sel] - 1.0) / (np.log(js[sel]) ** 1.5 / js[sel] ** 1.5)
    rj, rv = js[sel], ratio[sel]
    top = max(10, j_max // 10)
    last = rj > top
    summary = {"B_01": float(B[0]), "B_12": float(B[1]), "min_B": float(np.min(Bmin)),
               "ratio_max": float(rv.max()), "ratio_argmax": int(rj[np.argmax(rv)]),
               "last_decade_slope": trend_slope(rj[last], rv[last]) if last.sum() >= 2 else 0.0}
    return SeriesReport({"j": rj, "B": B[sel], "ratio": rv}, summary)


# drift and jump variance -----------------------------------------------------

def _step_moments(M, beta):
    counts = lattice(M)
    P = transition_probabilities(counts, beta)
    stay = 1.0 - P.sum(axis=(-1, -2))
    nb = _neighbours(counts)
    dc0 = center_distances(counts / M).min(axis=-1)
    dc1 = center_distances(nb / M).min(axis=-1)
    # every diagonal entry of nb is the current state; put the stay mass on one of them
    probs = P.copy()
    probs[:, 0, 0] = stay
    delta = dc1 - dc0[:, None, None]
    mean = (probs * delta).sum(axis=(-1, -2))
    second = (probs * delta ** 2).sum(axis=(-1, -2))
    return counts, dc0, mean, second


@dataclass(frozen=True)
class DriftResult:
    M: int
    worst_slack: float
    witness: tuple
    report: SeriesReport


def drift_verify(M, beta=BETA_C):
    """Worst slack of the drift bound over all lattice states with d_C > 1/M.

    slack = E[d_C(S(1)) - d_C(S(0))] + phi(d_C)/M - (8 + 1/(2 (d_C - 1/M))) / M^2,
    computed exactly from the one-step transition law; the lemma says slack <= 0.
    """
    if M < 12:
        raise ValueError("M must be at least 12")
    counts, dc, mean, _ = _step_moments(M, beta)
    sel = dc > 1.0 / M
    d = dc[sel]
    rhs = -drift_phi(d) / M + (8.0 + 1.0 / (2.0 * (d - 1.0 / M))) / M ** 2
    slack = mean[sel] - rhs
    c = counts[sel]
    w = int(np.argmax(slack))
    rep = SeriesReport({"n1": c[:, 0], "n2": c[:, 1], "n3": c[:, 2], "d_C": d,
                        "drift": mean[sel], "bound": rhs, "slack": slack},
                       {"M": M, "worst_slack": float(slack[w]), "violations": int((slack > 0).sum())})
    return DriftResult(M, float(slack[w]), tuple(int(v) for v in c[w]), rep)


@dataclass(frozen=True)
class JumpVarianceResult:
    M: int
    min_scaled: float
    argmin: tuple
    report: SeriesReport


def jump_variance_min(M, beta=BETA_C):
    """min over states of Var(d_C(S(1)) | S(0) = s) * M^2, with the argmin state."""
    counts, dc, mean, second = _step_moments(M, beta)
    var = np.maximum(second - mean ** 2, 0.0) * M ** 2
    w = int(np.argmin(var))
    rep = SeriesReport({"n1": counts[:, 0], "n2": counts[:, 1], "n3": counts[:, 2], "var_M2": var},
                       {"M": M, "min_var_M2": float(var[w]),
                        "argmin": [int(v) for v in counts[w]]})
    return JumpVarianceResult(M, float(var[w]), tuple(int(v) for v in counts[w]), rep)


def jump_variance_floor(M_grid, v_min=0.001, beta=BETA_C):
    """Smallest M in the grid from which min Var * M^2 >= v_min holds for the rest of the grid."""
    vals = [jump_variance_min(M, beta).min_scaled for M in M_grid]
    floor = None
    for M, v in zip(reversed(list(M_grid)), reversed(vals)):
        if v < v_min:
            break
        floor = M
    return floor, vals


# curvature -------------------------------------------------------------------

def lambda_box(M, rho, mode):
    """Integer count ranges (lo, hi) per colour for the enlarged region Lambda^(mode)."""
    c = CENTERS[mode - 1]
    lo = np.ceil(M * (c - rho) - 1e-9).astype(np.int64)
    hi = np.floor(M * (c + 2 * rho) + 1e-9).astype(np.int64)
    return lo, hi


def _restricted_row(x, M, beta, mode, rho):
    """Support and probabilities of the Lambda-restricted one-step law from x."""
    P = transition_probabilities(x.astype(float), beta)
    supp = [x.copy()]
    probs = [0.0]
    stay = 1.0 - P.sum()
    for i in range(3):
        for j in range(3):
            if i == j or P[i, j] <= 0:
                continue
            y = x.copy()
            y[i] -= 1
            y[j] += 1
            if in_lambda(y, mode, rho, M):
                supp.append(y)
                probs.append(P[i, j])
            else:
                stay += P[i, j]
    probs[0] = stay
    return np.array(supp), np.array(probs)


def pair_curvature(x, y, M, beta, mode, rho):
    """kappa(x, y) = 1 - W_1 / d_Lambda(x, y) for the Lambda-restricted chain."""
    sx, px = _restricted_row(np.asarray(x, np.int64), M, beta, mode, rho)
    sy, py = _restricted_row(np.asarray(y, np.int64), M, beta, mode, rho)
    cost = 0.5 * np.abs(sx[:, None, :] - sy[None, :, :]).sum(axis=-1)
    w1 = transport_simplex(px, py / py.sum() * px.sum(), cost)[0]
    d = 0.5 * np.abs(np.asarray(x) - np.asarray(y)).sum()
    return 1.0 - w1 / d


def _lambda_points(M, rho, mode):
    lo, hi = lambda_box(M, rho, mode)
    a = np.arange(lo[0], hi[0] + 1)
    b = np.arange(lo[1], hi[1] + 1)
    A, B = np.meshgrid(a, b, indexing="ij")
    C = M - A - B
    pts = np.column_stack([A.ravel(), B.ravel(), C.ravel()])
    keep = (pts[:, 2] >= lo[2]) & (pts[:, 2] <= hi[2])
    pts = pts[keep]
    return pts[in_lambda(pts, mode, rho, M)]


@dataclass(frozen=True)
class CurvatureResult:
    M: int
    rho: float
    mode: int
    pairs: int
    min_kappa_M: float
    witness: tuple


def curvature_check(M, rho, mode, samples=10_000, exhaustive=False, seed=0, beta=BETA_C):
    """Minimum coarse Ricci curvature (times M) over adjacent pairs in Lambda^(mode)."""
    pts = _lambda_points(M, rho, mode)
    if len(pts) < 2:
        raise ValueError("region Lambda contains fewer than two lattice points; increase M*rho")
    moves = [(i, j) for i in range(3) for j in range(3) if i != j]
    pairs = []
    if exhaustive:
        for x in pts:
            for i, j in moves:
                y = x.copy()
                y[i] -= 1
                y[j] += 1
                if in_lambda(y, mode, rho, M) and tuple(x) < tuple(y):
                    pairs.append((x, y))
    else:
        rng = stream(seed, 0, 0, 7)
        tries = 0
        while len(pairs) < samples:
            tries += 1
            if tries > 100 * samples:
                raise ValueError("could not sample adjacent pairs inside Lambda")
            x = pts[rng.integers(len(pts))]
            i, j = moves[rng.integers(6)]
            y = x.copy()
            y[i] -= 1
            y[j] += 1
            if in_lambda(y, mode, rho, M):
                pairs.append((x, y))
    best, wit = math.inf, None
    for x, y in pairs:
        k = pair_curvature(x, y, M, beta, mode, rho) * M
        if k < best:
            best, wit = k, (tuple(int(v) for v in x), tuple(int(v) for v in y))
    return CurvatureResult(M, rho, mode, len(pairs), float(best), wit)


# coupling --------------------------------------------------------------------

@dataclass(frozen=True)
class CouplingResult:
    M: int
    times: tuple
    tail: tuple
    sigma: tuple
    bound: tuple
    monotone: bool
    tau: np.ndarray

    @property
    def ok(self):
        return self.monotone and all(p <= b + 4 * s for p, b, s in zip(self.tail, self.bound, self.sigma))


def coupling_bound(M, t):
    return 0.5 * M * math.exp(-t / (9.0 * M))


def coupling_tail(M, times, replicates, seed, beta=BETA_C, pairs=None):
    """Empirical P(tau > t) of the site-matched coupling versus (M/2) exp(-t / (9M)).

    Parameters
    ----------
    pairs : sequence of (sigma, sigma_tilde), optional
        Initial configurations (colours 0..2) with equal colour counts; by
        default the second is a random permutation of a uniform first one.
    """
    times = tuple(int(t) for t in np.atleast_1d(times))
    t_max = max(times)
    expo = conditional_table(M, beta)
    tau = np.empty(replicates, np.int64)
    monotone = True
    for r in range(replicates):
        rng = stream(seed, r, 0, 11)
        if pairs is None:
            a = rng.integers(0, 3, size=M).astype(np.int8)
            b = rng.permutation(a)
        else:
            a, b = (np.array(v, dtype=np.int8) for v in pairs[r])
        if a.size != M or b.size != M:
            raise ValueError("configurations must have length M")
        if np.any(np.bincount(a, minlength=3) != np.bincount(b, minlength=3)):
            raise ValueError("initial pair must have equal magnetisation")
        t, mono = kernels.coupled_glauber(a, b, expo, t_max, rng)
        tau[r] = t if t >= 0 else t_max + 1
        monotone &= bool(mono)
    tail = tuple(float(np.mean(tau > t)) for t in times)
    sigma = tuple(math.sqrt(max(p * (1 - p), 1.0 / replicates) / replicates) for p in tail)
    bound = tuple(coupling_bound(M, t) for t in times)
    return CouplingResult(M, times, tail, sigma, bound, monotone, tau)


# hitting and escape ------------------------------------------------------------

def nearest_lattice_point(s, M):
    """Counts closest to M*s summing to M (largest remainder rounding)."""
    x = np.asarray(s, float) * M
    base = np.floor(x).astype(np.int64)
    short = M - base.sum()
    order = np.argsort(-(x - base), kind="stable")
    base[order[:short]] += 1
    return base


@dataclass(frozen=True)
class HittingResult:
    M_grid: tuple
    medians: tuple
    quantiles: tuple
    slope: float
    r_squared: float
    unfinished: int


def hitting_experiment(M_grid, rho, replicates, seed, start=(0.5, 0.5, 0.0), beta=BETA_C,
                       max_steps_factor=200.0):
    """Time for the magnetisation chain to reach d_C <= rho/2 from ``start``.

    Medians are regressed on M log M across the grid.
    """
    med, qs, unfinished = [], [], 0
    for M in M_grid:
        starts = np.tile(nearest_lattice_point(start, M), (replicates, 1))
        max_steps = int(max_steps_factor * M * math.log(M))
        tau = kernels.hitting_times(starts, M, conditional_table(M, beta), rho / 2, max_steps,
                                    np.ascontiguousarray(CENTERS), stream(seed, M, 0, 13))
        unfinished += int((tau < 0).sum())
        tau = np.where(tau < 0, max_steps, tau).astype(float)
        med.append(float(np.median(tau)))
        qs.append(tuple(float(q) for q in np.quantile(tau, [0.1, 0.5, 0.9])))
    x = np.array([M * math.log(M) for M in M_grid])
    y = np.array(med)
    if len(M_grid) >= 2:
        coef = np.polyfit(x, y, 1)
        fit = np.polyval(coef, x)
        ss = np.sum((y - y.mean()) ** 2)
        r2 = 1.0 - np.sum((y - fit) ** 2) / ss if ss > 0 else 1.0
        slope = float(coef[0])
    else:
        slope, r2 = float("nan"), float("nan")
    return HittingResult(tuple(M_grid), tuple(med), tuple(qs), slope, float(r2), unfinished)


@dataclass(frozen=True)
class EscapeResult:
    M: int
    rho: float
    steps: int
    replicates: int
    escapes: int
    escape_times: np.ndarray
    paper_bound: float


def escape_experiment(M, rho, steps, replicates, seed, center=1, beta=BETA_C):
    """Count runs leaving d_C <= rho*sqrt(3) within ``steps`` after starting near a centre.

    The start is the lattice point nearest the centre, which must satisfy
    d_C <= rho*sqrt(3)/2. The bound steps^2 exp(-0.005 rho^2 M) is reported alongside.
    """
    x0 = nearest_lattice_point(CENTERS[center - 1], M)
    if center_distances(x0 / M).min() > rho * SQRT3 / 2:
        raise ValueError("no lattice point within rho*sqrt(3)/2 of the centre at this M")
    starts = np.tile(x0, (replicates, 1))
    t = kernels.escape_runs(starts, M, conditional_table(M, beta), rho * SQRT3, int(steps),
                            np.ascontiguousarray(CENTERS), stream(seed, M, 0, 17))
    bound = steps ** 2 * math.exp(-0.005 * rho ** 2 * M)
    return EscapeResult(M, rho, int(steps), replicates, int((t >= 0).sum()), t, bound)


def metastability_experiments(M, mode, replicates, seed, rho=0.02, steps=100_000, **kw):
    if mode == "hitting":
        return hitting_experiment(np.atleast_1d(M), rho, replicates, seed, **kw)
    if mode == "escape":
        return escape_experiment(int(M), rho, steps, replicates, seed, **kw)
    raise ValueError("mode must be 'hitting' or 'escape'")


# Riemann sums ----------------------------------------------------------------

def gauss_moment(m):
    """Integral of exp(-x^2) x^m over the real line."""
    return 0.0 if m % 2 else math.gamma((m + 1) / 2)


def riemann_gauss(m, R, delta):
    """Psi_m(R, delta) = sum_k exp(-(k+delta)^2 R^2) (k+delta)^m R^(m+1) and its error.

    Terms below 1e-18 times the largest term are dropped.
    """
    if R <= 0:
        raise ValueError("R must be positive")
    if m < 0:
        raise ValueError("m must be nonnegative")
    peak = math.sqrt(m / 2.0) / R
    K = int(math.ceil(peak + (math.sqrt(m / 2.0) + 7.0) / R)) + 2
    x = np.arange(-K, K + 1) + delta
    xr = x * R
    terms = np.exp(-xr ** 2) * xr ** m * R
    big = np.abs(terms).max()
    terms = terms[np.abs(terms) >= 1e-18 * big]
    psi = math.fsum(terms.tolist())
    return psi, abs(psi - gauss_moment(m))


def riemann_gauss_error_mp(m, R, delta, dps=None):
    """|Psi_m - Z_m| in multiprecision, for errors far below double precision.

    Gaussian factors are advanced by the ratio recurrence
    exp(-(x+R)^2) = exp(-x^2) exp(-2xR) exp(-R^2), so each term costs a few
    multiplications.
    """
    R = mpmath.mpf(R)
    if dps is None:
        dps = int(float(mpmath.pi ** 2 / R ** 2) / math.log(10)) + 60
    with mpmath.workdps(dps):
        R = mpmath.mpf(R)
        d = mpmath.mpf(delta)
        eps = mpmath.mpf(10) ** (-dps)
        q = mpmath.exp(-2 * R * R)
        peak = int(math.sqrt(m / 2.0) / float(R))
        edge = math.sqrt(m / 2.0) + 1.0
        total = mpmath.mpf(0)
        for start, step in ((peak, 1), (peak - 1, -1)):
            # walk away from the peak until terms drop below 10^-dps
            x = (start + d) * R
            g = mpmath.exp(-x * x)
            ratio = mpmath.exp(-(2 * step * x * R + R * R))
            while True:
                term = g * x ** m * R if m else g * R
                total += term
                if abs(x) > edge and abs(term) < eps:
                    break
                g *= ratio
                ratio *= q
                x += step * R
        z = mpmath.mpf(0) if m % 2 else mpmath.gamma(mpmath.mpf(m + 1) / 2)
        return abs(total - z)


def riemann_gauss_poisson_error(R, delta, terms=50):
    """Exact error of Psi_0 by Poisson summation: 2 sqrt(pi) sum_k exp(-pi^2 k^2 / R^2) cos(2 pi k delta)."""
    with mpmath.workdps(50):
        R = mpmath.mpf(R)
        s = mpmath.mpf(0)
        for k in range(1, terms + 1):
            s += mpmath.exp(-(mpmath.pi * k / R) ** 2) * mpmath.cos(2 * mpmath.pi * k * delta)
        return 2 * mpmath.sqrt(mpmath.pi) * s


# asymptotic log-likelihood -------------------------------------------------------

def asymptotic_loglik(s, form="quadratic", beta=BETA_C):
    """sum_i (beta s_i^2 - s_i log s_i); ``form="verbatim"`` gives beta * sum(s_i^3 - s_i log s_i)."""
    s = np.asarray(s, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = np.where(s > 0, s * np.log(np.where(s > 0, s, 1.0)), 0.0)
    if form == "quadratic":
        return (beta * s ** 2 - ent).sum(axis=-1)
    if form == "verbatim":
        return beta * (s ** 3 - ent).sum(axis=-1)
    raise ValueError("form must be 'quadratic' or 'verbatim'")


@dataclass(frozen=True)
class LoglikResult:
    resolution: int
    best_c: float
    witness: tuple
    center_values: tuple
    max_gap: float


def asymptotic_loglik_check(resolution=1000, form="quadratic", beta=BETA_C):
    """Largest c with L(s) <= L(C_1) - c d_C(s)^2 on a simplex grid."""
    if resolution < 100:
        raise ValueError("resolution must be at least 100")
    pts = lattice(resolution) / resolution
    L = asymptotic_loglik(pts, form, beta)
    Lc = asymptotic_loglik(CENTERS, form, beta)
    top = Lc[0]
    dc = center_distances(pts).min(axis=-1)
    sel = dc > 1e-12
    ratio = (top - L[sel]) / dc[sel] ** 2
    w = int(np.argmin(ratio))
    c = float(ratio[w])
    gap = float(np.max(L - (top - c * dc ** 2)))
    return LoglikResult(resolution, c, tuple(float(v) for v in pts[sel][w]),
                        tuple(float(v) for v in Lc), gap)


# local total variation -------------------------------------------------------------

def local_tv(M, rho, beta=BETA_C):
    """Per mode: d_TV(mu restricted to Lambda, mu restricted to the mode) and the border mass in Lambda.

    Lambda is intersected with its mode, which changes nothing while Lambda
    fits inside the mode and makes the two restrictions agree for large rho.
    """
    pmf = magnetisation_log_pmf(PottsParams(M, beta))
    p = pmf.p
    modes = mode_of_counts(pmf.counts)
    tv, border = [], []
    for m in (1, 2, 3, 4):
        cell = modes == m
        # Lambda lies inside its mode for small rho; intersecting keeps that true for any rho
        lam = in_lambda(pmf.counts, m, rho, M) & cell
        if not lam.any():
            raise ValueError(f"region Lambda^({m}) is empty at M={M}, rho={rho}")
        pl = np.where(lam, p, 0.0)
        pl /= pl.sum()
        pf = np.where(cell, p, 0.0)
        pf /= pf.sum()
        tv.append(0.5 * float(np.abs(pl - pf).sum()))
        inner = in_inner(pmf.counts, m, rho, M)
        border.append(float(pl[~inner].sum()))
    return np.array(tv), np.array(border)


def local_tv_profile(M_grid, rho, beta=BETA_C):
    """Local TV series over an M grid with a fitted power-law exponent per mode."""
    tvs, borders = [], []
    for M in M_grid:
        t, b = local_tv(M, rho, beta)
        tvs.append(t)
        borders.append(b)
    tvs, borders = np.array(tvs), np.array(borders)
    logM = np.log(np.asarray(M_grid, float))
    expo = []
    for m in range(4):
        y = tvs[:, m]
        expo.append(float(np.polyfit(logM, np.log(y), 1)[0]) if np.all(y > 0) and len(M_grid) > 1
                    else float("nan"))
    cols = {"M": np.asarray(M_grid)}
    for m in range(4):
        cols[f"tv_{m + 1}"] = tvs[:, m]
        cols[f"border_{m + 1}"] = borders[:, m]
    return SeriesReport(cols, {"rho": rho, "exponents": expo})


# contour grids and local maxima ------------------------------------------------------

def contour_grid(beta, M, resolution=None):
    """Exact log pmf on the lattice, optionally thinned to every ``M // resolution`` point."""
    pmf = magnetisation_log_pmf(PottsParams(M, beta))
    c = pmf.counts
    keep = np.ones(len(c), bool)
    if resolution and resolution < M:
        step = max(1, M // int(resolution))
        keep = (c[:, 0] % step == 0) & (c[:, 1] % step == 0)
    s = c[keep] / M
    return SeriesReport({"s1": s[:, 0], "s2": s[:, 1], "s3": s[:, 2], "log_pmf": pmf.logp[keep]},
                        {"beta_tilde": beta, "M": M})


def hex_footprint(radius):
    """Lattice offsets (d1, d2) within hexagonal distance ``radius``."""
    d = np.arange(-radius, radius + 1)
    d1, d2 = np.meshgrid(d, d, indexing="ij")
    return (np.abs(d1) + np.abs(d2) + np.abs(d1 + d2)) / 2 <= radius


# adjacency of (n1, n2) cells on the hexagonal lattice
_HEX_STRUCTURE = np.array([[0, 1, 1], [1, 1, 1], [1, 1, 0]])


def count_local_maxima(beta, M, radius=2, tie_tol=1e-9):
    """Number of local-maximum regions of the lattice log pmf (plateaus merged).

    A state is a local max when no lattice state within hexagonal distance
    ``radius`` is larger (up to ``tie_tol``); adjacent maxima form one region.
    With radius 1 (the six single-spin moves) saddle points whose ascent
    direction is a two-spin move such as (-1, -1, 2) are reported as maxima,
    so the default looks two moves out.

    Returns
    -------
    (int, list of ratio vectors at the region centroids)
    """
    g = magnetisation_log_pmf(PottsParams(M, beta)).grid()
    top = ndimage.maximum_filter(g, footprint=hex_footprint(radius), mode="constant", cval=-np.inf)
    ismax = np.isfinite(g) & (g >= top - tie_tol)
    lab, n = ndimage.label(ismax, structure=_HEX_STRUCTURE)
    cents = ndimage.center_of_mass(ismax, lab, range(1, n + 1))
    return n, [np.array([c[0], c[1], M - c[0] - c[1]]) / M for c in cents]


# Potts SMC end-to-end ----------------------------------------------------------------

def mode_indicator(mode):
    """Indicator of a strict-majority mode of the whole configuration."""
    from .model import spin_counts

    def phi(spins):
        return (mode_of_counts(spin_counts(spins)) == mode).astype(float)
    return phi


def potts_smc_mode_masses(M, N, seed, replicate=0, c1=1.0, beta=BETA_C):
    """Final-stage mode masses from one interpolation SMC run, with exact values."""
    from ..smc import run_smc
    from .model import spin_counts
    b = bridging_builder("interpolation", PottsParams(M, beta), c1=c1)
    res = run_smc(b, N, seed, replicate=replicate)
    modes = mode_of_counts(spin_counts(res.ensemble.particles))
    est = np.array([np.mean(modes == m) for m in (1, 2, 3, 4)])
    exact = magnetisation_log_pmf(PottsParams(M, beta)).mode_masses()
    return est, exact
