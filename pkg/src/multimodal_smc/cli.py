"""
Command line experiment runner.

Each subcommand writes a results file (CSV by default) and a JSON manifest
into ``--out``. Exit status: 0 success, 1 a checked bound or invariant
failed, 2 invalid input.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bounds as bd
from .fk import BridgingSequence, RegionStructure, asymptotic_variance_exact
from .instances import random_region_chain
from .report import ReportError, emit_report
from .smc import ResamplingPolicy, replicate_asymptotic_variance, run_smc

SUBCOMMANDS = ("counterexample", "variance-exact", "smc-run", "replicate-variance", "bounds",
               "metastable-quality", "growth-constants", "drift-verify", "jump-variance",
               "curvature", "coupling-tail", "hitting", "escape", "riemann-gauss",
               "loglik-check", "local-tv", "contour")

# every key a config file or flag may set, with its parser
KEYS = {
    "M": int, "N": int, "replicates": int, "seed": int, "rho": float, "beta_tilde": float,
    "c1": float, "j0": int, "policy": str, "threshold": float, "out": str, "threads": int,
    "format": str, "input": str, "phi": str, "t": str, "mode": str, "samples": int,
    "resolution": int, "steps": int, "M_grid": str, "m": int, "R": float, "delta": float,
    "form": str, "model": str, "level": float, "alpha_rule": str, "exhaustive": int,
}

DEFAULTS = {
    "common": {"seed": 0, "out": ".", "format": "csv", "threads": None, "beta_tilde": None},
    "counterexample": {},
    "variance-exact": {"norm": "current"},
    "smc-run": {"N": 10_000, "policy": "every-stage", "threshold": 0.5, "model": "finite",
                "M": 60, "c1": 1.0, "mode": "4"},
    "replicate-variance": {"N": 10_000, "replicates": 2000, "policy": "every-stage",
                           "threshold": 0.5, "model": "finite", "M": 40, "c1": 1.0,
                           "mode": "4", "level": 0.99},
    "bounds": {"alpha_rule": "stationary"},
    "metastable-quality": {"t": "10"},
    "growth-constants": {"M": 1001},
    "drift-verify": {"M": 50},
    "jump-variance": {"M": 100},
    "curvature": {"M": 10 ** 7, "rho": 1e-6, "samples": 10_000, "mode": "all", "exhaustive": 0},
    "coupling-tail": {"M": 50, "replicates": 10_000, "t": "auto"},
    "hitting": {"M_grid": "100,200,400,800", "rho": 0.02, "replicates": 200},
    "escape": {"M": 400, "rho": 0.02, "steps": 100_000, "replicates": 1000, "mode": "1"},
    "riemann-gauss": {"m": 0, "R": 0.1, "delta": 0.3},
    "loglik-check": {"resolution": 1000, "form": "quadratic"},
    "local-tv": {"M_grid": "200,400,800,1600", "rho": 0.02},
    "contour": {"M": 1000, "resolution": 0},
}


class InvalidInput(ValueError):
    """Bad configuration or input file (exit status 2)."""


class CheckFailed(AssertionError):
    """A checked bound or invariant was violated (exit status 1)."""


@dataclass
class ExperimentConfig:
    subcommand: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise InvalidInput(f"unknown subcommand {self.subcommand!r}")
        unknown = set(self.params) - set(KEYS) - {"norm"}
        if unknown:
            raise InvalidInput(f"unknown config keys: {sorted(unknown)}")

    def resolved(self):
        out = dict(DEFAULTS["common"])
        out.update(DEFAULTS[self.subcommand])
        out.update({k: v for k, v in self.params.items() if v is not None})
        return out


def read_config_file(path):
    """key=value lines; '#' starts a comment."""
    params = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise InvalidInput(f"cannot read config file: {e}") from e
    for no, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInput(f"{path}:{no}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        k = k.replace("-", "_")
        if k not in KEYS:
            raise InvalidInput(f"{path}:{no}: unknown key {k!r}")
        try:
            params[k] = KEYS[k](float(v)) if KEYS[k] is int else KEYS[k](v)
        except ValueError as e:
            raise InvalidInput(f"{path}:{no}: bad value for {k}") from e
    return params


def _floats(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as e:
        raise InvalidInput(f"expected a comma-separated list of numbers, got {text!r}") from e


def _ints(text):
    return [int(v) for v in _floats(text)]


def _load_json(path):
    if not path:
        raise InvalidInput("this subcommand needs --input")
    try:
        return Path(path).read_text()
    except OSError as e:
        raise InvalidInput(f"cannot read input: {e}") from e


def _load_sequence(cfg):
    text = _load_json(cfg.get("input"))
    try:
        seq = BridgingSequence.from_json(text)
        doc = json.loads(text)
    except (ValueError, KeyError, TypeError) as e:
        raise InvalidInput(f"invalid bridging sequence: {e}") from e
    if cfg.get("phi"):
        phi = np.array(_floats(cfg["phi"]))
    elif "phi" in doc:
        phi = np.asarray(doc["phi"], dtype=float)
    else:
        raise InvalidInput("a test function is needed: --phi or a 'phi' entry in the input")
    if phi.shape != (seq.state_count,):
        raise InvalidInput("phi length does not match the number of states")
    return seq, phi, doc


def _policy(cfg):
    try:
        return ResamplingPolicy(cfg["policy"], float(cfg["threshold"]))
    except ValueError as e:
        raise InvalidInput(str(e)) from e


def _beta(cfg):
    from .potts.model import BETA_C
    return BETA_C if cfg.get("beta_tilde") is None else float(cfg["beta_tilde"])


# subcommands -------------------------------------------------------------------
# each returns (name, header, rows, summary) and raises CheckFailed on violations

def cmd_counterexample(cfg):
    ce = bd.counterexample_instance()
    rows, summary = [], {}
    for case, seq in (("mixing", ce.mixing), ("no-mixing", ce.no_mixing)):
        v = asymptotic_variance_exact(seq, ce.phi)
        vn = asymptotic_variance_exact(seq, ce.phi, norm="next")
        wm = bd.bound_with_mixing(seq, ce.partition, "stationary", ce.phi)
        if case == "mixing":
            other = bd.bound_global(seq, ce.phi)
        else:
            other = bd.bound_no_mixing(seq, ce.partition, ce.phi)
        rows.append((case, v.total, vn.total, wm.bound_value, other.bound_name, other.bound_value,
                     other.precondition_ok))
        summary[case] = {"V": v.total, "V_terms": list(v.terms), "V_next_stage_norm": vn.total,
                         "bound_with_mixing": wm.bound_value, other.bound_name: other.bound_value,
                         f"{other.bound_name}_precondition": other.precondition_ok}
    summary["renormalisation"] = ce.row_factors
    summary["mixing_increases_variance"] = rows[0][1] > rows[1][1]
    print(f"{'case':<10} {'V (CLT)':>10} {'V (next)':>10} {'bound mix':>10} {'other bound':>22}")
    for r in rows:
        other = f"{r[4]}={r[5]:.4g}" + ("" if r[6] else " (precond. fails)")
        print(f"{r[0]:<10} {r[1]:>10.4f} {r[2]:>10.4f} {r[3]:>10.4f} {other:>22}")
    header = ["case", "V", "V_next_stage_norm", "bound_with_mixing", "other_bound",
              "other_bound_value", "other_precondition_ok"]
    rows = [tuple(str(v) if isinstance(v, str) else v for v in r[:5]) + (_finite(r[5]), r[6])
            for r in rows]
    return "counterexample", header, rows, summary


def _finite(v):
    return "inf" if math.isinf(v) else v


def cmd_variance_exact(cfg):
    seq, phi, _ = _load_sequence(cfg)
    rep = asymptotic_variance_exact(seq, phi, norm=cfg.get("norm", "current"))
    rows = [(k, t) for k, t in enumerate(rep.terms)]
    return "variance-exact", ["k", "V_kn"], rows, {"V": rep.total, "Var": rep.variance}


def _potts_model(cfg):
    from .potts.analysis import mode_indicator
    from .potts.model import PottsParams, bridging_builder
    M = int(cfg["M"])
    model = bridging_builder("interpolation", PottsParams(M, _beta(cfg)), c1=float(cfg["c1"]))
    mode = int(cfg["mode"])
    if mode not in (1, 2, 3, 4):
        raise InvalidInput("mode must be 1..4")
    return model, mode_indicator(mode)


def cmd_smc_run(cfg):
    policy = _policy(cfg)
    if cfg["model"] == "potts":
        model, phi = _potts_model(cfg)
        exact = None
    elif cfg["model"] == "finite":
        model, phi, _ = _load_sequence(cfg)
        exact = model.distributions[-1].expect(phi)
    else:
        raise InvalidInput("model must be 'finite' or 'potts'")
    res = run_smc(model, int(cfg["N"]), int(cfg["seed"]), policy, phi)
    summary = {"estimate": res.estimate, "ess_trace": list(res.ess_trace),
               "experimental": res.experimental}
    if exact is not None:
        summary["exact"] = exact
    rows = [(k, e) for k, e in enumerate(res.ess_trace)]
    return "smc-run", ["stage", "ess"], rows, summary


def cmd_replicate_variance(cfg):
    policy = _policy(cfg)
    exact = None
    if cfg["model"] == "potts":
        model, phi = _potts_model(cfg)
    elif cfg["model"] == "finite":
        model, phi, _ = _load_sequence(cfg)
        exact = asymptotic_variance_exact(model, phi).total
    else:
        raise InvalidInput("model must be 'finite' or 'potts'")
    rv = replicate_asymptotic_variance(model, phi, int(cfg["N"]), int(cfg["replicates"]),
                                       int(cfg["seed"]), policy, float(cfg["level"]),
                                       cfg.get("threads"))
    summary = {"replicate_variance": rv.value, "ci": list(rv.ci), "deaths": rv.deaths,
               "estimate": float(np.mean(rv.estimates))}
    if exact is not None:
        summary["exact_V"] = exact
        summary["brackets_exact"] = rv.brackets(exact)
    rows = [(r, e) for r, e in enumerate(rv.estimates)]
    return "replicate-variance", ["replicate", "estimate"], rows, summary


def cmd_bounds(cfg):
    seq, phi, _ = _load_sequence(cfg)
    reports = [bd.bound_global(seq, phi)]
    if seq.partitions is not None:
        if all(np.array_equal(p, seq.partitions[0]) for p in seq.partitions):
            try:
                reports.append(bd.bound_no_mixing(seq, seq.partitions[0], phi))
            except ValueError as e:
                print(f"no-mixing bound skipped: {e}", file=sys.stderr)
        reports.append(bd.bound_with_mixing(seq, seq.partitions, cfg["alpha_rule"], phi))
    rows = [(r.bound_name, r.precondition_ok, _finite(r.bound_value), r.exact_value) for r in reports]
    summary = {r.bound_name: {k: v for k, v in r.as_dict().items() if k != "bound_name"}
               for r in reports}
    return "bounds", ["bound", "precondition_ok", "bound_value", "exact_value"], rows, summary


def cmd_metastable_quality(cfg):
    ts = _ints(cfg["t"])
    if cfg.get("input"):
        try:
            doc = json.loads(_load_json(cfg["input"]))
            P = np.asarray(doc["P"], float)
            mu = np.asarray(doc["mu"], float)
            regions = RegionStructure(doc["mode_of"], doc["is_inner"])
        except (ValueError, KeyError, TypeError) as e:
            raise InvalidInput(f"invalid chain: {e}") from e
    else:
        from .smc import stream
        P, mu, regions = random_region_chain(stream(cfg["seed"], 0, 0, 21))
    rows = []
    for t in ts:
        q = bd.bound_metastable_quality(P, t, regions, mu, check=False)
        if q.lhs > q.rhs + 1e-9:
            raise CheckFailed(f"metastable quality violated at t={t}: {q.lhs} > {q.rhs}")
        rows.append((t, q.lhs, q.stay_term, q.tv_term, q.rhs))
    return ("metastable-quality", ["t", "lhs", "stay_term", "tv_term", "rhs"], rows,
            {"max_ratio": max(r[1] / r[4] if r[4] > 0 else 0.0 for r in rows)})


def cmd_growth_constants(cfg):
    from .potts.analysis import growth_constants_series
    rep = growth_constants_series(int(cfg["M"]), _beta(cfg))
    if rep.summary["B_01"] != 1.0 or abs(rep.summary["B_12"] - 1.0) > 1e-12:
        raise CheckFailed(f"B_01, B_12 = {rep.summary['B_01']}, {rep.summary['B_12']} (expected 1)")
    return "growth-constants", rep.header(), rep.rows(), rep.summary


def cmd_drift_verify(cfg):
    from .potts.analysis import drift_verify
    res = drift_verify(int(cfg["M"]), _beta(cfg))
    if res.worst_slack > 0:
        raise CheckFailed(f"drift bound violated at state {res.witness}: slack {res.worst_slack:.3g}")
    return "drift-verify", res.report.header(), res.report.rows(), res.report.summary


def cmd_jump_variance(cfg):
    from .potts.analysis import jump_variance_min
    res = jump_variance_min(int(cfg["M"]), _beta(cfg))
    if res.min_scaled < 0.001:
        raise CheckFailed(f"jump variance {res.min_scaled:.3g} < 0.001 at state {res.argmin}")
    return "jump-variance", res.report.header(), res.report.rows(), res.report.summary


def cmd_curvature(cfg):
    from .potts.analysis import curvature_check
    modes = (1, 2, 3, 4) if cfg["mode"] == "all" else (int(cfg["mode"]),)
    rows, worst = [], None
    for m in modes:
        r = curvature_check(int(cfg["M"]), float(cfg["rho"]), m, int(cfg["samples"]),
                            bool(cfg["exhaustive"]), int(cfg["seed"]), _beta(cfg))
        rows.append((m, r.pairs, r.min_kappa_M, str(r.witness[0]).replace(",", ";"),
                     str(r.witness[1]).replace(",", ";")))
        if worst is None or r.min_kappa_M < worst.min_kappa_M:
            worst = r
    if worst.min_kappa_M < 0.01:
        raise CheckFailed(f"curvature {worst.min_kappa_M:.4g}/M < 0.01/M at pair {worst.witness}")
    return ("curvature", ["mode", "pairs", "min_kappa_M", "x", "y"], rows,
            {"min_kappa_M": worst.min_kappa_M})


def cmd_coupling_tail(cfg):
    from .potts.analysis import coupling_tail
    M = int(cfg["M"])
    ts = [5 * M, int(math.ceil(9 * M * math.log(M)))] if cfg["t"] == "auto" else _ints(cfg["t"])
    res = coupling_tail(M, ts, int(cfg["replicates"]), int(cfg["seed"]), _beta(cfg))
    rows = list(zip(res.times, res.tail, res.sigma, res.bound))
    if not res.monotone:
        raise CheckFailed("Hamming distance increased along a coupled trajectory")
    if not res.ok:
        raise CheckFailed("empirical coupling tail exceeds the bound by more than 4 sigma")
    return ("coupling-tail", ["t", "tail", "sigma", "bound"], rows,
            {"monotone": res.monotone, "median_tau": float(np.median(res.tau))})


def cmd_hitting(cfg):
    from .potts.analysis import hitting_experiment
    res = hitting_experiment(_ints(cfg["M_grid"]), float(cfg["rho"]), int(cfg["replicates"]),
                             int(cfg["seed"]), beta=_beta(cfg))
    rows = [(M, q[0], q[1], q[2]) for M, q in zip(res.M_grid, res.quantiles)]
    return ("hitting", ["M", "q10", "median", "q90"], rows,
            {"slope_vs_MlogM": res.slope, "r_squared": res.r_squared, "unfinished": res.unfinished})


def cmd_escape(cfg):
    from .potts.analysis import escape_experiment
    res = escape_experiment(int(cfg["M"]), float(cfg["rho"]), int(cfg["steps"]),
                            int(cfg["replicates"]), int(cfg["seed"]), int(cfg["mode"]), _beta(cfg))
    frac = res.escapes / res.replicates
    rows = [(res.M, res.rho, res.steps, res.replicates, res.escapes, frac, res.paper_bound)]
    return ("escape", ["M", "rho", "steps", "replicates", "escapes", "fraction", "bound"], rows,
            {"escapes": res.escapes, "bound": res.paper_bound})


def cmd_riemann_gauss(cfg):
    from .potts.analysis import riemann_gauss, riemann_gauss_error_mp
    m, R, d = int(cfg["m"]), float(cfg["R"]), float(cfg["delta"])
    if R <= 0:
        raise InvalidInput("R must be positive")
    rows = []
    for r in (R, R / 2):
        psi, err = riemann_gauss(m, r, d)
        mp_err = riemann_gauss_error_mp(m, r, d)
        rows.append((r, psi, err, float(mpmath_log10(mp_err))))
    return ("riemann-gauss", ["R", "psi", "error_double", "log10_error_exact"], rows,
            {"m": m, "delta": d})


def mpmath_log10(x):
    import mpmath
    return mpmath.log10(x) if x > 0 else -math.inf


def cmd_loglik_check(cfg):
    from .potts.analysis import asymptotic_loglik_check
    res = asymptotic_loglik_check(int(cfg["resolution"]), cfg["form"])
    spread = max(res.center_values) - min(res.center_values)
    if cfg["form"] == "quadratic" and spread > 1e-12:
        raise CheckFailed(f"log-likelihood differs between centres by {spread:.3g}")
    rows = [(i + 1, v) for i, v in enumerate(res.center_values)]
    return ("loglik-check", ["center", "L"], rows,
            {"best_c": res.best_c, "witness": list(res.witness), "max_gap": res.max_gap,
             "center_spread": spread})


def cmd_local_tv(cfg):
    from .potts.analysis import local_tv_profile
    rep = local_tv_profile(_ints(cfg["M_grid"]), float(cfg["rho"]), _beta(cfg))
    return "local-tv", rep.header(), rep.rows(), rep.summary


def cmd_contour(cfg):
    from .potts.analysis import contour_grid, count_local_maxima
    from .potts.model import BETA_C
    M = int(cfg["M"])
    rows, summary = [], {}
    for label, beta in (("half", BETA_C / 2), ("critical", BETA_C), ("double", 2 * BETA_C)):
        g = contour_grid(beta, M, int(cfg["resolution"]) or None)
        rows += [(beta,) + r for r in g.rows()]
        n, cents = count_local_maxima(beta, M)
        summary[label] = {"beta_tilde": beta, "local_maxima": n,
                          "centroids": [list(map(float, c)) for c in cents]}
    return "contour", ["beta_tilde", "s1", "s2", "s3", "log_pmf"], rows, summary


COMMANDS = {
    "counterexample": cmd_counterexample, "variance-exact": cmd_variance_exact,
    "smc-run": cmd_smc_run, "replicate-variance": cmd_replicate_variance, "bounds": cmd_bounds,
    "metastable-quality": cmd_metastable_quality, "growth-constants": cmd_growth_constants,
    "drift-verify": cmd_drift_verify, "jump-variance": cmd_jump_variance,
    "curvature": cmd_curvature, "coupling-tail": cmd_coupling_tail, "hitting": cmd_hitting,
    "escape": cmd_escape, "riemann-gauss": cmd_riemann_gauss, "loglik-check": cmd_loglik_check,
    "local-tv": cmd_local_tv, "contour": cmd_contour,
}


def run_experiment(config: ExperimentConfig):
    """Run one subcommand and write its report; returns the exit status."""
    try:
        cfg = config.resolved()
        if cfg["format"] not in ("csv", "json"):
            raise InvalidInput("format must be csv or json")
        start = time.perf_counter()
        name, header, rows, summary = COMMANDS[config.subcommand](cfg)
        wall = time.perf_counter() - start
        emit_report(name, header, rows, summary, cfg, cfg["out"], cfg["format"], wall)
    except (InvalidInput, ReportError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (CheckFailed, bd.BoundViolation) as e:
        print(f"check failed: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    a = common.add_argument
    a("--M", type=int)
    a("--N", type=int)
    a("--replicates", type=int)
    a("--seed", type=int)
    a("--rho", type=float)
    a("--beta-tilde", dest="beta_tilde", type=float)
    a("--c1", type=float)
    a("--j0", type=int)
    a("--policy", choices=("every-stage", "ess-threshold"))
    a("--threshold", type=float)
    a("--out")
    a("--threads", type=int)
    a("--format", choices=("csv", "json"))
    a("--input", help="JSON input (bridging sequence or chain)")
    a("--config", help="key=value file; flags given on the command line take precedence")
    a("--phi", help="comma-separated test function values")
    a("--t", help="time(s), comma-separated")
    a("--mode", help="mode index (or 'all')")
    a("--samples", type=int)
    a("--exhaustive", type=int)
    a("--resolution", type=int)
    a("--steps", type=int)
    a("--M-grid", dest="M_grid")
    a("--m", type=int)
    a("--R", type=float)
    a("--delta", type=float)
    a("--form", choices=("quadratic", "verbatim"))
    a("--model", choices=("finite", "potts"))
    a("--level", type=float)
    a("--alpha-rule", dest="alpha_rule", choices=("exit", "stationary"))
    p = argparse.ArgumentParser(prog="multimodal-smc", description=__doc__.strip().splitlines()[0])
    sub = p.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common])
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    params = {}
    try:
        if args.config:
            params.update(read_config_file(args.config))
        params.update({k: v for k, v in vars(args).items()
                       if k not in ("subcommand", "config") and v is not None})
        config = ExperimentConfig(args.subcommand, params)
    except InvalidInput as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return run_experiment(config)


if __name__ == "__main__":
    sys.exit(main())
