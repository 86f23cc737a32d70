"""Acceptance property checks, runnable as ``seqcs verify``.

Each ``check_*`` function runs one property at its reference scale and
returns a :class:`CheckResult`; nothing here asserts, so the caller decides
how to report.  Probabilistic thresholds carry three standard errors of
slack.  Oracles are independent of the code under test where one exists
(scipy quadrature, exhaustive l0 search, cold re-solves).
"""

from __future__ import annotations

import filecmp
import itertools
import math
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ensembles import EnsembleKind, SignalSpec, TrialStreams, draw_rows, generate_signal, measure
from .errors import NoProgress
from .estimators import HoldoutBatch, certify_chebyshev, chi2_interval
from .sequential import SessionConfig, StoppingRule, check_agreement, run_session
from .solvers.basis_pursuit import basis_pursuit
from .solvers.bpdn import bpdn, optimality_residual
from .solvers.omp import omp
from .stats import (chi2_cdf, chi2_quantile, ct_mean_bound, ct_mean_estimate, ct_second_moment,
                    ct_var_bound, sample_ct, verify_sin2_identities)


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str = ""
    values: dict = field(default_factory=dict)

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] criterion {self.number:>2} {self.name}: {self.detail}"


def _binomial_se(p: float, n: int) -> float:
    return math.sqrt(p * (1.0 - p) / n)


# 1 ---------------------------------------------------------------------------

def check_exact_stops(N: int = 50, K: int = 5, trials: int = 200, seed: int = 101, tol: float = 1e-6) -> CheckResult:
    """Agreement and cardinality stops on Gaussian rows return the true signal."""
    worst = 0.0
    violations = 0
    fired = 0
    for rule in (StoppingRule.one_step(), StoppingRule.cardinality()):
        cfg = SessionConfig(SignalSpec.sparse(N, K), EnsembleKind.GAUSSIAN, "bp", rule)
        for t in range(trials):
            res = run_session(cfg, master_seed=seed, trial=t)
            if not res.stopped:
                continue
            fired += 1
            err = res.final_error
            worst = max(worst, err)
            violations += err > tol
    passed = violations == 0 and fired > 0
    return CheckResult(1, "exact stops (Gaussian)", passed,
                       f"{fired} stops, {violations} with error > {tol:g}, worst {worst:.2e}",
                       {"stops": fired, "violations": violations, "worst": worst})


# 2 ---------------------------------------------------------------------------

def check_bernoulli_agreement(T_values=(1, 2, 4), trials: int = 4000, N: int = 20, seed: int = 202) -> CheckResult:
    """False agreement on +-1 rows with the error ``e_1 - e_2`` (the worst case, P = 1/2 per row)."""
    rng = np.random.default_rng(seed)
    x_true = rng.standard_normal(N)
    x_hat = x_true.copy()
    x_hat[0] += 1.0
    x_hat[1] -= 1.0
    parts, ok, vals = [], True, {}
    for T in T_values:
        stream = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(T,)))
        hits = 0
        for _ in range(trials):
            rows = draw_rows(EnsembleKind.BERNOULLI, T, N, stream)
            if all(check_agreement(x_hat, measure(x_true, r, 0.0)) for r in rows):
                hits += 1
        freq = hits / trials
        p = 2.0 ** (-T)
        limit = p + 3.0 * _binomial_se(p, trials)
        ok &= freq <= limit
        vals[T] = freq
        parts.append(f"T={T} {freq:.4f} <= {limit:.4f}")
    return CheckResult(2, "T-step agreement on Bernoulli rows", ok, "; ".join(parts), vals)


# 3 ---------------------------------------------------------------------------

def check_ct_moments(L: int = 100, T_values=(5, 10, 25, 50), n_samples: int = 5000, seed: int = 303,
                     rel_tol: float = 0.05) -> CheckResult:
    """Monte Carlo C_T: mean near sqrt(L/T), mean and variance under their bounds."""
    ok = True
    parts, vals = [], {}
    for T in T_values:
        rep = sample_ct(L, T, n_samples, seed=np.random.SeedSequence(seed, spawn_key=(T,)))
        est = ct_mean_estimate(L, T)
        near = rep.rel_deviation <= rel_tol
        mean_ok = rep.sample_mean <= ct_mean_bound(L, T) + 3.0 * rep.std_error
        var_ok = rep.sample_var <= ct_var_bound(L, T) + 3.0 * rep.var_std_error
        ok &= near and mean_ok and var_ok
        vals[T] = {"mean": rep.sample_mean, "estimate": est, "rel": rep.rel_deviation,
                   "mean_ok": mean_ok, "var": rep.sample_var, "var_ok": var_ok, "near": near}
        flags = "".join(("m" if near else "M", "b" if mean_ok else "B", "v" if var_ok else "V"))
        parts.append(f"T={T} mean {rep.sample_mean:.3f} vs {est:.3f} ({100 * rep.rel_deviation:.1f}%) [{flags}]")
    return CheckResult(3, "C_T moments", ok,
                       "; ".join(parts) + "  (upper case = failed: M near-estimate, B mean bound, V variance bound)",
                       vals)


# 4 ---------------------------------------------------------------------------

def check_sin2_identities(L: int = 100, T: int = 10, n_samples: int = 100_000, seed: int = 404) -> CheckResult:
    first, second = verify_sin2_identities(L, T, n_samples, seed)
    ok = first.rel_deviation <= 0.02 and second.rel_deviation <= 0.05
    return CheckResult(4, "sin^2 identities", ok,
                       f"E[sin^2] {first.sample_mean:.5f} vs {T / L:.5f} ({100 * first.rel_deviation:.2f}%), "
                       f"E[1/sin^2] {second.sample_mean:.3f} vs {ct_second_moment(L, T):.3f} "
                       f"({100 * second.rel_deviation:.2f}%)",
                       {"sin2": first.sample_mean, "inv_sin2": second.sample_mean})


# 5 ---------------------------------------------------------------------------

def check_chebyshev_coverage(N: int = 100, K: int = 10, T: int = 5, k: float = 3.0, trials: int = 500,
                             seed: int = 505) -> CheckResult:
    """One certificate per trial at M cycling through 5..30 (before typical recovery)."""
    covered = 0
    exact = 0
    spec = SignalSpec.sparse(N, K)
    for t in range(trials):
        M = 5 + t % 26
        streams = TrialStreams.for_trial(seed, t)
        x_true = generate_signal(spec, streams.signal)
        A = draw_rows(EnsembleKind.GAUSSIAN, M + T, N, streams.rows)
        y = A @ x_true
        x_hat = basis_pursuit(A[:M], y[:M]).solution
        err = float(np.linalg.norm(x_hat - x_true))
        exact += err <= 1e-9
        cert = certify_chebyshev(A, y, x_hat, T, k)
        covered += cert.covers(err)
    p = 1.0 - 1.0 / k**2
    cov = covered / trials
    limit = p - 3.0 * _binomial_se(p, trials)
    return CheckResult(5, "Chebyshev certificate coverage", cov >= limit,
                       f"{cov:.4f} >= {limit:.4f} over {trials} certificates ({exact} already exact)",
                       {"coverage": cov, "limit": limit})


# 6 ---------------------------------------------------------------------------

def check_chi2_coverage(N: int = 50, T: int = 25, alpha: float = 0.1, trials: int = 5000, sigma: float = 0.01,
                        seed: int = 606) -> CheckResult:
    p = 1.0 - alpha
    limit = p - 3.0 * _binomial_se(p, trials)
    parts, ok, vals = [], True, {}
    for noise in (0.0, sigma):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(int(noise > 0),)))
        covered = 0
        for _ in range(trials):
            x_true = rng.standard_normal(N)
            delta = rng.standard_normal(N)
            delta /= np.linalg.norm(delta)
            rows = draw_rows(EnsembleKind.GAUSSIAN, T, N, rng)
            values = rows @ x_true + noise * rng.standard_normal(T)
            cert = chi2_interval(HoldoutBatch(rows, values), x_true + delta, alpha, noise)
            covered += cert.covers(1.0)
        cov = covered / trials
        ok &= cov >= limit
        vals[noise] = cov
        parts.append(f"sigma={noise:g} {cov:.4f}")
    return CheckResult(6, "chi-square interval coverage", ok, f"{'; '.join(parts)} (limit {limit:.4f})", vals)


# 7 ---------------------------------------------------------------------------

def check_estimator_compare(trials: int = 5000, seed: int = 707, rtol: float = 0.15) -> CheckResult:
    from .harness.config import load_config
    from .harness.experiments import exp_estimator_compare

    cfg = load_config("fig6", trials=trials, seed=seed)
    out = exp_estimator_compare(cfg)
    rows = {int(r[0]): r for r in out.tables["estimator_summary.csv"].rows}
    m0, m200 = rows.get(0), rows.get(200)
    if out.failures or m0 is None or m200 is None:
        return CheckResult(7, "sin-theta vs JL estimators", False, f"failures: {out.failures[:3]}")
    rel0 = m0[6]
    ok = rel0 < rtol and m200[3] < m200[5]
    return CheckResult(7, "sin-theta vs JL estimators", ok,
                       f"M=0 std {m0[3]:.4f} vs {m0[5]:.4f} (rel diff {rel0:.3f} < {rtol}); "
                       f"M=200 std {m200[3]:.4f} < {m200[5]:.4f}",
                       {"rel0": rel0, "std200": (m200[3], m200[5])})


# 8 ---------------------------------------------------------------------------

def _quad_cdf(x: float, T: int) -> float:
    from scipy import integrate, special

    # t = u^2 removes the t^(T/2-1) singularity at 0 for T = 1
    log_norm = -(T / 2.0) * math.log(2.0) - special.gammaln(T / 2.0)

    def integrand(u):
        if u == 0.0:
            return 2.0 * math.exp(log_norm) if T == 1 else 0.0
        return 2.0 * math.exp(log_norm + (T - 1) * math.log(u) - u * u / 2.0)

    val, _ = integrate.quad(integrand, 0.0, math.sqrt(x), epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def check_chi2_kernel() -> CheckResult:
    T_grid = (1, 2, 3, 5, 8, 10, 17, 25, 40, 60)
    worst_quad = 0.0
    for T in T_grid:
        for q in np.linspace(0.02, 3.0, 20):
            x = float(q * T)
            worst_quad = max(worst_quad, abs(chi2_cdf(x, T) - _quad_cdf(x, T)))
    worst_t2 = max(abs(chi2_cdf(x, 2) - (1.0 - math.exp(-x / 2.0))) for x in np.linspace(0.0, 60.0, 301))
    worst_rt = 0.0
    for T in (1, 2, 3, 5, 10, 25, 50, 100):
        for p in (1e-6, 1e-3, 0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99, 0.999):
            worst_rt = max(worst_rt, abs(chi2_cdf(chi2_quantile(p, T), T) - p))
    ok = worst_quad <= 1e-8 and worst_t2 <= 1e-12 and worst_rt <= 1e-9
    return CheckResult(8, "chi-square kernel", ok,
                       f"quadrature {worst_quad:.1e} (200 pts), T=2 closed form {worst_t2:.1e}, "
                       f"quantile round trip {worst_rt:.1e}",
                       {"quad": worst_quad, "t2": worst_t2, "round_trip": worst_rt})


# 9 ---------------------------------------------------------------------------

def check_warm_start(N: int = 100, K: int = 8, trials: int = 30, M_max: int | None = None,
                     seed: int = 909) -> CheckResult:
    from .harness.config import load_config
    from .harness.experiments import exp_warmstart_bench

    M_max = N if M_max is None else M_max
    cfg = load_config("fig8", trials=trials, seed=seed,
                      overrides=[f"signal.N={N}", f"signal.K={K}", "M_min=1", f"M_max={M_max}"])
    out = exp_warmstart_bench(cfg)
    if out.failures:
        return CheckResult(9, "warm start", False, f"{len(out.failures)} failed trials: {out.failures[0].error}")
    worst_rel = 0.0
    for _, _, _, _, oc, ow, _ in out.tables["warmstart_trials.csv"].rows:
        worst_rel = max(worst_rel, abs(oc - ow) / max(1.0, abs(oc)))
    summary = out.tables["warmstart_bench.csv"].rows
    top = [r for r in summary if r[0] > M_max / 2]
    cold = float(np.mean([r[1] for r in top]))
    warm = float(np.mean([r[2] for r in top]))
    ok = worst_rel <= 1e-7 and warm < cold
    return CheckResult(9, "warm start", ok,
                       f"worst objective gap {worst_rel:.1e}; top-half pivots warm {warm:.1f} < cold {cold:.1f}",
                       {"worst_rel": worst_rel, "warm": warm, "cold": cold})


# 10 --------------------------------------------------------------------------

def sparsest_solution(A, y, max_k: int, tol: float = 1e-9):
    """Exhaustive l0 oracle: the first support (by size) that reproduces ``y``."""
    M, N = A.shape
    scale = 1.0 + np.linalg.norm(y)
    if np.linalg.norm(y) <= tol * scale:
        return np.zeros(N)
    for k in range(1, max_k + 1):
        for S in itertools.combinations(range(N), k):
            cols = A[:, S]
            coef, *_ = np.linalg.lstsq(cols, y, rcond=None)
            if np.linalg.norm(cols @ coef - y) <= tol * scale:
                x = np.zeros(N)
                x[list(S)] = coef
                return x
    return None


def check_solver_oracles(instances: int = 50, seed: int = 1010) -> CheckResult:
    rng = np.random.default_rng(seed)
    bp_bad = 0
    for _ in range(instances):
        N = int(rng.integers(8, 13))
        K = int(rng.integers(0, 3))
        M = min(N - 1, 4 * K + 4)
        spec = SignalSpec.sparse(N, K)
        x_true = generate_signal(spec, rng)
        A = rng.standard_normal((M, N))
        y = A @ x_true
        ref = sparsest_solution(A, y, max_k=M - 1)
        got = basis_pursuit(A, y).solution
        bp_bad += ref is None or np.linalg.norm(got - ref) > 1e-6 * (1.0 + np.linalg.norm(ref))

    bpdn_worst = 0.0
    for _ in range(instances):
        M, N = int(rng.integers(5, 40)), int(rng.integers(10, 80))
        A = rng.standard_normal((M, N))
        y = rng.standard_normal(M)
        lam = float(rng.uniform(0.01, 0.9)) * float(np.abs(A.T @ y).max())
        bpdn_worst = max(bpdn_worst, optimality_residual(A, y, bpdn(A, y, lam), lam))

    omp_bad = omp_ok = omp_raised = 0
    for _ in range(instances):
        M, N = int(rng.integers(3, 30)), int(rng.integers(5, 60))
        A = rng.standard_normal((M, N))
        y = rng.standard_normal(M)
        try:
            x = omp(A, y)
        except NoProgress:
            omp_raised += 1
            continue
        resid = np.linalg.norm(A @ x - y)
        if resid <= 1e-10 * (1.0 + np.linalg.norm(y)):
            omp_ok += 1
        else:
            omp_bad += 1
    ok = bp_bad == 0 and bpdn_worst <= 1e-9 and omp_bad == 0
    return CheckResult(10, "solver oracles", ok,
                       f"bp vs l0 mismatches {bp_bad}/{instances}; bpdn worst residual {bpdn_worst:.1e}; "
                       f"omp infeasible successes {omp_bad} ({omp_ok} ok, {omp_raised} raised)",
                       {"bp_bad": bp_bad, "bpdn_worst": bpdn_worst, "omp_bad": omp_bad})


# 11 --------------------------------------------------------------------------

def check_trace_properties(N: int = 50, K: int = 5, trials: int = 20, seed: int = 1111) -> CheckResult:
    from .harness.config import load_config
    from .harness.experiments import run_experiment

    l1_bad = l0_bad = 0
    rules = (StoppingRule.one_step(), StoppingRule.error_below(None, "chi2", T=5))
    for rule in rules:
        cfg = SessionConfig(SignalSpec.sparse(N, K), EnsembleKind.GAUSSIAN, "bp", rule, budget=N)
        for t in range(trials):
            trace = run_session(cfg, master_seed=seed, trial=t).trace
            l1 = [r.l1 for r in trace]
            l1_bad += any(b < a - 1e-7 for a, b in zip(l1, l1[1:]))
            l0_bad += any(r.l0 > r.M for r in trace)

    identical = True
    with tempfile.TemporaryDirectory() as tmp:
        for preset, extra in (("fig3", []), ("fig1", ["trials=5"]), ("fig5", ["budget=20"])):
            dirs = []
            for rep in range(2):
                cfg = load_config(preset, extra, seed=seed, out=str(Path(tmp) / f"{preset}_{rep}"))
                run_experiment(cfg)
                dirs.append(Path(cfg["out"]))
            names = sorted(p.name for p in dirs[0].glob("*.csv"))
            identical &= names == sorted(p.name for p in dirs[1].glob("*.csv"))
            identical &= all(filecmp.cmp(dirs[0] / n, dirs[1] / n, shallow=False) for n in names)
    ok = l1_bad == 0 and l0_bad == 0 and identical
    return CheckResult(11, "trace properties", ok,
                       f"l1 decreases {l1_bad}, l0 > M {l0_bad} over {len(rules) * trials} traces; "
                       f"rerun CSVs byte-identical: {identical}",
                       {"l1_bad": l1_bad, "l0_bad": l0_bad, "identical": identical})


CHECKS = {
    1: check_exact_stops,
    2: check_bernoulli_agreement,
    3: check_ct_moments,
    4: check_sin2_identities,
    5: check_chebyshev_coverage,
    6: check_chi2_coverage,
    7: check_estimator_compare,
    8: check_chi2_kernel,
    9: check_warm_start,
    10: check_solver_oracles,
    11: check_trace_properties,
}


def run_checks(only=None) -> list[CheckResult]:
    numbers = sorted(CHECKS) if not only else sorted(set(only))
    results = []
    for n in numbers:
        if n not in CHECKS:
            results.append(CheckResult(n, "unknown", False, f"no check numbered {n}"))
            continue
        try:
            results.append(CHECKS[n]())
        except Exception as exc:
            results.append(CheckResult(n, CHECKS[n].__name__, False, f"raised {type(exc).__name__}: {exc}"))
    return results
