"""Experiment runners behind ``seqcs run``.

Every experiment is split into independent units (usually one trial each).
Units run in worker processes when ``SEQCS_WORKERS`` is above one; results
are collected, sorted by unit key and written by the parent, so parallel and
serial runs give identical files.  A unit that raises is recorded as a
failure and the batch carries on.

Trial ``i`` draws its randomness from
``SeedSequence(entropy=seed, spawn_key=(i,))`` (see
:class:`seqcs.ensembles.TrialStreams`), which is all that is needed to rerun
it on its own.
"""

from __future__ import annotations

import csv
import datetime as _dt
import functools
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..ensembles import EnsembleKind, SignalSpec, TrialStreams, draw_rows, generate_signal
from ..estimators import HoldoutBatch, chi2_interval, jl_style_estimate, sin_theta_point_estimate
from ..linalg import nullspace_basis
from ..sequential import SessionConfig, StoppingRule, RuleKind, TRACE_COLUMNS, run_session, trace_to_csv
from ..solvers.basis_pursuit import basis_pursuit, warm_start_add_row
from ..solvers.bpdn import bpdn, lambda_schedule
from ..stats import ct_mean_bound, ct_mean_estimate, ct_var_bound, sample_ct_values

SEED_SCHEME = "numpy SeedSequence(entropy=seed, spawn_key=(trial,)) spawned into signal, rows, noise, extra streams"
WORKERS_ENV = "SEQCS_WORKERS"

STOP_HIST_COLUMNS = ("ensemble", "trial", "M_stop")
SESSION_COLUMNS = ("ensemble", "trial", "M_stop", "reason", "final_error")
TRACE_SUMMARY_COLUMNS = ("trial", "M_stop", "reason", "final_error")
CT_COLUMNS = ("T", "sample_mean", "mean_estimate", "mean_bound", "sample_std", "std_bound")
ERROR_BOUND_COLUMNS = ("trial", "M", "T", "method", "point", "bound", "confidence", "flags",
                       "true_error", "covered")
COMPARE_COLUMNS = ("M", "trial", "sin_theta", "jl")
COMPARE_SUMMARY_COLUMNS = ("M", "n", "sin_theta_mean", "sin_theta_std", "jl_mean", "jl_std",
                           "rel_std_diff", "similar")
NOISY_COLUMNS = ("trial", "M", "T", "lambda", "true_error", "point", "bound", "confidence", "flags",
                 "covered")
WARM_COLUMNS = ("M", "mean_iters_cold", "mean_iters_warm")
WARM_TRIAL_COLUMNS = ("trial", "M", "iters_cold", "iters_warm", "obj_cold", "obj_warm", "fallback")
FAILURE_COLUMNS = ("unit", "error")


@dataclass
class Table:
    columns: tuple[str, ...]
    rows: list[list] = field(default_factory=list)


@dataclass
class Failure:
    unit: str
    error: str


@dataclass
class ExperimentOutput:
    tables: dict[str, Table]
    failures: list[Failure] = field(default_factory=list)
    notes: dict = field(default_factory=dict)


@dataclass
class RunManifest:
    experiment: str
    preset: str | None
    config: dict
    version: str
    master_seed: int
    seed_scheme: str
    trial_indices: list[int]
    workers: int
    status: str = "running"
    started_at: str = ""
    wall_clock_s: float | None = None
    files: list[str] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def write(self, path: Path):
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")


# -- helpers ---------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path: Path, table: Table):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.columns)
        for row in table.rows:
            w.writerow([_fmt(v) for v in row])


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        n = 1
    return max(1, n)


def _guarded(fn, unit):
    try:
        return unit, fn(unit), None
    except Exception as exc:  # one bad trial must not sink the batch
        return unit, None, f"{type(exc).__name__}: {exc}"


def map_units(fn, units, workers: int | None = None):
    """Apply ``fn`` to every unit; returns ``(results, failures)`` in unit order."""
    workers = worker_count() if workers is None else workers
    call = functools.partial(_guarded, fn)
    if workers > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(call, units, chunksize=max(1, len(units) // (4 * workers))))
    else:
        out = [call(u) for u in units]
    results, failures = [], []
    for unit, res, err in out:
        if err is None:
            results.append((unit, res))
        else:
            failures.append(Failure(repr(unit), err))
    return results, failures


def signal_spec(cfg: dict) -> SignalSpec:
    sig = cfg["signal"]
    if sig["kind"] == "sparse":
        return SignalSpec.sparse(sig["N"], sig["K"])
    return SignalSpec.powerlaw(sig["N"], sig.get("exponent", 1.0))


def stopping_rule(rule: dict) -> StoppingRule:
    kind = RuleKind(rule["kind"])
    return StoppingRule(kind, T=int(rule["T"]) if kind is not RuleKind.ONE_STEP else 1,
                        agree_tol=float(rule["agree_tol"]),
                        error_tol=None if rule["error_tol"] is None else float(rule["error_tol"]),
                        certifier=rule["certifier"], k=float(rule["k"]), alpha=float(rule["alpha"]))


def session_config(cfg: dict, ensemble=None) -> SessionConfig:
    return SessionConfig(
        signal=signal_spec(cfg),
        ensemble=EnsembleKind.parse(ensemble or cfg["ensemble"]),
        decoder=cfg["decoder"]["name"],
        rule=stopping_rule(cfg["rule"]),
        budget=cfg["budget"],
        noise_sigma=float(cfg["estimator"]["noise_sigma"]),
        lambda_c=float(cfg["decoder"]["lambda_c"]),
        omp_tol=float(cfg["decoder"]["omp_tol"]),
    )


def _trial_range(cfg: dict, trial_indices) -> list[int]:
    if trial_indices is None:
        return list(range(int(cfg["trials"])))
    return sorted(set(int(t) for t in trial_indices))


# -- unit functions (module level so they pickle) ---------------------------

def _session_unit(scfg: SessionConfig, seed: int, unit):
    ensemble, trial = unit
    cfg = SessionConfig(scfg.signal, EnsembleKind.parse(ensemble), scfg.decoder, scfg.rule, scfg.budget,
                        scfg.noise_sigma, scfg.lambda_c, scfg.omp_tol)
    return run_session(cfg, master_seed=seed, trial=trial)


def _ct_unit(L: int, n_samples: int, seed: int, T: int):
    values = sample_ct_values(L, T, n_samples, np.random.SeedSequence(entropy=seed, spawn_key=(T,)))
    return float(values.mean()), float(values.std(ddof=1))


def _compare_unit(N: int, T: int, seed: int, unit):
    M, trial = unit
    streams = TrialStreams.for_trial(seed, trial)
    A = draw_rows(EnsembleKind.GAUSSIAN, M, N, streams.rows)
    if M > 0:
        basis = nullspace_basis(A)
        delta = basis @ streams.extra.standard_normal(basis.shape[1])
    else:
        delta = streams.extra.standard_normal(N)
    delta /= np.linalg.norm(delta)
    holdout = draw_rows(EnsembleKind.GAUSSIAN, T, N, streams.rows)
    A_all = np.vstack([A, holdout])
    # true signal 0, reconstruction delta: every measurement of x* is 0
    sin_theta = sin_theta_point_estimate(A_all, np.zeros(M + T), delta, T)
    jl = jl_style_estimate(HoldoutBatch(holdout, np.zeros(T)), delta)
    return sin_theta, jl


def _noisy_unit(spec: SignalSpec, ensemble: str, est: dict, lambda_c: float, grid: list[int], seed: int,
                trial: int):
    streams = TrialStreams.for_trial(seed, trial)
    x_true = generate_signal(spec, streams.signal)
    N = spec.N
    T = int(est["T"])
    sigma = float(est["noise_sigma"])
    kind = EnsembleKind.parse(ensemble)
    n_rows = grid[-1] + T
    A = draw_rows(kind, n_rows, N, streams.rows)
    y = A @ x_true + sigma * streams.noise.standard_normal(n_rows)
    rows = []
    x = np.zeros(N)
    for M in grid:
        lam = lambda_schedule(M, N, lambda_c)
        x = bpdn(A[:M], y[:M], lam, x0=x)
        cert = chi2_interval(HoldoutBatch(A[M:M + T], y[M:M + T]), x, float(est["alpha"]), sigma,
                             entry_variance=kind.entry_variance, approximate=not kind.continuous)
        err = float(np.linalg.norm(x - x_true))
        rows.append([trial, M, T, lam, err, cert.point_estimate, cert.upper_bound, cert.confidence,
                     ";".join(cert.flags), cert.covers(err)])
    return rows


def _warm_unit(spec: SignalSpec, ensemble: str, M_min: int, M_max: int, seed: int, trial: int):
    streams = TrialStreams.for_trial(seed, trial)
    x_true = generate_signal(spec, streams.signal)
    A = draw_rows(EnsembleKind.parse(ensemble), M_max, spec.N, streams.rows)
    y = A @ x_true
    state = basis_pursuit(A[:M_min], y[:M_min]).state
    rows = []
    for M in range(M_min + 1, M_max + 1):
        cold = basis_pursuit(A[:M], y[:M])
        warm = warm_start_add_row(state, A[M - 1], y[M - 1])
        state = warm.state
        rows.append([trial, M, cold.total_iters, warm.total_iters, cold.objective, warm.objective,
                     warm.fallback])
    return rows


# -- experiments -------------------------------------------------------------

def exp_stop_hist(cfg: dict, trial_indices=None) -> ExperimentOutput:
    """Stopping times of the sequential decoder for each configured ensemble."""
    ensembles = [EnsembleKind.parse(e).value for e in (cfg["ensembles"] or [cfg["ensemble"]])]
    trials = _trial_range(cfg, trial_indices)
    units = [(e, t) for e in ensembles for t in trials]
    scfg = session_config(cfg)
    results, failures = map_units(functools.partial(_session_unit, scfg, cfg["seed"]), units)
    hist = Table(STOP_HIST_COLUMNS)
    sessions = Table(SESSION_COLUMNS)
    for (e, t), res in results:
        hist.rows.append([e, t, res.M_stop])
        sessions.rows.append([e, t, res.M_stop, res.reason, res.final_error])
    notes = {}
    if scfg.rule.kind is RuleKind.CARDINALITY and "bernoulli" in ensembles:
        notes["bernoulli_cardinality"] = "confidence max(0, 1 - N^2 2^(1-M)) is a heuristic, not a guarantee"
    if scfg.rule.kind is RuleKind.ONE_STEP and "bernoulli" in ensembles:
        notes["bernoulli_one_step"] = "one-step agreement is exact only for continuous rows; Bernoulli stops are heuristic"
    return ExperimentOutput({"stop_hist.csv": hist, "stop_sessions.csv": sessions}, failures, notes)


def exp_trace(cfg: dict, trial_indices=None) -> ExperimentOutput:
    """Per-measurement trace of l0, l1 and error for each trial (one file per trial)."""
    trials = _trial_range(cfg, trial_indices)
    scfg = session_config(cfg)
    units = [(scfg.ensemble.value, t) for t in trials]
    results, failures = map_units(functools.partial(_session_unit, scfg, cfg["seed"]), units)
    tables = {}
    summary = Table(TRACE_SUMMARY_COLUMNS)
    for (_, t), res in results:
        tbl = Table(TRACE_COLUMNS)
        for r in res.trace:
            tbl.rows.append([r.M, r.l0, r.l1, r.err2, r.agreed, r.stopped, r.reason])
        tables[f"trace_{t:03d}.csv"] = tbl
        summary.rows.append([t, res.M_stop, res.reason, res.final_error])
    tables["trace_summary.csv"] = summary
    return ExperimentOutput(tables, failures)


def exp_ct_moments(cfg: dict, trial_indices=None) -> ExperimentOutput:
    """Monte Carlo mean and spread of C_T next to the closed-form estimate and bounds."""
    L = int(cfg["L"])
    T_values = [int(T) for T in cfg["T_values"]]
    n = int(cfg["n_samples"])
    results, failures = map_units(functools.partial(_ct_unit, L, n, cfg["seed"]), T_values)
    tbl = Table(CT_COLUMNS)
    for T, (mean, std) in results:
        if T > 2:
            bound, std_bound = ct_mean_bound(L, T), math.sqrt(max(ct_var_bound(L, T), 0.0))
        else:
            bound = std_bound = None
        tbl.rows.append([T, mean, ct_mean_estimate(L, T), bound, std, std_bound])
    return ExperimentOutput({"ct_moments.csv": tbl}, failures,
                            {"ct_seeds": "SeedSequence(entropy=seed, spawn_key=(T,)) per T"})


def exp_error_bounds(cfg: dict, trial_indices=None) -> ExperimentOutput:
    """Certificates along a sequential run next to the true error of the certified reconstruction."""
    trials = _trial_range(cfg, trial_indices)
    scfg = session_config(cfg)
    if scfg.rule.kind is not RuleKind.ERROR_BELOW:
        scfg = SessionConfig(scfg.signal, scfg.ensemble, scfg.decoder,
                             StoppingRule.error_below(None, "chebyshev", int(cfg["estimator"]["T"]),
                                                      float(cfg["estimator"]["k"])),
                             scfg.budget, scfg.noise_sigma, scfg.lambda_c, scfg.omp_tol)
    units = [(scfg.ensemble.value, t) for t in trials]
    results, failures = map_units(functools.partial(_session_unit, scfg, cfg["seed"]), units)
    tbl = Table(ERROR_BOUND_COLUMNS)
    for (_, t), res in results:
        for M, cert in res.certificates:
            err = res.trace[M - 1].err2
            tbl.rows.append([t, M, cert.T, cert.method.value, cert.point_estimate, cert.upper_bound,
                             cert.confidence, ";".join(cert.flags), err, cert.covers(err)])
    return ExperimentOutput({"error_bounds.csv": tbl}, failures)


def exp_estimator_compare(cfg: dict, trial_indices=None) -> ExperimentOutput:
    """sin-theta and JL-style point estimates of a unit error under the same holdout."""
    trials = _trial_range(cfg, trial_indices)
    N = int(cfg["signal"]["N"])
    T = int(cfg["estimator"]["T"])
    M_values = [int(M) for M in cfg["M_values"]]
    units = [(M, t) for M in M_values for t in trials]
    results, failures = map_units(functools.partial(_compare_unit, N, T, cfg["seed"]), units)
    per = Table(COMPARE_COLUMNS)
    by_M: dict[int, list[tuple[float, float]]] = {M: [] for M in M_values}
    for (M, t), (s, j) in results:
        per.rows.append([M, t, s, j])
        by_M[M].append((s, j))
    rtol = float(cfg["similar_std_rtol"])
    summary = Table(COMPARE_SUMMARY_COLUMNS)
    for M in M_values:
        vals = np.array(by_M[M]).reshape(-1, 2)
        if vals.shape[0] < 2:
            continue
        s_std, j_std = vals.std(axis=0, ddof=1)
        rel = abs(s_std - j_std) / max(s_std, j_std)
        summary.rows.append([M, vals.shape[0], float(vals[:, 0].mean()), float(s_std),
                             float(vals[:, 1].mean()), float(j_std), float(rel), rel < rtol])
    return ExperimentOutput({"estimator_compare.csv": per, "estimator_summary.csv": summary}, failures,
                            {"similar_std_rtol": rtol})


def _grid(cfg: dict, N: int) -> list[int]:
    M_min = int(cfg["M_min"])
    M_max = int(cfg["M_max"]) if cfg["M_max"] is not None else N
    step = int(cfg["M_step"])
    if not 1 <= M_min <= M_max or step < 1:
        raise ValueError(f"bad M range [{M_min}, {M_max}] step {step}")
    return list(range(M_min, M_max + 1, step))


def exp_noisy_bound(cfg: dict, trial_indices=None) -> ExperimentOutput:
    """BPDN error and its chi-square bound from the next T noisy rows over an M grid."""
    trials = _trial_range(cfg, trial_indices)
    spec = signal_spec(cfg)
    grid = _grid(cfg, spec.N)
    c = float(cfg["decoder"]["lambda_c"])
    fn = functools.partial(_noisy_unit, spec, cfg["ensemble"], dict(cfg["estimator"]), c, grid, cfg["seed"])
    results, failures = map_units(fn, trials)
    tbl = Table(NOISY_COLUMNS)
    for _, rows in results:
        tbl.rows.extend(rows)
    return ExperimentOutput({"noisy_bound.csv": tbl}, failures,
                            {"lambda": f"lambda_M = {c} * sqrt(M ln N)"})


def exp_warmstart_bench(cfg: dict, trial_indices=None) -> ExperimentOutput:
    """Simplex pivots per added measurement: cold two-phase solve against the warm augmented LP."""
    trials = _trial_range(cfg, trial_indices)
    spec = signal_spec(cfg)
    M_min = int(cfg["M_min"])
    M_max = int(cfg["M_max"]) if cfg["M_max"] is not None else spec.N
    if not 1 <= M_min < M_max <= spec.N:
        raise ValueError(f"need 1 <= M_min < M_max <= N, got [{M_min}, {M_max}] with N={spec.N}")
    fn = functools.partial(_warm_unit, spec, cfg["ensemble"], M_min, M_max, cfg["seed"])
    results, failures = map_units(fn, trials)
    detail = Table(WARM_TRIAL_COLUMNS)
    cold: dict[int, list[int]] = {}
    warm: dict[int, list[int]] = {}
    for _, rows in results:
        detail.rows.extend(rows)
        for _, M, ic, iw, *_ in rows:
            cold.setdefault(M, []).append(ic)
            warm.setdefault(M, []).append(iw)
    summary = Table(WARM_COLUMNS)
    for M in sorted(cold):
        summary.rows.append([M, float(np.mean(cold[M])), float(np.mean(warm[M]))])
    return ExperimentOutput({"warmstart_bench.csv": summary, "warmstart_trials.csv": detail}, failures)


EXPERIMENT_FUNCS = {
    "stop_hist": exp_stop_hist,
    "trace": exp_trace,
    "ct_moments": exp_ct_moments,
    "error_bounds": exp_error_bounds,
    "estimator_compare": exp_estimator_compare,
    "noisy_bound": exp_noisy_bound,
    "warmstart_bench": exp_warmstart_bench,
}


def run_experiment(cfg: dict, out_dir=None, trial_indices=None) -> RunManifest:
    """Run the configured experiment and write its CSVs plus ``manifest.json`` into ``out_dir``."""
    out = Path(out_dir if out_dir is not None else cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    snapshot = {k: v for k, v in cfg.items() if k != "preset"}
    manifest = RunManifest(
        experiment=cfg["experiment"],
        preset=cfg.get("preset"),
        config=snapshot,
        version=__version__,
        master_seed=int(cfg["seed"]),
        seed_scheme=SEED_SCHEME,
        trial_indices=_trial_range(cfg, trial_indices),
        workers=worker_count(),
        started_at=_dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    )
    manifest_path = out / "manifest.json"
    manifest.write(manifest_path)

    t0 = time.perf_counter()
    result = EXPERIMENT_FUNCS[cfg["experiment"]](cfg, trial_indices)
    for name, table in result.tables.items():
        write_csv(out / name, table)
        manifest.files.append(name)
    if result.failures:
        write_csv(out / "failures.csv", Table(FAILURE_COLUMNS, [[f.unit, f.error] for f in result.failures]))
        manifest.files.append("failures.csv")
    manifest.wall_clock_s = round(time.perf_counter() - t0, 3)
    manifest.failures = [asdict(f) for f in result.failures]
    manifest.notes = dict(result.notes)
    manifest.status = "failed" if result.failures else "complete"
    manifest.write(manifest_path)
    return manifest
