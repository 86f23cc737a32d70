"""Sequential acquisition: measure, decode, and decide whether to stop.

A session draws one measurement at a time.  Agreement rules test the held
reconstruction against the new measurement first and only re-run the decoder
when the test fails; the cardinality rule inspects each fresh decode; the
error rule certifies the reconstruction from ``T`` steps back using the
``T`` measurements taken since.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .ensembles import EnsembleKind, MeasurementRecord, MeasurementSource, SignalSpec, TrialStreams, generate_signal
from .estimators import ErrorCertificate, HoldoutBatch, certify_chebyshev, chi2_interval
from .errors import ConfigError
from .solvers.basis_pursuit import SequentialBasisPursuit
from .solvers.bpdn import SequentialBPDN
from .solvers.omp import SequentialOMP

AGREE_TOL = 1e-8
# LP basic solutions carry exact zeros up to rounding (observed <= 2e-15
# relative), while genuine entries of intermediate solutions can be as small
# as 1e-8 relative; counting those as zero fires the cardinality rule early.
ZERO_TOL_REL = 1e-12
TRACE_COLUMNS = ("M", "l0", "l1", "err2", "agreed", "stopped", "reason")
CERT_COLUMNS = ("M", "T", "method", "point", "bound", "confidence", "flags")


class RuleKind(str, enum.Enum):
    ONE_STEP = "one_step"
    CARDINALITY = "cardinality"
    T_STEP = "t_step"
    ERROR_BELOW = "error_below"


@dataclass(frozen=True)
class StoppingRule:
    kind: RuleKind
    T: int = 1
    agree_tol: float = AGREE_TOL
    error_tol: float | None = None
    certifier: str = "chi2"
    k: float = 3.0
    alpha: float = 0.1

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.agree_tol <= 0:
            raise ValueError("agreement tolerance must be positive")
        if self.certifier not in ("chi2", "chebyshev"):
            raise ValueError(f"unknown certifier {self.certifier!r}")

    @classmethod
    def one_step(cls, agree_tol: float = AGREE_TOL) -> "StoppingRule":
        return cls(RuleKind.ONE_STEP, T=1, agree_tol=agree_tol)

    @classmethod
    def cardinality(cls) -> "StoppingRule":
        return cls(RuleKind.CARDINALITY)

    @classmethod
    def t_step(cls, T: int, agree_tol: float = AGREE_TOL) -> "StoppingRule":
        return cls(RuleKind.T_STEP, T=T, agree_tol=agree_tol)

    @classmethod
    def error_below(cls, tol: float | None, certifier: str = "chi2", T: int = 10, k: float = 3.0,
                    alpha: float = 0.1) -> "StoppingRule":
        return cls(RuleKind.ERROR_BELOW, T=T, error_tol=tol, certifier=certifier, k=k, alpha=alpha)

    @property
    def uses_agreement(self) -> bool:
        return self.kind in (RuleKind.ONE_STEP, RuleKind.T_STEP)

    @property
    def window(self) -> int:
        return 1 if self.kind is RuleKind.ONE_STEP else self.T


def check_agreement(x_hat, rec: MeasurementRecord, agree_tol: float = AGREE_TOL) -> bool:
    """Does the held reconstruction already reproduce the new measurement?"""
    return abs(float(rec.row @ x_hat) - rec.value) <= agree_tol * (1.0 + abs(rec.value))


def default_zero_tol(x_hat) -> float:
    return ZERO_TOL_REL * max(1.0, float(np.abs(x_hat).max(initial=0.0)))


def l0_norm(x_hat, zero_tol: float | None = None) -> int:
    tol = default_zero_tol(x_hat) if zero_tol is None else zero_tol
    return int(np.count_nonzero(np.abs(x_hat) > tol))


def cardinality_stop(x_hat, M: int, zero_tol: float | None = None) -> bool:
    return l0_norm(x_hat, zero_tol) < M


def t_step_rule_error_bound(T: int) -> float:
    """Bound on the chance that T agreeing Bernoulli rows confirm a wrong reconstruction."""
    if T < 1:
        raise ValueError("T must be >= 1")
    return 2.0 ** (-T)


def bernoulli_cardinality_confidence(N: int, M: int) -> float:
    """Heuristic confidence ``max(0, 1 - N^2 2^(1-M))`` for the cardinality rule on +-1 rows."""
    if N < 1 or M < 1:
        raise ValueError("N and M must be >= 1")
    return max(0.0, 1.0 - N * N * 2.0 ** (1 - M))


@dataclass(frozen=True)
class SessionConfig:
    signal: SignalSpec
    ensemble: EnsembleKind = EnsembleKind.GAUSSIAN
    decoder: str = "bp"
    rule: StoppingRule = field(default_factory=StoppingRule.one_step)
    budget: int | None = None
    noise_sigma: float = 0.0
    lambda_c: float = 0.01
    omp_tol: float = 1e-10

    def __post_init__(self):
        object.__setattr__(self, "ensemble", EnsembleKind.parse(self.ensemble))
        if self.decoder not in DECODERS:
            raise ConfigError(f"unknown decoder {self.decoder!r}; choose from {sorted(DECODERS)}")
        if self.budget is not None and self.budget < 1:
            raise ConfigError("budget must be >= 1")

    @property
    def N(self) -> int:
        return self.signal.N

    @property
    def effective_budget(self) -> int:
        return self.N + 10 if self.budget is None else self.budget


def _make_decoder(cfg: SessionConfig):
    if cfg.decoder == "bp":
        return SequentialBasisPursuit(cfg.N, warm=True)
    if cfg.decoder == "bp-cold":
        return SequentialBasisPursuit(cfg.N, warm=False)
    if cfg.decoder == "omp":
        return SequentialOMP(cfg.N, cfg.omp_tol)
    return SequentialBPDN(cfg.N, cfg.lambda_c)


DECODERS = ("bp", "bp-cold", "omp", "bpdn")


@dataclass(frozen=True)
class TraceRow:
    M: int
    l0: int
    l1: float
    err2: float | None
    agreed: bool
    stopped: bool
    reason: str


@dataclass
class SessionResult:
    M_stop: int
    x_hat: np.ndarray
    reason: str
    trace: list[TraceRow]
    certificates: list[tuple[int, ErrorCertificate]] = field(default_factory=list)
    x_true: np.ndarray | None = None
    confirmation_overhead: int = 0
    heuristic_confidence: float | None = None
    M_start: int = 1

    @property
    def stopped(self) -> bool:
        return self.reason != "budget_exhausted"

    @property
    def final_error(self) -> float | None:
        if self.x_true is None:
            return None
        return float(np.linalg.norm(self.x_hat - self.x_true))

    def trace_csv(self) -> str:
        return trace_to_csv(self.trace)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def trace_to_csv(trace: list[TraceRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for r in trace:
        w.writerow([_fmt(r.M), _fmt(r.l0), _fmt(r.l1), _fmt(r.err2), _fmt(r.agreed), _fmt(r.stopped), r.reason])
    return buf.getvalue()


def certificates_to_csv(certs: list[tuple[int, ErrorCertificate]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CERT_COLUMNS)
    for M, c in certs:
        w.writerow([M, c.T, c.method.value, _fmt(c.point_estimate), _fmt(c.upper_bound),
                    _fmt(c.confidence), ";".join(c.flags)])
    return buf.getvalue()


def run_session(cfg: SessionConfig, master_seed: int = 0, trial: int = 0,
                x_true: np.ndarray | None = None) -> SessionResult:
    """Run one sequential acquisition to its stopping time (or the budget)."""
    streams = TrialStreams.for_trial(master_seed, trial)
    if x_true is None:
        x_true = generate_signal(cfg.signal, streams.signal)
    x_true = np.asarray(x_true, dtype=float)
    N = x_true.shape[0]
    rule = cfg.rule
    source = MeasurementSource(x_true, cfg.ensemble, streams, cfg.noise_sigma)
    decoder = _make_decoder(cfg)
    budget = cfg.effective_budget
    is_bp = cfg.decoder in ("bp", "bp-cold")

    trace: list[TraceRow] = []
    certs: list[tuple[int, ErrorCertificate]] = []
    rows: list[np.ndarray] = []
    values: list[float] = []
    history: dict[int, np.ndarray] = {}
    held: np.ndarray | None = None
    agree_count = 0
    final = np.zeros(N)
    reason = "budget_exhausted"
    M = 0

    while M < budget:
        rec = source.next()
        M += 1
        rows.append(rec.row)
        values.append(rec.value)
        decoder.add(rec.row, rec.value)

        agreed = False
        if rule.uses_agreement and held is not None:
            agreed = check_agreement(held, rec, rule.agree_tol)
        if agreed:
            agree_count += 1
            x_hat = held
        else:
            agree_count = 0
            if is_bp and M > N:
                # the system was already determined; the held solution is exact
                x_hat = held
            else:
                x_hat = decoder.solve()
            held = x_hat
        history[M] = x_hat

        stop = False
        if rule.uses_agreement and agree_count >= rule.window:
            stop, reason = True, "agreement"
            final = x_hat
        elif rule.kind is RuleKind.CARDINALITY and cardinality_stop(x_hat, M):
            stop, reason = True, "cardinality"
            final = x_hat
        elif rule.kind is RuleKind.ERROR_BELOW and M - rule.T >= 1:
            M_fit = M - rule.T
            cert = _certify(rule, cfg, np.array(rows), np.array(values), history[M_fit], M_fit)
            if cert is not None:
                certs.append((M_fit, cert))
                if rule.error_tol is not None and cert.upper_bound <= rule.error_tol:
                    stop, reason = True, "error_below"
                    final = history[M_fit]
        if not stop:
            final = x_hat

        err = float(np.linalg.norm(x_hat - x_true))
        trace.append(TraceRow(M, l0_norm(x_hat), float(np.abs(x_hat).sum()), err, agreed, stop,
                              reason if stop else ""))
        if stop:
            break

    overhead = 0
    if reason == "agreement":
        overhead = rule.window
    elif reason == "error_below":
        overhead = rule.T
    heuristic = None
    if rule.kind is RuleKind.CARDINALITY and cfg.ensemble is EnsembleKind.BERNOULLI:
        heuristic = bernoulli_cardinality_confidence(N, M)
    return SessionResult(
        M_stop=M, x_hat=final, reason=reason, trace=trace, certificates=certs, x_true=x_true,
        confirmation_overhead=overhead, heuristic_confidence=heuristic,
    )


def _certify(rule: StoppingRule, cfg: SessionConfig, A_all, y_all, x_fit, M_fit) -> ErrorCertificate | None:
    T = rule.T
    if rule.certifier == "chebyshev":
        if A_all.shape[0] > A_all.shape[1] or T <= 2:
            return None
        return certify_chebyshev(A_all, y_all, x_fit, T, rule.k)
    batch = HoldoutBatch(A_all[M_fit:M_fit + T], y_all[M_fit:M_fit + T])
    return chi2_interval(batch, x_fit, rule.alpha, cfg.noise_sigma,
                         entry_variance=cfg.ensemble.entry_variance,
                         approximate=not cfg.ensemble.continuous)
