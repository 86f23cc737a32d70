import math

import numpy as np
import pytest

from seqcs.ensembles import SignalSpec, draw_row, measure
from seqcs.sequential import (TRACE_COLUMNS, SessionConfig, StoppingRule, bernoulli_cardinality_confidence,
                              cardinality_stop, check_agreement, l0_norm, run_session, t_step_rule_error_bound)


def test_agreement_exact_reconstruction():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(30)
    for _ in range(100):
        assert check_agreement(x, measure(x, draw_row("gaussian", 30, rng), 0.0))


def test_gaussian_agreement_never_fires_for_wrong_estimate():
    rng = np.random.default_rng(1)
    x_true = rng.standard_normal(20)
    x_hat = x_true.copy()
    x_hat[3] += 0.1
    hits = sum(check_agreement(x_hat, measure(x_true, draw_row("gaussian", 20, rng), 0.0))
               for _ in range(10_000))
    assert hits == 0


def test_bernoulli_agreement_half_for_opposite_pair():
    # delta = e1 - e2: agreement iff the two relevant signs match, 2 of 4 patterns
    rng = np.random.default_rng(2)
    x_true = np.zeros(10)
    x_hat = x_true.copy()
    x_hat[0], x_hat[1] = 1.0, -1.0
    n = 4000
    hits = sum(check_agreement(x_hat, measure(x_true, draw_row("bernoulli", 10, rng), 0.0)) for _ in range(n))
    assert abs(hits / n - 0.5) <= 3 * math.sqrt(0.25 / n)


@pytest.mark.parametrize("T", [1, 3, 5])
def test_t_step_false_stop_frequency(T):
    rng = np.random.default_rng(3 + T)
    x_true = np.zeros(10)
    x_hat = np.zeros(10)
    x_hat[0], x_hat[1] = 1.0, -1.0
    n = 4000
    runs = 0
    for _ in range(n):
        runs += all(check_agreement(x_hat, measure(x_true, draw_row("bernoulli", 10, rng), 0.0)) for _ in range(T))
    p = t_step_rule_error_bound(T)
    assert runs / n <= p + 3 * math.sqrt(p * (1 - p) / n)


def test_t_step_bound_values():
    assert t_step_rule_error_bound(1) == 0.5
    assert t_step_rule_error_bound(10) == pytest.approx(0.000977, abs=1e-6)


def test_cardinality_examples():
    assert cardinality_stop(np.zeros(5), 1)
    assert not cardinality_stop(np.array([1.0, 2.0, 0.0]), 2)
    assert cardinality_stop(np.array([1.0, 2.0, 0.0]), 3)


def test_l0_ignores_rounding_noise():
    assert l0_norm(np.array([1.0, 1e-15, -3.0])) == 2


def test_bernoulli_confidence():
    assert bernoulli_cardinality_confidence(100, 30) == pytest.approx(1 - 1e4 * 2.0**-29)
    assert bernoulli_cardinality_confidence(100, 30) == pytest.approx(0.999981, abs=1e-6)
    assert bernoulli_cardinality_confidence(100, 10) == 0.0
    assert bernoulli_cardinality_confidence(1, 2) == 0.5


def test_zero_signal_cardinality_stops_at_one():
    res = run_session(SessionConfig(SignalSpec.sparse(30, 0), rule=StoppingRule.cardinality()))
    assert res.M_stop == 1 and res.reason == "cardinality"
    assert not res.x_hat.any()


def test_cardinality_stops_are_exact():
    cfg = SessionConfig(SignalSpec.sparse(50, 5), rule=StoppingRule.cardinality())
    for trial in range(30):
        res = run_session(cfg, master_seed=5, trial=trial)
        assert res.stopped
        assert res.final_error <= 1e-6


def test_one_step_stops_are_exact_and_after_k():
    cfg = SessionConfig(SignalSpec.sparse(50, 5), rule=StoppingRule.one_step())
    for trial in range(30):
        res = run_session(cfg, master_seed=6, trial=trial)
        assert res.reason == "agreement" and res.M_stop > 5
        assert res.final_error <= 1e-6


def test_trace_shape_and_csv_header():
    res = run_session(SessionConfig(SignalSpec.sparse(40, 4)), master_seed=1)
    assert [r.M for r in res.trace] == list(range(1, res.M_stop + 1))
    assert all(r.l0 <= r.M for r in res.trace)
    assert res.trace_csv().splitlines()[0] == ",".join(TRACE_COLUMNS)
    assert res.trace[-1].stopped


def test_budget_exhausted():
    cfg = SessionConfig(SignalSpec.sparse(60, 20), rule=StoppingRule.cardinality(), budget=5)
    res = run_session(cfg)
    assert res.reason == "budget_exhausted" and not res.stopped and res.M_stop == 5


def test_session_reproducible():
    cfg = SessionConfig(SignalSpec.sparse(40, 4))
    a, b = run_session(cfg, 9, 2), run_session(cfg, 9, 2)
    assert a.trace_csv() == b.trace_csv()


def test_bernoulli_cardinality_reports_heuristic():
    cfg = SessionConfig(SignalSpec.sparse(30, 3), ensemble="bernoulli", rule=StoppingRule.cardinality())
    res = run_session(cfg)
    assert res.heuristic_confidence == bernoulli_cardinality_confidence(30, res.M_stop)


@pytest.mark.parametrize("decoder", ["omp", "bpdn", "bp-cold"])
def test_other_decoders_run(decoder):
    cfg = SessionConfig(SignalSpec.sparse(40, 3), decoder=decoder, rule=StoppingRule.one_step(), lambda_c=1e-4)
    res = run_session(cfg, master_seed=4)
    assert res.M_stop >= 1 and len(res.trace) == res.M_stop


def test_error_below_certifies():
    rule = StoppingRule.error_below(1e-6, certifier="chi2", T=5)
    res = run_session(SessionConfig(SignalSpec.sparse(40, 4), rule=rule), master_seed=3)
    assert res.reason == "error_below"
    assert res.final_error <= 1e-6
    assert res.certificates and res.certificates[-1][1].upper_bound <= 1e-6


def test_unknown_decoder_rejected():
    from seqcs.errors import ConfigError
    with pytest.raises(ConfigError):
        SessionConfig(SignalSpec.sparse(10, 1), decoder="lasso")
