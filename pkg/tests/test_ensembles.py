import numpy as np
import pytest

from seqcs.ensembles import (EnsembleKind, MeasurementSource, SignalSpec, TrialStreams, draw_row, draw_rows,
                             generate_signal, measure, trial_seed_sequence)


def test_sparse_zero_and_full():
    assert not generate_signal(SignalSpec.sparse(100, 0), 1).any()
    assert np.count_nonzero(generate_signal(SignalSpec.sparse(100, 100), 1)) == 100


def test_sparse_support_size():
    x = generate_signal(SignalSpec.sparse(50, 7), 3)
    assert np.count_nonzero(x) == 7


def test_signal_deterministic():
    spec = SignalSpec.sparse(100, 10)
    assert np.array_equal(generate_signal(spec, 42), generate_signal(spec, 42))


def test_powerlaw_magnitudes():
    x = generate_signal(SignalSpec.powerlaw(20, 1.0), 0)
    assert np.allclose(np.sort(np.abs(x))[::-1], 1.0 / np.arange(1, 21))


def test_signal_spec_validation():
    with pytest.raises(ValueError):
        SignalSpec.sparse(10, 11)
    with pytest.raises(ValueError):
        SignalSpec("dense", 10)


def test_bernoulli_entries():
    row = draw_row("bernoulli", 1000, np.random.default_rng(0))
    assert set(np.unique(row)) <= {-1.0, 1.0}


def test_gaussian_moments():
    rows = draw_rows(EnsembleKind.GAUSSIAN, 10_000, 5, np.random.default_rng(1))
    assert np.all(np.abs(rows.mean(axis=0)) <= 0.05)
    var = rows.var(axis=0, ddof=1)
    assert np.all((0.9 <= var) & (var <= 1.1))


@pytest.mark.parametrize("kind", ["gaussian", "bernoulli"])
def test_block_draw_matches_row_by_row(kind):
    a = np.random.default_rng(9)
    b = np.random.default_rng(9)
    block = draw_rows(kind, 6, 11, a)
    single = np.array([draw_row(kind, 11, b) for _ in range(6)])
    assert np.array_equal(block, single)


def test_same_seed_same_rows():
    r1 = [draw_row("gaussian", 8, s) for s in [np.random.default_rng(4)] * 3]
    r2 = [draw_row("gaussian", 8, s) for s in [np.random.default_rng(4)] * 3]
    assert all(np.array_equal(a, b) for a, b in zip(r1, r2))


def test_ensemble_parse_aliases():
    assert EnsembleKind.parse("Rademacher") is EnsembleKind.BERNOULLI
    assert EnsembleKind.parse(EnsembleKind.GAUSSIAN) is EnsembleKind.GAUSSIAN
    with pytest.raises(ValueError):
        EnsembleKind.parse("uniform")


def test_measure_noiseless_exact():
    rng = np.random.default_rng(2)
    x = rng.standard_normal(6)
    row = rng.standard_normal(6)
    assert measure(x, row, 0.0).value == row @ x
    assert measure(x, np.eye(6)[0], 0.0).value == x[0]


def test_measure_noise_variance():
    rng = np.random.default_rng(3)
    x = np.zeros(4)
    vals = [measure(x, np.ones(4), 1.0, rng).value for _ in range(10_000)]
    assert 0.9 <= np.var(vals, ddof=1) <= 1.1


def test_measure_noise_needs_stream():
    with pytest.raises(ValueError):
        measure(np.zeros(3), np.ones(3), 0.5)


def test_trial_streams_scheme():
    ss = trial_seed_sequence(7, 3)
    assert ss.entropy == 7 and ss.spawn_key == (3,)
    a = TrialStreams.for_trial(7, 3)
    b = TrialStreams.for_trial(7, 3)
    c = TrialStreams.for_trial(7, 4)
    assert a.rows.standard_normal() == b.rows.standard_normal()
    assert a.signal.standard_normal() != c.signal.standard_normal()


def test_measurement_source_counts():
    x = np.arange(5.0)
    src = MeasurementSource(x, "gaussian", TrialStreams.for_trial(0, 0))
    recs = [src.next() for _ in range(3)]
    assert src.count == 3
    assert all(r.value == pytest.approx(r.row @ x) for r in recs)
