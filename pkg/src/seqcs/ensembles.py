"""Seeded measurement ensembles and synthetic test signals.

Streams are numpy ``Generator`` objects.  A trial's randomness is derived from
``(master_seed, trial_index)`` through :class:`numpy.random.SeedSequence`
spawn keys, then split into independent child streams for the signal, the
measurement rows and the additive noise.  Rows are therefore never correlated
with anything computed from earlier rows.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class EnsembleKind(str, enum.Enum):
    GAUSSIAN = "gaussian"
    BERNOULLI = "bernoulli"

    @property
    def entry_variance(self) -> float:
        return 1.0

    @property
    def continuous(self) -> bool:
        return self is EnsembleKind.GAUSSIAN

    @classmethod
    def parse(cls, value) -> "EnsembleKind":
        if isinstance(value, cls):
            return value
        aliases = {
            "gaussian": cls.GAUSSIAN,
            "gaussianstdnormal": cls.GAUSSIAN,
            "normal": cls.GAUSSIAN,
            "bernoulli": cls.BERNOULLI,
            "bernoullipm1": cls.BERNOULLI,
            "rademacher": cls.BERNOULLI,
        }
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown ensemble {value!r}") from None


@dataclass(frozen=True)
class SignalSpec:
    """Synthetic signal description.

    ``kind`` is ``"sparse"`` (``K`` nonzeros with standard normal amplitudes)
    or ``"powerlaw"`` (sorted magnitudes ``i**-exponent`` on a random
    permutation with random signs).
    """

    kind: str
    N: int
    K: int = 0
    exponent: float = 1.0

    def __post_init__(self):
        if self.kind not in ("sparse", "powerlaw"):
            raise ValueError(f"unknown signal kind {self.kind!r}")
        if self.N < 1:
            raise ValueError("N must be positive")
        if self.kind == "sparse" and not 0 <= self.K <= self.N:
            raise ValueError(f"sparsity K={self.K} outside [0, {self.N}]")
        if self.kind == "powerlaw" and self.exponent <= 0:
            raise ValueError("power-law exponent must be positive")

    @classmethod
    def sparse(cls, N: int, K: int) -> "SignalSpec":
        return cls("sparse", N, K=K)

    @classmethod
    def powerlaw(cls, N: int, exponent: float = 1.0) -> "SignalSpec":
        return cls("powerlaw", N, exponent=exponent)


@dataclass(frozen=True)
class MeasurementRecord:
    row: np.ndarray
    value: float
    noise_sigma: float = 0.0


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def trial_seed_sequence(master_seed: int, trial: int) -> np.random.SeedSequence:
    """Per-trial seed: the master seed's entropy with ``trial`` as spawn key."""
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(trial),))


@dataclass
class TrialStreams:
    signal: np.random.Generator
    rows: np.random.Generator
    noise: np.random.Generator
    extra: np.random.Generator

    @classmethod
    def for_trial(cls, master_seed: int, trial: int) -> "TrialStreams":
        children = trial_seed_sequence(master_seed, trial).spawn(4)
        return cls(*(np.random.default_rng(c) for c in children))


def generate_signal(spec: SignalSpec, seed) -> np.ndarray:
    rng = make_rng(seed)
    x = np.zeros(spec.N)
    if spec.kind == "sparse":
        if spec.K:
            support = rng.choice(spec.N, size=spec.K, replace=False)
            x[support] = rng.standard_normal(spec.K)
        return x
    magnitudes = np.arange(1, spec.N + 1, dtype=float) ** (-spec.exponent)
    perm = rng.permutation(spec.N)
    signs = rng.choice(np.array([-1.0, 1.0]), size=spec.N)
    x[perm] = magnitudes * signs
    return x


def draw_row(kind, N: int, stream: np.random.Generator) -> np.ndarray:
    kind = EnsembleKind.parse(kind)
    if kind is EnsembleKind.GAUSSIAN:
        return stream.standard_normal(N)
    return 2.0 * stream.integers(0, 2, size=N).astype(float) - 1.0


def draw_rows(kind, n_rows: int, N: int, stream: np.random.Generator) -> np.ndarray:
    """Block of ``n_rows`` rows; consumes the stream exactly like repeated :func:`draw_row`."""
    kind = EnsembleKind.parse(kind)
    if kind is EnsembleKind.GAUSSIAN:
        return stream.standard_normal((n_rows, N))
    return 2.0 * stream.integers(0, 2, size=(n_rows, N)).astype(float) - 1.0


def measure(x_true, row, noise_sigma: float, stream: np.random.Generator | None = None) -> MeasurementRecord:
    row = np.asarray(row, dtype=float)
    x_true = np.asarray(x_true, dtype=float)
    if row.shape != x_true.shape:
        raise ValueError(f"row length {row.shape} does not match signal {x_true.shape}")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be nonnegative")
    value = float(row @ x_true)
    if noise_sigma > 0:
        if stream is None:
            raise ValueError("a noise stream is required when noise_sigma > 0")
        value += noise_sigma * float(stream.standard_normal())
    return MeasurementRecord(row=row, value=value, noise_sigma=float(noise_sigma))


class MeasurementSource:
    """Sequential supplier of measurements of a fixed signal."""

    def __init__(self, x_true, kind, streams: TrialStreams, noise_sigma: float = 0.0):
        self.x_true = np.asarray(x_true, dtype=float)
        self.kind = EnsembleKind.parse(kind)
        self.noise_sigma = float(noise_sigma)
        self._streams = streams
        self.count = 0

    @property
    def N(self) -> int:
        return self.x_true.shape[0]

    def next(self) -> MeasurementRecord:
        row = draw_row(self.kind, self.N, self._streams.rows)
        self.count += 1
        return measure(self.x_true, row, self.noise_sigma, self._streams.noise)
