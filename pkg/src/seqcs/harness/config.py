"""Experiment configuration: YAML files, named presets and dotted overrides."""

from __future__ import annotations

import copy
from pathlib import Path

import yaml

from ..errors import ConfigError

EXPERIMENTS = (
    "stop_hist",
    "trace",
    "ct_moments",
    "error_bounds",
    "estimator_compare",
    "noisy_bound",
    "warmstart_bench",
)

# Constant in lambda_M = c * sqrt(M log N) for the noisy preset; picked by a
# desk-scale sweep at N=1000, K=100, sigma_n=0.01.
DEFAULT_LAMBDA_C = 0.003

BASE = {
    "experiment": None,
    "ensemble": "gaussian",
    "ensembles": None,
    "signal": {"kind": "sparse", "N": 100, "K": 10, "exponent": 1.0},
    "decoder": {"name": "bp", "lambda_c": DEFAULT_LAMBDA_C, "omp_tol": 1e-10},
    "rule": {"kind": "one_step", "T": 1, "agree_tol": 1e-8, "error_tol": None,
             "certifier": "chi2", "k": 3.0, "alpha": 0.1},
    "estimator": {"T": 5, "k": 3.0, "alpha": 0.1, "noise_sigma": 0.0},
    "trials": 1,
    "seed": 2009,
    "budget": None,
    "out": "results",
    # experiment specific
    "L": 100,
    "T_values": list(range(3, 51)),
    "n_samples": 5000,
    "M_values": [0, 200],
    "M_min": 1,
    "M_max": None,
    "M_step": 1,
    "similar_std_rtol": 0.15,
}

PRESETS = {
    "fig1": {
        "experiment": "stop_hist",
        "ensembles": ["gaussian", "bernoulli"],
        "signal": {"kind": "sparse", "N": 100, "K": 10},
        "rule": {"kind": "one_step"},
        "trials": 500,
    },
    "fig3": {
        "experiment": "trace",
        "signal": {"kind": "sparse", "N": 100, "K": 10},
        "rule": {"kind": "one_step"},
        "trials": 1,
    },
    "fig4": {
        "experiment": "ct_moments",
        "L": 100,
        "T_values": list(range(3, 51)),
        "n_samples": 5000,
    },
    "fig5": {
        "experiment": "error_bounds",
        "signal": {"kind": "sparse", "N": 100, "K": 10},
        "estimator": {"T": 5, "k": 3.0},
        "rule": {"kind": "error_below", "certifier": "chebyshev", "T": 5, "k": 3.0},
        "budget": 60,
        "trials": 1,
    },
    "fig5-powerlaw": {
        "experiment": "error_bounds",
        "signal": {"kind": "powerlaw", "N": 1000, "exponent": 1.0},
        "estimator": {"T": 10, "k": 3.0},
        "rule": {"kind": "error_below", "certifier": "chebyshev", "T": 10, "k": 3.0},
        "budget": 400,
        "trials": 1,
    },
    "fig6": {
        "experiment": "estimator_compare",
        "signal": {"kind": "sparse", "N": 250, "K": 0},
        "estimator": {"T": 25},
        "M_values": [0, 200],
        "trials": 5000,
    },
    "fig7": {
        "experiment": "noisy_bound",
        "signal": {"kind": "sparse", "N": 1000, "K": 100},
        "decoder": {"name": "bpdn", "lambda_c": DEFAULT_LAMBDA_C},
        "estimator": {"T": 10, "alpha": 0.1, "noise_sigma": 0.01},
        "M_min": 20,
        "M_max": 700,
        "M_step": 20,
        "trials": 1,
    },
    "fig8": {
        "experiment": "warmstart_bench",
        "signal": {"kind": "sparse", "N": 200, "K": 10},
        "M_min": 1,
        "M_max": 100,
        "trials": 100,
    },
}

PRESET_DESCRIPTIONS = {
    "fig1": "stopping-time histogram, Gaussian and Bernoulli rows, N=100, K=10",
    "fig3": "single-trial trace of l0, l1 and error, N=100, K=10",
    "fig4": "Monte Carlo moments of C_T against the closed forms, L=100",
    "fig5": "Chebyshev error bound vs true error, sparse N=100, K=10, T=5",
    "fig5-powerlaw": "Chebyshev error bound vs true error, power-law N=1000, T=10",
    "fig6": "chi-square vs sin-theta point estimates, N=250, T=25, M in {0, 200}",
    "fig7": "noisy chi-square 90% bound with BPDN, N=1000, K=100, T=10, sigma=0.01",
    "fig8": "simplex pivots, cold two-phase vs warm augmented LP, N=200, K=10",
}


def deep_merge(base: dict, update: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _check_keys(cfg: dict, ref: dict, prefix: str = ""):
    for key, value in cfg.items():
        if key not in ref:
            raise ConfigError(f"unknown config key {prefix + key!r}")
        if isinstance(ref[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {prefix + key!r} must be a mapping")
            _check_keys(value, ref[key], prefix + key + ".")


def parse_override(text: str) -> tuple[list[str], object]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(f"override {text!r} has an empty key")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse override value {raw!r}: {exc}") from None
    return key.split("."), value


def apply_overrides(cfg: dict, overrides) -> dict:
    cfg = copy.deepcopy(cfg)
    for text in overrides or ():
        path, value = parse_override(text)
        node = cfg
        for part in path[:-1]:
            if not isinstance(node.get(part), dict):
                raise ConfigError(f"override path {'.'.join(path)!r} does not name a nested key")
            node = node[part]
        if path[-1] not in node:
            raise ConfigError(f"unknown config key {'.'.join(path)!r}")
        node[path[-1]] = value
    return cfg


def validate(cfg: dict) -> dict:
    _check_keys(cfg, BASE)
    if cfg.get("experiment") not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {cfg.get('experiment')!r}")
    try:
        trials = int(cfg["trials"])
    except (TypeError, ValueError):
        raise ConfigError("trials must be an integer") from None
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise ConfigError("seed must be a nonnegative integer")
    sig = cfg["signal"]
    if sig.get("kind") not in ("sparse", "powerlaw"):
        raise ConfigError(f"signal.kind must be sparse or powerlaw, got {sig.get('kind')!r}")
    if not isinstance(sig.get("N"), int) or sig["N"] < 1:
        raise ConfigError("signal.N must be a positive integer")
    if sig["kind"] == "sparse" and not (isinstance(sig.get("K"), int) and 0 <= sig["K"] <= sig["N"]):
        raise ConfigError("signal.K must be an integer in [0, N]")
    if cfg["decoder"]["name"] not in ("bp", "bp-cold", "omp", "bpdn"):
        raise ConfigError(f"unknown decoder {cfg['decoder']['name']!r}")
    if cfg["rule"]["kind"] not in ("one_step", "cardinality", "t_step", "error_below"):
        raise ConfigError(f"unknown rule {cfg['rule']['kind']!r}")
    ensembles = cfg["ensembles"] or [cfg["ensemble"]]
    for e in ensembles:
        if str(e).lower() not in ("gaussian", "bernoulli"):
            raise ConfigError(f"unknown ensemble {e!r}")
    return cfg


def load_config(target: str, overrides=None, trials=None, seed=None, out=None) -> dict:
    """Resolve a preset name or YAML path into a validated config dict."""
    if target in PRESETS:
        cfg = deep_merge(BASE, PRESETS[target])
        cfg["preset"] = target
    else:
        path = Path(target)
        if not path.is_file():
            raise ConfigError(f"{target!r} is neither a preset ({', '.join(PRESETS)}) nor a file")
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {target}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{target} must hold a mapping at top level")
        base = BASE
        if "preset" in data:
            preset = data.pop("preset")
            if preset not in PRESETS:
                raise ConfigError(f"unknown preset {preset!r}")
            base = deep_merge(BASE, PRESETS[preset])
        _check_keys(data, BASE)
        cfg = deep_merge(base, data)
        cfg["preset"] = None
    preset = cfg.pop("preset")
    cfg = apply_overrides(cfg, overrides)
    if trials is not None:
        cfg["trials"] = trials
    if seed is not None:
        cfg["seed"] = seed
    if out is not None:
        cfg["out"] = out
    validate(cfg)
    cfg["preset"] = preset
    return cfg
