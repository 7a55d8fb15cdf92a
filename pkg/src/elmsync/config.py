"""TOML experiment files.

Every key is optional; missing keys fall back to the defaults below, which
mirror the reference setup (ZC preamble of 32 symbols, 160-symbol frames,
8-path channel with decay 0.2, HPA1)::

    [frame]
    n_train = 32
    frame_len = 160
    n_guard = 8
    power = 1.0
    zc_root = 1

    [channel]
    n_paths = 8
    decay = 0.2
    sparsity_prob = 0.5
    renormalize = false

    [hpa]
    preset = "hpa1"        # "hpa1", "hpa2", "none", or "custom" with the four coefficients
    input_scale = 1.0

    [experiment]
    snr_grid = [4, 8, 12, 16]
    n_train_samples = 20000
    n_hidden = 640
    n_trials = 10000
    methods = ["corr", "prop"]
    window_mode = "training"
    activation = "sigmoid"
    solver = "auto"
    reg = 1e-6
    train_snr = "uniform"  # or a number in dB

    [seeds]
    data = 1
    model = 2
    eval = 3
"""

from __future__ import annotations

import dataclasses
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .harness import ExperimentConfig
from .impairments import ChannelSpec, HpaParams, hpa_preset
from .waveform import FrameSpec


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


_SECTIONS = {
    "frame": {"n_train", "frame_len", "n_guard", "power", "zc_root"},
    "channel": {"n_paths", "decay", "sparsity_prob", "renormalize"},
    "hpa": {"preset", "alpha_a", "beta_a", "alpha_phi", "beta_phi", "input_scale"},
    "experiment": {
        "snr_grid", "n_train_samples", "n_hidden", "n_trials", "methods", "window_mode",
        "activation", "solver", "reg", "train_snr",
    },
    "seeds": {"data", "model", "eval"},
}


def _field(section, key, value, kind):
    where = f"{section}.{key}"
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
    elif kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        value = float(value)
    elif kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
    elif kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
    return value


def _build(section, factory, **kwargs):
    try:
        return factory(**kwargs)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[{section}] {exc}") from None


def config_from_dict(doc: dict) -> ExperimentConfig:
    for section, body in doc.items():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        if not isinstance(body, dict):
            raise ConfigError(f"[{section}] must be a table")
        extra = set(body) - _SECTIONS[section]
        if extra:
            raise ConfigError(f"{section}.{sorted(extra)[0]}: unknown field")

    fr = doc.get("frame", {})
    n_train = _field("frame", "n_train", fr.get("n_train", 32), int)
    frame_len = _field("frame", "frame_len", fr.get("frame_len", 160), int)
    n_guard = _field("frame", "n_guard", fr.get("n_guard", 8), int)
    power = _field("frame", "power", fr.get("power", 1.0), float)
    zc_root = _field("frame", "zc_root", fr.get("zc_root", 1), int)
    frame = _build("frame", FrameSpec.from_lengths, n_train=n_train, frame_len=frame_len,
                   n_guard=n_guard, power=power)

    ch = doc.get("channel", {})
    channel = _build(
        "channel",
        ChannelSpec,
        n_paths=_field("channel", "n_paths", ch.get("n_paths", 8), int),
        decay=_field("channel", "decay", ch.get("decay", 0.2), float),
        sparsity_prob=_field("channel", "sparsity_prob", ch.get("sparsity_prob", 0.5), float),
        renormalize=_field("channel", "renormalize", ch.get("renormalize", False), bool),
    )

    hp = doc.get("hpa", {})
    preset = _field("hpa", "preset", hp.get("preset", "hpa1"), str).lower()
    scale = _field("hpa", "input_scale", hp.get("input_scale", 1.0), float)
    coeffs = {k: _field("hpa", k, hp[k], float) for k in ("alpha_a", "beta_a", "alpha_phi", "beta_phi") if k in hp}
    if preset == "custom":
        missing = {"alpha_a", "beta_a", "alpha_phi", "beta_phi"} - set(coeffs)
        if missing:
            raise ConfigError(f"hpa.{sorted(missing)[0]}: required when preset = 'custom'")
        hpa = _build("hpa", HpaParams, **coeffs, input_scale=scale)
    else:
        if coeffs:
            raise ConfigError(f"hpa.{sorted(coeffs)[0]}: coefficients need preset = 'custom'")
        try:
            hpa = hpa_preset(preset)
        except ValueError as exc:
            raise ConfigError(f"hpa.preset: {exc}") from None
        if hpa is not None and scale != 1.0:
            hpa = _build("hpa", lambda: dataclasses.replace(hpa, input_scale=scale))

    ex = doc.get("experiment", {})
    kw = {}
    if "snr_grid" in ex:
        grid = ex["snr_grid"]
        if not isinstance(grid, list) or not grid:
            raise ConfigError("experiment.snr_grid: expected a nonempty list of numbers")
        kw["snr_grid"] = tuple(_field("experiment", "snr_grid", v, float) for v in grid)
    for key in ("n_train_samples", "n_hidden", "n_trials"):
        if key in ex:
            kw[key] = _field("experiment", key, ex[key], int)
    if "methods" in ex:
        methods = ex["methods"]
        if not isinstance(methods, list):
            raise ConfigError("experiment.methods: expected a list of method names")
        kw["methods"] = tuple(_field("experiment", "methods", m, str) for m in methods)
    for key in ("window_mode", "activation", "solver"):
        if key in ex:
            kw[key] = _field("experiment", key, ex[key], str)
    if "reg" in ex:
        kw["reg"] = _field("experiment", "reg", ex["reg"], float)
    if "train_snr" in ex:
        ts = ex["train_snr"]
        kw["train_snr"] = None if ts == "uniform" else _field("experiment", "train_snr", ts, float)
    if kw.get("solver", "auto") not in ("auto", "svd", "ridge"):
        raise ConfigError(f"experiment.solver: unknown solver {kw['solver']!r}")

    sd = doc.get("seeds", {})
    for key, name in (("data", "seed_data"), ("model", "seed_model"), ("eval", "seed_eval")):
        if key in sd:
            kw[name] = _field("seeds", key, sd[key], int)

    return _build("experiment", ExperimentConfig, frame=frame, channel=channel, hpa=hpa,
                  zc_root=zc_root, **kw)


def load_config(path) -> ExperimentConfig:
    """Parse a TOML experiment file. Raises FileNotFoundError or ConfigError."""
    with open(path, "rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: not valid TOML: {exc}") from None
    return config_from_dict(doc)
