"""Seeded Monte Carlo experiments: datasets, training, error-probability sweeps.

Random numbers come from counter-derived streams: block ``k`` of the
training set uses ``SeedSequence(seed_data, spawn_key=(DATA, k))`` and
block ``k`` of every evaluation cell uses ``SeedSequence(seed_eval,
spawn_key=(EVAL, k))``. Results therefore do not depend on the order in
which blocks are processed, and training and evaluation never share a
stream even when the integer seeds coincide. Evaluation blocks are shared
across SNR points and methods (common random numbers), so curves are
compared on identical channel and offset draws.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from . import elm
from .impairments import (
    HPA_PRESETS,
    WINDOW_MODES,
    ChannelSpec,
    HpaParams,
    draw_channels,
    hpa_preset,
    noise_variance,
    synthesize_rx_batch,
    transmit_source,
)
from .metrics import corr_estimate, cross_corr_metric, normalize_metric
from .waveform import FrameSpec, assemble_frame, random_data_symbols, zadoff_chu

METHODS = ("corr", "prop", "fs_learn")
MODEL_FEATURES = {"prop": "metric", "fs_learn": "raw"}
AXES = ("L", "Ns", "M", "hpa", "eta")

DOMAIN_DATA = 1
DOMAIN_EVAL = 2
BLOCK = 2048

CSV_COLUMNS = [
    "method",
    "snr_db",
    "trials",
    "errors",
    "pe",
    "ci_lo",
    "ci_hi",
    "config_hash",
    "seed_data",
    "seed_model",
    "seed_eval",
]

PROFILES = {
    "desk": {"n_train_samples": 20_000, "n_hidden": 640, "n_trials": 10_000},
    "paper": {"n_train_samples": 100_000, "n_hidden": 1280, "n_trials": 10_000},
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment.

    ``train_snr`` of ``None`` draws each training sample's SNR uniformly over
    ``[min(snr_grid), max(snr_grid)]``; a number fixes it.
    """

    frame: FrameSpec = FrameSpec()
    channel: ChannelSpec = ChannelSpec()
    hpa: HpaParams | None = HPA_PRESETS["hpa1"]
    snr_grid: tuple = (4.0, 8.0, 12.0, 16.0)
    n_train_samples: int = 20_000
    n_hidden: int = 640
    n_trials: int = 10_000
    methods: tuple = ("corr", "prop")
    seed_data: int = 1
    seed_model: int = 2
    seed_eval: int = 3
    window_mode: str = "training"
    activation: str = "sigmoid"
    solver: str = "auto"
    reg: float = elm.DEFAULT_RIDGE
    train_snr: float | None = None
    zc_root: int = 1

    def __post_init__(self):
        object.__setattr__(self, "snr_grid", tuple(float(v) for v in self.snr_grid))
        object.__setattr__(self, "methods", tuple(self.methods))
        if not self.snr_grid:
            raise ValueError("snr_grid must not be empty")
        if self.n_trials < 1:
            raise ValueError(f"n_trials must be >= 1, got {self.n_trials}")
        if self.n_train_samples < 1 or self.n_hidden < 1:
            raise ValueError("n_train_samples and n_hidden must be >= 1")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ValueError(f"methods must be a nonempty subset of {METHODS}, got {self.methods}")
        if self.window_mode not in WINDOW_MODES:
            raise ValueError(f"window_mode must be one of {WINDOW_MODES}, got {self.window_mode!r}")
        if self.activation not in elm.ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        for name in ("seed_data", "seed_model", "seed_eval"):
            v = getattr(self, name)
            if not 0 <= v < 2**64:
                raise ValueError(f"{name} must be a non-negative 64-bit integer")

    @property
    def seeds(self):
        return (self.seed_data, self.seed_model, self.seed_eval)

    def with_profile(self, name: str) -> "ExperimentConfig":
        try:
            return dataclasses.replace(self, **PROFILES[name])
        except KeyError:
            raise ValueError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}") from None

    def training_snr_policy(self) -> str:
        if self.train_snr is None:
            return f"uniform[{min(self.snr_grid)},{max(self.snr_grid)}]"
        return f"fixed[{self.train_snr}]"

    def preamble(self) -> np.ndarray:
        return zadoff_chu(self.frame.n_train, self.zc_root, self.frame.power)


def config_hash(cfg: ExperimentConfig) -> str:
    blob = json.dumps(dataclasses.asdict(cfg), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def stream(seed: int, domain: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(domain, *key))))


def wilson_interval(errors: int, trials: int, confidence: float = 0.95):
    ci = binomtest(int(errors), int(trials)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def simulate(cfg: ExperimentConfig, n: int, snr_db, rng: np.random.Generator):
    """Draw ``n`` received windows. Returns ``(y, offsets)`` with ``y`` of shape ``(n, M)``."""
    spec = cfg.frame
    offsets = rng.integers(0, spec.search_len, size=n)
    taps = draw_channels(cfg.channel, rng, n)
    s = cfg.preamble()
    if cfg.window_mode == "full":
        data = random_data_symbols(spec.n_data, spec.power, rng, size=n)
        frames = assemble_frame(spec, s, data)
    else:
        frames = assemble_frame(spec, s, np.zeros(spec.n_data))
    source = transmit_source(frames, spec, cfg.hpa, cfg.window_mode)
    sigma2 = np.broadcast_to(noise_variance(snr_db, spec.power), (n,))
    y = synthesize_rx_batch(source, taps, offsets, spec.frame_len, spec.n_train, sigma2, rng)
    return y, offsets


def raw_features(y) -> np.ndarray:
    """Unit-norm ``[Re y, Im y]``: the network input when preprocessing is skipped."""
    y = np.asarray(y, dtype=complex)
    return normalize_metric(np.concatenate([y.real, y.imag], axis=-1))


def features(cfg: ExperimentConfig, y, kind: str) -> np.ndarray:
    if kind == "metric":
        return normalize_metric(cross_corr_metric(y, cfg.preamble()))
    if kind == "raw":
        return raw_features(y)
    raise ValueError(f"unknown feature kind {kind!r}")


def _blocks(total: int):
    for k, start in enumerate(range(0, total, BLOCK)):
        yield k, min(BLOCK, total - start)


def generate_dataset(cfg: ExperimentConfig, kind: str = "metric", train_snr="config") -> elm.Dataset:
    """Labelled training set of ``cfg.n_train_samples`` samples.

    ``train_snr`` overrides the config's SNR policy when given (``None`` for
    uniform over the grid range, or a fixed dB value).
    """
    if train_snr == "config":
        train_snr = cfg.train_snr
    lo, hi = min(cfg.snr_grid), max(cfg.snr_grid)
    xs, taus = [], []
    for k, n in _blocks(cfg.n_train_samples):
        rng = stream(cfg.seed_data, DOMAIN_DATA, k)
        if train_snr is not None:
            snr = np.full(n, float(train_snr))
        elif lo == hi:
            snr = np.full(n, lo)
        else:
            snr = rng.uniform(lo, hi, size=n)
        y, tau = simulate(cfg, n, snr, rng)
        xs.append(features(cfg, y, kind))
        taus.append(tau)
    return elm.Dataset(np.concatenate(xs), np.concatenate(taus), cfg.frame.search_len)


def train_model(cfg: ExperimentConfig, method: str = "prop") -> elm.ElmModel:
    kind = MODEL_FEATURES[method]
    data = generate_dataset(cfg, kind)
    model = elm.train(
        data,
        cfg.n_hidden,
        cfg.frame.frame_len,
        cfg.frame.n_train,
        activation=cfg.activation,
        seed=cfg.seed_model,
        solver=cfg.solver,
        reg=cfg.reg,
        features=kind,
    )
    model.train_meta.update(
        {
            "method": method,
            "training_snr": cfg.training_snr_policy(),
            "config_hash": config_hash(cfg),
            "seed_data": cfg.seed_data,
            "window_mode": cfg.window_mode,
        }
    )
    return model


def check_model(cfg: ExperimentConfig, model: elm.ElmModel, method: str):
    want = MODEL_FEATURES[method]
    if model.features != want:
        raise ValueError(f"method {method!r} needs a {want!r}-input model, got {model.features!r}")
    if (model.frame_len, model.n_train) != (cfg.frame.frame_len, cfg.frame.n_train):
        raise ValueError(
            f"model dims (M={model.frame_len}, Ns={model.n_train}) do not match "
            f"config (M={cfg.frame.frame_len}, Ns={cfg.frame.n_train})"
        )


@dataclass
class SweepRow:
    method: str
    snr_db: float
    trials: int
    errors: int
    tags: dict = field(default_factory=dict)

    @property
    def pe(self) -> float:
        return self.errors / self.trials

    @property
    def ci(self):
        return wilson_interval(self.errors, self.trials)


@dataclass
class SweepResult:
    rows: list
    config_hash: str
    seeds: tuple
    meta: dict = field(default_factory=dict)

    def row(self, method: str, snr_db: float, **tags) -> SweepRow:
        for r in self.rows:
            if r.method == method and r.snr_db == float(snr_db) and all(
                str(r.tags.get(k)) == str(v) for k, v in tags.items()
            ):
                return r
        raise KeyError(f"no row for method={method}, snr_db={snr_db}, tags={tags}")

    def pe(self, method: str, snr_db: float, **tags) -> float:
        return self.row(method, snr_db, **tags).pe

    def tag_columns(self):
        keys = set()
        for r in self.rows:
            keys.update(r.tags)
        return sorted(keys)

    def to_csv(self, path) -> None:
        tag_cols = self.tag_columns()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS + tag_cols)
            for r in self.rows:
                lo, hi = r.ci
                w.writerow(
                    [r.method, repr(r.snr_db), r.trials, r.errors, repr(r.pe), repr(lo), repr(hi),
                     self.config_hash, *self.seeds]
                    + [r.tags.get(k, "") for k in tag_cols]
                )

    @classmethod
    def from_csv(cls, path) -> "SweepResult":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or reader.fieldnames[: len(CSV_COLUMNS)] != CSV_COLUMNS:
                raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
            tag_cols = reader.fieldnames[len(CSV_COLUMNS) :]
            rows, chash, seeds = [], "", ()
            for rec in reader:
                rows.append(
                    SweepRow(rec["method"], float(rec["snr_db"]), int(rec["trials"]), int(rec["errors"]),
                             {k: rec[k] for k in tag_cols if rec[k] != ""})
                )
                chash = rec["config_hash"]
                seeds = (int(rec["seed_data"]), int(rec["seed_model"]), int(rec["seed_eval"]))
        return cls(rows, chash, seeds)

    @classmethod
    def merge(cls, results) -> "SweepResult":
        results = list(results)
        hashes = sorted({r.config_hash for r in results})
        if len(hashes) == 1:
            chash = hashes[0]
        else:
            chash = hashlib.sha256("".join(hashes).encode()).hexdigest()[:16]
        rows = [row for r in results for row in r.rows]
        return cls(rows, chash, results[0].seeds, {"merged": len(results)})


def _estimates(cfg, y, models):
    out = {}
    g = None
    for method in cfg.methods:
        if method == "corr":
            g = cross_corr_metric(y, cfg.preamble()) if g is None else g
            out[method] = corr_estimate(g)
        elif method == "prop":
            g = cross_corr_metric(y, cfg.preamble()) if g is None else g
            out[method] = elm.infer(models[method], normalize_metric(g))[0]
        else:
            out[method] = elm.infer(models[method], raw_features(y))[0]
    return out


def evaluate(cfg: ExperimentConfig, models=None, workers: int = 1, tags=None) -> SweepResult:
    """Count offset errors for every (method, SNR) cell on fresh draws."""
    models = dict(models or {})
    for method in cfg.methods:
        if method in MODEL_FEATURES:
            if method not in models:
                raise ValueError(f"method {method!r} needs a trained model")
            check_model(cfg, models[method], method)

    def run_block(item):
        k, n = item
        counts = np.zeros((len(cfg.snr_grid), len(cfg.methods)), dtype=np.int64)
        for si, snr in enumerate(cfg.snr_grid):
            # same block stream at every SNR: identical channels, offsets and noise shapes
            y, tau = simulate(cfg, n, snr, stream(cfg.seed_eval, DOMAIN_EVAL, k))
            est = _estimates(cfg, y, models)
            for mi, method in enumerate(cfg.methods):
                counts[si, mi] = np.count_nonzero(est[method] != tau)
        return counts

    blocks = list(_blocks(cfg.n_trials))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_block, blocks))
    else:
        parts = [run_block(b) for b in blocks]
    counts = np.sum(parts, axis=0)

    rows = []
    for mi, method in enumerate(cfg.methods):
        for si, snr in enumerate(cfg.snr_grid):
            rows.append(SweepRow(method, snr, cfg.n_trials, int(counts[si, mi]), dict(tags or {})))
    meta = {"training_snr": cfg.training_snr_policy(), "window_mode": cfg.window_mode}
    return SweepResult(rows, config_hash(cfg), cfg.seeds, meta)


def train_models(cfg: ExperimentConfig, models=None) -> dict:
    models = dict(models or {})
    for method in cfg.methods:
        if method in MODEL_FEATURES and method not in models:
            models[method] = train_model(cfg, method)
    return models


def run_sweep(cfg: ExperimentConfig, models=None, workers: int = 1, tags=None) -> SweepResult:
    """Train whatever models are missing, then evaluate."""
    return evaluate(cfg, train_models(cfg, models), workers=workers, tags=tags)


def _hpa_name(hpa):
    if hpa is None:
        return "none"
    for name, p in HPA_PRESETS.items():
        if p == hpa:
            return name
    return "custom"


def run_generalization(train_cfg: ExperimentConfig, test_cfg: ExperimentConfig, models=None,
                       workers: int = 1) -> SweepResult:
    """Train under ``train_cfg``, evaluate under ``test_cfg``.

    The two configs may differ only in the channel and the amplifier.
    """
    aligned = dataclasses.replace(test_cfg, channel=train_cfg.channel, hpa=train_cfg.hpa)
    if aligned != train_cfg:
        diff = [f.name for f in dataclasses.fields(train_cfg)
                if getattr(aligned, f.name) != getattr(train_cfg, f.name)]
        raise ValueError(f"train and test configs may differ only in channel/hpa; also differ in {diff}")
    tags = {
        "train_L": train_cfg.channel.n_paths,
        "test_L": test_cfg.channel.n_paths,
        "train_eta": train_cfg.channel.decay,
        "test_eta": test_cfg.channel.decay,
        "train_hpa": _hpa_name(train_cfg.hpa),
        "test_hpa": _hpa_name(test_cfg.hpa),
    }
    models = train_models(train_cfg, models)
    res = evaluate(test_cfg, models, workers=workers, tags=tags)
    res.meta["train_config_hash"] = config_hash(train_cfg)
    return res


def with_axis(cfg: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    """Copy of ``cfg`` with one experiment parameter changed."""
    f = cfg.frame
    if axis == "L":
        return dataclasses.replace(cfg, channel=dataclasses.replace(cfg.channel, n_paths=int(value)))
    if axis == "eta":
        return dataclasses.replace(cfg, channel=dataclasses.replace(cfg.channel, decay=float(value)))
    if axis == "Ns":
        frame = FrameSpec.from_lengths(int(value), f.frame_len, f.n_guard, f.power)
        return dataclasses.replace(cfg, frame=frame)
    if axis == "M":
        frame = FrameSpec.from_lengths(f.n_train, int(value), f.n_guard, f.power)
        return dataclasses.replace(cfg, frame=frame)
    if axis == "hpa":
        return dataclasses.replace(cfg, hpa=hpa_preset(value))
    raise ValueError(f"unknown axis {axis!r}; choose from {AXES}")


def parse_axis_value(axis: str, text: str):
    if axis in ("L", "Ns", "M"):
        v = int(text)
        if str(v) != text.strip():
            raise ValueError(f"axis {axis} needs integers, got {text!r}")
        return v
    if axis == "eta":
        v = float(text)
        if not math.isfinite(v):
            raise ValueError(f"eta must be finite, got {text!r}")
        return v
    if axis == "hpa":
        hpa_preset(text)
        return text.lower()
    raise ValueError(f"unknown axis {axis!r}; choose from {AXES}")


def run_axis_sweep(cfg: ExperimentConfig, axis: str, values, workers: int = 1):
    """Retrain and evaluate at each axis value; returns ``[(value, SweepResult), ...]``."""
    out = []
    for v in values:
        sub = with_axis(cfg, axis, v)
        out.append((v, run_sweep(sub, workers=workers, tags={"axis": axis, "value": v})))
    return out
