"""Single-hidden-layer extreme learning machine for offset classification.

Input weights and biases are drawn once and frozen; only the output layer
is fitted, in closed form, as ``Y = T H^+`` with ``H`` the hidden-layer
outputs of the training set and ``T`` the one-hot offset labels.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
from scipy.special import expit

ACTIVATIONS = {
    "sigmoid": expit,
    "tanh": np.tanh,
    "relu": lambda z: np.maximum(z, 0.0),
}
_ACT_TAGS = {"sigmoid": 0, "tanh": 1, "relu": 2}
FEATURES = ("metric", "raw")
_FEATURE_TAGS = {"metric": 0, "raw": 1}

MAGIC = b"ELMFS"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<5sHIIIBBQ")
HEADER_SIZE = _HEADER.size

SVD_RTOL = 1e-10
DEFAULT_RIDGE = 1e-6
_CHUNK = 8192


class TrainingError(RuntimeError):
    pass


class ModelFormatError(ValueError):
    pass


def input_dim_for(features: str, frame_len: int, n_train: int) -> int:
    if features == "metric":
        return frame_len - n_train
    if features == "raw":
        return 2 * frame_len
    raise ValueError(f"unknown feature kind {features!r}; choose from {FEATURES}")


@dataclass
class Dataset:
    """Training inputs (one row per sample) with their true offsets."""

    inputs: np.ndarray
    offsets: np.ndarray
    n_outputs: int

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.offsets = np.asarray(self.offsets, dtype=np.int64).reshape(-1)
        if self.inputs.shape[0] != self.offsets.shape[0]:
            raise ValueError(f"{self.inputs.shape[0]} inputs but {self.offsets.shape[0]} offsets")
        if self.offsets.size and (self.offsets.min() < 0 or self.offsets.max() >= self.n_outputs):
            raise ValueError(f"offsets must lie in [0, {self.n_outputs - 1}]")

    def __len__(self):
        return self.offsets.shape[0]

    def labels(self) -> np.ndarray:
        """One-hot label matrix, shape ``(n_outputs, n_samples)``."""
        return one_hot(self.offsets, self.n_outputs)


def one_hot(offsets, n_outputs: int) -> np.ndarray:
    offsets = np.asarray(offsets, dtype=np.int64).reshape(-1)
    t = np.zeros((n_outputs, offsets.shape[0]))
    t[offsets, np.arange(offsets.shape[0])] = 1.0
    return t


@dataclass(frozen=True)
class ElmModel:
    input_weights: np.ndarray
    bias: np.ndarray
    output_weights: np.ndarray
    activation: str
    frame_len: int
    n_train: int
    features: str = "metric"
    seed: int = 0
    train_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        d = input_dim_for(self.features, self.frame_len, self.n_train)
        nh = self.bias.shape[0]
        if self.input_weights.shape != (nh, d):
            raise ValueError(f"input weights shape {self.input_weights.shape} != {(nh, d)}")
        if self.output_weights.shape != (self.frame_len - self.n_train, nh):
            raise ValueError(
                f"output weights shape {self.output_weights.shape} != {(self.frame_len - self.n_train, nh)}"
            )
        for name in ("input_weights", "bias", "output_weights"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite values")

    @property
    def n_hidden(self) -> int:
        return self.bias.shape[0]

    @property
    def input_dim(self) -> int:
        return self.input_weights.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.output_weights.shape[0]


def init_model(n_hidden: int, input_dim: int, activation: str, rng: np.random.Generator):
    """Draw input weights ``(n_hidden, input_dim)`` and bias ``(n_hidden,)`` i.i.d. U[-1, 1]."""
    if n_hidden < 1 or input_dim < 1:
        raise ValueError(f"dimensions must be >= 1, got n_hidden={n_hidden}, input_dim={input_dim}")
    if activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}; choose from {sorted(ACTIVATIONS)}")
    w = rng.uniform(-1.0, 1.0, size=(n_hidden, input_dim))
    b = rng.uniform(-1.0, 1.0, size=n_hidden)
    return w, b


def _hidden(w, b, activation, x):
    return ACTIVATIONS[activation](x @ w.T + b)


def hidden_activations(model: ElmModel, metric) -> np.ndarray:
    """Hidden-layer output ``act(W g + b)``; rows of a 2-D input are samples."""
    x = np.asarray(metric, dtype=float)
    if x.shape[-1] != model.input_dim:
        raise ValueError(f"input length {x.shape[-1]} != model input dim {model.input_dim}")
    return _hidden(model.input_weights, model.bias, model.activation, x)


def infer(model: ElmModel, metric):
    """Return ``(offset_estimate, output)`` with the offset at ``argmax |o_j|^2``."""
    out = hidden_activations(model, metric) @ model.output_weights.T
    return np.argmax(out * out, axis=-1), out


def _pinv_solve(h, offsets, n_outputs):
    """``T H^+`` through a truncated SVD of ``H`` (shape hidden x samples)."""
    u, sv, vt = np.linalg.svd(h, full_matrices=False)
    keep = sv > SVD_RTOL * sv[0] if sv.size else sv.astype(bool)
    u, sv, vt = u[:, keep], sv[keep], vt[keep]
    tv = np.zeros((n_outputs, sv.shape[0]))
    np.add.at(tv, offsets, vt.T)  # T @ V without forming T
    return (tv / sv) @ u.T


def _ridge_solve(w, b, activation, inputs, offsets, n_outputs, reg):
    nh = w.shape[0]
    gram = np.zeros((nh, nh))
    cross = np.zeros((n_outputs, nh))
    for start in range(0, inputs.shape[0], _CHUNK):
        hc = _hidden(w, b, activation, inputs[start : start + _CHUNK])
        if not np.all(np.isfinite(hc)):
            raise TrainingError("non-finite hidden activations")
        gram += hc.T @ hc
        np.add.at(cross, offsets[start : start + _CHUNK], hc)
    gram[np.diag_indices(nh)] += reg
    # (G + reg I) Y^T = (T H^T)^T
    return scipy.linalg.solve(gram, cross.T, assume_a="pos").T


def train(
    data: Dataset,
    n_hidden: int,
    frame_len: int,
    n_train: int,
    activation: str = "sigmoid",
    seed: int = 0,
    solver: str = "auto",
    reg: float = DEFAULT_RIDGE,
    features: str = "metric",
) -> ElmModel:
    """Fit an ELM on ``data``.

    ``solver`` is ``"svd"`` (pseudoinverse, the reference), ``"ridge"``
    (regularised normal equations on the hidden Gram matrix) or ``"auto"``,
    which picks ridge only when there are more than ten samples per hidden
    unit.
    """
    if len(data) < 1:
        raise ValueError("need at least one training sample")
    d = input_dim_for(features, frame_len, n_train)
    if data.inputs.shape[1] != d:
        raise ValueError(f"sample length {data.inputs.shape[1]} != expected input dim {d}")
    if data.n_outputs != frame_len - n_train:
        raise ValueError(f"label length {data.n_outputs} != M - Ns = {frame_len - n_train}")
    if solver == "auto":
        solver = "ridge" if len(data) > 10 * n_hidden else "svd"
    if solver not in ("svd", "ridge"):
        raise ValueError(f"unknown solver {solver!r}")
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must fit in an unsigned 64-bit integer")

    w, b = init_model(n_hidden, d, activation, np.random.default_rng(seed))
    if solver == "svd":
        h = _hidden(w, b, activation, data.inputs).T
        if not np.all(np.isfinite(h)):
            raise TrainingError("non-finite hidden activations")
        out_w = _pinv_solve(h, data.offsets, data.n_outputs)
        reg_used = 0.0
    else:
        out_w = _ridge_solve(w, b, activation, data.inputs, data.offsets, data.n_outputs, reg)
        reg_used = float(reg)
    if not np.all(np.isfinite(out_w)):
        raise TrainingError("output weights are not finite; try the svd solver or a larger ridge")
    meta = {"n_samples": len(data), "solver": solver, "reg": reg_used}
    return ElmModel(w, b, out_w, activation, frame_len, n_train, features, seed, meta)


def meta_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def save_model(model: ElmModel, path) -> None:
    """Write the binary model and a JSON metadata file next to it."""
    path = Path(path)
    header = _HEADER.pack(
        MAGIC,
        FORMAT_VERSION,
        model.n_hidden,
        model.frame_len,
        model.n_train,
        _ACT_TAGS[model.activation],
        _FEATURE_TAGS[model.features],
        model.seed,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for arr in (model.input_weights, model.bias, model.output_weights):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    meta = {
        "format_version": FORMAT_VERSION,
        "n_hidden": model.n_hidden,
        "frame_len": model.frame_len,
        "n_train": model.n_train,
        "input_dim": model.input_dim,
        "activation": model.activation,
        "features": model.features,
        "seed": model.seed,
        "train_meta": model.train_meta,
    }
    meta_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def expected_file_size(n_hidden: int, frame_len: int, n_train: int, features: str = "metric") -> int:
    d = input_dim_for(features, frame_len, n_train)
    n_out = frame_len - n_train
    return HEADER_SIZE + 8 * (n_hidden * d + n_hidden + n_out * n_hidden)


def load_model(path) -> ElmModel:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < HEADER_SIZE:
        raise ModelFormatError(f"{path}: file too short for header ({len(raw)} bytes)")
    magic, version, nh, m, ns, act_tag, feat_tag, seed = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ModelFormatError(f"{path}: bad magic {magic!r}, not an ELMFS model")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: format version {version} unsupported (expected {FORMAT_VERSION})")
    acts = {v: k for k, v in _ACT_TAGS.items()}
    feats = {v: k for k, v in _FEATURE_TAGS.items()}
    if act_tag not in acts or feat_tag not in feats:
        raise ModelFormatError(f"{path}: unknown activation tag {act_tag} or feature tag {feat_tag}")
    if nh < 1 or m <= ns:
        raise ModelFormatError(f"{path}: inconsistent dims n_hidden={nh}, M={m}, Ns={ns}")
    features = feats[feat_tag]
    want = expected_file_size(nh, m, ns, features)
    if len(raw) != want:
        raise ModelFormatError(f"{path}: size {len(raw)} bytes, expected {want} for dims ({nh}, {m}, {ns})")

    d = input_dim_for(features, m, ns)
    payload = np.frombuffer(raw, dtype="<f8", offset=HEADER_SIZE).astype(float)
    w = payload[: nh * d].reshape(nh, d)
    b = payload[nh * d : nh * d + nh]
    out_w = payload[nh * d + nh :].reshape(m - ns, nh)

    train_meta = {}
    mp = meta_path(path)
    if mp.exists():
        train_meta = json.loads(mp.read_text()).get("train_meta", {})
    try:
        return ElmModel(w, b, out_w, acts[act_tag], m, ns, features, seed, train_meta)
    except ValueError as exc:
        raise ModelFormatError(f"{path}: {exc}") from None
