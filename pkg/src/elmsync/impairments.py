"""Transmit/receive impairments: Saleh amplifier, sparse Rayleigh multipath, AWGN.

The received window of length ``M`` is

    y_t = sum_l h_l * xd_{t - tau - l} + n_t,     t = 0..M-1

with ``xd`` the amplifier-distorted source (training block only, or the
whole frame) and zero outside its support. This realises the shifted,
distorted training matrix times the zero-padded impulse response without
building either explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .waveform import FrameSpec

WINDOW_MODES = ("training", "full")


@dataclass(frozen=True)
class HpaParams:
    """Saleh AM/AM and AM/PM coefficients.

    ``input_scale`` multiplies the amplitude before the amplifier (input
    back-off as a linear amplitude factor); 1.0 means no back-off.
    """

    alpha_a: float
    beta_a: float
    alpha_phi: float
    beta_phi: float
    input_scale: float = 1.0

    def __post_init__(self):
        vals = (self.alpha_a, self.beta_a, self.alpha_phi, self.beta_phi, self.input_scale)
        if not all(np.isfinite(vals)):
            raise ValueError(f"HPA coefficients must be finite, got {vals}")
        if self.beta_a <= 0 or self.beta_phi <= 0:
            raise ValueError("beta_a and beta_phi must be > 0")
        if self.input_scale <= 0:
            raise ValueError("input_scale must be > 0")

    def amplitude(self, r):
        """AM/AM curve ``A(r) = alpha_a r / (1 + beta_a r^2)``."""
        r = np.asarray(r, dtype=float)
        return self.alpha_a * r / (1.0 + self.beta_a * r * r)

    def phase(self, r):
        """AM/PM curve ``Phi(r) = alpha_phi r^2 / (1 + beta_phi r^2)`` in radians."""
        r = np.asarray(r, dtype=float)
        r2 = r * r
        return self.alpha_phi * r2 / (1.0 + self.beta_phi * r2)


HPA_PRESETS = {
    "hpa1": HpaParams(alpha_a=1.96, beta_a=0.99, alpha_phi=2.53, beta_phi=2.82),
    "hpa2": HpaParams(alpha_a=1.66, beta_a=0.06, alpha_phi=0.15, beta_phi=0.35),
}


def hpa_preset(name):
    """Look up an amplifier by name; ``"none"``/``None`` gives a linear chain."""
    if name is None or (isinstance(name, str) and name.lower() == "none"):
        return None
    try:
        return HPA_PRESETS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown HPA preset {name!r}; choose from {sorted(HPA_PRESETS)} or 'none'") from None


def saleh_distort(x, params: HpaParams | None) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if params is None:
        return x.copy()
    xin = params.input_scale * x
    r = np.abs(xin)
    # A(r) e^{j(theta + Phi(r))} written as a gain on x, so r = 0 maps to 0 exactly
    gain = params.alpha_a / (1.0 + params.beta_a * r * r)
    return xin * gain * np.exp(1j * params.phase(r))


@dataclass(frozen=True)
class ChannelSpec:
    """Sparse exponentially decaying Rayleigh channel.

    Tap ``l`` (0-based) has variance ``c * exp(-decay * l)`` with ``c``
    normalising the profile to unit energy. Taps after the first are zeroed
    independently with probability ``sparsity_prob``; with ``renormalize``
    the surviving profile is rescaled to unit energy per draw.
    """

    n_paths: int = 8
    decay: float = 0.2
    sparsity_prob: float = 0.5
    renormalize: bool = False

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError(f"n_paths must be >= 1, got {self.n_paths}")
        if self.decay < 0:
            raise ValueError(f"decay must be >= 0, got {self.decay}")
        if not 0.0 <= self.sparsity_prob <= 1.0:
            raise ValueError(f"sparsity_prob must be in [0, 1], got {self.sparsity_prob}")

    def path_variances(self) -> np.ndarray:
        v = np.exp(-self.decay * np.arange(self.n_paths))
        return v / v.sum()

    def expected_energy(self) -> float:
        v = self.path_variances()
        if self.renormalize:
            return 1.0
        return float(v[0] + (1.0 - self.sparsity_prob) * v[1:].sum())


@dataclass(frozen=True)
class ChannelRealization:
    taps: np.ndarray
    offset: int


@dataclass(frozen=True)
class ReceiveConfig:
    snr_db: float
    window_mode: str = "training"

    def __post_init__(self):
        if self.window_mode not in WINDOW_MODES:
            raise ValueError(f"window_mode must be one of {WINDOW_MODES}, got {self.window_mode!r}")

    def noise_variance(self, power: float = 1.0) -> float:
        return noise_variance(self.snr_db, power)


def noise_variance(snr_db, power: float = 1.0):
    """``sigma^2 = P * 10^(-SNR/10)``; ``snr_db = inf`` gives zero noise."""
    return power * np.power(10.0, -np.asarray(snr_db, dtype=float) / 10.0)


def draw_channels(spec: ChannelSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` tap vectors, shape ``(size, n_paths)``."""
    var = spec.path_variances()
    g = rng.standard_normal((size, spec.n_paths, 2))
    taps = (g[..., 0] + 1j * g[..., 1]) * np.sqrt(var / 2.0)
    if spec.n_paths > 1:
        zero = rng.random((size, spec.n_paths - 1)) < spec.sparsity_prob
        taps[:, 1:][zero] = 0.0
        if spec.renormalize:
            kept = var[None, :] * np.concatenate([np.ones((size, 1), bool), ~zero], axis=1)
            taps /= np.sqrt(kept.sum(axis=1, keepdims=True))
    return taps


def draw_channel(spec: ChannelSpec, rng: np.random.Generator) -> np.ndarray:
    return draw_channels(spec, rng, 1)[0]


def transmit_source(frame: np.ndarray, spec: FrameSpec, hpa: HpaParams | None, window_mode: str) -> np.ndarray:
    """Amplifier output that reaches the receiver window.

    In ``"training"`` mode only the preamble block is kept, matching a window
    that observes the training sequence alone; ``"full"`` keeps the frame.
    """
    if window_mode not in WINDOW_MODES:
        raise ValueError(f"window_mode must be one of {WINDOW_MODES}, got {window_mode!r}")
    frame = np.asarray(frame, dtype=complex)
    if window_mode == "training":
        frame = frame[..., : spec.n_train]
    return saleh_distort(frame, hpa)


def synthesize_rx_batch(
    source: np.ndarray,
    taps: np.ndarray,
    offsets: np.ndarray,
    frame_len: int,
    n_train: int,
    noise_var,
    rng: np.random.Generator,
) -> np.ndarray:
    """Vectorised receive model.

    Args:
        source: distorted transmit block, shape ``(K,)`` shared by all rows or ``(B, K)``.
        taps: channel taps, shape ``(B, L)``.
        offsets: frame offsets, shape ``(B,)``, each in ``[0, M - Ns - 1]``.
        frame_len: window length ``M``.
        n_train: preamble length ``Ns`` (bounds the offsets).
        noise_var: total complex noise variance, scalar or shape ``(B,)``.

    Returns:
        ``(B, M)`` complex observations.
    """
    taps = np.atleast_2d(np.asarray(taps, dtype=complex))
    offsets = np.asarray(offsets, dtype=np.int64).reshape(-1)
    n_batch, n_paths = taps.shape
    if offsets.shape[0] != n_batch:
        raise ValueError(f"{offsets.shape[0]} offsets for {n_batch} channel draws")
    hi = frame_len - n_train - 1
    if offsets.size and (offsets.min() < 0 or offsets.max() > hi):
        raise ValueError(f"offset must lie in [0, {hi}], got range [{offsets.min()}, {offsets.max()}]")
    source = np.asarray(source, dtype=complex)
    k = source.shape[-1]

    conv = np.zeros((n_batch, k + n_paths - 1), dtype=complex)
    for l in range(n_paths):
        conv[:, l : l + k] += taps[:, l : l + 1] * source

    width = conv.shape[1]
    buf = np.zeros((n_batch, frame_len + width), dtype=complex)
    cols = offsets[:, None] + np.arange(width)
    buf[np.arange(n_batch)[:, None], cols] = conv
    y = buf[:, :frame_len]

    noise_var = np.broadcast_to(np.asarray(noise_var, dtype=float), (n_batch,))
    g = rng.standard_normal((n_batch, frame_len, 2))
    y = y + (g[..., 0] + 1j * g[..., 1]) * np.sqrt(noise_var / 2.0)[:, None]
    return y


def synthesize_rx(
    frame: np.ndarray,
    spec: FrameSpec,
    hpa: HpaParams | None,
    chan: ChannelRealization,
    cfg: ReceiveConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Length-``M`` received observation for one frame."""
    frame = np.asarray(frame, dtype=complex)
    if frame.shape != (spec.frame_len,):
        raise ValueError(f"frame length {frame.shape} != ({spec.frame_len},)")
    src = transmit_source(frame, spec, hpa, cfg.window_mode)
    y = synthesize_rx_batch(
        src,
        np.asarray(chan.taps)[None, :],
        np.array([chan.offset]),
        spec.frame_len,
        spec.n_train,
        cfg.noise_variance(spec.power),
        rng,
    )
    return y[0]
