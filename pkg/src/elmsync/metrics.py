"""Cross-correlation synchronization metric and the correlation baseline."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def cross_corr_metric(y, s) -> np.ndarray:
    """``Gamma_t = |s^H y[t:t+Ns]|^2`` for ``t = 0..M-Ns-1``.

    ``y`` may be batched along leading axes; ``s`` is the clean preamble.
    """
    y = np.asarray(y, dtype=complex)
    s = np.asarray(s, dtype=complex)
    if s.ndim != 1:
        raise ValueError("reference sequence must be 1-D")
    n_train, frame_len = s.shape[0], y.shape[-1]
    if frame_len <= n_train:
        raise ValueError(f"observation length {frame_len} must exceed preamble length {n_train}")
    windows = sliding_window_view(y, n_train, axis=-1)[..., : frame_len - n_train, :]
    c = windows @ s.conj()
    return c.real**2 + c.imag**2


def normalize_metric(g, with_flag: bool = False):
    """Scale each metric vector to unit Euclidean norm.

    All-zero vectors stay all-zero. With ``with_flag`` also return a boolean
    array marking those degenerate rows.
    """
    g = np.asarray(g, dtype=float)
    norm = np.linalg.norm(g, axis=-1, keepdims=True)
    degenerate = norm[..., 0] == 0
    out = np.divide(g, norm, out=np.zeros_like(g), where=norm > 0)
    if with_flag:
        return out, degenerate
    return out


def corr_estimate(g):
    """Offset of the largest metric entry; ties go to the smallest index."""
    g = np.asarray(g)
    if g.shape[-1] == 0:
        raise ValueError("metric vector is empty")
    return np.argmax(g, axis=-1)
