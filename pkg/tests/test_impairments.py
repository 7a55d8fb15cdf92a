import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from elmsync.impairments import (
    HPA_PRESETS,
    ChannelRealization,
    ChannelSpec,
    HpaParams,
    ReceiveConfig,
    draw_channel,
    draw_channels,
    hpa_preset,
    noise_variance,
    saleh_distort,
    synthesize_rx,
)
from elmsync.waveform import FrameSpec, assemble_frame, random_data_symbols, zadoff_chu

HPA1 = HPA_PRESETS["hpa1"]


def test_presets():
    assert HPA1 == HpaParams(1.96, 0.99, 2.53, 2.82)
    assert hpa_preset("HPA2") == HpaParams(1.66, 0.06, 0.15, 0.35)
    assert hpa_preset("none") is None
    with pytest.raises(ValueError, match="unknown HPA"):
        hpa_preset("hpa3")


def test_saleh_zero_input():
    assert saleh_distort(np.array([0j]), HPA1)[0] == 0


def test_saleh_unit_amplitude_hpa1():
    out = saleh_distort(np.array([1.0 + 0j]), HPA1)[0]
    assert abs(out) == pytest.approx(0.984924623, abs=1e-9)
    assert np.angle(out) == pytest.approx(0.662303665, abs=1e-9)


def test_saleh_peak_location():
    # analytic: r* = 1/sqrt(beta_a), A(r*) = alpha_a / (2 sqrt(beta_a)); dense grid agrees
    r = np.linspace(0.5, 1.5, 1_000_001)
    amp = HPA1.amplitude(r)
    assert r[amp.argmax()] == pytest.approx(1.005038, abs=1e-6)
    assert amp.max() == pytest.approx(0.984937, abs=1e-6)
    rs = 1 / math.sqrt(HPA1.beta_a)
    assert HPA1.amplitude(rs) == pytest.approx(1.96 / (2 * math.sqrt(0.99)), rel=1e-14)


@given(st.floats(0, 5), st.floats(-math.pi, math.pi))
def test_saleh_phase_rotation(r, theta):
    x = r * np.exp(1j * theta)
    out = saleh_distort(np.array([x]), HPA1)[0]
    assert abs(out) == pytest.approx(float(HPA1.amplitude(r)), rel=1e-12, abs=1e-300)
    if r > 1e-6:
        d = np.angle(out) - theta - HPA1.phase(r)
        assert abs((d + math.pi) % (2 * math.pi) - math.pi) < 1e-9


@pytest.mark.parametrize("name", ["hpa1", "hpa2"])
def test_saleh_small_signal_linear(name):
    p = HPA_PRESETS[name]
    r = np.linspace(1e-8, 1e-4, 100)
    assert np.all(np.abs(p.amplitude(r) / r - p.alpha_a) <= 1e-3 * p.alpha_a)


def test_saleh_none_is_identity_copy():
    x = np.array([1 + 2j, 3j])
    out = saleh_distort(x, None)
    np.testing.assert_array_equal(out, x)
    assert out is not x


def test_saleh_input_scale():
    p = HpaParams(1.96, 0.99, 2.53, 2.82, input_scale=0.5)
    out = saleh_distort(np.array([1.0 + 0j]), p)[0]
    assert abs(out) == pytest.approx(1.96 * 0.5 / (1 + 0.99 * 0.25), rel=1e-14)


def test_hpa_validation():
    with pytest.raises(ValueError):
        HpaParams(1.0, 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        HpaParams(float("nan"), 1.0, 1.0, 1.0)


def test_channel_single_tap():
    rng = np.random.default_rng(0)
    taps = draw_channels(ChannelSpec(n_paths=1), rng, 200_000)
    assert taps.shape == (200_000, 1)
    assert np.all(taps != 0)
    assert np.mean(np.abs(taps) ** 2) == pytest.approx(1.0, rel=0.01)


def test_decay_profile_ratio():
    v = ChannelSpec(8, 0.2).path_variances()
    assert v.sum() == pytest.approx(1.0, rel=1e-14)
    assert v[0] / v[7] == pytest.approx(4.0552, abs=1e-4)


def test_sparsity_fraction():
    rng = np.random.default_rng(1)
    taps = draw_channels(ChannelSpec(8, 0.2, 0.5), rng, 100_000)
    assert np.all(taps[:, 0] != 0)
    frac = np.mean(taps[:, 1:] == 0)
    assert abs(frac - 0.5) < 0.01


def test_channel_energy_expectation():
    spec = ChannelSpec(8, 0.2, 0.5)
    v = spec.path_variances()
    closed = v[0] + 0.5 * v[1:].sum()
    assert spec.expected_energy() == pytest.approx(closed)
    taps = draw_channels(spec, np.random.default_rng(2), 200_000)
    energy = np.sum(np.abs(taps) ** 2, axis=1)
    se = energy.std() / math.sqrt(energy.size)
    assert abs(energy.mean() - closed) < 4 * se


def test_channel_renormalize_unit_energy():
    spec = ChannelSpec(8, 0.2, 0.5, renormalize=True)
    taps = draw_channels(spec, np.random.default_rng(3), 200_000)
    assert np.mean(np.sum(np.abs(taps) ** 2, axis=1)) == pytest.approx(1.0, rel=0.01)


def test_channel_validation():
    for bad in (dict(n_paths=0), dict(decay=-1), dict(sparsity_prob=1.5)):
        with pytest.raises(ValueError):
            ChannelSpec(**bad)


def test_draw_channel_deterministic():
    a = draw_channel(ChannelSpec(), np.random.default_rng(5))
    b = draw_channel(ChannelSpec(), np.random.default_rng(5))
    np.testing.assert_array_equal(a, b)


SPEC = FrameSpec.from_lengths(32, 160)
S = zadoff_chu(32)


def _frame(seed=0):
    return assemble_frame(SPEC, S, random_data_symbols(SPEC.n_data, 1.0, np.random.default_rng(seed)))


@pytest.mark.parametrize("k", [0, 1, 57, 127])
def test_rx_identity_channel(k):
    y = synthesize_rx(_frame(), SPEC, None, ChannelRealization(np.array([1 + 0j]), k),
                      ReceiveConfig(np.inf), np.random.default_rng(0))
    want = np.zeros(160, complex)
    want[k : k + 32] = S
    np.testing.assert_array_equal(y, want)


def test_rx_hpa_composition():
    y = synthesize_rx(_frame(), SPEC, HPA1, ChannelRealization(np.array([1 + 0j]), 0),
                      ReceiveConfig(np.inf), np.random.default_rng(0))
    np.testing.assert_allclose(y[:32], saleh_distort(S, HPA1), rtol=1e-15)
    assert np.all(y[32:] == 0)


def test_rx_matches_direct_convolution_full_mode():
    rng = np.random.default_rng(4)
    h = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    x = _frame(3)
    tau = 20
    y = synthesize_rx(x, SPEC, HPA1, ChannelRealization(h, tau), ReceiveConfig(np.inf, "full"), rng)
    xd = saleh_distort(x, HPA1)
    want = np.zeros(160, complex)
    for t in range(160):
        for l in range(5):
            i = t - tau - l
            if 0 <= i < 160:
                want[t] += h[l] * xd[i]
    np.testing.assert_allclose(y, want, atol=1e-12)


def test_rx_training_only_support():
    rng = np.random.default_rng(8)
    for _ in range(30):
        h = draw_channel(ChannelSpec(8), rng)
        tau = int(rng.integers(0, 128))
        y = synthesize_rx(_frame(), SPEC, HPA1, ChannelRealization(h, tau), ReceiveConfig(np.inf), rng)
        outside = np.ones(160, bool)
        outside[tau : tau + 32 + 8 - 1] = False
        assert np.all(y[outside] == 0)


def test_rx_noise_variance():
    cfg = ReceiveConfig(3.0)
    sigma2 = cfg.noise_variance()
    assert sigma2 == pytest.approx(10 ** -0.3)
    rng = np.random.default_rng(9)
    zero = ChannelRealization(np.zeros(1, complex), 0)
    noise = np.concatenate(
        [synthesize_rx(np.zeros(160, complex), SPEC, None, zero, cfg, rng) for _ in range(6250)]
    )
    assert noise.size == 10**6
    assert abs(np.mean(np.abs(noise) ** 2) / sigma2 - 1) < 0.02
    # circular: equal power per real dimension
    assert np.var(noise.real) == pytest.approx(np.var(noise.imag), rel=0.02)


def test_rx_deterministic_given_seed():
    chan = ChannelRealization(draw_channel(ChannelSpec(), np.random.default_rng(1)), 33)
    a = synthesize_rx(_frame(), SPEC, HPA1, chan, ReceiveConfig(8.0), np.random.default_rng(42))
    b = synthesize_rx(_frame(), SPEC, HPA1, chan, ReceiveConfig(8.0), np.random.default_rng(42))
    np.testing.assert_array_equal(a, b)


def test_rx_offset_out_of_range():
    for bad in (-1, 128):
        with pytest.raises(ValueError, match="offset"):
            synthesize_rx(_frame(), SPEC, None, ChannelRealization(np.ones(1, complex), bad),
                          ReceiveConfig(10.0), np.random.default_rng(0))


def test_noise_variance_infinite_snr():
    assert noise_variance(np.inf) == 0.0
    assert noise_variance(0.0, power=2.0) == 2.0


def test_receive_config_validation():
    with pytest.raises(ValueError):
        ReceiveConfig(10.0, "bogus")
