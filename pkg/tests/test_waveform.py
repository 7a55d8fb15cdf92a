import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elmsync.waveform import FrameSpec, assemble_frame, random_data_symbols, zadoff_chu


def test_zc_length4_values():
    r = math.sqrt(2) / 2
    expected = np.array([1, r * (1 - 1j), -1, r * (1 - 1j)])
    np.testing.assert_allclose(zadoff_chu(4, 1, 1.0), expected, atol=1e-15)


def test_zc_odd_formula():
    # direct evaluation of exp(-j pi u n(n+1)/N)
    n = np.arange(7)
    expected = np.exp(-1j * np.pi * 3 * n * (n + 1) / 7)
    np.testing.assert_allclose(zadoff_chu(7, 3), expected, atol=1e-12)


def test_zc_power_scaling():
    s = zadoff_chu(32, 1, power=2.5)
    np.testing.assert_allclose(np.abs(s), math.sqrt(2.5), rtol=1e-14)


def test_zc_zero_lag_peak_32():
    s = zadoff_chu(32, 1, 1.0)
    acc = 0j
    for v in s:
        acc += v.conjugate() * v
    assert abs(acc) ** 2 == pytest.approx(1024.0, rel=1e-12)


def test_zc_rejects_non_coprime_root():
    with pytest.raises(ValueError, match="coprime"):
        zadoff_chu(32, 2)
    with pytest.raises(ValueError):
        zadoff_chu(0, 1)


@pytest.mark.parametrize("length", range(2, 65))
def test_zc_aperiodic_autocorrelation_sidelobes(length):
    for root in range(1, length):
        if math.gcd(root, length) != 1:
            continue
        s = zadoff_chu(length, root)
        peak = abs(np.sum(np.abs(s) ** 2))
        for k in range(1, length):
            side = abs(np.sum(s[k:].conj() * s[: length - k]))
            assert side < peak


@given(st.integers(1, 200), st.integers(1, 50))
def test_zc_constant_modulus(length, root):
    if math.gcd(root, length) != 1:
        return
    np.testing.assert_allclose(np.abs(zadoff_chu(length, root)), 1.0, rtol=1e-12)


def test_random_data_symbols():
    rng = np.random.default_rng(0)
    assert random_data_symbols(0, 1.0, rng).shape == (0,)
    d = random_data_symbols(500, 1.0, rng)
    np.testing.assert_allclose(np.abs(d), 1.0, rtol=1e-14)


def test_random_data_power_and_equiprobable():
    rng = np.random.default_rng(7)
    d = random_data_symbols(10_000, 2.0, rng)
    assert abs(np.mean(np.abs(d) ** 2) - 2.0) < 0.05 * 2.0
    quadrant = (d.real < 0).astype(int) * 2 + (d.imag < 0).astype(int)
    counts = np.bincount(quadrant, minlength=4)
    # 4-sigma multinomial bound
    assert np.all(np.abs(counts - 2500) < 4 * math.sqrt(10_000 * 0.25 * 0.75))


def test_random_data_batch_shape():
    d = random_data_symbols(5, 1.0, np.random.default_rng(0), size=3)
    assert d.shape == (3, 5)


def test_assemble_small():
    spec = FrameSpec(n_train=2, n_guard=1, n_data=1)
    out = assemble_frame(spec, [1, -1], [1j])
    np.testing.assert_array_equal(out, [1, -1, 0, 1j])


def test_assemble_default_geometry():
    spec = FrameSpec.from_lengths(32, 160)
    assert (spec.n_train, spec.n_guard, spec.n_data) == (32, 8, 120)
    rng = np.random.default_rng(1)
    x = assemble_frame(spec, zadoff_chu(32), random_data_symbols(spec.n_data, 1.0, rng))
    assert x.shape == (160,)
    assert spec.search_len == 128
    assert np.all(x[32:40] == 0)
    active = np.r_[x[:32], x[40:]]
    assert abs(np.mean(np.abs(active) ** 2) - 1.0) < 1e-12


def test_assemble_is_pure():
    spec = FrameSpec(4, 2, 3)
    s, d = zadoff_chu(4), np.array([1, 1j, -1])
    a, b = assemble_frame(spec, s, d), assemble_frame(spec, s, d)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(s, zadoff_chu(4))


def test_assemble_length_mismatch():
    spec = FrameSpec(4, 2, 3)
    with pytest.raises(ValueError, match="n_train"):
        assemble_frame(spec, np.ones(3), np.ones(3))
    with pytest.raises(ValueError, match="n_data"):
        assemble_frame(spec, np.ones(4), np.ones(2))


@settings(max_examples=50)
@given(st.integers(1, 40), st.integers(0, 10), st.integers(0, 40), st.integers(0, 2**32 - 1))
def test_guard_always_zero(ns, ng, nd, seed):
    spec = FrameSpec(ns, ng, nd)
    rng = np.random.default_rng(seed)
    train = rng.standard_normal(ns) + 1j * rng.standard_normal(ns)
    x = assemble_frame(spec, train, random_data_symbols(nd, 1.0, rng))
    assert len(x) == spec.frame_len
    assert np.all(x[ns : ns + ng] == 0)
    np.testing.assert_array_equal(x[:ns], train)


def test_frame_spec_validation():
    with pytest.raises(ValueError):
        FrameSpec(n_train=0)
    with pytest.raises(ValueError):
        FrameSpec(power=0)
    with pytest.raises(ValueError):
        FrameSpec.from_lengths(32, 36, n_guard=8)
