import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phonemic_attack.audio import Waveform, save_wav
from phonemic_attack.rir import (
    RIR_SECONDS, TAIL_ENERGY, RoomImpulse, apply_rir, convolve, decay_envelope, identity_rir,
    load_rir, make_rir, rir_backward,
)


def _brute_conv(x, h):
    out = np.zeros(len(x))
    for n in range(len(x)):
        for m in range(len(h)):
            if n - m >= 0:
                out[n] += h[m] * x[n - m]
    return out


def test_make_rir_contract():
    h = make_rir(0.3, seed=5)
    assert h.taps[0] == 1.0
    assert h.taps.shape == (int(RIR_SECONDS * 16000),)
    assert np.sum(h.taps[1:] ** 2) == pytest.approx(TAIL_ENERGY)
    np.testing.assert_array_equal(h.taps, make_rir(0.3, seed=5).taps)
    assert not np.array_equal(h.taps, make_rir(0.3, seed=6).taps)
    with pytest.raises(ValueError):
        make_rir(3.0, seed=0)


def test_envelope_60db_at_rt60():
    for rt60 in (0.1, 0.3, 0.5):
        assert decay_envelope(rt60, rt60) == pytest.approx(1e-3)
        assert decay_envelope(0.0, rt60) == 1.0


def test_identity_and_shift():
    w = Waveform(np.random.default_rng(0).uniform(-0.5, 0.5, 50))
    np.testing.assert_array_equal(apply_rir(w, identity_rir()).samples, w.samples)
    np.testing.assert_array_equal(apply_rir(w, RoomImpulse(np.array([1.0, 0, 0, 0]))).samples, w.samples)
    assert identity_rir().is_identity
    d = 3
    shifted = apply_rir(w, RoomImpulse(np.eye(1, 6, d).ravel()))
    np.testing.assert_array_equal(shifted.samples[:d], 0.0)
    np.testing.assert_array_equal(shifted.samples[d:], w.samples[:-d])


def test_small_case_brute_force():
    rng = np.random.default_rng(1)
    x, h = rng.standard_normal(8), rng.standard_normal(3)
    np.testing.assert_allclose(convolve(x, h), _brute_conv(x, h), atol=1e-12)


def test_fft_path_matches_direct():
    rng = np.random.default_rng(2)
    x, h = rng.standard_normal(5000), make_rir(0.2, 1).taps
    np.testing.assert_allclose(convolve(x, h), np.convolve(x, h)[:5000], atol=1e-10)


def test_apply_rir_clamps():
    out = apply_rir(Waveform(np.full(10, 0.9)), RoomImpulse(np.array([1.0, 1.0])))
    assert out.samples.max() == 1.0


@settings(max_examples=100)
@given(st.integers(0, 2 ** 31))
def test_adjoint_identity(seed):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(1, 80)), int(rng.integers(1, 20))
    h = RoomImpulse(rng.standard_normal(m))
    u, g = rng.standard_normal(n), rng.standard_normal(n)
    assert abs(np.dot(convolve(u, h.taps), g) - np.dot(u, rir_backward(g, h))) <= 1e-9


def test_adjoint_identity_fft_path():
    rng = np.random.default_rng(3)
    h = make_rir(0.4, 2)
    u, g = rng.standard_normal(8000), rng.standard_normal(8000)
    lhs, rhs = np.dot(convolve(u, h.taps), g), np.dot(u, rir_backward(g, h))
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(lhs))


def test_backward_trivial_cases():
    g = np.random.default_rng(4).standard_normal(30)
    np.testing.assert_array_equal(rir_backward(g, identity_rir()), g)
    assert not np.any(rir_backward(np.zeros(30), make_rir(0.2, 0)))


@given(st.integers(0, 2 ** 31))
def test_linear_pre_clamp(seed):
    rng = np.random.default_rng(seed)
    h = rng.standard_normal(5)
    a, b = rng.standard_normal(40), rng.standard_normal(40)
    s, t = rng.standard_normal(2)
    np.testing.assert_allclose(convolve(s * a + t * b, h), s * convolve(a, h) + t * convolve(b, h),
                               atol=1e-10)


def test_load_rir(tmp_path):
    taps = np.zeros(100)
    taps[4], taps[10] = 0.5, -0.25
    save_wav(Waveform(taps), tmp_path / "r.wav")
    h = load_rir(tmp_path / "r.wav")
    assert h.taps[0] == 1.0 and h.taps[6] == pytest.approx(-0.5)
