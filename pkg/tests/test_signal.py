import numpy as np
import pytest

from stereoloss import (
    ComplexSpectrogram,
    StereoSignal,
    StftConfig,
    istft,
    scale_input,
    stft,
    stft_adjoint,
)
from stereoloss.signal import hann_window

from conftest import bandlimited_stereo


def test_stft_shape_and_crop(rng):
    # 93,120 samples with the 2048/480 config and a 192-frame crop
    x = bandlimited_stereo(rng, 93120)
    spec = stft(x, StftConfig(window_len=2048, hop=480, crop_frames=192))
    assert spec.bins.shape == (192, 1024, 2)


def test_stft_crop_noop_when_short(rng):
    x = bandlimited_stereo(rng, 4096)
    spec = stft(x, StftConfig(window_len=2048, hop=480, crop_frames=500))
    assert spec.frames < 500


def test_zero_signal_zero_spectrogram():
    x = StereoSignal(np.zeros((5000, 2)))
    spec = stft(x, StftConfig())
    assert np.all(spec.bins == 0)


def test_sinusoid_at_exact_bin_center():
    # cosine at bin 20 of a 2048-point transform (468.75 Hz at 48 kHz); the
    # length makes the reflect extension an exact continuation at both edges,
    # so every frame sees a pure tone: 3-bin mainlobe, nothing else
    n = 256 * 188 + 1
    w = 2048
    freq_bin = 20
    t = np.arange(n)
    x = np.cos(2 * np.pi * freq_bin * t / w)
    spec = stft(StereoSignal(np.stack([x, x], axis=1)), StftConfig())
    mag = np.abs(spec.bins)
    peak = mag[:, freq_bin, :]
    assert np.all(peak > 100.0)  # ~0.5 * window energy
    sidelobes = np.delete(mag, [freq_bin - 1, freq_bin, freq_bin + 1], axis=1)
    assert np.all(sidelobes <= 1e-3 * peak[:, None, :])
    # periodic-Hann mainlobe: neighbors at exactly half the peak
    np.testing.assert_allclose(mag[:, freq_bin - 1, :], 0.5 * peak, rtol=1e-6)


def test_istft_roundtrip_interior(rng):
    cfg = StftConfig()
    for _ in range(3):
        x = bandlimited_stereo(rng, 48000)
        y = istft(stft(x, cfg), cfg, len(x))
        w = cfg.window_len
        err = np.abs(y.samples[w:-w] - x.samples[w:-w]).max()
        assert err / np.abs(x.samples).max() < 1e-5


def test_istft_zero_spectrogram():
    cfg = StftConfig(window_len=256, hop=64)
    spec = ComplexSpectrogram(np.zeros((10, 128, 2), dtype=complex), 256, 64)
    out = istft(spec, cfg, 512)
    assert np.all(out.samples == 0)


def test_istft_single_frame_support(rng):
    cfg = StftConfig(window_len=256, hop=64)
    n = 2000
    x = bandlimited_stereo(rng, n)
    spec = stft(x, cfg)
    k = 10  # interior frame
    lone = np.zeros_like(spec.bins)
    lone[k] = spec.bins[k]
    out = istft(ComplexSpectrogram(lone, 256, 64), cfg, n).samples
    pad = cfg.window_len // 2
    start = k * cfg.hop - pad
    stop = start + cfg.window_len
    assert np.any(out[start:stop] != 0)
    assert np.all(out[:start] == 0)
    assert np.all(out[stop:] == 0)


def test_istft_geometry_mismatch(rng):
    x = bandlimited_stereo(rng, 4096)
    spec = stft(x, StftConfig(window_len=1024, hop=256))
    with pytest.raises(ValueError, match="geometry"):
        istft(spec, StftConfig(window_len=2048, hop=480), 4096)


def test_stft_linearity(rng):
    cfg = StftConfig(window_len=512, hop=128)
    x = bandlimited_stereo(rng, 6000)
    y = bandlimited_stereo(rng, 6000)
    a, b = 1.7, -0.4
    combo = stft(StereoSignal(a * x.samples + b * y.samples), cfg)
    direct = a * stft(x, cfg).bins + b * stft(y, cfg).bins
    np.testing.assert_allclose(combo.bins, direct, atol=1e-12 * np.abs(direct).max())


def test_parseval_per_frame(rng):
    cfg = StftConfig(window_len=512, hop=128)
    x = bandlimited_stereo(rng, 6000, f_hi=20000.0)
    spec = stft(x, cfg)
    w = cfg.window_len
    pad = w // 2
    taper = hann_window(w)
    padded = np.pad(x.samples, ((pad, pad), (0, 0)), mode="reflect")
    # interior frames only: the reflection kink at the edges puts energy at
    # the dropped Nyquist bin
    first = pad // cfg.hop + 1
    last = (pad + 6000 - w) // cfg.hop
    for t in range(first, last + 1):
        frame = padded[t * cfg.hop : t * cfg.hop + w] * taper[:, None]
        time_energy = (frame**2).sum(axis=0)
        mags = np.abs(spec.bins[t]) ** 2
        freq_energy = (mags[0] + 2.0 * mags[1:].sum(axis=0)) / w
        np.testing.assert_allclose(freq_energy, time_energy, rtol=1e-9)


def test_stft_errors():
    with pytest.raises(ValueError, match="insufficient samples"):
        stft(StereoSignal(np.zeros((100, 2))), StftConfig())
    with pytest.raises(ValueError, match="non-finite"):
        StereoSignal(np.full((100, 2), np.nan))


def test_stft_config_validation():
    with pytest.raises(ValueError, match="power of two"):
        StftConfig(window_len=1000)
    with pytest.raises(ValueError, match="hop"):
        StftConfig(window_len=1024, hop=2048)
    with pytest.raises(ValueError, match="taper"):
        StftConfig(window="kaiser")


def test_scale_input_identity_and_inverse(rng):
    x = bandlimited_stereo(rng, 4096)
    assert np.array_equal(scale_input(x, 1.0).samples, x.samples)
    roundtrip = scale_input(scale_input(x, 2.0), 0.5)
    assert np.array_equal(roundtrip.samples, x.samples)
    with pytest.raises(ValueError, match="degenerate scale"):
        scale_input(x, 0.0)
    with pytest.raises(ValueError, match="degenerate scale"):
        scale_input(x, np.inf)


def test_scale_input_preserves_image_params(rng):
    from stereoloss import image_params, partition_bands, wrap_angle

    cfg = StftConfig(window_len=512, hop=128)
    part = partition_bands(256, 32)
    x = bandlimited_stereo(rng, 6000)
    base = image_params(stft(x, cfg), part)
    scaled = image_params(stft(scale_input(x, 3.7), cfg), part)
    np.testing.assert_allclose(scaled.iid_db, base.iid_db, atol=1e-9)
    np.testing.assert_allclose(wrap_angle(scaled.ipd_rad - base.ipd_rad), 0.0, atol=1e-9)
    np.testing.assert_allclose(scaled.ic, base.ic, atol=1e-9)


def test_adjoint_matches_forward_inner_product(rng):
    cfg = StftConfig(window_len=128, hop=32)
    n = 500
    x = rng.standard_normal((n, 2))
    spec = stft(StereoSignal(x), cfg)
    g = rng.standard_normal(spec.bins.shape) + 1j * rng.standard_normal(spec.bins.shape)
    lhs = float(np.sum(g.real * spec.bins.real + g.imag * spec.bins.imag))
    rhs = float(np.sum(stft_adjoint(g, cfg, n) * x))
    assert abs(lhs - rhs) <= 1e-10 * abs(lhs)
