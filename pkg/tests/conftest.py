import numpy as np
import pytest

from stereoloss import ComplexSpectrogram, StereoSignal


def bandlimited_noise(rng, n, fs=48000, f_hi=20000.0):
    """Random audio-band noise (flat up to f_hi, nothing near Nyquist)."""
    spec = rng.standard_normal(n // 2 + 1) + 1j * rng.standard_normal(n // 2 + 1)
    spec[np.fft.rfftfreq(n, 1.0 / fs) > f_hi] = 0.0
    x = np.fft.irfft(spec, n=n)
    return x / np.max(np.abs(x))


def bandlimited_stereo(rng, n, fs=48000, f_hi=20000.0):
    return StereoSignal(
        np.stack([bandlimited_noise(rng, n, fs, f_hi) for _ in range(2)], axis=1), fs
    )


def random_spectrogram(rng, frames=6, bins=64, window_len=128, hop=32, scale=1.0):
    data = scale * (
        rng.standard_normal((frames, bins, 2)) + 1j * rng.standard_normal((frames, bins, 2))
    )
    return ComplexSpectrogram(data, window_len, hop)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
