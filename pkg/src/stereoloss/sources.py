"""Deterministic synthetic program material for desk-scale dataset synthesis.

Stands in for real speech/noise corpora: a harmonic "speech-like" source with
pitch drift and syllabic amplitude modulation, and a spectrally-shaped noise
source.  Both are pure functions of the RNG passed in.
"""

from __future__ import annotations

import numpy as np

from .signal import DEFAULT_SAMPLE_RATE, StereoSignal, mono_to_stereo


def speechlike(rng: np.random.Generator, duration: float, fs: int = DEFAULT_SAMPLE_RATE) -> StereoSignal:
    """Harmonic tone complex with vibrato and syllable-rate envelope."""
    n = int(round(duration * fs))
    t = np.arange(n) / fs
    f0 = rng.uniform(110.0, 220.0)
    vibrato = 1.0 + 0.03 * np.sin(2.0 * np.pi * rng.uniform(4.0, 7.0) * t + rng.uniform(0, 2 * np.pi))
    phase = 2.0 * np.pi * np.cumsum(f0 * vibrato) / fs
    x = np.zeros(n)
    n_harm = max(2, int(8000.0 / (1.1 * f0)))
    for h in range(1, n_harm + 1):
        x += np.sin(h * phase + rng.uniform(0, 2 * np.pi)) / h
    syllable = 0.5 * (1.0 + np.sin(2.0 * np.pi * rng.uniform(2.0, 5.0) * t + rng.uniform(0, 2 * np.pi)))
    x *= syllable**2 + 0.05
    # broadband fricative/breath component so every band carries speech energy
    x += (0.12 * syllable**2 + 0.01) * rng.standard_normal(n)
    x *= 0.5 / np.max(np.abs(x))
    return mono_to_stereo(x, fs)


def noiselike(rng: np.random.Generator, duration: float, fs: int = DEFAULT_SAMPLE_RATE) -> StereoSignal:
    """Pink-ish noise: white noise shaped by 1/sqrt(f) in the frequency domain."""
    n = int(round(duration * fs))
    white = rng.standard_normal(n)
    spec = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n, 1.0 / fs)
    spec *= 1.0 / np.sqrt(np.maximum(freqs, 30.0))
    x = np.fft.irfft(spec, n=n)
    x *= 0.5 / np.max(np.abs(x))
    return mono_to_stereo(x, fs)
