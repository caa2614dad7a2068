"""Waveform/spectrogram data model and time-frequency conversion.

The forward transform reflect-pads half a window at each end, frames with a
periodic Hann window, and keeps bins ``0 .. window_len//2 - 1`` of the
one-sided FFT (the Nyquist bin is dropped so that a 2048-point window yields
exactly 1024 bins).  The inverse uses weighted overlap-add normalized by the
sum of squared analysis windows, which reconstructs the interior of the
signal exactly for band-limited content.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_SAMPLE_RATE = 48000


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StereoSignal:
    """Two-channel waveform, ``samples`` shaped (N, 2), nominal full scale [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[1] != 2:
            raise ValueError(f"expected samples shaped (N, 2), got {samples.shape}")
        if not np.isfinite(samples).all():
            raise ValueError("non-finite input")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", _readonly(samples))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


def mono_to_stereo(x: np.ndarray, sample_rate: int = DEFAULT_SAMPLE_RATE) -> StereoSignal:
    """Duplicate a single channel into both channels."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    return StereoSignal(np.stack([x, x], axis=1), sample_rate)


@dataclass(frozen=True)
class StftConfig:
    """Analysis/synthesis geometry: window length, hop, taper, optional frame crop."""

    window_len: int = 2048
    hop: int = 480
    window: str = "hann"
    crop_frames: int | None = None

    def __post_init__(self):
        w, h = self.window_len, self.hop
        if w < 2 or (w & (w - 1)) != 0:
            raise ValueError(f"window_len must be a power of two, got {w}")
        if not 0 < h <= w:
            raise ValueError(f"hop must satisfy 0 < hop <= window_len, got {h}")
        if self.window != "hann":
            raise ValueError(f"unsupported window taper {self.window!r}")
        if self.crop_frames is not None and self.crop_frames < 1:
            raise ValueError("crop_frames must be positive or None")

    @property
    def fft_bins(self) -> int:
        return self.window_len // 2


#: The training-time geometry: 2048-sample Hann windows, hop 480, crop to 192 frames.
TRAINING_CONFIG = StftConfig(window_len=2048, hop=480, crop_frames=192)


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann taper of length n."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


@dataclass(frozen=True)
class ComplexSpectrogram:
    """Complex STFT tensor shaped (frames, bins, 2) plus the geometry it came from."""

    bins: np.ndarray
    window_len: int
    hop: int

    def __post_init__(self):
        bins = np.asarray(self.bins, dtype=np.complex128)
        if bins.ndim != 3 or bins.shape[2] != 2:
            raise ValueError(f"expected bins shaped (T, F, 2), got {bins.shape}")
        if bins.shape[0] < 1 or bins.shape[1] < 1:
            raise ValueError("spectrogram must have at least one frame and one bin")
        if not np.isfinite(bins).all():
            raise ValueError("non-finite spectrogram")
        object.__setattr__(self, "bins", _readonly(bins))

    @property
    def frames(self) -> int:
        return self.bins.shape[0]

    @property
    def fft_bins(self) -> int:
        return self.bins.shape[1]


def _frame(padded: np.ndarray, window_len: int, hop: int) -> np.ndarray:
    """View of overlapping frames, shaped (n_frames, window_len, channels)."""
    n_frames = 1 + (padded.shape[0] - window_len) // hop
    view = np.lib.stride_tricks.sliding_window_view(padded, window_len, axis=0)
    return view[:: hop][:n_frames].transpose(0, 2, 1)


def stft(x: StereoSignal, cfg: StftConfig) -> ComplexSpectrogram:
    """Short-time Fourier transform of a stereo signal.

    Returns a (T, F, 2) complex tensor with F = window_len // 2.  If
    ``cfg.crop_frames`` is set and at least that many frames are available,
    exactly that many leading frames are kept.
    """
    n = len(x)
    w = cfg.window_len
    if n < w:
        raise ValueError(f"insufficient samples: need at least {w}, got {n}")
    pad = w // 2
    padded = np.pad(x.samples, ((pad, pad), (0, 0)), mode="reflect")
    frames = _frame(padded, w, cfg.hop)
    if cfg.crop_frames is not None and frames.shape[0] >= cfg.crop_frames:
        frames = frames[: cfg.crop_frames]
    taper = hann_window(w)
    spectra = np.fft.rfft(frames * taper[None, :, None], axis=1)
    return ComplexSpectrogram(spectra[:, : cfg.fft_bins, :], w, cfg.hop)


def _check_geometry(X: ComplexSpectrogram, cfg: StftConfig) -> None:
    if (
        X.window_len != cfg.window_len
        or X.hop != cfg.hop
        or X.fft_bins != cfg.fft_bins
    ):
        raise ValueError(
            "geometry mismatch: spectrogram "
            f"(window {X.window_len}, hop {X.hop}, bins {X.fft_bins}) vs config "
            f"(window {cfg.window_len}, hop {cfg.hop}, bins {cfg.fft_bins})"
        )


def istft(X: ComplexSpectrogram, cfg: StftConfig, out_len: int) -> StereoSignal:
    """Weighted overlap-add inverse, normalized by the squared-window sum.

    ``out_len`` is the original signal length; the frames must cover it
    (an uncropped forward transform always does).
    """
    _check_geometry(X, cfg)
    w, hop = cfg.window_len, cfg.hop
    pad = w // 2
    t = X.frames
    cover = (t - 1) * hop + w
    if cover < pad + out_len:
        raise ValueError(
            f"geometry mismatch: {t} frames cover {cover} samples, "
            f"need {pad + out_len} for out_len {out_len}"
        )
    # Reinstate the dropped Nyquist bin as zero before inverting.
    half = np.concatenate(
        [X.bins, np.zeros((t, 1, 2), dtype=np.complex128)], axis=1
    )
    frames = np.fft.irfft(half, n=w, axis=1)
    taper = hann_window(w)
    frames *= taper[None, :, None]

    buf = np.zeros((cover, 2))
    den = np.zeros(cover)
    sq = taper * taper
    for i in range(t):
        buf[i * hop : i * hop + w] += frames[i]
        den[i * hop : i * hop + w] += sq
    good = den > 1e-8 * den.max()
    buf[good] /= den[good, None]
    buf[~good] = 0.0
    return StereoSignal(buf[pad : pad + out_len], DEFAULT_SAMPLE_RATE)


def stft_adjoint(grad_bins: np.ndarray, cfg: StftConfig, n_samples: int) -> np.ndarray:
    """Adjoint of the linear map ``samples -> stft bins`` under the real pairing.

    ``grad_bins`` packs d(loss)/d(Re bin) + 1j * d(loss)/d(Im bin) per bin; the
    return value is d(loss)/d(sample), shaped (n_samples, 2).  Used to pull
    spectrogram-domain loss gradients back to the time domain.
    """
    grad_bins = np.asarray(grad_bins, dtype=np.complex128)
    t, f, c = grad_bins.shape
    w, hop = cfg.window_len, cfg.hop
    if f != cfg.fft_bins or c != 2:
        raise ValueError(f"gradient shape {grad_bins.shape} does not match config")
    pad = w // 2
    cover = (t - 1) * hop + w
    if cover > n_samples + 2 * pad:
        raise ValueError("more frames than the forward transform produces")

    # Adjoint of (rfft then keep F bins): zero-extend and take W * Re(ifft).
    full = np.zeros((t, w, 2), dtype=np.complex128)
    full[:, :f, :] = grad_bins
    gframes = w * np.fft.ifft(full, axis=1).real
    gframes *= hann_window(w)[None, :, None]

    buf = np.zeros((n_samples + 2 * pad, 2))
    for i in range(t):
        buf[i * hop : i * hop + w] += gframes[i]

    # Fold the reflect-padding back onto the original sample positions.
    out = buf[pad : pad + n_samples].copy()
    out[1 : pad + 1] += buf[:pad][::-1]
    out[n_samples - 1 - pad : n_samples - 1] += buf[pad + n_samples :][::-1]
    return out


def scale_input(x: StereoSignal, a: float) -> StereoSignal:
    """Multiply every sample by a nonzero scalar (inverse available as 1/a)."""
    if not np.isfinite(a) or a == 0.0:
        raise ValueError("degenerate scale")
    return StereoSignal(x.samples * a, x.sample_rate)
