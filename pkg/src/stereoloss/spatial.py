"""Per-frame, per-band stereo image parameters.

For every time frame and every uniform frequency band this module extracts
the interchannel intensity difference (IID, dB), interchannel phase
difference (IPD, radians), and interchannel coherence (IC, in [0, 1]), plus
the overall phase difference (OPD) between a reference and an estimate,
per channel.  All band sums run over frequency only, so each frame gets its
own parameter vector.

Silent bands are regularized with an epsilon relative to the spectrogram's
mean band power, floored at a tiny absolute value: a band silent in both
channels reads IID = 0 dB, IPD = 0, IC = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signal import ComplexSpectrogram

BAND_EPS_REL = 1e-10
BAND_EPS_FLOOR = 1e-20

DEFAULT_BINS_PER_BAND = 32


def wrap_angle(a):
    """Wrap angles to the principal interval (-pi, pi]."""
    return np.mod(np.asarray(a, dtype=np.float64) - np.pi, -2.0 * np.pi) + np.pi


@dataclass(frozen=True)
class BandPartition:
    """Uniform grouping of F bins into B bands of bins_per_band each."""

    fft_bins: int
    bins_per_band: int

    def __post_init__(self):
        if self.bins_per_band < 1:
            raise ValueError("bins_per_band must be positive")
        if self.fft_bins % self.bins_per_band != 0:
            raise ValueError(
                f"{self.fft_bins} bins not divisible into bands of {self.bins_per_band}"
            )

    @property
    def band_count(self) -> int:
        return self.fft_bins // self.bins_per_band

    @property
    def edges(self) -> np.ndarray:
        """Band edges f_1 .. f_{B+1}; band b covers [edges[b], edges[b+1])."""
        return np.arange(self.band_count + 1) * self.bins_per_band


def partition_bands(fft_bins: int, bins_per_band: int = DEFAULT_BINS_PER_BAND) -> BandPartition:
    return BandPartition(fft_bins, bins_per_band)


@dataclass(frozen=True)
class StereoImageParams:
    """Per-frame, per-band IID/IPD/IC arrays, each shaped (T, B)."""

    iid_db: np.ndarray
    ipd_rad: np.ndarray
    ic: np.ndarray


@dataclass(frozen=True)
class OpdParams:
    """Per-frame, per-band, per-channel overall phase difference, shaped (T, B, 2)."""

    opd_rad: np.ndarray


def band_power(channel_bins: np.ndarray, partition: BandPartition) -> np.ndarray:
    """Sum of |S|^2 over each band's bins, shaped (T, B)."""
    mag2 = channel_bins.real**2 + channel_bins.imag**2
    return np.add.reduceat(mag2, partition.edges[:-1], axis=1)


def band_cross(a_bins: np.ndarray, b_bins: np.ndarray, partition: BandPartition) -> np.ndarray:
    """Banded cross-spectrum sum(a * conj(b)), shaped (T, B) complex."""
    return np.add.reduceat(a_bins * np.conj(b_bins), partition.edges[:-1], axis=1)


def band_epsilon(p1: np.ndarray, p2: np.ndarray) -> float:
    """Regularizer relative to the spectrogram's mean band power."""
    mean_power = 0.5 * (float(p1.mean()) + float(p2.mean()))
    return max(BAND_EPS_REL * mean_power, BAND_EPS_FLOOR)


def _check_bands(spec: ComplexSpectrogram, partition: BandPartition) -> None:
    if spec.fft_bins != partition.fft_bins:
        raise ValueError(
            f"partition covers {partition.fft_bins} bins, spectrogram has {spec.fft_bins}"
        )


def image_params(spec: ComplexSpectrogram, partition: BandPartition) -> StereoImageParams:
    """Extract IID/IPD/IC for every (frame, band) cell.

    IID is the banded log power ratio of channel 1 over channel 2, IPD the
    angle of the banded cross-spectrum, and IC its magnitude normalized by
    the geometric mean of the band powers.
    """
    _check_bands(spec, partition)
    p1 = band_power(spec.bins[:, :, 0], partition)
    p2 = band_power(spec.bins[:, :, 1], partition)
    x = band_cross(spec.bins[:, :, 0], spec.bins[:, :, 1], partition)
    eps = band_epsilon(p1, p2)
    iid = 10.0 * np.log10((p1 + eps) / (p2 + eps))
    ipd = np.angle(x)
    ic = (np.abs(x) + eps) / np.sqrt((p1 + eps) * (p2 + eps))
    return StereoImageParams(iid_db=iid, ipd_rad=ipd, ic=ic)


def opd(ref: ComplexSpectrogram, est: ComplexSpectrogram, partition: BandPartition) -> OpdParams:
    """Banded phase of sum(ref * conj(est)) for each channel separately."""
    _check_bands(ref, partition)
    if ref.bins.shape != est.bins.shape:
        raise ValueError(
            f"shape mismatch: reference {ref.bins.shape} vs estimate {est.bins.shape}"
        )
    w = np.stack(
        [
            band_cross(ref.bins[:, :, c], est.bins[:, :, c], partition)
            for c in (0, 1)
        ],
        axis=2,
    )
    return OpdParams(opd_rad=np.angle(w))
