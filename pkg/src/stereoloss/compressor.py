"""Frequency-axis band compressor and its replication inverse.

The compressor keeps the low quarter of the bins untouched, averages the
second quarter in disjoint pairs, and averages the upper half in disjoint
groups of four, halving the number of bins overall.  Decompression
replicates each averaged value back across its group, so
``compress(decompress(.))`` is the identity on the compressed domain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signal import ComplexSpectrogram

MID_FACTOR = 2
HIGH_FACTOR = 4


@dataclass(frozen=True)
class BandCompressorSpec:
    """Edges and factors implied by the bin count F."""

    fft_bins: int

    def __post_init__(self):
        f = self.fft_bins
        # F/4 pass bins + F/8 mid groups + F/8 high groups requires 8 | F.
        if f % 8 != 0:
            raise ValueError(f"fft bin count must be divisible by 4 (and 8), got {f}")

    @property
    def pass_edge(self) -> int:
        return self.fft_bins // 4

    @property
    def mid_edge(self) -> int:
        return self.fft_bins // 2

    @property
    def compressed_bins(self) -> int:
        return self.fft_bins // 2


def compress(X: ComplexSpectrogram) -> ComplexSpectrogram:
    """Halve the bin count by pass/average-2/average-4 grouping."""
    spec = BandCompressorSpec(X.fft_bins)
    bins = X.bins
    t, _, c = bins.shape
    low = bins[:, : spec.pass_edge, :]
    mid = bins[:, spec.pass_edge : spec.mid_edge, :].reshape(t, -1, MID_FACTOR, c).mean(axis=2)
    high = bins[:, spec.mid_edge :, :].reshape(t, -1, HIGH_FACTOR, c).mean(axis=2)
    return ComplexSpectrogram(np.concatenate([low, mid, high], axis=1), X.window_len, X.hop)


def decompress(Xc: ComplexSpectrogram) -> ComplexSpectrogram:
    """Replicate each averaged value across its original group."""
    f = 2 * Xc.fft_bins
    spec = BandCompressorSpec(f)
    if Xc.fft_bins != spec.compressed_bins:
        raise ValueError(f"inconsistent compressed length {Xc.fft_bins}")
    bins = Xc.bins
    n_mid = (spec.mid_edge - spec.pass_edge) // MID_FACTOR
    low = bins[:, : spec.pass_edge, :]
    mid = np.repeat(bins[:, spec.pass_edge : spec.pass_edge + n_mid, :], MID_FACTOR, axis=1)
    high = np.repeat(bins[:, spec.pass_edge + n_mid :, :], HIGH_FACTOR, axis=1)
    return ComplexSpectrogram(np.concatenate([low, mid, high], axis=1), Xc.window_len, Xc.hop)
