"""JSON-loadable bundle of everything the loss needs besides the waveforms."""

from __future__ import annotations

from dataclasses import dataclass, field

from .losses import GenLogParams, LossWeights
from .signal import StftConfig
from .spatial import DEFAULT_BINS_PER_BAND, BandPartition


@dataclass(frozen=True)
class LossSetup:
    stft: StftConfig = StftConfig()
    genlog: GenLogParams = GenLogParams()
    weights: LossWeights = LossWeights()
    bins_per_band: int = DEFAULT_BINS_PER_BAND

    @property
    def partition(self) -> BandPartition:
        return BandPartition(self.stft.fft_bins, self.bins_per_band)

    def to_dict(self) -> dict:
        d = {
            "stft": {
                "window_len": self.stft.window_len,
                "hop": self.stft.hop,
                "window": self.stft.window,
                "crop_frames": self.stft.crop_frames,
            },
            "bands": {"bins_per_band": self.bins_per_band},
            "genlog": {"gamma": self.genlog.gamma},
        }
        d.update(self.weights.to_dict())
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LossSetup":
        stft_d = d.get("stft", {})
        stft = StftConfig(
            window_len=int(stft_d.get("window_len", 2048)),
            hop=int(stft_d.get("hop", 480)),
            window=stft_d.get("window", "hann"),
            crop_frames=stft_d.get("crop_frames"),
        )
        genlog = GenLogParams(gamma=float(d.get("genlog", {}).get("gamma", 1.0 / 3.0)))
        weights = LossWeights.from_dict(d)
        bins_per_band = int(d.get("bands", {}).get("bins_per_band", DEFAULT_BINS_PER_BAND))
        setup = cls(stft=stft, genlog=genlog, weights=weights, bins_per_band=bins_per_band)
        setup.partition  # validates divisibility eagerly
        return setup
