"""Stereo speech-enhancement analysis toolkit.

Spatial-cue extraction (IID/IPD/IC/OPD), a stereo-aware training loss with
analytic gradients, the frequency band compressor, image-method room
simulation with SNR mixing, and an objective evaluation harness.
"""

from .compressor import BandCompressorSpec, compress, decompress
from .config import LossSetup
from .evaluate import oracle_wiener_enhance, preservation_errors, sdr
from .losses import (
    GenLogParams,
    GradientResult,
    LossBreakdown,
    LossWeights,
    image_pres_loss,
    loss_gradient,
    lsd,
    time_loss,
    total_loss,
)
from .room import (
    ImpulseResponsePair,
    RoomSpec,
    SceneSpec,
    measure_t60,
    mix,
    sample_scene,
    simulate_rir,
)
from .signal import (
    ComplexSpectrogram,
    StereoSignal,
    StftConfig,
    TRAINING_CONFIG,
    istft,
    mono_to_stereo,
    scale_input,
    stft,
    stft_adjoint,
)
from .spatial import (
    BandPartition,
    OpdParams,
    StereoImageParams,
    image_params,
    opd,
    partition_bands,
    wrap_angle,
)
from .wav import read_stereo, read_wav, write_stereo, write_wav

__version__ = "0.1.0"

__all__ = [
    "BandCompressorSpec",
    "BandPartition",
    "ComplexSpectrogram",
    "GenLogParams",
    "GradientResult",
    "ImpulseResponsePair",
    "LossBreakdown",
    "LossSetup",
    "LossWeights",
    "OpdParams",
    "RoomSpec",
    "SceneSpec",
    "StereoImageParams",
    "StereoSignal",
    "StftConfig",
    "TRAINING_CONFIG",
    "compress",
    "decompress",
    "image_params",
    "image_pres_loss",
    "istft",
    "loss_gradient",
    "lsd",
    "measure_t60",
    "mix",
    "mono_to_stereo",
    "opd",
    "oracle_wiener_enhance",
    "partition_bands",
    "preservation_errors",
    "read_stereo",
    "read_wav",
    "sample_scene",
    "scale_input",
    "sdr",
    "simulate_rir",
    "stft",
    "stft_adjoint",
    "time_loss",
    "total_loss",
    "wrap_angle",
    "write_stereo",
    "write_wav",
]
