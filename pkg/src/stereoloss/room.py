"""Shoebox room simulation: scene sampling, image-method RIRs, SNR mixing.

Scenes follow fixed geometric constraints: a 20 cm stereo microphone pair
whose center sits in the middle half of the floor plan at 1-1.5 m height,
a speech source 0.5-2 m away and a noise source 1.5-2 m away (heights
1.2-1.9 m), separated by at least 20 degrees as seen from the pair center.

Impulse responses are 0.9 s long at 48 kHz with fractional delays rounded
to the nearest sample.  Each image source gets a random sign, identical at
both microphones, so interchannel cues are untouched while arrivals that
share a sample bin add incoherently; without this the all-positive tap
pile-up inflates the late energy and the measured decay time.  The uniform
wall absorption realizing a target decay is inverted against the image
model's own directional decay statistics with the same -5..-25 dB Schroeder
fit used by :func:`measure_t60` (plain Sabine can demand absorption > 1 for
large rooms with short targets, and both Sabine and Eyring understate the
slow directional tail of a shoebox image sum).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq
from scipy.signal import fftconvolve

from .signal import DEFAULT_SAMPLE_RATE, StereoSignal

SPEED_OF_SOUND = 340.0
RIR_SECONDS = 0.9
MIC_SPACING = 0.2

ROOM_DIM_RANGE = (3.0, 8.0)
MIC_HEIGHT_RANGE = (1.0, 1.5)
SOURCE_HEIGHT_RANGE = (1.2, 1.9)
SPEECH_DISTANCE_RANGE = (0.5, 2.0)
NOISE_DISTANCE_RANGE = (1.5, 2.0)
MIN_SOURCE_ANGLE_DEG = 20.0
SNR_MEAN, SNR_STD = 5.0, 10.0
SNR_RANGE = (-10.0, 30.0)
LEVEL_MEAN, LEVEL_STD = -26.0, 10.0
T60_RANGE = (0.2, 0.8)
# train-mix odds of a dry scene: 12000 anechoic vs 34400 reverberant rooms
P_NO_REVERB = 12000.0 / (12000.0 + 34400.0)

MAX_SAMPLE_ATTEMPTS = 10000

_T60_FIT_DB = (-5.0, -25.0)


def _octant_directions(n: int = 24) -> tuple[np.ndarray, np.ndarray]:
    thetas = (np.arange(n) + 0.5) * (np.pi / 2) / n
    phis = (np.arange(n) + 0.5) * (np.pi / 2) / n
    th, ph = np.meshgrid(thetas, phis, indexing="ij")
    dirs = np.stack(
        [np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1
    )
    return dirs.reshape(-1, 3), np.sin(th).reshape(-1)


_OCT_DIRS, _OCT_WEIGHTS = _octant_directions()


def _diffuse_tau60(dims: np.ndarray) -> float:
    """Schroeder-fit decay span of the continuum image model at unit decay rate.

    An image at distance d along direction u has ~ d * sum(|u_a| / L_a)
    reflections, so the energy envelope is the directional mixture of
    exponentials rather than a single Eyring exponential.  This evaluates the
    mixture's -5..-25 dB Schroeder fit (matching measure_t60) for decay rate
    a = 1; the span scales as 1/a.
    """
    g = (np.abs(_OCT_DIRS) / np.asarray(dims)[None, :]).sum(axis=1)
    coef = _OCT_WEIGHTS / g
    s0 = coef.sum()

    def level(tau):
        return 10.0 * np.log10(
            max((coef * np.exp(-np.minimum(g * tau, 700.0))).sum() / s0, 1e-300)
        )

    hi, lo = _T60_FIT_DB
    t_hi = brentq(lambda t: level(t) - hi, 1e-9, 1e5)
    t_lo = brentq(lambda t: level(t) - lo, t_hi, 1e6)
    return 3.0 * (t_lo - t_hi)


def absorption_for_t60(dims: np.ndarray, t60: float) -> float:
    """Uniform wall energy absorption realizing a target measured decay time."""
    if t60 <= 0.0:
        return 1.0
    rate = _diffuse_tau60(np.asarray(dims, dtype=np.float64)) / t60
    # rate = -2 c ln(beta); alpha = 1 - beta^2
    return float(1.0 - np.exp(-rate / SPEED_OF_SOUND))


@dataclass(frozen=True)
class RoomSpec:
    """Shoebox dimensions and the uniform absorption derived from the decay target."""

    dims: tuple[float, float, float]
    absorption: float
    speed_of_sound: float = SPEED_OF_SOUND


@dataclass(frozen=True)
class SceneSpec:
    room: RoomSpec
    mic_pair: tuple[tuple[float, float, float], tuple[float, float, float]]
    speaker_pos: tuple[float, float, float]
    noise_pos: tuple[float, float, float]
    t60: float
    snr_db: float
    level_db: float
    seed: int

    @property
    def mic_center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.mic_pair[0]) + np.asarray(self.mic_pair[1]))

    def validate(self) -> list[str]:
        """Return the list of violated geometric constraints (empty when valid)."""
        problems = []
        dims = np.asarray(self.room.dims)
        mics = np.asarray(self.mic_pair)
        spacing = np.linalg.norm(mics[0] - mics[1])
        if abs(spacing - MIC_SPACING) > 1e-9:
            problems.append(f"mic spacing {spacing:.6f} != {MIC_SPACING}")
        for name, pos in (("mic0", mics[0]), ("mic1", mics[1]),
                          ("speaker", self.speaker_pos), ("noise", self.noise_pos)):
            p = np.asarray(pos)
            if np.any(p <= 0) or np.any(p >= dims):
                problems.append(f"{name} outside the room")
        for m in mics:
            if not MIC_HEIGHT_RANGE[0] <= m[2] <= MIC_HEIGHT_RANGE[1]:
                problems.append(f"mic height {m[2]:.3f} outside {MIC_HEIGHT_RANGE}")
        for name, pos in (("speaker", self.speaker_pos), ("noise", self.noise_pos)):
            if not SOURCE_HEIGHT_RANGE[0] <= pos[2] <= SOURCE_HEIGHT_RANGE[1]:
                problems.append(f"{name} height {pos[2]:.3f} outside {SOURCE_HEIGHT_RANGE}")
        center = self.mic_center
        d_speech = float(np.linalg.norm(np.asarray(self.speaker_pos) - center))
        d_noise = float(np.linalg.norm(np.asarray(self.noise_pos) - center))
        if not SPEECH_DISTANCE_RANGE[0] <= d_speech <= SPEECH_DISTANCE_RANGE[1]:
            problems.append(f"speaker distance {d_speech:.3f} outside {SPEECH_DISTANCE_RANGE}")
        if not NOISE_DISTANCE_RANGE[0] <= d_noise <= NOISE_DISTANCE_RANGE[1]:
            problems.append(f"noise distance {d_noise:.3f} outside {NOISE_DISTANCE_RANGE}")
        if source_angle_deg(self) < MIN_SOURCE_ANGLE_DEG - 1e-9:
            problems.append(f"source angle {source_angle_deg(self):.2f} below {MIN_SOURCE_ANGLE_DEG}")
        if not SNR_RANGE[0] <= self.snr_db <= SNR_RANGE[1]:
            problems.append(f"snr {self.snr_db:.2f} outside {SNR_RANGE}")
        if self.t60 != 0.0 and not T60_RANGE[0] <= self.t60 <= T60_RANGE[1]:
            problems.append(f"t60 {self.t60:.3f} outside {{0}} u {T60_RANGE}")
        return problems

    def to_dict(self) -> dict:
        return {
            "room": {
                "dims": list(self.room.dims),
                "absorption": self.room.absorption,
                "speed_of_sound": self.room.speed_of_sound,
            },
            "mic_pair": [list(m) for m in self.mic_pair],
            "speaker_pos": list(self.speaker_pos),
            "noise_pos": list(self.noise_pos),
            "t60": self.t60,
            "snr_db": self.snr_db,
            "level_db": self.level_db,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        room = RoomSpec(
            dims=tuple(d["room"]["dims"]),
            absorption=d["room"]["absorption"],
            speed_of_sound=d["room"].get("speed_of_sound", SPEED_OF_SOUND),
        )
        return cls(
            room=room,
            mic_pair=tuple(tuple(m) for m in d["mic_pair"]),
            speaker_pos=tuple(d["speaker_pos"]),
            noise_pos=tuple(d["noise_pos"]),
            t60=d["t60"],
            snr_db=d["snr_db"],
            level_db=d["level_db"],
            seed=d["seed"],
        )


def source_angle_deg(scene: SceneSpec) -> float:
    """Angle between the speaker and noise directions seen from the mic center."""
    center = scene.mic_center
    a = np.asarray(scene.speaker_pos) - center
    b = np.asarray(scene.noise_pos) - center
    cosang = np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0))))


def sample_scene(seed: int, snr_db: float | None = None, t60: float | None = None) -> SceneSpec:
    """Draw a random scene satisfying all geometric constraints.

    Deterministic in the seed.  ``snr_db`` / ``t60`` override the sampled
    values (used for bucketed test sets).
    """
    rng = np.random.default_rng(seed)
    dims = rng.uniform(*ROOM_DIM_RANGE, size=3)

    sampled_t60 = 0.0 if rng.random() < P_NO_REVERB else float(rng.uniform(*T60_RANGE))
    if t60 is not None:
        sampled_t60 = float(t60)

    # pair center confined to the middle half of the floor plan
    center = np.array(
        [
            rng.uniform(dims[0] / 4.0, 3.0 * dims[0] / 4.0),
            rng.uniform(dims[1] / 4.0, 3.0 * dims[1] / 4.0),
            rng.uniform(*MIC_HEIGHT_RANGE),
        ]
    )
    azimuth = rng.uniform(0.0, 2.0 * np.pi)
    offset = 0.5 * MIC_SPACING * np.array([np.cos(azimuth), np.sin(azimuth), 0.0])
    mic_pair = (center + offset, center - offset)

    def draw_source(dist_range):
        for _ in range(MAX_SAMPLE_ATTEMPTS):
            pos = np.array(
                [
                    rng.uniform(0.0, dims[0]),
                    rng.uniform(0.0, dims[1]),
                    rng.uniform(*SOURCE_HEIGHT_RANGE),
                ]
            )
            if dist_range[0] <= np.linalg.norm(pos - center) <= dist_range[1]:
                return pos
        raise RuntimeError("infeasible room")

    min_cos = np.cos(np.radians(MIN_SOURCE_ANGLE_DEG))
    for _ in range(MAX_SAMPLE_ATTEMPTS):
        speaker = draw_source(SPEECH_DISTANCE_RANGE)
        noise = draw_source(NOISE_DISTANCE_RANGE)
        a = speaker - center
        b = noise - center
        if np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)) <= min_cos:
            break
    else:
        raise RuntimeError("infeasible room")

    sampled_snr = float(np.clip(rng.normal(SNR_MEAN, SNR_STD), *SNR_RANGE))
    if snr_db is not None:
        sampled_snr = float(snr_db)
    level_db = float(rng.normal(LEVEL_MEAN, LEVEL_STD))

    room = RoomSpec(dims=tuple(dims.tolist()), absorption=absorption_for_t60(dims, sampled_t60))
    return SceneSpec(
        room=room,
        mic_pair=(tuple(mic_pair[0].tolist()), tuple(mic_pair[1].tolist())),
        speaker_pos=tuple(speaker.tolist()),
        noise_pos=tuple(noise.tolist()),
        t60=sampled_t60,
        snr_db=sampled_snr,
        level_db=level_db,
        seed=int(seed),
    )


@dataclass(frozen=True)
class ImpulseResponsePair:
    """Stereo impulse response for one source, shaped (samples, 2)."""

    rir: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE


def simulate_rir(scene: SceneSpec, source: str = "speech") -> ImpulseResponsePair:
    """Image-method stereo RIR for the scene's speech or noise source.

    Deterministic in (scene.seed, source).  The direct path keeps sign +1;
    every other image gets a random sign shared by both microphones.
    """
    if source == "speech":
        pos = np.asarray(scene.speaker_pos)
    elif source == "noise":
        pos = np.asarray(scene.noise_pos)
    else:
        raise ValueError(f"source must be 'speech' or 'noise', got {source!r}")
    dims = np.asarray(scene.room.dims)
    if np.any(pos <= 0) or np.any(pos >= dims):
        raise ValueError("source outside room")

    fs = DEFAULT_SAMPLE_RATE
    c = scene.room.speed_of_sound
    n_out = int(round(RIR_SECONDS * fs))
    mics = [np.asarray(m) for m in scene.mic_pair]

    rir = np.zeros((n_out, 2))
    if scene.t60 == 0.0:
        for ch, mic in enumerate(mics):
            d = float(np.linalg.norm(pos - mic))
            idx = int(np.rint(d * fs / c))
            if idx < n_out:
                rir[idx, ch] = 1.0 / (4.0 * np.pi * d)
        return ImpulseResponsePair(rir=rir, sample_rate=fs)

    beta = np.sqrt(1.0 - scene.room.absorption)
    max_dist = n_out / fs * c
    axis_m = [
        np.arange(-int(np.ceil((max_dist + dims[a]) / (2.0 * dims[a]))) - 1,
                  int(np.ceil((max_dist + dims[a]) / (2.0 * dims[a]))) + 2)
        for a in range(3)
    ]
    sign_rng = np.random.default_rng(
        np.random.SeedSequence([scene.seed & 0x7FFFFFFF, 1 if source == "speech" else 2])
    )
    grid_shape = tuple(len(m) for m in axis_m)
    for px in (0, 1):
        for py in (0, 1):
            for pz in (0, 1):
                signs = sign_rng.choice([-1.0, 1.0], size=grid_shape)
                if px == py == pz == 0:
                    zero = tuple(int(np.nonzero(m == 0)[0][0]) for m in axis_m)
                    signs[zero] = 1.0  # direct path
                coords = []
                counts = []
                for a, p in enumerate((px, py, pz)):
                    m = axis_m[a]
                    coords.append((1 - 2 * p) * pos[a] + 2.0 * m * dims[a])
                    counts.append(np.abs(m - p) + np.abs(m))
                n_refl = (
                    counts[0][:, None, None]
                    + counts[1][None, :, None]
                    + counts[2][None, None, :]
                )
                for ch, mic in enumerate(mics):
                    d = np.sqrt(
                        (coords[0][:, None, None] - mic[0]) ** 2
                        + (coords[1][None, :, None] - mic[1]) ** 2
                        + (coords[2][None, None, :] - mic[2]) ** 2
                    )
                    idx = np.rint(d * fs / c).astype(np.int64)
                    mask = (idx < n_out) & (d > 1e-9)
                    gains = signs[mask] * beta ** n_refl[mask] / (4.0 * np.pi * d[mask])
                    rir[:, ch] += np.bincount(idx[mask], weights=gains, minlength=n_out)
    return ImpulseResponsePair(rir=rir, sample_rate=fs)


def measure_t60(
    rir: np.ndarray,
    fs: int = DEFAULT_SAMPLE_RATE,
    fit_db: tuple[float, float] = (-5.0, -25.0),
) -> float:
    """Decay time from the Schroeder backward-integration curve.

    The time to fall by 60 dB is extrapolated from the curve's slope over
    ``fit_db`` (default -5..-25 dB, the standard T20 window).  For an
    exponential decay this equals the literal -60 dB crossing; fitting the
    early slope keeps the estimate robust to the sparse, slowly-decaying
    axial image tail and to truncation of the response.
    """
    rir = np.asarray(rir, dtype=np.float64)
    energy = (rir**2).sum(axis=1) if rir.ndim == 2 else rir**2
    tail = np.cumsum(energy[::-1])[::-1]
    total = tail[0]
    if total <= 0:
        raise ValueError("silent impulse response")
    level = 10.0 * np.log10(np.maximum(tail / total, 1e-300))

    hi, lo = fit_db
    start = int(np.argmax(level <= hi))
    stop = int(np.argmax(level <= lo))
    if level[stop] > lo:
        return float(np.inf)  # never decays into the fit window
    if stop <= start:
        return 0.0
    t = np.arange(start, stop + 1) / fs
    seg = level[start : stop + 1]
    slope, _ = np.polyfit(t, seg, 1)  # dB per second, negative
    if slope >= 0:
        return float(np.inf)
    return float(-60.0 / slope)


def convolve_stereo(source: StereoSignal, rir: ImpulseResponsePair) -> StereoSignal:
    """Full convolution of each source channel with the matching RIR channel."""
    wet = np.stack(
        [fftconvolve(source.samples[:, c], rir.rir[:, c]) for c in (0, 1)],
        axis=1,
    )
    return StereoSignal(wet, source.sample_rate)


def mix(
    clean_src: StereoSignal,
    noise_src: StereoSignal,
    scene: SceneSpec,
    rir_speech: ImpulseResponsePair | None = None,
    rir_noise: ImpulseResponsePair | None = None,
) -> tuple[StereoSignal, StereoSignal, StereoSignal]:
    """Reverberate, set the exact SNR, level the mixture; returns (y, s, n).

    Mono material should be passed with the channel duplicated (see
    :func:`stereoloss.signal.mono_to_stereo`); each source channel is
    convolved with the matching RIR channel.  The noise is rescaled so the
    channel-averaged power ratio hits ``scene.snr_db`` exactly, then both
    components are scaled together so the mixture RMS sits at
    ``scene.level_db`` dBFS.  ``y = s + n`` holds samplewise.
    """
    if len(clean_src) != len(noise_src):
        raise ValueError(f"source length mismatch: {len(clean_src)} vs {len(noise_src)}")
    if rir_speech is None:
        rir_speech = simulate_rir(scene, "speech")
    if rir_noise is None:
        rir_noise = simulate_rir(scene, "noise")
    s_wet = convolve_stereo(clean_src, rir_speech).samples
    n_wet = convolve_stereo(noise_src, rir_noise).samples

    p_s = float((s_wet**2).mean())
    p_n = float((n_wet**2).mean())
    if p_s <= 0.0 or p_n <= 0.0:
        raise ValueError("zero-power source")
    n_wet = n_wet * np.sqrt(p_s / (p_n * 10.0 ** (scene.snr_db / 10.0)))

    y = s_wet + n_wet
    rms_y = float(np.sqrt((y**2).mean()))
    k = 10.0 ** (scene.level_db / 20.0) / rms_y
    s_out = k * s_wet
    n_out = k * n_wet
    rate = clean_src.sample_rate
    return (
        StereoSignal(s_out + n_out, rate),
        StereoSignal(s_out, rate),
        StereoSignal(n_out, rate),
    )


def t60_class(t60: float) -> str:
    """Bucket a decay time by the nearest of the canonical test categories."""
    anchors = {"none": 0.0, "short": 0.27, "medium": 0.53, "long": 0.8}
    return min(anchors, key=lambda k: abs(anchors[k] - t60))


def scene_to_json(scene: SceneSpec) -> str:
    return json.dumps(scene.to_dict())


def scene_from_json(text: str) -> SceneSpec:
    return SceneSpec.from_dict(json.loads(text))


def with_overrides(scene: SceneSpec, **kw) -> SceneSpec:
    """Copy a scene with replaced fields, rederiving absorption when t60 changes."""
    scene = replace(scene, **kw)
    if "t60" in kw:
        dims = np.asarray(scene.room.dims)
        scene = replace(
            scene, room=replace(scene.room, absorption=absorption_for_t60(dims, scene.t60))
        )
    return scene
