"""Dataset synthesis and the JSON-lines manifest that ties scenes to files."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import sources
from .room import SceneSpec, mix, sample_scene, simulate_rir, t60_class
from .wav import write_stereo, write_wav

SNR_BUCKETS = (0.0, 5.0, 10.0, 15.0, 20.0)


def synthesize_scene_item(scene: SceneSpec, duration: float = 1.2):
    """Render one scene: returns (y, s, n) signals from deterministic sources."""
    rng = np.random.default_rng(np.random.SeedSequence([scene.seed, 0xA0D10]))
    clean = sources.speechlike(rng, duration)
    noise = sources.noiselike(rng, duration)
    rir_s = simulate_rir(scene, "speech")
    rir_n = simulate_rir(scene, "noise")
    return mix(clean, noise, scene, rir_s, rir_n)


def write_dataset(
    out_dir,
    count: int,
    seed: int,
    snr_buckets: tuple[float, ...] | None = None,
    duration: float = 1.2,
    write_rirs: bool = False,
) -> Path:
    """Write ``count`` scene renderings plus a manifest; returns the manifest path.

    With ``snr_buckets`` given, scenes cycle through the buckets (test-set
    style); otherwise the SNR follows the sampled training distribution.
    Byte-identical output for identical arguments.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seeds = np.random.SeedSequence(seed).generate_state(max(count, 1), dtype=np.uint64)

    rows = []
    for i in range(count):
        item_seed = int(seeds[i] & 0x7FFFFFFF)
        bucket = None
        if snr_buckets:
            bucket = float(snr_buckets[i % len(snr_buckets)])
        scene = sample_scene(item_seed, snr_db=bucket)
        y, s, n = synthesize_scene_item(scene, duration)

        item = f"scene_{i:05d}"
        paths = {}
        for tag, sig in (("mix", y), ("clean", s), ("noise", n)):
            rel = f"{item}_{tag}.wav"
            write_stereo(out_dir / rel, sig, encoding="float32")
            paths[tag] = rel
        if write_rirs:
            for tag in ("speech", "noise"):
                rel = f"{item}_rir_{tag}.wav"
                write_wav(out_dir / rel, simulate_rir(scene, tag).rir, 48000, "float32")
                paths[f"rir_{tag}"] = rel
        rows.append(
            {
                "item": item,
                "seed": item_seed,
                "snr_db": scene.snr_db,
                "snr_bucket": bucket if bucket is not None else round(scene.snr_db),
                "t60": scene.t60,
                "t60_class": t60_class(scene.t60),
                "paths": paths,
                "scene": scene.to_dict(),
            }
        )

    manifest = out_dir / "manifest.jsonl"
    with open(manifest, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return manifest


def load_manifest(path) -> list[dict]:
    items = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                items.append(json.loads(line))
    return items
