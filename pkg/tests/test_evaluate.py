import numpy as np
import pytest

from stereoloss import (
    LossWeights,
    StereoSignal,
    StftConfig,
    image_pres_loss,
    mix,
    oracle_wiener_enhance,
    partition_bands,
    preservation_errors,
    sample_scene,
    sdr,
    stft,
)
from stereoloss.evaluate import SDR_CAP_DB, EvalRow, batch_evaluate
from stereoloss.sources import noiselike, speechlike

from conftest import bandlimited_stereo

CFG = StftConfig(window_len=1024, hop=256)
PART = partition_bands(512, 32)


def test_sdr_cases(rng):
    s = bandlimited_stereo(rng, 8000)
    per, mean = sdr(s, s)
    assert per[0] == SDR_CAP_DB and mean == SDR_CAP_DB

    noise = np.array(bandlimited_stereo(rng, 8000).samples)
    noise *= np.sqrt((s.samples**2).sum() / (100.0 * (noise**2).sum()))
    per, mean = sdr(s, StereoSignal(s.samples + noise))
    np.testing.assert_allclose(mean, 20.0, atol=0.2)

    per, mean = sdr(s, StereoSignal(0.5 * s.samples))
    np.testing.assert_allclose(per, 10.0 * np.log10(4.0), rtol=1e-9)

    with pytest.raises(ValueError, match="silent reference"):
        sdr(StereoSignal(np.zeros((100, 2))), StereoSignal(np.ones((100, 2))))
    with pytest.raises(ValueError, match="length mismatch"):
        sdr(s, bandlimited_stereo(rng, 4000))


def test_preservation_errors_share_loss_code_path(rng):
    s = bandlimited_stereo(rng, 12000)
    sh = StereoSignal(s.samples + 0.1 * bandlimited_stereo(rng, 12000).samples)
    errs = preservation_errors(s, sh, CFG, PART)
    terms = image_pres_loss(stft(s, CFG), stft(sh, CFG), PART, LossWeights())
    assert errs["iid"] == terms.l_iid
    assert errs["ipd"] == terms.l_ipd
    assert errs["ic"] == terms.l_ic
    assert errs["opd"] == terms.l_opd


def test_wiener_with_zero_noise_is_transparent(rng):
    y = bandlimited_stereo(rng, 24000)
    n = StereoSignal(np.zeros((24000, 2)))
    out = oracle_wiener_enhance(y, n, CFG)
    w = CFG.window_len
    err = np.abs(out.samples[w:-w] - y.samples[w:-w]).max()
    assert err < 1e-5 * np.abs(y.samples).max()


def test_wiener_improves_sdr_on_scenes(rng):
    wins = 0
    for seed in range(6):
        scene = sample_scene(600 + seed, snr_db=5.0)
        gen = np.random.default_rng(seed)
        y, s, n = mix(speechlike(gen, 0.7), noiselike(gen, 0.7), scene)
        enhanced = oracle_wiener_enhance(y, n, CFG)
        _, sdr_noisy = sdr(s, y)
        _, sdr_enh = sdr(s, enhanced)
        wins += sdr_enh > sdr_noisy
    assert wins >= 5


def test_batch_evaluate_handles_failures_and_aggregates(rng):
    items = [
        {"item": "a", "snr_bucket": 0.0, "t60_class": "none"},
        {"item": "b", "snr_bucket": 0.0, "t60_class": "none"},
        {"item": "c", "snr_bucket": 5.0, "t60_class": "short"},
    ]
    sigs = {name: bandlimited_stereo(rng, 6000) for name in "abc"}

    def ok(item):
        ref = sigs[item["item"]]
        return ref, StereoSignal(0.5 * ref.samples)

    def broken(item):
        if item["item"] == "b":
            raise FileNotFoundError("estimate missing")
        return ok(item)

    rows, aggregates = batch_evaluate(items, {"ok": ok, "flaky": broken}, CFG, PART)
    assert len(rows) == 6
    errors = [r for r in rows if r.error is not None]
    assert len(errors) == 1 and errors[0].method == "flaky" and "missing" in errors[0].error

    agg = {(a["method"], a["snr_bucket"]): a for a in aggregates}
    group = [r for r in rows if r.method == "ok" and r.snr_bucket == 0.0]
    np.testing.assert_allclose(
        agg[("ok", 0.0)]["sdr_mean"], np.mean([r.sdr_mean for r in group])
    )
    assert agg[("flaky", 0.0)]["count"] == 1


def test_batch_evaluate_empty():
    rows, aggregates = batch_evaluate([], {"noisy": lambda item: None}, CFG, PART)
    assert rows == [] and aggregates == []


def test_eval_row_dict_column_order():
    row = EvalRow(method="m", item="i", snr_bucket=5.0, t60_class="none")
    assert list(row.as_dict().keys()) == [
        "method", "item", "snr_bucket", "t60_class",
        "sdr_l", "sdr_r", "sdr_mean", "iid", "ipd", "ic", "opd",
    ]
