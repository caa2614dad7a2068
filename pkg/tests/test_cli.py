import json
import subprocess
import sys

import numpy as np
import pytest

from stereoloss import StereoSignal, write_stereo
from stereoloss.wav import write_wav

from conftest import bandlimited_noise, bandlimited_stereo


def run_cli(*args, input_bytes=None):
    return subprocess.run(
        [sys.executable, "-m", "stereoloss", *args],
        capture_output=True,
        input=input_bytes,
        timeout=300,
    )


@pytest.fixture
def identical_wav(tmp_path, rng):
    x = bandlimited_noise(rng, 24000)
    path = tmp_path / "ident.wav"
    write_stereo(path, StereoSignal(np.stack([x, x], axis=1)))
    return path


def test_analyze_identical_channels(identical_wav, tmp_path):
    out = tmp_path / "params.json"
    proc = run_cli("analyze", str(identical_wav), "--json", str(out))
    assert proc.returncode == 0, proc.stderr
    data = json.loads(out.read_text())
    assert data["bands"] == 32
    iid = np.asarray(data["iid_db"])
    ic = np.asarray(data["ic"])
    np.testing.assert_allclose(iid, 0.0, atol=1e-9)
    np.testing.assert_allclose(ic, 1.0, rtol=1e-9)
    assert "opd_rad" not in data


def test_analyze_with_self_reference(identical_wav):
    proc = run_cli("analyze", str(identical_wav), "--ref", str(identical_wav))
    assert proc.returncode == 0
    data = json.loads(proc.stdout)
    np.testing.assert_allclose(np.asarray(data["opd_rad"]), 0.0, atol=1e-12)


def test_analyze_csv_export(identical_wav, tmp_path):
    out = tmp_path / "params.csv"
    proc = run_cli("analyze", str(identical_wav), "--csv", str(out), "--json", str(tmp_path / "p.json"))
    assert proc.returncode == 0
    header = out.read_text().splitlines()[0].split(",")
    assert header[0] == "frame" and "iid_db_b0" in header and "ic_b31" in header


def test_analyze_malformed_wav(tmp_path):
    bad = tmp_path / "bad.wav"
    bad.write_bytes(b"NOTAWAVE" + b"\x00" * 100)
    proc = run_cli("analyze", str(bad))
    assert proc.returncode == 1
    assert b"offset" in proc.stderr


def test_analyze_mono_policy(tmp_path, rng):
    mono = tmp_path / "mono.wav"
    write_wav(mono, bandlimited_noise(rng, 24000), 48000, "pcm16")
    refused = run_cli("analyze", str(mono))
    assert refused.returncode == 2
    assert b"--upmix" in refused.stderr
    accepted = run_cli("analyze", str(mono), "--upmix")
    assert accepted.returncode == 0


def test_analyze_rejects_wrong_rate(tmp_path, rng):
    path = tmp_path / "f44.wav"
    write_wav(path, np.stack([bandlimited_noise(rng, 8000)] * 2, axis=1), 44100)
    proc = run_cli("analyze", str(path))
    assert proc.returncode == 2
    assert b"48000" in proc.stderr


def test_analyze_unknown_flag():
    proc = run_cli("analyze", "x.wav", "--frobnicate")
    assert proc.returncode == 2


def test_loss_self_is_zero(identical_wav):
    proc = run_cli("loss", str(identical_wav), str(identical_wav))
    assert proc.returncode == 0, proc.stderr
    data = json.loads(proc.stdout)
    assert abs(data["breakdown"]["total"]) < 1e-10
    weights = data["config"]["weights"]
    assert weights == {"tl": 50.0, "iid": 0.05, "ipd": 0.05, "ic": 0.4, "opd": 0.05}


def test_loss_length_mismatch_beyond_hop(tmp_path, rng):
    a = tmp_path / "a.wav"
    b = tmp_path / "b.wav"
    write_stereo(a, bandlimited_stereo(rng, 24000))
    write_stereo(b, bandlimited_stereo(rng, 24000 - 4800))
    proc = run_cli("loss", str(a), str(b))
    assert proc.returncode == 2
    assert b"length mismatch" in proc.stderr


def test_loss_grad_check_and_gradient_dump(tmp_path, rng):
    ref = tmp_path / "ref.wav"
    est = tmp_path / "est.wav"
    r = bandlimited_stereo(rng, 9600)
    e = StereoSignal(r.samples + 0.05 * bandlimited_stereo(rng, 9600).samples)
    write_stereo(ref, r)
    write_stereo(est, e)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "stft": {"window_len": 512, "hop": 128},
        "bands": {"bins_per_band": 32},
    }))
    gdump = tmp_path / "grad.f64"
    proc = run_cli(
        "loss", str(ref), str(est), "--config", str(cfg),
        "--grad-check", "--gradient-out", str(gdump),
    )
    assert proc.returncode == 0, proc.stderr
    data = json.loads(proc.stdout)
    grad = np.fromfile(gdump, dtype="<f8")
    assert grad.shape[0] == 2 * 9600
    check = data["grad_check"]
    assert check["singular"] or check["max_rel_error"] < 1e-4


def test_synth_zero_scenes(tmp_path):
    proc = run_cli("synth", "--scenes", "0", "--out", str(tmp_path / "d"))
    assert proc.returncode == 0
    manifest = tmp_path / "d" / "manifest.jsonl"
    assert manifest.exists() and manifest.read_text() == ""


def test_synth_deterministic_manifests(tmp_path):
    p1, p2 = tmp_path / "d1", tmp_path / "d2"
    for p in (p1, p2):
        proc = run_cli("synth", "--scenes", "2", "--seed", "9", "--out", str(p),
                       "--duration", "0.4")
        assert proc.returncode == 0, proc.stderr
    assert (p1 / "manifest.jsonl").read_bytes() == (p2 / "manifest.jsonl").read_bytes()
    assert (p1 / "scene_00000_mix.wav").read_bytes() == (p2 / "scene_00000_mix.wav").read_bytes()


def test_synth_writes_rirs_on_request(tmp_path):
    out = tmp_path / "d"
    proc = run_cli("synth", "--scenes", "1", "--seed", "3", "--out", str(out),
                   "--duration", "0.4", "--rirs")
    assert proc.returncode == 0, proc.stderr
    row = json.loads((out / "manifest.jsonl").read_text())
    assert (out / row["paths"]["rir_speech"]).exists()
    from stereoloss.wav import read_wav
    rir, rate = read_wav(out / row["paths"]["rir_noise"])
    assert rate == 48000 and rir.shape == (43200, 2)


def test_synth_unwritable_dir():
    proc = run_cli("synth", "--scenes", "1", "--out", "/proc/nope")
    assert proc.returncode == 1


def test_synth_then_eval_oracle(tmp_path):
    out = tmp_path / "data"
    proc = run_cli("synth", "--scenes", "3", "--seed", "4", "--out", str(out),
                   "--duration", "0.4", "--snr-buckets", "0,10,20")
    assert proc.returncode == 0, proc.stderr
    report_dir = tmp_path / "report"
    proc = run_cli("eval", "--manifest", str(out / "manifest.jsonl"),
                   "--oracle", "--out", str(report_dir),
                   "--window", "1024", "--hop", "256", "--bands", "16")
    assert proc.returncode == 0, proc.stderr
    report = json.loads((report_dir / "report.json").read_text())
    methods = {r["method"] for r in report["rows"]}
    assert methods == {"noisy", "oracle"}
    assert all(r.get("error") is None for r in report["rows"])
    csv_header = (report_dir / "report.csv").read_text().splitlines()[0]
    assert csv_header == "method,item,snr_bucket,t60_class,sdr_l,sdr_r,sdr_mean,iid,ipd,ic,opd"


def test_eval_missing_estimates_marks_rows(tmp_path):
    out = tmp_path / "data"
    run_cli("synth", "--scenes", "2", "--seed", "4", "--out", str(out), "--duration", "0.4")
    proc = run_cli("eval", "--manifest", str(out / "manifest.jsonl"),
                   "--est", str(tmp_path / "missing"),
                   "--window", "1024", "--hop", "256", "--bands", "16")
    assert proc.returncode == 0  # noisy rows still succeed
    data = json.loads(proc.stdout)
    est_rows = [r for r in data["rows"] if r["method"] == "est"]
    assert est_rows and all(r.get("error") for r in est_rows)
