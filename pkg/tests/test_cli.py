import hashlib
import json

import numpy as np
import pytest

from vacrng.cli import main
from vacrng.formats import SampleFile


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture
def model_cfg(tmp_path):
    path = tmp_path / "model.cfg"
    path.write_text("clearance_db = 8.5\nseed = 7\n")
    return path


@pytest.fixture
def sim(tmp_path, model_cfg):
    out = tmp_path / "m.bin"
    assert main(["simulate", "--config", str(model_cfg), "--count", "200000", "--out", str(out)]) == 0
    return out


def test_simulate_reproducible(tmp_path, model_cfg, sim):
    other = tmp_path / "m2.bin"
    assert main(["simulate", "--config", str(model_cfg), "--count", "200000", "--out", str(other)]) == 0
    assert sha(other) == sha(sim)
    assert SampleFile(sim).header["clearance_db"] == pytest.approx(8.5)
    manifest = json.loads((tmp_path / "m.bin.manifest.json").read_text())
    assert manifest["command"] == "simulate" and manifest["seed"] == 7
    assert manifest["outputs"][0]["sha256"] == sha(sim)
    m2 = json.loads((tmp_path / "m2.bin.manifest.json").read_text())
    assert m2["config_hash"] == manifest["config_hash"]


def test_seed_override(tmp_path, model_cfg, sim):
    other = tmp_path / "m3.bin"
    main(["simulate", "--config", str(model_cfg), "--seed", "8", "--count", "200000", "--out", str(other)])
    assert sha(other) != sha(sim)


@pytest.mark.parametrize("argv", [
    ["simulate", "--count", "0", "--out", "x.bin"],
    ["simulate", "--count", "10"],
    ["extract", "x.bin"],
    ["sweep", "--n", "1", "--deltas", "0.5"],
    ["sweep", "--n", "1,x"],
    ["metrics", "--regime", "turbo"],
    ["nonsense"],
])
def test_usage_errors(tmp_path, monkeypatch, argv):
    monkeypatch.chdir(tmp_path)
    with pytest.raises(SystemExit) as info:
        rc = main(argv)
        raise SystemExit(rc)
    assert info.value.code == 1


def test_io_error(tmp_path):
    assert main(["extract", str(tmp_path / "missing.bin"), "--regime", "full",
                 "--out", str(tmp_path / "o.bits")]) == 2


def test_malformed_header(tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"garbage\n")
    assert main(["extract", str(bad), "--regime", "full", "--v-m", "1",
                 "--out", str(tmp_path / "o.bits")]) == 1


@pytest.mark.parametrize("regime,bits_per_sample", [("full", 8), ("hei", 4), ("hqc", None)])
def test_extract_regimes(tmp_path, sim, regime, bits_per_sample):
    out = tmp_path / f"{regime}.bits"
    assert main(["extract", str(sim), "--regime", regime, "--out", str(out)]) == 0
    summary = json.loads((tmp_path / f"{regime}.bits.summary.json").read_text())
    assert summary["config"]["n_bits"] == (1 if regime == "hqc" else 8)
    if bits_per_sample:
        assert summary["bits_emitted"] == bits_per_sample * 200_000
    else:
        assert summary["acceptance_rate"] == pytest.approx(0.1, abs=0.01)
    assert summary["warnings"] == []
    assert (tmp_path / f"{regime}.bits.manifest.json").exists()


def test_extract_empty(tmp_path):
    empty = tmp_path / "e.bin"
    empty.write_bytes(b"")
    out = tmp_path / "e.bits"
    assert main(["extract", str(empty), "--regime", "full", "--v-m", "1", "--out", str(out)]) == 0
    assert out.read_bytes() == b""
    summary = json.loads((tmp_path / "e.bits.summary.json").read_text())
    assert summary["samples"] == 0 and "0 samples" in summary["warnings"][0]


def test_calibrate_then_extract(tmp_path, model_cfg, sim):
    dark = tmp_path / "e.bin"
    main(["simulate", "--config", str(model_cfg), "--seed", "9", "--count", "100000",
          "--electronic-only", "--out", str(dark)])
    cal = tmp_path / "cal.cfg"
    assert main(["calibrate", str(sim), str(dark), "--out", str(cal)]) == 0
    text = cal.read_text()
    assert "v_m = " in text and "clearance_db" in text
    out = tmp_path / "o.bits"
    assert main(["extract", str(sim), "--config", str(cal), "--regime", "hei", "--out", str(out)]) == 0


def test_metrics_electronic(tmp_path, model_cfg, capsys):
    out = tmp_path / "r.json"
    assert main(["metrics", "--config", str(model_cfg), "--regime", "hei", "--against",
                 "electronic", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert [b["bit"] for b in report["per_bit"]] == [5, 6, 7, 8]
    assert all(b["i_e"] is not None and b["p_eq"] is None for b in report["per_bit"])
    assert main(["metrics", "--config", str(model_cfg), "--regime", "hqc", "--format", "csv"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("n,bit,delta_t") and len(lines) == 2


def test_sweep(tmp_path, model_cfg):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--config", str(model_cfg), "--n", "1,2", "--grid", "3",
                 "--out", str(out)]) == 0
    rows = out.read_text().strip().splitlines()
    assert len(rows) == 1 + 3 + 6
    assert json.loads((tmp_path / "s.csv.manifest.json").read_text())["command"] == "sweep"


def test_battery_commands(tmp_path):
    rnd = tmp_path / "r.bits"
    rnd.write_bytes(np.random.default_rng(0).bytes(1 << 17))
    report = tmp_path / "rep.json"
    assert main(["test", str(rnd), "--strict", "--out", str(report)]) == 0
    assert json.loads(report.read_text())["passed"] is True
    const = tmp_path / "c.bits"
    const.write_bytes(bytes(1 << 16))
    assert main(["test", str(const), "--strict"]) == 3
    assert main(["test", str(const)]) == 0
    short = tmp_path / "s.bits"
    short.write_bytes(b"\x01")
    assert main(["test", str(short)]) == 1
    assert main(["test", str(rnd), "--suite", "monobit,runs"]) == 0


def test_bench(capsys):
    assert main(["bench", "--count", "100000", "--backend", "python"]) == 0
    results = json.loads(capsys.readouterr().out)
    assert results[0]["backend"] == "python" and results[0]["bits"] == 800_000
