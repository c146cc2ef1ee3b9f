import numpy as np
import pytest

from vacrng.errors import ValidationError
from vacrng.extractor import ExtractionConfig, extract_batch
from vacrng.formats import SampleFile, read_bits
from vacrng.noise import NoiseModel
from vacrng.pipeline import extract_file, simulate_to_file, throughput

MODEL = NoiseModel.from_clearance(8.5, adc_bits=12, rng_seed=3)


@pytest.fixture(scope="module")
def samples(tmp_path_factory):
    path = tmp_path_factory.mktemp("p") / "m.bin"
    simulate_to_file(MODEL, 300_000, path, chunk=70_000)
    return path


def test_simulate_chunking_invariant(samples, tmp_path):
    other = tmp_path / "m2.bin"
    simulate_to_file(MODEL, 300_000, other, chunk=1 << 18)
    assert other.read_bytes() == samples.read_bytes()


def test_header_echo(samples):
    sf = SampleFile(samples)
    assert sf.header["clearance_db"] == pytest.approx(8.5)
    assert sf.adc_bits == 12 and sf.count == 300_000


@pytest.mark.parametrize("regime", ["full", "hei", "hqc"])
def test_extract_matches_batch(samples, tmp_path, regime):
    cfg = ExtractionConfig.preset(regime, v_m=MODEL.v_total)
    out = tmp_path / "o.bits"
    summary = extract_file(samples, cfg, out, chunk=12_345)
    block = extract_batch(SampleFile(samples).values(), cfg)
    data, nbits = block.packed()
    assert out.read_bytes() == data
    assert summary["bits_emitted"] == nbits == summary["accepted"] * cfg.bits_per_sample
    assert summary["warnings"] == []
    if regime == "full":
        assert summary["bits_emitted"] == 8 * summary["samples"]
    if regime == "hqc":
        assert summary["acceptance_rate"] == pytest.approx(0.1, abs=0.005)
        np.testing.assert_array_equal(read_bits(out, nbits), block.bits)


def test_miscalibrated_warns(samples, tmp_path):
    cfg = ExtractionConfig(n_bits=4, v_m=1.5 * MODEL.v_total)
    summary = extract_file(samples, cfg, tmp_path / "o.bits")
    assert any("calibrate" in w for w in summary["warnings"])


def test_empty(tmp_path):
    empty = tmp_path / "e.bin"
    empty.write_bytes(b"")
    summary = extract_file(empty, ExtractionConfig(), tmp_path / "o.bits")
    assert summary["samples"] == 0 and (tmp_path / "o.bits").read_bytes() == b""


def test_simulate_validation(tmp_path):
    with pytest.raises(ValidationError):
        simulate_to_file(MODEL, 0, tmp_path / "x.bin")
    with pytest.raises(ValidationError):
        simulate_to_file(NoiseModel(), 10, tmp_path / "x.bin")


def test_throughput_counts_bits():
    cfg = ExtractionConfig.preset("hei", v_m=MODEL.v_total)
    r = throughput(MODEL, cfg, count=100_000)
    assert r["bits"] == 400_000 and r["bits_per_second"] > 0
    r = throughput(NoiseModel(), ExtractionConfig.preset("full", v_m=NoiseModel().v_total),
                   count=50_000)
    assert r["bits"] == 400_000
