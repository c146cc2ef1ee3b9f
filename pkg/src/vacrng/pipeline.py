"""Chunked simulate -> file -> extract pipelines with bounded memory."""

from __future__ import annotations

import math
import time

import numpy as np

from ._backend import BACKEND, core
from .errors import ValidationError
from .extractor import (ExtractionConfig, StreamExtractor, compaction_table, code_lut,
                        expected_domain_probs, generation_rate)
from .formats import SampleFile, sample_header, write_samples
from .noise import NoiseModel, SampleStream, code_range
from .randtests import chi_square_gof

CHUNK = 1 << 18
#: Nominal converter sample rate (250 MS/s), used for bit rates.
DEFAULT_SAMPLE_RATE = 250e6
#: Post-transform domain chi-square below this p-value triggers a calibration warning.
DOMAIN_WARN_P = 1e-3


def simulate_codes(stream: SampleStream, count: int) -> np.ndarray:
    """ADC codes of ``count`` measured samples drawn from ``stream``'s measured sub-stream."""
    m = stream.model
    if m.adc_bits is None:
        raise ValidationError("code simulation needs a quantized model (adc_bits)")
    var = m.v_electronic if stream.electronic_only else m.v_total
    lo, hi = code_range(m.adc_bits)
    return core.simulate_codes(stream.measured_bitgen, count, math.sqrt(var), m.step, lo, hi)


def simulate_to_file(model: NoiseModel, count: int, path, electronic_only: bool = False,
                     chunk: int = CHUNK) -> dict:
    """Write ``count`` simulated measurements as a sample file; returns the header."""
    if isinstance(count, bool) or int(count) != count or count < 1:
        raise ValidationError(f"count must be a positive integer, got {count!r}")
    if model.adc_bits is None or model.adc_bits > 16:
        raise ValidationError("sample files need 2 <= adc_bits <= 16")
    stream = SampleStream(model, electronic_only=electronic_only)
    extra = {"v_vacuum": model.v_vacuum, "v_electronic": model.v_electronic,
             "seed": int(model.rng_seed), "electronic_only": bool(electronic_only)}
    if model.v_electronic > 0:
        extra["clearance_db"] = model.clearance_db
    header = sample_header(model.adc_bits, model.full_scale, count, **extra)

    def chunks():
        done = 0
        while done < count:
            k = min(chunk, count - done)
            yield simulate_codes(stream, k)
            done += k

    write_samples(path, header, chunks())
    return header


def domain_check(extractor: StreamExtractor):
    """Chi-square of accepted domain occupancy against its expected law.

    Quantized input is judged against the law induced by the converter cells.
    Returns None when there are too few samples for the test to mean anything.
    """
    counts = extractor.domain_counts()
    probs = extractor.expected_domain_probs()
    live = probs > 0
    if np.any(counts[~live]):
        return chi_square_gof([0.0, 1.0], [1.0, 0.0], "domain_occupancy", DOMAIN_WARN_P)
    counts, probs = counts[live], probs[live]
    if counts.sum() < 5 / probs.min():
        return None
    return chi_square_gof(counts, probs, "domain_occupancy", DOMAIN_WARN_P)


def extract_file(sample_path, config: ExtractionConfig, out_path, chunk: int = CHUNK,
                 sample_rate: float = DEFAULT_SAMPLE_RATE) -> dict:
    """Stream a sample file through the extractor into a packed bit file; returns a summary."""
    sf = SampleFile(sample_path)
    ex = StreamExtractor(config)
    nbytes = 0
    with open(out_path, "wb") as out:
        for codes in sf.iter_codes(chunk):
            data = ex.feed_codes(codes, sf.adc_bits, sf.full_scale)
            out.write(data)
            nbytes += len(data)
        tail, valid = ex.finish()
        out.write(tail)
        nbytes += len(tail)
    summary = {
        "samples": ex.samples,
        "accepted": ex.accepted,
        "acceptance_rate": ex.accepted / ex.samples if ex.samples else None,
        "bits_emitted": ex.bits,
        "bytes_written": nbytes,
        "valid_bits_in_last_byte": valid if valid else (8 if nbytes else 0),
        "sample_rate": sample_rate,
        "nominal_rate_bps": generation_rate(config, sample_rate),
        "empirical_rate_bps": ex.bits / ex.samples * sample_rate if ex.samples else 0.0,
        "config": config.to_dict(),
        "warnings": [],
    }
    if ex.samples == 0:
        summary["warnings"].append("input holds 0 samples")
    if ex.samples:
        ideal = expected_domain_probs(config.n_bits, config.threshold)
        # converter-induced departure of the domain law from uniform, relative
        summary["domain_nonuniformity"] = float(np.max(np.abs(ex.expected_domain_probs() / ideal - 1)))
    check = domain_check(ex)
    if check is not None:
        summary["domain_chi_square_p"] = check.p_value
        if not check.passed:
            summary["warnings"].append(
                f"domain occupancy departs from the expected law (chi-square p={check.p_value:.3g}); "
                "v_m probably does not match the signal variance, re-run calibrate")
    return summary


def throughput(model: NoiseModel, config: ExtractionConfig, count: int = 1 << 25,
               chunk: int = CHUNK, backend=None) -> dict:
    """Sustained simulate -> extract -> pack rate on this host (output discarded).

    Quantized models use the per-code lookup path; ideal models go through the
    normal-CDF classifier.
    """
    kernels = core if backend is None else backend
    stream = SampleStream(model)
    compact = compaction_table(config)
    k = config.bits_per_sample
    carry = (0, 0)
    bits = 0
    if model.adc_bits is not None:
        lut_code, lut_acc, offset = code_lut(config, model.adc_bits, model.full_scale)
        lut_val = compact[lut_code]
        lo, hi = code_range(model.adc_bits)
        sigma, step = math.sqrt(model.v_total), model.step
    t0 = time.perf_counter()
    done = 0
    while done < count:
        n = min(chunk, count - done)
        if model.adc_bits is not None:
            codes = kernels.simulate_codes(stream.measured_bitgen, n, sigma, step, lo, hi)
            out, cv, cb, n_acc = kernels.lut_pack(codes, offset, lut_val, lut_acc, k, *carry)
        else:
            x = stream.draw_measured(n)
            codes, acc = kernels.classify(x, 1.0 / math.sqrt(config.v_m), config.n_bits,
                                          config.threshold, config.gray)
            out, cv, cb = kernels.pack(compact[codes], acc, k, *carry)
            n_acc = int(np.count_nonzero(acc))
        carry = (cv, cb)
        bits += n_acc * k
        done += n
    elapsed = time.perf_counter() - t0
    return {"backend": getattr(kernels, "NAME", BACKEND), "samples": count, "bits": bits,
            "seconds": elapsed, "bits_per_second": bits / elapsed,
            "samples_per_second": count / elapsed, "config": config.to_dict(),
            "adc_bits": model.adc_bits}
