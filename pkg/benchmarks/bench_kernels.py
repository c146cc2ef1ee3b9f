"""Compare the compiled and pure-Python kernels.

Times each hot kernel on identical inputs and the end-to-end simulate ->
extract pipeline for the three presets.  Run from the repository root::

    python3 benchmarks/bench_kernels.py [--count N]
"""

import argparse
import math
import time

import numpy as np

from vacrng import _pycore
from vacrng.extractor import ExtractionConfig, code_lut, compaction_table
from vacrng.noise import NoiseModel, code_range
from vacrng.pipeline import throughput

try:
    from vacrng import _core
except ImportError:
    _core = None


def _best(fn, repeat=3):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_table(count):
    model = NoiseModel.from_clearance(8.5, adc_bits=12)
    cfg = ExtractionConfig.preset("full", v_m=model.v_total)
    x = np.random.default_rng(0).normal(0, math.sqrt(model.v_total), count)
    codes, acc = _pycore.classify(x, 1 / math.sqrt(cfg.v_m), 8, 0.0, True)
    vals = compaction_table(cfg)[codes]
    lut_code, lut_acc, offset = code_lut(cfg, 12, model.full_scale)
    lut_val = compaction_table(cfg)[lut_code]
    lo, hi = code_range(12)
    adc = np.clip(np.rint(x / model.step), lo, hi).astype(np.int32)

    backends = [b for b in (_core, _pycore) if b is not None]
    rows = []
    for b in backends:
        rows.append((b.NAME, "classify", _best(lambda: b.classify(x, 1 / math.sqrt(cfg.v_m), 8, 0.0, True))))
        rows.append((b.NAME, "pack", _best(lambda: b.pack(vals, acc, 8))))
        rows.append((b.NAME, "lut_pack", _best(lambda: b.lut_pack(adc, offset, lut_val, lut_acc, 8))))
        rows.append((b.NAME, "simulate_codes", _best(
            lambda: b.simulate_codes(np.random.PCG64(1), count, math.sqrt(model.v_total),
                                     model.step, lo, hi))))
    print(f"{'backend':8s} {'kernel':15s} {'ns/sample':>10s}")
    for name, kernel, t in rows:
        print(f"{name:8s} {kernel:15s} {t / count * 1e9:10.2f}")


def pipeline_table(count):
    print(f"\n{'backend':8s} {'regime':6s} {'adc':>5s} {'Mbit/s':>9s}")
    for adc in (12, None):
        model = NoiseModel.from_clearance(8.5, adc_bits=adc)
        for regime in ("full", "hei", "hqc"):
            cfg = ExtractionConfig.preset(regime, v_m=model.v_total)
            for b in (_core, _pycore):
                if b is None:
                    continue
                r = throughput(model, cfg, count=count, backend=b)
                print(f"{b.NAME:8s} {regime:6s} {str(adc):>5s} {r['bits_per_second'] / 1e6:9.1f}")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--count", type=int, default=1 << 22)
    args = parser.parse_args()
    if _core is None:
        print("compiled core not built; showing the pure-Python backend only")
    kernel_table(args.count)
    pipeline_table(args.count)


if __name__ == "__main__":
    main()
