"""Acceptance criteria, each checked at its stated tolerance.

Every test records one ``criterion N: PASS|FAIL`` line, repeated in the
terminal summary.  Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import math
import time

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import stats

from vacrng.extractor import (ExtractionConfig, StreamExtractor, classify, generation_rate,
                              gray_decode, gray_encode, max_threshold, p_thr, uniformize)
from vacrng.metrics import (disagreement_integrals, error_prob_quadrature, info_leakage,
                            montecarlo_counts, sweep_figure3)
from vacrng.noise import NoiseModel, SampleStream
from vacrng.pipeline import throughput
from vacrng.randtests import battery_report, chi_square_uniformity, run_battery

pytestmark = pytest.mark.slow

SAMPLE_RATE = 250e6
MODEL = NoiseModel.from_clearance(8.5)


def _symbols(model, count, seed_offset=0):
    """Output bytes of the full regime for ``count`` samples of ``model``."""
    m = NoiseModel(v_vacuum=model.v_vacuum, v_electronic=model.v_electronic,
                   adc_bits=model.adc_bits, adc_full_scale=model.adc_full_scale,
                   rng_seed=model.rng_seed + seed_offset)
    cfg = ExtractionConfig.preset("full", v_m=m.v_total)
    ex = StreamExtractor(cfg)
    stream = SampleStream(m)
    chunks = []
    done = 0
    while done < count:
        n = min(1 << 20, count - done)
        x = stream.draw_measured(n)
        chunks.append(ex.feed(x))
        done += n
    return np.frombuffer(b"".join(chunks), dtype=np.uint8)


def test_criterion_1_rates(criterion):
    full = generation_rate(ExtractionConfig.preset("full"), SAMPLE_RATE)
    hei = generation_rate(ExtractionConfig.preset("hei"), SAMPLE_RATE)
    hqc_cfg = ExtractionConfig.preset("hqc")
    hqc = generation_rate(hqc_cfg, SAMPLE_RATE)
    expected_hqc = 1 * (1 - p_thr(1, 0.45)) * SAMPLE_RATE
    ok = (full == 2e9 and hei == 1e9 and p_thr(1, 0.45) == pytest.approx(0.90, abs=1e-12)
          and hqc == pytest.approx(25e6, rel=1e-12) and hqc == expected_hqc)
    criterion(1, ok, f"full {full:.6g} bps, hei {hei:.6g} bps, hqc {hqc:.6g} bps "
                     f"(p_thr {p_thr(1, 0.45):.2f})")
    assert ok


def test_criterion_2_leakage_lsb(criterion):
    cfg = ExtractionConfig(n_bits=5, threshold=0.0, v_m=MODEL.v_total)
    t0 = time.perf_counter()
    p_ee, err = error_prob_quadrature(MODEL, cfg, 5, "electronic", full_output=True)
    elapsed = time.perf_counter() - t0
    i_e = float(info_leakage(p_ee))
    ok = i_e < 1e-6 and elapsed < 60
    criterion(2, ok, f"I_E(LSB, n=5, 8.5 dB) = {i_e:.6g} (p_ee = {p_ee:.12f} +- {err:.1e}), "
                     f"{elapsed:.2f} s; target < 1e-6. See decisions ledger for the analysis")
    assert i_e < 1e-6
    assert elapsed < 60


def test_criterion_3_hqc_error(criterion):
    cfg = ExtractionConfig.preset("hqc", v_m=MODEL.v_total)
    t0 = time.perf_counter()
    p_eq, err = error_prob_quadrature(MODEL, cfg, 1, "vacuum", full_output=True)
    elapsed = time.perf_counter() - t0
    ok = p_eq < 1e-6 and elapsed < 60
    criterion(3, ok, f"P_e,q(n=1, threshold 0.45, 8.5 dB) = {p_eq:.6g} +- {err:.1e}, {elapsed:.2f} s")
    assert ok


def test_criterion_4_curve_family_shape(criterion):
    t0 = time.perf_counter()
    rows = sweep_figure3(MODEL, n_list=(1, 2, 3, 4, 5), grid=20)
    elapsed = time.perf_counter() - t0
    assert all(r.method == "quadrature" for r in rows)
    table = {(r.n, r.bit, r.delta_t): r for r in rows}
    deltas = {n: sorted({r.delta_t for r in rows if r.n == n}) for n in range(1, 6)}
    assert all(len(d) == 20 for d in deltas.values())

    lsb = [table[(n, n, 0.0)].i_e for n in range(1, 6)]
    a = all(x > y for x, y in zip(lsb, lsb[1:]))
    b = all(table[(n, bit, d1)].i_e <= table[(n, bit, d2)].i_e
            for n in range(1, 6) for bit in range(1, n + 1)
            for d1, d2 in zip(deltas[n], deltas[n][1:]))
    c = all(table[(1, 1, d1)].p_eq >= table[(1, 1, d2)].p_eq
            for d1, d2 in zip(deltas[1], deltas[1][1:]))
    d = all(table[(n, 1, dt)].p_eq <= table[(n, n, dt)].p_eq
            for n in range(1, 6) for dt in deltas[n])
    ok = a and b and c and d
    criterion(4, ok, f"(a) {a} (b) {b} (c) {c} (d) {d} over {len(rows)} rows, {elapsed:.1f} s; "
                     f"LSB I_E at threshold 0 by n: " + ", ".join(f"{x:.3g}" for x in lsb))
    assert ok


def test_criterion_5_quadrature_vs_montecarlo(criterion):
    worst = 0.0
    checked = 0
    for n in (1, 2, 3):
        for delta in (0.0, 0.01, 0.05):
            cfg = ExtractionConfig(n_bits=n, threshold=delta, v_m=MODEL.v_total)
            counts = montecarlo_counts(MODEL, cfg, 10 ** 7)
            joint, err, p_acc = disagreement_integrals(MODEL, cfg)
            for against in ("vacuum", "electronic"):
                for slot in range(n):
                    p_mc, se = counts.rate(against, slot)
                    p_q = joint[against][slot] / p_acc
                    worst = max(worst, abs(p_mc - p_q) / se)
                    checked += 1
    ok = worst <= 4.0
    criterion(5, ok, f"{checked} comparisons (n<=3, threshold in {{0, 0.01, 0.05}}, both "
                     f"references, 1e7 samples): max |quadrature - MC| = {worst:.2f} SE")
    assert ok


def test_criterion_6_uniformity(criterion):
    symbols = _symbols(MODEL, 10 ** 7)
    chi = chi_square_uniformity(symbols, k=8)
    bits = np.unpackbits(_symbols(MODEL, 10 ** 7 // 8, seed_offset=1))
    rep = battery_report(bits, alpha=0.01)
    ok = chi.p_value > 1e-3 and rep.passed and bits.size == 10 ** 7
    # informational: the same chain fed by 12-bit converter codes
    adc = NoiseModel.from_clearance(8.5, adc_bits=12)
    adc_p = chi_square_uniformity(_symbols(adc, 10 ** 6), k=8).p_value
    criterion(6, ok, f"8-bit symbols chi-square p = {chi.p_value:.4g}; battery on 1e7 bits: "
                     f"{rep.failures} failures, budget {rep.budget}; unquantized model "
                     f"(12-bit ADC input gives p = {adc_p:.2g} at 1e6 symbols, see ledger)")
    assert ok


def test_criterion_7_invariants(criterion):
    checks = {}

    @settings(max_examples=300, deadline=None)
    @given(st.integers(1, 16).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, (1 << n) - 1))))
    def gray_round_trip(nk):
        n, k = nk
        assert gray_decode(gray_encode(k, n)) == k

    @settings(max_examples=300, deadline=None)
    @given(st.floats(-40, 40), st.floats(1e-3, 1e3))
    def antisymmetry(x, v):
        assert abs(uniformize(x, v) + uniformize(-x, v) - 1) <= 1e-15

    @settings(max_examples=6, deadline=None)
    @given(st.integers(1, 8).flatmap(lambda n: st.tuples(
        st.just(n), st.floats(0, max_threshold(n), exclude_max=True))), st.integers(0, 2 ** 32))
    def acceptance_rate(nd, seed):
        n, delta = nd
        cfg = ExtractionConfig(n_bits=n, threshold=delta, v_m=MODEL.v_total)
        x = SampleStream(NoiseModel.from_clearance(8.5, rng_seed=seed)).draw_measured(10 ** 7)
        _, acc = classify(x, cfg)
        p = p_thr(n, delta)
        assert abs((1 - acc.mean()) - p) <= 4 * math.sqrt(p * (1 - p) / 10 ** 7) + 1e-12

    @settings(max_examples=300, deadline=None)
    @given(st.floats(0, 1))
    def leakage_symmetry(p):
        assume(1 - (1 - p) == p)  # the complement must be exact in floating point
        assert abs(info_leakage(p) - info_leakage(1 - p)) <= 1e-15
        assert 0 <= info_leakage(p) <= 1

    def leakage_endpoints():
        assert info_leakage(0.5) == 0 and info_leakage(0.0) == 1 and info_leakage(1.0) == 1

    def self_calibration():
        pvals = {}
        for i in range(120):
            b = np.random.default_rng(5000 + i).integers(0, 2, 1 << 18, dtype=np.uint8)
            for r in run_battery(b):
                pvals.setdefault(r.test_name, []).append(r.p_value)
        for name, ps in pvals.items():
            assert stats.kstest(ps, "uniform").pvalue > 1e-3, name

    for name, fn in [("gray round trip", gray_round_trip), ("transform antisymmetry", antisymmetry),
                     ("acceptance-rate convergence", acceptance_rate),
                     ("leakage symmetry", leakage_symmetry), ("leakage endpoints", leakage_endpoints),
                     ("battery self-calibration", self_calibration)]:
        try:
            fn()
            checks[name] = True
        except AssertionError:
            checks[name] = False
    ok = all(checks.values())
    criterion(7, ok, "; ".join(f"{k}: {'ok' if v else 'FAILED'}" for k, v in checks.items()))
    assert ok


def test_criterion_8_throughput(criterion):
    model = NoiseModel.from_clearance(8.5, adc_bits=12)
    cfg = ExtractionConfig.preset("full", v_m=model.v_total)
    throughput(model, cfg, count=1 << 20)  # warm-up
    r = throughput(model, cfg, count=1 << 25)
    ideal = throughput(MODEL, ExtractionConfig.preset("full", v_m=MODEL.v_total), count=1 << 23)
    mbps = r["bits_per_second"] / 1e6
    ok = mbps >= 200
    criterion(8, ok, f"{mbps:.0f} Mbit/s sustained simulate->extract, full regime, 12-bit ADC, "
                     f"{r['backend']} backend (unquantized float path: "
                     f"{ideal['bits_per_second'] / 1e6:.0f} Mbit/s); the 2 Gbit/s figure is "
                     f"hardware-only")
    assert ok
