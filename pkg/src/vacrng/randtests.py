"""Statistical battery for bit streams.

Test statistics follow NIST SP 800-22 (frequency, block frequency, runs,
longest run of ones, cumulative sums, serial, approximate entropy), plus a
Pearson chi-square on byte values.  Inputs are 0/1 uint8 arrays.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import erfc, gammaincc
from scipy.stats import binom, chi2, norm

from .errors import StreamTooShortError, ValidationError

DEFAULT_ALPHA = 0.01


@dataclass
class TestResult:
    test_name: str
    statistic: float
    p_value: float
    verdict: str
    params: dict = field(default_factory=dict)

    __test__ = False  # keep pytest from collecting this class

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


def _result(name, statistic, p, alpha, **params) -> TestResult:
    p = float(min(max(p, 0.0), 1.0))
    return TestResult(name, float(statistic), p, "pass" if p >= alpha else "fail", params)


def _as_bits(bits) -> np.ndarray:
    bits = np.asarray(getattr(bits, "bits", bits))
    if bits.ndim != 1:
        raise ValidationError("bit stream must be one-dimensional")
    if bits.size and (bits.min() < 0 or bits.max() > 1):
        raise ValidationError("bit stream must contain only 0 and 1")
    return bits.astype(np.int8, copy=False)


def _need(name, n, minimum):
    if n < minimum:
        raise StreamTooShortError(f"{name} needs at least {minimum} bits, got {n}")


def monobit(bits, alpha=DEFAULT_ALPHA) -> TestResult:
    b = _as_bits(bits)
    n = b.size
    _need("monobit", n, 100)
    s = abs(2 * int(b.sum()) - n) / math.sqrt(n)
    return _result("monobit", s, erfc(s / math.sqrt(2)), alpha, n=n)


def block_frequency(bits, alpha=DEFAULT_ALPHA, block=128) -> TestResult:
    b = _as_bits(bits)
    n = b.size
    _need("block_frequency", n, max(100, block))
    nblocks = n // block
    pi = b[:nblocks * block].reshape(nblocks, block).mean(axis=1)
    stat = 4.0 * block * float(np.sum((pi - 0.5) ** 2))
    return _result("block_frequency", stat, gammaincc(nblocks / 2, stat / 2), alpha,
                   block=block, blocks=nblocks)


def runs(bits, alpha=DEFAULT_ALPHA) -> TestResult:
    b = _as_bits(bits)
    n = b.size
    _need("runs", n, 100)
    pi = b.mean()
    # frequency prerequisite: the runs statistic is meaningless for a biased stream
    if abs(pi - 0.5) >= 2 / math.sqrt(n):
        return _result("runs", float("nan"), 0.0, alpha, n=n, prerequisite="failed")
    v = 1 + int(np.count_nonzero(b[1:] != b[:-1]))
    num = abs(v - 2 * n * pi * (1 - pi))
    den = 2 * math.sqrt(2 * n) * pi * (1 - pi)
    return _result("runs", v, erfc(num / den), alpha, n=n)


# (block length, category bounds lo..hi) by minimum stream length
_LONGEST_RUN_TABLE = ((750000, 10000, 10, 16), (6272, 128, 4, 9), (128, 8, 1, 4))


@lru_cache(maxsize=None)
def _longest_run_cdf(m: int, k: int) -> float:
    """P(longest run of ones in m fair bits <= k), by dynamic programming."""
    # state: length of the current trailing run of ones (0..k)
    state = np.zeros(k + 1)
    state[0] = 1.0
    for _ in range(m):
        nxt = np.zeros(k + 1)
        nxt[0] = 0.5 * state.sum()
        nxt[1:] = 0.5 * state[:-1]
        state = nxt
    return float(state.sum())


@lru_cache(maxsize=None)
def _longest_run_probs(m: int, lo: int, hi: int) -> tuple:
    cdf = [_longest_run_cdf(m, k) for k in range(lo, hi)]
    probs = [cdf[0]] + [cdf[i] - cdf[i - 1] for i in range(1, len(cdf))] + [1 - cdf[-1]]
    return tuple(probs)


def longest_run(bits, alpha=DEFAULT_ALPHA) -> TestResult:
    """Longest run of ones in blocks; category probabilities are computed exactly."""
    b = _as_bits(bits)
    n = b.size
    _need("longest_run", n, 128)
    m, lo, hi = next((m, lo, hi) for nmin, m, lo, hi in _LONGEST_RUN_TABLE if n >= nmin)
    nblocks = n // m
    blocks = b[:nblocks * m].reshape(nblocks, m)
    # longest run per block: distance between zero positions
    padded = np.zeros((nblocks, m + 2), dtype=np.int32)
    padded[:, 1:-1] = blocks
    zeros_r, zeros_c = np.nonzero(padded == 0)
    gaps = np.diff(zeros_c) - 1
    gaps[zeros_r[1:] != zeros_r[:-1]] = -1
    starts = np.searchsorted(zeros_r, np.arange(nblocks))
    longest = np.maximum.reduceat(gaps, starts)
    counts = np.bincount(np.clip(longest, lo, hi) - lo, minlength=hi - lo + 1)
    probs = np.array(_longest_run_probs(m, lo, hi))
    expected = nblocks * probs
    stat = float(np.sum((counts - expected) ** 2 / expected))
    k = hi - lo
    return _result("longest_run", stat, gammaincc(k / 2, stat / 2), alpha,
                   block=m, blocks=nblocks)


def cumulative_sums(bits, alpha=DEFAULT_ALPHA, mode="forward") -> TestResult:
    b = _as_bits(bits)
    n = b.size
    _need("cumulative_sums", n, 100)
    x = 2 * b.astype(np.int64) - 1
    if mode == "backward":
        x = x[::-1]
    elif mode != "forward":
        raise ValidationError(f"mode must be 'forward' or 'backward', got {mode!r}")
    z = int(np.max(np.abs(np.cumsum(x))))
    sq = math.sqrt(n)
    k1 = np.arange(math.floor((-n / z + 1) / 4), math.floor((n / z - 1) / 4) + 1)
    k2 = np.arange(math.floor((-n / z - 3) / 4), math.floor((n / z - 1) / 4) + 1)
    s1 = np.sum(norm.cdf((4 * k1 + 1) * z / sq) - norm.cdf((4 * k1 - 1) * z / sq))
    s2 = np.sum(norm.cdf((4 * k2 + 3) * z / sq) - norm.cdf((4 * k2 + 1) * z / sq))
    return _result(f"cumulative_sums_{mode}", z, 1.0 - s1 + s2, alpha, mode=mode)


def _pattern_counts(b, m):
    """Counts of the overlapping m-bit patterns, wrapping around the end of the stream."""
    n = b.size
    ext = np.concatenate([b, b[:m - 1]]).astype(np.int64)
    idx = np.zeros(n, dtype=np.int64)
    for j in range(m):
        idx = (idx << 1) | ext[j:j + n]
    return np.bincount(idx, minlength=1 << m)


def _psi2(b, m):
    if m <= 0:
        return 0.0
    counts = _pattern_counts(b, m).astype(float)
    return (1 << m) / b.size * float(np.sum(counts ** 2)) - b.size


def serial(bits, alpha=DEFAULT_ALPHA, m=2) -> list:
    b = _as_bits(bits)
    n = b.size
    _need("serial", n, max(100, 1 << (m + 3)))
    p0, p1, p2 = _psi2(b, m), _psi2(b, m - 1), _psi2(b, m - 2)
    d1 = p0 - p1
    d2 = p0 - 2 * p1 + p2
    return [_result("serial_1", d1, gammaincc(2 ** (m - 2), d1 / 2), alpha, m=m),
            _result("serial_2", d2, gammaincc(2 ** (m - 3), d2 / 2), alpha, m=m)]


def _phi(b, m):
    c = _pattern_counts(b, m) / b.size
    c = c[c > 0]
    return float(np.sum(c * np.log(c)))


def approximate_entropy(bits, alpha=DEFAULT_ALPHA, m=2) -> TestResult:
    b = _as_bits(bits)
    n = b.size
    _need("approximate_entropy", n, max(100, 1 << (m + 6)))
    apen = _phi(b, m) - _phi(b, m + 1)
    stat = 2.0 * n * (math.log(2) - apen)
    return _result("approximate_entropy", stat, gammaincc(2 ** (m - 1), stat / 2), alpha, m=m)


def chi_square_gof(counts, probs, name="chi_square", alpha=DEFAULT_ALPHA) -> TestResult:
    """Pearson chi-square of observed ``counts`` against category ``probs``."""
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(probs, dtype=float)
    total = counts.sum()
    expected = total * probs
    stat = float(np.sum((counts - expected) ** 2 / expected))
    return _result(name, stat, chi2.sf(stat, counts.size - 1), alpha, categories=counts.size)


def chi_square_uniformity(symbols, k: int = 8, alpha=DEFAULT_ALPHA) -> TestResult:
    """Pearson chi-square of ``k``-bit symbols against the uniform law on ``2**k`` values."""
    symbols = np.asarray(symbols).ravel()
    bins = 1 << k
    if symbols.size < 100 * bins:
        raise StreamTooShortError(f"need at least {100 * bins} symbols for k={k}, got {symbols.size}")
    if symbols.size and (symbols.min() < 0 or symbols.max() >= bins):
        raise ValidationError(f"symbols must lie in [0, {bins})")
    counts = np.bincount(symbols.astype(np.int64), minlength=bins)
    res = chi_square_gof(counts, np.full(bins, 1.0 / bins), "chi_square_uniformity", alpha)
    res.params["k"] = k
    return res


def byte_chi_square(bits, alpha=DEFAULT_ALPHA) -> TestResult:
    b = _as_bits(bits)
    nbytes = b.size // 8
    _need("byte_chi_square", b.size, 8 * 100 * 256)
    symbols = np.packbits(b[:8 * nbytes].astype(np.uint8))
    res = chi_square_uniformity(symbols, 8, alpha)
    res.test_name = "byte_chi_square"
    return res


SUITE = {
    "monobit": lambda b, a: [monobit(b, a)],
    "block_frequency": lambda b, a: [block_frequency(b, a)],
    "runs": lambda b, a: [runs(b, a)],
    "longest_run": lambda b, a: [longest_run(b, a)],
    "cumulative_sums": lambda b, a: [cumulative_sums(b, a, "forward"),
                                     cumulative_sums(b, a, "backward")],
    "serial": lambda b, a: serial(b, a),
    "approximate_entropy": lambda b, a: [approximate_entropy(b, a)],
    "byte_chi_square": lambda b, a: [byte_chi_square(b, a)],
}


def run_battery(bits, alpha: float = DEFAULT_ALPHA, suite=None) -> list:
    """Run the selected tests (all by default); returns a list of :class:`TestResult`."""
    if not 0 < alpha < 1:
        raise ValidationError(f"alpha must be in (0, 1), got {alpha}")
    names = list(SUITE) if suite is None else list(suite)
    unknown = [s for s in names if s not in SUITE]
    if unknown:
        raise ValidationError(f"unknown test(s) {unknown}; available: {sorted(SUITE)}")
    b = _as_bits(bits)
    results = []
    for name in names:
        results.extend(SUITE[name](b, alpha))
    return results


def failure_budget(n_tests: int, alpha: float, confidence: float = 0.99) -> int:
    """Largest failure count inside the two-sided ``confidence`` interval of Binomial(n, alpha)."""
    return int(binom.ppf(1 - (1 - confidence) / 2, n_tests, alpha))


@dataclass
class BatteryReport:
    results: list
    alpha: float
    failures: int
    budget: int
    n_bits: int

    @property
    def passed(self) -> bool:
        return self.failures <= self.budget

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "n_bits": self.n_bits, "failures": self.failures,
                "failure_budget": self.budget, "passed": self.passed,
                "results": [asdict(r) for r in self.results]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def battery_report(bits, alpha: float = DEFAULT_ALPHA, suite=None) -> BatteryReport:
    """Run the battery and compare the failure count with its statistical budget."""
    b = _as_bits(bits)
    results = run_battery(b, alpha, suite)
    failures = sum(not r.passed for r in results)
    return BatteryReport(results, alpha, failures, failure_budget(len(results), alpha), b.size)
