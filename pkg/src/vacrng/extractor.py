"""Turn measured values into bits.

A measured value is mapped through its own Gaussian CDF to a uniform variate,
the unit interval is cut into ``2**n`` equal domains, and the domain index is
written out in reflected Gray code (or plain binary).  Values that land within
``threshold`` of an internal domain boundary are rejected, and only the bit
positions listed in ``keep_mask`` are emitted (1 = MSB, n = LSB).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from ._backend import core
from .errors import ValidationError

ENCODINGS = ("gray", "binary")
MAX_BITS = 16

#: Named operating points: full-rate 8-bit, high quantum correlation, high environmental immunity.
PRESETS = {
    "full": dict(n_bits=8, threshold=0.0, keep_mask=(1, 2, 3, 4, 5, 6, 7, 8)),
    "hqc": dict(n_bits=1, threshold=0.45, keep_mask=(1,)),
    "hei": dict(n_bits=8, threshold=0.0, keep_mask=(5, 6, 7, 8)),
}


def max_threshold(n: int) -> float:
    """Exclusive upper bound on the rejection half-width for ``n``-bit domains.

    Bands around neighbouring boundaries must not merge.  With a single
    internal boundary (n = 1) the band may grow until it touches the outer
    edges.
    """
    return 0.5 if n == 1 else 2.0 ** (-n - 1)


def _check_n(n) -> int:
    if isinstance(n, bool) or int(n) != n or not 1 <= n <= MAX_BITS:
        raise ValidationError(f"bit depth must be an integer in [1, {MAX_BITS}], got {n!r}")
    return int(n)


def _check_threshold(n: int, delta: float) -> float:
    delta = float(delta)
    if not (0 <= delta < max_threshold(n)):
        raise ValidationError(
            f"threshold must satisfy 0 <= threshold < {max_threshold(n)} for n={n}, got {delta}")
    return delta


@dataclass(frozen=True)
class ExtractionConfig:
    n_bits: int = 8
    threshold: float = 0.0
    keep_mask: tuple = None
    encoding: str = "gray"
    v_m: float = 1.0

    def __post_init__(self):
        n = _check_n(self.n_bits)
        object.__setattr__(self, "n_bits", n)
        object.__setattr__(self, "threshold", _check_threshold(n, self.threshold))
        mask = tuple(range(1, n + 1)) if self.keep_mask is None else self.keep_mask
        try:
            mask = tuple(sorted({int(p) for p in mask}))
        except (TypeError, ValueError):
            raise ValidationError(f"keep_mask must be a collection of integers, got {mask!r}")
        if not mask or mask[0] < 1 or mask[-1] > n:
            raise ValidationError(f"keep_mask must be a non-empty subset of 1..{n}, got {mask}")
        object.__setattr__(self, "keep_mask", mask)
        if self.encoding not in ENCODINGS:
            raise ValidationError(f"encoding must be one of {ENCODINGS}, got {self.encoding!r}")
        if not (math.isfinite(self.v_m) and self.v_m > 0):
            raise ValidationError(f"v_m must be > 0, got {self.v_m}")
        object.__setattr__(self, "v_m", float(self.v_m))

    @classmethod
    def preset(cls, name: str, v_m: float = 1.0, encoding: str = "gray") -> "ExtractionConfig":
        try:
            params = PRESETS[name]
        except KeyError:
            raise ValidationError(f"unknown regime {name!r}; choose from {sorted(PRESETS)}")
        return cls(v_m=v_m, encoding=encoding, **params)

    @property
    def gray(self) -> bool:
        return self.encoding == "gray"

    @property
    def bits_per_sample(self) -> int:
        return len(self.keep_mask)

    def to_dict(self) -> dict:
        return {"n_bits": self.n_bits, "threshold": self.threshold,
                "keep_mask": list(self.keep_mask), "encoding": self.encoding, "v_m": self.v_m}


@dataclass
class BitBlock:
    """Bits produced from a batch of samples (one uint8 per bit, values 0/1)."""

    bits: np.ndarray
    source_count: int
    bits_per_sample: int = field(default=1, repr=False)

    def __post_init__(self):
        if len(self.bits) != self.source_count * self.bits_per_sample:
            raise ValidationError("bit count does not match accepted samples x kept positions")

    def __len__(self):
        return len(self.bits)

    def packed(self) -> tuple[bytes, int]:
        """Bytes packed MSB-first, zero-padded, and the number of valid bits."""
        return np.packbits(self.bits).tobytes(), len(self.bits)


def uniformize(x, v: float):
    """Map ``x ~ N(0, v)`` to ``(1 + erf(x / sqrt(2 v))) / 2``, uniform on (0, 1)."""
    if not v > 0:
        raise ValidationError(f"variance must be > 0, got {v}")
    return ndtr(np.asarray(x, dtype=float) * (1.0 / math.sqrt(v)))[()]


def _check_unit(y):
    y = np.asarray(y, dtype=float)
    if np.any(~((y >= 0) & (y <= 1))):
        raise ValidationError("y must lie in [0, 1]")
    return y


def partition_index(y, n: int):
    """Index of the equal-width domain containing ``y``; ``y = 1`` falls in the last one."""
    n = _check_n(n)
    y = _check_unit(y)
    idx = np.minimum(np.floor(y * (1 << n)), (1 << n) - 1).astype(np.int64)
    return int(idx) if idx.ndim == 0 else idx


def _check_index(index: int, n: int) -> int:
    n = _check_n(n)
    if isinstance(index, bool) or int(index) != index or not 0 <= index < (1 << n):
        raise ValidationError(f"index must be in [0, {(1 << n) - 1}], got {index!r}")
    return int(index)


def gray_code(index: int) -> int:
    return index ^ (index >> 1)


def gray_decode_int(code: int) -> int:
    index = 0
    while code:
        index ^= code
        code >>= 1
    return index


def int_to_bits(value: int, n: int) -> tuple:
    return tuple((value >> (n - 1 - i)) & 1 for i in range(n))


def bits_to_int(bits) -> int:
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    return value


def gray_encode(index: int, n: int) -> tuple:
    """Reflected binary Gray code of ``index`` as ``n`` bits, MSB first."""
    index = _check_index(index, n)
    return int_to_bits(gray_code(index), n)


def gray_decode(bits) -> int:
    """Inverse of :func:`gray_encode`."""
    return gray_decode_int(bits_to_int(bits))


def encode(index: int, n: int, encoding: str = "gray") -> tuple:
    index = _check_index(index, n)
    if encoding == "gray":
        return int_to_bits(gray_code(index), n)
    if encoding == "binary":
        return int_to_bits(index, n)
    raise ValidationError(f"encoding must be one of {ENCODINGS}, got {encoding!r}")


def threshold_accept(y: float, n: int, delta: float) -> bool:
    """False iff ``y`` is strictly within ``delta`` of an internal domain boundary."""
    n = _check_n(n)
    delta = _check_threshold(n, delta)
    y = float(_check_unit(y))
    N = float(1 << n)
    k = min(max(float(np.rint(y * N)), 1.0), N - 1)
    return not abs(y - k / N) < delta


def p_thr(n: int, delta: float) -> float:
    """Rejection probability for a uniform ``y``: ``(2**n - 1) * 2 * delta``."""
    n = _check_n(n)
    delta = _check_threshold(n, delta)
    return ((1 << n) - 1) * 2 * delta


def generation_rate(config: ExtractionConfig, sample_rate: float) -> float:
    """Output bit rate: kept bits per sample times acceptance probability times sample rate."""
    if not sample_rate > 0:
        raise ValidationError(f"sample_rate must be > 0, got {sample_rate}")
    return config.bits_per_sample * (1 - p_thr(config.n_bits, config.threshold)) * sample_rate


def expected_domain_probs(n: int, delta: float) -> np.ndarray:
    """Occupancy of each domain index after thresholding, for uniform input, renormalized."""
    N = 1 << n
    edges = np.full(N, 2.0)
    edges[0] = edges[-1] = 1.0
    p = 1.0 / N - delta * edges
    return p / p.sum()


# -- batch extraction ---------------------------------------------------------

def compaction_table(config: ExtractionConfig) -> np.ndarray:
    """Map every n-bit code to the concatenation of its kept bit positions."""
    n = config.n_bits
    codes = np.arange(1 << n, dtype=np.uint32)
    out = np.zeros_like(codes)
    for pos in config.keep_mask:
        out = (out << 1) | ((codes >> (n - pos)) & 1)
    return out


def classify(x, config: ExtractionConfig):
    """Encoded domain code (uint32) and acceptance flag (uint8) for each measured value."""
    return core.classify(np.asarray(x, dtype=float).ravel(), 1.0 / math.sqrt(config.v_m),
                         config.n_bits, config.threshold, config.gray)


def code_lut(config: ExtractionConfig, adc_bits: int, full_scale: float):
    """Per-ADC-code lookup tables.

    Returns ``(codes, accepted, offset)`` where entry ``c + offset`` holds the
    encoded domain and acceptance flag of the reconstructed value ``c * step``.
    """
    from .noise import adc_step, code_range

    lo, hi = code_range(adc_bits)
    values = np.arange(lo, hi + 1, dtype=np.float64) * adc_step(adc_bits, full_scale)
    codes, accepted = classify(values, config)
    return codes, accepted, -lo


def quantized_domain_probs(config: ExtractionConfig, adc_bits: int, full_scale: float):
    """Accepted-domain occupancy for ADC codes of a ``N(0, v_m)`` signal, renormalized.

    Each code carries the Gaussian mass of its cell (the two end codes absorb
    the clipped tails) and lands in the domain of its reconstructed value, so
    coarse converters give measurably non-uniform occupancy.
    """
    from .noise import adc_step, code_range

    lo, hi = code_range(adc_bits)
    step = adc_step(adc_bits, full_scale)
    edges = (np.arange(lo, hi) + 0.5) * step / math.sqrt(config.v_m)
    cdf = np.concatenate(([0.0], ndtr(edges), [1.0]))
    mass = np.diff(cdf)
    codes, accepted = code_lut(config, adc_bits, full_scale)[:2]
    if config.gray:
        codes = np.array([gray_decode_int(int(c)) for c in range(1 << config.n_bits)])[codes]
    p = np.bincount(codes, weights=mass * accepted, minlength=1 << config.n_bits)
    return p / p.sum()


def extract(x_m: float, config: ExtractionConfig):
    """Bits for one measured value, MSB to LSB over ``keep_mask``; None when rejected."""
    y = float(uniformize(x_m, config.v_m))
    if not threshold_accept(y, config.n_bits, config.threshold):
        return None
    bits = encode(partition_index(y, config.n_bits), config.n_bits, config.encoding)
    return tuple(bits[p - 1] for p in config.keep_mask)


def extract_batch(x_m, config: ExtractionConfig) -> BitBlock:
    """Vectorized :func:`extract` over an array; rejected samples emit nothing."""
    codes, accepted = classify(x_m, config)
    sel = codes[accepted.view(bool)]
    shifts = np.array([config.n_bits - p for p in config.keep_mask], dtype=np.uint32)
    bits = ((sel[:, None] >> shifts) & 1).astype(np.uint8).ravel()
    return BitBlock(bits, int(sel.size), config.bits_per_sample)


class StreamExtractor:
    """Incremental extraction with bounded memory.

    Feed chunks of measured values (:meth:`feed`) or ADC codes
    (:meth:`feed_codes`); each call returns the packed bytes completed so
    far.  :meth:`finish` flushes the zero-padded final byte.  Output order
    equals input order.
    """

    def __init__(self, config: ExtractionConfig):
        self.config = config
        self.samples = 0
        self.accepted = 0
        self.bits = 0
        self.code_counts = np.zeros(1 << config.n_bits, dtype=np.int64)
        self._compact = compaction_table(config)
        self._k = config.bits_per_sample
        self._carry = (0, 0)
        self._lut = None

    def _account(self, n_in, n_acc):
        self.samples += n_in
        self.accepted += n_acc
        self.bits += n_acc * self._k

    def feed(self, x_m) -> bytes:
        codes, accepted = classify(x_m, self.config)
        n_acc = int(np.count_nonzero(accepted))
        self.code_counts += np.bincount(codes[accepted.view(bool)],
                                        minlength=self.code_counts.size)
        out, cv, cb = core.pack(self._compact[codes], accepted, self._k, *self._carry)
        self._carry = (cv, cb)
        self._account(codes.size, n_acc)
        return out.tobytes()

    def feed_codes(self, codes, adc_bits: int, full_scale: float) -> bytes:
        if self._lut is None or self._lut[0] != (adc_bits, full_scale):
            lut_code, lut_acc, offset = code_lut(self.config, adc_bits, full_scale)
            self._lut = ((adc_bits, full_scale), lut_code, lut_acc, offset,
                         self._compact[lut_code])
        _, lut_code, lut_acc, offset, lut_val = self._lut
        codes = np.ascontiguousarray(codes, dtype=np.int32)
        out, cv, cb, n_acc = core.lut_pack(codes, offset, lut_val, lut_acc, self._k,
                                           *self._carry)
        self._carry = (cv, cb)
        hist = np.bincount(codes.astype(np.int64) + offset, minlength=lut_code.size)
        self.code_counts += np.bincount(lut_code, weights=hist * lut_acc,
                                        minlength=self.code_counts.size).astype(np.int64)
        self._account(codes.size, n_acc)
        return out.tobytes()

    def finish(self) -> tuple[bytes, int]:
        """Final partial byte (possibly empty) and the count of valid bits in it."""
        cv, cb = self._carry
        self._carry = (0, 0)
        if cb == 0:
            return b"", 0
        return bytes([(cv << (8 - cb)) & 0xFF]), cb

    def expected_domain_probs(self) -> np.ndarray:
        """Domain law the counts should follow if ``v_m`` matches the input."""
        if self._lut is None:
            return expected_domain_probs(self.config.n_bits, self.config.threshold)
        return quantized_domain_probs(self.config, *self._lut[0])

    def domain_counts(self) -> np.ndarray:
        """Accepted-sample counts indexed by domain (decoded from the output encoding)."""
        if not self.config.gray:
            return self.code_counts.copy()
        idx = np.array([gray_decode_int(c) for c in range(self.code_counts.size)])
        counts = np.zeros_like(self.code_counts)
        counts[idx] = self.code_counts
        return counts
