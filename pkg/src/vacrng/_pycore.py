"""Pure numpy implementation of the hot kernels.

Mirrors ``_core.pyx`` operation for operation so both backends return
bit-identical results.
"""

import numpy as np
from scipy.special import ndtr

NAME = "python"


def classify(x, inv_sigma, n, delta, gray):
    """Domain code and acceptance flag for each value of ``x``.

    ``y = ndtr(x * inv_sigma)``; the domain index is ``floor(y * 2**n)``
    clamped to ``2**n - 1``.  A value is rejected when it lies strictly closer
    than ``delta`` to an internal boundary ``k / 2**n``, ``1 <= k < 2**n``.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    N = float(1 << n)
    y = ndtr(x * inv_sigma)
    yN = y * N
    idx = np.minimum(np.floor(yN), N - 1).astype(np.uint32)
    if delta > 0:
        k = np.clip(np.rint(yN), 1, N - 1)
        accepted = ~(np.abs(y - k / N) < delta)
    else:
        accepted = np.ones(x.shape, dtype=bool)
    if gray:
        idx ^= idx >> 1
    return idx, accepted.view(np.uint8)


def _pack_values(vals, k, carry_value, carry_bits):
    if carry_bits == 0 and k == 8:
        return vals.astype(np.uint8), 0, 0
    shifts = np.arange(k - 1, -1, -1, dtype=np.uint32)
    bits = ((vals[:, None] >> shifts) & 1).astype(np.uint8).ravel()
    if carry_bits:
        head = (carry_value >> np.arange(carry_bits - 1, -1, -1)) & 1
        bits = np.concatenate([head.astype(np.uint8), bits])
    full = bits.size - bits.size % 8
    out = np.packbits(bits[:full])
    tail = bits[full:]
    cv = 0
    for b in tail.tolist():
        cv = (cv << 1) | b
    return out, cv, int(tail.size)


def pack(vals, accepted, k, carry_value=0, carry_bits=0):
    """Pack the low ``k`` bits of each accepted value MSB-first.

    Returns ``(bytes_array, carry_value, carry_bits)``; fewer than 8 leftover
    bits are carried into the next call.
    """
    vals = np.asarray(vals, dtype=np.uint32)
    if accepted is not None:
        vals = vals[np.asarray(accepted, dtype=bool)]
    return _pack_values(vals, k, carry_value, carry_bits)


def lut_pack(codes, offset, lut_val, lut_acc, k, carry_value=0, carry_bits=0):
    """Look up ADC codes in a precomputed table, then pack as :func:`pack`.

    Returns ``(bytes_array, carry_value, carry_bits, n_accepted)``.
    """
    idx = np.asarray(codes, dtype=np.int64) + offset
    acc = lut_acc[idx].view(bool)
    vals = lut_val[idx][acc]
    out, cv, cb = _pack_values(vals, k, carry_value, carry_bits)
    return out, cv, cb, int(vals.size)


def simulate_codes(bitgen, count, sigma, step, lo, hi):
    """Draw ``count`` values from ``N(0, sigma**2)`` and quantize them to ADC codes."""
    z = np.random.Generator(bitgen).standard_normal(count)
    c = np.rint((sigma * z) / step)
    np.clip(c, lo, hi, out=c)
    return c.astype(np.int32)
