"""Independent reference computations used to freeze expected values.

The disagreement oracle integrates over the latent (not the measurement, as
the library does): for each pair of a measured acceptance interval and a
latent domain interval it evaluates
``P(X_m in A, X_L in B) = int_B phi_L(x) [Phi((a2 - x)/s) - Phi((a1 - x)/s)] dx``
with plain adaptive quadrature.  Only valid for unquantized models.
"""

import math

import numpy as np
from scipy import integrate, stats

INF_CUT = 12.0


def _gray(k):
    return k ^ (k >> 1)


def _bit(code, n, pos):
    return (code >> (n - pos)) & 1


def measured_intervals(n, delta, v_m):
    """Accepted x-intervals per domain index for measured variance ``v_m``."""
    N = 1 << n
    out = []
    for k in range(N):
        lo = k / N + (delta if k > 0 else 0.0)
        hi = (k + 1) / N - (delta if k < N - 1 else 0.0)
        out.append((k, math.sqrt(v_m) * stats.norm.ppf(lo), math.sqrt(v_m) * stats.norm.ppf(hi)))
    return out


def latent_intervals(n, v_l):
    N = 1 << n
    return [(j, math.sqrt(v_l) * stats.norm.ppf(j / N), math.sqrt(v_l) * stats.norm.ppf((j + 1) / N))
            for j in range(N)]


def _pair_prob(a1, a2, b1, b2, v_l, v_o):
    s_l, s_o = math.sqrt(v_l), math.sqrt(v_o)
    b1 = max(b1, -INF_CUT * s_l)
    b2 = min(b2, INF_CUT * s_l)
    if b2 <= b1:
        return 0.0

    def f(x):
        return stats.norm.pdf(x, scale=s_l) * (stats.norm.cdf((a2 - x) / s_o) - stats.norm.cdf((a1 - x) / s_o))

    pts = [p for p in (a1, a2) if b1 < p < b2]
    val, _ = integrate.quad(f, b1, b2, points=pts or None, epsabs=1e-14, epsrel=1e-12, limit=400)
    return val


def disagreement(v_v, v_e, n, delta, bit, against="vacuum", gray=True):
    """Acceptance-conditioned P(measured bit != reference bit) for an ideal model."""
    v_m = v_v + v_e
    v_l, v_o = (v_v, v_e) if against == "vacuum" else (v_e, v_v)
    enc = _gray if gray else (lambda k: k)
    meas = measured_intervals(n, delta, v_m)
    lat = latent_intervals(n, v_l)
    p_acc = sum(stats.norm.cdf(a2 / math.sqrt(v_m)) - stats.norm.cdf(a1 / math.sqrt(v_m))
                for _, a1, a2 in meas)
    joint = 0.0
    for k, a1, a2 in meas:
        for j, b1, b2 in lat:
            if _bit(enc(k), n, bit) != _bit(enc(j), n, bit):
                joint += _pair_prob(a1, a2, b1, b2, v_l, v_o)
    return joint / p_acc


def sign_disagreement(v_v, v_e, against="vacuum"):
    """Closed form for one bit without thresholding: arccos(rho) / pi."""
    v_l = v_v if against == "vacuum" else v_e
    return math.acos(math.sqrt(v_l / (v_v + v_e))) / math.pi


if __name__ == "__main__":
    v_e = 10 ** -0.85
    for against in ("vacuum", "electronic"):
        for n in (1, 2, 3):
            for delta in (0.0, 0.01):
                vals = [disagreement(1.0, v_e, n, delta, b, against) for b in range(1, n + 1)]
                print(f"({against!r}, {n}, {delta}): {vals!r},")
    print(sign_disagreement(1.0, v_e), sign_disagreement(1.0, v_e, "electronic"))
