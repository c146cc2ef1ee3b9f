"""Bit-level quality metrics of the extractor.

For each kept bit position the module computes

* ``p_eq``: probability that the emitted bit differs from the bit the pure
  vacuum component would have produced,
* ``p_ee``: the same comparison against the electronic noise component,
* ``i_e``: information about the emitted bit available to someone who knows
  the electronic noise, ``1 - H2(p_ee)``.

Reference bits come from passing the latent component through the same
uniformize/partition/encode chain, normalized by the latent's own variance.
Probabilities are conditioned on the sample surviving the threshold unless
``conditioning="joint"`` is requested.

Two independent routes are provided.  :func:`error_prob_quadrature` integrates
over the Gaussian joint density of ``(x_m, latent)``: for fixed ``x_m`` the
latent is Gaussian, so the probability of each reference domain is a
difference of normal CDFs, and the remaining one-dimensional integral over
``x_m`` is evaluated by adaptive Gauss-Kronrod quadrature on panels split
wherever the measured code changes or the conditional mean crosses a
reference boundary.  :func:`error_prob_montecarlo` simulates labeled samples
and counts disagreements.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import quad_vec
from scipy.special import ndtr, ndtri, xlog1py

from .errors import QuadratureError, ValidationError
from .extractor import (ExtractionConfig, classify, encode, gray_code, max_threshold,
                        partition_index, uniformize)
from .noise import NoiseModel, SampleStream, adc_step, code_range

AGAINST = ("vacuum", "electronic")
CONDITIONINGS = ("acceptance", "joint")

#: Target absolute error of quadrature results.
QUAD_TOL = 1e-8
#: Integration range in standard deviations of the measured signal.
TRUNCATION_SIGMAS = 8.0

_LN2 = math.log(2.0)


def conditional_density(x_m, x_v, v_e):
    """Density of the measurement given the vacuum value: ``N(x_v, v_e)`` evaluated at ``x_m``."""
    if not v_e > 0:
        raise ValidationError(f"v_e must be > 0, got {v_e}")
    d = np.asarray(x_m, dtype=float) - x_v
    return (np.exp(-d * d / (2 * v_e)) / math.sqrt(2 * math.pi * v_e))[()]


def _leakage_series(q):
    # 1 - H2((1 - q) / 2) = sum_k q^(2k) / (k (2k - 1)) / (2 ln 2)
    q2 = q * q
    term = np.ones_like(q2)
    total = np.zeros_like(q2)
    for k in range(1, 24):
        term = term * q2
        total = total + term / (k * (2 * k - 1))
    return total / (2 * _LN2)


def info_leakage(p_ee):
    """``1 + p log2 p + (1 - p) log2 (1 - p)`` with ``0 log 0 = 0``.

    Evaluated in a form that stays accurate when ``p`` is close to 1/2, where
    the leakage is tiny.
    """
    p = np.asarray(p_ee, dtype=float)
    if np.any(~((p >= 0) & (p <= 1))):
        raise ValidationError("probability must lie in [0, 1]")
    q = 1.0 - 2.0 * p
    small = np.abs(q) < 0.05
    direct = (xlog1py(1 + q, q) + xlog1py(1 - q, -q)) / (2 * _LN2)
    out = np.where(small, _leakage_series(np.where(small, q, 0.0)), direct)
    return np.clip(out, 0.0, 1.0)[()]


def reference_bit(latent: float, latent_variance: float, config: ExtractionConfig,
                  bit_index: int) -> int:
    """Bit ``bit_index`` (1 = MSB) of a latent component pushed through the extraction chain."""
    if not 1 <= bit_index <= config.n_bits:
        raise ValidationError(f"bit_index must be in 1..{config.n_bits}, got {bit_index}")
    y = float(uniformize(latent, latent_variance))
    return encode(partition_index(y, config.n_bits), config.n_bits, config.encoding)[bit_index - 1]


def _latent_variances(model: NoiseModel, against: str):
    if against == "vacuum":
        return model.v_vacuum, model.v_electronic
    if against == "electronic":
        if model.v_electronic <= 0:
            raise ValidationError("comparison against electronic noise needs v_electronic > 0")
        return model.v_electronic, model.v_vacuum
    raise ValidationError(f"against must be one of {AGAINST}, got {against!r}")


def _check_conditioning(conditioning):
    if conditioning not in CONDITIONINGS:
        raise ValidationError(f"conditioning must be one of {CONDITIONINGS}, got {conditioning!r}")


def _kept_bit_table(codes, config: ExtractionConfig) -> np.ndarray:
    """Matrix ``[len(codes), len(keep_mask)]`` of the kept bits of each code."""
    shifts = np.array([config.n_bits - p for p in config.keep_mask], dtype=np.uint32)
    return ((np.asarray(codes, dtype=np.uint32)[:, None] >> shifts) & 1).astype(np.int8)


def _measured_panels(model: NoiseModel, config: ExtractionConfig, limit: float):
    """Split ``[-limit, limit]`` into intervals of constant measured code and acceptance.

    Returns ``(edges, codes, accepted)`` with ``len(edges) == len(codes) + 1``.
    """
    if model.adc_bits is None:
        N = 1 << config.n_bits
        ys = [k / N for k in range(1, N)]
        if config.threshold > 0:
            ys += [k / N + s * config.threshold for k in range(1, N) for s in (-1, 1)]
        ys = np.array([y for y in ys if 0 < y < 1])
        cuts = math.sqrt(config.v_m) * ndtri(ys)
        cuts = cuts[(cuts > -limit) & (cuts < limit)]
        edges = np.unique(np.concatenate([[-limit, limit], cuts]))
        mids = 0.5 * (edges[:-1] + edges[1:])
        codes, accepted = classify(mids, config)
        return edges, codes, accepted.astype(bool)
    # quantized: constant on ADC cells, decision points halfway between codes
    step = adc_step(model.adc_bits, model.full_scale)
    lo, hi = code_range(model.adc_bits)
    c_lo = max(lo, math.floor(-limit / step) - 1)
    c_hi = min(hi, math.ceil(limit / step) + 1)
    cells = np.arange(c_lo, c_hi + 1)
    codes, accepted = classify(cells * step, config)
    accepted = accepted.astype(bool)
    change = np.flatnonzero((codes[1:] != codes[:-1]) | (accepted[1:] != accepted[:-1]))
    cuts = (cells[change] + 0.5) * step
    edges = np.concatenate([[-limit], cuts[(cuts > -limit) & (cuts < limit)], [limit]])
    mids = 0.5 * (edges[:-1] + edges[1:])
    codes, accepted = classify(model.quantize(mids), config)
    return edges, codes, accepted.astype(bool)


@dataclass
class _Route:
    """Conditional law of one latent component given ``x_m``, plus its reference bits."""

    against: str
    slope: float
    sd: float
    ref_edges: np.ndarray
    ref_bits: np.ndarray

    @classmethod
    def build(cls, model, config, against):
        v_lat, v_other = _latent_variances(model, against)
        v_tot = model.v_total
        N = 1 << config.n_bits
        inner = math.sqrt(v_lat) * ndtri(np.arange(1, N) / N)
        edges = np.concatenate([[-np.inf], inner, [np.inf]])
        ref_codes = [gray_code(j) if config.gray else j for j in range(N)]
        return cls(against, v_lat / v_tot, math.sqrt(v_lat * v_other / v_tot), edges,
                   _kept_bit_table(ref_codes, config))

    def crossings(self, limit):
        """``x_m`` values where the conditional mean sits on a reference boundary."""
        x = self.ref_edges[1:-1] / self.slope
        return x[(x > -limit) & (x < limit)]

    def domain_probs(self, x):
        mu = self.slope * x
        if self.sd == 0:
            j = np.searchsorted(self.ref_edges, mu, side="right") - 1
            m = np.zeros(len(self.ref_edges) - 1)
            m[j] = 1.0
            return m
        z = (self.ref_edges - mu) / self.sd
        zl, zu = z[:-1], z[1:]
        return np.where(zl > 0, ndtr(-zl) - ndtr(-zu), ndtr(zu) - ndtr(zl))


def _gauss_mass(a, b, sd):
    za, zb = a / sd, b / sd
    if za > 0:
        return float(ndtr(-za) - ndtr(-zb))
    return float(ndtr(zb) - ndtr(za))


def disagreement_integrals(model: NoiseModel, config: ExtractionConfig, against=AGAINST,
                           epsabs: float = 1e-14, epsrel: float = 1e-11):
    """Joint probabilities ``P(accepted, bit_i != reference bit_i)`` by quadrature.

    Returns
    -------
    (joint, errors, p_accept)
        ``joint[route]`` and ``errors[route]`` are arrays over ``keep_mask``;
        ``p_accept`` is the exact acceptance probability.
    """
    against = (against,) if isinstance(against, str) else tuple(against)
    routes = [_Route.build(model, config, a) for a in against]
    sd_m = math.sqrt(model.v_total)
    limit = TRUNCATION_SIGMAS * sd_m
    edges, codes, accepted = _measured_panels(model, config, limit)
    extra = np.unique(np.concatenate([r.crossings(limit) for r in routes] + [np.zeros(0)]))

    k = len(config.keep_mask)
    joint = np.zeros(len(routes) * k)
    err = np.zeros_like(joint)
    p_acc = 0.0
    norm = 1.0 / math.sqrt(2 * math.pi * model.v_total)
    for lo, hi, code, acc in zip(edges[:-1], edges[1:], codes, accepted):
        if not acc:
            continue
        a = -np.inf if lo == -limit else lo
        b = np.inf if hi == limit else hi
        p_acc += _gauss_mass(a, b, sd_m)
        meas = _kept_bit_table([code], config)[0]
        # reference domains whose kept bits differ from this panel's
        masks = [(r.ref_bits != meas).astype(float) for r in routes]

        def integrand(x, masks=masks):
            w = norm * math.exp(-0.5 * x * x / model.v_total)
            return np.concatenate([r.domain_probs(x) @ m for r, m in zip(routes, masks)]) * w

        pts = np.concatenate([[lo], extra[(extra > lo) & (extra < hi)], [hi]])
        for u, v in zip(pts[:-1], pts[1:]):
            if v <= u:
                continue
            val, e = quad_vec(integrand, u, v, epsabs=epsabs, epsrel=epsrel, norm="max",
                              limit=2000)
            joint += val
            err += e
    # tail mass outside the truncated range bounds the neglected contribution
    err += 2 * float(ndtr(-TRUNCATION_SIGMAS))
    joint = np.clip(joint, 0.0, 1.0)
    return ({r.against: joint[i * k:(i + 1) * k] for i, r in enumerate(routes)},
            {r.against: err[i * k:(i + 1) * k] for i, r in enumerate(routes)},
            p_acc)


def _conditioned(joint, err, p_acc, conditioning):
    if conditioning == "joint":
        return joint, err
    if p_acc <= 0:
        raise ValidationError("acceptance probability is zero")
    return np.clip(joint / p_acc, 0.0, 1.0), err / p_acc


def _bit_slot(config: ExtractionConfig, bit_index: int) -> int:
    if bit_index not in config.keep_mask:
        raise ValidationError(f"bit {bit_index} is not in keep_mask {config.keep_mask}")
    return config.keep_mask.index(bit_index)


def error_prob_quadrature(model: NoiseModel, config: ExtractionConfig, bit_index: int,
                          against: str = "vacuum", conditioning: str = "acceptance",
                          tol: float = QUAD_TOL, full_output: bool = False):
    """Probability that kept bit ``bit_index`` disagrees with the reference bit.

    Raises :class:`QuadratureError` when the achieved error bound exceeds
    ``tol``.  With ``full_output`` the pair ``(probability, error_bound)`` is
    returned.
    """
    _check_conditioning(conditioning)
    slot = _bit_slot(config, bit_index)
    joint, err, p_acc = disagreement_integrals(model, config, against)
    p, e = _conditioned(joint[against], err[against], p_acc, conditioning)
    p, e = float(p[slot]), float(e[slot])
    if e > tol:
        raise QuadratureError(f"quadrature error bound {e:.3g} exceeds {tol:.3g}", p, e)
    return (p, e) if full_output else p


@dataclass
class MonteCarloCounts:
    samples: int
    accepted: int
    disagreements: dict

    def rate(self, against, slot):
        if self.accepted == 0:
            raise ValidationError("no samples were accepted; error rate is undefined")
        p = self.disagreements[against][slot] / self.accepted
        return p, math.sqrt(p * (1 - p) / self.accepted)


def montecarlo_counts(model: NoiseModel, config: ExtractionConfig, mc_samples: int,
                      against=AGAINST, chunk: int = 1 << 20) -> MonteCarloCounts:
    """Simulate labeled samples and count bit disagreements among accepted ones."""
    if mc_samples < 10 ** 4:
        raise ValidationError(f"mc_samples must be >= 10^4, got {mc_samples}")
    against = (against,) if isinstance(against, str) else tuple(against)
    variances = {a: _latent_variances(model, a)[0] for a in against}
    ref_configs = {a: ExtractionConfig(n_bits=config.n_bits, threshold=0.0,
                                       keep_mask=config.keep_mask, encoding=config.encoding,
                                       v_m=v) for a, v in variances.items()}
    stream = SampleStream(model)
    dis = {a: np.zeros(len(config.keep_mask), dtype=np.int64) for a in against}
    accepted_total = 0
    done = 0
    while done < mc_samples:
        n = min(chunk, mc_samples - done)
        s = stream.draw(n)
        codes, acc = classify(s.x_m, config)
        acc = acc.view(bool)
        meas = _kept_bit_table(codes[acc], config)
        accepted_total += int(acc.sum())
        for a in against:
            latent = (s.x_v if a == "vacuum" else s.x_e)[acc]
            ref, _ = classify(latent, ref_configs[a])
            dis[a] += (_kept_bit_table(ref, config) != meas).sum(axis=0)
        done += n
    return MonteCarloCounts(mc_samples, accepted_total, dis)


def error_prob_montecarlo(model: NoiseModel, config: ExtractionConfig, bit_index: int,
                          against: str = "vacuum", mc_samples: int = 10 ** 6):
    """Empirical disagreement rate among accepted samples and its binomial standard error."""
    slot = _bit_slot(config, bit_index)
    counts = montecarlo_counts(model, config, mc_samples, against)
    return counts.rate(against, slot)


# -- reports ----------------------------------------------------------------

@dataclass
class BitMetrics:
    bit: int
    p_eq: float | None
    p_ee: float | None
    i_e: float | None
    p_eq_err: float | None = None
    p_ee_err: float | None = None


@dataclass
class MetricsReport:
    per_bit: list
    p_thr: float
    rate_bits_per_sample: float
    method: str
    mc_samples: int | str
    config_echo: dict
    conditioning: str = "acceptance"
    model_echo: dict = field(default_factory=dict)
    tolerance: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_sweep_rows(self) -> list:
        """The report as :class:`SweepRow` records (missing values become NaN)."""
        nan = float("nan")
        n, delta = self.config_echo["n_bits"], self.config_echo["threshold"]
        return [SweepRow(n, b.bit, delta, self.rate_bits_per_sample,
                         nan if b.p_eq is None else b.p_eq, nan if b.p_ee is None else b.p_ee,
                         nan if b.i_e is None else b.i_e, self.method)
                for b in self.per_bit]


def _model_echo(model: NoiseModel) -> dict:
    return {"v_vacuum": model.v_vacuum, "v_electronic": model.v_electronic,
            "adc_bits": model.adc_bits, "adc_full_scale": model.full_scale,
            "rng_seed": int(model.rng_seed)}


def compute_report(model: NoiseModel, config: ExtractionConfig, method: str = "quadrature",
                   against=AGAINST, mc_samples: int = 10 ** 6,
                   conditioning: str = "acceptance") -> MetricsReport:
    """Per-bit ``p_eq``, ``p_ee`` and ``i_e`` for every kept position."""
    _check_conditioning(conditioning)
    against = (against,) if isinstance(against, str) else tuple(against)
    if method == "quadrature":
        joint, err, p_acc = disagreement_integrals(model, config, against)
        probs, errs = {}, {}
        for a in against:
            probs[a], errs[a] = _conditioned(joint[a], err[a], p_acc, conditioning)
        n_mc, tol = "n/a", QUAD_TOL
    elif method == "monte-carlo":
        counts = montecarlo_counts(model, config, mc_samples, against)
        if counts.accepted == 0:
            raise ValidationError("no samples were accepted; error rates are undefined")
        p_acc = counts.accepted / counts.samples
        probs, errs = {}, {}
        for a in against:
            denom = counts.accepted if conditioning == "acceptance" else counts.samples
            p = counts.disagreements[a] / denom
            probs[a], errs[a] = p, np.sqrt(p * (1 - p) / denom)
        n_mc, tol = int(mc_samples), None
    else:
        raise ValidationError(f"method must be 'quadrature' or 'monte-carlo', got {method!r}")

    per_bit = []
    for slot, bit in enumerate(config.keep_mask):
        p_eq = float(probs["vacuum"][slot]) if "vacuum" in probs else None
        p_ee = float(probs["electronic"][slot]) if "electronic" in probs else None
        per_bit.append(BitMetrics(
            bit=bit, p_eq=p_eq, p_ee=p_ee,
            i_e=None if p_ee is None else float(info_leakage(p_ee)),
            p_eq_err=None if p_eq is None else float(errs["vacuum"][slot]),
            p_ee_err=None if p_ee is None else float(errs["electronic"][slot])))
    p_thr = 1.0 - p_acc
    return MetricsReport(per_bit=per_bit, p_thr=p_thr,
                         rate_bits_per_sample=config.bits_per_sample * p_acc,
                         method=method, mc_samples=n_mc, config_echo=config.to_dict(),
                         conditioning=conditioning, model_echo=_model_echo(model),
                         tolerance=tol)


# -- curve family of rate vs. error / leakage -----------------------------

SWEEP_COLUMNS = ("n", "bit", "delta_t", "rate_per_sample", "p_eq", "p_ee", "i_e", "method")


@dataclass
class SweepRow:
    n: int
    bit: int
    delta_t: float
    rate_per_sample: float
    p_eq: float
    p_ee: float
    i_e: float
    method: str = "quadrature"


def default_deltas(n: int, grid: int = 20) -> np.ndarray:
    """``grid`` thresholds from 0 up to 90% of the largest admissible one."""
    return np.linspace(0.0, 0.9 * max_threshold(n), grid)


def sweep_figure3(model: NoiseModel, n_list=(1, 2, 3, 4, 5), deltas=None, grid: int = 20,
                  encoding: str = "gray", conditioning: str = "acceptance",
                  tol: float = QUAD_TOL) -> list:
    """Tabulate ``p_eq`` and ``i_e`` against rate for every bit of every depth in ``n_list``.

    ``deltas`` is either one sequence used for all depths or a mapping from
    depth to sequence; by default each depth gets :func:`default_deltas`.
    Points whose quadrature fails are kept with NaN values and method
    ``"failed"``.  Rows are ordered by ``(n, bit, delta_t)``.
    """
    _check_conditioning(conditioning)
    against = AGAINST if model.v_electronic > 0 else ("vacuum",)
    grids = {}
    for n in n_list:
        if deltas is None:
            d = default_deltas(n, grid)
        elif isinstance(deltas, dict):
            d = deltas[n]
        else:
            d = deltas
        d = np.asarray(sorted(float(x) for x in d))
        bad = d[(d < 0) | (d >= max_threshold(n))]
        if bad.size:
            raise ValidationError(
                f"thresholds {bad.tolist()} invalid for n={n}; need 0 <= delta < {max_threshold(n)}")
        grids[n] = d

    rows = []
    for n in n_list:
        block = {}
        for delta in grids[n]:
            config = ExtractionConfig(n_bits=n, threshold=delta, encoding=encoding,
                                      v_m=model.v_total)
            try:
                joint, err, p_acc = disagreement_integrals(model, config, against)
                res = {a: _conditioned(joint[a], err[a], p_acc, conditioning) for a in against}
                ok = all(np.all(e <= tol) for _, e in res.values())
                rate = n * p_acc
            except (QuadratureError, ValidationError, FloatingPointError):
                res, ok, rate = {}, False, float("nan")
            for bit in range(1, n + 1):
                p_eq = res["vacuum"][0][bit - 1] if ok else float("nan")
                p_ee = res["electronic"][0][bit - 1] if ok and "electronic" in res else float("nan")
                i_e = float(info_leakage(p_ee)) if math.isfinite(p_ee) else float("nan")
                block[(bit, float(delta))] = SweepRow(n, bit, float(delta), rate, float(p_eq),
                                                      float(p_ee), i_e,
                                                      "quadrature" if ok else "failed")
        rows.extend(block[key] for key in sorted(block))
    return rows


def sweep_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([r.n, r.bit, repr(r.delta_t), repr(r.rate_per_sample), repr(r.p_eq),
                    repr(r.p_ee), repr(r.i_e), r.method])
    return buf.getvalue()


def sweep_to_json(rows) -> str:
    return json.dumps([asdict(r) for r in rows], indent=1)
