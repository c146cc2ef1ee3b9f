"""Homodyne signal model: vacuum noise plus electronic noise, optionally digitized.

The measured value is ``x_m = quantize(x_v + x_e)`` with ``x_v ~ N(0, v_vacuum)``
and ``x_e ~ N(0, v_electronic)`` independent.  Variances are in shot-noise
units, so ``v_vacuum`` defaults to 1 and the electronic noise is usually given
as a clearance in dB below it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from .errors import NonPhysicalError, StreamTooShortError, ValidationError

#: Default ADC half-range in standard deviations of the measured signal.
FULL_SCALE_SIGMAS = 5.0

#: Minimum stream length accepted by :func:`estimate_variances`.
MIN_CALIBRATION_SAMPLES = 1000


@dataclass(frozen=True)
class NoiseModel:
    """Parameters of the simulated source.

    Parameters
    ----------
    v_vacuum : float
        Variance of the vacuum quadrature ``x_v``.
    v_electronic : float
        Variance of the electronic noise ``x_e``.
    adc_bits : int or None
        Resolution of the midtread quantizer, or None for an ideal,
        unquantized measurement.
    adc_full_scale : float or None
        Quantizer half-range.  None selects ``5 * sqrt(v_vacuum + v_electronic)``.
    rng_seed : int
        Seed for every random stream derived from this model.
    """

    v_vacuum: float = 1.0
    v_electronic: float = 10 ** -0.85
    adc_bits: int | None = None
    adc_full_scale: float | None = None
    rng_seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.v_vacuum) and self.v_vacuum > 0):
            raise ValidationError(f"v_vacuum must be > 0, got {self.v_vacuum}")
        if not (math.isfinite(self.v_electronic) and self.v_electronic >= 0):
            raise ValidationError(f"v_electronic must be >= 0, got {self.v_electronic}")
        if self.adc_bits is not None:
            if isinstance(self.adc_bits, bool) or int(self.adc_bits) != self.adc_bits:
                raise ValidationError(f"adc_bits must be an integer, got {self.adc_bits!r}")
            if not 2 <= self.adc_bits <= 24:
                raise ValidationError(f"adc_bits must be in [2, 24], got {self.adc_bits}")
            if self.adc_full_scale is not None and not self.adc_full_scale > 0:
                raise ValidationError(
                    f"adc_full_scale must be > 0, got {self.adc_full_scale}")
        if not 0 <= int(self.rng_seed) < 2 ** 64:
            raise ValidationError(f"rng_seed must fit in 64 unsigned bits, got {self.rng_seed}")

    @classmethod
    def from_clearance(cls, clearance_db: float, v_vacuum: float = 1.0, **kwargs) -> "NoiseModel":
        """Build a model whose electronic noise sits ``clearance_db`` below the vacuum noise."""
        if not math.isfinite(clearance_db):
            raise ValidationError(f"clearance_db must be finite, got {clearance_db}")
        return cls(v_vacuum=v_vacuum, v_electronic=v_vacuum * 10 ** (-clearance_db / 10),
                   **kwargs)

    @property
    def clearance_db(self) -> float:
        if self.v_electronic == 0:
            raise ValidationError("clearance is undefined for v_electronic = 0")
        return 10 * math.log10(self.v_vacuum / self.v_electronic)

    @property
    def v_total(self) -> float:
        return self.v_vacuum + self.v_electronic

    @property
    def full_scale(self) -> float | None:
        if self.adc_bits is None:
            return None
        if self.adc_full_scale is not None:
            return float(self.adc_full_scale)
        return FULL_SCALE_SIGMAS * math.sqrt(self.v_total)

    @property
    def step(self) -> float | None:
        if self.adc_bits is None:
            return None
        return adc_step(self.adc_bits, self.full_scale)

    def quantize(self, x):
        return quantize(x, self.adc_bits, self.full_scale)


class LabeledSample(NamedTuple):
    """One measurement with its latent components (None when unknown)."""

    x_m: float
    x_v: float | None = None
    x_e: float | None = None


class LabeledSamples(NamedTuple):
    """A batch of labeled samples stored column-wise."""

    x_m: np.ndarray
    x_v: np.ndarray
    x_e: np.ndarray

    def __len__(self):
        return len(self.x_m)

    def __iter__(self) -> Iterator[LabeledSample]:
        for m, v, e in zip(self.x_m.tolist(), self.x_v.tolist(), self.x_e.tolist()):
            yield LabeledSample(m, v, e)


def adc_step(adc_bits: int, full_scale: float) -> float:
    """Quantizer step: one code corresponds to ``full_scale / 2**(adc_bits - 1)``."""
    return full_scale / 2 ** (adc_bits - 1)


def code_range(adc_bits: int) -> tuple[int, int]:
    """Smallest and largest code of a two's-complement ``adc_bits`` converter."""
    half = 1 << (adc_bits - 1)
    return -half, half - 1


def quantize_codes(x, adc_bits: int, full_scale: float):
    """Integer codes of a midtread quantizer with saturation.

    Values are clamped to ``[-full_scale, full_scale]`` and rounded to the
    nearest multiple of the step; the top code is ``2**(adc_bits-1) - 1`` so
    positive full scale saturates one step below ``full_scale``.
    """
    step = adc_step(adc_bits, full_scale)
    lo, hi = code_range(adc_bits)
    x = np.clip(np.asarray(x, dtype=float), -full_scale, full_scale)
    codes = np.clip(np.rint(x / step), lo, hi)
    return codes.astype(np.int32) if codes.ndim else int(codes)


def quantize(x, adc_bits: int | None, full_scale: float | None = None):
    """Reconstructed value of the midtread quantizer; identity when ``adc_bits`` is None."""
    if adc_bits is None:
        return x
    if full_scale is None or not full_scale > 0:
        raise ValidationError("quantize needs a positive full_scale")
    return quantize_codes(x, adc_bits, full_scale) * adc_step(adc_bits, full_scale)


class SampleStream:
    """Reproducible source of simulated samples.

    The vacuum and electronic components come from independent child streams
    of the model seed, so drawing in chunks yields exactly the same values as
    one large draw.  A third child stream feeds :meth:`draw_measured`, which
    skips the latents and samples ``x_v + x_e`` directly from
    ``N(0, v_vacuum + v_electronic)``.  A stream is single-consumer.
    """

    def __init__(self, model: NoiseModel, electronic_only: bool = False):
        self.model = model
        self.electronic_only = electronic_only
        vac, ele, meas = np.random.SeedSequence(int(model.rng_seed)).spawn(3)
        self.vacuum_rng = np.random.Generator(np.random.PCG64(vac))
        self.electronic_rng = np.random.Generator(np.random.PCG64(ele))
        self.measured_bitgen = np.random.PCG64(meas)
        self.measured_rng = np.random.Generator(self.measured_bitgen)

    def draw(self, count: int) -> LabeledSamples:
        count = _check_count(count)
        m = self.model
        if self.electronic_only:
            x_v = np.zeros(count)
        else:
            x_v = math.sqrt(m.v_vacuum) * self.vacuum_rng.standard_normal(count)
        if m.v_electronic > 0:
            x_e = math.sqrt(m.v_electronic) * self.electronic_rng.standard_normal(count)
        else:
            x_e = np.zeros(count)
        return LabeledSamples(m.quantize(x_v + x_e), x_v, x_e)

    def draw_measured(self, count: int) -> np.ndarray:
        """Measured values only, one normal draw per sample."""
        count = _check_count(count)
        m = self.model
        var = m.v_electronic if self.electronic_only else m.v_total
        return m.quantize(math.sqrt(var) * self.measured_rng.standard_normal(count))


def _check_count(count) -> int:
    if isinstance(count, bool) or int(count) != count or count < 1:
        raise ValidationError(f"count must be a positive integer, got {count!r}")
    return int(count)


def simulate_samples(model: NoiseModel, count: int) -> LabeledSamples:
    """Draw ``count`` labeled samples; deterministic given ``model.rng_seed``."""
    return SampleStream(model).draw(count)


def iter_samples(model: NoiseModel, count: int, chunk: int = 1 << 18) -> Iterator[LabeledSamples]:
    """Chunked version of :func:`simulate_samples`; concatenation equals one draw."""
    count = _check_count(count)
    stream = SampleStream(model)
    done = 0
    while done < count:
        k = min(chunk, count - done)
        yield stream.draw(k)
        done += k


def estimate_variances(measured, electronic_only):
    """Calibrate variances from a measured stream and a dark (electronic-only) stream.

    Returns
    -------
    (v_m, v_e, clearance_db)
        Unbiased sample variances and ``10 log10((v_m - v_e) / v_e)``.
    """
    measured = np.asarray(measured, dtype=float)
    electronic_only = np.asarray(electronic_only, dtype=float)
    for name, arr in (("measured", measured), ("electronic_only", electronic_only)):
        if arr.size < MIN_CALIBRATION_SAMPLES:
            raise StreamTooShortError(
                f"{name} stream has {arr.size} samples, need >= {MIN_CALIBRATION_SAMPLES}")
    v_m = float(np.var(measured, ddof=1))
    v_e = float(np.var(electronic_only, ddof=1))
    if v_e <= 0:
        raise NonPhysicalError("electronic noise variance is zero; clearance is undefined")
    if v_m <= v_e:
        raise NonPhysicalError(
            f"measured variance {v_m:.6g} does not exceed electronic variance {v_e:.6g}")
    return v_m, v_e, 10 * math.log10((v_m - v_e) / v_e)
