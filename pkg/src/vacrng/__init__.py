"""Random bits from modeled vacuum-noise homodyne measurements.

Simulate the measured signal (:mod:`vacrng.noise`), extract bits by
uniformization, Gray-coded binning and thresholding (:mod:`vacrng.extractor`),
quantify how closely they follow the vacuum noise and how much the electronic
noise reveals (:mod:`vacrng.metrics`), and check the output statistically
(:mod:`vacrng.randtests`).
"""

from ._backend import BACKEND
from .errors import (NonPhysicalError, QuadratureError, SampleFormatError,
                     StreamTooShortError, ValidationError)
from .extractor import (BitBlock, ExtractionConfig, StreamExtractor, extract, extract_batch,
                        generation_rate, gray_decode, gray_encode, p_thr, partition_index,
                        threshold_accept, uniformize)
from .metrics import (MetricsReport, compute_report, conditional_density,
                      error_prob_montecarlo, error_prob_quadrature, info_leakage,
                      reference_bit, sweep_figure3)
from .noise import (LabeledSample, NoiseModel, estimate_variances, quantize,
                    simulate_samples)
from .randtests import TestResult, battery_report, chi_square_uniformity, run_battery

__version__ = "0.1.0"
