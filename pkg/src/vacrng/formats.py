"""On-disk formats.

Sample file
    One UTF-8 JSON header line ``{"format": 1, "adc_bits": .., "full_scale": ..,
    "count": ..}`` (extra keys allowed) followed by ``count`` little-endian
    int16 ADC codes.  A code maps to ``code * full_scale / 2**(adc_bits - 1)``.

Bit file
    Raw bytes, bits packed MSB-first, final byte zero-padded.

Config file
    Flat ``key = value`` lines; ``#`` starts a comment.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import SampleFormatError, ValidationError
from .extractor import ExtractionConfig
from .noise import NoiseModel, adc_step

SAMPLE_FORMAT_VERSION = 1
SAMPLE_DTYPE = np.dtype("<i2")
MAX_HEADER_BYTES = 1 << 16

MODEL_KEYS = {"v_vacuum", "v_electronic", "clearance_db", "adc_bits", "adc_full_scale", "seed"}
EXTRACTION_KEYS = {"n_bits", "threshold", "keep_mask", "encoding", "v_m"}
KNOWN_KEYS = MODEL_KEYS | EXTRACTION_KEYS


# -- config files ---------------------------------------------------------

def parse_config(text: str) -> dict:
    cfg = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ValidationError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        if key not in KNOWN_KEYS:
            raise ValidationError(f"config line {lineno}: unknown key {key!r}")
        cfg[key] = value.strip()
    return cfg


def load_config(path) -> dict:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def dump_config(cfg: dict) -> str:
    lines = []
    for key, value in cfg.items():
        if isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        elif value is None:
            value = "none"
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def _num(cfg, key, cast=float):
    try:
        return cast(cfg[key])
    except ValueError:
        raise ValidationError(f"config key {key!r}: cannot parse {cfg[key]!r}")


def model_from_config(cfg: dict, seed: int | None = None, default_adc_bits=None) -> NoiseModel:
    """Build a :class:`NoiseModel` from config keys; ``seed`` overrides the file."""
    kwargs = {}
    if "v_vacuum" in cfg:
        kwargs["v_vacuum"] = _num(cfg, "v_vacuum")
    if "clearance_db" in cfg and "v_electronic" in cfg:
        raise ValidationError("give either clearance_db or v_electronic, not both")
    if "v_electronic" in cfg:
        kwargs["v_electronic"] = _num(cfg, "v_electronic")
    adc = cfg.get("adc_bits")
    if adc is None:
        kwargs["adc_bits"] = default_adc_bits
    elif adc.lower() != "none":
        kwargs["adc_bits"] = _num(cfg, "adc_bits", int)
    if "adc_full_scale" in cfg:
        kwargs["adc_full_scale"] = _num(cfg, "adc_full_scale")
    if seed is not None:
        kwargs["rng_seed"] = int(seed)
    elif "seed" in cfg:
        kwargs["rng_seed"] = _num(cfg, "seed", int)
    if "clearance_db" in cfg:
        return NoiseModel.from_clearance(_num(cfg, "clearance_db"), **kwargs)
    return NoiseModel(**kwargs)


def parse_keep_mask(text: str) -> tuple:
    try:
        return tuple(int(p) for p in text.replace(" ", "").split(",") if p)
    except ValueError:
        raise ValidationError(f"keep_mask must be a comma list of integers, got {text!r}")


def extraction_from_config(cfg: dict, v_m: float | None = None) -> ExtractionConfig:
    """Build an :class:`ExtractionConfig`; ``v_m`` fills in when the file omits it."""
    kwargs = {}
    if "n_bits" in cfg:
        kwargs["n_bits"] = _num(cfg, "n_bits", int)
    if "threshold" in cfg:
        kwargs["threshold"] = _num(cfg, "threshold")
    if "keep_mask" in cfg:
        kwargs["keep_mask"] = parse_keep_mask(cfg["keep_mask"])
    if "encoding" in cfg:
        kwargs["encoding"] = cfg["encoding"].lower()
    if "v_m" in cfg:
        kwargs["v_m"] = _num(cfg, "v_m")
    elif v_m is not None:
        kwargs["v_m"] = v_m
    else:
        raise ValidationError("v_m is required (run calibrate, or give model variances)")
    return ExtractionConfig(**kwargs)


# -- sample files ---------------------------------------------------------

def sample_header(adc_bits: int, full_scale: float, count: int, **extra) -> dict:
    return {"format": SAMPLE_FORMAT_VERSION, "adc_bits": int(adc_bits),
            "full_scale": float(full_scale), "count": int(count), **extra}


def write_samples(path, header: dict, chunks) -> int:
    """Write a sample file; ``chunks`` yields integer code arrays.  Returns codes written."""
    _check_header(header)
    lo, hi = -(1 << (header["adc_bits"] - 1)), (1 << (header["adc_bits"] - 1)) - 1
    written = 0
    with open(path, "wb") as f:
        f.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
        for chunk in chunks:
            chunk = np.asarray(chunk)
            if chunk.size and (chunk.min() < lo or chunk.max() > hi):
                raise SampleFormatError("code outside the converter range")
            f.write(chunk.astype(SAMPLE_DTYPE).tobytes())
            written += chunk.size
    if written != header["count"]:
        raise SampleFormatError(f"header declares {header['count']} samples, wrote {written}")
    return written


def _check_header(header) -> dict:
    if not isinstance(header, dict) or header.get("format") != SAMPLE_FORMAT_VERSION:
        raise SampleFormatError(f"unsupported sample format header: {header!r}")
    try:
        bits, fs, count = int(header["adc_bits"]), float(header["full_scale"]), int(header["count"])
    except (KeyError, TypeError, ValueError):
        raise SampleFormatError(f"header lacks adc_bits/full_scale/count: {header!r}")
    if not 2 <= bits <= 16:
        raise SampleFormatError(f"int16 sample files need 2 <= adc_bits <= 16, got {bits}")
    if not (math.isfinite(fs) and fs > 0) or count < 0:
        raise SampleFormatError(f"invalid full_scale or count in header: {header!r}")
    return header


class SampleFile:
    """Reader for the sample file format."""

    def __init__(self, path):
        self.path = Path(path)
        if self.path.stat().st_size == 0:
            # a zero-byte file is an empty capture
            self.header, self.data_offset = None, 0
            return
        with open(self.path, "rb") as f:
            line = f.readline(MAX_HEADER_BYTES)
            self.data_offset = f.tell()
        if not line.endswith(b"\n"):
            raise SampleFormatError(f"{path}: missing newline-terminated JSON header")
        try:
            header = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise SampleFormatError(f"{path}: malformed header ({exc})")
        self.header = _check_header(header)
        size = self.path.stat().st_size - self.data_offset
        if size != 2 * self.count:
            raise SampleFormatError(
                f"{path}: header declares {self.count} samples but payload holds {size} bytes")

    @property
    def adc_bits(self) -> int | None:
        return None if self.header is None else int(self.header["adc_bits"])

    @property
    def full_scale(self) -> float | None:
        return None if self.header is None else float(self.header["full_scale"])

    @property
    def count(self) -> int:
        return 0 if self.header is None else int(self.header["count"])

    @property
    def step(self) -> float:
        return adc_step(self.adc_bits, self.full_scale)

    def iter_codes(self, chunk: int = 1 << 18) -> Iterator[np.ndarray]:
        if self.count == 0:
            return
        with open(self.path, "rb") as f:
            f.seek(self.data_offset)
            remaining = self.count
            while remaining:
                k = min(chunk, remaining)
                yield np.frombuffer(f.read(2 * k), dtype=SAMPLE_DTYPE).astype(np.int32)
                remaining -= k

    def iter_values(self, chunk: int = 1 << 18) -> Iterator[np.ndarray]:
        for codes in self.iter_codes(chunk):
            yield codes * self.step

    def values(self) -> np.ndarray:
        parts = list(self.iter_values())
        return np.concatenate(parts) if parts else np.zeros(0)


# -- bit files ------------------------------------------------------------

def read_bits(path, nbits: int | None = None) -> np.ndarray:
    """Unpack a bit file into a 0/1 uint8 array, optionally truncated to ``nbits``."""
    data = np.fromfile(path, dtype=np.uint8)
    bits = np.unpackbits(data)
    if nbits is not None:
        if nbits > bits.size:
            raise SampleFormatError(f"{path}: holds {bits.size} bits, {nbits} requested")
        bits = bits[:nbits]
    return bits
