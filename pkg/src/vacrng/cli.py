"""Command-line front end.

Every file written is accompanied by ``<file>.manifest.json`` recording the
command, config paths and hash, seed, inputs, outputs and package version, so
a run can be repeated bit for bit.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 battery failure
(``test --strict``).
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from ._backend import BACKEND
from .errors import QuadratureError, ValidationError
from .extractor import PRESETS, ExtractionConfig
from .formats import (EXTRACTION_KEYS, SampleFile, dump_config, extraction_from_config,
                      load_config, model_from_config, read_bits)
from .metrics import (AGAINST, CONDITIONINGS, compute_report, sweep_figure3, sweep_to_csv,
                      sweep_to_json)
from .noise import NoiseModel, estimate_variances
from .pipeline import DEFAULT_SAMPLE_RATE, extract_file, simulate_to_file, throughput
from .randtests import SUITE, battery_report

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_BATTERY = 0, 1, 2, 3
SIMULATE_ADC_BITS = 12


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors map to the validation exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


# -- helpers --------------------------------------------------------------

def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _canonical_hash(obj) -> str:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _model_echo(model: NoiseModel) -> dict:
    return {"v_vacuum": model.v_vacuum, "v_electronic": model.v_electronic,
            "adc_bits": model.adc_bits, "adc_full_scale": model.adc_full_scale,
            "seed": int(model.rng_seed)}


def write_manifest(out_path, command: str, args, parameters: dict, inputs=(), outputs=()):
    """Write the provenance record next to ``out_path``; returns its path."""
    config_paths = [str(args.config)] if getattr(args, "config", None) else []
    manifest = {
        "command": command,
        "config_paths": config_paths,
        "config_hash": _canonical_hash(parameters),
        "parameters": parameters,
        "seed": parameters.get("seed"),
        "inputs": [{"path": str(p), "sha256": _sha256(p)} for p in inputs],
        "outputs": [{"path": str(p), "sha256": _sha256(p)} for p in outputs],
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "version": __version__,
        "backend": BACKEND,
    }
    path = Path(str(out_path) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _load(args) -> dict:
    return load_config(args.config) if getattr(args, "config", None) else {}


def _has_model(cfg) -> bool:
    return bool({"v_vacuum", "v_electronic", "clearance_db"} & cfg.keys())


def _extraction(args, cfg: dict, v_m: float | None) -> ExtractionConfig:
    """Extraction settings from ``--regime`` or the config file."""
    if "v_m" in cfg:
        v_m = float(cfg["v_m"])
    if getattr(args, "v_m", None) is not None:
        v_m = args.v_m
    if args.regime:
        if v_m is None:
            raise ValidationError("v_m is required (run calibrate, or give model variances)")
        encoding = cfg.get("encoding", "gray")
        return ExtractionConfig.preset(args.regime, v_m=v_m, encoding=encoding)
    return extraction_from_config({k: v for k, v in cfg.items() if k in EXTRACTION_KEYS}, v_m=v_m)


def _emit(text: str, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _parse_list(text: str, cast, name: str):
    try:
        return [cast(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ValidationError(f"{name} must be a comma-separated list, got {text!r}")


# -- commands -------------------------------------------------------------

def cmd_simulate(args) -> int:
    if args.count < 1:
        raise ValidationError(f"--count must be positive, got {args.count}")
    model = model_from_config(_load(args), seed=args.seed, default_adc_bits=SIMULATE_ADC_BITS)
    header = simulate_to_file(model, args.count, args.out, electronic_only=args.electronic_only)
    params = {"model": _model_echo(model), "count": args.count,
              "electronic_only": args.electronic_only, "seed": int(model.rng_seed)}
    write_manifest(args.out, "simulate", args, params, outputs=[args.out])
    print(json.dumps(header, sort_keys=True))
    return EXIT_OK


def cmd_calibrate(args) -> int:
    measured = SampleFile(args.measured).values()
    electronic = SampleFile(args.electronic).values()
    v_m, v_e, clearance = estimate_variances(measured, electronic)
    result = {"v_m": v_m, "v_electronic": v_e, "clearance_db": clearance,
              "samples": int(measured.size), "electronic_samples": int(electronic.size)}
    inputs = [args.measured, args.electronic]
    if args.out:
        cfg = {k: v for k, v in _load(args).items() if k in EXTRACTION_KEYS}
        cfg["v_m"] = repr(v_m)
        text = (f"# calibrated from {args.measured} and {args.electronic}\n"
                f"# v_electronic = {v_e!r}\n# clearance_db = {clearance!r}\n"
                + dump_config(cfg))
        Path(args.out).write_text(text, encoding="utf-8")
        write_manifest(args.out, "calibrate", args, {"result": result, "seed": None},
                       inputs=inputs, outputs=[args.out])
    print(json.dumps(result, sort_keys=True))
    return EXIT_OK


def cmd_extract(args) -> int:
    cfg = _load(args)
    sf = SampleFile(args.samples)
    v_m = None
    if _has_model(cfg):
        v_m = model_from_config(cfg).v_total
    elif sf.header is not None and "v_vacuum" in sf.header and "v_electronic" in sf.header:
        if sf.header.get("electronic_only"):
            v_m = float(sf.header["v_electronic"])
        else:
            v_m = float(sf.header["v_vacuum"]) + float(sf.header["v_electronic"])
    config = _extraction(args, cfg, v_m)
    summary = extract_file(args.samples, config, args.out, sample_rate=args.sample_rate)
    summary_path = args.summary or str(args.out) + ".summary.json"
    Path(summary_path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                  encoding="utf-8")
    params = {"extraction": config.to_dict(), "regime": args.regime,
              "sample_rate": args.sample_rate, "seed": None}
    write_manifest(args.out, "extract", args, params, inputs=[args.samples],
                   outputs=[args.out, summary_path])
    for w in summary["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _against(args):
    return AGAINST if args.against == "both" else (args.against,)


def cmd_metrics(args) -> int:
    cfg = _load(args)
    model = model_from_config(cfg, seed=args.seed)
    config = _extraction(args, cfg, model.v_total)
    report = compute_report(model, config, method=args.method, against=_against(args),
                            mc_samples=args.mc_samples, conditioning=args.conditioning)
    if args.format == "json":
        text = report.to_json() + "\n"
    else:
        text = sweep_to_csv(report.to_sweep_rows())
    _emit(text, args.out)
    if args.out:
        params = {"model": _model_echo(model), "extraction": config.to_dict(),
                  "method": args.method, "against": list(_against(args)),
                  "mc_samples": args.mc_samples, "conditioning": args.conditioning,
                  "format": args.format, "seed": int(model.rng_seed)}
        write_manifest(args.out, "metrics", args, params, outputs=[args.out])
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    model = model_from_config(cfg, seed=args.seed)
    n_list = tuple(_parse_list(args.n, int, "--n"))
    deltas = _parse_list(args.deltas, float, "--deltas") if args.deltas else None
    rows = sweep_figure3(model, n_list=n_list, deltas=deltas, grid=args.grid,
                         encoding=cfg.get("encoding", "gray"), conditioning=args.conditioning)
    text = sweep_to_csv(rows) if args.format == "csv" else sweep_to_json(rows) + "\n"
    _emit(text, args.out)
    if args.out:
        params = {"model": _model_echo(model), "n": list(n_list), "deltas": deltas,
                  "grid": args.grid, "conditioning": args.conditioning,
                  "format": args.format, "seed": int(model.rng_seed)}
        write_manifest(args.out, "sweep", args, params, outputs=[args.out])
    return EXIT_OK


def cmd_test(args) -> int:
    nbits = args.nbits
    if nbits is None:
        summary = Path(str(args.bits) + ".summary.json")
        if summary.exists():
            nbits = int(json.loads(summary.read_text(encoding="utf-8"))["bits_emitted"])
    bits = read_bits(args.bits, nbits)
    suite = _parse_list(args.suite, str, "--suite") if args.suite else None
    report = battery_report(bits, alpha=args.alpha, suite=suite)
    _emit(report.to_json() + "\n", args.out)
    if args.out:
        params = {"nbits": int(bits.size), "suite": suite, "alpha": args.alpha,
                  "strict": args.strict, "seed": None}
        write_manifest(args.out, "test", args, params, inputs=[args.bits], outputs=[args.out])
    for r in report.results:
        print(f"{r.test_name:24s} p={r.p_value:.4g} {r.verdict}", file=sys.stderr)
    print(f"failures {report.failures} / budget {report.budget}: "
          f"{'PASS' if report.passed else 'FAIL'}", file=sys.stderr)
    if args.strict and not report.passed:
        return EXIT_BATTERY
    return EXIT_OK


def cmd_bench(args) -> int:
    from . import _pycore
    cfg = _load(args)
    model = model_from_config(cfg, seed=args.seed, default_adc_bits=SIMULATE_ADC_BITS)
    config = _extraction(args, cfg, model.v_total)
    backends = []
    if args.backend in ("both", "cython"):
        try:
            from . import _core
            backends.append(_core)
        except ImportError:
            if args.backend == "cython":
                raise ValidationError("compiled core is not built")
    if args.backend in ("both", "python"):
        backends.append(_pycore)
    results = [throughput(model, config, count=args.count, backend=b) for b in backends]
    text = json.dumps(results, indent=2, sort_keys=True) + "\n"
    _emit(text, args.out)
    for r in results:
        print(f"{r['backend']:8s} {r['bits_per_second'] / 1e6:9.1f} Mbit/s "
              f"({r['samples_per_second'] / 1e6:.1f} Msample/s)", file=sys.stderr)
    return EXIT_OK


# -- parser ---------------------------------------------------------------

def _add_common(p, seed=True):
    p.add_argument("--config", type=Path, help="key = value config file")
    if seed:
        p.add_argument("--seed", type=int, help="RNG seed (overrides the config)")


def _add_extraction(p):
    p.add_argument("--regime", choices=sorted(PRESETS), help="preset operating point")
    p.add_argument("--v-m", type=float, dest="v_m", help="measured-signal variance override")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vacrng", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="write simulated ADC samples")
    _add_common(p)
    p.add_argument("--count", type=int, required=True, help="number of samples")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--electronic-only", action="store_true",
                   help="record the electronic noise alone (vacuum input blocked)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="estimate v_m and clearance from sample files")
    _add_common(p, seed=False)
    p.add_argument("measured", type=Path, help="sample file of the measured signal")
    p.add_argument("electronic", type=Path, help="capture with the vacuum input blocked")
    p.add_argument("--out", type=Path, help="write an extraction config with v_m")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("extract", help="extract bits from a sample file")
    _add_common(p, seed=False)
    _add_extraction(p)
    p.add_argument("samples", type=Path)
    p.add_argument("--out", type=Path, required=True, help="packed bit file")
    p.add_argument("--summary", type=Path, help="summary JSON (default <out>.summary.json)")
    p.add_argument("--sample-rate", type=float, default=DEFAULT_SAMPLE_RATE)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("metrics", help="per-bit error probabilities and leakage")
    _add_common(p)
    _add_extraction(p)
    p.add_argument("--against", choices=(*AGAINST, "both"), default="both")
    p.add_argument("--method", choices=("quadrature", "monte-carlo"), default="quadrature")
    p.add_argument("--mc-samples", type=int, default=10**6)
    p.add_argument("--conditioning", choices=CONDITIONINGS, default="acceptance")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("sweep", help="metrics over a grid of n and threshold")
    _add_common(p)
    p.add_argument("--n", default="1,2,3,4,5", help="comma list of bits per sample")
    p.add_argument("--grid", type=int, default=20, help="threshold points per n")
    p.add_argument("--deltas", help="explicit comma list of thresholds (overrides --grid)")
    p.add_argument("--conditioning", choices=CONDITIONINGS, default="acceptance")
    p.add_argument("--format", choices=("json", "csv"), default="csv")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("test", help="run the statistical battery on a bit file")
    p.add_argument("bits", type=Path)
    p.add_argument("--nbits", type=int, help="bits to test (default: from the extract summary)")
    p.add_argument("--suite", help="comma list from: " + ",".join(SUITE))
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--strict", action="store_true", help="exit 3 when the battery fails")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("bench", help="sustained simulate -> extract throughput")
    _add_common(p)
    _add_extraction(p)
    p.add_argument("--count", type=int, default=1 << 24)
    p.add_argument("--backend", choices=("both", "cython", "python"), default="both")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_bench, regime="full")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, QuadratureError) as exc:
        print(f"vacrng {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"vacrng {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
