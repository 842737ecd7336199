"""Command-line entry point: ``sureblock {denoise,bench,sure-trace}``."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, dwt
from .bench import SIGNALS, ExperimentConfig, run_experiment
from .pipeline import DenoiseConfig, Method, denoise, estimate_sigma
from .shrinkage import candidate_thresholds, minimize_sure, sure

log = logging.getLogger("sureblock")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_LENGTH, EXIT_CELLS = 0, 2, 3, 4, 5


class InputError(Exception):
    """Malformed signal file."""


class LengthError(Exception):
    """Signal length unusable for the requested transform."""


def fmt(value: float) -> str:
    # shortest string that parses back to the same double
    return repr(float(value))


def read_signal(path: str | Path) -> np.ndarray:
    """One real per line; leading lines starting with '#' are headers; blank lines are skipped."""
    values = []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text:
            continue
        if text.startswith("#"):
            if values:
                raise InputError(f"{path}:{lineno}: header line after data")
            continue
        try:
            v = float(text)
        except ValueError:
            raise InputError(f"{path}:{lineno}: not a number: {text!r}") from None
        if not math.isfinite(v):
            raise InputError(f"{path}:{lineno}: non-finite value {text!r}")
        values.append(v)
    if not values:
        raise InputError(f"{path}: no data")
    return np.array(values)


def write_signal(path: str | Path, values) -> None:
    with open(path, "w", newline="\n") as fh:
        for v in values:
            fh.write(fmt(v) + "\n")


@dataclass
class RunManifest:
    command: str
    config: dict
    tool_version: str = __version__
    base_seed: int | None = None
    inputs: dict = field(default_factory=dict)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


def _manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def _sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _sigma_arg(text: str) -> float | None:
    if text.lower() == "auto":
        return None
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--sigma expects 'auto' or a number, got {text!r}") from None
    if not value >= 0 or math.isinf(value):
        raise argparse.ArgumentTypeError(f"--sigma must be a finite value >= 0, got {text!r}")
    return value


def _list_arg(kind):
    def parse(text: str):
        try:
            return tuple(kind(part) for part in text.split(",") if part.strip())
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return parse


def _method_arg(text: str) -> str:
    try:
        return Method.parse(text).value
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _method_list(text: str) -> tuple[str, ...]:
    return tuple(_method_arg(p.strip()) for p in text.split(",") if p.strip())


def _function_list(text: str) -> tuple[str, ...]:
    names = tuple(p.strip().lower() for p in text.split(",") if p.strip())
    bad = [n for n in names if n not in SIGNALS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown test signal(s) {bad}; choose from {list(SIGNALS)}")
    return names


def _add_transform_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--wavelet", choices=sorted(dwt.FILTERS), default="sym8")
    p.add_argument("--j0", type=int, default=3)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sureblock", description="SURE-tuned block thresholding wavelet denoiser")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("denoise", help="denoise a signal file")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--method", type=_method_arg, default="sureblock",
                   help="sureblock|visu|sureshrink|blockjs|garrote")
    _add_transform_flags(p)
    p.add_argument("--sigma", type=_sigma_arg, default=None, help="'auto' or a fixed noise level")
    p.add_argument("--diagnostics", help="write per-level CSV here")

    p = sub.add_parser("bench", help="run a simulation grid")
    p.add_argument("--functions", type=_function_list, default=("blocks", "bumps", "heavisine", "doppler"))
    p.add_argument("--n", type=_list_arg(int), default=(256, 1024, 4096))
    p.add_argument("--snr", type=_list_arg(float), default=(7.0,))
    p.add_argument("--methods", type=_method_list, default=tuple(m.value for m in Method))
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_transform_flags(p)

    p = sub.add_parser("sure-trace", help="dump the SURE surface of one level")
    p.add_argument("--input", required=True)
    where = p.add_mutually_exclusive_group(required=True)
    where.add_argument("--level", type=int)
    where.add_argument("--raw", action="store_true", help="input is a bare coefficient vector")
    p.add_argument("--sigma", type=_sigma_arg, default=None)
    p.add_argument("--output", help="CSV path (default: stdout)")
    _add_transform_flags(p)
    return parser


def _check_length(y: np.ndarray, j0: int) -> None:
    try:
        J = dwt.dyadic_level(y.size)
    except ValueError as exc:
        raise LengthError(str(exc)) from None
    if J < j0 + 1:
        raise LengthError(f"length {y.size} too short for --j0 {j0}; need at least {2 ** (j0 + 1)}")


def cmd_denoise(args) -> int:
    y = read_signal(args.input)
    _check_length(y, args.j0)
    config = DenoiseConfig(args.wavelet, args.j0, args.method, args.sigma)
    report = denoise(y, config)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    out = Path(args.output)
    write_signal(out, report.estimate)
    if args.diagnostics:
        with open(args.diagnostics, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["level", "branch", "L_star", "lambda_star", "sure_value", "coeff_count"])
            for lv in report.per_level:
                w.writerow([lv.level, lv.branch, lv.block_size, fmt(lv.threshold), fmt(lv.sure_value), lv.coeff_count])
    RunManifest(
        "denoise",
        {"method": config.method.value, "wavelet": config.filter, "j0": config.j0,
         "sigma": "auto" if config.sigma is None else config.sigma, "diagnostics": args.diagnostics},
        inputs={"input": str(args.input), "sha256": _sha256(args.input), "sigma_hat": report.sigma_hat},
    ).write(_manifest_path(out))
    return EXIT_OK


def _threads() -> int:
    raw = os.environ.get("SUREBLOCK_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        log.warning("ignoring SUREBLOCK_THREADS=%r", raw)
        return 1
    return (os.cpu_count() or 1) if n <= 0 else n


def cmd_bench(args) -> int:
    try:
        config = ExperimentConfig(args.functions, args.n, args.snr, args.methods, args.reps,
                                  args.seed, args.wavelet, args.j0)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    result = run_experiment(config, workers=_threads())
    out = Path(args.out)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["function", "n", "snr", "method", "rep", "seed", "ase", "sigma_hat"])
        for r in result.records:
            w.writerow([r.function, r.n, fmt(r.snr), r.method, r.rep, r.seed, fmt(r.ase), fmt(r.sigma_used)])
    summary = out.with_name(out.stem + "_summary" + out.suffix)
    with open(summary, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["function", "n", "snr", "method", "mean_ase", "ratio_to_sureblock"])
        for s in result.summary:
            w.writerow([s.function, s.n, fmt(s.snr), s.method, fmt(s.mean_ase), fmt(s.ratio_to_sureblock)])
    cfg = asdict(config)
    RunManifest("bench", cfg, base_seed=config.seed).write(_manifest_path(out))
    if result.failures:
        print(f"{len(result.failures)} cell(s) failed:", file=sys.stderr)
        for cell, err in result.failures:
            print(f"  {cell}: {err}", file=sys.stderr)
        return EXIT_CELLS
    return EXIT_OK


def sure_trace_rows(x: np.ndarray):
    """Yield ``(L, lambda, sure, is_argmin)`` for every evaluated candidate of ``x``."""
    best = minimize_sure(x)
    for L in range(1, math.isqrt(x.size) + 1):
        for lam in candidate_thresholds(x, L):
            yield L, float(lam), sure(x, lam, L), bool(L == best.L_star and lam == best.lambda_star)


def cmd_sure_trace(args) -> int:
    v = read_signal(args.input)
    if args.raw:
        coeffs = v
        sigma = args.sigma
        if sigma is None:
            sigma = float(np.median(np.abs(coeffs)) / 0.6745)
        if sigma == 0:
            print("warning: noise level is zero; using the coefficients unscaled", file=sys.stderr)
            sigma = 1.0
        x = coeffs / sigma
    else:
        _check_length(v, args.j0)
        pyr = dwt.forward(v, args.wavelet, args.j0)
        if args.level not in pyr.levels:
            print(f"error: --level {args.level} outside {pyr.j0}..{pyr.J - 1}", file=sys.stderr)
            return EXIT_USAGE
        sigma = estimate_sigma(pyr) if args.sigma is None else args.sigma
        if sigma == 0:
            print("warning: noise level is zero; using the coefficients unscaled", file=sys.stderr)
            sigma_n = 1.0
        else:
            sigma_n = sigma / math.sqrt(pyr.n)
        x = pyr.level(args.level) / sigma_n
    fh = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["L", "lambda", "sure", "argmin"])
        for L, lam, val, hit in sure_trace_rows(x):
            w.writerow([L, fmt(lam), fmt(val), int(hit)])
    finally:
        if args.output:
            fh.close()
    return EXIT_OK


COMMANDS = {"denoise": cmd_denoise, "bench": cmd_bench, "sure-trace": cmd_sure_trace}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except LengthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LENGTH


if __name__ == "__main__":
    sys.exit(main())
