"""Command-line front end: ``atomreg spectrum|rabi|echo|run|calibrate``.

Exit codes: 0 success, 1 configuration or parse error, 2 integrator failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path

import numpy as np
from scipy.optimize import curve_fit

from atomreg import __version__
from atomreg.bloch import GAUSSIAN, SQUARE, PulseShape, TwoLevelUnitary, calibrate_pi_pulse, propagate, transfer_spectrum
from atomreg.config import SPECTRUM_PRESETS, RunConfig, load_config, paper_defaults
from atomreg.csvout import dump_csv
from atomreg.dephasing import echo_contrast, echo_contrast_pulsed, position_std, velocity_std
from atomreg.errors import ConfigError, IntegrationError, ProgramError, RegisterError
from atomreg.fieldmap import axial_slope, offset_shift, radial_curvature
from atomreg.constants import KHZ_TO_HZ
from atomreg.pulseprog import compile_program, execute, parse
from atomreg.register import RegisterState

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

DEFAULT_ECHO_TIMES = tuple(float(t) for t in range(50, 1251, 50))


class _Parser(argparse.ArgumentParser):
    # a malformed command line is a configuration error, not argparse's usual 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def _times(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of times: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--config", type=Path, help="YAML/JSON run configuration")
    src.add_argument("--paper-defaults", action="store_true", help="use the built-in reference parameter set (the default)")
    common.add_argument("--out", type=Path, help="output file (default: stdout)")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--trials", type=_positive_int, help="override the Monte-Carlo trial count")
    common.add_argument("--workers", type=int, default=1, help="worker processes")

    p = _Parser(prog="atomreg", description="Neutral-atom register simulator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("spectrum", parents=[common], help="addressing spectrum of a gaussian pi pulse")
    sp.add_argument("--preset", choices=sorted(SPECTRUM_PRESETS), default="c", help="a: 2s=17.7us, b: 35.4us, c: 70.7us")
    sp.add_argument("--sigma-tau", type=float, help="gaussian sigma in us (overrides --preset)")
    sp.add_argument("--range", type=float, default=15.0, dest="span", help="sweep +-range um")
    sp.add_argument("--points", type=int, default=41)

    rp = sub.add_parser("rabi", parents=[common], help="resonant square-pulse Rabi curve")
    rp.add_argument("--max-time", type=float, default=100.0, help="us")
    rp.add_argument("--points", type=int, default=201)

    ep = sub.add_parser("echo", parents=[common], help="spin-echo contrast versus echo time")
    ep.add_argument("--times", type=_times, default=list(DEFAULT_ECHO_TIMES), help="echo times in us, comma separated")
    ep.add_argument("--pulse-length", type=float, help="finite square pi pulse of this length (us)")

    up = sub.add_parser("run", parents=[common], help="parse, compile and execute a pulse program")
    up.add_argument("program", type=Path)
    up.add_argument("--shots", type=_positive_int, default=100)

    sub.add_parser("calibrate", parents=[common], help="print derived calibration constants")
    return p


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else paper_defaults()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.trials is not None:
        cfg = cfg.with_trials(args.trials)
    if args.workers < 1:
        raise ConfigError("--workers must be at least 1")
    return cfg


def _emit(args, text: str) -> None:
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)


# --- spectrum ----------------------------------------------------------------


def _spectrum_rows(shape, cfg, offsets, workers):
    if workers > 1 and len(offsets) > 1:
        parts = np.array_split(np.asarray(offsets), workers)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = pool.map(partial(transfer_spectrum, shape, cfg=cfg), [list(p) for p in parts if len(p)])
            return [pt for chunk in chunks for pt in chunk]
    return transfer_spectrum(shape, offsets, cfg)


def cmd_spectrum(args, cfg: RunConfig) -> int:
    sigma = args.sigma_tau if args.sigma_tau is not None else SPECTRUM_PRESETS[args.preset]
    if args.points < 1:
        raise ConfigError("--points must be at least 1")
    if args.span < 0:
        raise ConfigError("--range must be non-negative")
    shape = calibrate_pi_pulse(GAUSSIAN, sigma)
    offsets = [0.0] if args.points == 1 else [float(x) + 0.0 for x in np.linspace(-args.span, args.span, args.points)]
    points = _spectrum_rows(shape, cfg.field, offsets, args.workers)
    meta = {
        "command": "spectrum",
        "sigma_tau_us": sigma,
        "truncation": shape.truncation,
        "peak_rabi_khz": shape.peak_rabi,
        "axial_slope_khz_per_um": axial_slope(cfg.field),
        **cfg.describe(),
    }
    rows = [(p.offset, p.transfer, p.phase) for p in points]
    _emit(args, dump_csv(None, ["offset_um", "transfer_probability", "phase_rad"], rows, meta))
    return EXIT_OK


# --- rabi ----------------------------------------------------------------------


def rabi_model(t, offset, contrast, period):
    return offset - 0.5 * contrast * np.cos(2 * np.pi * t / period)


def fit_rabi(times, probs, period_guess):
    """Least-squares fit of ``offset - contrast/2 cos(2 pi t / period)``."""
    popt, _ = curve_fit(rabi_model, times, probs, p0=(0.5, 1.0, period_guess))
    return float(popt[1]), float(popt[2])


def cmd_rabi(args, cfg: RunConfig) -> int:
    if args.points < 1:
        raise ConfigError("--points must be at least 1")
    if not args.max_time >= 0:
        raise ConfigError("--max-time must be non-negative")
    times = np.linspace(0.0, args.max_time, args.points)
    rows = []
    for t in times:
        U = propagate(PulseShape(SQUARE, cfg.rabi_khz, float(t))) if t > 0 else TwoLevelUnitary.identity()
        p1 = U.transfer
        rows.append((float(t), p1, float(cfg.detection.detected_one_probability(p1)), U.relative_phase()))
    meta = {"command": "rabi", "pulse": "square", "max_time_us": args.max_time, "points": args.points}
    period_guess = KHZ_TO_HZ / cfg.rabi_khz
    if len(rows) >= 4:
        contrast, period = fit_rabi(times, np.array([r[2] for r in rows]), period_guess)
        meta.update(fit_contrast=contrast, fit_period_us=period)
    meta.update(cfg.describe())
    cols = ["time_us", "transfer_probability", "detected_probability", "phase_rad"]
    _emit(args, dump_csv(None, cols, rows, meta))
    return EXIT_OK


# --- echo ----------------------------------------------------------------------


def cmd_echo(args, cfg: RunConfig) -> int:
    times = args.times
    if not times:
        raise ConfigError("--times is empty")
    if args.pulse_length is not None:
        pulse = calibrate_pi_pulse(SQUARE, args.pulse_length)
        points = echo_contrast_pulsed(cfg.thermal, cfg.field, times, pulse, workers=args.workers)
    else:
        points = echo_contrast(cfg.thermal, cfg.field, times, workers=args.workers)
    meta = {
        "command": "echo",
        "pulses": "ideal" if args.pulse_length is None else f"square pi pulse {args.pulse_length} us",
        **cfg.describe(),
    }
    rows = [(p.echo_time, p.contrast, p.stderr) for p in points]
    _emit(args, dump_csv(None, ["echo_time_us", "contrast", "stderr_estimate"], rows, meta))
    return EXIT_OK


# --- run -----------------------------------------------------------------------


def cmd_run(args, cfg: RunConfig) -> int:
    try:
        source = args.program.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read program {args.program}: {exc}") from None
    geometry = cfg.geometry
    try:
        program = parse(source, cfg.shapes, labels=[g.label for g in geometry])
        sched = compile_program(program, geometry, cfg.field, cfg.dead_time_us)
    except ProgramError as exc:
        print(exc.format(str(args.program)), file=sys.stderr)
        return EXIT_CONFIG
    reg = RegisterState.load(geometry, cfg.seed)
    result = execute(sched, reg, cfg.detection, args.shots, pump_fidelity=cfg.pump_fidelity, workers=args.workers)
    doc = {
        "parameters": cfg.describe(),
        "schedule": sched.to_json(),
        "records": [r.to_json() for r in result.records],
        "counts": result.counts(),
        "ones_fraction": {str(k): v for k, v in result.ones_fraction.items()},
    }
    _emit(args, json.dumps(doc, indent=2) + "\n")
    return EXIT_OK if len(result.records) == args.shots else EXIT_NUMERIC


# --- calibrate -------------------------------------------------------------------


def calibration_table(cfg: RunConfig) -> dict[str, float]:
    curvature = radial_curvature(cfg.field)
    pi_time = KHZ_TO_HZ / (2 * cfg.rabi_khz)
    table = {
        "offset_shift_mhz": offset_shift(cfg.field),
        "axial_slope_khz_per_um": axial_slope(cfg.field),
        "rabi_khz": cfg.rabi_khz,
        "square_pi_time_us": pi_time,
        "square_pi2_time_us": pi_time / 2,
        "radial_curvature_gauss_per_um2": curvature,
        "radial_coefficient_hz_per_um2": curvature * cfg.field.zeeman_coeff * 1e6,
        "position_std_um": position_std(cfg.thermal),
        "velocity_std_um_per_us": velocity_std(cfg.thermal),
        "radial_period_us": cfg.thermal.period,
    }
    for name in sorted(cfg.shapes):
        s = cfg.shapes[name]
        table[f"shape_{name}_peak_rabi_khz"] = s.peak_rabi
    return table


def cmd_calibrate(args, cfg: RunConfig) -> int:
    lines = [f"{k}: {v!r}" for k, v in calibration_table(cfg).items()]
    _emit(args, "\n".join(lines) + "\n")
    return EXIT_OK


COMMANDS = {
    "spectrum": cmd_spectrum,
    "rabi": cmd_rabi,
    "echo": cmd_echo,
    "run": cmd_run,
    "calibrate": cmd_calibrate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except IntegrationError as exc:
        print(f"atomreg: integration failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, RegisterError, ProgramError) as exc:
        print(f"atomreg: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RuntimeError as exc:
        # curve_fit failing to converge
        print(f"atomreg: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
