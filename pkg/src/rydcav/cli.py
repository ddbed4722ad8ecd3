"""Batch command-line front end.

Commands: simulate-rabi, simulate-ramsey, fit-rabi, fit-ramsey,
resonator-response, synth. Each run reads a flat key-value config, writes
comma-separated tables plus a run_metadata.json with every resolved
parameter, and is deterministic for a given config and seed.

Exit codes: 0 success, 2 config error, 3 data error, 4 fit did not converge
(outputs are still written).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, parse_config
from .errors import (
    ConfigError,
    DataFormatError,
    FlatSpectrumError,
    ModelEvaluationError,
    RydcavError,
    SingularNormalMatrixError,
)
from .datasets import read_dataset, write_dataset
from .experiment import (
    RabiTrace,
    RamseyConfig,
    Spectrum,
    simulate_rabi_trace,
    simulate_ramsey_spectrum,
)
from .fitting import (
    estimate_ramsey_guess,
    fit_rabi,
    fit_ramsey_spectrum,
    generate_synthetic_spectrum,
)
from .bloch import AtomParams
from .models import RabiParams, rabi_population
from .resonator import ResonatorMode, lorentzian_power_response

log = logging.getLogger("rydcav")

COMMANDS = (
    "simulate-rabi",
    "simulate-ramsey",
    "fit-rabi",
    "fit-ramsey",
    "resonator-response",
    "synth",
)

THREADS_ENV_VAR = "RYDCAV_THREADS"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NOT_CONVERGED = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rydcav",
        description="Simulate and fit resonator-driven two-photon Rabi and "
        "Ramsey experiments.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="flat key-value config file")
    parser.add_argument("--data", help="input dataset (required by fit commands)")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument(
        "--threads",
        type=int,
        help=f"worker threads for spectrum scans (default: ${THREADS_ENV_VAR} or 1)",
    )
    parser.add_argument("--verbose", action="store_true")
    return parser


def _resolve_threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get(THREADS_ENV_VAR)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer %s=%r", THREADS_ENV_VAR, env)
    return 1


def _write_table(path: Path, names, columns):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(names) + "\n")
        for row in zip(*columns):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _write_fit_params(path: Path, result):
    names = ["parameter,value,uncertainty"]
    sig = result.uncertainties
    for name, value in result.params.items():
        names.append(f"{name},{value!r},{sig[name]!r}")
    path.write_text("\n".join(names) + "\n", encoding="utf-8")


def _write_metadata(out_dir: Path, command, cfg: RunConfig, seed, threads,
                    outputs, fit=None):
    record = {
        "command": command,
        "config_path": cfg.source,
        "config": cfg.entries,
        "seed": seed,
        "threads": threads,
        "outputs": sorted(outputs),
        "versions": {"rydcav": __version__, "numpy": np.__version__},
    }
    if fit is not None:
        record["fit"] = fit
    path = out_dir / "run_metadata.json"
    path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _fit_record(result):
    return {
        "converged": bool(result.converged),
        "iterations": int(result.n_iterations),
        "reduced_chi_square": (
            None
            if not np.isfinite(result.reduced_chi_square)
            else float(result.reduced_chi_square)
        ),
        "parameters": {k: float(v) for k, v in result.params.items()},
        "uncertainties": {k: float(v) for k, v in result.uncertainties.items()},
        "metadata": dict(result.metadata),
    }


def _load_dataset(path, want):
    if path is None:
        raise ConfigError("this command requires --data <dataset>")
    try:
        data = read_dataset(path)
    except OSError as exc:
        raise DataFormatError(f"cannot read dataset {path}: {exc}") from exc
    if not isinstance(data, want):
        raise DataFormatError(
            f"{path}: expected a {want.__name__} dataset, got "
            f"{type(data).__name__}"
        )
    return data


def _cmd_resonator_response(cfg: RunConfig, args, out_dir, threads, seed):
    mode = cfg.mode()
    grid = cfg.frequency_grid()
    response = lorentzian_power_response(mode, grid)
    out = out_dir / "resonator_response.csv"
    _write_table(out, ("frequency_hz", "relative_power"),
                 (grid / (2 * np.pi), response))
    return EXIT_OK, [out.name], None


def _cmd_simulate_rabi(cfg: RunConfig, args, out_dir, threads, seed):
    trace = simulate_rabi_trace(
        cfg.atom(), cfg.mode(), cfg.rabi_carrier(), cfg.rabi_durations(),
        cfg.amplitude(),
    )
    out = out_dir / "rabi_trace.csv"
    write_dataset(trace, out)
    return EXIT_OK, [out.name], None


def _cmd_simulate_ramsey(cfg: RunConfig, args, out_dir, threads, seed):
    spectrum = simulate_ramsey_spectrum(cfg.atom(), cfg.mode(), cfg.ramsey(),
                                        workers=threads)
    out = out_dir / "ramsey_spectrum.csv"
    write_dataset(spectrum, out)
    return EXIT_OK, [out.name], None


def _cmd_synth(cfg: RunConfig, args, out_dir, threads, seed):
    spectrum = generate_synthetic_spectrum(
        cfg.atom(), cfg.mode(), cfg.ramsey(), cfg.noise_sigma(), seed,
    )
    out = out_dir / "ramsey_synthetic.csv"
    write_dataset(spectrum, out)
    return EXIT_OK, [out.name], None


def _cmd_fit_rabi(cfg: RunConfig, args, out_dir, threads, seed):
    trace = _load_dataset(args.data, RabiTrace)
    result = fit_rabi(trace, max_iterations=cfg.max_iterations())
    params = RabiParams(
        omega0=result.params["omega0"],
        delta=result.params["delta"],
        t2=result.params["t2"],
    )
    model = rabi_population(trace.durations, params)
    out = out_dir / "rabi_fit.csv"
    write_dataset(trace, out, extra_columns={"model": model})
    params_out = out_dir / "fit_params.csv"
    _write_fit_params(params_out, result)
    code = EXIT_OK if result.converged else EXIT_NOT_CONVERGED
    return code, [out.name, params_out.name], _fit_record(result)


def _cmd_fit_ramsey(cfg: RunConfig, args, out_dir, threads, seed):
    spectrum = _load_dataset(args.data, Spectrum)
    tail = cfg.get("sequence.ring_down_tail_s")
    ramsey_cfg = RamseyConfig(
        pulse_duration=cfg.get_float("sequence.pulse_duration_s"),
        gap=cfg.get_float("sequence.gap_s"),
        drive_amplitude=cfg.amplitude(),
        frequency_grid=spectrum.omega_grid,
        ring_down_tail=float(tail) if tail is not None else None,
    )
    atom_base = cfg.atom_for_fit()
    guess = estimate_ramsey_guess(spectrum, ramsey_cfg)
    result = fit_ramsey_spectrum(
        spectrum, ramsey_cfg, atom_base, guess,
        max_iterations=cfg.max_iterations(), workers=threads,
    )
    mode_fit = ResonatorMode(result.params["omega_res"], result.params["q_factor"])
    atom_fit = AtomParams(atom_base.omega_atom, result.params["g_star"],
                          atom_base.gamma)
    model = simulate_ramsey_spectrum(atom_fit, mode_fit, ramsey_cfg,
                                     workers=threads).population
    out = out_dir / "ramsey_fit.csv"
    write_dataset(spectrum, out, extra_columns={"model": model})
    params_out = out_dir / "fit_params.csv"
    _write_fit_params(params_out, result)
    code = EXIT_OK if result.converged else EXIT_NOT_CONVERGED
    return code, [out.name, params_out.name], _fit_record(result)


_DISPATCH = {
    "resonator-response": _cmd_resonator_response,
    "simulate-rabi": _cmd_simulate_rabi,
    "simulate-ramsey": _cmd_simulate_ramsey,
    "synth": _cmd_synth,
    "fit-rabi": _cmd_fit_rabi,
    "fit-ramsey": _cmd_fit_ramsey,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    threads = _resolve_threads(args)
    seed = cfg.seed(override=args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    try:
        code, outputs, fit = _DISPATCH[args.command](cfg, args, out_dir,
                                                     threads, seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FlatSpectrumError, SingularNormalMatrixError,
            ModelEvaluationError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except RydcavError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    outputs = outputs + ["run_metadata.json"]
    _write_metadata(out_dir, args.command, cfg, seed, threads, outputs, fit=fit)
    if code == EXIT_NOT_CONVERGED:
        print("fit did not converge; outputs written and flagged",
              file=sys.stderr)
    log.info("wrote %s to %s", ", ".join(sorted(outputs)), out_dir)
    return code


def entry_point():
    raise SystemExit(main())
