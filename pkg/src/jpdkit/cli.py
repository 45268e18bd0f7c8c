"""Command-line interface.

Subcommands::

    simulate s21|fluxmap|squeezing --config <json> --seed <n> --out <path>
    fit s21 --in <csv> [--background <csv>] [--constrain-qint-inv LO HI] --out <json>
    fit fluxmap --device jpa|jpc --in <csv> --init <json> --out <json>
    fit squeezing --in <csv> --kappa-ext <Hz> --init <json> --out <json>
    report --in <json> --plot <path>

Exit codes: 0 success, 1 validation error, 2 fit non-convergence. No
command writes partial output on error. Seeds are mandatory for the
stochastic (simulate) commands.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
import warnings
from pathlib import Path

import numpy as np

from . import io as jio
from .constants import CONSTANTS
from .devices import (FluxCalibration, JpaModelParams, JpcModelParams,
                      jpa_frequency, jpc_frequency, resonator_rates)
from .errors import FitError, JpdError, PipelineStageError, TraceFormatError
from .circlefit import fit_reflection
from .fluxfit import (FluxMapPoint, fit_jpa_flux, fit_jpc_flux,
                      flux_from_control, jpa_tunability, jpc_tunability,
                      junction_derived)
from .simulate import (DistortionParams, SweepGrid, add_noise,
                       simulate_reflection, synth_background, synth_grid)
from .squeezing import SqueezingParams, fit_squeezing, model_curve

_TWO_PI = 2.0 * math.pi

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NO_CONVERGENCE = 2


class _ConfigError(ValueError):
    pass


def _cfg_get(cfg: dict, key: str, where: str):
    if key not in cfg:
        raise _ConfigError(f"missing key {key!r} in {where}")
    return cfg[key]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jpdkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate synthetic data")
    sim_sub = sim.add_subparsers(dest="what", required=True)
    for what in ("s21", "fluxmap", "squeezing"):
        p = sim_sub.add_parser(what)
        p.add_argument("--config", required=True, help="JSON scenario configuration")
        p.add_argument("--seed", required=True, type=int, help="RNG seed (required)")
        p.add_argument("--out", required=True, help="output CSV path")

    fit = sub.add_parser("fit", help="run an inverse fit")
    fit_sub = fit.add_subparsers(dest="what", required=True)

    p = fit_sub.add_parser("s21")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--background", default=None)
    p.add_argument("--constrain-qint-inv", nargs=2, type=float, default=None,
                   metavar=("LO", "HI"))
    p.add_argument("--out", required=True)

    p = fit_sub.add_parser("fluxmap")
    p.add_argument("--device", required=True, choices=("jpa", "jpc"))
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--init", required=True, help="JSON initial model parameters")
    p.add_argument("--out", required=True)

    p = fit_sub.add_parser("squeezing")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--kappa-ext", dest="kappa_ext_hz", required=True, type=float,
                   help="fixed external loss rate, linear Hz")
    p.add_argument("--init", required=True, help="JSON initial model parameters")
    p.add_argument("--out", required=True)

    p = sub.add_parser("report", help="emit plot data from a fit report")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--plot", required=True, help="output vector-graphics path (.svg)")
    return parser


# ----------------------------------------------------------------------
# config -> model objects

def _distortion_from_cfg(cfg: dict) -> DistortionParams:
    return DistortionParams(
        amplitude=float(cfg.get("amplitude", 1.0)),
        phase_offset=float(cfg.get("phase_offset_rad", 0.0)),
        delay=float(cfg.get("delay_s", 0.0)),
        tilt=float(cfg.get("tilt_rad", 0.0)),
        fano_offset=complex(float(cfg.get("fano_real", 0.0)),
                            float(cfg.get("fano_imag", 0.0))),
        noise_sigma=float(cfg.get("noise_sigma", 0.0)),
    )


def _grid_from_cfg(cfg: dict) -> SweepGrid:
    return SweepGrid(center=float(_cfg_get(cfg, "center_hz", "grid")),
                     span=float(_cfg_get(cfg, "span_hz", "grid")),
                     count=int(_cfg_get(cfg, "count", "grid")),
                     concentration=float(cfg.get("concentration", 0.0)))


def _jpa_from_cfg(cfg: dict) -> JpaModelParams:
    cal = _cfg_get(cfg, "flux_cal", "jpa parameters")
    return JpaModelParams(
        omega_r=_TWO_PI * float(_cfg_get(cfg, "f_r_hz", "jpa parameters")),
        l_r=float(_cfg_get(cfg, "l_r_h", "jpa parameters")),
        l_loop=float(_cfg_get(cfg, "l_loop_h", "jpa parameters")),
        i_c=float(_cfg_get(cfg, "i_c_a", "jpa parameters")),
        flux_cal=FluxCalibration(float(_cfg_get(cal, "control_offset", "flux_cal")),
                                 float(_cfg_get(cal, "control_period", "flux_cal"))))


def _jpc_from_cfg(cfg: dict) -> JpcModelParams:
    cal = _cfg_get(cfg, "flux_cal", "jpc parameters")
    h = CONSTANTS.h
    return JpcModelParams(
        omega_r_a=_TWO_PI * float(_cfg_get(cfg, "f_r_hz", "jpc parameters")),
        z0=float(_cfg_get(cfg, "z0_ohm", "jpc parameters")),
        e_j=h * float(_cfg_get(cfg, "e_j_over_h_hz", "jpc parameters")),
        e_l=h * float(_cfg_get(cfg, "e_l_over_h_hz", "jpc parameters")),
        flux_cal=FluxCalibration(float(_cfg_get(cal, "control_offset", "flux_cal")),
                                 float(_cfg_get(cal, "control_period", "flux_cal"))))


def _squeezing_from_cfg(cfg: dict, kappa_ext_hz: float | None = None) -> SqueezingParams:
    if kappa_ext_hz is None:
        kappa_ext_hz = float(_cfg_get(cfg, "kappa_ext_hz", "squeezing parameters"))
    return SqueezingParams(
        omega_jpa=_TWO_PI * float(_cfg_get(cfg, "f_jpa_hz", "squeezing parameters")),
        kappa_ext=_TWO_PI * kappa_ext_hz,
        kappa_int=_TWO_PI * float(_cfg_get(cfg, "kappa_int_hz", "squeezing parameters")),
        chi2=_TWO_PI * float(_cfg_get(cfg, "chi2_hz", "squeezing parameters")),
        nj_prefactor=float(_cfg_get(cfg, "nj_prefactor", "squeezing parameters")),
        delta_exp=float(_cfg_get(cfg, "delta_exp", "squeezing parameters")),
        t_att=float(_cfg_get(cfg, "t_att_k", "squeezing parameters")),
        t_mxc=float(_cfg_get(cfg, "t_mxc_k", "squeezing parameters")),
        pump_coupling=float(cfg.get("pump_coupling", 1.0)))


# ----------------------------------------------------------------------
# simulate

def _cmd_simulate(args) -> int:
    if args.seed < 0:
        raise _ConfigError("seed must be an unsigned integer")
    cfg = jio.load_run_config(args.config)

    if args.what == "s21":
        grid = _grid_from_cfg(_cfg_get(cfg, "grid", "config"))
        d = _distortion_from_cfg(cfg.get("distortion", {}))
        freqs = synth_grid(grid)
        kind = cfg.get("kind", "resonator")
        if kind == "background":
            trace = synth_background(freqs, d)
            if d.noise_sigma > 0.0:
                trace = add_noise(trace, d.noise_sigma, args.seed)
        elif kind == "resonator":
            rcfg = _cfg_get(cfg, "resonator", "config")
            params = resonator_rates(float(_cfg_get(rcfg, "q_ext", "resonator")),
                                     float(_cfg_get(rcfg, "q_int", "resonator")),
                                     _TWO_PI * float(_cfg_get(rcfg, "f0_hz", "resonator")))
            trace = simulate_reflection(params, freqs, d, seed=args.seed)
        else:
            raise _ConfigError(f"unknown simulate s21 kind {kind!r}")
        jio.write_trace_csv(trace, args.out)

    elif args.what == "fluxmap":
        device = _cfg_get(cfg, "device", "config")
        sweep = _cfg_get(cfg, "sweep", "config")
        controls = np.linspace(float(_cfg_get(sweep, "control_start", "sweep")),
                               float(_cfg_get(sweep, "control_stop", "sweep")),
                               int(_cfg_get(sweep, "count", "sweep")))
        if device == "jpa":
            params = _jpa_from_cfg(_cfg_get(cfg, "jpa", "config"))
            model = lambda c: jpa_frequency(
                flux_from_control(c, params.flux_cal), params) / _TWO_PI
        elif device == "jpc":
            params = _jpc_from_cfg(_cfg_get(cfg, "jpc", "config"))
            model = lambda c: jpc_frequency(
                flux_from_control(c, params.flux_cal), params) / _TWO_PI
        else:
            raise _ConfigError(f"unknown device {device!r}")
        noise = float(cfg.get("f0_noise_hz", 0.0))
        rng = np.random.default_rng(args.seed)
        points = []
        for c in controls:
            f0 = model(c) + (noise * rng.standard_normal() if noise > 0 else 0.0)
            points.append(FluxMapPoint(control=float(c), f0=float(f0),
                                       f0_err=noise if noise > 0 else None))
        jio.write_fluxmap_csv(points, args.out)

    elif args.what == "squeezing":
        params = _squeezing_from_cfg(_cfg_get(cfg, "params", "config"))
        pw = _cfg_get(cfg, "powers_dbm", "config")
        powers = np.linspace(float(_cfg_get(pw, "start", "powers_dbm")),
                             float(_cfg_get(pw, "stop", "powers_dbm")),
                             int(_cfg_get(pw, "count", "powers_dbm")))
        curve = model_curve(params, powers)
        ncfg = cfg.get("noise", {})
        s_sigma = float(ncfg.get("squeezing_db", 0.0))
        mu_sigma = float(ncfg.get("purity", 0.0))
        rng = np.random.default_rng(args.seed)
        rows = []
        for power, m in zip(powers, curve):
            s = m.s_db + (s_sigma * rng.standard_normal() if s_sigma > 0 else 0.0)
            mu = m.mu + (mu_sigma * rng.standard_normal() if mu_sigma > 0 else 0.0)
            rows.append((float(power), float(s), float(min(mu, 1.0))))
        jio.write_squeezing_csv(rows, args.out)

    return EXIT_OK


# ----------------------------------------------------------------------
# fit payload builders

def _resonator_payload(r) -> dict:
    return {
        "f0_hz": r.f0_hz,
        "kappa_ext_hz": r.kappa_ext / _TWO_PI,
        "kappa_int_hz": r.kappa_int / _TWO_PI,
        "kappa_hz": r.kappa / _TWO_PI,
        "q_ext": r.q_ext,
        "q_int": r.q_int if math.isfinite(r.q_int) else None,
        "q_loaded": r.q_loaded,
    }


def _cmd_fit_s21(args, command):
    digests = {"in": jio.sha256_digest(args.infile)}
    trace = jio.parse_trace_csv(Path(args.infile).read_bytes())
    background = None
    if args.background is not None:
        digests["background"] = jio.sha256_digest(args.background)
        background = jio.parse_trace_csv(Path(args.background).read_bytes())

    qint_inv = tuple(args.constrain_qint_inv) if args.constrain_qint_inv else None
    if qint_inv is not None and qint_inv[0] > qint_inv[1]:
        qint_inv = (qint_inv[1], qint_inv[0])

    report = fit_reflection(trace, background=background, qint_inv_bounds=qint_inv)

    detuning = report.s21mc.frequencies - report.resonator.f0_hz
    centered = report.s21mc.samples - report.circle.center
    centered_model = report.model - report.circle.center
    payload = {
        "type": "reflection-fit",
        "method": report.method,
        "resonator": _resonator_payload(report.resonator),
        "delay_s": report.delay,
        "theta0_rad": report.theta0,
        "circle": {
            "center_re": report.circle.center.real,
            "center_im": report.circle.center.imag,
            "radius": report.circle.radius,
            "rms_residual": report.circle.rms_residual,
        },
        "quality": report.quality,
        "series": {
            "frequency_hz": report.s21mc.frequencies,
            "detuning_hz": detuning,
            "data_real": report.s21mc.samples.real,
            "data_imag": report.s21mc.samples.imag,
            "model_real": report.model.real,
            "model_imag": report.model.imag,
            "phase_data_rad": np.unwrap(np.angle(centered)),
            "phase_model_rad": np.unwrap(np.angle(centered_model)),
        },
    }
    return payload, digests


def _cmd_fit_fluxmap(args, command):
    digests = {"in": jio.sha256_digest(args.infile),
               "init": jio.sha256_digest(args.init)}
    points = jio.parse_fluxmap_csv(Path(args.infile).read_bytes())
    init_cfg = jio.load_json(args.init)

    if args.device == "jpa":
        init = _jpa_from_cfg(init_cfg)
        fitted, result = fit_jpa_flux(points, init)
        model = lambda c: jpa_frequency(
            flux_from_control(c, fitted.flux_cal), fitted) / _TWO_PI
        derived = junction_derived(fitted.i_c)
        params_payload = {
            "f_r_hz": fitted.omega_r / _TWO_PI,
            "l_r_h": fitted.l_r,
            "l_loop_h": fitted.l_loop,
            "i_c_a": fitted.i_c,
            "flux_cal": {"control_offset": fitted.flux_cal.control_offset,
                         "control_period": fitted.flux_cal.control_period},
        }
        zero_flux = jpa_frequency(0.0, fitted) / _TWO_PI
        tunability = jpa_tunability(fitted)
    else:
        init = _jpc_from_cfg(init_cfg)
        fitted, result = fit_jpc_flux(points, init)
        model = lambda c: jpc_frequency(
            flux_from_control(c, fitted.flux_cal), fitted) / _TWO_PI
        derived = junction_derived(fitted.e_j / CONSTANTS.phi0)
        params_payload = {
            "f_r_hz": fitted.omega_r_a / _TWO_PI,
            "z0_ohm": fitted.z0,
            "e_j_over_h_hz": fitted.e_j / CONSTANTS.h,
            "e_l_over_h_hz": fitted.e_l / CONSTANTS.h,
            "shunt_inductance_h": fitted.shunt_inductance,
            "flux_cal": {"control_offset": fitted.flux_cal.control_offset,
                         "control_period": fitted.flux_cal.control_period},
        }
        zero_flux = jpc_frequency(0.0, fitted) / _TWO_PI
        tunability = jpc_tunability(fitted)

    if not result.converged:
        raise FitError("flux-map fit did not converge")

    controls = [p.control for p in points]
    payload = {
        "type": "fluxmap-fit",
        "device": args.device,
        "params": params_payload,
        "derived": {
            "i_c_a": derived.i_c,
            "e_j_over_h_hz": derived.e_j / CONSTANTS.h,
            "l_j0_h": derived.l_j0,
            "zero_flux_f0_hz": zero_flux,
            "tunability_hz": tunability,
        },
        "fit": {"converged": result.converged,
                "iterations": result.iterations,
                "residual_rms": result.residual_rms},
        "series": {
            "control": controls,
            "f0_data_hz": [p.f0 for p in points],
            "f0_model_hz": [model(c) for c in controls],
        },
    }
    return payload, digests


def _cmd_fit_squeezing(args, command):
    digests = {"in": jio.sha256_digest(args.infile),
               "init": jio.sha256_digest(args.init)}
    rows = jio.parse_squeezing_csv(Path(args.infile).read_bytes())
    init_cfg = jio.load_json(args.init)
    init = _squeezing_from_cfg(init_cfg, kappa_ext_hz=args.kappa_ext_hz)

    fitted, result = fit_squeezing(rows, init)
    if not result.converged:
        raise FitError("squeezing fit did not converge")

    powers = [r[0] for r in rows]
    curve = model_curve(fitted, powers)
    payload = {
        "type": "squeezing-fit",
        "params": {
            "f_jpa_hz": fitted.omega_jpa / _TWO_PI,
            "kappa_ext_hz": fitted.kappa_ext / _TWO_PI,
            "kappa_int_hz": fitted.kappa_int / _TWO_PI,
            "q_int": fitted.q_int if math.isfinite(fitted.q_int) else None,
            "chi2_hz": fitted.chi2 / _TWO_PI,
            "nj_prefactor": fitted.nj_prefactor,
            "delta_exp": fitted.delta_exp,
            "t_att_k": fitted.t_att,
            "t_mxc_k": fitted.t_mxc,
            "pump_coupling": fitted.pump_coupling,
        },
        "fit": {"converged": result.converged,
                "iterations": result.iterations,
                "residual_rms": result.residual_rms},
        "series": {
            "pump_power_dbm": powers,
            "s_data_db": [r[1] for r in rows],
            "s_model_db": [m.s_db for m in curve],
            "purity_data": [r[2] for r in rows],
            "purity_model": [m.mu for m in curve],
        },
    }
    return payload, digests


def _cmd_fit(args, command) -> int:
    builder = {"s21": _cmd_fit_s21, "fluxmap": _cmd_fit_fluxmap,
               "squeezing": _cmd_fit_squeezing}[args.what]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        payload, digests = builder(args, command)
    doc = jio.build_report_document(command, digests, payload,
                                    [str(w.message) for w in caught])
    jio.save_json_atomic(doc, args.out)
    return EXIT_OK


# ----------------------------------------------------------------------
# report

def _write_series(stem: Path, name: str, xlabel, x, ylabel, y):
    lines = [f"{xlabel},{ylabel}"]
    lines.extend(f"{float(a)!r},{float(b)!r}" for a, b in zip(x, y))
    path = stem.parent / f"{stem.name}.{name}.csv"
    jio._atomic_write_text(path, "\n".join(lines) + "\n")
    return path


def _cmd_report(args) -> int:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    doc = jio.load_report_document(args.infile)
    payload = doc["result"]
    series = payload.get("series", {})
    plot_path = Path(args.plot)
    stem = plot_path.parent / plot_path.stem
    ptype = payload.get("type")

    if ptype == "reflection-fit":
        f = np.asarray(series["frequency_hz"])
        data = np.asarray(series["data_real"]) + 1j * np.asarray(series["data_imag"])
        model = np.asarray(series["model_real"]) + 1j * np.asarray(series["model_imag"])
        det = np.asarray(series["detuning_hz"])
        _write_series(stem, "magnitude_data", "frequency_hz", f, "abs_s21", np.abs(data))
        _write_series(stem, "magnitude_model", "frequency_hz", f, "abs_s21", np.abs(model))
        _write_series(stem, "circle_data", "s21_real", data.real, "s21_imag", data.imag)
        _write_series(stem, "circle_model", "s21_real", model.real, "s21_imag", model.imag)
        _write_series(stem, "phase_data", "detuning_hz", det, "phase_rad",
                      series["phase_data_rad"])
        _write_series(stem, "phase_model", "detuning_hz", det, "phase_rad",
                      series["phase_model_rad"])

        fig, axes = plt.subplots(1, 3, figsize=(13, 4))
        axes[0].plot(f / 1e9, np.abs(data), ".", ms=3, label="data")
        axes[0].plot(f / 1e9, np.abs(model), "-", lw=1.2, label="fit")
        axes[0].set_xlabel("frequency (GHz)")
        axes[0].set_ylabel("|S21|")
        axes[0].legend()
        axes[1].plot(data.real, data.imag, ".", ms=3)
        axes[1].plot(model.real, model.imag, "-", lw=1.2)
        axes[1].set_xlabel("Re S21")
        axes[1].set_ylabel("Im S21")
        axes[1].set_aspect("equal")
        axes[2].plot(det / 1e6, series["phase_data_rad"], ".", ms=3)
        axes[2].plot(det / 1e6, series["phase_model_rad"], "-", lw=1.2)
        axes[2].set_xlabel("detuning (MHz)")
        axes[2].set_ylabel("phase (rad)")
        fig.tight_layout()

    elif ptype == "fluxmap-fit":
        c = np.asarray(series["control"])
        fd = np.asarray(series["f0_data_hz"])
        fm = np.asarray(series["f0_model_hz"])
        _write_series(stem, "fluxmap_data", "control", c, "f0_hz", fd)
        _write_series(stem, "fluxmap_model", "control", c, "f0_hz", fm)
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(c, fd / 1e9, "o", ms=4, label="data")
        ax.plot(c, fm / 1e9, "-", lw=1.2, label="fit")
        ax.set_xlabel("flux control")
        ax.set_ylabel("resonance frequency (GHz)")
        ax.legend()
        fig.tight_layout()

    elif ptype == "squeezing-fit":
        pw = np.asarray(series["pump_power_dbm"])
        _write_series(stem, "squeezing_data", "pump_power_dbm", pw, "squeezing_db",
                      series["s_data_db"])
        _write_series(stem, "squeezing_model", "pump_power_dbm", pw, "squeezing_db",
                      series["s_model_db"])
        _write_series(stem, "purity_data", "pump_power_dbm", pw, "purity",
                      series["purity_data"])
        _write_series(stem, "purity_model", "pump_power_dbm", pw, "purity",
                      series["purity_model"])
        fig, axes = plt.subplots(2, 1, figsize=(6, 7), sharex=True)
        axes[0].plot(pw, series["s_data_db"], "o", ms=4, label="data")
        axes[0].plot(pw, series["s_model_db"], "-", lw=1.2, label="fit")
        axes[0].set_ylabel("squeezing (dB)")
        axes[0].legend()
        axes[1].plot(pw, series["purity_data"], "o", ms=4)
        axes[1].plot(pw, series["purity_model"], "-", lw=1.2)
        axes[1].set_ylabel("purity")
        axes[1].set_xlabel("pump power (dBm)")
        fig.tight_layout()

    else:
        raise TraceFormatError(f"report payload of unknown type {ptype!r}")

    fd, tmp = tempfile.mkstemp(dir=plot_path.parent or Path("."),
                               prefix=f".{plot_path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        fig.savefig(tmp, format="svg")
        os.replace(tmp, plot_path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
    finally:
        plt.close(fig)
    return EXIT_OK


# ----------------------------------------------------------------------

def run_command(argv) -> int:
    """Parse and execute one CLI invocation; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION

    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "fit":
            return _cmd_fit(args, argv)
        if args.command == "report":
            return _cmd_report(args)
        raise _ConfigError(f"unknown command {args.command!r}")
    except (FitError, PipelineStageError) as exc:
        cause = getattr(exc, "cause", None)
        print(f"jpdkit: {exc}", file=sys.stderr)
        if isinstance(exc, FitError) or isinstance(cause, FitError):
            return EXIT_NO_CONVERGENCE
        return EXIT_VALIDATION
    except (JpdError, _ConfigError, ValueError, OSError, KeyError) as exc:
        print(f"jpdkit: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
