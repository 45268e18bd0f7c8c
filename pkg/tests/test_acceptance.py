"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Run with ``pytest -s tests/test_acceptance.py`` to see every line.
AC5 is expected to fail: with the reference squeezing parameter set the
pump-noise floor (prefactor 0.0069, exponent 0.047) adds ~0.004 to the
squeezed quadrature variance, capping the model purity at the 11.75 dB
squeezing point near 86.5%, far from the 98.96% target; that target is
only reachable if the pump-noise prefactor is an order of magnitude
smaller.
"""

import json
import math
import time
from dataclasses import replace

import numpy as np
import pytest

import jpdkit as j
from jpdkit.cli import run_command
from jpdkit.devices import reflection_circle

from conftest import make_trace

TWO_PI = 2.0 * math.pi

H = j.CONSTANTS.h

AC1_DISTORTION = j.DistortionParams(amplitude=0.7, phase_offset=1.1,
                                    delay=40e-9, tilt=0.1)


def _report(criterion: str, ok: bool, detail: str):
    print(f"{criterion} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"{criterion}: {detail}"


def test_ac1_circle_fit_round_trip_noiseless(jpc_resonator):
    start = time.perf_counter()
    trace = make_trace(jpc_resonator, span_linewidths=20.0, count=1001,
                       concentration=2.0, distortion=AC1_DISTORTION)
    rep = j.fit_reflection(trace)
    elapsed = time.perf_counter() - start

    f0_err = abs(rep.resonator.f0_hz - 5.17e9) / 5.17e9
    qe_err = abs(rep.resonator.q_ext - 4e4) / 4e4
    qi_err = abs(rep.resonator.q_int - 1.2e5) / 1.2e5
    ok = f0_err < 1e-7 and qe_err < 1e-3 and qi_err < 1e-3 and elapsed < 1.0
    _report("AC1", ok,
            f"noiseless round trip: f0 rel err {f0_err:.2e} (<1e-7), "
            f"Q_ext err {qe_err:.2e}, Q_int err {qi_err:.2e} (<1e-3), "
            f"{elapsed:.2f} s (<1 s)")


def test_ac2_circle_fit_round_trip_noisy(jpc_resonator):
    start = time.perf_counter()
    d = replace(AC1_DISTORTION, noise_sigma=0.003)
    qi_errs, qe_errs = [], []
    for seed in range(100):
        trace = make_trace(jpc_resonator, span_linewidths=20.0, count=1001,
                           concentration=2.0, distortion=d, seed=seed)
        rep = j.fit_reflection(trace)
        qi_errs.append(abs(rep.resonator.q_int - 1.2e5) / 1.2e5)
        qe_errs.append(abs(rep.resonator.q_ext - 4e4) / 4e4)
    elapsed = time.perf_counter() - start

    med_qi, med_qe = float(np.median(qi_errs)), float(np.median(qe_errs))
    ok = med_qi < 0.05 and med_qe < 0.02 and elapsed < 30.0
    _report("AC2", ok,
            f"100-seed noisy medians: |Q_int err| {med_qi:.4f} (<0.05), "
            f"|Q_ext err| {med_qe:.4f} (<0.02), {elapsed:.1f} s (<30 s)")


def test_ac3_constrained_overcoupled_fit():
    results = []
    for q_ext_true, q_int_true in [(85.0, 1.1e5), (100.0, 1.3e5), (150.0, 1.5e5)]:
        params = j.resonator_rates(q_ext_true, q_int_true, TWO_PI * 5.6e9)
        d = j.DistortionParams(amplitude=0.8, phase_offset=-0.7, delay=25e-9,
                               tilt=0.05)
        trace = make_trace(params, span_linewidths=10.0, count=801,
                           concentration=1.5, distortion=d)
        background = j.synth_background(trace.frequencies, d)
        rep = j.fit_reflection(trace, background=background,
                               qint_inv_bounds=(5e-6, 1e-5))
        qi = rep.resonator.q_int
        qe_err = abs(rep.resonator.q_ext - q_ext_true) / q_ext_true
        results.append((q_ext_true, qi, qe_err,
                        1.0e5 <= qi <= 2.0e5 and qe_err < 0.03))
    ok = all(r[-1] for r in results)
    detail = "; ".join(f"Q_ext={r[0]:.0f}: Q_int={r[1]:.3g}, Q_ext err {r[2]:.2e}"
                       for r in results)
    _report("AC3", ok, f"constrained background-divide fits: {detail}")


def test_ac4_junction_energy_identities():
    start = time.perf_counter()
    e_jpc = j.junction_derived(0.286e-6).e_j / H
    e_jpa = j.junction_derived(1.380e-6).e_j / H
    elapsed = time.perf_counter() - start

    jpc_err = abs(e_jpc - 144e9) / 144e9
    jpa_err = abs(e_jpa - 685e9) / 685e9
    ok = jpc_err < 0.02 and jpa_err < 0.01 and elapsed < 1e-3
    _report("AC4", ok,
            f"E_J/h from 0.286 uA = {e_jpc/1e9:.2f} GHz (within 2% of 144), "
            f"from 1.380 uA = {e_jpa/1e9:.2f} GHz (within 1% of 685), "
            f"{elapsed*1e6:.0f} us (<1 ms)")


def test_ac5_squeezing_self_consistency():
    start = time.perf_counter()
    params = j.SqueezingParams(
        omega_jpa=TWO_PI * 5.54e9,
        kappa_ext=TWO_PI * 5.54e9 / 100.0,
        kappa_int=TWO_PI * 5.54e9 / 1.26e5,
        chi2=TWO_PI * 840e6,
        nj_prefactor=0.0069, delta_exp=0.047,
        t_att=0.031, t_mxc=0.010)
    chis = np.linspace(1e-6, 0.5 - 1e-9, 20001) * params.kappa
    s_curve = np.array([j.metrics_from_chi(c, params).s_db for c in chis])
    target = 11.75
    above = np.nonzero(s_curve >= target)[0]
    assert above.size > 0, "model never reaches 11.75 dB squeezing"
    k = above[0]
    # linear interpolation onto the crossing
    frac = (target - s_curve[k - 1]) / (s_curve[k] - s_curve[k - 1])
    chi_cross = chis[k - 1] + frac * (chis[k] - chis[k - 1])
    m = j.metrics_from_chi(float(chi_cross), params)
    elapsed = time.perf_counter() - start

    mu_err_pp = abs(m.mu - 0.9896) * 100.0
    ok = mu_err_pp <= 2.0 and elapsed < 1.0
    _report("AC5", ok,
            f"at S = {m.s_db:.2f} dB the model purity is {m.mu*100:.2f}% "
            f"(target 98.96% +- 2pp; deviation {mu_err_pp:.1f}pp), "
            f"{elapsed:.2f} s (<1 s) -- known inconsistency: the pump-noise "
            "floor n_J'(G-1)^delta dominates the squeezed variance here")


def test_ac6_pure_state_invariant():
    params = j.SqueezingParams(
        omega_jpa=TWO_PI * 5.54e9, kappa_ext=TWO_PI * 55.4e6, kappa_int=0.0,
        chi2=TWO_PI * 840e6, nj_prefactor=0.0, delta_exp=0.0,
        t_att=0.0, t_mxc=0.0)
    rng = np.random.default_rng(2024)
    worst = 0.0
    for chi in rng.uniform(0.0, 0.49, 1000) * params.kappa:
        mu = j.metrics_from_chi(float(chi), params).mu
        worst = max(worst, abs(mu - 1.0))
    ok = worst < 1e-9
    _report("AC6", ok, f"pure-state family: max |mu - 1| = {worst:.2e} (<1e-9)")


def test_ac7_flux_map_round_trips():
    start = time.perf_counter()
    jpa_truth = j.JpaModelParams(omega_r=TWO_PI * 6.1e9, l_r=1.77e-9,
                                 l_loop=7.9e-12, i_c=1.38e-6,
                                 flux_cal=j.FluxCalibration(1.0e-4, 1.0e-3))
    jpa_init = j.JpaModelParams(omega_r=TWO_PI * 6.3e9, l_r=1.77e-9,
                                l_loop=7.9e-12, i_c=1.0e-6,
                                flux_cal=j.FluxCalibration(0.0, 0.95e-3))
    jpc_truth = j.JpcModelParams(omega_r_a=TWO_PI * 6.0e9, z0=50.0,
                                 e_j=H * 144e9, e_l=H * 100e9,
                                 flux_cal=j.FluxCalibration(-3e-4, 2.0e-3))
    jpc_init = j.JpcModelParams(omega_r_a=TWO_PI * 6.3e9, z0=50.0,
                                e_j=H * 120e9, e_l=H * 120e9,
                                flux_cal=j.FluxCalibration(0.0, 1.9e-3))

    ic_errs, ej_errs, period_errs = [], [], []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        controls = jpa_truth.flux_cal.control_offset + np.linspace(
            -0.45, 0.45, 41) * jpa_truth.flux_cal.control_period
        pts = [j.FluxMapPoint(
            float(c),
            j.jpa_frequency(j.flux_from_control(c, jpa_truth.flux_cal),
                            jpa_truth) / TWO_PI + 1e5 * rng.standard_normal(),
            1e5) for c in controls]
        fitted, _ = j.fit_jpa_flux(pts, jpa_init)
        ic_errs.append(abs(fitted.i_c - jpa_truth.i_c) / jpa_truth.i_c)
        period_errs.append(abs(fitted.flux_cal.control_period - 1.0e-3) / 1.0e-3)

        controls = jpc_truth.flux_cal.control_offset + np.linspace(
            -1.0, 1.0, 41) * jpc_truth.flux_cal.control_period
        pts = [j.FluxMapPoint(
            float(c),
            j.jpc_frequency(j.flux_from_control(c, jpc_truth.flux_cal),
                            jpc_truth) / TWO_PI + 1e5 * rng.standard_normal(),
            1e5) for c in controls]
        with pytest.warns(RuntimeWarning):
            jfit, _ = j.fit_jpc_flux(pts, jpc_init)
        ej_errs.append(abs(jfit.e_j - jpc_truth.e_j) / jpc_truth.e_j)
        period_errs.append(abs(jfit.flux_cal.control_period - 2.0e-3) / 2.0e-3)
    elapsed = time.perf_counter() - start

    med_ic = float(np.median(ic_errs))
    med_ej = float(np.median(ej_errs))
    med_period = float(np.median(period_errs))
    ok = med_ic < 0.02 and med_ej < 0.02 and med_period < 0.01 and elapsed < 10.0
    _report("AC7", ok,
            f"20-seed medians: I_c err {med_ic:.4f} (<0.02), "
            f"E_J err {med_ej:.4f} (<0.02), period err {med_period:.4f} (<0.01), "
            f"{elapsed:.1f} s (<10 s)")


def test_ac8_reflection_circle_geometry():
    rng = np.random.default_rng(88)
    worst = 0.0
    for _ in range(50):
        params = j.resonator_rates(10 ** rng.uniform(2.0, 5.0),
                                   10 ** rng.uniform(3.0, 6.0),
                                   TWO_PI * 10 ** rng.uniform(9.0, 10.0))
        delta = params.kappa * np.linspace(-40.0, 40.0, 801)
        geom = j.fit_circle(j.ideal_reflection(delta, params))
        center, radius = reflection_circle(params)
        worst = max(worst,
                    abs(geom.center - center),
                    abs(geom.radius - radius))
    ok = worst < 1e-10
    _report("AC8", ok,
            f"fitted circle vs closed form over 50 random resonators: "
            f"max deviation {worst:.2e} (<1e-10)")


def test_ac9_phase_fit_accuracy():
    kappa_true = TWO_PI * 150e3
    params = j.ResonatorParams(omega0=TWO_PI * 5.0e9,
                               kappa_ext=0.75 * kappa_true,
                               kappa_int=0.25 * kappa_true)

    def run(sigma, seed):
        tr = make_trace(params, span_linewidths=25.0, count=1001,
                        distortion=j.DistortionParams(noise_sigma=sigma),
                        seed=seed)
        centered = tr.replace_samples(tr.samples - j.fit_circle(tr.samples).center)
        kappa, _, _ = j.fit_phase(centered)
        return abs(kappa - kappa_true) / kappa_true

    noiseless = run(0.0, None)
    noisy = float(np.median([run(0.003, seed) for seed in range(10)]))
    ok = noiseless < 5e-3 and noisy < 0.02
    _report("AC9", ok,
            f"kappa recovery: noiseless err {noiseless:.2e} (<5e-3), "
            f"10-seed noisy median {noisy:.4f} (<0.02)")


def test_ac10_cli_determinism_and_formats(tmp_path):
    cfg = {
        "schema_version": 1,
        "kind": "resonator",
        "resonator": {"f0_hz": 5.17e9, "q_ext": 4.0e4, "q_int": 1.2e5},
        "grid": {"center_hz": 5.17e9, "span_hz": 20 * 5.17e9 / 3.0e4,
                 "count": 601, "concentration": 2.0},
        "distortion": {"amplitude": 0.7, "phase_offset_rad": 1.1,
                       "delay_s": 4.0e-8, "tilt_rad": 0.1, "noise_sigma": 0.003},
    }
    cfg_path = tmp_path / "sim.json"
    cfg_path.write_text(json.dumps(cfg))

    # byte-stable simulate for a fixed seed
    t1, t2 = tmp_path / "t1.csv", tmp_path / "t2.csv"
    assert run_command(["simulate", "s21", "--config", str(cfg_path),
                        "--seed", "7", "--out", str(t1)]) == 0
    assert run_command(["simulate", "s21", "--config", str(cfg_path),
                        "--seed", "7", "--out", str(t2)]) == 0
    sim_stable = t1.read_bytes() == t2.read_bytes()

    # byte-stable fit payload (timestamp isolated in one key)
    fit_path = tmp_path / "fit.json"
    payloads = []
    for _ in range(2):
        assert run_command(["fit", "s21", "--in", str(t1),
                            "--out", str(fit_path)]) == 0
        doc = json.loads(fit_path.read_text())
        doc.pop("generated_at")
        payloads.append(json.dumps(doc, sort_keys=True))
    fit_stable = payloads[0] == payloads[1]

    # report emits the plot and full-length series
    plot = tmp_path / "plot.svg"
    assert run_command(["report", "--in", str(fit_path),
                        "--plot", str(plot)]) == 0
    doc = json.loads(fit_path.read_text())
    n = len(doc["result"]["series"]["frequency_hz"])
    series_ok = plot.exists()
    for name in ("magnitude_data", "magnitude_model", "circle_data",
                 "circle_model", "phase_data", "phase_model"):
        rows = (tmp_path / f"plot.{name}.csv").read_text().strip().splitlines()
        series_ok = series_ok and len(rows) - 1 == n

    # malformed inputs: specified exit codes, no partial output
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    missing_out = tmp_path / "never.json"
    code_empty = run_command(["fit", "s21", "--in", str(empty),
                              "--out", str(missing_out)])
    code_flag = run_command(["fit", "s21", "--bogus-flag"])
    bad_cfg = tmp_path / "bad.json"
    bad_cfg.write_text(json.dumps({"schema_version": 99}))
    code_schema = run_command(["simulate", "s21", "--config", str(bad_cfg),
                               "--seed", "1", "--out", str(tmp_path / "x.csv")])
    errors_ok = (code_empty == 1 and not missing_out.exists()
                 and code_flag == 1 and code_schema == 1
                 and not (tmp_path / "x.csv").exists())

    ok = sim_stable and fit_stable and series_ok and errors_ok
    _report("AC10", ok,
            f"simulate byte-stable: {sim_stable}; fit payload byte-stable "
            f"(excl. timestamp): {fit_stable}; report series/plot: {series_ok}; "
            f"exit codes & no partial output: {errors_ok}")
