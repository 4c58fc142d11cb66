"""Command-line front end.

    spinmem spectrum --config run.cfg --out out/
    spinmem protocol --config run.cfg --out out/ [--plot]
    spinmem sweep    --config run.cfg --out out/ --jobs 4
    spinmem design   --config er_yso.cfg --out out/
    spinmem validate --config run.cfg

Exit codes: 0 success, 2 configuration/validation error, 3 numerical failure.
Every command writes ``manifest.json`` into the output directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__, analytic, config, export
from .analytic import NoDip, ResolutionError, Unbounded
from .dynamics import IntegratorError
from .model import C_LIGHT, TWO_PI, ValidationError, absorption_coefficient, classify_regime, derive
from .noise import design_quality, noise_budget
from .protocol import (FidelityUndefined, delay_compensated_fidelity, echo_group_delay, run_many, run_protocol,
                       with_cooperativity)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
US = config.US


class _Run:
    """Output directory, manifest and warning capture for one command."""

    def __init__(self, command: str, raw: config.RawConfig, out: Path):
        self.out = out
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest = export.RunManifest(command, raw.path, raw.digest, __version__)
        conv = config.convention(raw)
        self.freq_scale = conv.factor
        self.freq_unit = "MHz" if conv.is_angular else "MHz (cycles)"

    def emit(self, path: Path) -> Path:
        self.manifest.add_output(path, self.out)
        return path

    def finish(self, caught) -> None:
        for w in caught:
            msg = f"{w.category.__name__}: {w.message}"
            if msg not in self.manifest.warnings:
                self.manifest.warnings.append(msg)
        self.manifest.write(self.out / "manifest.json")


def _protocol_diagnostics(cfg, result) -> dict:
    return {
        "dt_us": cfg.step() / US,
        "n_bins": cfg.n_bins,
        "truncation_p": cfg.truncation_p,
        "energy_imbalance": result.ledger.relative_imbalance if result.ledger else math.nan,
    }


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_spectrum(raw: config.RawConfig, run: _Run, args) -> int:
    ens = config.ensemble_from(raw)
    grid = config.spectrum_grid_from(raw, ens)
    kappas = list(grid.kappas) or [config.cavity_from(raw, ens).kappa]
    base = config.cavity_from(raw, ens, kappa=kappas[0])
    surface = np.empty((len(kappas), grid.omegas.size))
    closed = ens.dist_kind.value == "lorentzian"
    bins = None if closed else config.discretize_for_spectrum(raw, ens)
    dips = []
    for i, k in enumerate(kappas):
        cav = dataclasses.replace(base, kappa=k)
        if closed:
            surface[i] = analytic.reflection(grid.omegas, ens, cav)
        else:
            r = analytic.steady_state_oracle(bins, grid.omegas, ens, cav, smoothing=2.0)
            surface[i] = np.abs(r) ** 2
        try:
            refl = analytic.ReflectionSpectrum(grid.omegas, surface[i], ens, cav)
            dips.extend((k, c, w) for c, w in analytic.dip_fwhm(refl))
        except (NoDip, ResolutionError):
            pass
    s = run.freq_scale
    run.emit(export.write_surface(run.out / "spectrum.csv", kappas, grid.omegas, surface, s))
    run.emit(export.write_rows(run.out / "dips.csv", ("kappa", "center", "fwhm"),
                               ((k / s, c / s, w / s) for k, c, w in dips)))
    run.manifest.diagnostics.update({"omega_points": int(grid.omegas.size), "kappa_points": len(kappas),
                                     "closed_form": closed})
    if args.plot:
        from .plotting import plot_spectrum
        run.emit(plot_spectrum(run.out / "spectrum.png", grid.omegas / s, np.asarray(kappas) / s, surface,
                               run.freq_unit))
    return EXIT_OK


def cmd_protocol(raw: config.RawConfig, run: _Run, args) -> int:
    cfg = config.protocol_from(raw)
    res = run_protocol(cfg)
    s = run.freq_scale
    run.emit(export.write_results(run.out / "result.csv", [res], s))
    run.emit(export.write_trace(run.out / "trace.csv", res.trace, US))
    run.emit(export.write_events(run.out / "events.csv", res.trace.events, US))
    if res.noise_budget is not None:
        run.emit(export.write_budget(run.out / "budget.csv", [res.noise_budget]))
    run.manifest.diagnostics.update(_protocol_diagnostics(cfg, res))
    run.manifest.diagnostics.update({"echo_centroid_us": res.echo_centroid / US, "reflected": res.reflected,
                                   "echo_delay_predicted_us": echo_group_delay(cfg.ensemble, cfg.cavity) / US})
    try:
        fid, shift = delay_compensated_fidelity(res.trace, cfg)
        run.manifest.diagnostics.update({"fidelity_delay_compensated": fid, "echo_delay_us": shift / US})
    except FidelityUndefined:
        pass
    run.manifest.warnings.extend(res.flags)
    if args.plot:
        from .plotting import plot_trace
        run.emit(plot_trace(run.out / "trace.png", res.trace, res.trace.events, US))
    print(f"eta_measured={res.eta_measured:.6g} eta_predicted={res.eta_predicted:.6g} "
          f"leakage={res.first_echo_leakage:.3g} fidelity={res.shape_fidelity:.6g}")
    return EXIT_OK


def _sweep_config(cfg, var: str, value: float):
    if var == "c":
        return with_cooperativity(cfg, value)
    if var == "kappa":
        return dataclasses.replace(cfg, cavity=dataclasses.replace(cfg.cavity, kappa=value))
    if var == "delta":
        return dataclasses.replace(cfg, detune_delta=value)
    return dataclasses.replace(cfg, ensemble=dataclasses.replace(cfg.ensemble, gamma_h=value))


def cmd_sweep(raw: config.RawConfig, run: _Run, args) -> int:
    base = config.protocol_from(raw)
    var, values = config.sweep_values_from(raw)
    cfgs = [_sweep_config(base, var, v) for v in values]
    for c in cfgs:
        c.validate()
    jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
    results = run_many(cfgs, jobs)
    s = 1.0 if var == "c" else run.freq_scale
    shown = [v / s for v in values]
    run.emit(export.write_results(run.out / "sweep.csv", results, run.freq_scale, lead=(f"sweep_{var}", shown)))
    run.manifest.diagnostics.update({
        "variable": var, "points": len(values), "jobs": jobs, "dt_us": [c.step() / US for c in cfgs],
        "n_bins": base.n_bins, "truncation_p": base.truncation_p,
        "energy_imbalance_max": max(abs(r.ledger.relative_imbalance) for r in results),
    })
    for r in results:
        run.manifest.warnings.extend(f for f in r.flags if f not in run.manifest.warnings)
    if args.plot:
        from .plotting import plot_sweep
        cols = {"eta_measured": [r.eta_measured for r in results], "eta_predicted": [r.eta_predicted for r in results]}
        if var == "delta":
            cols = {"leakage": [max(r.first_echo_leakage, 1e-16) for r in results]}
        run.emit(plot_sweep(run.out / "sweep.png", shown, cols, var, logy=var == "delta"))
    return EXIT_OK


def cmd_design(raw: config.RawConfig, run: _Run, args) -> int:
    required = ("ensemble.collective_coupling_mhz", "ensemble.gamma_inh_mhz", "ensemble.gamma_h_mhz",
                "design.t1_s", "design.duration_us", "design.tau1_us", "design.tau2_us")
    missing = [k for k in required if not raw.has(k)]
    if not (raw.has("cavity.wavelength_m") or raw.has("cavity.length_m") or raw.has("design.frequency_ghz")):
        missing.append("cavity.wavelength_m | cavity.length_m | design.frequency_ghz")
    if missing:
        raise config.ConfigParseError("design block incomplete, missing: " + ", ".join(missing), None, raw.path)
    ens = config.ensemble_from(raw)
    v = raw.get_float("cavity.phase_velocity_m_s", C_LIGHT)
    wavelength = raw.get_float("cavity.wavelength_m")
    if wavelength is None and raw.has("design.frequency_ghz"):
        wavelength = v / (raw.get_float("design.frequency_ghz") * 1e9)
    length = raw.get_float("cavity.length_m")
    if length is None:
        length = wavelength / 2.0
    if wavelength is None:
        wavelength = 2.0 * length
    if not (length > 0 and wavelength > 0):
        raise ValidationError("cavity length and wavelength must be > 0")
    T = raw.get_float("design.duration_us") * US
    tau1 = raw.get_float("design.tau1_us") * US
    tau2 = raw.get_float("design.tau2_us") * US
    t1 = raw.get_float("design.t1_s")
    kstar = analytic.impedance_match_kappa(ens)
    alpha = absorption_coefficient(ens.collective_coupling, ens.gamma_inh, v)
    alpha_l = alpha * length
    finesse = math.pi * v / (2.0 * length * kstar)
    q = design_quality(alpha, wavelength)
    q_res = (TWO_PI * v / wavelength) / (2.0 * kstar)
    try:
        modes = analytic.multimode_capacity(kstar, ens.gamma_h)
    except Unbounded:
        modes = "unbounded"
    t2 = 1.0 / ens.gamma_h if ens.gamma_h > 0 else None
    budget = noise_budget(finesse, 1.0, kstar, T, tau1, tau2, t1, alpha_l=alpha_l, t2=t2)
    eta = analytic.total_efficiency(1.0, tau1, tau2, t2)
    row = [kstar / run.freq_scale, alpha, alpha_l, finesse, q.q_from_identity, q.q_paper_formula, q_res, modes, eta,
           budget.eta_noise, budget.snr_collective, budget.snr_spontaneous, ";".join(budget.flags)]
    run.emit(export.write_rows(run.out / "design.csv", export.DESIGN_HEADER, [row]))
    run.manifest.diagnostics.update({"wavelength_m": wavelength, "length_m": length})
    run.manifest.warnings.extend(budget.flags)
    for name, val in zip(export.DESIGN_HEADER, row):
        print(f"{name:>16s} = {export.fmt(val)}")
    return EXIT_OK


def cmd_validate(raw: config.RawConfig, run: _Run, args) -> int:
    ens = config.ensemble_from(raw)
    rows = [("collective_coupling", ens.collective_coupling / run.freq_scale),
            ("gamma_inh", ens.gamma_inh / run.freq_scale)]
    if raw.has("cavity.kappa_mhz") or raw.has("cavity.cooperativity"):
        cav = config.cavity_from(raw, ens)
        duration = raw.get_float("protocol.duration_us")
        d = derive(ens, cav, None if duration is None else duration * US)
        rows += [("kappa", cav.kappa / run.freq_scale), ("cooperativity", d.cooperativity), ("regime", d.regime.value),
                 ("finesse", d.finesse), ("quality", d.quality), ("alpha_l", d.alpha_l)]
        if duration is not None:
            rows.append(("bad_cavity_ordering_ok", d.bad_cavity_ordering_ok))
        if raw.has("protocol.duration_us"):
            cfg = config.protocol_from(raw)
            rep = classify_regime(cfg.ensemble, cfg.cavity, cfg.duration)
            rows += [(f"margin:{k}", m) for k, m in rep.margins.items()]
            rows += [("dt_us", cfg.step() / US), ("n_bins", cfg.n_bins)]
    run.emit(export.write_rows(run.out / "validate.csv", ("quantity", "value"), rows))
    for k, v in rows:
        print(f"{k} = {export.fmt(v)}")
    return EXIT_OK


COMMANDS = {
    "spectrum": cmd_spectrum,
    "protocol": cmd_protocol,
    "sweep": cmd_sweep,
    "design": cmd_design,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spinmem", description="Cavity-enhanced spin-echo memory simulator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="key = value configuration file")
        sp.add_argument("--out", default="out", help="output directory (default: ./out)")
        sp.add_argument("--jobs", type=int, default=None, help="parallel workers (default: all cores)")
        sp.add_argument("--plot", action="store_true", help="also render PNG figures")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs is not None and args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        raw = config.load(args.config)
        run = _Run(args.command, raw, Path(args.out))
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            code = COMMANDS[args.command](raw, run, args)
        run.finish(caught)
        return code
    except (ValidationError, analytic.NoMatchExists, analytic.RegimeError, analytic.UnsupportedClosedForm) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegratorError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
