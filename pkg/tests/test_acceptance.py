"""Acceptance criteria 1-12, each at its stated tolerance.

Run with pytest (a PASS/FAIL summary is printed at the end of the session) or
directly: ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import dataclasses
import functools
import math
import shutil
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from spinmem import analytic, cli, export
from spinmem.analytic import dip_fwhm, reflection, reflection_spectrum
from spinmem.dynamics import discretize
from spinmem.model import C_LIGHT, TWO_PI, CavityParams, EnsembleParams, absorption_coefficient
from spinmem.noise import collective_noise_probability, design_quality, snr_collective
from spinmem.protocol import (delay_compensated_fidelity, echo_group_delay, reference_config, run_protocol, suppression_scan,
                              with_cooperativity)

ROOT = Path(__file__).resolve().parents[1]
C_VALUES = (0.25, 0.5, 1.0, 2.0, 4.0)

try:
    from conftest import ACCEPTANCE
except ImportError:  # run as a script from another directory
    ACCEPTANCE = {}


@functools.lru_cache(maxsize=None)
def reference_run():
    return run_protocol(reference_config())


@functools.lru_cache(maxsize=None)
def c_sweep(scale: float):
    base = reference_config(scale)
    rows, times = [], []
    for c in C_VALUES:
        t0 = time.perf_counter()
        rows.append(run_protocol(with_cooperativity(base, c), keep_trace=False))
        times.append(time.perf_counter() - t0)
    return rows, times


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------


def criterion_1():
    t0 = time.perf_counter()
    e = EnsembleParams.from_collective(9.0, 27.0)
    cav = CavityParams(analytic.impedance_match_kappa(e))
    r0 = reflection(0.0, e, cav)
    w = np.linspace(-3 * 27.0, 3 * 27.0, 601)
    err = analytic.oracle_discrepancy(discretize("lorentzian", 27.0, 10_000, 0.01), w, e, cav)["relative"]
    dt = time.perf_counter() - t0
    ok = r0 <= 1e-10 and err <= 2e-2 and dt < 1.0
    return ok, f"R(0)={r0:.2e} (<=1e-10), oracle rel err={err:.2e} (<=2e-2), runtime={dt:.2f}s (<1s)"


def _surface(gsn, gamma, kappas, omegas):
    e = EnsembleParams.from_collective(gsn, gamma)
    return np.array([reflection(omegas, e, CavityParams(k)) for k in kappas])


def criterion_2():
    t0 = time.perf_counter()
    # single-dip set
    k_top = np.round(np.arange(1, 198) * 0.1, 10)
    w_top = np.linspace(-40.0, 40.0, 8001)
    s_top = _surface(7.0, 10.0, k_top, w_top)
    i = int(np.argmin(np.abs(k_top - 4.9)))
    row = s_top[i]
    dips_top = dip_fwhm(reflection_spectrum(w_top, EnsembleParams.from_collective(7.0, 10.0), CavityParams(k_top[i])))
    top_ok = (row.min() <= 1e-6 and abs(w_top[np.argmin(row)]) < 1e-9 and len(dips_top) == 1
              and k_top[np.argmin(s_top.min(axis=1))] == pytest.approx(4.9))
    # split set
    k_bot = np.array([0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 5.0, 10.0, 20.0, 40.0, 80.0, 160.0, 360.0])
    w_bot = np.linspace(-60.0, 60.0, 120001)
    s_bot = _surface(30.0, 2.5, k_bot, w_bot)
    j = int(np.where(k_bot == 2.5)[0][0])
    row = s_bot[j]
    neg, pos = row[w_bot < 0], row[w_bot > 0]
    w_neg, w_pos = w_bot[w_bot < 0][np.argmin(neg)], w_bot[w_bot > 0][np.argmin(pos)]
    bot_ok = (neg.min() <= 1e-6 and pos.min() <= 1e-6 and abs(abs(w_neg) - 30) < 0.5 and abs(w_pos - 30) < 0.5
              and row[np.argmin(np.abs(w_bot))] > 0.5)
    dt = time.perf_counter() - t0
    ok = top_ok and bot_ok and dt < 5.0
    return ok, (f"single dip min R={s_top[i].min():.1e} at kappa=4.9, omega=0; split minima "
                f"{neg.min():.1e}/{pos.min():.1e} at omega={w_neg:.3f}/{w_pos:.3f}, kappa=2.5; runtime={dt:.2f}s (<5s)")


def criterion_3():
    w = np.linspace(-80.0, 80.0, 160001)
    cases = [
        ("4kappa", EnsembleParams.from_collective(7.0, 10.0), CavityParams(4.9), 0.0, 4 * 4.9),
        ("4Gamma", EnsembleParams.from_collective(30.0, 2.5), CavityParams(360.0), 0.0, 4 * 2.5),
        ("2Gamma", EnsembleParams.from_collective(30.0, 2.5), CavityParams(2.5), 30.0, 2 * 2.5),
    ]
    ok, parts = True, []
    for label, e, cav, centre, nominal in cases:
        dips = dip_fwhm(reflection_spectrum(w, e, cav))
        _, width = min(dips, key=lambda d: abs(d[0] - centre))
        dev = width / nominal - 1
        ok &= abs(dev) <= 0.15
        parts.append(f"{label}: {width:.3f} vs {nominal:.3g} ({dev:+.1%})")
    return ok, "; ".join(parts)


def criterion_4():
    rows, times = c_sweep(1.0)
    rows3, _ = c_sweep(3.0)
    disc = [r.eta_measured - r.eta_predicted for r in rows]
    disc3 = [r.eta_measured - r.eta_predicted for r in rows3]
    worst, worst3 = max(map(abs, disc)), max(map(abs, disc3))
    ok = worst <= 0.05 and worst3 < worst and max(times) < 120.0
    return ok, (f"max |eta-eta24| = {worst:.4f} (<=0.05) -> {worst3:.4f} at tripled ratios; "
                f"per-point runtime <= {max(times):.1f}s (<120s)  rows: "
                + ", ".join(f"C={c:g}:{d:+.4f}" for c, d in zip(C_VALUES, disc)))


def criterion_5():
    cfg, res = reference_config(), reference_run()
    fid = res.shape_fidelity
    comp, shift = delay_compensated_fidelity(res.trace, cfg)
    lag = echo_group_delay(cfg.ensemble, cfg.cavity)
    return fid >= 0.99, (f"fidelity={fid:.5f} (>=0.99); diagnostic: {comp:.5f} after removing a "
                         f"{shift:.3f} delay (predicted two-pass group delay {lag:.3f}; not used for the verdict)")


def criterion_6():
    cfg, res = reference_config(), reference_run()
    off = res.echo_centroid - cfg.echo_time
    return abs(off) <= cfg.duration / 2, f"centroid - 2(tau1+tau2) = {off:+.4f} (|.|<=T/2={cfg.duration / 2:.3f})"


def criterion_7():
    base = reference_config()
    eta0 = reference_run().eta_measured
    ok, parts = True, []
    for x in (0.25, 0.5, 1.0):
        gh = x / (4 * (base.tau1 + base.tau2))
        cfg = dataclasses.replace(base, ensemble=dataclasses.replace(base.ensemble, gamma_h=gh))
        ratio = run_protocol(cfg, keep_trace=False).eta_measured / eta0
        dev = ratio / math.exp(-x) - 1
        ok &= abs(dev) <= 0.10
        parts.append(f"x={x}: {ratio:.5f} vs {math.exp(-x):.5f} ({dev:+.2e})")
    return ok, "; ".join(parts)


def criterion_8():
    cfg = reference_config(detune_delta=0.0)
    kappa = cfg.cavity.kappa
    rows = suppression_scan(cfg, [m * kappa for m in (0, 3, 10, 30, 100)])
    leak = [r.leakage for r in rows]
    mono = all(b <= a for a, b in zip(leak, leak[1:]))
    ratio = leak[0] / leak[-1]
    return mono and ratio >= 10, (f"leakage {', '.join(f'{v:.2e}' for v in leak)}; non-increasing={mono}; "
                                  f"delta=0 / delta=100kappa = {ratio:.0f} (>=10)")


def criterion_9():
    cfg = reference_config()
    dt = cfg.step()
    imb = abs(reference_run().ledger.relative_imbalance)
    imb_half = abs(run_protocol(dataclasses.replace(cfg, dt=dt / 2), keep_trace=False).ledger.relative_imbalance)
    ok = imb <= 1e-2 and imb_half < imb
    return ok, f"|imbalance| = {imb:.2e} at dt={dt:.4g}, {imb_half:.2e} at dt/2 (<=1e-2, improving)"


def criterion_10():
    alpha = absorption_coefficient(TWO_PI * 4e6, TWO_PI * 75e6, C_LIGHT)
    q = design_quality(alpha, 0.02998)
    with tempfile.TemporaryDirectory() as tmp:
        code = cli.main(["design", "--config", str(ROOT / "configs" / "er_yso_design.cfg"), "--out", tmp])
        header, rows = export.read_rows(Path(tmp) / "design.csv")
    labelled = {"q_from_identity", "q_paper_formula"} <= set(header)
    ok = (code == 0 and abs(alpha / 8.9e-3 - 1) <= 0.02 and abs(q.q_paper_formula / 47000 - 1) <= 0.05 and labelled)
    return ok, (f"alpha={alpha:.4e} 1/m (8.9e-3 +-2%), Q_paper={q.q_paper_formula:.0f} (47000 +-5%), "
                f"Q_identity={q.q_from_identity:.0f}; both columns in design.csv: {labelled}")


def criterion_11():
    worst = 0.0
    for c in (0.5, 1.0, 2.0):
        prod = snr_collective(1e4, c, 1.0, 10.0) * collective_noise_probability(1e4, c, 1.0, 10.0)
        worst = max(worst, abs(prod / analytic.total_efficiency(c) - 1))
    snr = snr_collective(1e4, 1.0, 1.0, 10.0)
    target = 1e4 / (math.pi * 10.0)
    rel = abs(snr / target - 1)
    ok = worst <= 1e-12 and rel <= 1e-9 and abs(snr - 318.3) < 0.05
    return ok, f"max rel |SNR_c*eta_noise/eta - 1| = {worst:.1e} (<=1e-12); SNR_c = {snr:.4f} ({rel:.1e} rel)"


def criterion_12():
    tmp = Path(tempfile.mkdtemp())
    try:
        jobs = [("protocol", "reference.cfg", ("result.csv", "trace.csv", "events.csv")),
                ("spectrum", "spectrum_strong.cfg", ("spectrum.csv", "dips.csv")),
                ("sweep", "sweep_delta.cfg", ("sweep.csv",))]
        same = True
        for cmd, cfg, files in jobs:
            outs = []
            for k in (1, 2):
                out = tmp / f"{cmd}{k}"
                code = cli.main([cmd, "--config", str(ROOT / "configs" / cfg), "--out", str(out), "--jobs", "1"])
                same &= code == 0
                outs.append({f: (out / f).read_bytes() for f in files})
            same &= outs[0] == outs[1]
        return same, "protocol, spectrum and sweep CSVs byte-identical across two runs"
    finally:
        shutil.rmtree(tmp, ignore_errors=True)


CRITERIA = {n: globals()[f"criterion_{n}"] for n in range(1, 13)}


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n):
    ok, detail = CRITERIA[n]()
    ACCEPTANCE[n] = (ok, detail)
    print(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for n, fn in CRITERIA.items():
        ok, detail = fn()
        failed += not ok
        print(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}", flush=True)
    sys.exit(1 if failed else 0)
