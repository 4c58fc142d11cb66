"""Storage and retrieval experiment: absorption, two pi pulses, detuned first echo.

Time origin is the centre of the input pulse. Timeline::

    0                 input pulse (duration T)
    tau1              pi_1
    [tau1+3T, 2tau1+tau2-3T]   cavity detuned by delta (first echo at 2 tau1 suppressed)
    2 tau1 + tau2     pi_2
    2 (tau1 + tau2)   echo, read out through the resonant cavity
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import analytic
from .dynamics import (DetuningSchedule, EnergyLedger, GaussianPulse, SimTrace, SpinBins, discretize,
                       energy_ledger, evolve, stable_dt)
from .model import CavityParams, EnsembleParams, ValidationError, classify_regime, derive
from .noise import NoiseBudget, noise_budget


class ConfigError(ValidationError):
    pass


class FidelityUndefined(ArithmeticError):
    pass


WINDOW_HALFWIDTH_T = 3.0
GUARD_T = 3.0
# echo energy below this fraction of the reference energy counts as no echo
ECHO_FLOOR = 1e-15


@dataclass(frozen=True)
class ProtocolConfig:
    """One storage/retrieval run.

    Attributes:
        ensemble, cavity: physical system.
        duration: intensity FWHM T of the Gaussian input centred at t = 0.
        tau1, tau2: pulse delays; pi_1 at tau1, pi_2 at 2 tau1 + tau2.
        detune_delta: cavity detuning between the pi pulses (rad/s).
        detune_window: explicit (t_on, t_off); defaults to 3T guards inside the
            pi-pulse interval.
        echo_window_halfwidth: half-width of the echo and leakage windows
            (default 3T).
        n_bins, truncation_p: spectral discretisation.
        dt: integration step (default from :func:`spinmem.dynamics.stable_dt`).
        t1: population lifetime for the noise budget (needs cavity geometry).
    """

    ensemble: EnsembleParams
    cavity: CavityParams
    duration: float
    tau1: float
    tau2: float
    detune_delta: float = 0.0
    detune_window: Optional[tuple] = None
    echo_window_halfwidth: Optional[float] = None
    amplitude: complex = 1.0
    n_bins: int = 4000
    truncation_p: float = 0.01
    dt: Optional[float] = None
    t1: Optional[float] = None

    @property
    def pi1(self) -> float:
        return self.tau1

    @property
    def pi2(self) -> float:
        return 2.0 * self.tau1 + self.tau2

    @property
    def first_echo_time(self) -> float:
        return 2.0 * self.tau1

    @property
    def echo_time(self) -> float:
        return 2.0 * (self.tau1 + self.tau2)

    @property
    def halfwidth(self) -> float:
        if self.echo_window_halfwidth is not None:
            return self.echo_window_halfwidth
        return WINDOW_HALFWIDTH_T * self.duration

    @property
    def window(self) -> tuple:
        if self.detune_window is not None:
            return tuple(self.detune_window)
        return (self.tau1 + GUARD_T * self.duration, self.pi2 - GUARD_T * self.duration)

    @property
    def pulse(self) -> GaussianPulse:
        return GaussianPulse(0.0, self.duration, self.amplitude)

    @property
    def t_start(self) -> float:
        return self.pulse.support[0] - self.duration

    @property
    def t_end(self) -> float:
        return self.echo_time + self.halfwidth + self.duration

    def validate(self) -> None:
        """Raise :class:`ConfigError` naming the first violated invariant."""
        T = self.duration
        if not T > 0:
            raise ConfigError("duration T must be > 0")
        if self.tau1 < 5.0 * T:
            raise ConfigError(f"tau1 >= 5T violated: tau1={self.tau1:.6g}, 5T={5 * T:.6g}")
        if self.tau2 <= self.halfwidth:
            raise ConfigError("tau2 must exceed the echo window half-width (echo window overlaps pi_2)")
        if self.tau1 <= self.halfwidth:
            raise ConfigError("tau1 must exceed the window half-width (leakage window overlaps pi_1)")
        if self.detune_delta:
            lo, hi = self.window
            if not (self.pi1 < lo < hi < self.pi2):
                raise ConfigError("detune window must lie strictly between the pi pulses")
            if not lo < self.first_echo_time < hi:
                raise ConfigError("detune window must contain the first echo time 2*tau1")
        if self.n_bins < 1 or not 0 <= self.truncation_p < 0.5:
            raise ConfigError("n_bins >= 1 and 0 <= truncation_p < 0.5 required")

    def bins(self) -> SpinBins:
        return discretize(self.ensemble.dist_kind, self.ensemble.gamma_inh, self.n_bins, self.truncation_p)

    def schedule(self) -> DetuningSchedule:
        if not self.detune_delta:
            return DetuningSchedule()
        lo, hi = self.window
        return DetuningSchedule(((lo, hi, self.detune_delta),))

    def step(self) -> float:
        return self.dt if self.dt is not None else stable_dt(self.cavity, self.ensemble, self.duration)


def reference_config(ratio_scale: float = 1.0, n_bins: Optional[int] = None, **overrides) -> ProtocolConfig:
    """Reference protocol, Gamma : g sqrt(N) : kappa : 1/T = 27 : 9 : 3 : 0.3.

    ``ratio_scale`` multiplies every adjacent separation ratio (Gamma/gsN,
    gsN/kappa, kappa*T) at fixed kappa, with tau1 = tau2 = 8T and
    delta = 100 kappa. The bin count grows with Gamma*T so the discrete comb
    does not revive within the storage interval.
    """
    kappa = 3.0
    gsn = 3.0 * ratio_scale * kappa
    gamma = 3.0 * ratio_scale * gsn
    T = 10.0 * ratio_scale / kappa
    if n_bins is None:
        # comb revival 2M/Gamma must exceed 1.5x the longest phase age (~12T)
        needed = 1.5 * 12.0 * T * gamma / 2.0
        n_bins = max(4000, int(math.ceil(needed / 1000.0)) * 1000)
    base = dict(
        ensemble=EnsembleParams.from_collective(gsn, gamma),
        cavity=CavityParams(kappa),
        duration=T,
        tau1=8.0 * T,
        tau2=8.0 * T,
        detune_delta=100.0 * kappa,
        n_bins=n_bins,
        truncation_p=0.01,
    )
    base.update(overrides)
    return ProtocolConfig(**base)


def with_cooperativity(cfg: ProtocolConfig, c: float) -> ProtocolConfig:
    """Same system with kappa = g^2 N / (C Gamma); detuning kept at its value."""
    if not c > 0:
        raise ValidationError("C must be > 0")
    kappa = cfg.ensemble.g2n / (c * cfg.ensemble.gamma_inh)
    return dataclasses.replace(cfg, cavity=dataclasses.replace(cfg.cavity, kappa=kappa))


@dataclass
class ProtocolResult:
    eta_measured: float
    eta_predicted: float
    first_echo_leakage: float
    shape_fidelity: float
    echo_peak_time: float
    echo_centroid: float
    reflected: float
    cooperativity: float
    kappa: float
    ledger: EnergyLedger
    noise_budget: Optional[NoiseBudget] = None
    flags: tuple = ()
    trace: Optional[SimTrace] = field(default=None, repr=False)

    def row(self) -> dict:
        return {
            "c": self.cooperativity,
            "kappa": self.kappa,
            "eta_measured": self.eta_measured,
            "eta_predicted": self.eta_predicted,
            "leakage": self.first_echo_leakage,
            "fidelity": self.shape_fidelity,
            "flags": ";".join(self.flags),
        }


def revival_time(cfg: ProtocolConfig) -> float:
    """Recurrence time of the bin comb near line centre."""
    bins = cfg.bins()
    if len(bins) < 2:
        return 0.0
    mid = len(bins) // 2
    spacing = float(np.min(np.diff(bins.centers[max(mid - 1, 0):mid + 2])))
    return 2.0 * math.pi / spacing


def _flags(cfg: ProtocolConfig) -> list[str]:
    flags = []
    report = classify_regime(cfg.ensemble, cfg.cavity, cfg.duration)
    if not report.bad_cavity_ordering_ok:
        flags.append("bad_cavity_ordering_violated")
    # longest time since excitation that must stay free of comb revivals
    phase_age = max(cfg.tau1, cfg.tau2) + cfg.halfwidth + cfg.duration
    if revival_time(cfg) < 1.5 * phase_age:
        flags.append("bin_revival_risk")
    return flags


def shape_fidelity(trace: SimTrace, cfg: ProtocolConfig, center: Optional[float] = None) -> float:
    """Overlap of the output with the time-reversed input, global phase ignored.

    |int E_out conj(E_ref)|^2 / (int |E_out|^2 int |E_ref|^2) over the window
    ``center +- halfwidth`` (default centre: the expected echo time), with
    E_ref the input mirrored so that it is centred on ``center``.
    """
    c = cfg.echo_time if center is None else center
    mask = (trace.t >= c - cfg.halfwidth) & (trace.t <= c + cfg.halfwidth)
    if mask.sum() < 2:
        raise FidelityUndefined("echo window contains no samples")
    out = trace.e_out[mask]
    ref = cfg.pulse.time_reversed(0.5 * c)(trace.t[mask])
    e_out = np.trapezoid(np.abs(out) ** 2, dx=trace.dt)
    e_ref = np.trapezoid(np.abs(ref) ** 2, dx=trace.dt)
    if e_ref <= 0 or e_out <= ECHO_FLOOR * e_ref:
        raise FidelityUndefined("zero energy in the echo window")
    overlap = np.trapezoid(out * np.conj(ref), dx=trace.dt)
    return float(min(abs(overlap) ** 2 / (e_out * e_ref), 1.0))


def delay_compensated_fidelity(trace: SimTrace, cfg: ProtocolConfig, max_shift: Optional[float] = None,
                               n_shifts: int = 201) -> tuple[float, float]:
    """Best shape fidelity over rigid time shifts of the reference, and that shift.

    Diagnostic only: separates shape distortion from the finite group delay
    of absorption plus re-emission, which the adiabatic time-reversal result
    neglects. Returns ``(fidelity, shift)``.
    """
    span = cfg.duration if max_shift is None else max_shift
    best = (-1.0, 0.0)
    for shift in np.linspace(-span, span, n_shifts):
        try:
            f = shape_fidelity(trace, cfg, center=cfg.echo_time + shift)
        except FidelityUndefined:
            continue
        if f > best[0]:
            best = (f, float(shift))
    if best[0] < 0:
        raise FidelityUndefined("no shift gives a defined fidelity")
    return best


def echo_group_delay(ensemble: EnsembleParams, cavity: CavityParams) -> float:
    """Predicted lag of the two-pulse echo centroid behind ``2(tau1 + tau2)``.

    Each pass through the resonant cavity (absorption, then re-emission)
    contributes the group delay of the transfer ``1 + r`` at omega = 0,
    ``(1 - G^2/Gamma'^2) / (kappa_tot + G^2/Gamma')`` with ``Gamma' = Gamma + gamma_h``
    (Lorentzian line). Two conjugations restore the original spectral phase
    slope, so the two delays add instead of cancelling. One pulse cancels them.
    """
    gam = ensemble.gamma_inh + ensemble.gamma_h
    tau = (1.0 - ensemble.g2n / gam ** 2) / (cavity.kappa_total + ensemble.g2n / gam)
    return 2.0 * tau


def run_protocol(cfg: ProtocolConfig, keep_trace: bool = True) -> ProtocolResult:
    """Simulate one storage/retrieval cycle and score it against the closed forms."""
    cfg.validate()
    trace = evolve(
        cfg.ensemble, cfg.cavity, cfg.bins(), cfg.pulse, cfg.schedule(), (cfg.pi1, cfg.pi2),
        dt=cfg.step(), t_end=cfg.t_end, t_start=cfg.t_start,
    )
    e_in = float(trace.cumulative_in[-1])
    hw = cfg.halfwidth
    echo_mask = (trace.t >= cfg.echo_time - hw) & (trace.t <= cfg.echo_time + hw)
    p_out = np.abs(trace.e_out[echo_mask]) ** 2
    t_echo = trace.t[echo_mask]
    echo_energy = trace.window_energy(cfg.echo_time - hw, cfg.echo_time + hw)
    if echo_energy > 0:
        centroid = float(np.trapezoid(t_echo * p_out, dx=trace.dt) / echo_energy)
        peak = float(t_echo[np.argmax(p_out)])
    else:
        centroid = peak = math.nan
    try:
        fid = shape_fidelity(trace, cfg)
    except FidelityUndefined:
        fid = math.nan
    coop = cfg.ensemble.g2n / (cfg.cavity.kappa * cfg.ensemble.gamma_inh)
    t2 = 1.0 / cfg.ensemble.gamma_h if cfg.ensemble.gamma_h > 0 else None
    budget = None
    derived = derive(cfg.ensemble, cfg.cavity)
    if derived.finesse is not None and cfg.t1 is not None and coop > 0:
        budget = noise_budget(derived.finesse, coop, cfg.cavity.kappa, cfg.duration, cfg.tau1, cfg.tau2, cfg.t1,
                              alpha_l=derived.alpha_l, t2=t2)
    return ProtocolResult(
        eta_measured=echo_energy / e_in,
        eta_predicted=analytic.total_efficiency(coop, cfg.tau1, cfg.tau2, t2),
        first_echo_leakage=trace.window_energy(cfg.first_echo_time - hw, cfg.first_echo_time + hw) / e_in,
        shape_fidelity=fid,
        echo_peak_time=peak,
        echo_centroid=centroid,
        reflected=trace.window_energy(trace.t[0], cfg.pi1) / e_in,
        cooperativity=coop,
        kappa=cfg.cavity.kappa,
        ledger=energy_ledger(trace),
        noise_budget=budget,
        flags=tuple(_flags(cfg)),
        trace=trace if keep_trace else None,
    )


def _run_row(cfg: ProtocolConfig) -> ProtocolResult:
    return run_protocol(cfg, keep_trace=False)


def run_many(cfgs: Sequence[ProtocolConfig], jobs: Optional[int] = 1) -> list[ProtocolResult]:
    """Run configurations, in parallel when ``jobs > 1``; results keep input order."""
    cfgs = list(cfgs)
    if jobs is None:
        jobs = os.cpu_count() or 1
    if jobs <= 1 or len(cfgs) <= 1:
        return [_run_row(c) for c in cfgs]
    with concurrent.futures.ProcessPoolExecutor(max_workers=min(jobs, len(cfgs))) as pool:
        return list(pool.map(_run_row, cfgs))


@dataclass(frozen=True)
class SuppressionRow:
    delta: float
    leakage: float
    eta_measured: float


def suppression_scan(cfg: ProtocolConfig, deltas: Sequence[float], jobs: Optional[int] = 1) -> list[SuppressionRow]:
    """First-echo leakage versus cavity detuning between the pi pulses."""
    deltas = [float(d) for d in deltas]
    if not deltas:
        raise ValidationError("no detuning values given")
    if any(d < 0 for d in deltas) or any(b <= a for a, b in zip(deltas, deltas[1:])):
        raise ValidationError("detunings must be >= 0 and strictly ascending")
    results = run_many([dataclasses.replace(cfg, detune_delta=d) for d in deltas], jobs)
    return [SuppressionRow(d, r.first_echo_leakage, r.eta_measured) for d, r in zip(deltas, results)]


def sweep_efficiency(cfg: ProtocolConfig, c_values: Sequence[float], jobs: Optional[int] = 1) -> list[ProtocolResult]:
    """Measured vs predicted efficiency with C set through kappa at fixed g*sqrt(N), Gamma."""
    c_values = [float(c) for c in c_values]
    if not c_values:
        raise ValidationError("no cooperativity values given")
    return run_many([with_cooperativity(cfg, c) for c in c_values], jobs)
