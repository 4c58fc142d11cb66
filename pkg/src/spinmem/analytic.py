"""Closed-form steady state: reflection, impedance matching and efficiencies."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynamics import SpinBins
from .model import CavityParams, DistKind, EnsembleParams, Regime, ValidationError


class UnsupportedClosedForm(ValueError):
    """The closed form only exists for a Lorentzian line; use the oracle."""


class NoMatchExists(ValueError):
    pass


class RegimeError(ValueError):
    pass


class NoDip(ValueError):
    pass


class ResolutionError(ValueError):
    pass


class Unbounded(ArithmeticError):
    """A quantity diverges (e.g. infinite mode capacity for gamma_h = 0)."""


DIP_FLOOR = 1e-3
MIN_DIP_SAMPLES = 8


def _check_closed_form(ensemble: EnsembleParams) -> None:
    if ensemble.dist_kind is not DistKind.LORENTZIAN:
        raise UnsupportedClosedForm(
            f"no closed-form reflection for a {ensemble.dist_kind.value} line; use steady_state_oracle"
        )


def reflection_amplitude(omega, ensemble: EnsembleParams, cavity: CavityParams, cavity_detuning: float = 0.0):
    """E_ref/E_in = 2 kappa / (kappa - i w + g^2 N / (Gamma + gamma_h - i w)) - 1.

    ``cavity_detuning`` shifts the cavity resonance; ``kappa_int`` adds to the
    cavity decay and ``center_offset`` shifts the spin line.
    """
    _check_closed_form(ensemble)
    w = np.asarray(omega, dtype=float)
    spin = ensemble.g2n / (ensemble.gamma_inh + ensemble.gamma_h - 1j * (w - ensemble.center_offset))
    denom = cavity.kappa_total + 1j * (cavity_detuning - w) + spin
    r = 2.0 * cavity.kappa / denom - 1.0
    return complex(r) if np.ndim(r) == 0 else r


def reflection(omega, ensemble: EnsembleParams, cavity: CavityParams, cavity_detuning: float = 0.0):
    """Reflected power fraction R(w) = |E_ref/E_in|^2."""
    r = np.abs(reflection_amplitude(omega, ensemble, cavity, cavity_detuning)) ** 2
    return float(r) if np.ndim(r) == 0 else r


def reflection_rational(omega, ensemble: EnsembleParams, cavity: CavityParams):
    """Expanded rational form of R(w); centred line, no intrinsic loss."""
    _check_closed_form(ensemble)
    w = np.asarray(omega, dtype=float)
    k, gt, a = cavity.kappa, ensemble.gamma_inh + ensemble.gamma_h, ensemble.g2n
    num = (k * gt - a + w**2) ** 2 + w**2 * (k - gt) ** 2
    den = (k * gt + a - w**2) ** 2 + w**2 * (k + gt) ** 2
    r = num / den
    return float(r) if np.ndim(r) == 0 else r


@dataclass(frozen=True)
class ReflectionSpectrum:
    omegas: np.ndarray
    values: np.ndarray
    ensemble: EnsembleParams
    cavity: CavityParams


def reflection_spectrum(omegas, ensemble: EnsembleParams, cavity: CavityParams) -> ReflectionSpectrum:
    w = np.asarray(omegas, dtype=float)
    if w.ndim != 1 or w.size == 0 or np.any(np.diff(w) <= 0):
        raise ValidationError("omega grid must be a nonempty increasing 1-D array")
    return ReflectionSpectrum(w, np.atleast_1d(reflection(w, ensemble, cavity)), ensemble, cavity)


def steady_state_oracle(bins: SpinBins, omega, ensemble: EnsembleParams, cavity: CavityParams,
                        cavity_detuning: float = 0.0, smoothing: float = 0.0):
    """Reflection amplitude with the spectral integral replaced by a bin sum.

    With ``smoothing=0`` this is the exact steady state of the discretised
    system integrated by :func:`spinmem.dynamics.evolve`, for any line shape.
    A finite bin comb has no continuum, so with gamma_h = 0 it is lossless
    between its poles. ``smoothing > 0`` gives every bin an extra Lorentzian
    half-width of ``smoothing`` times its local spacing, which turns the sum
    into a quadrature of the continuous line (use ~2 to compare with the
    closed form; the residual ripple is ~exp(-2 pi smoothing)).
    """
    if bins is None or len(bins) == 0:
        raise ValidationError("bins must be nonempty")
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    width = ensemble.gamma_h + smoothing * bins.local_spacing
    detuning = bins.centers[None, :] + ensemble.center_offset - w[:, None]
    s = (bins.weights[None, :] / (detuning - 1j * width[None, :])).sum(axis=1)
    denom = cavity.kappa_total + 1j * (cavity_detuning - w) - 1j * ensemble.g2n * s
    r = 2.0 * cavity.kappa / denom - 1.0
    return complex(r[0]) if np.ndim(omega) == 0 else r


def oracle_discrepancy(bins: SpinBins, omegas, ensemble: EnsembleParams, cavity: CavityParams,
                       smoothing: float = 2.0) -> dict:
    """Compare the smoothed bin-sum oracle with the closed form on a grid.

    ``relative`` is the max relative error of the cavity transfer 1 + r (the
    reflection amplitude itself vanishes at a match point, so a pointwise
    relative error of r is undefined there); ``absolute_r`` is the max
    absolute error of R.
    """
    ro = steady_state_oracle(bins, omegas, ensemble, cavity, smoothing=smoothing)
    rc = reflection_amplitude(omegas, ensemble, cavity)
    return {
        "relative": float(np.max(np.abs(ro - rc) / np.abs(1.0 + rc))),
        "absolute_r": float(np.max(np.abs(np.abs(ro) ** 2 - np.abs(rc) ** 2))),
    }


# ---------------------------------------------------------------------------
# impedance matching
# ---------------------------------------------------------------------------


class MatchKind(str, enum.Enum):
    WEAK_ON_RESONANCE = "weak_on_resonance"
    STRONG_SPLIT = "strong_split"


@dataclass(frozen=True)
class MatchSolution:
    kind: MatchKind
    kappa_star: float
    match_frequencies: tuple
    dip_fwhm_predicted: float
    regime: Regime = Regime.WEAK_SINGLE_DIP


def impedance_match_kappa(ensemble: EnsembleParams) -> float:
    """kappa* = g^2 N / Gamma, the external rate at which C = 1."""
    if ensemble.g2n <= 0:
        raise NoMatchExists("zero coupling: the cavity reflects everything for any kappa")
    return ensemble.g2n / ensemble.gamma_inh


def weak_coupling_match(ensemble: EnsembleParams) -> MatchSolution:
    """On-resonance match at C = 1; dip FWHM 4 kappa for g*sqrt(N) < Gamma, 4 Gamma otherwise."""
    k = impedance_match_kappa(ensemble)
    width = 4.0 * k if ensemble.collective_coupling < ensemble.gamma_inh else 4.0 * ensemble.gamma_inh
    return MatchSolution(MatchKind.WEAK_ON_RESONANCE, k, (0.0,), width)


def strong_coupling_match(ensemble: EnsembleParams) -> MatchSolution:
    """Split-mode match: kappa* = Gamma, zeros at +-g*sqrt(N), width 2 Gamma each.

    Splittings between Gamma and 2*Gamma are accepted but flagged as
    ``Regime.BOUNDARY`` because the two dips then overlap.
    """
    gsn, gam = ensemble.collective_coupling, ensemble.gamma_inh
    if gsn <= gam:
        raise RegimeError(f"g*sqrt(N)={gsn:.6g} must exceed Gamma={gam:.6g} for a split match")
    regime = Regime.BOUNDARY if gsn <= 2.0 * gam * (1.0 + 1e-12) else Regime.STRONG_SPLIT
    return MatchSolution(MatchKind.STRONG_SPLIT, gam, (-gsn, gsn), 2.0 * gam, regime)


# ---------------------------------------------------------------------------
# efficiencies
# ---------------------------------------------------------------------------


def _check_c(c) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if np.any(c < 0) or not np.all(np.isfinite(c)):
        raise ValidationError("cooperativity must be finite and >= 0")
    return c


def absorption_efficiency(c):
    """eta_abs = 4C / (1 + C)^2."""
    c = _check_c(c)
    out = 4.0 * c / (1.0 + c) ** 2
    return float(out) if out.ndim == 0 else out


def decay_factor(tau1: float, tau2: float, t2: Optional[float] = None) -> float:
    """exp(-4 (tau1 + tau2) / T2); 1 when T2 is None (no dephasing)."""
    if tau1 < 0 or tau2 < 0:
        raise ValidationError("storage times must be >= 0")
    if t2 is None or math.isinf(t2):
        return 1.0
    if not t2 > 0:
        raise ValidationError("T2 must be > 0")
    return math.exp(-4.0 * (tau1 + tau2) / t2)


def total_efficiency(c, tau1: float = 0.0, tau2: float = 0.0, t2: Optional[float] = None):
    """eta = 16 C^2 / (1 + C)^4 * exp(-4 (tau1 + tau2) / T2)."""
    c = _check_c(c)
    out = 16.0 * c**2 / (1.0 + c) ** 4 * decay_factor(tau1, tau2, t2)
    return float(out) if out.ndim == 0 else out


def multimode_capacity(kappa: float, gamma_h: float) -> float:
    """Number of storable temporal modes, n ~ kappa / (25 gamma_h)."""
    if gamma_h < 0 or kappa <= 0:
        raise ValidationError("need kappa > 0 and gamma_h >= 0")
    if gamma_h == 0:
        raise Unbounded("gamma_h = 0: mode capacity is unbounded")
    return kappa / (25.0 * gamma_h)


# ---------------------------------------------------------------------------
# dip widths
# ---------------------------------------------------------------------------


def _crossing(x0, y0, x1, y1, level):
    return x0 + (level - y0) * (x1 - x0) / (y1 - y0)


def dip_fwhm(spectrum: ReflectionSpectrum, floor: float = DIP_FLOOR) -> list[tuple[float, float]]:
    """Full width at half depth of every dip in a reflection spectrum.

    A dip is a strict local maximum of 1 - R above ``floor``. Its half level is
    half of that dip's own depth; the crossings are linearly interpolated.

    Returns:
        list of (dip centre, FWHM) ordered by frequency.

    Raises:
        NoDip: if no dip exceeds the floor.
        ResolutionError: if a dip has fewer than 8 samples above half depth
            or a crossing falls outside the grid.
    """
    x = spectrum.omegas
    a = 1.0 - np.asarray(spectrum.values, dtype=float)
    peaks = [i for i in range(1, a.size - 1) if a[i] > a[i - 1] and a[i] > a[i + 1] and a[i] > floor]
    if not peaks:
        raise NoDip("no dip deeper than the floor")
    out = []
    for i in peaks:
        half = 0.5 * a[i]
        lo = i
        while lo > 0 and a[lo - 1] >= half:
            lo -= 1
        hi = i
        while hi < a.size - 1 and a[hi + 1] >= half:
            hi += 1
        if lo == 0 or hi == a.size - 1:
            raise ResolutionError(f"dip at {x[i]:.6g} extends past the grid")
        if hi - lo + 1 < MIN_DIP_SAMPLES:
            raise ResolutionError(f"dip at {x[i]:.6g} has only {hi - lo + 1} samples above half depth")
        left = _crossing(x[lo - 1], a[lo - 1], x[lo], a[lo], half)
        right = _crossing(x[hi], a[hi], x[hi + 1], a[hi + 1], half)
        out.append((float(x[i]), float(right - left)))
    return out
