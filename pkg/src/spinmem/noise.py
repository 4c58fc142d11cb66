"""Analytic noise budget and cavity design numbers.

Two noise sources limit the memory at the single-photon level: collective
emission seeded by spontaneous decay during the suppressed first echo, and
incoherent emission from spins that decayed between the two pi pulses and
were re-excited by the second one. Both are perturbative estimates valid for
alpha*L << 1 and (tau1 + tau2) << T1; :class:`NoiseBudget` carries flags when
those approximations break.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

from .analytic import Unbounded, total_efficiency
from .model import ValidationError


class ValidityWarning(UserWarning):
    """A perturbative formula is used outside its stated range."""


class SignalZero(ArithmeticError):
    pass


ETA_NOISE_LIMIT = 0.1
NS_FRACTION_LIMIT = 0.1
ALPHA_L_LIMIT = 0.1
EXPONENTIAL_MISMATCH = 0.05


def _check_common(finesse: float, c: float, kappa_t: float) -> None:
    if not finesse > 0:
        raise ValidationError("finesse must be > 0")
    if c < 0:
        raise ValidationError("cooperativity must be >= 0")
    if not kappa_t > 0:
        raise ValidationError("kappa*T must be > 0")


def collective_noise_probability(finesse: float, c: float, kappa: float, duration: float) -> float:
    """eta_noise = (pi / F) * 4 C^2 / (1 + C)^2 * kappa T.

    Equivalent to alpha*L * eta_abs(C) * kappa*T through F = pi C / (alpha L).
    """
    kt = kappa * duration
    _check_common(finesse, c, kt)
    eta = math.pi / finesse * 4.0 * c * c / (1.0 + c) ** 2 * kt
    if eta > ETA_NOISE_LIMIT:
        warnings.warn(f"eta_noise = {eta:.3g} exceeds {ETA_NOISE_LIMIT}; perturbative estimate", ValidityWarning,
                      stacklevel=2)
    return eta


def snr_collective(finesse: float, c: float, kappa: float, duration: float, tau1: float = 0.0,
                   t2: Optional[float] = None) -> float:
    """SNR_c = (F / pi) * 4 / (1 + C)^2 / (kappa T).

    With ``t2`` given the signal (stored for 2(tau1+tau2)) dephases relative
    to the noise (stored for 2 tau2), which multiplies the ratio by
    exp(-4 tau1 / T2).
    """
    kt = kappa * duration
    _check_common(finesse, c, kt)
    if c == 0:
        raise SignalZero("C = 0: no signal is stored")
    snr = finesse / math.pi * 4.0 / (1.0 + c) ** 2 / kt
    if t2 is not None:
        if not t2 > 0:
            raise ValidationError("T2 must be > 0")
        snr *= math.exp(-4.0 * tau1 / t2)
    return snr


def spontaneous_fraction(tau1: float, tau2: float, t1: float) -> float:
    """N_s / N = (tau1 + tau2) / T1, valid for (tau1 + tau2) << T1."""
    if not t1 > 0:
        raise ValidationError("T1 must be > 0")
    if tau1 < 0 or tau2 < 0:
        raise ValidationError("storage times must be >= 0")
    frac = (tau1 + tau2) / t1
    if frac > NS_FRACTION_LIMIT:
        warnings.warn(f"(tau1+tau2)/T1 = {frac:.3g} is not << 1", ValidityWarning, stacklevel=2)
    return frac


def snr_spontaneous(eta: float, c: float, tau1: float, tau2: float, t1: float, kappa: float,
                    duration: float) -> float:
    """SNR_s = eta T1 / (pi C (tau1 + tau2) kappa T)."""
    if not t1 > 0:
        raise ValidationError("T1 must be > 0")
    if c <= 0:
        raise SignalZero("C = 0: no signal is stored")
    kt = kappa * duration
    if not kt > 0:
        raise ValidationError("kappa*T must be > 0")
    if tau1 + tau2 <= 0:
        raise Unbounded("tau1 + tau2 = 0: no time for population decay")
    return eta * t1 / (math.pi * c * (tau1 + tau2) * kt)


def emitted_photons(alpha_l: float) -> dict:
    """Fully inverted ensemble: exact e^{aL} - 1 next to the linear estimate aL."""
    exact = math.expm1(alpha_l)
    mismatch = abs(exact - alpha_l) / exact if exact else 0.0
    return {"exact": exact, "linear": alpha_l, "mismatch": mismatch, "flag": mismatch > EXPONENTIAL_MISMATCH}


@dataclass(frozen=True)
class QualityDesign:
    """Required quality factor for C = 1 in a half-wave cavity.

    ``q_from_identity`` follows from F = pi C / (alpha L) with L = lambda/2,
    i.e. 2 pi / (alpha lambda); ``q_paper_formula`` is the quoted expression
    4 pi / (alpha lambda). They differ by exactly a factor two.
    """

    q_from_identity: float
    q_paper_formula: float


def design_quality(alpha: float, wavelength: float) -> QualityDesign:
    if not alpha > 0 or not wavelength > 0:
        raise ValidationError("alpha and wavelength must be > 0")
    return QualityDesign(q_from_identity=2.0 * math.pi / (alpha * wavelength),
                         q_paper_formula=4.0 * math.pi / (alpha * wavelength))


@dataclass(frozen=True)
class NoiseBudget:
    alpha_l: float
    eta_noise: float
    snr_collective: float
    n_s_fraction: float
    snr_spontaneous: float
    mode_count: float  # kappa * T
    tau1: float
    tau2: float
    t1: float
    t2: Optional[float] = None
    flags: tuple = field(default_factory=tuple)

    def row(self) -> dict:
        return {
            "alpha_l": self.alpha_l,
            "eta_noise": self.eta_noise,
            "snr_c": self.snr_collective,
            "ns_fraction": self.n_s_fraction,
            "snr_s": self.snr_spontaneous,
            "flags": ";".join(self.flags),
        }


def noise_budget(finesse: float, c: float, kappa: float, duration: float, tau1: float, tau2: float, t1: float,
                 alpha_l: Optional[float] = None, t2: Optional[float] = None) -> NoiseBudget:
    """Collect both noise channels and flag approximations that break.

    ``alpha_l`` defaults to pi C / F. Validity warnings are caught and turned
    into flags instead of being emitted.
    """
    if alpha_l is None:
        alpha_l = math.pi * c / finesse
    flags = []
    if alpha_l >= ALPHA_L_LIMIT:
        flags.append("alpha_l_not_small")
    if emitted_photons(alpha_l)["flag"]:
        flags.append("exp_alpha_l_mismatch")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        eta_noise = collective_noise_probability(finesse, c, kappa, duration)
        ns = spontaneous_fraction(tau1, tau2, t1)
    if eta_noise > ETA_NOISE_LIMIT:
        flags.append("eta_noise_not_small")
    if ns > NS_FRACTION_LIMIT:
        flags.append("storage_not_short_vs_t1")
    eta = total_efficiency(c, tau1, tau2, t2)
    snr_c = snr_collective(finesse, c, kappa, duration, tau1, t2) if c > 0 else 0.0
    try:
        snr_s = snr_spontaneous(eta, c, tau1, tau2, t1, kappa, duration) if c > 0 else 0.0
    except Unbounded:
        snr_s = math.inf
        flags.append("snr_s_unbounded")
    return NoiseBudget(alpha_l, eta_noise, snr_c, ns, snr_s, kappa * duration, tau1, tau2, t1, t2, tuple(flags))
