"""Physical parameters, unit conventions and derived figures of merit.

All frequencies are stored as angular frequencies (rad/s). Dimensionless
outputs are invariant under a common rescaling of every frequency, so any
single consistent unit (e.g. "MHz" taken as angular) may be used instead.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

TWO_PI = 2.0 * math.pi
C_LIGHT = 2.998e8  # m/s
_SQRT_2LN2 = math.sqrt(2.0 * math.log(2.0))


class ValidationError(ValueError):
    """Raised when parameters violate a physical invariant."""


class DistKind(str, enum.Enum):
    LORENTZIAN = "lorentzian"
    GAUSSIAN = "gaussian"


class Regime(str, enum.Enum):
    WEAK_SINGLE_DIP = "weak_single_dip"
    STRONG_SPLIT = "strong_split"
    BOUNDARY = "boundary"


class FrequencyUnit(str, enum.Enum):
    ANGULAR = "angular"  # value already in rad/s
    CYCLES = "cycles"  # value in Hz, multiply by 2*pi


@dataclass(frozen=True)
class FrequencyConvention:
    """Conversion between configuration values (MHz) and internal rad/s.

    ``is_angular=True`` means a config value ``x`` is read as ``x * 1e6`` rad/s,
    otherwise as ``2*pi * x * 1e6`` rad/s.
    """

    is_angular: bool = True
    scale: float = 1e6

    @property
    def unit(self) -> FrequencyUnit:
        return FrequencyUnit.ANGULAR if self.is_angular else FrequencyUnit.CYCLES

    @property
    def factor(self) -> float:
        return self.scale if self.is_angular else TWO_PI * self.scale

    def to_internal(self, value):
        return np.asarray(value, dtype=float) * self.factor if np.ndim(value) else float(value) * self.factor

    def from_internal(self, value):
        return np.asarray(value, dtype=float) / self.factor if np.ndim(value) else float(value) / self.factor


def _finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise ValidationError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class EnsembleParams:
    """Inhomogeneously broadened spin line.

    Attributes:
        g: single-spin coupling (rad/s).
        n_spins: number of spins N.
        gamma_inh: inhomogeneous half-width Gamma (rad/s). For a Gaussian line
            the FWHM is matched to the Lorentzian one, 2*Gamma.
        gamma_h: homogeneous linewidth (rad/s), T2 = 1/gamma_h.
        dist_kind: spectral line shape.
        center_offset: spin line centre relative to the cavity baseline (rad/s).
    """

    g: float
    n_spins: float
    gamma_inh: float
    gamma_h: float = 0.0
    dist_kind: DistKind = DistKind.LORENTZIAN
    center_offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "dist_kind", DistKind(self.dist_kind))
        for name in ("g", "n_spins", "gamma_inh", "gamma_h", "center_offset"):
            _finite(name, getattr(self, name))
        if self.g < 0:
            raise ValidationError("g must be >= 0")
        if self.n_spins < 1:
            raise ValidationError("n_spins must be >= 1")
        if self.gamma_inh <= 0:
            raise ValidationError("gamma_inh must be > 0")
        if self.gamma_h < 0:
            raise ValidationError("gamma_h must be >= 0")
        _finite("collective coupling", self.collective_coupling)

    @classmethod
    def from_collective(cls, collective_coupling: float, gamma_inh: float, n_spins: float = 1.0, **kw):
        """Build an ensemble from g*sqrt(N) instead of g."""
        if collective_coupling < 0:
            raise ValidationError("collective coupling must be >= 0")
        return cls(g=collective_coupling / math.sqrt(n_spins), n_spins=n_spins, gamma_inh=gamma_inh, **kw)

    @property
    def collective_coupling(self) -> float:
        return self.g * math.sqrt(self.n_spins)

    @property
    def g2n(self) -> float:
        return self.g * self.g * self.n_spins


@dataclass(frozen=True)
class Geometry:
    length: float
    phase_velocity: float = C_LIGHT
    wavelength: Optional[float] = None

    def __post_init__(self):
        if not (self.length > 0 and math.isfinite(self.length)):
            raise ValidationError("geometry length must be > 0")
        if not (self.phase_velocity > 0 and math.isfinite(self.phase_velocity)):
            raise ValidationError("geometry phase_velocity must be > 0")
        if self.wavelength is not None and not self.wavelength > 0:
            raise ValidationError("geometry wavelength must be > 0")

    @classmethod
    def half_wave(cls, wavelength: float, phase_velocity: float = C_LIGHT) -> "Geometry":
        return cls(length=wavelength / 2.0, phase_velocity=phase_velocity, wavelength=wavelength)


@dataclass(frozen=True)
class CavityParams:
    """Single-ended cavity. ``kappa`` is the external coupling rate (FWHM 2*kappa)."""

    kappa: float
    kappa_int: float = 0.0
    omega_r: float = 0.0
    geometry: Optional[Geometry] = None

    def __post_init__(self):
        for name in ("kappa", "kappa_int", "omega_r"):
            _finite(name, getattr(self, name))
        if self.kappa <= 0:
            raise ValidationError("kappa must be > 0")
        if self.kappa_int < 0:
            raise ValidationError("kappa_int must be >= 0")

    @property
    def kappa_total(self) -> float:
        return self.kappa + self.kappa_int


@dataclass(frozen=True)
class DerivedQuantities:
    cooperativity: float
    collective_coupling: float
    finesse: Optional[float] = None
    quality: Optional[float] = None
    alpha: Optional[float] = None
    alpha_l: Optional[float] = None
    regime: Regime = Regime.WEAK_SINGLE_DIP
    bad_cavity_ordering_ok: bool = False


def cooperativity(ensemble: EnsembleParams, cavity: CavityParams) -> float:
    return ensemble.g2n / (cavity.kappa * ensemble.gamma_inh)


def absorption_coefficient(collective_coupling: float, gamma_inh: float, phase_velocity: float = C_LIGHT) -> float:
    """alpha = 2 g^2 N / (c Gamma), in 1/m."""
    if gamma_inh <= 0 or phase_velocity <= 0:
        raise ValidationError("gamma_inh and phase_velocity must be > 0")
    return 2.0 * collective_coupling**2 / (phase_velocity * gamma_inh)


def _regime(collective: float, kappa: float, gamma_inh: float) -> Regime:
    # split dips sit at +-g*sqrt(N) with width ~2*max(kappa, Gamma); they are
    # only clearly separated once the splitting exceeds twice that scale
    ref = max(kappa, gamma_inh)
    if collective <= ref:
        return Regime.WEAK_SINGLE_DIP
    if collective <= 2.0 * ref * (1.0 + 1e-12):
        return Regime.BOUNDARY
    return Regime.STRONG_SPLIT


def derive(ensemble: EnsembleParams, cavity: CavityParams, pulse_duration: Optional[float] = None) -> DerivedQuantities:
    """Cooperativity, finesse, quality and absorption depth.

    The geometric quantities (finesse, alpha, alpha*L) are only available when
    ``cavity.geometry`` is set. Q uses ``omega_r`` when nonzero, otherwise the
    geometry wavelength.
    """
    coop = cooperativity(ensemble, cavity)
    gsn = ensemble.collective_coupling
    finesse = quality = alpha = alpha_l = None
    geo = cavity.geometry
    if geo is not None:
        finesse = math.pi * geo.phase_velocity / (2.0 * geo.length * cavity.kappa)
        alpha = absorption_coefficient(gsn, ensemble.gamma_inh, geo.phase_velocity)
        alpha_l = alpha * geo.length
    if cavity.omega_r > 0:
        quality = cavity.omega_r / (2.0 * cavity.kappa)
    elif geo is not None and geo.wavelength is not None:
        quality = TWO_PI * geo.phase_velocity / geo.wavelength / (2.0 * cavity.kappa)
    ordering = False
    if pulse_duration is not None:
        ordering = classify_regime(ensemble, cavity, pulse_duration).bad_cavity_ordering_ok
    return DerivedQuantities(
        cooperativity=coop,
        collective_coupling=gsn,
        finesse=finesse,
        quality=quality,
        alpha=alpha,
        alpha_l=alpha_l,
        regime=_regime(gsn, cavity.kappa, ensemble.gamma_inh),
        bad_cavity_ordering_ok=ordering,
    )


@dataclass(frozen=True)
class RegimeReport:
    regime: Regime
    single_dip: bool  # g*sqrt(N) < Gamma
    weak_coupling: bool  # kappa >= g*sqrt(N)
    bad_cavity_ordering_ok: bool
    margins: dict = field(default_factory=dict)


def classify_regime(ensemble: EnsembleParams, cavity: CavityParams, pulse_duration: float) -> RegimeReport:
    """Report the rate ordering Gamma > g*sqrt(N) > kappa > 1/T > gamma_h.

    ``margins`` holds the ratio of each adjacent pair; the chain holds when
    every margin exceeds 1 (the last one is infinite for gamma_h = 0).
    """
    gsn = ensemble.collective_coupling
    inv_t = 1.0 / pulse_duration if pulse_duration > 0 else math.inf
    margins = {
        "gamma_inh/collective": ensemble.gamma_inh / gsn if gsn > 0 else math.inf,
        "collective/kappa": gsn / cavity.kappa,
        "kappa*T": cavity.kappa / inv_t,
        "(1/T)/gamma_h": inv_t / ensemble.gamma_h if ensemble.gamma_h > 0 else math.inf,
    }
    return RegimeReport(
        regime=_regime(gsn, cavity.kappa, ensemble.gamma_inh),
        single_dip=gsn < ensemble.gamma_inh,
        weak_coupling=cavity.kappa >= gsn,
        bad_cavity_ordering_ok=all(m > 1.0 for m in margins.values()),
        margins=margins,
    )


def gaussian_sigma(gamma_inh: float) -> float:
    """Standard deviation of the Gaussian whose FWHM equals 2*Gamma."""
    return gamma_inh / _SQRT_2LN2


def line_density(omega_bar, gamma_inh: float, kind: DistKind = DistKind.LORENTZIAN):
    """Normalised spectral density n(omega_bar) in s/rad."""
    if not gamma_inh > 0:
        raise ValidationError("gamma_inh must be > 0")
    w = np.asarray(omega_bar, dtype=float)
    if DistKind(kind) is DistKind.LORENTZIAN:
        out = gamma_inh / math.pi / (gamma_inh**2 + w**2)
    else:
        s = gaussian_sigma(gamma_inh)
        out = np.exp(-0.5 * (w / s) ** 2) / (s * math.sqrt(TWO_PI))
    return float(out) if out.ndim == 0 else out
