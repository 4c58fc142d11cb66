"""Line-based ``key = value`` configuration files.

Format::

    # comment
    units.angular = true          # MHz values are angular (x 1e6 rad/s)
    ensemble.collective_coupling_mhz = 9
    ensemble.gamma_inh_mhz = 27
    cavity.kappa_mhz = 3
    protocol.duration_us = 3.3333333333333335

Frequencies carry an ``_mhz`` suffix and are converted once, on ingestion,
using ``units.angular``: true means ``x`` MHz is ``x * 1e6`` rad/s, false
means ``2 pi x * 1e6`` rad/s. Times carry ``_us`` (microseconds) or ``_s``.
Lists are comma separated.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .model import C_LIGHT, CavityParams, EnsembleParams, FrequencyConvention, Geometry, ValidationError
from .dynamics import SpinBins, discretize
from .protocol import ProtocolConfig

US = 1e-6

KNOWN_KEYS = {
    "units.angular",
    "ensemble.collective_coupling_mhz", "ensemble.g_mhz", "ensemble.n_spins", "ensemble.gamma_inh_mhz",
    "ensemble.gamma_h_mhz", "ensemble.dist_kind", "ensemble.center_offset_mhz",
    "cavity.kappa_mhz", "cavity.cooperativity", "cavity.kappa_int_mhz", "cavity.omega_r_mhz", "cavity.length_m",
    "cavity.wavelength_m", "cavity.phase_velocity_m_s",
    "protocol.duration_us", "protocol.tau1_us", "protocol.tau2_us", "protocol.detune_delta_mhz",
    "protocol.detune_on_us", "protocol.detune_off_us", "protocol.echo_halfwidth_us", "protocol.n_bins",
    "protocol.truncation_p", "protocol.dt_us", "protocol.t1_us", "protocol.amplitude",
    "spectrum.omega_min_mhz", "spectrum.omega_max_mhz", "spectrum.omega_points", "spectrum.kappa_values_mhz",
    "spectrum.kappa_min_mhz", "spectrum.kappa_max_mhz", "spectrum.kappa_points",
    "sweep.variable", "sweep.values", "sweep.start", "sweep.stop", "sweep.points",
    "design.t1_s", "design.duration_us", "design.tau1_us", "design.tau2_us", "design.frequency_ghz",
}


class ConfigParseError(ValidationError):
    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        self.line = line
        self.path = path
        where = f"{path or '<config>'}:{line}: " if line is not None else ""
        super().__init__(where + message)


@dataclass
class RawConfig:
    values: dict
    lines: dict  # key -> line number
    path: Optional[str] = None
    digest: str = ""

    def has(self, key: str) -> bool:
        return key in self.values

    def _error(self, key: str, message: str) -> ConfigParseError:
        return ConfigParseError(f"{key}: {message}", self.lines.get(key), self.path)

    def get_str(self, key: str, default=None, required: bool = False):
        if key not in self.values:
            if required:
                raise ConfigParseError(f"missing required key {key}", None, self.path)
            return default
        return self.values[key]

    def get_float(self, key: str, default=None, required: bool = False):
        raw = self.get_str(key, None, required)
        if raw is None:
            return default
        try:
            value = float(raw)
        except ValueError:
            raise self._error(key, f"expected a number, got {raw!r}") from None
        if not math.isfinite(value):
            raise self._error(key, "value must be finite")
        return value

    def get_int(self, key: str, default=None, required: bool = False):
        value = self.get_float(key, None, required)
        if value is None:
            return default
        if value != int(value):
            raise self._error(key, "expected an integer")
        return int(value)

    def get_bool(self, key: str, default: bool = False) -> bool:
        raw = self.get_str(key)
        if raw is None:
            return default
        low = raw.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise self._error(key, f"expected true/false, got {raw!r}")

    def get_list(self, key: str, required: bool = False) -> Optional[list]:
        raw = self.get_str(key, None, required)
        if raw is None:
            return None
        items = [x.strip() for x in raw.split(",") if x.strip()]
        try:
            return [float(x) for x in items]
        except ValueError:
            raise self._error(key, f"expected a comma separated list of numbers, got {raw!r}") from None


def parse_text(text: str, path: Optional[str] = None) -> RawConfig:
    values, lines = {}, {}
    for n, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigParseError(f"expected 'key = value', got {line.strip()!r}", n, path)
        key, value = (s.strip() for s in body.split("=", 1))
        if not key or not value:
            raise ConfigParseError("empty key or value", n, path)
        if key not in KNOWN_KEYS:
            raise ConfigParseError(f"unknown key {key!r}", n, path)
        if key in values:
            raise ConfigParseError(f"duplicate key {key!r} (first on line {lines[key]})", n, path)
        values[key] = value
        lines[key] = n
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return RawConfig(values, lines, path, digest)


def load(path) -> RawConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigParseError(f"cannot read config: {exc}", None, str(p)) from None
    return parse_text(text, str(p))


def convention(raw: RawConfig) -> FrequencyConvention:
    return FrequencyConvention(is_angular=raw.get_bool("units.angular", True))


def _freq(raw: RawConfig, key: str, default=None, required=False):
    v = raw.get_float(key, None, required)
    return default if v is None else convention(raw).to_internal(v)


def _time_us(raw: RawConfig, key: str, default=None, required=False):
    v = raw.get_float(key, None, required)
    return default if v is None else v * US


def _field(key: str) -> str:
    name = key.split(".", 1)[-1]
    for suffix in ("_mhz", "_us", "_m_s", "_m", "_s"):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return name


def _wrap(raw: RawConfig, key_hint: str, fn):
    """Run a constructor; report validation errors at the line of the key they name."""
    try:
        return fn()
    except ConfigParseError:
        raise
    except ValidationError as exc:
        msg = str(exc)
        named = [k for k in raw.lines if msg.startswith(_field(k))]
        line = raw.lines[named[0]] if named else raw.lines.get(key_hint)
        raise ConfigParseError(msg, line, raw.path) from None


def ensemble_from(raw: RawConfig) -> EnsembleParams:
    gamma = _freq(raw, "ensemble.gamma_inh_mhz", required=True)
    kw = dict(
        gamma_h=_freq(raw, "ensemble.gamma_h_mhz", 0.0),
        dist_kind=raw.get_str("ensemble.dist_kind", "lorentzian").lower(),
        center_offset=_freq(raw, "ensemble.center_offset_mhz", 0.0),
    )
    if kw["dist_kind"] not in ("lorentzian", "gaussian"):
        raise raw._error("ensemble.dist_kind", "must be lorentzian or gaussian")
    if raw.has("ensemble.collective_coupling_mhz"):
        gsn = _freq(raw, "ensemble.collective_coupling_mhz")
        n = raw.get_float("ensemble.n_spins", 1.0)
        return _wrap(raw, "ensemble.collective_coupling_mhz",
                     lambda: EnsembleParams.from_collective(gsn, gamma, n_spins=n, **kw))
    g = _freq(raw, "ensemble.g_mhz", required=True)
    n = raw.get_float("ensemble.n_spins", required=True)
    return _wrap(raw, "ensemble.g_mhz", lambda: EnsembleParams(g=g, n_spins=n, gamma_inh=gamma, **kw))


def geometry_from(raw: RawConfig) -> Optional[Geometry]:
    length = raw.get_float("cavity.length_m")
    wavelength = raw.get_float("cavity.wavelength_m")
    velocity = raw.get_float("cavity.phase_velocity_m_s", C_LIGHT)
    if length is None and wavelength is None:
        if raw.has("cavity.phase_velocity_m_s"):
            raise raw._error("cavity.phase_velocity_m_s", "geometry partially specified: need length_m or wavelength_m")
        return None
    if length is None:
        length = wavelength / 2.0
    return _wrap(raw, "cavity.length_m", lambda: Geometry(length=length, phase_velocity=velocity, wavelength=wavelength))


def cavity_from(raw: RawConfig, ensemble: EnsembleParams, kappa: Optional[float] = None) -> CavityParams:
    if kappa is None:
        if raw.has("cavity.kappa_mhz"):
            kappa = _freq(raw, "cavity.kappa_mhz")
        elif raw.has("cavity.cooperativity"):
            c = raw.get_float("cavity.cooperativity")
            if not c > 0:
                raise raw._error("cavity.cooperativity", "must be > 0")
            kappa = ensemble.g2n / (c * ensemble.gamma_inh)
        else:
            raise ConfigParseError("missing required key cavity.kappa_mhz (or cavity.cooperativity)", None, raw.path)
    return _wrap(raw, "cavity.kappa_mhz", lambda: CavityParams(
        kappa=kappa,
        kappa_int=_freq(raw, "cavity.kappa_int_mhz", 0.0),
        omega_r=_freq(raw, "cavity.omega_r_mhz", 0.0),
        geometry=geometry_from(raw),
    ))


def protocol_from(raw: RawConfig) -> ProtocolConfig:
    ens = ensemble_from(raw)
    cav = cavity_from(raw, ens)
    window = None
    if raw.has("protocol.detune_on_us") or raw.has("protocol.detune_off_us"):
        window = (_time_us(raw, "protocol.detune_on_us", required=True),
                  _time_us(raw, "protocol.detune_off_us", required=True))
    cfg = ProtocolConfig(
        ensemble=ens,
        cavity=cav,
        duration=_time_us(raw, "protocol.duration_us", required=True),
        tau1=_time_us(raw, "protocol.tau1_us", required=True),
        tau2=_time_us(raw, "protocol.tau2_us", required=True),
        detune_delta=_freq(raw, "protocol.detune_delta_mhz", 0.0),
        detune_window=window,
        echo_window_halfwidth=_time_us(raw, "protocol.echo_halfwidth_us"),
        amplitude=raw.get_float("protocol.amplitude", 1.0),
        n_bins=raw.get_int("protocol.n_bins", 4000),
        truncation_p=raw.get_float("protocol.truncation_p", 0.01),
        dt=_time_us(raw, "protocol.dt_us"),
        t1=_time_us(raw, "protocol.t1_us"),
    )
    cfg.validate()
    return cfg


@dataclass(frozen=True)
class SpectrumGrid:
    omegas: np.ndarray
    kappas: tuple = field(default_factory=tuple)


def spectrum_grid_from(raw: RawConfig, ensemble: EnsembleParams) -> SpectrumGrid:
    lo = _freq(raw, "spectrum.omega_min_mhz", required=True)
    hi = _freq(raw, "spectrum.omega_max_mhz", required=True)
    n = raw.get_int("spectrum.omega_points", required=True)
    if n < 2 or not hi > lo:
        raise raw._error("spectrum.omega_points", "omega grid is empty: need omega_points >= 2 and max > min")
    kappas = raw.get_list("spectrum.kappa_values_mhz")
    if kappas is not None:
        if not kappas:
            raise raw._error("spectrum.kappa_values_mhz", "empty kappa list")
        kappas = [convention(raw).to_internal(k) for k in kappas]
    elif raw.has("spectrum.kappa_min_mhz"):
        k_lo = _freq(raw, "spectrum.kappa_min_mhz")
        k_hi = _freq(raw, "spectrum.kappa_max_mhz", required=True)
        k_n = raw.get_int("spectrum.kappa_points", required=True)
        if k_n < 1 or k_hi < k_lo or k_lo <= 0:
            raise raw._error("spectrum.kappa_points", "kappa grid is empty or nonpositive")
        kappas = list(np.linspace(k_lo, k_hi, k_n))
    else:
        kappas = None
    return SpectrumGrid(np.linspace(lo, hi, n), tuple(kappas) if kappas else ())


SWEEP_VARIABLES = ("kappa", "c", "delta", "gamma_h")


def sweep_values_from(raw: RawConfig) -> tuple[str, list]:
    """Sweep variable and its values in internal units (rad/s for kappa/delta/gamma_h)."""
    var = raw.get_str("sweep.variable", required=True).lower()
    if var not in SWEEP_VARIABLES:
        raise raw._error("sweep.variable", f"unknown sweep variable {var!r}; expected one of {SWEEP_VARIABLES}")
    values = raw.get_list("sweep.values")
    if values is None:
        start = raw.get_float("sweep.start", required=True)
        stop = raw.get_float("sweep.stop", required=True)
        n = raw.get_int("sweep.points", required=True)
        values = list(np.linspace(start, stop, n)) if n > 0 else []
    if not values:
        raise ConfigParseError("sweep has no values", raw.lines.get("sweep.values", raw.lines.get("sweep.points")),
                               raw.path)
    if var != "c":
        values = [convention(raw).to_internal(v) for v in values]
    return var, [float(v) for v in values]


def discretize_for_spectrum(raw: RawConfig, ensemble: EnsembleParams) -> SpinBins:
    """Bins for the oracle spectrum of a non-Lorentzian line (default M = 10^4)."""
    return discretize(ensemble.dist_kind, ensemble.gamma_inh, raw.get_int("protocol.n_bins", 10000),
                      raw.get_float("protocol.truncation_p", 0.01))
