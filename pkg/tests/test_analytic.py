import math

import numpy as np
import pytest
from scipy.integrate import quad

from spinmem import analytic
from spinmem.analytic import (NoDip, NoMatchExists, RegimeError, ResolutionError, Unbounded, UnsupportedClosedForm,
                              absorption_efficiency, dip_fwhm, impedance_match_kappa, multimode_capacity, reflection,
                              reflection_amplitude, reflection_rational, reflection_spectrum, steady_state_oracle,
                              strong_coupling_match, total_efficiency, weak_coupling_match)
from spinmem.dynamics import discretize
from spinmem.model import CavityParams, DistKind, EnsembleParams, Regime, ValidationError


def ens(gsn, gamma, **kw):
    return EnsembleParams.from_collective(gsn, gamma, **kw)


def quad_reflection(w, e, cav):
    """Independent oracle: integrate the Lorentzian line numerically."""
    def kernel(x, part):
        n = e.gamma_inh / math.pi / (x**2 + e.gamma_inh**2)
        v = n / (x - w - 1j * e.gamma_h)
        return v.real if part == 0 else v.imag
    pts = sorted({-e.gamma_inh, 0.0, e.gamma_inh, w})
    # gamma_h > 0 keeps the integrand smooth; the far tails beyond 2000 Gamma are negligible
    lo, hi = -2000 * e.gamma_inh, 2000 * e.gamma_inh
    re = quad(kernel, lo, hi, args=(0,), points=pts, limit=800)[0]
    im = quad(kernel, lo, hi, args=(1,), points=pts, limit=800)[0]
    s = re + 1j * im
    denom = cav.kappa_total - 1j * w - 1j * e.g2n * s
    return 2 * cav.kappa / denom - 1


def test_closed_form_matches_quadrature_oracle():
    e = ens(7.0, 10.0, gamma_h=0.8)
    cav = CavityParams(3.3)
    for w in (-17.0, -4.0, 0.0, 2.5, 11.0):
        assert reflection_amplitude(w, e, cav) == pytest.approx(quad_reflection(w, e, cav), abs=3e-6)


def test_closed_form_matches_rational_form():
    w = np.linspace(-80, 80, 1601)
    for gsn, gamma, kappa in [(7.0, 10.0, 4.9), (30.0, 2.5, 2.5), (3.0, 1.0, 17.0), (9, 27, 3)]:
        e, cav = ens(gsn, gamma), CavityParams(kappa)
        np.testing.assert_allclose(reflection(w, e, cav), reflection_rational(w, e, cav), rtol=1e-10, atol=1e-14)


def test_reflection_is_passive_and_symmetric():
    w = np.linspace(-50, 50, 1001)
    e, cav = ens(12.0, 5.0, gamma_h=0.3), CavityParams(2.0, kappa_int=0.4)
    r = reflection(w, e, cav)
    assert np.all(r <= 1.0 + 1e-12) and np.all(r >= 0.0)
    np.testing.assert_allclose(r, r[::-1], rtol=1e-12)


def test_no_coupling_is_a_perfect_mirror():
    w = np.linspace(-10, 10, 11)
    np.testing.assert_allclose(reflection(w, ens(0.0, 5.0), CavityParams(2.0)), 1.0, rtol=1e-14)


def test_impedance_match_zero():
    e = ens(9.0, 27.0)
    k = impedance_match_kappa(e)
    assert k == pytest.approx(3.0)
    assert reflection(0.0, e, CavityParams(k)) <= 1e-10


def test_strong_match_zero_location():
    # exact zeros of the rational form at kappa = Gamma: omega^2 = g^2N - Gamma^2
    e = ens(30.0, 2.5)
    sol = strong_coupling_match(e)
    assert sol.kappa_star == 2.5 and sol.match_frequencies == (-30.0, 30.0) and sol.dip_fwhm_predicted == 5.0
    w0 = math.sqrt(900.0 - 6.25)
    assert reflection(w0, e, CavityParams(2.5)) < 1e-20
    assert reflection(-w0, e, CavityParams(2.5)) < 1e-20


def test_match_regime_errors():
    with pytest.raises(RegimeError):
        strong_coupling_match(ens(2.0, 2.5))
    assert strong_coupling_match(ens(5.0, 2.5)).regime is Regime.BOUNDARY
    with pytest.raises(NoMatchExists):
        impedance_match_kappa(ens(0.0, 1.0))
    assert weak_coupling_match(ens(7.0, 10.0)).dip_fwhm_predicted == pytest.approx(4 * 4.9)
    assert weak_coupling_match(ens(30.0, 2.5)).dip_fwhm_predicted == pytest.approx(10.0)


def test_gaussian_closed_form_unsupported():
    with pytest.raises(UnsupportedClosedForm):
        reflection(0.0, ens(1.0, 1.0, dist_kind=DistKind.GAUSSIAN), CavityParams(1.0))


def test_efficiencies():
    assert absorption_efficiency(1.0) == 1.0
    assert total_efficiency(1.0) == 1.0
    assert total_efficiency(3.0) == pytest.approx(0.5625, rel=1e-15)
    assert total_efficiency(0.0) == 0.0
    assert total_efficiency(0.25) == pytest.approx(total_efficiency(4.0), rel=1e-15)
    assert total_efficiency(1.0, 1.0, 2.0, 12.0) == pytest.approx(math.exp(-1.0), rel=1e-15)
    with pytest.raises(ValidationError):
        total_efficiency(-0.1)
    with pytest.raises(ValidationError):
        total_efficiency(1.0, 1.0, 1.0, 0.0)


def test_multimode_capacity():
    assert multimode_capacity(250.0, 0.1) == pytest.approx(100.0)
    with pytest.raises(Unbounded):
        multimode_capacity(1.0, 0.0)


def test_spectrum_validation():
    with pytest.raises(ValidationError):
        reflection_spectrum(np.array([]), ens(1, 1), CavityParams(1))
    with pytest.raises(ValidationError):
        reflection_spectrum(np.array([1.0, 0.0]), ens(1, 1), CavityParams(1))


# dip widths at the spectrum parameter sets; expected values from the rational form
# evaluated at its analytic half-depth points (independent of the grid measurement)

def half_depth_width(e, cav, center):
    from scipy.optimize import brentq
    depth = 1.0 - reflection(center, e, cav)
    f = lambda w: (1.0 - reflection(w, e, cav)) - 0.5 * depth
    step = 1e-3
    hi = center
    while f(hi) > 0:
        hi += step * 50
    lo = center
    while f(lo) > 0:
        lo -= step * 50
    return brentq(f, center, hi, xtol=1e-12) - brentq(f, lo, center, xtol=1e-12)


@pytest.mark.parametrize("gsn,gamma,kappa,center,nominal", [
    (7.0, 10.0, 4.9, 0.0, 19.6),
    (30.0, 2.5, 360.0, 0.0, 10.0),
    (30.0, 2.5, 2.5, math.sqrt(893.75), 5.0),
])
def test_dip_fwhm(gsn, gamma, kappa, center, nominal):
    e, cav = ens(gsn, gamma), CavityParams(kappa)
    w = np.linspace(-80, 80, 160001)
    dips = dip_fwhm(reflection_spectrum(w, e, cav))
    c, width = min(dips, key=lambda d: abs(d[0] - center))
    assert c == pytest.approx(center, abs=2e-3)
    assert width == pytest.approx(half_depth_width(e, cav, center), abs=5e-3)
    assert width == pytest.approx(nominal, rel=0.15)


def test_dip_errors():
    w = np.linspace(-80, 80, 101)
    with pytest.raises(NoDip):
        dip_fwhm(reflection_spectrum(w, ens(0.0, 1.0), CavityParams(1.0)))
    with pytest.raises(ResolutionError):
        dip_fwhm(reflection_spectrum(np.linspace(-80, 80, 41), ens(30.0, 2.5), CavityParams(2.5)))
    with pytest.raises(ResolutionError):
        dip_fwhm(reflection_spectrum(np.linspace(-1, 1, 201), ens(7.0, 10.0), CavityParams(4.9)))


def test_oracle_converges_to_closed_form():
    # p = 0 so truncation does not set a floor; smoothed bin sum vs closed form
    e, cav = ens(9.0, 27.0), CavityParams(3.0)
    w = np.linspace(-81, 81, 321)
    errs = [analytic.oracle_discrepancy(discretize("lorentzian", 27.0, m, 0.0), w, e, cav)["relative"]
            for m in (100, 1000, 10000)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-4


def test_unsmoothed_oracle_is_discrete_steady_state():
    # single bin: the oracle is the exact two-mode response, checked by hand
    from spinmem.dynamics import SpinBins
    bins = SpinBins(np.array([0.5]), np.array([1.0]))
    e, cav = ens(2.0, 1.0, gamma_h=0.1), CavityParams(1.5)
    w = 0.3
    expected = 2 * 1.5 / (1.5 - 1j * w + 4.0 / (0.1 + 1j * (0.5 - w))) - 1
    assert steady_state_oracle(bins, w, e, cav) == pytest.approx(expected, rel=1e-13)
