import math

import numpy as np
from hypothesis import given, settings, strategies as st

from spinmem import export
from spinmem.analytic import absorption_efficiency, reflection, reflection_rational, total_efficiency
from spinmem.dynamics import GaussianPulse, SimState, apply_pi_pulse, discretize, evolve
from spinmem.model import CavityParams, EnsembleParams, FrequencyConvention, Geometry, derive
from spinmem.noise import collective_noise_probability, snr_collective

pos = st.floats(min_value=1e-2, max_value=1e2, allow_nan=False)
freq = st.floats(min_value=-300.0, max_value=300.0, allow_nan=False)


@given(gsn=pos, gamma=pos, kappa=pos, gh=st.floats(0, 5), kint=st.floats(0, 5), w=freq)
def test_reflection_is_passive(gsn, gamma, kappa, gh, kint, w):
    e = EnsembleParams.from_collective(gsn, gamma, gamma_h=gh)
    r = reflection(w, e, CavityParams(kappa, kappa_int=kint))
    assert -1e-12 <= r <= 1.0 + 1e-12


@given(gsn=pos, gamma=pos, kappa=pos, w=freq)
def test_reflection_symmetric_and_rational(gsn, gamma, kappa, w):
    e, cav = EnsembleParams.from_collective(gsn, gamma), CavityParams(kappa)
    r = reflection(w, e, cav)
    assert math.isclose(r, reflection(-w, e, cav), rel_tol=1e-9, abs_tol=1e-14)
    assert math.isclose(r, reflection_rational(w, e, cav), rel_tol=1e-8, abs_tol=1e-12)


@given(gsn=pos, gamma=pos)
def test_match_point_is_a_zero(gsn, gamma):
    e = EnsembleParams.from_collective(gsn, gamma)
    assert reflection(0.0, e, CavityParams(e.g2n / gamma)) <= 1e-20


@given(c=st.floats(min_value=1e-3, max_value=1e3))
def test_efficiency_symmetry_and_bounds(c):
    assert math.isclose(total_efficiency(c), total_efficiency(1.0 / c), rel_tol=1e-12)
    assert 0.0 <= total_efficiency(c) <= absorption_efficiency(c) <= 1.0
    assert math.isclose(total_efficiency(c), absorption_efficiency(c) ** 2, rel_tol=1e-12)


@given(c=st.floats(1e-2, 1e2), f=st.floats(1e2, 1e6), kappa=pos, t=pos)
def test_snr_noise_product(c, f, kappa, t):
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        prod = snr_collective(f, c, kappa, t) * collective_noise_probability(f, c, kappa, t)
    assert math.isclose(prod, total_efficiency(c), rel_tol=1e-12)


@given(gsn=pos, gamma=pos, kappa=pos, length=st.floats(1e-3, 10), v=st.floats(1e6, 3e8))
def test_finesse_absorption_identity(gsn, gamma, kappa, length, v):
    e = EnsembleParams.from_collective(gsn, gamma)
    d = derive(e, CavityParams(kappa, geometry=Geometry(length=length, phase_velocity=v)))
    assert math.isclose(d.finesse * d.alpha_l, math.pi * d.cooperativity, rel_tol=1e-12)


@given(m=st.integers(1, 3000), p=st.floats(0.0, 0.2), kind=st.sampled_from(["lorentzian", "gaussian"]))
def test_bins_invariants(m, p, kind):
    b = discretize(kind, 1.7, m, p)
    assert len(b) == m
    assert abs(b.weights.sum() - 1.0) <= 1e-9
    np.testing.assert_array_equal(b.centers, -b.centers[::-1])


@given(st.lists(st.complex_numbers(max_magnitude=1e6, allow_nan=False, allow_infinity=False), min_size=1,
                max_size=20))
def test_pi_pulse_involution(values):
    s = SimState(0.0, 1j, np.array(values, dtype=complex))
    np.testing.assert_array_equal(apply_pi_pulse(apply_pi_pulse(s)).coherences, s.coherences)


@settings(max_examples=20, deadline=None)
@given(a=st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3, allow_nan=False, allow_infinity=False),
       r=st.floats(-1e3, 1e3).filter(lambda x: abs(x) > 1e-3))
def test_evolve_linearity(a, r):
    e, cav = EnsembleParams.from_collective(2.0, 3.0), CavityParams(1.0)
    bins = discretize("lorentzian", 3.0, 32)
    kw = dict(dt=0.02, t_end=6.0, t_start=-3.0)
    base = evolve(e, cav, bins, GaussianPulse(0.0, 1.0, 1.0), **kw)
    scaled = evolve(e, cav, bins, GaussianPulse(0.0, 1.0, a), **kw)
    np.testing.assert_allclose(scaled.e_out, a * base.e_out, rtol=1e-10, atol=1e-13 * abs(a))
    # a pi pulse conjugates the spins only, so with pulses the map is real-linear
    base = evolve(e, cav, bins, GaussianPulse(0.0, 1.0, 1.0), events=(2.0,), **kw)
    scaled = evolve(e, cav, bins, GaussianPulse(0.0, 1.0, r), events=(2.0,), **kw)
    np.testing.assert_allclose(scaled.e_out, r * base.e_out, rtol=1e-10, atol=1e-13 * abs(r))


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_csv_float_round_trip(x):
    assert float(export.fmt(x)) == x


@given(x=st.floats(-1e6, 1e6), angular=st.booleans())
def test_unit_round_trip(x, angular):
    conv = FrequencyConvention(angular)
    assert math.isclose(conv.from_internal(conv.to_internal(x)), x, rel_tol=1e-14, abs_tol=1e-300)
