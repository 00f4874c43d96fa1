import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resetctl import (NO_NOISE, NO_QUANTIZER, TABLE1_PARAMS, DeltaTuningSpec, DomainError,
                      GuaranteeVoidError, InvalidContextError, ReferenceSignal, ResetController,
                      SimConfig, StateSpace, bls_sensitivity, error_from_disturbance,
                      freq_response, make_cglp_pid, series, simulate, tune_delta,
                      verify_no_reset)
from resetctl.elements import linearized
from resetctl.tuning import delta_sweep

from conftest import Q_TABLE1, mass_plant

W_OP = 2 * math.pi * 6.4
LAG = StateSpace([[-1.0]], [[1.0]], [[1.0]], [[0.0]])
CLEGG10 = ResetController(StateSpace([[0.0]], [[10.0]], [[1.0]], [[0.0]]), [[0.0]])


@pytest.fixture(scope="module")
def loop():
    return mass_plant(), make_cglp_pid(TABLE1_PARAMS)


class TestSensitivity:
    def test_operating_point(self, loop):
        # frozen; the published figure is 0.00117
        assert bls_sensitivity(*loop, W_OP) == pytest.approx(0.00104538, rel=1e-5)

    def test_low_frequency_limit(self, loop):
        assert bls_sensitivity(*loop, 1e-3) < 1e-9

    def test_crossover_geometry(self, loop):
        from scipy.optimize import brentq
        P, rc = loop
        L = series(rc.base, P)
        wc = brentq(lambda w: abs(freq_response(L, w)) - 1, 100, 1e4)
        pm = math.pi + np.angle(freq_response(L, wc))
        s = bls_sensitivity(P, rc, wc)
        assert s == pytest.approx(1 / (2 * math.sin(pm / 2)), rel=1e-8)
        assert s >= 0.5

    def test_unstable_context(self):
        neg = ResetController(StateSpace([[0.0]], [[-1.0]], [[1.0]], [[0.0]]), [[0.0]])
        with pytest.raises(InvalidContextError):
            bls_sensitivity(LAG, neg, 1.0)
        with pytest.raises(InvalidContextError):
            error_from_disturbance(LAG, neg, 1.0, 1.0)

    def test_disturbance(self, loop):
        P, rc = loop
        assert error_from_disturbance(P, rc, 0.0, 50.0) == 0.0
        want = abs(freq_response(P, 50.0)) * bls_sensitivity(P, rc, 50.0)
        v = error_from_disturbance(P, rc, 1.0, 50.0)
        assert v == pytest.approx(want, rel=1e-12)
        assert v == pytest.approx(7.7277e-7, rel=1e-4)
        # PS tends to 1/|C| as w -> 0 when C has an integrator
        lo = error_from_disturbance(P, rc, 1.0, 1e-4)
        assert math.isfinite(lo)
        assert lo == pytest.approx(1 / abs(freq_response(rc.base, 1e-4)), rel=1e-3)

    def test_domain(self, loop):
        with pytest.raises(DomainError):
            bls_sensitivity(*loop, 0.0)
        with pytest.raises(DomainError):
            error_from_disturbance(*loop, -1.0, 1.0)


class TestTuneDelta:
    def test_zero(self, loop):
        spec = DeltaTuningSpec(50.0, ReferenceSignal.sine(0.0, 10.0))
        assert tune_delta(*loop, spec) == 0.0

    def test_single_sine(self, loop):
        spec = DeltaTuningSpec(50.0, ReferenceSignal.sine(5e-3, W_OP), Q_TABLE1)
        d = tune_delta(*loop, spec)
        assert d == pytest.approx(5e-3 * bls_sensitivity(*loop, W_OP) + Q_TABLE1 / 2, rel=1e-12)
        assert d == pytest.approx(10.110e-6, rel=1e-4)

    def test_published_arithmetic(self):
        # the formula with the published |S| = 0.00117
        assert 5000 * 0.00117 + 0.5 * 5000 / 2**9 == pytest.approx(10.73, abs=0.01)

    def test_double_sine(self, loop):
        comps = [(5e-3, 2 * math.pi * 5), (5e-3 / 3, 2 * math.pi * 25)]
        spec = DeltaTuningSpec(200.0, ReferenceSignal(comps), Q_TABLE1)
        want = sum(a * bls_sensitivity(*loop, w) for a, w in comps) + Q_TABLE1 / 2
        assert tune_delta(*loop, spec) == pytest.approx(want, rel=1e-12)
        assert tune_delta(*loop, spec) == pytest.approx(67.043e-6, rel=1e-4)

    def test_guarantee_void(self, loop):
        spec = DeltaTuningSpec(50.0, ReferenceSignal.sine(1e-3, 60.0))
        with pytest.raises(GuaranteeVoidError):
            tune_delta(*loop, spec)
        assert tune_delta(*loop, spec, force=True) > 0

    @pytest.mark.parametrize("kw", [{"omega_s": 0}, {"k": 0.5}, {"Q": -1}, {"noise_margin": -1}])
    def test_spec_validation(self, kw):
        args = dict(omega_s=10.0, reference=ReferenceSignal.sine(1.0, 1.0))
        args.update(kw)
        with pytest.raises(DomainError):
            DeltaTuningSpec(**args)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0, 1e-4), st.floats(1, 3), st.floats(0, 1e-4), st.floats(0, 1e-2),
           st.sampled_from(["Q", "k", "noise_margin", "amplitude"]), st.floats(0, 2))
    def test_monotone(self, Q, k, nm, amp, which, bump):
        P, rc = mass_plant(), make_cglp_pid(TABLE1_PARAMS)

        def delta(Q, k, nm, amp):
            spec = DeltaTuningSpec(50.0, ReferenceSignal([(amp, 20.0), (1e-3, 5.0)]), Q, k, nm)
            return tune_delta(P, rc, spec)

        base = dict(Q=Q, k=k, nm=nm, amp=amp)
        key = {"noise_margin": "nm", "amplitude": "amp"}.get(which, which)
        more = dict(base)
        more[key] = base[key] + bump
        assert delta(**more) >= delta(**base)


class TestVerify:
    # 100 kHz: at 10 kHz the sampled Table 1 loop chatters after transient resets
    CFG = SimConfig(fs=1e5, periods=8)

    def spec(self, k=1.5):
        return DeltaTuningSpec(50.0, ReferenceSignal.sine(5e-3, 20.0), 0.0, k)

    def test_tuned_passes(self, loop):
        spec = self.spec()
        d = tune_delta(*loop, spec)
        v = verify_no_reset(*loop, NO_QUANTIZER, spec, d, self.CFG)
        assert v.ok and v.resets == 0

    def test_halved_fails(self, loop):
        spec = self.spec()
        d = tune_delta(*loop, spec) / 2
        v = verify_no_reset(*loop, NO_QUANTIZER, spec, d, self.CFG)
        assert not v.ok
        assert v.omega is None
        assert v.resets > 0 and v.max_error > d

    def test_zero_amplitude(self):
        spec = DeltaTuningSpec(1.0, ReferenceSignal.sine(0.0, 0.2))
        assert verify_no_reset(LAG, CLEGG10, NO_QUANTIZER, spec, 1e-3).ok

    def test_needs_positive_delta(self):
        with pytest.raises(DomainError):
            verify_no_reset(LAG, CLEGG10, NO_QUANTIZER, self.spec(), 0.0)


def test_superposition_bound():
    P, rc = mass_plant(), make_cglp_pid(TABLE1_PARAMS)
    comps = [(5e-3, 2 * math.pi * 5), (5e-3 / 3, 2 * math.pi * 25)]
    ref = ReferenceSignal(comps)
    bound = tune_delta(P, rc, DeltaTuningSpec(200.0, ref))
    tr = simulate(P, linearized(rc), NO_QUANTIZER, ref, NO_NOISE, SimConfig(fs=1e5, duration=2.0))
    assert tr.steady_max_error() <= bound


def test_delta_sweep_validation():
    with pytest.raises(DomainError):
        delta_sweep(LAG, CLEGG10, NO_QUANTIZER, NO_NOISE, SimConfig(), 1.0, 1.0, [2.0, 1.0])
