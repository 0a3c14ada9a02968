import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atomreg.bloch import GAUSSIAN, SQUARE, calibrate_pi_pulse
from atomreg.errors import ConfigError
from atomreg.fieldmap import FieldConfig, radial_curvature
from atomreg.dephasing import (
    EchoTrialSample,
    ThermalConfig,
    echo_contrast,
    echo_contrast_pulsed,
    phase_integral,
    position_std,
    ramsey_contrast,
    sample_trial,
    sample_trials,
    trial_detuning,
    velocity_std,
)

Z_OFFSET = FieldConfig()  # default: trap axis 15 um off the symmetry plane along z
Y_OFFSET = FieldConfig(axis_offset_y=15.0, axis_offset_z=0.0)
NO_OFFSET = FieldConfig(axis_offset_y=0.0, axis_offset_z=0.0)
COLD = ThermalConfig(temperature=0.0, trials=64)


def analytic_phase(sample, cfg, field, t0, t1):
    """2 pi int detuning dt for harmonic motion, integrated in closed form."""
    w = cfg.omega
    c = field.zeeman_coeff * 1e6 * radial_curvature(field)  # Hz / um^2

    def F(t, a, b, o, k):
        # int_0^t k ((a cos wt + b sin wt + o)^2 - o^2) dt
        s, cc, s2 = math.sin(w * t), math.cos(w * t), math.sin(2 * w * t)
        lin = 2 * o * (a * s / w + b * (1 - cc) / w)
        quad = a * a * (t / 2 + s2 / (4 * w)) + b * b * (t / 2 - s2 / (4 * w)) + a * b * (1 - math.cos(2 * w * t)) / (2 * w)
        return k * (lin + quad)

    def total(t):
        return F(t, sample.y0, sample.vy0 / w, field.axis_offset_y, c) + F(t, sample.z0, sample.vz0 / w, field.axis_offset_z, 4 * c)

    return 2 * math.pi * 1e-6 * (total(t1) - total(t0))


class TestThermalConfig:
    @pytest.mark.parametrize(
        "kwargs", [dict(temperature=-1.0), dict(radial_freq=0.0), dict(trials=0), dict(atom_mass=0.0)]
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            ThermalConfig(**kwargs)

    def test_period(self):
        assert ThermalConfig().period == pytest.approx(625.0)


class TestSampling:
    def test_position_std(self):
        # independent SI arithmetic
        kB, m = 1.380649e-23, 2.20695e-25
        sigma_m = math.sqrt(kB * 80e-6 / m) / (2 * math.pi * 1600.0)
        assert position_std(ThermalConfig()) == pytest.approx(sigma_m * 1e6, rel=1e-9)
        assert position_std(ThermalConfig()) == pytest.approx(7.0, abs=0.1)

    def test_velocity_std(self):
        assert velocity_std(ThermalConfig()) == pytest.approx(math.sqrt(1.380649e-23 * 80e-6 / 2.20695e-25), rel=1e-9)

    def test_zero_temperature_is_at_rest(self):
        s = sample_trials(COLD)
        for field in s:
            assert np.all(field == 0)

    def test_mean_and_spread(self):
        cfg = ThermalConfig(trials=100_000, seed=4)
        s = sample_trials(cfg)
        sx = position_std(cfg)
        assert abs(s.y0.mean()) < 4 * sx / math.sqrt(cfg.trials)
        assert abs(s.z0.mean()) < 4 * sx / math.sqrt(cfg.trials)
        assert s.y0.std() == pytest.approx(sx, rel=0.01)
        assert s.vz0.std() == pytest.approx(velocity_std(cfg), rel=0.01)

    @settings(max_examples=25)
    @given(seed=st.integers(0, 2**32), index=st.integers(0, 200))
    def test_single_matches_batch(self, seed, index):
        cfg = ThermalConfig(trials=201, seed=seed)
        one = sample_trial(cfg, index)
        batch = sample_trials(cfg, index, index + 1)
        assert one == EchoTrialSample(*(float(v[0]) for v in batch))

    def test_chunking_independent(self):
        cfg = ThermalConfig(trials=100, seed=9)
        whole = sample_trials(cfg)
        parts = [sample_trials(cfg, a, a + 25) for a in range(0, 100, 25)]
        for i, field in enumerate(whole):
            np.testing.assert_array_equal(field, np.concatenate([p[i] for p in parts]))


class TestTrialDetuning:
    def test_frozen_atom(self):
        still = EchoTrialSample(0.0, 0.0, 0.0, 0.0)
        t = np.linspace(0, 2000, 101)
        for field in (Z_OFFSET, Y_OFFSET, NO_OFFSET):
            assert np.all(trial_detuning(still, ThermalConfig(), field, t) == 0)

    def test_cross_term_scale(self):
        cfg = ThermalConfig()
        sample = EchoTrialSample(7.0, 0.0, 0.0, 0.0)
        d = trial_detuning(sample, cfg, Y_OFFSET, np.linspace(0, cfg.period, 401))
        c = abs(Y_OFFSET.zeeman_coeff) * 1e6 * radial_curvature(Y_OFFSET)
        # c * ((15 + 7)^2 - (15 - 7)^2)
        assert np.ptp(d) == pytest.approx(c * 420.0, rel=1e-6)
        assert 100 < np.ptp(d) < 1000

    def test_periodic(self):
        cfg = ThermalConfig()
        sample = sample_trial(replace(cfg, seed=2), 0)
        t = np.linspace(0, 300, 31)
        np.testing.assert_allclose(
            trial_detuning(sample, cfg, Z_OFFSET, t), trial_detuning(sample, cfg, Z_OFFSET, t + cfg.period), atol=1e-9
        )


class TestPhaseIntegral:
    @pytest.mark.parametrize("field", [Z_OFFSET, Y_OFFSET, NO_OFFSET])
    @pytest.mark.parametrize("span", [(0.0, 300.0), (300.0, 600.0), (17.0, 1250.0)])
    def test_against_closed_form(self, field, span):
        cfg = ThermalConfig(seed=6)
        for i in range(5):
            s = sample_trial(cfg, i)
            numeric = float(phase_integral(s, cfg, field, *span))
            exact = analytic_phase(s, cfg, field, *span)
            # Simpson error at period/100 is ~ (w h)^4 / 180
            assert numeric == pytest.approx(exact, rel=1e-6, abs=1e-10)
            fine = float(phase_integral(s, cfg, field, *span, h_max=cfg.period / 1000))
            assert fine == pytest.approx(exact, rel=1e-10, abs=1e-12)

    def test_empty_interval(self):
        s = sample_trials(ThermalConfig(trials=4))
        assert np.all(phase_integral(s, ThermalConfig(), Z_OFFSET, 5.0, 5.0) == 0)


class TestEchoContrast:
    def test_cold_ensemble(self):
        pts = echo_contrast(COLD, Z_OFFSET, [50.0, 600.0, 1250.0])
        assert all(p.contrast == pytest.approx(1.0, abs=1e-12) for p in pts)

    def test_short_times_and_bounds(self):
        cfg = ThermalConfig(trials=4000, seed=1)
        pts = echo_contrast(cfg, Z_OFFSET, [0.5, 100.0, 300.0, 600.0, 900.0, 1250.0])
        assert pts[0].contrast > 0.999
        assert all(0.0 <= p.contrast <= 1.0 for p in pts)
        assert all(p.stderr >= 0 for p in pts)

    def test_headline_point(self):
        pt = echo_contrast(ThermalConfig(trials=20_000), Z_OFFSET, [600.0])[0]
        assert abs(pt.contrast - 0.35) <= 0.10

    def test_revival_at_two_periods(self):
        pts = echo_contrast(ThermalConfig(trials=4000), Z_OFFSET, [600.0, 1250.0])
        assert pts[1].contrast > pts[0].contrast
        assert pts[1].contrast == pytest.approx(1.0, abs=1e-9)

    def test_rejects_nonpositive_times(self):
        with pytest.raises(ConfigError):
            echo_contrast(COLD, Z_OFFSET, [0.0])

    @pytest.mark.parametrize("offset_field", [Z_OFFSET, Y_OFFSET])
    def test_offset_dependence(self, offset_field):
        cfg = ThermalConfig(trials=4000, seed=3)
        centred = echo_contrast(cfg, NO_OFFSET, [600.0])[0].contrast
        offset = echo_contrast(cfg, offset_field, [600.0])[0].contrast
        assert centred > offset

    def test_step_halving(self):
        cfg = ThermalConfig(trials=4000, seed=5)
        times = [100.0, 350.0, 600.0, 1000.0]
        a = echo_contrast(cfg, Z_OFFSET, times)
        b = echo_contrast(cfg, Z_OFFSET, times, step=cfg.period / 200)
        for p, q in zip(a, b):
            assert abs(p.contrast - q.contrast) < 1e-3

    def test_stderr_scales(self):
        a = echo_contrast(ThermalConfig(trials=2000, seed=1), Z_OFFSET, [400.0])[0]
        b = echo_contrast(ThermalConfig(trials=8000, seed=1), Z_OFFSET, [400.0])[0]
        assert b.stderr == pytest.approx(a.stderr / 2, rel=0.15)


class TestEchoVersusRamsey:
    times = [50.0, 150.0, 300.0, 450.0, 600.0, 750.0, 900.0, 1100.0, 1250.0]

    @pytest.mark.parametrize("field", [Y_OFFSET, NO_OFFSET])
    def test_echo_beats_free_decay(self, field):
        cfg = ThermalConfig(trials=4000, seed=8)
        for e, r in zip(echo_contrast(cfg, field, self.times), ramsey_contrast(cfg, field, self.times)):
            assert e.contrast >= r.contrast - 3 * math.hypot(e.stderr, r.stderr)

    def test_z_offset_counterexample(self):
        # with the 4x stiffer z coefficient the free precession phase nearly
        # cancels over one radial period, while the echo only refocuses after two
        cfg = ThermalConfig(trials=4000, seed=8)
        e = echo_contrast(cfg, Z_OFFSET, [600.0])[0].contrast
        r = ramsey_contrast(cfg, Z_OFFSET, [600.0])[0].contrast
        assert r > e + 0.3


class TestReproducibility:
    def test_same_seed_bitwise(self):
        cfg = ThermalConfig(trials=5000, seed=12)
        assert echo_contrast(cfg, Z_OFFSET, [300.0, 600.0]) == echo_contrast(cfg, Z_OFFSET, [300.0, 600.0])

    def test_workers_bitwise(self):
        cfg = ThermalConfig(trials=9000, seed=12)
        assert echo_contrast(cfg, Z_OFFSET, [600.0], workers=2) == echo_contrast(cfg, Z_OFFSET, [600.0], workers=1)

    def test_seeds_agree_statistically(self):
        times = [200.0, 600.0, 1000.0]
        a = echo_contrast(ThermalConfig(trials=100_000, seed=1), Z_OFFSET, times)
        b = echo_contrast(ThermalConfig(trials=100_000, seed=2), Z_OFFSET, times)
        for p, q in zip(a, b):
            assert abs(p.contrast - q.contrast) < 0.01


class TestPulsedEcho:
    def test_short_pulse_limit(self):
        cfg = ThermalConfig(trials=4000, seed=2)
        pulse = calibrate_pi_pulse(SQUARE, 1.0)
        finite = echo_contrast_pulsed(cfg, Z_OFFSET, [600.0], pulse)[0].contrast
        ideal = echo_contrast(cfg, Z_OFFSET, [600.0])[0].contrast
        assert abs(finite - ideal) < 0.02

    @pytest.mark.parametrize("pulse", [calibrate_pi_pulse(SQUARE, 1.0), calibrate_pi_pulse(GAUSSIAN, 8.85)])
    def test_cold_ensemble(self, pulse):
        pts = echo_contrast_pulsed(COLD, Z_OFFSET, [200.0, 600.0], pulse)
        assert all(p.contrast >= 0.999 for p in pts)

    def test_pulse_must_fit(self):
        with pytest.raises(ConfigError):
            echo_contrast_pulsed(COLD, Z_OFFSET, [20.0], calibrate_pi_pulse(SQUARE, 15.0))

    def test_step_halving(self):
        cfg = ThermalConfig(trials=1000, seed=3)
        pulse = calibrate_pi_pulse(SQUARE, 5.0)
        a = echo_contrast_pulsed(cfg, Z_OFFSET, [300.0, 600.0], pulse)
        b = echo_contrast_pulsed(cfg, Z_OFFSET, [300.0, 600.0], pulse, step=cfg.period / 200, refine=2)
        for p, q in zip(a, b):
            assert abs(p.contrast - q.contrast) < 1e-3

    def test_bounded(self):
        cfg = ThermalConfig(trials=500, seed=4)
        pts = echo_contrast_pulsed(cfg, Y_OFFSET, [100.0, 600.0], calibrate_pi_pulse(SQUARE, 2.0))
        assert all(0.0 <= p.contrast <= 1.0 for p in pts)
