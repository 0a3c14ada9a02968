"""Spin-echo contrast decay from thermal radial oscillations in the quadratic field profile.

Each Monte-Carlo trial is an atom oscillating harmonically in the radial
plane with Boltzmann-distributed initial position and velocity. Its qubit
detuning follows the second-order |B| profile around the displaced trap axis.
The echo contrast is the length of the ensemble-averaged phasor of the
echo phase.

Trials are seeded individually from ``(seed, trial_index)``. Results therefore
do not depend on chunking or on the number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from atomreg.bloch import PulseShape, propagate_batch
from atomreg.constants import BOLTZMANN, CS_MASS, KHZ_TO_HZ
from atomreg.errors import ConfigError
from atomreg.fieldmap import FieldConfig, radial_detuning

# quadrature step <= 1 / (QUAD_POINTS_PER_PERIOD * radial_freq)
QUAD_POINTS_PER_PERIOD = 100
CHUNK = 4096


@dataclass(frozen=True)
class ThermalConfig:
    temperature: float = 80.0  # uK
    radial_freq: float = 1.6  # kHz
    trials: int = 100_000
    seed: int = 0
    atom_mass: float = CS_MASS  # kg

    def __post_init__(self):
        if not self.temperature >= 0:
            raise ConfigError("temperature must be non-negative")
        if not self.radial_freq > 0:
            raise ConfigError("radial_freq must be positive")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.atom_mass > 0:
            raise ConfigError("atom_mass must be positive")

    @property
    def omega(self) -> float:
        """Angular radial frequency, rad/us."""
        return 2.0 * math.pi * self.radial_freq * 1e-3

    @property
    def period(self) -> float:
        """Radial oscillation period, us."""
        return 1e3 / self.radial_freq


class EchoTrialSample(NamedTuple):
    """Initial radial displacement (um) and velocity (um/us); fields may be arrays."""

    y0: float
    z0: float
    vy0: float
    vz0: float


def velocity_std(cfg: ThermalConfig) -> float:
    """sqrt(kB T / m) in um/us (numerically equal to m/s)."""
    return math.sqrt(BOLTZMANN * cfg.temperature * 1e-6 / cfg.atom_mass)


def position_std(cfg: ThermalConfig) -> float:
    """sqrt(kB T / (m w^2)) in um."""
    return velocity_std(cfg) / cfg.omega


def _normals(seed: int, index: int) -> np.ndarray:
    return np.random.default_rng([seed, index]).standard_normal(4)


def sample_trial(cfg: ThermalConfig, index: int) -> EchoTrialSample:
    """Boltzmann draw for trial ``index``; identical to row ``index`` of :func:`sample_trials`."""
    g = _normals(cfg.seed, index)
    sx, sv = position_std(cfg), velocity_std(cfg)
    return EchoTrialSample(float(g[0] * sx), float(g[1] * sx), float(g[2] * sv), float(g[3] * sv))


@lru_cache(maxsize=512)
def _unit_normals(seed: int, start: int, stop: int) -> np.ndarray:
    out = np.array([_normals(seed, i) for i in range(start, stop)]).reshape(-1, 4)
    out.setflags(write=False)
    return out


def sample_trials(cfg: ThermalConfig, start: int = 0, stop: int | None = None) -> EchoTrialSample:
    """Vectorized draws for trials ``start..stop-1`` (default: all trials)."""
    stop = cfg.trials if stop is None else stop
    g = _unit_normals(cfg.seed, start, stop)
    sx, sv = position_std(cfg), velocity_std(cfg)
    return EchoTrialSample(g[:, 0] * sx, g[:, 1] * sx, g[:, 2] * sv, g[:, 3] * sv)


def radial_position(sample: EchoTrialSample, cfg: ThermalConfig, t):
    """(y(t), z(t)) of free harmonic motion relative to the trap centre, um.

    Array-valued samples broadcast against ``t`` along a trailing axis.
    """
    w = cfg.omega
    t = np.asarray(t, dtype=float)
    c, s = np.cos(w * t), np.sin(w * t)
    y0, z0, vy, vz = (np.asarray(v, dtype=float)[..., None] if np.ndim(v) else v for v in sample)
    return y0 * c + vy / w * s, z0 * c + vz / w * s


def trial_detuning(sample: EchoTrialSample, cfg: ThermalConfig, field: FieldConfig, t):
    """Qubit detuning (Hz) of a moving atom relative to one frozen on the displaced trap axis."""
    y, z = radial_position(sample, cfg, t)
    oy, oz = field.axis_offset_y, field.axis_offset_z
    return radial_detuning(field, y + oy, z + oz) - radial_detuning(field, oy, oz)


def _simpson_nodes(t0: float, t1: float, h_max: float):
    n = max(2, 2 * math.ceil((t1 - t0) / (2.0 * h_max)))
    t = np.linspace(t0, t1, n + 1)
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return t, w * (t1 - t0) / (3.0 * n)


def phase_integral(sample, cfg, field, t0: float, t1: float, h_max: float | None = None):
    """2*pi * int_{t0}^{t1} detuning dt in radians (composite Simpson)."""
    if t1 == t0:
        return np.zeros(np.shape(sample.y0))
    h_max = quadrature_step(cfg) if h_max is None else h_max
    t, w = _simpson_nodes(t0, t1, h_max)
    # detuning in Hz, time in us
    return 2.0 * math.pi * 1e-6 * (trial_detuning(sample, cfg, field, t) @ w)


def quadrature_step(cfg: ThermalConfig) -> float:
    return cfg.period / QUAD_POINTS_PER_PERIOD


class ContrastPoint(NamedTuple):
    echo_time: float  # us
    contrast: float
    stderr: float


def _contrast_from_phases(phases: np.ndarray) -> tuple[float, float]:
    """|<exp(i phi)>| and its delta-method standard error."""
    z = np.exp(1j * phases)
    m = z.mean()
    c = abs(m)
    n = phases.size
    if n < 2:
        return float(c), 0.0
    # fluctuation of |<z>| is the fluctuation of z projected on the mean direction
    u = m / c if c > 0 else 1.0
    proj = (z * np.conj(u)).real
    return float(c), float(proj.std(ddof=1) / math.sqrt(n))


def _chunk_bounds(trials: int):
    return [(s, min(s + CHUNK, trials)) for s in range(0, trials, CHUNK)]


def _echo_phase_chunk(args):
    cfg, field, echo_times, h_max, start, stop, ramsey = args
    sample = sample_trials(cfg, start, stop)
    out = []
    for te in echo_times:
        p1 = phase_integral(sample, cfg, field, 0.0, 0.5 * te, h_max)
        p2 = phase_integral(sample, cfg, field, 0.5 * te, te, h_max)
        out.append(p1 + p2 if ramsey else p2 - p1)
    return np.array(out).reshape(len(echo_times), -1)


def _map_chunks(fn, tasks, workers: int):
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _validate_times(echo_times: Sequence[float]) -> list[float]:
    times = [float(t) for t in echo_times]
    if any(not t > 0 for t in times):
        raise ConfigError("echo times must be positive")
    return times


def _phase_contrast(cfg, field, echo_times, h_max, workers, ramsey):
    times = _validate_times(echo_times)
    h_max = quadrature_step(cfg) if h_max is None else h_max
    tasks = [(cfg, field, times, h_max, a, b, ramsey) for a, b in _chunk_bounds(cfg.trials)]
    phases = np.concatenate(_map_chunks(_echo_phase_chunk, tasks, workers), axis=1)
    return [ContrastPoint(te, *_contrast_from_phases(ph)) for te, ph in zip(times, phases)]


def echo_contrast(
    cfg: ThermalConfig,
    field: FieldConfig,
    echo_times: Sequence[float],
    *,
    step: float | None = None,
    workers: int = 1,
) -> list[ContrastPoint]:
    """Spin-echo contrast with instantaneous pi/2 - pi - pi/2 pulses.

    The pi pulse sits at t_e/2; the echo phase is the detuning phase
    accumulated after it minus the phase accumulated before it.
    """
    return _phase_contrast(cfg, field, echo_times, step, workers, ramsey=False)


def ramsey_contrast(
    cfg: ThermalConfig,
    field: FieldConfig,
    times: Sequence[float],
    *,
    step: float | None = None,
    workers: int = 1,
) -> list[ContrastPoint]:
    """Free-precession (no refocusing pulse) contrast, using the same trials as the echo."""
    return _phase_contrast(cfg, field, times, step, workers, ramsey=True)


def _free(theta):
    """Carrier-frame free evolution for accumulated detuning phase ``theta`` (batch,)."""
    U = np.zeros(np.shape(theta) + (2, 2), dtype=complex)
    U[..., 0, 0] = np.exp(0.5j * theta)
    U[..., 1, 1] = np.exp(-0.5j * theta)
    return U


def _pulse_in_carrier_frame(shape, sample, cfg, field, t_start, refine):
    """Carrier-frame propagators of one finite pulse starting at absolute time ``t_start``."""

    def detuning_khz(t_local):
        return trial_detuning(sample, cfg, field, t_start + t_local) / KHZ_TO_HZ

    U_atom, theta = propagate_batch(shape, detuning_khz, refine=refine)
    # atom frame -> carrier frame: undo the free precession accumulated over the pulse
    return _free(theta) @ U_atom


def _pulsed_chunk(args):
    cfg, field, echo_times, pulse, h_max, refine, start, stop = args
    sample = sample_trials(cfg, start, stop)
    half_pi = pulse.with_area(0.5 * math.pi)
    d_half, d_pi = half_pi.length, pulse.length
    out = []
    for te in echo_times:
        # pulse centres at 0, te/2, te
        U1 = _pulse_in_carrier_frame(half_pi, sample, cfg, field, -0.5 * d_half, refine)
        U2 = _pulse_in_carrier_frame(pulse, sample, cfg, field, 0.5 * (te - d_pi), refine)
        U3 = _pulse_in_carrier_frame(half_pi, sample, cfg, field, te - 0.5 * d_half, refine)
        F1 = _free(phase_integral(sample, cfg, field, 0.5 * d_half, 0.5 * (te - d_pi), h_max))
        F2 = _free(phase_integral(sample, cfg, field, 0.5 * (te + d_pi), te - 0.5 * d_half, h_max))
        psi = (F2 @ U2 @ F1 @ U1)[..., :, 0]
        p1 = []
        # last pulse with drive phase q: R(q) U3 R(q)^dag, R = diag(e^{-iq/2}, e^{iq/2})
        for q in (0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi):
            rotated = psi * np.array([np.exp(0.5j * q), np.exp(-0.5j * q)])
            final = np.einsum("...ij,...j->...i", U3, rotated)
            p1.append(np.abs(final[..., 1]) ** 2)
        out.append(np.array(p1))
    return np.array(out)  # (times, 4, batch)


def echo_contrast_pulsed(
    cfg: ThermalConfig,
    field: FieldConfig,
    echo_times: Sequence[float],
    pulse: PulseShape,
    *,
    step: float | None = None,
    refine: int = 1,
    workers: int = 1,
) -> list[ContrastPoint]:
    """Spin-echo contrast with finite pulses integrated by the Bloch propagator.

    ``pulse`` is the calibrated pi pulse; the pi/2 pulses share its envelope
    at half the area. Pulses are centred at 0, t_e/2 and t_e, and each
    trial's instantaneous detuning acts during them. The contrast is the
    fringe amplitude of the final |1> population as the phase of the last
    pulse is stepped through four quadratures.
    """
    times = _validate_times(echo_times)
    for te in times:
        if pulse.length > 0.5 * te:
            raise ConfigError(f"pulse of {pulse.length} us does not fit in half of t_e = {te} us")
    h_max = quadrature_step(cfg) if step is None else step
    tasks = [(cfg, field, times, pulse, h_max, refine, a, b) for a, b in _chunk_bounds(cfg.trials)]
    p1 = np.concatenate(_map_chunks(_pulsed_chunk, tasks, workers), axis=2)
    points = []
    for te, pts in zip(times, p1):
        p = pts.mean(axis=1)
        c = math.hypot(p[0] - p[2], p[1] - p[3])
        n = pts.shape[1]
        if n > 1 and c > 0:
            # delta method on the two quadrature differences
            dx, dy = pts[0] - pts[2], pts[1] - pts[3]
            proj = (dx * (p[0] - p[2]) + dy * (p[1] - p[3])) / c
            err = float(proj.std(ddof=1) / math.sqrt(n))
        else:
            err = 0.0
        # clip rounding excess above 1
        points.append(ContrastPoint(te, min(c, 1.0), err))
    return points
