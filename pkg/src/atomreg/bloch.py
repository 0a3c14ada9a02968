"""Rotating-wave two-level dynamics under shaped microwave pulses.

Hamiltonian in the frame of the microwave carrier (hbar = 1, basis |0>, |1>)::

    H(t) = -delta(t)/2 * sz + Omega(t)/2 * (cos(phi) sx + sin(phi) sy)

``delta`` is the atom's resonance minus the carrier. A resonant pulse of
area theta maps |0> to cos(theta/2)|0> - i sin(theta/2)|1>.

Propagators are reported in the atom's own rotating frame, where free
evolution is the identity and the drive acquires the phase
``phi + 2*pi*int(delta)``. The frame is referenced to the start of the pulse.
Integration is fixed-step classical RK4 carried out in that frame. Because
the ODE is linear, each step reduces to a 2x2 step matrix; the step matrices
are built vectorized and chained by pairwise reduction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple, Sequence, Union

import numpy as np
from scipy.special import erf

from atomreg.constants import KHZ_TO_RAD_PER_US
from atomreg.errors import ConfigError, IntegrationError, ResonantSpectatorError
from atomreg.fieldmap import FieldConfig, axial_slope

SQUARE = "square"
GAUSSIAN = "gaussian"
PULSE_KINDS = (SQUARE, GAUSSIAN)

# h <= 1 / (STEP_FACTOR * max(Omega0, |delta|max)), angular units
STEP_FACTOR = 50.0
# gaussian envelopes are additionally resolved with h <= sigma / ENVELOPE_POINTS
ENVELOPE_POINTS = 20.0
MAX_STEPS = 20_000_000
_BLOCK_ELEMENTS = 1 << 19

Detuning = Union[float, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class PulseShape:
    """Microwave pulse envelope.

    ``peak_rabi`` is the linear Rabi frequency Omega0/2pi in kHz. ``duration``
    is the full length of a square pulse or sigma of a gaussian, in us. A
    gaussian spans +-``truncation`` sigma around its centre.
    """

    kind: str
    peak_rabi: float
    duration: float
    truncation: float = 4.0

    def __post_init__(self):
        if self.kind not in PULSE_KINDS:
            raise ConfigError(f"unknown pulse kind {self.kind!r}")
        if not (np.isfinite(self.peak_rabi) and self.peak_rabi >= 0):
            raise ConfigError(f"peak_rabi must be >= 0, got {self.peak_rabi}")
        if not (np.isfinite(self.duration) and self.duration > 0):
            raise ConfigError(f"duration must be > 0, got {self.duration}")
        if self.kind == GAUSSIAN and not self.truncation >= 3:
            raise ConfigError(f"gaussian truncation must be >= 3 sigma, got {self.truncation}")

    @property
    def length(self) -> float:
        """Total time window of the pulse, us."""
        if self.kind == SQUARE:
            return self.duration
        return 2.0 * self.truncation * self.duration

    def envelope(self, t):
        """Rabi frequency (kHz) at pulse-local time ``t`` in [0, length]."""
        t = np.asarray(t, dtype=float)
        # stage times at the window edges may overshoot by rounding
        tol = 1e-12 * self.length
        inside = (t >= -tol) & (t <= self.length + tol)
        if self.kind == SQUARE:
            return np.where(inside, self.peak_rabi, 0.0)
        s = (t - 0.5 * self.length) / self.duration
        return np.where(inside, self.peak_rabi * np.exp(-0.5 * s * s), 0.0)

    def unit_area(self) -> float:
        """Pulse area in radians per kHz of peak Rabi frequency."""
        if self.kind == SQUARE:
            integral = self.duration
        else:
            integral = self.duration * math.sqrt(2 * math.pi) * float(erf(self.truncation / math.sqrt(2)))
        return KHZ_TO_RAD_PER_US * integral

    def area(self) -> float:
        return self.peak_rabi * self.unit_area()

    def with_area(self, angle: float) -> "PulseShape":
        """Same envelope with the peak rescaled so the resonant rotation angle is ``angle``."""
        if angle < 0:
            raise ConfigError("pulse area must be non-negative; use the drive phase for sign")
        return PulseShape(self.kind, angle / self.unit_area(), self.duration, self.truncation)


@dataclass(frozen=True)
class TwoLevelState:
    amp0: complex
    amp1: complex

    @classmethod
    def ground(cls) -> "TwoLevelState":
        return cls(1.0 + 0j, 0j)

    @classmethod
    def excited(cls) -> "TwoLevelState":
        return cls(0j, 1.0 + 0j)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.amp0, self.amp1], dtype=complex)

    @property
    def population1(self) -> float:
        return abs(self.amp1) ** 2

    @property
    def norm(self) -> float:
        return abs(self.amp0) ** 2 + abs(self.amp1) ** 2


@dataclass(frozen=True, eq=False)
class TwoLevelUnitary:
    """2x2 propagator; ``matrix[i, j]`` is the amplitude <i|U|j>."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex).reshape(2, 2)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "TwoLevelUnitary":
        return cls(np.eye(2, dtype=complex))

    u00 = property(lambda self: complex(self.matrix[0, 0]))
    u01 = property(lambda self: complex(self.matrix[0, 1]))
    u10 = property(lambda self: complex(self.matrix[1, 0]))
    u11 = property(lambda self: complex(self.matrix[1, 1]))

    @property
    def transfer(self) -> float:
        """Population transferred from |0> to |1>."""
        return abs(self.matrix[1, 0]) ** 2

    def unitarity_error(self) -> float:
        m = self.matrix
        return float(np.max(np.abs(m.conj().T @ m - np.eye(2))))

    def relative_phase(self) -> float:
        """arg(u00) - arg(u11) wrapped into (-pi, pi]."""
        return wrap_phase(np.angle(self.matrix[0, 0]) - np.angle(self.matrix[1, 1]))

    def apply(self, state: TwoLevelState) -> TwoLevelState:
        a0, a1 = self.matrix @ state.vector
        return TwoLevelState(complex(a0), complex(a1))

    def __matmul__(self, other: "TwoLevelUnitary") -> "TwoLevelUnitary":
        return TwoLevelUnitary(self.matrix @ other.matrix)

    def __eq__(self, other):
        return isinstance(other, TwoLevelUnitary) and np.array_equal(self.matrix, other.matrix)

    __hash__ = None


def wrap_phase(x):
    """Map angles into (-pi, pi]."""
    out = math.pi - np.mod(math.pi - np.asarray(x, dtype=float), 2 * math.pi)
    return float(out) if out.ndim == 0 else out


def _constant(value_rad: float) -> Callable[[np.ndarray], np.ndarray]:
    return lambda t: np.full(np.shape(t), value_rad)


def _step_matrices(shape, det_fn, phase, t, h, theta0):
    """RK4 step matrices for the steps starting at times ``t`` (n,).

    ``det_fn`` returns angular detuning (rad/us) with shape (..., n).
    Returns (P with shape (..., n, 2, 2), theta at the end of the last step).
    """
    w = KHZ_TO_RAD_PER_US
    half = 0.5 * h
    om_a = 0.5 * w * shape.envelope(t)
    om_m = 0.5 * w * shape.envelope(t + half)
    om_b = 0.5 * w * shape.envelope(t + h)
    d_a = det_fn(t)
    d_m = det_fn(t + half)
    d_b = det_fn(t + h)
    d_a, d_m, d_b = np.broadcast_arrays(d_a, d_m, d_b)

    inc = (h / 6.0) * (d_a + 4.0 * d_m + d_b)
    csum = np.cumsum(inc, axis=-1)
    theta_end = theta0 + csum[..., -1]
    th1 = np.asarray(theta0)[..., None] + csum - inc
    th2 = th1 + half * d_a
    th3 = th1 + half * d_m
    th4 = th1 + h * d_m

    # A = -i H = [[0, a], [b, 0]] with a = -i c e^{-i psi}, b = -i c e^{+i psi}
    def coupling(c, th):
        e = np.exp(-1j * (phase + th))
        return -1j * c * e, -1j * c * np.conj(e)

    a1, b1 = coupling(om_a, th1)
    a2, b2 = coupling(om_m, th2)
    a3, b3 = coupling(om_m, th3)
    a4, b4 = coupling(om_b, th4)

    # M1 = I + h/2 A1
    m1 = (1.0, half * a1, half * b1, 1.0)
    # A2 M1, A3 M2, A4 M3 with A M = [[a m10, a m11], [b m00, b m01]]
    am1 = (a2 * m1[2], a2 * m1[3], b2 * m1[0], b2 * m1[1])
    m2 = (1.0 + half * am1[0], half * am1[1], half * am1[2], 1.0 + half * am1[3])
    am2 = (a3 * m2[2], a3 * m2[3], b3 * m2[0], b3 * m2[1])
    m3 = (1.0 + h * am2[0], h * am2[1], h * am2[2], 1.0 + h * am2[3])
    am3 = (a4 * m3[2], a4 * m3[3], b4 * m3[0], b4 * m3[1])

    s = h / 6.0
    p00 = 1.0 + s * (2.0 * am1[0] + 2.0 * am2[0] + am3[0])
    p01 = s * (a1 + 2.0 * am1[1] + 2.0 * am2[1] + am3[1])
    p10 = s * (b1 + 2.0 * am1[2] + 2.0 * am2[2] + am3[2])
    p11 = 1.0 + s * (2.0 * am1[3] + 2.0 * am2[3] + am3[3])
    p00, p01, p10, p11 = np.broadcast_arrays(p00, p01, p10, p11)
    P = np.stack([np.stack([p00, p01], axis=-1), np.stack([p10, p11], axis=-1)], axis=-2)
    return P, theta_end


def _chain(P: np.ndarray) -> np.ndarray:
    """Ordered product P[n-1] @ ... @ P[0] along axis -3."""
    while P.shape[-3] > 1:
        if P.shape[-3] % 2:
            eye = np.broadcast_to(np.eye(2, dtype=complex), P.shape[:-3] + (1, 2, 2))
            P = np.concatenate([P, eye], axis=-3)
        P = P[..., 1::2, :, :] @ P[..., 0::2, :, :]
    return P[..., 0, :, :]


def step_count(shape: PulseShape, span: float, detuning_bound: float) -> int:
    """Number of fixed RK4 steps for a window of ``span`` us.

    ``detuning_bound`` is max |delta| in kHz.
    """
    rate = KHZ_TO_RAD_PER_US * max(shape.peak_rabi, abs(detuning_bound))
    h_max = math.inf if rate == 0 else 1.0 / (STEP_FACTOR * rate)
    if shape.kind == GAUSSIAN and shape.peak_rabi > 0:
        h_max = min(h_max, shape.duration / ENVELOPE_POINTS)
    if span <= 0:
        return 0
    n = 1 if math.isinf(h_max) else math.ceil(span / h_max)
    if n > MAX_STEPS:
        raise IntegrationError(
            f"pulse window of {span} us needs {n} steps (limit {MAX_STEPS}); step size underflow"
        )
    return n


def _evolve(shape, det_fn, phase, t_a, t_b, n, theta_a=0.0):
    """Atom-frame propagator over [t_a, t_b] with ``n`` steps; returns (U, theta_b)."""
    theta = np.asarray(theta_a, dtype=float)
    if n == 0:
        probe = np.asarray(det_fn(np.array([t_a])))
        batch = probe.shape[:-1]
        return np.broadcast_to(np.eye(2, dtype=complex), batch + (2, 2)).copy(), np.broadcast_to(theta, batch)
    h = (t_b - t_a) / n
    probe = np.asarray(det_fn(np.array([t_a])))
    batch_size = int(np.prod(probe.shape[:-1], dtype=int))
    block = max(64, _BLOCK_ELEMENTS // max(batch_size, 1))
    U = None
    for start in range(0, n, block):
        k = np.arange(start, min(start + block, n))
        t = t_a + k * h
        P, theta = _step_matrices(shape, det_fn, phase, t, h, theta)
        step = _chain(P)
        U = step if U is None else step @ U
    return U, theta


def _as_detuning_fn(detuning: Detuning) -> Callable[[np.ndarray], np.ndarray]:
    """Wrap a kHz detuning (constant or callable of pulse-local time) into rad/us."""
    if callable(detuning):
        return lambda t: KHZ_TO_RAD_PER_US * np.asarray(detuning(t), dtype=float)
    return _constant(KHZ_TO_RAD_PER_US * float(detuning))


def _detuning_bound(detuning: Detuning, t_a: float, t_b: float) -> float:
    if not callable(detuning):
        value = float(detuning)
        if not np.isfinite(value):
            raise ConfigError("detuning must be finite")
        return abs(value)
    samples = np.asarray(detuning(np.linspace(t_a, t_b, 2049)), dtype=float)
    if not np.all(np.isfinite(samples)):
        raise ConfigError("detuning must be finite over the pulse window")
    return float(np.max(np.abs(samples))) if samples.size else 0.0


def _phase_offset(detuning: Detuning, shape: PulseShape, t: float, refine: int) -> float:
    """Accumulated detuning phase (rad) between the pulse start and pulse-local time ``t``."""
    if t == 0:
        return 0.0
    if not callable(detuning):
        return KHZ_TO_RAD_PER_US * float(detuning) * t
    n = refine * step_count(shape, t, _detuning_bound(detuning, 0.0, t))
    grid = np.linspace(0.0, t, 2 * n + 1)
    vals = KHZ_TO_RAD_PER_US * np.asarray(detuning(grid), dtype=float)
    h = t / n
    return float(h / 6.0 * (vals[0] + vals[-1] + 4.0 * vals[1:-1:2].sum() + 2.0 * vals[2:-1:2].sum()))


@lru_cache(maxsize=8192)
def _propagate_constant(shape: PulseShape, detuning: float, phase: float, refine: int) -> TwoLevelUnitary:
    if shape.peak_rabi == 0:
        return TwoLevelUnitary.identity()
    n = refine * step_count(shape, shape.length, detuning)
    U, _ = _evolve(shape, _constant(KHZ_TO_RAD_PER_US * detuning), phase, 0.0, shape.length, n)
    return TwoLevelUnitary(U)


def propagate(
    shape: PulseShape,
    detuning: Detuning = 0.0,
    phase: float = 0.0,
    *,
    window: tuple[float, float] | None = None,
    refine: int = 1,
    detuning_bound: float | None = None,
) -> TwoLevelUnitary:
    """Propagator of one pulse in the atom's own rotating frame.

    Parameters
    ----------
    shape : PulseShape
    detuning : float or callable
        Atom resonance minus carrier in kHz, either constant or a vectorized
        function of pulse-local time (us).
    phase : float
        Drive phase in radians at the start of the pulse.
    window : (t_a, t_b), optional
        Sub-interval of the pulse in pulse-local time. Propagators of adjacent
        windows compose to the propagator of their union.
    refine : int
        Multiplies the step count; ``refine=2`` halves the step exactly.
    detuning_bound : float, optional
        max |detuning| in kHz; sampled from ``detuning`` when omitted.
    """
    if refine < 1:
        raise ConfigError("refine must be a positive integer")
    if window is None and not callable(detuning):
        return _propagate_constant(shape, float(detuning), float(phase), int(refine))

    t_a, t_b = (0.0, shape.length) if window is None else (float(window[0]), float(window[1]))
    if not 0.0 <= t_a <= t_b <= shape.length:
        raise ConfigError(f"window {window} is outside the pulse [0, {shape.length}]")
    bound = _detuning_bound(detuning, t_a, t_b) if detuning_bound is None else detuning_bound
    n = refine * step_count(shape, t_b - t_a, bound)
    theta_a = _phase_offset(detuning, shape, t_a, refine)
    U, _ = _evolve(shape, _as_detuning_fn(detuning), phase, t_a, t_b, n, theta_a)
    return TwoLevelUnitary(U)


def propagate_batch(
    shape: PulseShape,
    detuning: Callable[[np.ndarray], np.ndarray],
    phase: float = 0.0,
    *,
    refine: int = 1,
    detuning_bound: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Propagators for a batch of atoms sharing one pulse.

    ``detuning(t)`` maps pulse-local times of shape (n,) to kHz values of
    shape (batch, n). Returns atom-frame propagators (batch, 2, 2) and the
    detuning phase (rad) accumulated over the pulse, shape (batch,).
    """
    bound = _detuning_bound(detuning, 0.0, shape.length) if detuning_bound is None else detuning_bound
    n = refine * step_count(shape, shape.length, bound)
    det_fn = _as_detuning_fn(detuning)
    return _evolve(shape, det_fn, phase, 0.0, shape.length, n)


def calibrate_pi_pulse(kind: str, duration: float, truncation: float = 4.0) -> PulseShape:
    """Pulse of the given envelope whose resonant area is exactly pi."""
    return PulseShape(kind, 1.0, duration, truncation).with_area(math.pi)


def spectator_phase(shape: PulseShape, detuning: float, phase: float = 0.0) -> float:
    """Relative phase arg(u00) - arg(u11) (rad) kicked onto an off-resonant atom."""
    if detuning == 0:
        raise ResonantSpectatorError("spectator phase is undefined for a resonant atom")
    return propagate(shape, detuning, phase).relative_phase()


class SpectrumPoint(NamedTuple):
    offset: float  # um
    transfer: float
    phase: float  # rad, nan on resonance


def transfer_spectrum(shape: PulseShape, offsets: Sequence[float], cfg: FieldConfig) -> list[SpectrumPoint]:
    """Population transfer |0> -> |1> for a pulse resonant with a point ``offset`` um away."""
    slope = axial_slope(cfg)
    points = []
    for dx in offsets:
        delta = slope * float(dx)
        U = propagate(shape, delta)
        ph = U.relative_phase() if delta != 0 else math.nan
        points.append(SpectrumPoint(float(dx), U.transfer, ph))
    return points
