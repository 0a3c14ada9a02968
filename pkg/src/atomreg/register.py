"""Product-state N-atom register: optical pumping, gradient addressing, push-out readout.

Every atom carries its own two-level state in its own rotating frame. A
microwave pulse tuned to one atom acts on every other present atom with that
atom's actual detuning, so crosstalk is simulated, not ignored. The coherent
phase kicked onto spectators is also tallied in ``phase_ledger`` for later
correction.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from atomreg.bloch import PulseShape, TwoLevelState, TwoLevelUnitary, propagate, wrap_phase
from atomreg.errors import ConfigError, RegisterError
from atomreg.fieldmap import AtomGeometry, FieldConfig, axial_detuning, check_geometry


class Occupancy(enum.Enum):
    PRESENT = "present"
    REMOVED = "removed"


@dataclass(frozen=True)
class Atom:
    geometry: AtomGeometry
    state: TwoLevelState | None
    occupancy: Occupancy = Occupancy.PRESENT

    @property
    def label(self) -> int:
        return self.geometry.label

    @property
    def present(self) -> bool:
        return self.occupancy is Occupancy.PRESENT


@dataclass(frozen=True)
class DetectionModel:
    """Classical flip channel of the push-out readout.

    ``eps_0_as_1``: an atom in |0> survives the push-out and reads 1.
    ``eps_1_as_0``: an atom in |1> is lost and reads 0.
    """

    eps_0_as_1: float = 0.01
    eps_1_as_0: float = 0.01

    def __post_init__(self):
        for name in ("eps_0_as_1", "eps_1_as_0"):
            v = getattr(self, name)
            if not 0.0 <= v <= 0.05:
                raise ConfigError(f"{name} must lie in [0, 0.05], got {v}")

    def detected_one_probability(self, p1):
        """Probability of reading 1 given the true |1> population ``p1``."""
        return self.eps_0_as_1 + (1.0 - self.eps_0_as_1 - self.eps_1_as_0) * np.asarray(p1)


IDEAL_DETECTION = DetectionModel(0.0, 0.0)


@dataclass(frozen=True)
class RegisterState:
    atoms: tuple[Atom, ...]
    rng_seed: int = 0
    phase_ledger: dict = field(default_factory=dict)
    rng: np.random.Generator = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        check_geometry([a.geometry for a in self.atoms])
        if self.rng is None:
            object.__setattr__(self, "rng", np.random.default_rng(self.rng_seed))

    @classmethod
    def load(cls, geometry: Sequence[AtomGeometry], seed: int = 0) -> "RegisterState":
        """Freshly loaded register: every atom present, in |0>, empty ledger."""
        atoms = tuple(Atom(g, TwoLevelState.ground()) for g in sorted(geometry, key=lambda g: g.label))
        return cls(atoms, seed, {g.label: 0.0 for g in geometry})

    @property
    def geometry(self) -> list[AtomGeometry]:
        return [a.geometry for a in self.atoms]

    def atom(self, label: int) -> Atom:
        for a in self.atoms:
            if a.label == label:
                return a
        raise RegisterError(f"unknown atom label {label}")

    def basis_string(self) -> str:
        """Register state as a bit string when every present atom is in a basis state."""
        bits = []
        for a in self.atoms:
            if not a.present:
                bits.append("-")
            elif a.state.population1 > 0.5:
                bits.append("1")
            else:
                bits.append("0")
        return "".join(bits)


def initialize(reg: RegisterState, pump_fidelity: float = 1.0) -> RegisterState:
    """Optically pump every atom; each lands in |0> with probability ``pump_fidelity``, else |1>."""
    if not 0.0 <= pump_fidelity <= 1.0:
        raise ConfigError("pump_fidelity must be a probability")
    atoms = []
    for a in reg.atoms:
        if not a.present:
            raise RegisterError(f"atom {a.label} has been removed; load a fresh register")
        pumped = pump_fidelity == 1.0 or reg.rng.random() < pump_fidelity
        atoms.append(replace(a, state=TwoLevelState.ground() if pumped else TwoLevelState.excited()))
    return replace(reg, atoms=tuple(atoms), phase_ledger={a.label: 0.0 for a in reg.atoms})


def pulse_detunings(geometry: Sequence[AtomGeometry], carrier: float, cfg: FieldConfig) -> dict[int, float]:
    """Each atom's resonance minus the carrier (kHz), carrier given relative to x=0."""
    return {g.label: axial_detuning(cfg, g.axial_position_x) - carrier for g in geometry}


def target_carrier(geometry: Sequence[AtomGeometry], target: int, cfg: FieldConfig) -> float:
    """Carrier (kHz relative to the x=0 resonance) resonant with atom ``target``."""
    for g in geometry:
        if g.label == target:
            return axial_detuning(cfg, g.axial_position_x)
    raise RegisterError(f"unknown atom label {target}")


def pulse_propagators(
    geometry: Sequence[AtomGeometry], carrier: float, pulse: PulseShape, cfg: FieldConfig, phase: float = 0.0
) -> dict[int, tuple[float, TwoLevelUnitary]]:
    """(detuning, propagator) for every atom under a pulse at ``carrier`` kHz."""
    return {
        label: (delta, propagate(pulse, delta, phase))
        for label, delta in pulse_detunings(geometry, carrier, cfg).items()
    }


def apply_pulse(
    reg: RegisterState, target: int, props: dict[int, tuple[float, TwoLevelUnitary]]
) -> RegisterState:
    """Apply precomputed per-atom propagators and book spectator phases."""
    atoms = []
    ledger = dict(reg.phase_ledger)
    for a in reg.atoms:
        if not a.present:
            atoms.append(a)
            continue
        delta, U = props[a.label]
        atoms.append(replace(a, state=U.apply(a.state)))
        if a.label != target and delta != 0:
            ledger[a.label] = wrap_phase(ledger.get(a.label, 0.0) + U.relative_phase())
    return replace(reg, atoms=tuple(atoms), phase_ledger=ledger)


def address(
    reg: RegisterState, target: int, pulse: PulseShape, cfg: FieldConfig, phase: float = 0.0
) -> RegisterState:
    """Apply a pulse resonant with atom ``target`` to the whole register."""
    if not reg.atom(target).present:
        raise RegisterError(f"atom {target} has been removed")
    props = pulse_propagators(reg.geometry, target_carrier(reg.geometry, target, cfg), pulse, cfg, phase)
    return apply_pulse(reg, target, props)


@dataclass(frozen=True)
class Readout:
    readout: str
    survivors: tuple[int, ...]
    register: RegisterState


def measure(reg: RegisterState, det: DetectionModel = DetectionModel()) -> Readout:
    """State-selective push-out detection.

    Each present atom is projected (Born rule on its |1> population), then the
    detection channel may flip the outcome. Atoms reading 0 are removed; atoms
    reading 1 stay, in |1>. Previously removed atoms read 0.
    """
    bits = []
    atoms = []
    for a in reg.atoms:
        if not a.present:
            bits.append("0")
            atoms.append(a)
            continue
        truth = reg.rng.random() < a.state.population1
        flip = reg.rng.random() < (det.eps_1_as_0 if truth else det.eps_0_as_1)
        reads_one = truth != flip
        bits.append("1" if reads_one else "0")
        if reads_one:
            atoms.append(replace(a, state=TwoLevelState.excited()))
        else:
            atoms.append(replace(a, state=None, occupancy=Occupancy.REMOVED))
    survivors = tuple(a.label for a in atoms if a.present)
    return Readout("".join(bits), survivors, replace(reg, atoms=tuple(atoms)))
