"""Compile a parsed program into a time-stamped pulse schedule with a spectator-phase ledger."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

from atomreg.bloch import PulseShape, spectator_phase, wrap_phase
from atomreg.errors import ConfigError, ProgramError
from atomreg.fieldmap import AtomGeometry, FieldConfig, axial_detuning, check_geometry
from atomreg.pulseprog.syntax import Program, PulseStatement, Wait

DEFAULT_DEAD_TIME = 1.0  # us


@dataclass(frozen=True)
class PulseEvent:
    shape: PulseShape  # calibrated to the statement's rotation angle
    carrier_detuning: float  # kHz relative to the resonance at x = 0
    phase: float  # rad
    start_time: float  # us
    target: int
    angle: float  # rad

    @property
    def end_time(self) -> float:
        return self.start_time + self.shape.length


@dataclass(frozen=True)
class Schedule:
    events: tuple[PulseEvent, ...]
    phase_ledger: dict
    geometry: tuple[AtomGeometry, ...]
    field: FieldConfig
    dead_time: float = DEFAULT_DEAD_TIME

    def spectator_detunings(self, event: PulseEvent) -> dict[int, float]:
        """Resonance minus carrier (kHz) for every atom during ``event``."""
        return {
            g.label: axial_detuning(self.field, g.axial_position_x) - event.carrier_detuning
            for g in self.geometry
        }

    def to_json(self) -> dict:
        return {
            "events": [
                {
                    "t_start_us": e.start_time,
                    "kind": e.shape.kind,
                    "sigma_or_len_us": e.shape.duration,
                    "peak_rabi_khz": e.shape.peak_rabi,
                    "carrier_detuning_khz": e.carrier_detuning,
                    "target": e.target,
                    "phase_rad": e.phase,
                    "truncation": e.shape.truncation,
                    "angle_rad": e.angle,
                }
                for e in self.events
            ],
            "ledger": {str(k): v for k, v in sorted(self.phase_ledger.items())},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def compile_program(
    program: Program,
    geometry: Sequence[AtomGeometry],
    field: FieldConfig,
    dead_time: float = DEFAULT_DEAD_TIME,
) -> Schedule:
    """Lay pulses out back to back and book the spectator phase of every pulse.

    Each pulse starts ``dead_time`` after the previous one ends (the first
    starts at 0); WAIT adds to the gap. Every pulse is tuned to its target's
    resonance, moved by OFFSET and DETUNE. Every other atom receives the
    relative phase that this pulse kicks onto it at its own detuning.
    """
    if dead_time < 0:
        raise ConfigError("dead_time must be non-negative")
    geometry = tuple(sorted(geometry, key=lambda g: g.label))
    check_geometry(geometry)
    by_label = {g.label: g for g in geometry}
    ledger = {g.label: 0.0 for g in geometry}
    events = []
    cursor = 0.0

    for st in program.statements:
        if isinstance(st, Wait):
            cursor += st.duration
            continue
        if not isinstance(st, PulseStatement):
            continue
        if st.target not in by_label:
            raise ProgramError(f"unknown atom label {st.target}", st.line, 1)
        if st.shape not in program.shapes:
            raise ProgramError(f"unknown shape {st.shape!r}", st.line, 1, tuple(sorted(program.shapes)))
        shape = program.shapes[st.shape].with_area(st.angle)
        x = by_label[st.target].axial_position_x + st.offset
        event = PulseEvent(shape, axial_detuning(field, x) + st.detune, st.phase, cursor, st.target, st.angle)
        events.append(event)
        cursor = event.end_time + dead_time

    sched = Schedule(tuple(events), ledger, geometry, field, dead_time)
    for event in events:
        for label, delta in sched.spectator_detunings(event).items():
            if label != event.target and delta != 0:
                ledger[label] = wrap_phase(ledger[label] + spectator_phase(event.shape, delta, event.phase))
    return sched
