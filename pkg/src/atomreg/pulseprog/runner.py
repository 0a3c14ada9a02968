"""Shot-by-shot execution of a compiled schedule on the product-state register."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from atomreg.errors import ConfigError, RegisterError
from atomreg.pulseprog.compiler import Schedule
from atomreg.register import (
    DetectionModel,
    RegisterState,
    apply_pulse,
    initialize,
    measure,
    pulse_propagators,
)

SHOT_CHUNK = 256


@dataclass(frozen=True)
class ShotRecord:
    shot: int
    readout_string: str
    survivors: tuple[int, ...]
    phase_ledger: dict

    def to_json(self) -> dict:
        return {
            "shot": self.shot,
            "readout_string": self.readout_string,
            "survivors": list(self.survivors),
            "phase_ledger": {str(k): v for k, v in sorted(self.phase_ledger.items())},
        }


@dataclass(frozen=True)
class ExecutionResult:
    records: tuple[ShotRecord, ...]
    ones_fraction: dict  # label -> fraction of shots reading 1

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for r in self.records:
            out[r.readout_string] = out.get(r.readout_string, 0) + 1
        return out


def shot_register(template: RegisterState, shot: int) -> RegisterState:
    """Fresh register for one shot with its own stream derived from (seed, shot)."""
    fresh = RegisterState.load(template.geometry, template.rng_seed)
    return replace(fresh, rng=np.random.default_rng([template.rng_seed, shot]))


def _run_chunk(args):
    sched, template, det, pump_fidelity, shots = args
    props = [
        pulse_propagators(sched.geometry, e.carrier_detuning, e.shape, sched.field, e.phase)
        for e in sched.events
    ]
    records = []
    for shot in shots:
        reg = initialize(shot_register(template, shot), pump_fidelity)
        for event, p in zip(sched.events, props):
            reg = apply_pulse(reg, event.target, p)
        out = measure(reg, det)
        records.append(ShotRecord(shot, out.readout, out.survivors, dict(reg.phase_ledger)))
    return records


def execute(
    sched: Schedule,
    reg: RegisterState,
    det: DetectionModel,
    shots: int,
    *,
    pump_fidelity: float = 1.0,
    workers: int = 1,
) -> ExecutionResult:
    """Run ``shots`` independent repetitions: load, pump, pulse, push-out readout."""
    if shots < 0:
        raise ConfigError("shots must be non-negative")
    if tuple(reg.geometry) != tuple(sched.geometry):
        raise RegisterError("register geometry does not match the compiled schedule")
    chunks = [range(a, min(a + SHOT_CHUNK, shots)) for a in range(0, shots, SHOT_CHUNK)]
    tasks = [(sched, reg, det, pump_fidelity, c) for c in chunks]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, tasks))
    else:
        parts = [_run_chunk(t) for t in tasks]
    records = tuple(r for part in parts for r in part)
    labels = [g.label for g in sched.geometry]
    ones = {
        label: (sum(r.readout_string[i] == "1" for r in records) / len(records) if records else 0.0)
        for i, label in enumerate(labels)
    }
    return ExecutionResult(records, ones)
