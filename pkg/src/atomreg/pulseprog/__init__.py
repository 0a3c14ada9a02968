"""Pulse-program language: parser, compiler and shot executor."""

from atomreg.pulseprog.compiler import DEFAULT_DEAD_TIME, PulseEvent, Schedule, compile_program
from atomreg.pulseprog.runner import ExecutionResult, ShotRecord, execute
from atomreg.pulseprog.syntax import Init, Measure, Pi, Pi2, Program, Rot, Wait, parse, pretty_print

__all__ = [
    "DEFAULT_DEAD_TIME",
    "ExecutionResult",
    "Init",
    "Measure",
    "Pi",
    "Pi2",
    "Program",
    "PulseEvent",
    "Rot",
    "Schedule",
    "ShotRecord",
    "Wait",
    "compile_program",
    "execute",
    "parse",
    "pretty_print",
]
