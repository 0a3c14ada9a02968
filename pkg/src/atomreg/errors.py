"""Exception hierarchy shared by the simulator modules."""

from __future__ import annotations


class ConfigError(ValueError):
    """Invalid configuration or parameters."""


class IntegrationError(ConfigError):
    """The fixed-step integrator cannot honour its step bound within the step budget."""


class RegisterError(ValueError):
    """Illegal operation on a register (unknown label, removed atom, geometry mismatch)."""


class ProgramError(ValueError):
    """Syntax or semantic error in a pulse program, with a source position."""

    def __init__(self, message: str, line: int = 1, column: int = 1, expected: tuple[str, ...] = ()):
        super().__init__(message)
        self.message = message
        self.line = line
        self.column = column
        self.expected = tuple(expected)

    def __str__(self) -> str:
        text = f"{self.line}:{self.column}: {self.message}"
        if self.expected:
            text += f" (expected one of: {', '.join(self.expected)})"
        return text

    def format(self, filename: str = "<program>") -> str:
        return f"{filename}:{self}"


class ResonantSpectatorError(ValueError):
    """Spectator phase requested for an atom resonant with the carrier."""
