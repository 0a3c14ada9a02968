"""Line-oriented pulse-program language.

One statement per line; ``#`` starts a comment; keywords are case-insensitive.
A statement is a keyword followed by ``KEY value`` clauses in any order::

    SHAPE g70 GAUSSIAN 35.35us TRUNC 4
    SHAPE sq SQUARE 15.625us
    INIT
    PI ATOM 2 SHAPE g70
    PI2 ATOM 3 SHAPE sq PHASE 0.5pi
    ROT ATOM 1 ANGLE 0rad SHAPE sq
    WAIT 10us
    MEASURE

Dimensioned literals carry a unit suffix: durations us/ms/ns, lengths
um/nm/mm, frequencies hz/khz/mhz, angles rad/deg/pi. Optional pulse clauses:
``PHASE`` (drive phase), ``OFFSET`` (carrier resonant with a point that far
from the target along the axis) and ``DETUNE`` (extra carrier offset).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping

from atomreg.bloch import GAUSSIAN, SQUARE, PulseShape, calibrate_pi_pulse
from atomreg.errors import ConfigError, ProgramError

_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_QUANTITY = re.compile(rf"^({_NUMBER})([A-Za-z]*)$")
_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_INT = re.compile(r"^\d+$")

UNITS = {
    "duration": {"us": 1.0, "ms": 1e3, "ns": 1e-3},
    "length": {"um": 1.0, "nm": 1e-3, "mm": 1e3},
    "frequency": {"khz": 1.0, "hz": 1e-3, "mhz": 1e3},
    "angle": {"rad": 1.0, "deg": math.pi / 180.0, "pi": math.pi},
}


# --- AST -------------------------------------------------------------------


@dataclass(frozen=True)
class Init:
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Measure:
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Wait:
    duration: float  # us
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class PulseStatement:
    """Common part of PI / PI2 / ROT."""

    target: int
    shape: str
    phase: float = 0.0  # rad
    offset: float = 0.0  # um
    detune: float = 0.0  # kHz
    line: int = field(default=0, compare=False)

    @property
    def angle(self) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class Pi(PulseStatement):
    @property
    def angle(self) -> float:
        return math.pi


@dataclass(frozen=True)
class Pi2(PulseStatement):
    @property
    def angle(self) -> float:
        return 0.5 * math.pi


@dataclass(frozen=True)
class Rot(PulseStatement):
    rotation: float = 0.0  # rad

    @property
    def angle(self) -> float:
        return self.rotation


Statement = Init | Measure | Wait | Pi | Pi2 | Rot


@dataclass(frozen=True)
class Program:
    statements: tuple
    shapes: Mapping[str, PulseShape]

    def __eq__(self, other):
        return (
            isinstance(other, Program)
            and self.statements == other.statements
            and dict(self.shapes) == dict(other.shapes)
        )

    @property
    def pulses(self) -> list[PulseStatement]:
        return [s for s in self.statements if isinstance(s, PulseStatement)]

    @property
    def measured(self) -> bool:
        return any(isinstance(s, Measure) for s in self.statements)


# --- lexing ----------------------------------------------------------------


@dataclass(frozen=True)
class Token:
    text: str
    line: int
    column: int

    @property
    def upper(self) -> str:
        return self.text.upper()


def tokenize_line(text: str, line: int) -> list[Token]:
    code = text.split("#", 1)[0]
    return [Token(m.group(), line, m.start() + 1) for m in re.finditer(r"\S+", code)]


def parse_quantity(tok: Token, kind: str) -> float:
    units = UNITS[kind]
    m = _QUANTITY.match(tok.text)
    if not m:
        raise ProgramError(f"invalid {kind} literal {tok.text!r}", tok.line, tok.column, tuple(units))
    value, unit = float(m.group(1)), m.group(2).lower()
    if unit not in units:
        problem = "missing unit suffix" if not unit else f"unknown {kind} unit {unit!r}"
        raise ProgramError(f"{problem} in {tok.text!r}", tok.line, tok.column, tuple(units))
    if not math.isfinite(value):
        raise ProgramError(f"non-finite value {tok.text!r}", tok.line, tok.column)
    return value * units[unit]


def _parse_number(tok: Token) -> float:
    try:
        value = float(tok.text)
    except ValueError:
        raise ProgramError(f"expected a number, got {tok.text!r}", tok.line, tok.column) from None
    return value


def _parse_label(tok: Token) -> int:
    if not _INT.match(tok.text) or int(tok.text) < 1:
        raise ProgramError(f"atom label must be a positive integer, got {tok.text!r}", tok.line, tok.column)
    return int(tok.text)


def _parse_name(tok: Token) -> str:
    if not _IDENT.match(tok.text):
        raise ProgramError(f"invalid shape name {tok.text!r}", tok.line, tok.column)
    return tok.text


# clause key -> value parser
_CLAUSES = {
    "ATOM": _parse_label,
    "SHAPE": _parse_name,
    "ANGLE": lambda t: parse_quantity(t, "angle"),
    "PHASE": lambda t: parse_quantity(t, "angle"),
    "OFFSET": lambda t: parse_quantity(t, "length"),
    "DETUNE": lambda t: parse_quantity(t, "frequency"),
}
_PULSE_OPTIONAL = ("PHASE", "OFFSET", "DETUNE")
_PULSE_CLAUSES = {
    "PI": (("ATOM", "SHAPE"), _PULSE_OPTIONAL),
    "PI2": (("ATOM", "SHAPE"), _PULSE_OPTIONAL),
    "ROT": (("ATOM", "ANGLE", "SHAPE"), _PULSE_OPTIONAL),
}
STATEMENT_KEYWORDS = ("SHAPE", "INIT", "PI", "PI2", "ROT", "WAIT", "MEASURE")


def _parse_clauses(keyword: Token, rest: list[Token], required, optional) -> dict:
    allowed = tuple(required) + tuple(optional)
    values: dict = {}
    i = 0
    while i < len(rest):
        key = rest[i]
        name = key.upper
        if name not in allowed:
            remaining = tuple(k for k in allowed if k not in values)
            raise ProgramError(f"unexpected {key.text!r} in {keyword.upper}", key.line, key.column, remaining)
        if name in values:
            raise ProgramError(f"duplicate {name} clause", key.line, key.column)
        if i + 1 >= len(rest):
            raise ProgramError(f"{name} needs a value", key.line, key.column + len(key.text))
        values[name] = _CLAUSES[name](rest[i + 1])
        i += 2
    missing = [k for k in required if k not in values]
    if missing:
        end = rest[-1] if rest else keyword
        raise ProgramError(
            f"{keyword.upper} is missing {missing[0]}", end.line, end.column + len(end.text), tuple(missing)
        )
    return values


def _parse_shape(keyword: Token, rest: list[Token]) -> tuple[str, PulseShape]:
    if not rest:
        raise ProgramError("SHAPE needs a name", keyword.line, keyword.column + len(keyword.text))
    name = _parse_name(rest[0])
    if len(rest) < 3:
        tok = rest[-1]
        expected = (SQUARE.upper(), GAUSSIAN.upper()) if len(rest) == 1 else ("duration",)
        raise ProgramError(f"incomplete SHAPE {name}", tok.line, tok.column + len(tok.text), expected)
    kind_tok, dur_tok = rest[1], rest[2]
    kind = kind_tok.text.lower()
    if kind not in (SQUARE, GAUSSIAN):
        raise ProgramError(
            f"unknown envelope {kind_tok.text!r}", kind_tok.line, kind_tok.column, (SQUARE.upper(), GAUSSIAN.upper())
        )
    duration = parse_quantity(dur_tok, "duration")
    truncation = 4.0
    extra = rest[3:]
    if extra:
        if kind != GAUSSIAN or extra[0].upper != "TRUNC" or len(extra) != 2:
            tok = extra[0]
            raise ProgramError(f"unexpected {tok.text!r} in SHAPE", tok.line, tok.column,
                               ("TRUNC",) if kind == GAUSSIAN else ())
        truncation = _parse_number(extra[1])
    try:
        shape = calibrate_pi_pulse(kind, duration, truncation)
    except ConfigError as exc:
        raise ProgramError(str(exc), dur_tok.line, dur_tok.column) from None
    return name, shape


def parse(
    source: str,
    shapes: Mapping[str, PulseShape] | None = None,
    labels=None,
) -> Program:
    """Parse program text.

    ``shapes`` seeds the shape table (definitions in the source override it).
    When ``labels`` is given, every ATOM target must be one of them.
    """
    # table entries are kept as pi pulses; compile rescales to each statement's angle
    table = {name: shape.with_area(math.pi) for name, shape in (shapes or {}).items()}
    defined_here: set[str] = set()
    statements: list = []
    seen_init = seen_measure = False
    last_line = 1

    for lineno, text in enumerate(source.splitlines(), start=1):
        toks = tokenize_line(text, lineno)
        if not toks:
            continue
        last_line = lineno
        kw, rest = toks[0], toks[1:]
        name = kw.upper

        if name == "SHAPE":
            shape_name, shape = _parse_shape(kw, rest)
            if shape_name in defined_here:
                raise ProgramError(f"shape {shape_name!r} defined twice", kw.line, kw.column)
            defined_here.add(shape_name)
            table[shape_name] = shape
            continue
        if name not in STATEMENT_KEYWORDS:
            raise ProgramError(f"unknown statement {kw.text!r}", kw.line, kw.column, STATEMENT_KEYWORDS)
        if seen_measure:
            raise ProgramError("statement after MEASURE", kw.line, kw.column)

        if name == "INIT":
            if seen_init:
                raise ProgramError("duplicate INIT", kw.line, kw.column)
            if rest:
                raise ProgramError(f"unexpected {rest[0].text!r} after INIT", rest[0].line, rest[0].column)
            seen_init = True
            statements.append(Init(line=lineno))
        elif name == "MEASURE":
            if rest:
                raise ProgramError(f"unexpected {rest[0].text!r} after MEASURE", rest[0].line, rest[0].column)
            if not seen_init:
                raise ProgramError("expected INIT", kw.line, kw.column, ("INIT",))
            seen_measure = True
            statements.append(Measure(line=lineno))
        elif name == "WAIT":
            if len(rest) != 1:
                col = rest[1].column if len(rest) > 1 else kw.column + len(kw.text)
                raise ProgramError("WAIT takes exactly one duration", lineno, col, ("duration",))
            duration = parse_quantity(rest[0], "duration")
            if duration < 0:
                raise ProgramError("WAIT duration must be non-negative", lineno, rest[0].column)
            statements.append(Wait(duration, line=lineno))
        else:
            if not seen_init:
                raise ProgramError(f"{name} before INIT", kw.line, kw.column, ("INIT",))
            required, optional = _PULSE_CLAUSES[name]
            v = _parse_clauses(kw, rest, required, optional)
            if labels is not None and v["ATOM"] not in labels:
                atom_tok = next(t for t in rest if t.upper == "ATOM")
                raise ProgramError(f"unknown atom label {v['ATOM']}", lineno, atom_tok.column)
            common = dict(
                target=v["ATOM"],
                shape=v["SHAPE"],
                phase=v.get("PHASE", 0.0),
                offset=v.get("OFFSET", 0.0),
                detune=v.get("DETUNE", 0.0),
                line=lineno,
            )
            if name == "PI":
                statements.append(Pi(**common))
            elif name == "PI2":
                statements.append(Pi2(**common))
            else:
                if v["ANGLE"] < 0:
                    raise ProgramError("rotation angle must be non-negative; use PHASE 1pi to reverse",
                                       lineno, next(t for t in rest if t.upper == "ANGLE").column)
                statements.append(Rot(rotation=v["ANGLE"], **common))

    if not seen_init:
        raise ProgramError("expected INIT", last_line if statements else 1, 1, ("INIT",))
    return Program(tuple(statements), table)


def pretty_print(program: Program) -> str:
    """Canonical source text; ``parse(pretty_print(p)) == p``."""
    lines = []
    for name in sorted(program.shapes):
        s = program.shapes[name]
        text = f"SHAPE {name} {s.kind.upper()} {s.duration!r}us"
        if s.kind == GAUSSIAN:
            text += f" TRUNC {s.truncation!r}"
        lines.append(text)
    for st in program.statements:
        if isinstance(st, Init):
            lines.append("INIT")
        elif isinstance(st, Measure):
            lines.append("MEASURE")
        elif isinstance(st, Wait):
            lines.append(f"WAIT {st.duration!r}us")
        else:
            head = {Pi: "PI", Pi2: "PI2", Rot: "ROT"}[type(st)]
            text = f"{head} ATOM {st.target}"
            if isinstance(st, Rot):
                text += f" ANGLE {st.rotation!r}rad"
            text += f" SHAPE {st.shape}"
            if st.phase:
                text += f" PHASE {st.phase!r}rad"
            if st.offset:
                text += f" OFFSET {st.offset!r}um"
            if st.detune:
                text += f" DETUNE {st.detune!r}khz"
            lines.append(text)
    return "\n".join(lines) + "\n"
