import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atomreg.bloch import GAUSSIAN, SQUARE, calibrate_pi_pulse, spectator_phase, wrap_phase
from atomreg.errors import ProgramError, RegisterError
from atomreg.fieldmap import FieldConfig, axial_detuning, axial_slope, make_geometry
from atomreg.pulseprog import (
    Init,
    Measure,
    Pi,
    Pi2,
    Program,
    Rot,
    Wait,
    compile_program,
    execute,
    parse,
    pretty_print,
)
from atomreg.register import IDEAL_DETECTION, DetectionModel, RegisterState

PAPER = FieldConfig()
G70 = calibrate_pi_pulse(GAUSSIAN, 35.35)
SQ = calibrate_pi_pulse(SQUARE, 15.625)
SHAPES = {"g70": G70, "sq": SQ}
FLIP24_SOURCE = "INIT\nPI ATOM 2 SHAPE g70\nPI ATOM 4 SHAPE g70\nMEASURE"
FIVE_ATOMS = make_geometry([-40.0, -20.0, 0.0, 20.0, 40.0])


def error_of(source, **kw) -> ProgramError:
    with pytest.raises(ProgramError) as info:
        parse(source, SHAPES, **kw)
    return info.value


class TestParse:
    def test_flip24_program(self):
        prog = parse(FLIP24_SOURCE, SHAPES)
        assert prog.statements == (Init(), Pi(2, "g70"), Pi(4, "g70"), Measure())
        assert len(prog.statements) == 4
        assert prog.measured

    def test_empty_source(self):
        err = error_of("")
        assert "expected INIT" in str(err)
        assert (err.line, err.column) == (1, 1)

    def test_comments_and_blank_lines_only(self):
        assert "expected INIT" in str(error_of("# nothing\n\n   # here\n"))

    def test_zero_rotation(self):
        prog = parse("INIT\nROT ATOM 1 ANGLE 0rad SHAPE sq", SHAPES)
        assert prog.statements[1] == Rot(1, "sq", rotation=0.0)
        assert prog.statements[1].angle == 0.0

    def test_case_insensitive_keywords_and_comments(self):
        src = "init  # pump\n  pi atom 2 shape g70 phase 90deg\nWait 1ms\nmeasure\n"
        prog = parse(src, SHAPES)
        assert prog.statements[1] == Pi(2, "g70", phase=math.pi / 2)
        assert prog.statements[2] == Wait(1000.0)

    @pytest.mark.parametrize(
        "literal, value",
        [("0.5pi", 0.5 * math.pi), ("180deg", math.pi), ("1.2rad", 1.2), ("1e-1RAD", 0.1)],
    )
    def test_angle_units(self, literal, value):
        st_ = parse(f"INIT\nROT ATOM 1 ANGLE {literal} SHAPE sq", SHAPES).statements[1]
        assert st_.rotation == pytest.approx(value, rel=1e-15)

    def test_clause_order_is_free(self):
        a = parse("INIT\nPI ATOM 1 SHAPE sq OFFSET 500nm DETUNE 2khz", SHAPES)
        b = parse("INIT\nPI DETUNE 2000hz SHAPE sq OFFSET 0.5um ATOM 1", SHAPES)
        assert a == b
        assert a.statements[1].offset == pytest.approx(0.5)
        assert a.statements[1].detune == pytest.approx(2.0)

    def test_shape_definitions(self):
        prog = parse("SHAPE g GAUSSIAN 8.85us TRUNC 5\nSHAPE s square 0.01ms\nINIT", {})
        assert prog.shapes["g"] == calibrate_pi_pulse(GAUSSIAN, 8.85, 5.0)
        assert prog.shapes["s"] == calibrate_pi_pulse(SQUARE, 10.0)

    def test_table_normalised_to_pi(self):
        half = SQ.with_area(math.pi / 2)
        prog = parse("INIT", {"sq": half})
        assert prog.shapes["sq"].area() == pytest.approx(math.pi)

    def test_duplicate_init(self):
        err = error_of("INIT\nINIT")
        assert "duplicate INIT" in str(err) and err.line == 2

    def test_statement_after_measure(self):
        err = error_of("INIT\nMEASURE\nPI ATOM 1 SHAPE sq")
        assert "after MEASURE" in str(err) and err.line == 3

    def test_pulse_before_init(self):
        err = error_of("PI ATOM 1 SHAPE sq\nINIT")
        assert err.line == 1 and "INIT" in err.expected

    def test_unknown_label(self):
        err = error_of("INIT\nPI ATOM 7 SHAPE sq", labels=[1, 2, 3])
        assert "unknown atom label 7" in str(err)
        assert (err.line, err.column) == (2, 4)

    def test_unknown_statement(self):
        err = error_of("INIT\nFLIP ATOM 1")
        assert err.line == 2 and "PI" in err.expected

    def test_missing_clause_lists_expected(self):
        err = error_of("INIT\nROT ATOM 1 SHAPE sq")
        assert "missing ANGLE" in str(err) and err.expected == ("ANGLE",)

    def test_missing_unit(self):
        err = error_of("INIT\nWAIT 10")
        assert "missing unit" in str(err)
        assert (err.line, err.column) == (2, 6)
        assert "us" in err.expected

    def test_wrong_unit_kind(self):
        assert "unknown duration unit" in str(error_of("INIT\nWAIT 10um"))

    def test_negative_rotation(self):
        assert "non-negative" in str(error_of("INIT\nROT ATOM 1 ANGLE -1rad SHAPE sq"))

    def test_bad_label(self):
        assert "positive integer" in str(error_of("INIT\nPI ATOM 0 SHAPE sq"))

    def test_diagnostic_format(self):
        err = error_of("INIT\nWAIT 10")
        assert err.format("prog.txt").startswith("prog.txt:2:6: missing unit suffix")


# --- round trip -----------------------------------------------------------------

finite = dict(allow_nan=False, allow_infinity=False)
pulse_kw = dict(
    target=st.integers(1, 9),
    shape=st.sampled_from(["g70", "sq"]),
    phase=st.floats(-10, 10, **finite),
    offset=st.floats(-5, 5, **finite),
    detune=st.floats(-50, 50, **finite),
)
statement = st.one_of(
    st.builds(Pi, **pulse_kw),
    st.builds(Pi2, **pulse_kw),
    st.builds(Rot, rotation=st.floats(0, 20, **finite), **pulse_kw),
    st.builds(Wait, st.floats(0, 1e4, **finite)),
)
programs = st.builds(
    lambda body, measured: Program((Init(),) + tuple(body) + ((Measure(),) if measured else ()), SHAPES),
    st.lists(statement, max_size=8),
    st.booleans(),
)


class TestRoundTrip:
    @settings(max_examples=200)
    @given(programs)
    def test_pretty_print_reparses(self, prog):
        assert parse(pretty_print(prog)) == prog

    @settings(max_examples=100)
    @given(programs)
    def test_parse_of_pretty_print_is_fixed_point(self, prog):
        text = pretty_print(prog)
        assert pretty_print(parse(text)) == text

    def test_flip24(self):
        prog = parse(FLIP24_SOURCE, SHAPES)
        assert parse(pretty_print(prog)) == prog


# --- compile ----------------------------------------------------------------------


class TestCompile:
    def test_flip24_schedule(self):
        sched = compile_program(parse(FLIP24_SOURCE, SHAPES), FIVE_ATOMS, PAPER)
        assert len(sched.events) == 2
        c2, c4 = (e.carrier_detuning for e in sched.events)
        assert c2 == axial_detuning(PAPER, -20.0) and c4 == axial_detuning(PAPER, 20.0)
        assert c2 != c4
        assert set(sched.phase_ledger) == {1, 2, 3, 4, 5}
        for label in (1, 5):
            assert sched.phase_ledger[label] != 0.0

    def test_init_measure_only(self):
        sched = compile_program(parse("INIT\nMEASURE", SHAPES), FIVE_ATOMS, PAPER)
        assert sched.events == ()
        assert all(v == 0.0 for v in sched.phase_ledger.values())

    def test_close_pair_ledger(self):
        geo = make_geometry([0.0, 2.5])
        sched = compile_program(parse("INIT\nPI ATOM 1 SHAPE g70", SHAPES), geo, PAPER)
        assert sched.phase_ledger[2] == spectator_phase(G70, axial_slope(PAPER) * 2.5)
        assert abs(sched.phase_ledger[2]) == pytest.approx(0.2 * math.pi, rel=0.2)

    def test_layout(self):
        src = "INIT\nPI ATOM 1 SHAPE sq\nWAIT 10us\nPI2 ATOM 2 SHAPE g70\nPI ATOM 3 SHAPE sq"
        sched = compile_program(parse(src, SHAPES), FIVE_ATOMS, PAPER, dead_time=2.0)
        e1, e2, e3 = sched.events
        assert e1.start_time == 0.0
        assert e2.start_time == pytest.approx(e1.end_time + 2.0 + 10.0)
        assert e3.start_time == pytest.approx(e2.end_time + 2.0)
        for a, b in zip(sched.events, sched.events[1:]):
            assert a.end_time <= b.start_time

    def test_pi2_area(self):
        sched = compile_program(parse("INIT\nPI2 ATOM 1 SHAPE g70", SHAPES), FIVE_ATOMS, PAPER)
        assert sched.events[0].shape.area() == pytest.approx(math.pi / 2, rel=1e-12)
        assert sched.events[0].angle == pytest.approx(math.pi / 2)

    def test_offset_and_detune(self):
        src = "INIT\nPI ATOM 3 SHAPE sq OFFSET 1um DETUNE 0.5khz"
        e = compile_program(parse(src, SHAPES), FIVE_ATOMS, PAPER).events[0]
        assert e.carrier_detuning == pytest.approx(axial_detuning(PAPER, 1.0) + 0.5)

    def test_unknown_shape(self):
        with pytest.raises(ProgramError, match="unknown shape"):
            compile_program(parse("INIT\nPI ATOM 1 SHAPE nope", SHAPES), FIVE_ATOMS, PAPER)

    def test_unknown_label(self):
        with pytest.raises(ProgramError, match="unknown atom label"):
            compile_program(parse("INIT\nPI ATOM 8 SHAPE sq", SHAPES), FIVE_ATOMS, PAPER)

    def test_determinism(self):
        prog = parse(FLIP24_SOURCE + "\n", SHAPES)
        a = compile_program(prog, FIVE_ATOMS, PAPER)
        b = compile_program(parse(FLIP24_SOURCE, SHAPES), FIVE_ATOMS, PAPER)
        assert a.events == b.events
        assert a.dumps() == b.dumps()

    def test_ledger_additivity_and_agreement(self):
        geo = make_geometry([0.0, 3.0, 7.0])
        src = "INIT\nPI ATOM 1 SHAPE g70\nPI2 ATOM 3 SHAPE g70 PHASE 0.3rad\nROT ATOM 2 ANGLE 2rad SHAPE g70"
        sched = compile_program(parse(src, SHAPES), geo, PAPER)
        expected = {g.label: 0.0 for g in geo}
        for e in sched.events:
            for label, delta in sched.spectator_detunings(e).items():
                if label != e.target:
                    expected[label] = wrap_phase(expected[label] + spectator_phase(e.shape, delta, e.phase))
        assert sched.phase_ledger == expected

    def test_json(self):
        doc = json.loads(compile_program(parse(FLIP24_SOURCE, SHAPES), FIVE_ATOMS, PAPER).dumps())
        keys = {"t_start_us", "kind", "sigma_or_len_us", "peak_rabi_khz", "carrier_detuning_khz", "target"}
        assert keys <= set(doc["events"][0])
        assert set(doc["ledger"]) == {"1", "2", "3", "4", "5"}


# --- execute ---------------------------------------------------------------------


class TestExecute:
    def setup_method(self):
        self.sched = compile_program(parse(FLIP24_SOURCE, SHAPES), FIVE_ATOMS, PAPER)

    def test_ideal_flip24(self):
        res = execute(self.sched, RegisterState.load(FIVE_ATOMS, 1), IDEAL_DETECTION, 100)
        assert res.counts().get("01010", 0) >= 99
        assert res.ones_fraction[2] >= 0.99 and res.ones_fraction[1] <= 0.01

    def test_zero_shots(self):
        res = execute(self.sched, RegisterState.load(FIVE_ATOMS), IDEAL_DETECTION, 0)
        assert res.records == ()

    def test_detection_errors(self):
        res = execute(self.sched, RegisterState.load(FIVE_ATOMS, 2), DetectionModel(0.01, 0.01), 10_000)
        rate = res.counts()["01010"] / 10_000
        assert rate == pytest.approx(0.99**5, abs=0.01)

    def test_survivors_and_ledger(self):
        res = execute(self.sched, RegisterState.load(FIVE_ATOMS), IDEAL_DETECTION, 5)
        for r in res.records:
            assert r.survivors == tuple(i + 1 for i, b in enumerate(r.readout_string) if b == "1")
            assert r.phase_ledger == self.sched.phase_ledger  # bit-identical bookkeeping

    def test_geometry_mismatch(self):
        with pytest.raises(RegisterError):
            execute(self.sched, RegisterState.load(make_geometry([0.0, 1.0])), IDEAL_DETECTION, 1)

    def test_reproducible_across_workers(self):
        det = DetectionModel(0.05, 0.05)
        reg = RegisterState.load(FIVE_ATOMS, 42)
        a = execute(self.sched, reg, det, 600, workers=1)
        b = execute(self.sched, reg, det, 600, workers=2)
        c = execute(self.sched, RegisterState.load(FIVE_ATOMS, 42), det, 600)
        assert a.records == b.records == c.records
        d = execute(self.sched, RegisterState.load(FIVE_ATOMS, 43), det, 600)
        assert a.records != d.records

    def test_pump_fidelity(self):
        res = execute(self.sched, RegisterState.load(FIVE_ATOMS, 3), IDEAL_DETECTION, 400, pump_fidelity=0.0)
        # every atom starts in |1>; the two pulses flip atoms 2 and 4 back
        assert res.counts().get("10101", 0) >= 396

    def test_json_records(self):
        rec = execute(self.sched, RegisterState.load(FIVE_ATOMS), IDEAL_DETECTION, 1).records[0].to_json()
        assert set(rec) == {"shot", "readout_string", "survivors", "phase_ledger"}
        json.dumps(rec)
