import math
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qswap import dsl, library
from qswap.dsl import QspSyntaxError, SourceSpan, parse, serialize
from qswap.steps import DeclareAtom, PrepareAtom, Protocol

ROOT = Path(__file__).resolve().parents[1]


def errors_of(text):
    with pytest.raises(QspSyntaxError) as info:
        parse(text)
    return info.value.errors


def test_minimal_protocol():
    p = parse("atom A1 cascade\nprepare A1 g")
    assert p.steps == (DeclareAtom("A1", "cascade"), PrepareAtom("A1", "g"))


def test_comments_and_blank_lines():
    p = parse("# header\n\natom A1 cascade   # trailing\n  prepare A1 g\n")
    assert len(p.steps) == 2


def test_shipped_sample_matches_builtin():
    p = dsl.parse_file(ROOT / "protocols" / "cascade-fock-phi+.qsp")
    assert p == library.builtin_preparation("cascade-fock", "phi+")


@pytest.mark.parametrize("path", sorted((ROOT / "protocols").glob("*.qsp")), ids=lambda p: p.name)
def test_every_sample_parses_to_its_builtin(path):
    assert dsl.parse_file(path) == library.get_builtin(path.stem)


@pytest.mark.parametrize("name", library.builtin_names())
def test_round_trip(name):
    p = library.get_builtin(name)
    text = serialize(p)
    assert parse(text) == p
    assert serialize(parse(text)) == text


def test_round_trip_with_odd_parameters():
    p = library.builtin_swap("cascade-coherent", alpha=1.37, gtau=0.123456789).with_param("cutoff", 70)
    assert parse(serialize(p)) == p


def test_empty_protocol():
    assert serialize(Protocol()) == dsl.HEADER + "\n"
    assert parse(serialize(Protocol())) == Protocol()


@pytest.mark.parametrize("text,value", [
    ("pi", math.pi), ("-pi", -math.pi), ("pi/2", math.pi / 2), ("3pi/4", 3 * math.pi / 4),
    ("3*pi/4", 3 * math.pi / 4), ("2pi", 2 * math.pi), ("1e-08", 1e-8), ("-.5", -0.5),
])
def test_numbers(text, value):
    assert dsl.parse_real(text) == value


@pytest.mark.parametrize("text", ["nan", "inf", "1_0", "pi/0", "pie", "0x10", "", "--1"])
def test_rejected_numbers(text):
    assert dsl.parse_real(text) is None


@settings(max_examples=200)
@given(st.integers(-64, 64).filter(bool), st.integers(1, 64))
def test_angle_format_round_trips(k, m):
    v = (k * math.pi) / m
    assert dsl.parse_real(dsl.format_angle(v)) == v


@settings(max_examples=200)
@given(st.floats(-1e6, 1e6, allow_nan=False))
def test_angle_format_round_trips_any_float(v):
    assert dsl.parse_real(dsl.format_angle(v)) == v


# golden error spans ------------------------------------------------------------

def test_undeclared_atom_span():
    (err,) = errors_of("rotate A9 MA")
    assert "undeclared atom" in err.message
    assert err.span == SourceSpan(1, 8, 2)


def test_unknown_keyword_span():
    errs = errors_of("atom A1 cascade\n  frobnicate A1\n")
    assert errs[0].span == SourceSpan(2, 3, 10)
    assert "atom" in errs[0].expected


def test_double_field_span():
    errs = errors_of("field vacuum\nfield coherent 1.0\n")
    assert [e.span for e in errs] == [SourceSpan(2, 7, 8)]
    assert "double field preparation" in errs[0].message


def test_bad_number_span():
    (err,) = errors_of("atom A1 twolevel\nfield vacuum\nprepare A1 f\ninteract A1 resonant pi/x")
    assert err.span == SourceSpan(4, 22, 4)


def test_bad_level_span():
    (err,) = errors_of("atom A1 lambda\nprepare A1 g")
    assert err.span == SourceSpan(2, 12, 1)
    assert "level" in err.message


def test_wrong_species_rotation_span():
    (err,) = errors_of("atom A1 cascade\nprepare A1 g\nrotate A1 R1L")
    assert err.span == SourceSpan(3, 11, 3)


def test_condition_span_points_at_bad_atom():
    text = ("atom A1 cascade\natom A2 cascade\nfield vacuum\nprepare A1 g\nprepare A2 g\n"
            "assert fidelity A1 A2 phi+ 1e-8 when A1=g A7=f")
    (err,) = errors_of(text)
    assert err.span == SourceSpan(6, 43, 4)


def test_all_errors_collected():
    errs = errors_of("bogus\natom A1 cascade\nrotate A2 MA\nfield coherent abc\nqsp 1\n")
    lines = [e.span.line for e in errs]
    assert lines == [1, 3, 4, 5]


def test_unknown_param():
    (err,) = errors_of("param seed 3")
    assert err.span == SourceSpan(1, 7, 4)


def test_version_pragma():
    assert parse("qsp 1\natom A1 cascade").steps == (DeclareAtom("A1", "cascade"),)
    (err,) = errors_of("qsp 7")
    assert err.span == SourceSpan(1, 5, 1)


def test_error_spans_lie_on_the_token():
    text = "atom A1 cascade\nrotate  Q1   MA\nprepare A1 zz\nmeasure A1 sometimes x\n"
    lines = text.splitlines()
    for e in errors_of(text):
        line = lines[e.span.line - 1]
        token = line[e.span.column - 1: e.span.column - 1 + e.span.length]
        assert token.strip() == token and token


# totality ------------------------------------------------------------------------

@settings(max_examples=300, deadline=None)
@given(st.text())
def test_parse_is_total_on_text(text):
    try:
        parse(text)
    except QspSyntaxError as exc:
        for e in exc.errors:
            assert e.message and e.span.line >= 1 and e.span.column >= 1 and e.span.length >= 1


KEYWORD_SOUP = st.lists(st.sampled_from(
    list(dsl.KEYWORDS) + ["A1", "A2", "cascade", "lambda", "twolevel", "g", "f", "e", "b",
                          "pi/2", "1e-8", "reload", "coherent", "herald", "when", "A1=g",
                          "phi+", "fidelity", "probability", "dispersive", "resonant", "MA",
                          "\n", "#", "-2.0", "cutoff", "name"]), max_size=40)


@settings(max_examples=300, deadline=None)
@given(KEYWORD_SOUP)
def test_parse_is_total_on_keyword_soup(tokens):
    try:
        parse(" ".join(tokens))
    except QspSyntaxError:
        pass
