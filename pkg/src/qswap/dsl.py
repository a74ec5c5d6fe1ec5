"""Reader and writer for ``.qsp`` protocol files (grammar version 1).

One statement per line; ``#`` starts a comment. See ``docs/qsp-grammar.md``.
Parsing never stops at the first problem: every syntax and ordering error
is collected with a 1-based source span.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .atoms import ROTATION_ALIASES
from .engine import check_protocol
from .steps import (AssertFidelity, AssertProbability, DeclareAtom, Inject,
                    InteractDispersive, InteractResonant, Measure, PrepareAtom, PrepareField,
                    Protocol, Rotate)

GRAMMAR_VERSION = 1
KEYWORDS = ("qsp", "param", "atom", "field", "prepare", "rotate", "interact",
            "inject", "measure", "postselect", "assert")
HEADER = "# qswap protocol"

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_LEVEL = re.compile(r"[A-Za-z0-9_]+\Z")
_NAME = re.compile(r"[A-Za-z0-9_.+\-:]+\Z")
_REAL = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?\Z")
_PI = re.compile(r"(?P<sign>[+-]?)(?P<num>\d+)?\*?pi(/(?P<den>\d+))?\Z")
_INT = re.compile(r"\d+\Z")


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int
    length: int


@dataclass(frozen=True)
class ParseError:
    span: SourceSpan
    message: str
    expected: frozenset = field(default_factory=frozenset)

    def __str__(self):
        s = f"{self.span.line}:{self.span.column}: {self.message}"
        if self.expected:
            s += f" (expected one of: {', '.join(sorted(self.expected))})"
        return s


class QspSyntaxError(ValueError):
    def __init__(self, errors: list[ParseError]):
        self.errors = errors
        super().__init__("\n".join(str(e) for e in errors))


@dataclass(frozen=True)
class _Tok:
    text: str
    line: int
    col: int

    @property
    def span(self) -> SourceSpan:
        return SourceSpan(self.line, self.col, max(1, len(self.text)))


def _tokenize(line: str, lineno: int) -> list[_Tok]:
    toks = []
    for m in re.finditer(r"\S+", line):
        if m.group().startswith("#"):
            break
        toks.append(_Tok(m.group(), lineno, m.start() + 1))
    return toks


def parse_real(text: str) -> float | None:
    """Decimal/scientific reals and pi-fractions like ``pi/2``, ``-3pi/4``, ``2*pi``."""
    if _REAL.match(text):
        return float(text)
    m = _PI.match(text)
    if m:
        num = int(m.group("num") or 1)
        den = int(m.group("den") or 1)
        if den == 0 or num > 10**6 or den > 10**6:
            return None
        if m.group("sign") == "-":
            num = -num
        return (num * math.pi) / den
    return None


def format_angle(value: float) -> str:
    """Shortest pi-fraction spelling that parses back to exactly ``value``."""
    for den in range(1, 65):
        k = round(value * den / math.pi)
        if k == 0 or abs(k) > 64 * den:
            continue
        if (k * math.pi) / den == value:
            num = "" if abs(k) == 1 else str(abs(k))
            text = ("-" if k < 0 else "") + num + "pi"
            return text + (f"/{den}" if den != 1 else "")
    return repr(float(value))


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.errors: list[ParseError] = []
        self.steps: list = []
        self.spans: list[dict] = []
        self.params: list = []
        self.param_spans: dict = {}
        self.seen_statement = False

    def error(self, tok: _Tok, message: str, expected=()):
        self.errors.append(ParseError(tok.span, message, frozenset(expected)))

    def expect_count(self, toks, lo, hi, usage) -> bool:
        if not lo <= len(toks) <= hi:
            where = toks[min(len(toks), hi) - 1] if len(toks) > hi else toks[0]
            self.error(where, f"wrong number of arguments; usage: {usage}")
            return False
        return True

    def ident(self, tok: _Tok, what: str) -> bool:
        if not _IDENT.match(tok.text):
            self.error(tok, f"invalid {what} {tok.text!r}")
            return False
        return True

    def real(self, tok: _Tok, what: str):
        v = parse_real(tok.text)
        if v is None or not math.isfinite(v):
            self.error(tok, f"invalid number for {what}: {tok.text!r}", ("real", "pi-fraction"))
            return None
        return v

    def add(self, step, **spans):
        self.steps.append(step)
        self.spans.append(spans)

    def condition(self, tok: _Tok):
        atom, _, level = tok.text.partition("=")
        if not _IDENT.match(atom) or not _LEVEL.match(level):
            self.error(tok, f"invalid condition {tok.text!r}", ("ATOM=LEVEL",))
            return None
        return (atom, level)

    # statements ---------------------------------------------------------

    def st_qsp(self, t):
        if self.seen_statement:
            self.error(t[0], "the 'qsp' version pragma must come first")
        if not self.expect_count(t, 2, 2, "qsp VERSION"):
            return
        if t[1].text != str(GRAMMAR_VERSION):
            self.error(t[1], f"unsupported grammar version {t[1].text!r}", (str(GRAMMAR_VERSION),))

    def st_param(self, t):
        if not self.expect_count(t, 3, 3, "param KEY VALUE"):
            return
        key, val = t[1].text, t[2].text
        if key == "cutoff":
            if not _INT.match(val):
                self.error(t[2], f"cutoff must be an integer, got {val!r}")
                return
            value = int(val)
        elif key == "name":
            if not _NAME.match(val):
                self.error(t[2], f"invalid protocol name {val!r}")
                return
            value = val
        else:
            self.error(t[1], f"unknown parameter {key!r}", ("cutoff", "name"))
            return
        if key in dict(self.params):
            self.error(t[1], f"parameter {key!r} set twice")
            return
        self.params.append((key, value))
        self.param_spans["param:" + key] = t[2]

    def st_atom(self, t):
        if not self.expect_count(t, 3, 3, "atom LABEL SPECIES"):
            return
        if self.ident(t[1], "atom label"):
            self.add(DeclareAtom(t[1].text, t[2].text), label=t[1], species=t[2])

    def st_field(self, t):
        reload = len(t) > 1 and t[1].text == "reload"
        args = t[2:] if reload else t[1:]
        usage = "field [reload] (vacuum | fockplus | coherent ALPHA)"
        if not args:
            self.error(t[0], f"missing field kind; usage: {usage}",
                       ("vacuum", "fockplus", "coherent"))
            return
        kind = args[0]
        if kind.text == "coherent":
            if len(args) != 2:
                self.error(kind, "coherent field needs one amplitude")
                return
            alpha = self.real(args[1], "coherent amplitude")
            if alpha is None:
                return
        elif kind.text in ("vacuum", "fockplus"):
            if len(args) != 1:
                self.error(args[1], f"{kind.text} field takes no argument")
                return
            alpha = 0.0
        else:
            self.error(kind, f"unknown field kind {kind.text!r}", ("vacuum", "fockplus", "coherent"))
            return
        self.add(PrepareField(kind.text, alpha, reload), kind=kind, reload=t[0])

    def st_prepare(self, t):
        if self.expect_count(t, 3, 3, "prepare ATOM LEVEL"):
            self.add(PrepareAtom(t[1].text, t[2].text), label=t[1], level=t[2])

    def st_rotate(self, t):
        if self.expect_count(t, 3, 3, "rotate ATOM ROTATION"):
            name = ROTATION_ALIASES.get(t[2].text, t[2].text)
            self.add(Rotate(t[1].text, name), atom=t[1], name=t[2])

    def st_interact(self, t):
        if not self.expect_count(t, 4, 4, "interact ATOM (dispersive PHI | resonant GTAU)"):
            return
        mode = t[2].text
        if mode not in ("dispersive", "resonant"):
            self.error(t[2], f"unknown interaction {mode!r}", ("dispersive", "resonant"))
            return
        angle = self.real(t[3], "interaction angle")
        if angle is None:
            return
        cls = InteractDispersive if mode == "dispersive" else InteractResonant
        self.add(cls(t[1].text, angle), atom=t[1], kind=t[2])

    def st_inject(self, t):
        if not self.expect_count(t, 2, 2, "inject BETA"):
            return
        beta = self.real(t[1], "injected amplitude")
        if beta is not None:
            self.add(Inject(beta), beta=t[1])

    def st_measure(self, t):
        if len(t) == 2:
            self.add(Measure(t[1].text), atom=t[1])
        elif len(t) == 4 and t[2].text == "herald":
            self.add(Measure(t[1].text, "herald", t[3].text), atom=t[1], level=t[3], mode=t[2])
        elif len(t) == 4:
            self.error(t[2], f"unknown measurement option {t[2].text!r}", ("herald",))
        else:
            self.expect_count(t, 2, 2, "measure ATOM [herald LEVEL]")

    def st_postselect(self, t):
        if self.expect_count(t, 3, 3, "postselect ATOM LEVEL"):
            self.add(Measure(t[1].text, "postselect", t[2].text), atom=t[1], level=t[2], mode=t[0])

    def st_assert(self, t):
        if len(t) < 2:
            self.error(t[0], "missing assertion kind", ("fidelity", "probability"))
            return
        if t[1].text == "fidelity":
            self._assert_fidelity(t)
        elif t[1].text == "probability":
            self._assert_probability(t)
        else:
            self.error(t[1], f"unknown assertion {t[1].text!r}", ("fidelity", "probability"))

    def _conditions(self, toks):
        out = []
        for tok in toks:
            c = self.condition(tok)
            if c is None:
                return None
            out.append(c)
        return tuple(out)

    def _assert_fidelity(self, t):
        usage = "assert fidelity ATOM ATOM BELL TOL [when ATOM=LEVEL ...]"
        if len(t) < 6 or (len(t) > 6 and t[6].text != "when") or len(t) == 7:
            where = t[6] if len(t) > 6 else t[0]
            self.error(where, f"malformed fidelity assertion; usage: {usage}")
            return
        tol = self.real(t[5], "tolerance")
        when = self._conditions(t[7:])
        if tol is None or when is None:
            return
        self.add(AssertFidelity((t[2].text, t[3].text), t[4].text, tol, when),
                 atoms=[t[2], t[3]], target=t[4], tolerance=t[5], when=list(t[7:]))

    def _assert_probability(self, t):
        if len(t) < 4:
            self.error(t[0], "usage: assert probability [ATOM=LEVEL ...] P TOL")
            return
        when = self._conditions(t[2:-2])
        expected = self.real(t[-2], "expected probability")
        tol = self.real(t[-1], "tolerance")
        if when is None or expected is None or tol is None:
            return
        self.add(AssertProbability(when, expected, tol),
                 when=list(t[2:-2]), expected=t[-2], tolerance=t[-1])

    # driver ---------------------------------------------------------------

    def parse(self) -> Protocol:
        for lineno, line in enumerate(self.text.splitlines(), start=1):
            toks = _tokenize(line, lineno)
            if not toks:
                continue
            kw = toks[0].text
            if kw not in KEYWORDS:
                self.error(toks[0], f"unknown keyword {kw!r}", KEYWORDS)
            else:
                getattr(self, "st_" + kw)(toks)
            self.seen_statement = True
        protocol = Protocol(tuple(self.steps), tuple(self.params))
        for i, fieldname, message in check_protocol(protocol):
            tok = self._locate(i, fieldname, message)
            self.errors.append(ParseError(tok.span, message))
        return protocol

    def _locate(self, i: int, fieldname: str, message: str) -> _Tok:
        if i < 0:
            return self.param_spans.get(fieldname) or _Tok("?", 1, 1)
        spans = self.spans[i]
        tok = spans.get(fieldname)
        if tok is None:
            tok = next(v for v in spans.values() if v is not None)
        if isinstance(tok, list):
            for cand in tok:
                name = cand.text.partition("=")[0]
                if repr(name) in message or (
                        "level" in message and repr(cand.text.partition("=")[2]) in message):
                    return cand
            return tok[0]
        return tok


def parse(text: str) -> Protocol:
    """Parse ``.qsp`` source; raises :class:`QspSyntaxError` listing every error."""
    parser = _Parser(text)
    protocol = parser.parse()
    if parser.errors:
        parser.errors.sort(key=lambda e: (e.span.line, e.span.column))
        raise QspSyntaxError(parser.errors)
    return protocol


def parse_file(path) -> Protocol:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


def _fmt(v: float) -> str:
    return repr(float(v))


def _cond(when) -> str:
    return " ".join(f"{a}={lv}" for a, lv in when)


def _step_line(s) -> str:
    if isinstance(s, DeclareAtom):
        return f"atom {s.label} {s.species}"
    if isinstance(s, PrepareAtom):
        return f"prepare {s.label} {s.level}"
    if isinstance(s, PrepareField):
        head = "field reload" if s.reload else "field"
        tail = f" {_fmt(s.alpha)}" if s.kind == "coherent" else ""
        return f"{head} {s.kind}{tail}"
    if isinstance(s, Rotate):
        return f"rotate {s.atom} {s.name}"
    if isinstance(s, InteractDispersive):
        return f"interact {s.atom} dispersive {format_angle(s.phi)}"
    if isinstance(s, InteractResonant):
        return f"interact {s.atom} resonant {format_angle(s.gtau)}"
    if isinstance(s, Inject):
        return f"inject {_fmt(s.beta)}"
    if isinstance(s, Measure):
        if s.mode == "postselect":
            return f"postselect {s.atom} {s.level}"
        if s.mode == "herald":
            return f"measure {s.atom} herald {s.level}"
        return f"measure {s.atom}"
    if isinstance(s, AssertFidelity):
        line = f"assert fidelity {s.atoms[0]} {s.atoms[1]} {s.target} {_fmt(s.tolerance)}"
        return line + (f" when {_cond(s.when)}" if s.when else "")
    if isinstance(s, AssertProbability):
        conds = _cond(s.when)
        return f"assert probability {conds + ' ' if conds else ''}{_fmt(s.expected)} {_fmt(s.tolerance)}"
    raise TypeError(f"cannot serialize {type(s).__name__}")


def serialize(protocol: Protocol) -> str:
    """Canonical text; ``parse(serialize(p)) == p`` for every valid protocol."""
    lines = [HEADER]
    if not protocol.steps and not protocol.params:
        return HEADER + "\n"
    lines.append(f"qsp {GRAMMAR_VERSION}")
    for key, value in protocol.params:
        lines.append(f"param {key} {value}")
    lines.extend(_step_line(s) for s in protocol.steps)
    return "\n".join(lines) + "\n"
