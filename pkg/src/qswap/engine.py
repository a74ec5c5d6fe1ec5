"""Branch-tracking executor for :class:`~qswap.steps.Protocol` values.

The register is every declared atom in declaration order followed by the
cavity ``C``. Measurements fan the run into branches; each branch carries its
unconditional probability, its outcome path and a normalized state.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import atoms as atomdyn
from . import bosonic
from .hilbert import (CompositeSpace, OperatorMatrix, StateVector, ZeroProbabilityBranch,
                      apply_local, insert_subsystem, measure_subsystem, post_select,
                      split_product, subsystem_fidelity)
from .steps import (BELL_KINDS, FIELD_KINDS, MEASURE_MODES, PARAM_KEYS, AssertFidelity,
                    AssertProbability, DeclareAtom, Inject, InteractDispersive,
                    InteractResonant, Measure, PrepareAtom, PrepareField, Protocol, Rotate)

CAVITY = "C"
CUTOFF_ENV = "QSWAP_CUTOFF_OVERRIDE"


class ProtocolError(ValueError):
    """A protocol that violates the step-ordering or typing rules."""

    def __init__(self, problems):
        self.problems = list(problems)
        msg = "; ".join(f"step {i}: {m}" for i, _, m in self.problems)
        super().__init__(msg)


def check_protocol(protocol: Protocol):
    """Yield ``(step_index, field_name, message)`` for every rule violation."""
    declared: dict[str, atomdyn.Species] = {}
    prepared: set[str] = set()
    field_ready = False

    def atom_ok(i, name, fieldname="atom", need_prepared=True):
        if name not in declared:
            yield i, fieldname, f"undeclared atom {name!r}"
        elif need_prepared and name not in prepared:
            yield i, fieldname, f"atom {name!r} used before prepare"

    def cond_ok(i, when):
        for atom, level in when:
            if atom not in declared:
                yield i, "when", f"undeclared atom {atom!r}"
            elif level not in declared[atom].levels:
                yield i, "when", f"{declared[atom].name} atoms have no level {level!r}"

    for k, key in enumerate(dict(protocol.params)):
        if key not in PARAM_KEYS:
            yield -1, f"param:{key}", f"unknown parameter {key!r}"
    cutoff = protocol.param("cutoff")
    if cutoff is not None and (not isinstance(cutoff, int) or cutoff < 2):
        yield -1, "param:cutoff", "cutoff must be an integer >= 2"

    for i, s in enumerate(protocol.steps):
        if isinstance(s, DeclareAtom):
            if s.species not in atomdyn.SPECIES:
                yield i, "species", f"unknown species {s.species!r}"
            elif s.label in declared:
                yield i, "label", f"atom {s.label!r} declared twice"
            elif s.label == CAVITY:
                yield i, "label", f"{CAVITY!r} is reserved for the cavity"
            else:
                declared[s.label] = atomdyn.SPECIES[s.species]
        elif isinstance(s, PrepareAtom):
            errs = list(atom_ok(i, s.label, "label", need_prepared=False))
            yield from errs
            if not errs:
                if s.label in prepared:
                    yield i, "label", f"atom {s.label!r} prepared twice"
                elif s.level not in declared[s.label].levels:
                    yield i, "level", f"{declared[s.label].name} atoms have no level {s.level!r}"
                else:
                    prepared.add(s.label)
        elif isinstance(s, PrepareField):
            if s.kind not in FIELD_KINDS:
                yield i, "kind", f"unknown field kind {s.kind!r}"
            if s.reload and not field_ready:
                yield i, "reload", "field reload before the initial field preparation"
            elif not s.reload and field_ready:
                yield i, "kind", "double field preparation (use 'field reload')"
            field_ready = True
        elif isinstance(s, Rotate):
            errs = list(atom_ok(i, s.atom))
            yield from errs
            if not errs:
                try:
                    atomdyn.rotation_levels(s.name, declared[s.atom])
                except ValueError as exc:
                    yield i, "name", str(exc)
        elif isinstance(s, (InteractDispersive, InteractResonant)):
            errs = list(atom_ok(i, s.atom))
            yield from errs
            if not errs:
                sp = declared[s.atom].name
                if isinstance(s, InteractDispersive) and sp not in ("cascade", "lambda"):
                    yield i, "atom", f"dispersive interaction needs a cascade or lambda atom, {s.atom!r} is {sp}"
                if isinstance(s, InteractResonant) and sp != "twolevel":
                    yield i, "atom", f"resonant interaction needs a twolevel atom, {s.atom!r} is {sp}"
            if not field_ready:
                yield i, "kind", "interaction before the field is prepared"
        elif isinstance(s, Inject):
            if not field_ready:
                yield i, "beta", "injection before the field is prepared"
        elif isinstance(s, Measure):
            errs = list(atom_ok(i, s.atom))
            yield from errs
            if s.mode not in MEASURE_MODES:
                yield i, "mode", f"unknown measurement mode {s.mode!r}"
            elif s.mode == "all" and s.level is not None:
                yield i, "level", "plain measurement takes no level"
            elif s.mode != "all":
                if s.level is None:
                    yield i, "mode", f"{s.mode} needs a level"
                elif not errs and s.level not in declared[s.atom].levels:
                    yield i, "level", f"{declared[s.atom].name} atoms have no level {s.level!r}"
        elif isinstance(s, AssertFidelity):
            if len(s.atoms) != 2:
                yield i, "atoms", "fidelity assertions take exactly two atoms"
            else:
                errs = [e for a in s.atoms for e in atom_ok(i, a, "atoms", need_prepared=False)]
                yield from errs
                if not errs:
                    kinds = {declared[a].name for a in s.atoms}
                    if len(kinds) != 1 or not kinds <= {"cascade", "lambda"}:
                        yield i, "atoms", "Bell targets need two cascade or two lambda atoms"
                    if s.atoms[0] == s.atoms[1]:
                        yield i, "atoms", "Bell targets need two distinct atoms"
            if s.target not in BELL_KINDS:
                yield i, "target", f"unknown Bell target {s.target!r}"
            if not s.tolerance >= 0:
                yield i, "tolerance", "tolerance must be non-negative"
            yield from cond_ok(i, s.when)
        elif isinstance(s, AssertProbability):
            yield from cond_ok(i, s.when)
            if not 0.0 <= s.expected <= 1.0:
                yield i, "expected", "expected probability must lie in [0, 1]"
            if not s.tolerance >= 0:
                yield i, "tolerance", "tolerance must be non-negative"
        else:
            yield i, "", f"unsupported step {type(s).__name__}"


def validate(protocol: Protocol):
    problems = list(check_protocol(protocol))
    if problems:
        raise ProtocolError(problems)


def work_amplitude(protocol: Protocol) -> float:
    """Largest field amplitude the protocol can reach (prepared plus injected)."""
    best = current = 0.0
    for s in protocol.steps:
        if isinstance(s, PrepareField):
            current = abs(s.alpha) if s.kind == "coherent" else 0.0
        elif isinstance(s, Inject):
            current += abs(s.beta)
        best = max(best, current)
    return best


def resolve_cutoff(protocol: Protocol, cutoff: int | None = None) -> int:
    """Explicit argument, then the env override, then the protocol param, then the rule."""
    if cutoff is not None:
        return int(cutoff)
    env = os.environ.get(CUTOFF_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise ValueError(f"{CUTOFF_ENV} must be an integer, got {env!r}") from None
    if protocol.param("cutoff") is not None:
        return int(protocol.param("cutoff"))
    return bosonic.cutoff_rule(work_amplitude(protocol))


@dataclass
class Branch:
    path: tuple[tuple[str, str], ...]
    probability: float
    state: StateVector
    failed: bool = False

    def outcome(self, atom: str) -> str | None:
        for a, lv in reversed(self.path):
            if a == atom:
                return lv
        return None

    def matches(self, when) -> bool:
        return all(self.outcome(a) == lv for a, lv in when)

    @property
    def path_text(self) -> str:
        return " ".join(f"{a}={lv}" for a, lv in self.path) or "-"


@dataclass
class AssertionResult:
    step: int
    kind: str
    description: str
    value: float | None
    passed: bool
    branch: int | None = None
    atoms: tuple[str, ...] = ()
    target: str | None = None


@dataclass
class PostSelection:
    step: int
    atom: str
    level: str
    probability: float


@dataclass
class RunReport:
    protocol: Protocol
    n_max: int
    branches: list[Branch]
    postselections: list[PostSelection] = field(default_factory=list)
    assertions: list[AssertionResult] = field(default_factory=list)

    @property
    def total_probability(self) -> float:
        return math.fsum(b.probability for b in self.branches)

    @property
    def postselection_probability(self) -> float:
        return math.prod(p.probability for p in self.postselections)

    @property
    def success_probability(self) -> float:
        """Unconditional weight of branches not marked failed."""
        return math.fsum(b.probability for b in self.branches if not b.failed)

    def conditional_probability(self, branch: Branch) -> float:
        return branch.probability / self.total_probability

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    def find(self, **outcomes) -> list[Branch]:
        when = tuple(outcomes.items())
        return [b for b in self.branches if b.matches(when)]


def _bell_amplitudes(kind: str, species: atomdyn.Species) -> np.ndarray:
    first, second = atomdyn.RAMSEY_PAIR[species.name]
    i, j = species.index(first), species.index(second)
    t = np.zeros((species.dim, species.dim), dtype=complex)
    s = 1.0 if kind.endswith("+") else -1.0
    if kind.startswith("phi"):
        t[i, i], t[j, j] = 1.0, s
    else:
        t[i, j], t[j, i] = 1.0, s
    return t.reshape(-1) / math.sqrt(2)


def bell_target_state(kind: str, species: atomdyn.Species, labels=("A1", "A2")) -> StateVector:
    space = CompositeSpace((species.dim,) * 2, tuple(labels), (species.levels,) * 2)
    return StateVector(space, _bell_amplitudes(kind, species))


class _Runner:
    def __init__(self, protocol: Protocol, n_max: int):
        self.protocol = protocol
        self.n_max = n_max
        self.species = {a: atomdyn.get_species(s) for a, s in protocol.atoms().items()}
        labels = tuple(self.species) + (CAVITY,)
        dims = tuple(sp.dim for sp in self.species.values()) + (n_max + 1,)
        levels = tuple(sp.levels for sp in self.species.values()) + (
            tuple(str(n) for n in range(n_max + 1)),)
        self.space = CompositeSpace(dims, labels, levels)
        amps = np.zeros(dims, dtype=complex)
        amps[(0,) * len(dims)] = 1.0
        self.branches = [Branch((), 1.0, StateVector(self.space, amps))]
        self.postselections: list[PostSelection] = []
        self.assertions: list[AssertionResult] = []
        self._ops: dict = {}

    def live(self):
        return [b for b in self.branches if not b.failed]

    def map_live(self, fn):
        for b in self.live():
            b.state = fn(b.state)

    def op(self, key, build):
        if key not in self._ops:
            self._ops[key] = build()
        return self._ops[key]

    def run(self) -> RunReport:
        for i, step in enumerate(self.protocol.steps):
            handler = getattr(self, "_" + type(step).__name__)
            handler(i, step)
        return RunReport(self.protocol, self.n_max, self.branches,
                         self.postselections, self.assertions)

    def _DeclareAtom(self, i, s):
        pass

    def _PrepareAtom(self, i, s):
        sp = self.species[s.label]
        k = sp.index(s.level)
        perm = np.eye(sp.dim, dtype=complex)
        perm[[0, k]] = perm[[k, 0]]
        op = OperatorMatrix(perm, unitary=True)
        self.map_live(lambda st: apply_local(op, st, [s.label]))

    def _field_state(self, s: PrepareField) -> StateVector:
        if s.kind == "vacuum":
            return bosonic.fock_state(0, self.n_max)
        if s.kind == "fockplus":
            return bosonic.fock_superposition(+1, self.n_max)
        return bosonic.coherent_state(s.alpha, self.n_max)

    def _PrepareField(self, i, s):
        fresh = self._field_state(s)
        position = len(self.space.dims) - 1

        def reload(st):
            rest, _ = split_product(st, CAVITY)
            out = insert_subsystem(rest, fresh, position)
            return StateVector(self.space, out.amps)

        self.map_live(reload)

    def _Rotate(self, i, s):
        op = self.op(("rot", s.name, s.atom),
                     lambda: atomdyn.rotation(s.name, self.species[s.atom]))
        self.map_live(lambda st: apply_local(op, st, [s.atom]))

    def _InteractDispersive(self, i, s):
        sp = self.species[s.atom].name
        build = atomdyn.dispersive_cascade_u if sp == "cascade" else atomdyn.dispersive_lambda_u
        op = self.op(("disp", sp, s.phi), lambda: build(s.phi, self.n_max))
        self.map_live(lambda st: apply_local(op, st, [s.atom, CAVITY]))

    def _InteractResonant(self, i, s):
        op = self.op(("jc", s.gtau), lambda: atomdyn.resonant_jc_u(s.gtau, self.n_max))
        self.map_live(lambda st: apply_local(op, st, [s.atom, CAVITY]))

    def _Inject(self, i, s):
        op = self.op(("inj", s.beta), lambda: bosonic.displacement(s.beta, self.n_max))

        def inject(st):
            out = apply_local(op, st, [CAVITY])
            bosonic.check_edge(out.tensor, self.n_max)
            return out.normalized()

        self.map_live(inject)

    def _Measure(self, i, s):
        new = []
        before = after = 0.0
        for b in self.branches:
            if b.failed:
                new.append(b)
                continue
            if s.mode == "postselect":
                before += b.probability
                try:
                    p, post = post_select(b.state, s.atom, s.level)
                except ZeroProbabilityBranch:
                    continue
                after += b.probability * p
                new.append(Branch(b.path + ((s.atom, s.level),), b.probability * p, post))
                continue
            for level, p, post in measure_subsystem(b.state, s.atom):
                failed = s.mode == "herald" and level != s.level
                new.append(Branch(b.path + ((s.atom, level),), b.probability * p, post, failed))
        if s.mode == "postselect":
            if after <= 0.0:
                raise ZeroProbabilityBranch(
                    f"step {i}: post-selecting {s.atom}={s.level} has probability 0")
            self.postselections.append(PostSelection(i, s.atom, s.level, after / before))
        self.branches = new

    def _AssertFidelity(self, i, s):
        sp = self.species[s.atoms[0]]
        target = bell_target_state(s.target, sp, s.atoms)
        desc = f"fidelity({' '.join(s.atoms)}, {s.target}) >= 1 - {s.tolerance!r}"
        if s.when:
            desc += " when " + " ".join(f"{a}={lv}" for a, lv in s.when)
        hits = [(k, b) for k, b in enumerate(self.branches)
                if not b.failed and b.matches(s.when)]
        if not hits:
            self.assertions.append(AssertionResult(
                i, "fidelity", desc + " (no matching branch)", None, False,
                atoms=s.atoms, target=s.target))
        for k, b in hits:
            fid = subsystem_fidelity(b.state, s.atoms, target)
            self.assertions.append(AssertionResult(
                i, "fidelity", desc, fid, fid >= 1.0 - s.tolerance, k, s.atoms, s.target))

    def _AssertProbability(self, i, s):
        total = math.fsum(b.probability for b in self.branches)
        p = math.fsum(b.probability for b in self.branches
                      if b.matches(s.when)) / total
        desc = ("P(" + " ".join(f"{a}={lv}" for a, lv in s.when) + ")"
                f" = {s.expected!r} +- {s.tolerance!r}")
        self.assertions.append(AssertionResult(
            i, "probability", desc, p, abs(p - s.expected) <= s.tolerance))


def run(protocol: Protocol, cutoff: int | None = None) -> RunReport:
    """Execute ``protocol`` exactly and return every surviving branch."""
    validate(protocol)
    return _Runner(protocol, resolve_cutoff(protocol, cutoff)).run()
