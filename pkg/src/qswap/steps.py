"""Declarative protocol values.

A :class:`Protocol` is an ordered tuple of immutable step records plus a few
named parameters. Steps compare structurally, so a parsed protocol can be
checked for equality against one built in code.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

BELL_KINDS = ("phi+", "phi-", "psi+", "psi-")
FIELD_KINDS = ("vacuum", "fockplus", "coherent")
MEASURE_MODES = ("all", "herald", "postselect")
PARAM_KEYS = ("name", "cutoff")

Condition = tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class DeclareAtom:
    label: str
    species: str


@dataclass(frozen=True)
class PrepareAtom:
    label: str
    level: str


@dataclass(frozen=True)
class PrepareField:
    kind: str
    alpha: float = 0.0
    reload: bool = False


@dataclass(frozen=True)
class Rotate:
    atom: str
    name: str


@dataclass(frozen=True)
class InteractDispersive:
    atom: str
    phi: float


@dataclass(frozen=True)
class InteractResonant:
    atom: str
    gtau: float


@dataclass(frozen=True)
class Inject:
    beta: float


@dataclass(frozen=True)
class Measure:
    """``all`` fans out every outcome; ``herald`` does too but marks branches
    whose outcome differs from ``level`` as failed; ``postselect`` keeps only
    ``level``."""

    atom: str
    mode: str = "all"
    level: str | None = None


@dataclass(frozen=True)
class AssertFidelity:
    atoms: tuple[str, ...]
    target: str
    tolerance: float
    when: Condition = ()


@dataclass(frozen=True)
class AssertProbability:
    when: Condition
    expected: float
    tolerance: float


Step = Union[DeclareAtom, PrepareAtom, PrepareField, Rotate, InteractDispersive,
             InteractResonant, Inject, Measure, AssertFidelity, AssertProbability]


@dataclass(frozen=True)
class Protocol:
    steps: tuple = ()
    params: tuple[tuple[str, object], ...] = field(default=())

    def param(self, key: str, default=None):
        for k, v in self.params:
            if k == key:
                return v
        return default

    @property
    def name(self) -> str:
        return str(self.param("name", "unnamed"))

    def atoms(self) -> dict[str, str]:
        """Declared atoms in declaration order, mapped to species names."""
        return {s.label: s.species for s in self.steps if isinstance(s, DeclareAtom)}

    def replace_step(self, index: int, step) -> "Protocol":
        steps = list(self.steps)
        steps[index] = step
        return Protocol(tuple(steps), self.params)

    def with_param(self, key: str, value) -> "Protocol":
        params = [(k, v) for k, v in self.params if k != key]
        params.append((key, value))
        return Protocol(self.steps, tuple(params))
