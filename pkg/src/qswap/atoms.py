"""Atomic species, Ramsey rotations and atom-field interaction unitaries.

Interaction operators act on (atom ⊗ field) with the atom index most
significant, matching the engine's register order (atoms first, cavity last).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bosonic import number_phase, parity_projectors
from .hilbert import OperatorMatrix


@dataclass(frozen=True)
class Species:
    name: str
    levels: tuple[str, ...]

    @property
    def dim(self) -> int:
        return len(self.levels)

    def index(self, level: str) -> int:
        try:
            return self.levels.index(level)
        except ValueError:
            raise ValueError(f"{self.name} atoms have no level {level!r}") from None


TWO_LEVEL = Species("twolevel", ("f", "e"))
CASCADE = Species("cascade", ("e", "f", "g"))
LAMBDA = Species("lambda", ("a", "b", "c"))

SPECIES = {s.name: s for s in (TWO_LEVEL, CASCADE, LAMBDA)}

#: The two levels a Ramsey zone couples, per species.
RAMSEY_PAIR = {"cascade": ("f", "g"), "lambda": ("b", "c")}


def get_species(name: str) -> Species:
    try:
        return SPECIES[name]
    except KeyError:
        raise ValueError(
            f"unknown species {name!r}; expected one of {sorted(SPECIES)}") from None


@dataclass(frozen=True)
class CouplingParams:
    """Physical dispersive parameters; ``phi`` is derived, never stored."""

    g: float
    tau: float
    delta: float
    config: str = "cascade"

    @property
    def phi(self) -> float:
        return phi_from_params(self.g, self.tau, self.delta, self.config)


def phi_from_params(g: float, tau: float, delta: float, config: str) -> float:
    """Dispersive phase: g²τ/Δ for cascade atoms, 2g²τ/Δ for lambda atoms."""
    if delta == 0:
        raise ValueError("dispersive phase needs a nonzero detuning")
    if tau < 0:
        raise ValueError("interaction time must be non-negative")
    if config == "cascade":
        return g * g * tau / delta
    if config == "lambda":
        return 2 * g * g * tau / delta
    raise ValueError(f"config must be 'cascade' or 'lambda', got {config!r}")


def _outer(dim: int, i: int, j: int) -> np.ndarray:
    m = np.zeros((dim, dim), dtype=complex)
    m[i, j] = 1.0
    return m


def dispersive_cascade_u(phi: float, n_max: int) -> OperatorMatrix:
    """exp(-iφ(a†a+1))|e><e| + exp(iφ a†a)|f><f| + |g><g|."""
    n = np.arange(n_max + 1)
    diag = np.concatenate([
        np.exp(-1j * phi * (n + 1)),
        np.exp(1j * phi * n),
        np.ones(n_max + 1),
    ])
    return OperatorMatrix(np.diag(diag), unitary=True)


def dispersive_lambda_u(phi: float, n_max: int) -> OperatorMatrix:
    """Effective Raman operator on a lambda atom (levels a, b, c) and the field."""
    p = number_phase(phi, n_max).entries
    one = np.eye(n_max + 1)
    a, b, c = (LAMBDA.index(x) for x in "abc")
    u = (np.kron(_outer(3, a, a), -p)
         + np.kron(_outer(3, b, b), 0.5 * (p + one))
         + np.kron(_outer(3, b, c), 0.5 * (p - one))
         + np.kron(_outer(3, c, b), 0.5 * (p - one))
         + np.kron(_outer(3, c, c), 0.5 * (p + one)))
    return OperatorMatrix(u, unitary=True)


def dispersive_lambda_u_pi(n_max: int) -> OperatorMatrix:
    """The φ = π lambda operator written with the parity projectors."""
    plus, minus = parity_projectors(n_max)
    p = number_phase(math.pi, n_max).entries
    a, b, c = (LAMBDA.index(x) for x in "abc")
    u = (np.kron(_outer(3, a, a), -p)
         + np.kron(_outer(3, b, b), plus.entries)
         + np.kron(_outer(3, b, c), minus.entries)
         + np.kron(_outer(3, c, b), minus.entries)
         + np.kron(_outer(3, c, c), plus.entries))
    return OperatorMatrix(u, unitary=True)


def resonant_jc_u(gtau: float, n_max: int) -> OperatorMatrix:
    """Resonant Jaynes-Cummings propagator for a two-level atom (f lower, e upper).

    Couples |e,n> <-> |f,n+1> with Rabi angle gτ√(n+1). The element
    <e,n_max|U|e,n_max> keeps its exact value although its partner
    |f,n_max+1> is outside the basis.
    """
    dim = n_max + 1
    f, e = TWO_LEVEL.index("f"), TWO_LEVEL.index("e")
    u = np.zeros((2 * dim, 2 * dim), dtype=complex)
    u[f * dim, f * dim] = 1.0
    for n in range(dim):
        theta = gtau * math.sqrt(n + 1)
        en = e * dim + n
        u[en, en] = math.cos(theta)
        if n + 1 < dim:
            fn1 = f * dim + n + 1
            u[fn1, fn1] = math.cos(theta)
            u[en, fn1] = -1j * math.sin(theta)
            u[fn1, en] = -1j * math.sin(theta)
    return OperatorMatrix(u, unitary=True)


_S = 1 / math.sqrt(2)

# 2x2 matrices on an ordered level pair (first, second); columns index inputs.
_PAIR_ROTATIONS = {
    "MA": np.array([[1, 1], [-1, 1]], dtype=complex) * _S,
    "K": np.array([[1, -1], [1, 1]], dtype=complex) * _S,
    "R4": np.array([[0, 1], [-1, 0]], dtype=complex),
    "RC": np.array([[0, 1], [1, 0]], dtype=complex),
    "R1L": np.array([[0, -1], [1, 0]], dtype=complex),
    "R2L": np.array([[0, 1], [1, 0]], dtype=complex),
    "RI": np.array([[1, 1j], [1j, 1]], dtype=complex) * _S,
}

ROTATION_ALIASES = {"R1λ": "R1L", "R2λ": "R2L", "R0": "RI"}
ROTATIONS = tuple(_PAIR_ROTATIONS)


def rotation_levels(name: str, species: Species) -> tuple[str, str]:
    """The ordered level pair a named rotation acts on for ``species``."""
    name = ROTATION_ALIASES.get(name, name)
    if name not in _PAIR_ROTATIONS:
        raise ValueError(f"unknown rotation {name!r}; expected one of {ROTATIONS}")
    if name == "RI":
        if "e" in species.levels and "f" in species.levels:
            return ("f", "e")
        raise ValueError(f"rotation RI needs levels e and f; {species.name} lacks them")
    if name in ("R1L", "R2L") and species.name != "lambda":
        raise ValueError(f"rotation {name} acts on lambda atoms only")
    if species.name not in RAMSEY_PAIR:
        raise ValueError(f"rotation {name} is not defined for {species.name} atoms")
    return RAMSEY_PAIR[species.name]


def rotation(name: str, species: Species) -> OperatorMatrix:
    """Named Ramsey rotation embedded on the species' level pair."""
    first, second = rotation_levels(name, species)
    m2 = _PAIR_ROTATIONS[ROTATION_ALIASES.get(name, name)]
    i, j = species.index(first), species.index(second)
    u = np.eye(species.dim, dtype=complex)
    for r, row in enumerate((i, j)):
        for c, col in enumerate((i, j)):
            u[row, col] = m2[r, c]
    return OperatorMatrix(u, unitary=True)
