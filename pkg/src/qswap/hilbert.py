"""Composite Hilbert spaces, pure states and dense operators.

States are stored as flat complex vectors in row-major order over the
ordered subsystem list (first subsystem most significant). Every function
returns new objects; nothing here mutates its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

#: Outcomes below this Born probability are treated as numerical dust.
PROB_FLOOR = 1e-14


class HilbertError(ValueError):
    """Raised on malformed spaces or mismatched dimensions."""


class ZeroProbabilityBranch(HilbertError):
    """Raised when post-selecting an outcome that cannot occur."""


@dataclass(frozen=True)
class CompositeSpace:
    dims: tuple[int, ...]
    labels: tuple[str, ...]
    levels: tuple[tuple[str, ...], ...] | None = None

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        labels = tuple(self.labels)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "labels", labels)
        if not dims:
            raise HilbertError("a space needs at least one subsystem")
        if any(d < 2 for d in dims):
            raise HilbertError(f"subsystem dimensions must be >= 2, got {dims}")
        if len(labels) != len(dims):
            raise HilbertError("one label per subsystem is required")
        if len(set(labels)) != len(labels):
            raise HilbertError(f"duplicate subsystem labels in {labels}")
        if self.levels is None:
            levels = tuple(tuple(str(i) for i in range(d)) for d in dims)
        else:
            levels = tuple(tuple(lv) for lv in self.levels)
        if len(levels) != len(dims) or any(len(lv) != d for lv, d in zip(levels, dims)):
            raise HilbertError("level names must match subsystem dimensions")
        object.__setattr__(self, "levels", levels)

    @property
    def total(self) -> int:
        return int(np.prod(self.dims))

    def index(self, label: str | int) -> int:
        if isinstance(label, (int, np.integer)):
            if not 0 <= label < len(self.dims):
                raise HilbertError(f"subsystem index {label} out of range")
            return int(label)
        try:
            return self.labels.index(label)
        except ValueError:
            raise HilbertError(f"no subsystem named {label!r}") from None

    def level_index(self, target: str | int, level: str | int) -> int:
        k = self.index(target)
        if isinstance(level, (int, np.integer)):
            if not 0 <= level < self.dims[k]:
                raise HilbertError(f"level {level} out of range for {self.labels[k]}")
            return int(level)
        try:
            return self.levels[k].index(level)
        except ValueError:
            raise HilbertError(
                f"subsystem {self.labels[k]} has no level {level!r}") from None

    def without(self, target: str | int) -> "CompositeSpace":
        k = self.index(target)
        keep = [i for i in range(len(self.dims)) if i != k]
        return CompositeSpace(tuple(self.dims[i] for i in keep),
                              tuple(self.labels[i] for i in keep),
                              tuple(self.levels[i] for i in keep))

    @staticmethod
    def join(spaces: Sequence["CompositeSpace"]) -> "CompositeSpace":
        dims, labels, levels = [], [], []
        for sp in spaces:
            dims.extend(sp.dims)
            labels.extend(sp.labels)
            levels.extend(sp.levels)
        return CompositeSpace(tuple(dims), tuple(labels), tuple(levels))


class StateVector:
    """A ket over a :class:`CompositeSpace`.

    The amplitude array is copied and frozen on construction.
    """

    __slots__ = ("space", "amps")

    def __init__(self, space: CompositeSpace, amps):
        amps = np.array(amps, dtype=complex).reshape(-1)
        if amps.shape[0] != space.total:
            raise HilbertError(
                f"expected {space.total} amplitudes, got {amps.shape[0]}")
        if not np.all(np.isfinite(amps)):
            raise HilbertError("amplitudes must be finite")
        amps.setflags(write=False)
        self.space = space
        self.amps = amps

    def __repr__(self):
        return f"StateVector(labels={self.space.labels}, dims={self.space.dims})"

    @property
    def tensor(self) -> np.ndarray:
        return self.amps.reshape(self.space.dims)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def normalized(self) -> "StateVector":
        n = self.norm()
        if n == 0.0:
            raise HilbertError("cannot normalize the zero vector")
        return StateVector(self.space, self.amps / n)

    def inner(self, other: "StateVector") -> complex:
        """<self|other>."""
        _same_space(self, other)
        return complex(np.vdot(self.amps, other.amps))

    def with_tensor(self, tensor: np.ndarray) -> "StateVector":
        return StateVector(self.space, tensor)


class OperatorMatrix:
    """Dense square operator; ``unitary`` is a claim, checked by :func:`unitarity_error`."""

    __slots__ = ("entries", "unitary")

    def __init__(self, entries, unitary: bool = False):
        entries = np.array(entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise HilbertError(f"operator must be square, got shape {entries.shape}")
        entries.setflags(write=False)
        self.entries = entries
        self.unitary = bool(unitary)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        if self.dim != other.dim:
            raise HilbertError("operator dimensions differ")
        return OperatorMatrix(self.entries @ other.entries,
                              unitary=self.unitary and other.unitary)

    def __repr__(self):
        return f"OperatorMatrix(dim={self.dim}, unitary={self.unitary})"


def _same_space(a: StateVector, b: StateVector):
    if a.space.dims != b.space.dims:
        raise HilbertError(f"space mismatch: {a.space.dims} vs {b.space.dims}")


def basis_state(space: CompositeSpace, levels: Sequence[str | int]) -> StateVector:
    """Product basis ket with one level per subsystem."""
    if len(levels) != len(space.dims):
        raise HilbertError("one level per subsystem is required")
    idx = tuple(space.level_index(k, lv) for k, lv in enumerate(levels))
    amps = np.zeros(space.dims, dtype=complex)
    amps[idx] = 1.0
    return StateVector(space, amps)


def tensor_states(parts: Sequence[StateVector]) -> StateVector:
    if not parts:
        raise HilbertError("tensor_states needs at least one factor")
    amps = parts[0].amps
    for p in parts[1:]:
        amps = np.kron(amps, p.amps)
    space = CompositeSpace.join([p.space for p in parts])
    return StateVector(space, amps).normalized()


def embed(op: OperatorMatrix, space: CompositeSpace, target: str | int) -> OperatorMatrix:
    """Lift a single-subsystem operator to the full space."""
    k = space.index(target)
    if op.dim != space.dims[k]:
        raise HilbertError(
            f"operator dim {op.dim} does not match subsystem dim {space.dims[k]}")
    left = int(np.prod(space.dims[:k]))
    right = int(np.prod(space.dims[k + 1:]))
    full = np.kron(np.kron(np.eye(left), op.entries), np.eye(right))
    return OperatorMatrix(full, unitary=op.unitary)


def apply(op: OperatorMatrix, state: StateVector) -> StateVector:
    if op.dim != state.space.total:
        raise HilbertError(
            f"operator dim {op.dim} does not match state dim {state.space.total}")
    return StateVector(state.space, op.entries @ state.amps)


def apply_local(op: OperatorMatrix, state: StateVector,
                targets: Sequence[str | int]) -> StateVector:
    """Apply ``op`` acting on the listed subsystems (in the listed order).

    Equivalent to embedding ``op`` and calling :func:`apply`, without ever
    forming the full-space matrix.
    """
    space = state.space
    ks = [space.index(t) for t in targets]
    if len(set(ks)) != len(ks):
        raise HilbertError("repeated target subsystem")
    local_dims = [space.dims[k] for k in ks]
    if op.dim != int(np.prod(local_dims)):
        raise HilbertError(
            f"operator dim {op.dim} does not match targets {local_dims}")
    n = len(space.dims)
    rest = [k for k in range(n) if k not in ks]
    psi = np.transpose(state.tensor, ks + rest).reshape(op.dim, -1)
    out = (op.entries @ psi).reshape(local_dims + [space.dims[k] for k in rest])
    out = np.transpose(out, np.argsort(ks + rest))
    return StateVector(space, out)


def _project(state: StateVector, k: int, level: int) -> np.ndarray:
    t = np.zeros(state.space.dims, dtype=complex)
    idx = [slice(None)] * t.ndim
    idx[k] = level
    t[tuple(idx)] = state.tensor[tuple(idx)]
    return t


def measure_subsystem(state: StateVector, target: str | int):
    """Projective measurement of one subsystem in its level basis.

    Returns ``[(level_name, probability, post_state), ...]`` in level order,
    omitting outcomes with probability below :data:`PROB_FLOOR`. The measured
    subsystem stays in the space (collapsed onto the observed level).
    """
    k = state.space.index(target)
    t = state.tensor
    axes = tuple(i for i in range(t.ndim) if i != k)
    weights = np.sum(np.abs(t) ** 2, axis=axes) / state.norm() ** 2
    out = []
    for lv, p in enumerate(weights):
        if p < PROB_FLOOR:
            continue
        post = StateVector(state.space, _project(state, k, lv)).normalized()
        out.append((state.space.levels[k][lv], float(p), post))
    return out


def post_select(state: StateVector, target: str | int, outcome: str | int):
    """Return ``(probability, conditional_state)`` for one outcome."""
    k = state.space.index(target)
    lv = state.space.level_index(k, outcome)
    proj = _project(state, k, lv)
    p = float(np.sum(np.abs(proj) ** 2) / state.norm() ** 2)
    if p < PROB_FLOOR:
        raise ZeroProbabilityBranch(
            f"outcome {state.space.levels[k][lv]!r} on {state.space.labels[k]} "
            f"has probability {p:.3g}")
    return p, StateVector(state.space, proj).normalized()


def factor_out(state: StateVector, target: str | int) -> StateVector:
    """Drop a subsystem that is in a definite basis level."""
    k = state.space.index(target)
    t = state.tensor
    weights = np.sum(np.abs(t) ** 2, axis=tuple(i for i in range(t.ndim) if i != k))
    lv = int(np.argmax(weights))
    if weights[lv] < (1 - 1e-12) * weights.sum():
        raise HilbertError(f"{state.space.labels[k]} is not in a definite level")
    return StateVector(state.space.without(k), np.take(t, lv, axis=k)).normalized()


def fidelity(state: StateVector, target_state: StateVector) -> float:
    """|<target|state>|^2 for normalized kets on the same space."""
    _same_space(state, target_state)
    return float(abs(np.vdot(target_state.amps, state.amps)) ** 2)


def subsystem_fidelity(state: StateVector, targets: Sequence[str | int],
                       target_state: StateVector) -> float:
    """<T| rho_targets |T> where rho is the reduced state of ``targets``.

    Equals :func:`fidelity` when the targets factor out of ``state``; lower
    otherwise. ``target_state`` lives on the targets' space in the listed order.
    """
    space = state.space
    ks = [space.index(t) for t in targets]
    local = [space.dims[k] for k in ks]
    if list(target_state.space.dims) != local:
        raise HilbertError(
            f"target state dims {target_state.space.dims} do not match {local}")
    rest = [k for k in range(len(space.dims)) if k not in ks]
    m = np.transpose(state.tensor, ks + rest).reshape(int(np.prod(local)), -1)
    overlap = target_state.amps.conj() @ m
    return float(np.sum(np.abs(overlap) ** 2) / state.norm() ** 2)


def split_product(state: StateVector, target: str | int, tol: float = 1e-10):
    """Split ``state`` as (rest) ⊗ (target) if it is a product across that cut.

    Returns ``(rest_state, target_state)``; raises :class:`HilbertError` if the
    target is entangled with the rest beyond ``tol`` (in purity deficit).
    """
    space = state.space
    k = space.index(target)
    rest = [i for i in range(len(space.dims)) if i != k]
    m = np.transpose(state.tensor, rest + [k]).reshape(-1, space.dims[k])
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    weight = s ** 2 / np.sum(s ** 2)
    if weight[0] < 1 - tol:
        raise HilbertError(
            f"{space.labels[k]} is entangled with the rest "
            f"(largest Schmidt weight {weight[0]:.12f})")
    rest_space = space.without(k)
    tgt_space = CompositeSpace((space.dims[k],), (space.labels[k],), (space.levels[k],))
    rest_state = StateVector(rest_space, u[:, 0] * s[0]).normalized()
    return rest_state, StateVector(tgt_space, vh[0]).normalized()


def insert_subsystem(rest: StateVector, part: StateVector, position: int) -> StateVector:
    """Inverse of :func:`split_product`: place ``part`` at ``position``."""
    amps = np.kron(rest.amps, part.amps)
    n = len(rest.space.dims)
    spaces_dims = list(rest.space.dims) + list(part.space.dims)
    t = amps.reshape(spaces_dims)
    order = list(range(n))
    order.insert(position, n)
    t = np.transpose(t, order)
    dims = [spaces_dims[i] for i in order]
    labels = list(rest.space.labels) + list(part.space.labels)
    levels = list(rest.space.levels) + list(part.space.levels)
    space = CompositeSpace(tuple(dims), tuple(labels[i] for i in order),
                           tuple(levels[i] for i in order))
    return StateVector(space, t)


def unitarity_error(op: OperatorMatrix, keep: np.ndarray | None = None) -> float:
    """max |(U^dagger U - I)_ij| restricted to the index set ``keep``."""
    u = op.entries
    g = u.conj().T @ u - np.eye(op.dim)
    if keep is not None:
        g = g[np.ix_(keep, keep)]
    return float(np.max(np.abs(g))) if g.size else 0.0
