"""Truncated single-mode field: Fock basis |0>..|n_max>.

All field states live on a one-subsystem :class:`CompositeSpace` labelled
``"C"`` with level names ``"0"``..``str(n_max)``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from .hilbert import CompositeSpace, HilbertError, OperatorMatrix, StateVector

#: Largest tail weight a coherent state may lose to truncation.
TRUNCATION_WEIGHT = 1e-10
#: Largest weight allowed on the top three Fock levels of any field state.
EDGE_WEIGHT = 1e-8


class CutoffError(HilbertError):
    """The Fock cutoff is too small for the requested amplitude."""


def cutoff_rule(amplitude: float) -> int:
    """Smallest n_max deemed safe for a field of amplitude ``|amplitude|``."""
    a = abs(amplitude)
    return int(math.ceil(a * a + 8 * a + 12))


def field_space(n_max: int, label: str = "C") -> CompositeSpace:
    if n_max < 1:
        raise CutoffError(f"n_max must be >= 1, got {n_max}")
    return CompositeSpace((n_max + 1,), (label,), (tuple(str(n) for n in range(n_max + 1)),))


def edge_weight(amps: np.ndarray) -> float:
    """Weight on the top three Fock levels of a (field-last) amplitude array."""
    t = np.asarray(amps)
    total = float(np.sum(np.abs(t) ** 2))
    return float(np.sum(np.abs(t[..., -3:]) ** 2)) / total if total else 0.0


def check_edge(amps: np.ndarray, n_max: int):
    w = edge_weight(amps)
    if w >= EDGE_WEIGHT:
        raise CutoffError(
            f"field weight {w:.3g} on levels {n_max - 2}..{n_max}; raise the cutoff")


def fock_state(n: int, n_max: int) -> StateVector:
    if not 0 <= n <= n_max:
        raise CutoffError(f"Fock level {n} outside 0..{n_max}")
    amps = np.zeros(n_max + 1, dtype=complex)
    amps[n] = 1.0
    return StateVector(field_space(n_max), amps)


def fock_superposition(sign: int, n_max: int) -> StateVector:
    """(|0> + sign |1>)/sqrt(2); the |+>_FS / |->_FS cavity states."""
    amps = np.zeros(n_max + 1, dtype=complex)
    amps[0] = 1.0
    amps[1] = 1.0 if sign >= 0 else -1.0
    return StateVector(field_space(n_max), amps / math.sqrt(2))


def _coherent_amps(alpha: complex, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1)
    if alpha == 0:
        amps = np.zeros(n_max + 1, dtype=complex)
        amps[0] = 1.0
        return amps
    r = abs(alpha)
    phase = np.exp(1j * np.angle(alpha) * n)
    logmag = -0.5 * r * r + n * math.log(r) - 0.5 * gammaln(n + 1)
    return np.exp(logmag) * phase


def coherent_state(alpha: complex, n_max: int) -> StateVector:
    """Truncated, renormalized coherent state |alpha>."""
    amps = _coherent_amps(alpha, n_max)
    kept = float(np.sum(np.abs(amps) ** 2))
    if 1.0 - kept > TRUNCATION_WEIGHT:
        raise CutoffError(
            f"n_max={n_max} loses weight {1.0 - kept:.3g} of |{alpha}>; "
            f"use at least {cutoff_rule(abs(alpha))}")
    check_edge(amps, n_max)
    return StateVector(field_space(n_max), amps / math.sqrt(kept))


def _displacement_entries(beta: complex, n_max: int) -> np.ndarray:
    # <m|D|n> = sqrt(n!/m!) beta^(m-n) e^{-|beta|^2/2} L_n^(m-n)(|beta|^2) for m >= n;
    # for m < n swap roles and use -conj(beta).
    x = abs(beta) ** 2
    m, n = np.meshgrid(np.arange(n_max + 1), np.arange(n_max + 1), indexing="ij")
    hi, lo = np.maximum(m, n), np.minimum(m, n)
    k = hi - lo
    lag = eval_genlaguerre(lo, k, x)
    if beta == 0:
        return np.where(k == 0, lag, 0.0).astype(complex)
    b = np.where(m >= n, beta, -np.conj(beta))
    scale = np.exp(0.5 * (gammaln(lo + 1) - gammaln(hi + 1)) + k * math.log(abs(beta)) - 0.5 * x)
    return scale * np.exp(1j * k * np.angle(b)) * lag


def displacement(beta: complex, n_max: int) -> OperatorMatrix:
    """Exact matrix elements of D(beta) restricted to the truncated basis.

    The restriction is not unitary near the top of the basis; apply it only
    to states whose support, after displacement, stays well below ``n_max``.
    """
    if n_max < cutoff_rule(abs(beta)):
        raise CutoffError(
            f"n_max={n_max} too small for displacement by {beta}; "
            f"need {cutoff_rule(abs(beta))}")
    return OperatorMatrix(_displacement_entries(beta, n_max), unitary=True)


def number_phase(phi: float, n_max: int) -> OperatorMatrix:
    """exp(i phi a^dagger a)."""
    return OperatorMatrix(np.diag(np.exp(1j * phi * np.arange(n_max + 1))), unitary=True)


def parity_projectors(n_max: int):
    """(Pi_plus, Pi_minus) = ((P + 1)/2, (P - 1)/2) with P = exp(i pi a^dagger a).

    Pi_minus carries the sign of the defining formula: it is minus the
    projector onto odd photon numbers.
    """
    p = np.diag((-1.0) ** np.arange(n_max + 1)).astype(complex)
    eye = np.eye(n_max + 1)
    return OperatorMatrix(0.5 * (p + eye)), OperatorMatrix(0.5 * (p - eye))


def cat_state(alpha: complex, parity: str, n_max: int, normalized: bool = False) -> StateVector:
    """|alpha> + |-alpha> (``"even"``) or |alpha> - |-alpha> (``"odd"``).

    The raw superposition has squared norm 2(1 +- exp(-2|alpha|^2)).
    """
    if parity not in ("even", "odd"):
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
    if parity == "odd" and alpha == 0:
        raise HilbertError("the odd cat state vanishes at alpha = 0")
    plus = coherent_state(alpha, n_max).amps
    minus = coherent_state(-alpha, n_max).amps
    amps = plus + minus if parity == "even" else plus - minus
    state = StateVector(field_space(n_max), amps)
    return state.normalized() if normalized else state


def mean_photon_number(state: StateVector) -> float:
    p = np.abs(state.amps) ** 2
    return float(np.dot(np.arange(p.size), p) / p.sum())
