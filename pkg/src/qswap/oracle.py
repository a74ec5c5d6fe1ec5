"""Closed-form reference values, computed scalar by scalar.

Nothing in this module touches the state/operator machinery; it exists so the
engine can be checked against an independent code path.
"""

from __future__ import annotations

import cmath
import math

COHERENT_SCHEMES = ("cascade-coherent", "lambda-coherent")


def coherent_overlap(alpha: complex, beta: complex) -> complex:
    """<beta|alpha> for untruncated coherent states."""
    alpha, beta = complex(alpha), complex(beta)
    return cmath.exp(-0.5 * abs(alpha) ** 2 - 0.5 * abs(beta) ** 2 + beta.conjugate() * alpha)


def cat_norm_squared(alpha: complex, parity: str) -> float:
    sign = 1.0 if parity == "even" else -1.0
    return 2.0 * (1.0 + sign * math.exp(-2.0 * abs(alpha) ** 2))


def poisson_amplitude(alpha: float, n: int) -> float:
    """|C_n| = exp(-|a|²/2) |a|^n / sqrt(n!), via logs to stay finite."""
    a = abs(alpha)
    if a == 0:
        return 1.0 if n == 0 else 0.0
    return math.exp(-0.5 * a * a + n * math.log(a) - 0.5 * math.lgamma(n + 1))


def chi_norms(alpha_field: complex, gtau: float, cutoff: int):
    """(||chi_f||², ||chi_e||²) after a resonant pass of a ground-state atom.

    ``alpha_field`` is the amplitude of the coherent field the atom meets.
    """
    f2 = e2 = 0.0
    for n in range(cutoff + 1):
        c2 = poisson_amplitude(alpha_field, n) ** 2
        f2 += c2 * math.cos(gtau * math.sqrt(n)) ** 2
        if n >= 1:
            e2 += c2 * math.sin(gtau * math.sqrt(n)) ** 2
    return f2, e2


def default_gtau(field_amplitude: float) -> float:
    """gτ with sqrt(nbar) gτ = π/2, nbar the integer nearest |amplitude|²."""
    nbar = round(abs(field_amplitude) ** 2)
    if nbar == 0:
        raise ValueError("field amplitude too small to pick a resonant pulse")
    return math.pi / (2.0 * math.sqrt(nbar))


def detection_success_probability(scheme: str, alpha: float, gtau: float | None = None,
                                  cutoff: int | None = None) -> float:
    """P(auxiliary atom found in e) for the coherent preparation schemes: ½||chi_e||².

    The auxiliary atom meets the displaced field of amplitude 2α.
    """
    if scheme not in COHERENT_SCHEMES:
        raise ValueError(f"{scheme!r} is not a coherent-field scheme")
    field = 2.0 * abs(alpha)
    if gtau is None:
        gtau = default_gtau(field)
    if cutoff is None:
        cutoff = int(math.ceil(field * field + 8 * field + 12))
    return 0.5 * chi_norms(field, gtau, cutoff)[1]
