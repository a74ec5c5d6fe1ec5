"""Built-in preparation and swapping protocols, Bell targets and Bell-basis helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import atoms as atomdyn
from . import bosonic
from .engine import _bell_amplitudes, bell_target_state
from .hilbert import (StateVector, apply_local, measure_subsystem,
                      tensor_states)
from .oracle import default_gtau
from .steps import (BELL_KINDS, AssertFidelity, AssertProbability, DeclareAtom, Inject,
                    InteractDispersive, InteractResonant, Measure, PrepareAtom,
                    PrepareField, Protocol, Rotate)

SCHEMES = ("cascade-coherent", "cascade-fock", "lambda-coherent", "lambda-fock")
DEFAULT_ALPHA = 2.0
FIDELITY_TOL = 1e-8


def scheme_species(scheme: str) -> str:
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    return scheme.split("-")[0]


def is_coherent(scheme: str) -> bool:
    scheme_species(scheme)
    return scheme.endswith("coherent")


@dataclass(frozen=True)
class BellTarget:
    kind: str
    species: str
    atoms: tuple[str, str] = ("A1", "A2")

    def __post_init__(self):
        if self.kind not in BELL_KINDS:
            raise ValueError(f"unknown Bell state {self.kind!r}")
        if self.species not in atomdyn.RAMSEY_PAIR:
            raise ValueError(f"Bell targets live on cascade or lambda atoms, not {self.species!r}")


def bell_state(target: BellTarget) -> StateVector:
    """Normalized two-atom Bell state on the species' Ramsey level pair."""
    return bell_target_state(target.kind, atomdyn.get_species(target.species), target.atoms)


# Preparation sequences ----------------------------------------------------

def _pass_dispersive(scheme: str, atom: str) -> list:
    if scheme_species(scheme) == "cascade":
        return [PrepareAtom(atom, "g"), Rotate(atom, "MA"),
                InteractDispersive(atom, math.pi), Rotate(atom, "MA")]
    return [PrepareAtom(atom, "b"), InteractDispersive(atom, math.pi)]


# Rotation turning the "phi" preparation of each scheme into "psi" states:
# phi+ -> psi-, phi- -> psi+ for the coherent schemes; phi+- -> psi+- for Fock.
_PSI_ROTATION = {"cascade-coherent": "R4", "cascade-fock": "RC",
                 "lambda-coherent": "R1L", "lambda-fock": "R2L"}


def _phi_source(scheme: str, kind: str) -> str:
    """Which Phi state is prepared before the final rotation to reach ``kind``."""
    if kind.startswith("phi"):
        return kind
    if is_coherent(scheme):
        return "phi+" if kind == "psi-" else "phi-"
    return "phi+" if kind == "psi+" else "phi-"


def pair_steps(scheme: str, kind: str, pair=("A1", "A2"), aux="A3",
               alpha: float = DEFAULT_ALPHA, gtau: float | None = None,
               detection: str = "herald") -> list:
    """Steps (without declarations) that leave ``pair`` in Bell state ``kind``.

    ``detection`` selects how the auxiliary atom is read out: ``"herald"``
    keeps every outcome and marks the unwanted one failed, ``"postselect"``
    keeps only the wanted outcome.
    """
    a1, a2 = pair
    phi = _phi_source(scheme, kind)
    sp = scheme_species(scheme)
    steps: list = []
    if is_coherent(scheme):
        start = -alpha if sp == "cascade" else alpha
        steps.append(PrepareField("coherent", float(start)))
    else:
        steps.append(PrepareField("fockplus"))
    steps += _pass_dispersive(scheme, a1)
    steps += _pass_dispersive(scheme, a2)
    if is_coherent(scheme):
        # cascade: inject -alpha for phi+, +alpha for phi-; lambda the reverse
        sign = -1.0 if phi == "phi+" else 1.0
        if sp == "lambda":
            sign = -sign
        steps.append(Inject(float(sign * alpha)))
        pulse = default_gtau(2 * alpha) if gtau is None else gtau
        steps += [PrepareAtom(aux, "f"), InteractResonant(aux, pulse)]
        wanted = "e"
    else:
        steps += [PrepareAtom(aux, "f"), InteractResonant(aux, math.pi / 2 if gtau is None else gtau),
                  Rotate(aux, "RI")]
        wanted = "f" if phi == "phi+" else "e"
    if detection == "postselect":
        steps.append(Measure(aux, "postselect", wanted))
    else:
        steps.append(Measure(aux, "herald", wanted))
    if kind.startswith("psi"):
        steps.append(Rotate(a2, _PSI_ROTATION[scheme]))
    return steps


def builtin_preparation(scheme: str, target: BellTarget | str = "phi+",
                        alpha: float = DEFAULT_ALPHA, gtau: float | None = None) -> Protocol:
    """The four two-atom preparation schemes.

    Coherent schemes herald success on the auxiliary atom A3 being found in
    ``e``; Fock schemes post-select A3 on the outcome that yields the target.
    """
    sp = scheme_species(scheme)
    if isinstance(target, str):
        target = BellTarget(target, sp)
    if target.species != sp:
        raise ValueError(f"{scheme} prepares {sp} atoms, not {target.species}")
    a1, a2 = target.atoms
    steps = [DeclareAtom(a1, sp), DeclareAtom(a2, sp), DeclareAtom("A3", "twolevel")]
    detection = "herald" if is_coherent(scheme) else "postselect"
    body = pair_steps(scheme, target.kind, (a1, a2), "A3", alpha, gtau, detection)
    steps += body
    wanted = body[-2 if target.kind.startswith("psi") else -1].level
    when = (("A3", wanted),) if detection == "herald" else ()
    steps.append(AssertFidelity((a1, a2), target.kind, FIDELITY_TOL, when))
    return Protocol(tuple(steps), (("name", f"{scheme}-{target.kind}"),))


# Swapping -------------------------------------------------------------------

def swap_outcome_label(scheme: str, a5: str, a2: str, a3: str, injection: int = 1) -> str | None:
    """Bell label of (A1, A4) for one outcome path, or None for a failed path.

    Cascade pairs read sigma_x through K then a level detection (g -> +1,
    f -> -1); the label's sign is the eigenvalue product. Lambda pairs are read
    directly: equal levels mean Phi, different levels mean Psi.
    """
    sp = scheme_species(scheme)
    if is_coherent(scheme):
        if a5 != "e":
            return None
        if sp == "cascade":
            family = "phi" if injection > 0 else "psi"
        else:
            sign = "+" if injection > 0 else "-"
    else:
        if sp == "cascade":
            family = "phi" if a5 == "f" else "psi"
        else:
            sign = "+" if a5 == "f" else "-"
    if sp == "cascade":
        ev = {"g": 1, "f": -1}
        return family + ("+" if ev[a2] * ev[a3] > 0 else "-")
    return ("phi" if a2 == a3 else "psi") + sign


def builtin_swap(scheme: str, alpha: float = DEFAULT_ALPHA, gtau: float | None = None,
                 injection: int = 1) -> Protocol:
    """Entanglement swapping: Psi-(A1,A2) ⊗ Psi-(A3,A4), then a Bell measurement on (A2, A3).

    Pair preparation reuses the cavity and post-selects each pair's auxiliary
    atom (D12, D34). Coherent schemes inject ``injection * alpha`` before the
    disentangling atom A5, whose ``e`` outcome heralds success.
    """
    sp = scheme_species(scheme)
    coherent = is_coherent(scheme)
    steps: list = [DeclareAtom(a, sp) for a in ("A1", "A2", "A3", "A4")]
    steps += [DeclareAtom(a, "twolevel") for a in ("D12", "D34", "A5")]
    first = pair_steps(scheme, "psi-", ("A1", "A2"), "D12", alpha, gtau, "postselect")
    second = pair_steps(scheme, "psi-", ("A3", "A4"), "D34", alpha, gtau, "postselect")
    second[0] = PrepareField(second[0].kind, second[0].alpha, reload=True)
    steps += first + second
    if coherent:
        steps.append(PrepareField("coherent", float(alpha), reload=True))
    else:
        steps.append(PrepareField("fockplus", reload=True))
    steps += [InteractDispersive("A2", math.pi), InteractDispersive("A3", math.pi)]
    if coherent:
        pulse = default_gtau(2 * alpha) if gtau is None else gtau
        steps += [Inject(float(injection * alpha)), PrepareAtom("A5", "f"),
                  InteractResonant("A5", pulse), Measure("A5", "herald", "e")]
    else:
        steps += [PrepareAtom("A5", "f"),
                  InteractResonant("A5", math.pi / 2 if gtau is None else gtau),
                  Rotate("A5", "RI"), Measure("A5")]
    if sp == "cascade":
        steps += [Rotate("A2", "K"), Measure("A2"), Rotate("A3", "K"), Measure("A3")]
        pair_levels = ("g", "f")
    else:
        steps += [Measure("A2"), Measure("A3")]
        pair_levels = ("b", "c")
    a5_levels = ("e",) if coherent else ("f", "e")
    for a5 in a5_levels:
        for a2 in pair_levels:
            for a3 in pair_levels:
                label = swap_outcome_label(scheme, a5, a2, a3, injection)
                when = (("A5", a5), ("A2", a2), ("A3", a3))
                steps.append(AssertFidelity(("A1", "A4"), label, FIDELITY_TOL, when))
                if not coherent:
                    steps.append(AssertProbability(when, 0.125, 1e-9))
    name = f"swap-{scheme}" + ("-neg" if coherent and injection < 0 else "")
    return Protocol(tuple(steps), (("name", name),))


# Registry -------------------------------------------------------------------

def _registry() -> dict[str, Callable[..., Protocol]]:
    reg: dict[str, Callable[..., Protocol]] = {}
    for scheme in SCHEMES:
        for kind in BELL_KINDS:
            reg[f"{scheme}-{kind}"] = (
                lambda scheme=scheme, kind=kind, **kw: builtin_preparation(scheme, kind, **kw))
        reg[f"prepare-{scheme}"] = reg[f"{scheme}-phi+"]
        reg[f"swap-{scheme}"] = lambda scheme=scheme, **kw: builtin_swap(scheme, **kw)
        if scheme.endswith("coherent"):
            reg[f"swap-{scheme}-neg"] = (
                lambda scheme=scheme, **kw: builtin_swap(scheme, injection=-1, **kw))
    return reg


BUILTINS = _registry()


def builtin_names() -> list[str]:
    return sorted(BUILTINS)


def get_builtin(name: str, alpha: float | None = None, gtau: float | None = None) -> Protocol:
    """Build a named protocol; ``alpha`` is ignored by Fock schemes."""
    name = name.removeprefix("builtin:")
    if name not in BUILTINS:
        raise KeyError(f"unknown builtin {name!r}")
    kw = {}
    if alpha is not None and "coherent" in name:
        kw["alpha"] = alpha
    if gtau is not None:
        kw["gtau"] = gtau
    return BUILTINS[name](**kw)


# Bell-basis helpers ---------------------------------------------------------

_FLIP = {"phi+": "phi-", "phi-": "phi+", "psi+": "psi-", "psi-": "psi+"}


DECOMPOSITION_TERMS = ("psi+", "psi-", "phi+", "phi-")
LITERAL_SIGNS = (1, 1, 1, 1)
IDENTITY_SIGNS = (1, -1, -1, 1)


def bell_decomposition_residual(species: str, mutate_term: int | None = None,
                                signs=LITERAL_SIGNS) -> float:
    """Norm of Psi-_12 Psi-_34 - ½ Σ_k s_k B_k(14) B_k(23), k over Psi+, Psi-, Phi+, Phi-.

    The default all-plus signs are the literal expansion; ``IDENTITY_SIGNS``
    are the ones that make it an identity. With ``mutate_term`` set, that
    term's (1,4) factor is replaced by its sign-flipped partner.
    """
    sp = atomdyn.get_species(species)
    d = sp.dim
    bell = {k: _bell_amplitudes(k, sp).reshape(d, d) for k in BELL_KINDS}
    lhs = np.einsum("ab,cd->abcd", bell["psi-"], bell["psi-"])
    rhs = np.zeros_like(lhs)
    for t, (kind, sign) in enumerate(zip(DECOMPOSITION_TERMS, signs)):
        outer = _FLIP[kind] if t == mutate_term else kind
        rhs += 0.5 * sign * np.einsum("ad,bc->abcd", bell[outer], bell[kind])
    return float(np.linalg.norm(lhs - rhs))


def sigma_x_pair_measurement(state: StateVector, atom2: str, atom3: str):
    """Measure sigma_x on two cascade atoms by K rotations and level detections.

    Returns ``[(ev2, ev3, product, probability, post_state), ...]`` where a
    detected ``g`` is eigenvalue +1 and ``f`` is -1.
    """
    ev = {"g": 1, "f": -1}
    k = atomdyn.rotation("K", atomdyn.CASCADE)
    out = []
    first = measure_subsystem(apply_local(k, state, [atom2]), atom2)
    for lv2, p2, s2 in first:
        for lv3, p3, s3 in measure_subsystem(apply_local(k, s2, [atom3]), atom3):
            if lv2 not in ev or lv3 not in ev:
                raise ValueError("sigma_x readout left the {f, g} span")
            out.append((ev[lv2], ev[lv3], ev[lv2] * ev[lv3], p2 * p3, s3))
    return out


def pass_through(scheme: str, kind: str, alpha: float = DEFAULT_ALPHA):
    """Send atoms A2, A3 in Bell state ``kind`` through the swap cavity.

    Returns ``(final_state, predicted_field)`` where the prediction is the
    field state the Bell-measurement argument relies on.
    """
    sp = scheme_species(scheme)
    species = atomdyn.get_species(sp)
    pair = bell_target_state(kind, species, ("A2", "A3"))
    if is_coherent(scheme):
        n_max = bosonic.cutoff_rule(alpha)
        field = bosonic.coherent_state(alpha, n_max)
    else:
        n_max = bosonic.cutoff_rule(0)
        field = bosonic.fock_superposition(+1, n_max)
    state = tensor_states([pair, field])
    u = (atomdyn.dispersive_cascade_u if sp == "cascade" else atomdyn.dispersive_lambda_u)(
        math.pi, n_max)
    for atom in ("A2", "A3"):
        state = apply_local(u, state, [atom, "C"])
    if sp == "cascade":
        flip = kind.startswith("psi")
    else:
        flip = kind.endswith("-")
    if is_coherent(scheme):
        predicted = bosonic.coherent_state(-alpha if flip else alpha, n_max)
    else:
        predicted = bosonic.fock_superposition(-1 if flip else 1, n_max)
    return state, predicted
