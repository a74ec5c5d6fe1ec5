"""Invariant and oracle-equivalence checks behind ``qswap verify``.

Each check returns ``(passed, detail)``. Modules are referenced through their
attributes at call time so a patched implementation is what gets checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import atoms as atomdyn
from . import bosonic, engine, hilbert, library, oracle

AMPLITUDES = (0.0, 0.5, 1.0, 1.7, 2.5, 3.2, 4.0)


@dataclass(frozen=True)
class Check:
    name: str
    group: str
    run: Callable[[], tuple[bool, str]]


def _within(err: float, tol: float) -> tuple[bool, str]:
    return err <= tol, f"max error {err:.3e} (tol {tol:.0e})"


def _keep_below_top(levels: int, n_max: int, skip: int = 2) -> np.ndarray:
    dim = n_max + 1
    return np.array([k * dim + n for k in range(levels) for n in range(dim - skip)])


# physical parameters ---------------------------------------------------------

def check_phi_params():
    g, delta = 2 * math.pi * 25e3, 2 * math.pi * 100e3
    err = max(abs(atomdyn.phi_from_params(g, 8e-5, delta, "cascade") - math.pi),
              abs(atomdyn.phi_from_params(g, 4e-5, delta, "lambda") - math.pi))
    return _within(err, 1e-12)


def check_bell_decomposition():
    err = max(library.bell_decomposition_residual(s, signs=library.IDENTITY_SIGNS)
              for s in ("cascade", "lambda"))
    return _within(err, 1e-12)


# operators ---------------------------------------------------------------------

def check_unitarity():
    n_max = 40
    ops = [(3, atomdyn.dispersive_cascade_u(math.pi, n_max)),
           (3, atomdyn.dispersive_cascade_u(0.37, n_max)),
           (3, atomdyn.dispersive_lambda_u(math.pi, n_max)),
           (3, atomdyn.dispersive_lambda_u(1.1, n_max)),
           (3, atomdyn.dispersive_lambda_u_pi(n_max)),
           (2, atomdyn.resonant_jc_u(math.pi / 2, n_max)),
           (2, atomdyn.resonant_jc_u(0.8, n_max))]
    err = max(hilbert.unitarity_error(op, _keep_below_top(lv, n_max)) for lv, op in ops)
    return _within(err, 1e-10)


def check_jc_excitation():
    n_max = 30
    dim = n_max + 1
    e = atomdyn.TWO_LEVEL.index("e")
    exc = np.array([n + (1 if k == e else 0) for k in range(2) for n in range(dim)])
    bad = 0
    for gtau in (0.3, math.pi / 2, 2.9):
        u = atomdyn.resonant_jc_u(gtau, n_max).entries
        rows, cols = np.nonzero(u)
        bad += int(np.count_nonzero(exc[rows] != exc[cols]))
    return bad == 0, f"{bad} excitation-changing elements"


def check_parity_algebra():
    n_max = 30
    p_plus, p_minus = bosonic.parity_projectors(n_max)
    a, b = p_plus.entries, p_minus.entries
    ident = np.eye(n_max + 1)
    parity = np.diag([(-1.0) ** n for n in range(n_max + 1)])
    err = max(np.max(np.abs(a @ a - a)), np.max(np.abs(a @ b)),
              np.max(np.abs(a - b - ident)), np.max(np.abs(a + b - parity)))
    return _within(float(err), 1e-12)


def check_lambda_pi_forms():
    n_max = 40
    diff = (atomdyn.dispersive_lambda_u(math.pi, n_max).entries
            - atomdyn.dispersive_lambda_u_pi(n_max).entries)
    return _within(float(np.max(np.abs(diff))), 1e-12)


def check_displacement():
    err = 0.0
    for beta in (0.4, -1.3, 2.0, 2.7 - 1.1j):
        a = 1.2
        n_max = bosonic.cutoff_rule(abs(a) + abs(beta))
        moved = hilbert.apply(bosonic.displacement(beta, n_max), bosonic.coherent_state(a, n_max))
        want = bosonic.coherent_state(a + beta, n_max)
        err = max(err, 1.0 - hilbert.fidelity(moved, want))
    return _within(err, 1e-10)


# oracle equivalence ------------------------------------------------------------

def check_coherent_overlaps():
    err = 0.0
    for a in AMPLITUDES:
        for b in (-4.0, -1.5, 0.0, 0.8j, 2.2, 4.0):
            n_max = bosonic.cutoff_rule(max(abs(a), abs(b)))
            got = bosonic.coherent_state(b, n_max).inner(bosonic.coherent_state(a, n_max))
            err = max(err, abs(got - oracle.coherent_overlap(a, b)))
    return _within(err, 1e-9)


def check_cat_norms():
    err = 0.0
    for a in AMPLITUDES:
        n_max = bosonic.cutoff_rule(a)
        for parity in ("even", "odd"):
            if a == 0 and parity == "odd":
                continue
            got = bosonic.cat_state(a, parity, n_max).norm() ** 2
            err = max(err, abs(got - oracle.cat_norm_squared(a, parity)))
    return _within(err, 1e-9)


def engine_chi_norms(field_amplitude: float, gtau: float):
    """Resonant pass of a ground-state two-level atom, measured by the engine."""
    n_max = bosonic.cutoff_rule(field_amplitude)
    atom = hilbert.basis_state(hilbert.CompositeSpace((2,), ("X",), (atomdyn.TWO_LEVEL.levels,)),
                               ["f"])
    state = hilbert.tensor_states([atom, bosonic.coherent_state(field_amplitude, n_max)])
    state = hilbert.apply_local(atomdyn.resonant_jc_u(gtau, n_max), state, ["X", "C"])
    probs = {lv: p for lv, p, _ in hilbert.measure_subsystem(state, "X")}
    return probs.get("f", 0.0), probs.get("e", 0.0), n_max


def check_chi_norms():
    err = 0.0
    for amp in (0.5, 1.0, 2.0, 4.0):
        for gtau in (0.0, 0.2, math.pi / 8, 1.0):
            f2, e2, n_max = engine_chi_norms(amp, gtau)
            of, oe = oracle.chi_norms(amp, gtau, n_max)
            err = max(err, abs(f2 - of), abs(e2 - oe))
    return _within(err, 1e-10)


def check_coherent_success():
    err = 0.0
    for scheme in oracle.COHERENT_SCHEMES:
        for alpha in (1.0, 2.0):
            rep = engine.run(library.builtin_preparation(scheme, "phi+", alpha=alpha))
            want = oracle.detection_success_probability(scheme, alpha, cutoff=rep.n_max)
            err = max(err, abs(rep.success_probability - want))
    return _within(err, 1e-10)


# protocols ---------------------------------------------------------------------

def check_fock_preparations():
    worst = 0.0
    for scheme in ("cascade-fock", "lambda-fock"):
        for kind in ("phi+", "phi-", "psi+", "psi-"):
            rep = engine.run(library.builtin_preparation(scheme, kind))
            if not rep.passed:
                return False, f"{scheme} {kind}: assertion failed"
            worst = max(worst, abs(rep.postselection_probability - 0.5))
    return _within(worst, 1e-10)


def check_swaps():
    for scheme in library.SCHEMES:
        rep = engine.run(library.builtin_swap(scheme))
        if not rep.passed:
            return False, f"swap-{scheme}: assertion failed"
    return True, f"{len(library.SCHEMES)} swap protocols pass"


CHECKS = (
    Check("phi-from-parameters", "params", check_phi_params),
    Check("bell-decomposition", "bell", check_bell_decomposition),
    Check("interaction-unitarity", "unitarity", check_unitarity),
    Check("jc-excitation-conservation", "jc", check_jc_excitation),
    Check("parity-projector-algebra", "parity", check_parity_algebra),
    Check("lambda-pi-forms-agree", "lambda", check_lambda_pi_forms),
    Check("displacement-shifts-coherent", "displacement", check_displacement),
    Check("oracle-coherent-overlap", "oracle", check_coherent_overlaps),
    Check("oracle-cat-norm", "oracle", check_cat_norms),
    Check("oracle-chi-norms", "oracle", check_chi_norms),
    Check("oracle-coherent-success", "oracle", check_coherent_success),
    Check("fock-preparations", "protocols", check_fock_preparations),
    Check("swap-protocols", "protocols", check_swaps),
)


def select(filter_text: str | None = None) -> list[Check]:
    """Checks whose name or group contains ``filter_text``."""
    if not filter_text:
        return list(CHECKS)
    return [c for c in CHECKS if filter_text in c.name or filter_text in c.group]


def run_checks(checks) -> list[tuple[Check, bool, str]]:
    out = []
    for c in checks:
        try:
            ok, detail = c.run()
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((c, bool(ok), detail))
    return out
