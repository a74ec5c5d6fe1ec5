import math

import numpy as np
import pytest

from qswap import atoms, bosonic
from qswap.hilbert import (CompositeSpace, apply_local, basis_state, fidelity, tensor_states,
                           unitarity_error)


def keep_below_top(levels, n_max, skip=2):
    dim = n_max + 1
    return np.array([k * dim + n for k in range(levels) for n in range(dim - skip)])


def atom_ket(species, level, label="A"):
    sp = atoms.get_species(species)
    return basis_state(CompositeSpace((sp.dim,), (label,), (sp.levels,)), [level])


def test_phi_from_params():
    g, delta = 2 * math.pi * 25e3, 2 * math.pi * 100e3
    assert abs(atoms.phi_from_params(g, 8e-5, delta, "cascade") - math.pi) < 1e-12
    assert abs(atoms.phi_from_params(g, 4e-5, delta, "lambda") - math.pi) < 1e-12
    assert atoms.CouplingParams(g, 8e-5, delta).phi == pytest.approx(math.pi)
    with pytest.raises(ValueError):
        atoms.phi_from_params(g, 1e-5, 0.0, "cascade")
    with pytest.raises(ValueError):
        atoms.phi_from_params(g, -1e-5, delta, "cascade")
    with pytest.raises(ValueError):
        atoms.phi_from_params(g, 1e-5, delta, "vee")


@pytest.mark.parametrize("build,levels", [
    (lambda n: atoms.dispersive_cascade_u(0.9, n), 3),
    (lambda n: atoms.dispersive_lambda_u(0.9, n), 3),
    (lambda n: atoms.dispersive_lambda_u_pi(n), 3),
    (lambda n: atoms.resonant_jc_u(1.3, n), 2),
])
def test_unitary_below_truncation_edge(build, levels):
    n_max = 25
    assert unitarity_error(build(n_max), keep_below_top(levels, n_max)) < 1e-10


def test_lambda_pi_forms_agree():
    d = atoms.dispersive_lambda_u(math.pi, 30).entries - atoms.dispersive_lambda_u_pi(30).entries
    assert np.max(np.abs(d)) < 1e-12


def test_cascade_dispersive_on_coherent():
    """f picks up e^{iφn}: φ = π sends |f>|α> to |f>|-α>; g is untouched."""
    n_max = bosonic.cutoff_rule(2.0)
    u = atoms.dispersive_cascade_u(math.pi, n_max)
    for level, sign in (("f", -1), ("g", 1)):
        s = tensor_states([atom_ket("cascade", level), bosonic.coherent_state(2.0, n_max)])
        out = apply_local(u, s, ["A", "C"])
        want = tensor_states([atom_ket("cascade", level),
                              bosonic.coherent_state(sign * 2.0, n_max)])
        assert fidelity(out, want) > 1 - 1e-10


def test_lambda_pi_sign():
    """|b>|α> -> ½(|b>|+> - |c>|->) with |±> = |α> ± |-α>."""
    n_max = bosonic.cutoff_rule(1.5)
    s = tensor_states([atom_ket("lambda", "b"), bosonic.coherent_state(1.5, n_max)])
    out = apply_local(atoms.dispersive_lambda_u(math.pi, n_max), s, ["A", "C"])
    plus = bosonic.cat_state(1.5, "even", n_max).amps
    minus = bosonic.cat_state(1.5, "odd", n_max).amps
    b = atom_ket("lambda", "b").amps
    c = atom_ket("lambda", "c").amps
    want = 0.5 * (np.kron(b, plus) - np.kron(c, minus))
    assert np.max(np.abs(out.amps - want)) < 1e-10


def test_jc_excitation_conservation_exact():
    n_max = 15
    u = atoms.resonant_jc_u(0.77, n_max).entries
    e = atoms.TWO_LEVEL.index("e")
    exc = [n + (k == e) for k in range(2) for n in range(n_max + 1)]
    rows, cols = np.nonzero(u)
    assert all(exc[r] == exc[c] for r, c in zip(rows, cols))


def test_jc_rabi_angle():
    n_max = 10
    s = tensor_states([atom_ket("twolevel", "e"), bosonic.fock_state(3, n_max)])
    out = apply_local(atoms.resonant_jc_u(0.4, n_max), s, ["A", "C"])
    f_4 = tensor_states([atom_ket("twolevel", "f"), bosonic.fock_state(4, n_max)])
    assert fidelity(out, f_4) == pytest.approx(math.sin(0.4 * 2) ** 2, abs=1e-14)


def test_rotations():
    for name in atoms.ROTATIONS:
        for sp in atoms.SPECIES.values():
            try:
                u = atoms.rotation(name, sp)
            except ValueError:
                continue
            assert unitarity_error(u) < 1e-14
    assert np.allclose(atoms.rotation("R1λ", atoms.LAMBDA).entries,
                       atoms.rotation("R1L", atoms.LAMBDA).entries)
    with pytest.raises(ValueError):
        atoms.rotation("R1L", atoms.CASCADE)
    with pytest.raises(ValueError):
        atoms.rotation("RI", atoms.LAMBDA)
    with pytest.raises(ValueError):
        atoms.rotation("MA", atoms.TWO_LEVEL)
    with pytest.raises(ValueError):
        atoms.rotation("XYZ", atoms.CASCADE)


def test_ma_and_k_columns():
    """Columns are images: MA|g> = (|f>+|g>)/√2 ... on the (f, g) pair."""
    ma = atoms.rotation("MA", atoms.CASCADE).entries
    f, g = atoms.CASCADE.index("f"), atoms.CASCADE.index("g")
    assert ma[f, f] == pytest.approx(1 / math.sqrt(2))
    assert ma[g, f] == pytest.approx(-1 / math.sqrt(2))
    k = atoms.rotation("K", atoms.CASCADE).entries
    assert k[f, g] == pytest.approx(-1 / math.sqrt(2))
