import math

import pytest

from qswap import engine, library
from qswap.steps import (AssertFidelity, AssertProbability, DeclareAtom, Inject,
                         InteractDispersive, InteractResonant, Measure, PrepareAtom,
                         PrepareField, Protocol, Rotate)


def P(*steps, **params):
    return Protocol(tuple(steps), tuple(params.items()))


def problems(protocol):
    return [msg for _, _, msg in engine.check_protocol(protocol)]


def test_check_protocol_catches_ordering_errors():
    bad = P(DeclareAtom("A1", "cascade"), Rotate("A2", "MA"))
    assert any("undeclared atom 'A2'" in m for m in problems(bad))
    bad = P(DeclareAtom("A1", "cascade"), PrepareField("vacuum"), PrepareField("vacuum"))
    assert any("double field preparation" in m for m in problems(bad))
    bad = P(DeclareAtom("A1", "cascade"), PrepareAtom("A1", "g"), InteractDispersive("A1", 1.0))
    assert any("before the field" in m for m in problems(bad))
    bad = P(DeclareAtom("A1", "twolevel"), PrepareField("vacuum"), PrepareAtom("A1", "f"),
            InteractDispersive("A1", 1.0))
    assert problems(bad)
    bad = P(DeclareAtom("C", "twolevel"))
    assert problems(bad)
    with pytest.raises(engine.ProtocolError):
        engine.run(P(Rotate("A9", "MA")))


def test_resolve_cutoff_priority(monkeypatch):
    p = library.builtin_preparation("cascade-coherent", "phi+", alpha=1.0)
    assert engine.resolve_cutoff(p) == 32
    assert engine.resolve_cutoff(p.with_param("cutoff", 40)) == 40
    monkeypatch.setenv(engine.CUTOFF_ENV, "50")
    assert engine.resolve_cutoff(p.with_param("cutoff", 40)) == 50
    assert engine.resolve_cutoff(p, 60) == 60


def test_measure_all_branches_sum_to_one():
    p = P(DeclareAtom("A", "twolevel"), PrepareField("coherent", 1.0),
          PrepareAtom("A", "f"), InteractResonant("A", 0.7), Measure("A"))
    rep = engine.run(p)
    assert len(rep.branches) == 2
    assert rep.total_probability == pytest.approx(1.0, abs=1e-14)


def test_herald_freezes_failed_branches():
    p = P(DeclareAtom("A", "twolevel"), DeclareAtom("B", "twolevel"),
          PrepareField("coherent", 1.0), PrepareAtom("A", "f"),
          InteractResonant("A", 0.7), Measure("A", "herald", "e"),
          PrepareAtom("B", "f"), InteractResonant("B", 0.7), Measure("B"))
    rep = engine.run(p)
    failed = [b for b in rep.branches if b.failed]
    assert len(failed) == 1 and failed[0].path == (("A", "f"),)
    assert all(b.outcome("A") == "e" for b in rep.branches if not b.failed)
    assert rep.total_probability == pytest.approx(1.0, abs=1e-14)


def test_postselect_records_probability():
    p = library.builtin_preparation("lambda-fock", "phi-")
    rep = engine.run(p)
    assert len(rep.postselections) == 1
    assert rep.postselection_probability == pytest.approx(0.5, abs=1e-12)
    assert rep.passed


def test_postselect_zero_probability_raises():
    p = P(DeclareAtom("A", "twolevel"), PrepareField("vacuum"), PrepareAtom("A", "f"),
          Measure("A", "postselect", "e"))
    with pytest.raises(engine.ZeroProbabilityBranch):
        engine.run(p)


def test_failing_assertion_is_reported():
    p = library.builtin_preparation("cascade-fock", "phi+")
    last = p.steps[-1]
    p = p.replace_step(len(p.steps) - 1, AssertFidelity(last.atoms, "psi+", 1e-8))
    rep = engine.run(p)
    assert not rep.passed and rep.assertions[0].value < 1e-10


def test_probability_assertion():
    p = P(DeclareAtom("A", "twolevel"), PrepareField("fockplus"), PrepareAtom("A", "f"),
          InteractResonant("A", math.pi / 2), Measure("A"),
          AssertProbability((("A", "f"),), 0.5, 1e-12))
    assert engine.run(p).passed


def test_field_reload_requires_disentangled_field():
    p = P(DeclareAtom("A", "cascade"), PrepareField("coherent", 1.0), PrepareAtom("A", "g"),
          Rotate("A", "MA"), InteractDispersive("A", math.pi),
          PrepareField("vacuum", reload=True))
    with pytest.raises(Exception):
        engine.run(p)


def test_inject_displaces_field():
    p = P(DeclareAtom("A", "twolevel"), PrepareField("coherent", 1.0), Inject(-1.0),
          PrepareAtom("A", "f"), InteractResonant("A", 0.9), Measure("A"))
    rep = engine.run(p)
    # the field is vacuum after the injection, so the f atom cannot absorb
    assert [b.outcome("A") for b in rep.branches] == ["f"]


@pytest.mark.parametrize("name", library.builtin_names())
def test_every_builtin_passes(name):
    rep = engine.run(library.get_builtin(name))
    assert rep.passed, [a for a in rep.assertions if not a.passed]
    assert rep.total_probability == pytest.approx(rep.postselection_probability, abs=1e-9)


def test_builtin_registry():
    names = library.builtin_names()
    for scheme in library.SCHEMES:
        assert f"prepare-{scheme}" in names and f"swap-{scheme}" in names
    assert library.get_builtin("builtin:prepare-cascade-fock") == \
        library.builtin_preparation("cascade-fock", "phi+")
    with pytest.raises(KeyError):
        library.get_builtin("nope")


def test_swap_outcome_table_cascade():
    """Eigenvalue product rule: g -> +1, f -> -1."""
    lab = library.swap_outcome_label
    assert lab("cascade-fock", "f", "g", "g") == "phi+"
    assert lab("cascade-fock", "f", "g", "f") == "phi-"
    assert lab("cascade-fock", "e", "f", "f") == "psi+"
    assert lab("cascade-coherent", "f", "g", "g") is None
    assert lab("cascade-coherent", "e", "g", "f", injection=-1) == "psi-"
    assert lab("lambda-fock", "e", "b", "c") == "psi-"
    assert lab("lambda-coherent", "e", "c", "c") == "phi+"


def test_sigma_x_pair_measurement_on_bell_pairs():
    from qswap.engine import bell_target_state
    from qswap.atoms import CASCADE
    for kind, product in (("phi+", 1), ("phi-", -1)):
        state = bell_target_state(kind, CASCADE, ("A2", "A3"))
        outs = library.sigma_x_pair_measurement(state, "A2", "A3")
        assert sum(p for *_, p, _ in outs) == pytest.approx(1.0)
        assert all(o[2] == product for o in outs)


def test_bell_decomposition():
    for sp in ("cascade", "lambda"):
        assert library.bell_decomposition_residual(sp, signs=library.IDENTITY_SIGNS) < 1e-12
        for k in range(4):
            r = library.bell_decomposition_residual(sp, k, signs=library.IDENTITY_SIGNS)
            assert abs(r - math.sqrt(2) / 2) < 1e-12
