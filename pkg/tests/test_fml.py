from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sixlab import chaincx as cx
from sixlab import enh as en
from sixlab import finsite as fs
from sixlab import fml
from sixlab import resolve as rs
from sixlab import sheafcx as sh

K0 = cx.point_complex(0)


@pytest.fixture
def ws():
    w = fml.default_workspace("sierpinski")
    S, P = w.spaces["sierpinski"], w.spaces["pseudo-circle"]
    w.add_map("a", fs.ContinuousMap(S, P, (0, 2)))
    w.add_map("m", fs.ContinuousMap(P, S, (0, 0, 1, 1)))
    return w


def check(text, ws):
    return fml.typecheck(fml.parse(text), ws)


# -- syntax -----------------------------------------------------------------------------------

@pytest.mark.parametrize("line", fml.golden_corpus())
def test_corpus_round_trips(line):
    t = fml.parse(line)
    assert fml.show(t) == line
    assert fml.parse(fml.show(t)) == t


def test_ascii_spellings_agree():
    assert fml.parse("Gamma(Tensor(-, -))") == fml.parse("Γ(⊗(-, -))")
    assert fml.parse("a_* . a^*") == fml.parse("a_* ∘ a^*")
    assert fml.parse("row:swap << row:swap") == fml.parse("row:swap · row:swap")


def test_composition_fills_first_slot():
    assert fml.show(fml.parse("a_* ∘ Hom(a^*(-), -)")) == "a_*(Hom(a^*(-), -))"
    assert fml.show(fml.parse("Hom(-, -) ∘ a^*")) == "Hom(a^*(-), -)"


@pytest.mark.parametrize("text, line, column", [("Γ(", 1, 3), ("⊗(-,\n  -", 2, 4), ("Hom(#0, -)", 1, 1)])
def test_syntax_errors_have_positions(text, line, column):
    with pytest.raises(fml.FmlSyntaxError) as info:
        fml.parse(text)
    assert (info.value.line, info.value.column) == (line, column)


# -- typing ------------------------------------------------------------------------------------

def test_one_term_typing(ws):
    r = check("a_* ∘ Hom(a^*(-), -)", ws)
    assert [str(s) for s in r.sources] == ["pseudo-circle^op", "sierpinski"]
    assert str(r.target) == "pseudo-circle"


def test_two_term_typing(ws):
    r = check("row:id-aa @ a", ws)
    assert str(r) == "(pseudo-circle) -> pseudo-circle" and not r.invertible
    r = check("inv(row:proj-fml @ o)", ws)
    assert r.invertible


def test_variance_error(ws):
    with pytest.raises(fml.FmlTypeError, match="contravariant") as info:
        check("Hom(-:sierpinski, -)", ws)
    assert info.value.subterm == "Hom(-:sierpinski, -)"
    assert [str(s) for s in check("Hom(-:sierpinski^op, -)", ws).sources] == ["sierpinski^op", "sierpinski"]


def test_site_mismatch_names_subterm(ws):
    with pytest.raises(fml.FmlTypeError) as info:
        check("a_*(a_*(-))", ws)
    assert "a_*" in info.value.subterm


def test_lookup_errors(ws):
    with pytest.raises(fml.FmlTypeError, match="unregistered map") as info:
        check("zz_*(-)", ws)
    assert info.value.subterm == "zz_*(-)"
    with pytest.raises(fml.FmlTypeError, match="unknown row"):
        check("row:nope", ws)
    with pytest.raises(fml.FmlTypeError, match="unregistered object"):
        check("Γ(obj:nope)", ws)


def test_shriek_needs_locally_closed_map(ws):
    with pytest.raises(fml.FmlUnsupported):
        check("m_!(-)", ws)


def test_inverse_needs_invertible(ws):
    with pytest.raises(fml.FmlTypeError, match="not formally invertible"):
        check("inv(row:id-aa @ a)", ws)


def test_conditional_row(ws):
    assert fml.is_formally_invertible(fml.parse("row:alpha_!-to-alpha_* @ c"), ws)
    assert not fml.is_formally_invertible(fml.parse("row:alpha_!-to-alpha_* @ o"), ws)


def test_ud_invertibility(ws):
    S = ws.spaces["sierpinski"]
    K = ws.objects["k_sierpinski"]
    ws.add_chain_map("q", sh.identity(K).scale(2))
    ws.add_chain_map("n", sh.zero_map(K, K))
    assert fml.is_formally_invertible(fml.parse("ud:q"), ws)
    assert not fml.is_formally_invertible(fml.parse("ud:n"), ws)
    assert str(check("ud:q", ws).target_obj) == "sierpinski"
    assert S is ws.spaces["sierpinski"]


def test_sums_are_not_formally_invertible(ws):
    assert fml.is_formally_invertible(fml.parse("2 * row:swap"), ws)
    assert not fml.is_formally_invertible(fml.parse("0 * row:swap"), ws)
    assert not fml.is_formally_invertible(fml.parse("row:swap + row:swap"), ws)


# -- interpretation -----------------------------------------------------------------------------

def test_one_term_interpretation(ws, rng):
    a = ws.maps["a"]
    J = en.small_fibrant(rng, a.source)
    got = fml.interpret(fml.parse("a_*(-)"), ws, [J])
    assert got is en.eval_underlined(en.FunctorExpr("push", (en.var(0),), a), [J], ws.enh)
    nested = fml.interpret(fml.parse("a^*(-)"), ws, [got])
    assert fml.interpret(fml.parse("a^* ∘ a_*"), ws, [J]) is nested


def test_interpret_checks_inputs(ws, rng):
    a = ws.maps["a"]
    with pytest.raises(fml.FmlTypeError):
        fml.interpret(fml.parse("a_*(-)"), ws, [])
    with pytest.raises(fml.FmlTypeError, match="wrong site"):
        fml.interpret(fml.parse("a_*(-)"), ws, [en.small_fibrant(rng, a.target)])
    with pytest.raises(fml.FmlError):
        fml.interpret(fml.parse("a_*(-)"), ws, [en.small_fibrant(rng, a.source)], backend="nope")


def test_pseudo_circle_cohomology():
    ws = fml.default_workspace("pseudo-circle")
    G = fml.interpret(fml.parse("Γ(obj:constK)"), ws, [], backend="trcat")
    assert cx.betti(sh.sections(G)) == {0: 1, 1: 1}
    L = fml.interpret(fml.parse("Γ(x^!(obj:constK))"), ws, [], backend="trcat")
    assert cx.betti(sh.sections(L)) == {1: 1}


def test_composite_of_isos_is_iso(ws, rng):
    S = ws.spaces["sierpinski"]
    J, K = en.small_fibrant(rng, S), en.small_fibrant(rng, S)
    z = fml.interpret(fml.parse("row:swap · row:swap"), ws, [J, K])
    assert en.check_two_iso(z)
    assert en.same_in_homotopy_category(en.reduce_roof(z), sh.identity(z.source))


def test_unit_matches_trcat_backend(ws, rng):
    a = ws.maps["a"]
    F = sh.random_sheaf(rng, a.target, max_dim=1, window=(0, 0))
    t = fml.parse("row:id-aa @ a")
    shadow = fml.interpret(t, ws, [F], backend="trcat")
    z = fml.interpret(t, ws, [ws.enh.i(F)])
    act = en.stalk_cohomology_action(en.reduce_roof(z))
    assert set(act) == set(shadow)
    assert all(np.array_equal(act[k], shadow[k]) for k in act)


def test_k_linearity(ws, rng):
    S = ws.spaces["sierpinski"]
    J, K = en.small_fibrant(rng, S), en.small_fibrant(rng, S)
    sw = en.reduce_roof(fml.interpret(fml.parse("row:swap"), ws, [J, K]))
    combo = en.reduce_roof(fml.interpret(fml.parse("2 * row:swap + 3 * row:swap"), ws, [J, K]))
    assert combo == sw.scale(5)


# -- random terms -------------------------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_terms_round_trip(seed):
    rng = np.random.default_rng(seed)
    w = fml.random_workspace(rng)
    t = fml.random_two_term(rng, w)
    assert fml.token_count(t) <= 4
    assert fml.parse(fml.show(t)) == t
    fml.typecheck(t, w)


def test_soundness_small():
    r = fml.soundness_suite(terms=12, bindings=1, seed=7)
    assert r["verdict"] == "pass", [x for x in r["results"] if not x["pass"]]
