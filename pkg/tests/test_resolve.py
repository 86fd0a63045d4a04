from __future__ import annotations

import numpy as np
import pytest

from sixlab import chaincx as cx
from sixlab import exactla as la
from sixlab import finsite as fs
from sixlab import resolve as rs
from sixlab import sheafcx as sh

import oracles

K0 = cx.point_complex(0)


@pytest.fixture
def S():
    return fs.sierpinski()


def dims0(F, n=0):
    return tuple(F.dim(x, n) for x in range(F.space.n))


def rand_space(rng):
    return fs.random_space(rng, int(rng.integers(1, 6)), max_chain=3)


def rand_sheaf(rng, X, window=(-1, 1)):
    return sh.random_sheaf(rng, X, max_dim=2, window=window)


# -- single sheaves --------------------------------------------------------------------------

def test_godement_examples(S):
    c, o = S.index("c"), S.index("o")
    G, mono = rs.godement(sh.constant(S, K0))
    assert dims0(G) == (2, 1)
    assert rs.is_fibrant(G)
    assert la.rank(mono.comp(c, 0)) == 1 and la.rank(mono.comp(o, 0)) == 1
    assert mono.is_natural()
    E = sh.skyscraper(S, o, K0)
    ok, ret = rs.is_injective_sheaf(E)
    assert ok
    G0, _ = rs.godement(sh.zero_sheaf(S))
    assert G0.is_zero()


def test_is_injective_examples(S):
    o = S.index("o")
    for x in range(S.n):
        assert rs.is_injective_sheaf(sh.skyscraper(S, x, K0))[0]
    j = fs.factor_locally_closed(S, [o])
    jk = sh.lower_shriek(j, sh.constant(j.space, K0))
    assert dims0(jk) == (0, 1)
    ok, ret = rs.is_injective_sheaf(jk)
    assert not ok and ret is None
    assert rs.is_injective_sheaf(sh.zero_sheaf(S))[0]


def test_injective_witness_is_a_retraction(rng):
    for _ in range(10):
        X = rand_space(rng)
        M = rand_sheaf(rng, X, (0, 0))
        G, mono = rs.godement(M)
        ok, ret = rs.is_injective_sheaf(M)
        if ok:
            for y in range(X.n):
                if M.dim(y, 0):
                    assert np.array_equal(la.mul(ret[y], mono.comp(y, 0)), la.eye(M.dim(y, 0)))


def test_inj_resolve_examples(S):
    R = rs.inj_resolve_sheaf(sh.constant(S, K0))
    assert R.length == 1
    assert [dims0(T) for T in R.terms] == [(2, 1), (1, 0)]
    assert all(rs.is_injective_sheaf(T)[0] for T in R.terms)
    assert rs.inj_resolve_sheaf(sh.skyscraper(S, 0, K0)).length == 0
    P = fs.pseudo_circle()
    R = rs.inj_resolve_sheaf(sh.constant(P, K0))
    assert R.length <= 1


def test_inj_resolve_is_exact(rng):
    for _ in range(15):
        X = rand_space(rng)
        M = rand_sheaf(rng, X, (0, 0))
        R = rs.inj_resolve_sheaf(M)
        assert R.length <= X.chain_length()
        for y in range(X.n):
            mats = [R.augmentation.comp(y, 0)] + [m.comp(y, 0) for m in R.maps]
            dims = [M.dim(y, 0)] + [T.dim(y, 0) for T in R.terms]
            # 0 -> M -> I^0 -> ... -> I^l -> 0 exact at every stalk
            ranks = [la.rank(m) for m in mats]
            assert ranks[0] == dims[0]
            for j in range(1, len(dims)):
                nxt = ranks[j] if j < len(ranks) else 0
                assert dims[j] == ranks[j - 1] + nxt


# -- complexes -----------------------------------------------------------------------------------

def test_i_complex_examples(S):
    assert rs.i_complex(sh.zero_sheaf(S)).output.is_zero()
    res = rs.i_complex(sh.constant(S, K0))
    I = res.output
    assert dims0(I, 0) == (2, 1) and dims0(I, 1) == (1, 0)
    assert cx.betti(sh.sections(I)) == {0: 1}
    assert rs.is_fibrant(I)


def test_i_complex_on_injective_input_splits(S):
    E = sh.skyscraper(S, S.index("c"), cx.point_complex(0, 2))
    res = rs.i_complex(E)
    assert sh.is_quasi_iso(res.iota)
    for y in range(S.n):
        assert la.rank(res.iota.comp(y, 0)) == E.dim(y, 0)


def test_pseudo_circle_global_sections():
    P = fs.pseudo_circle()
    I = rs.i_complex(sh.constant(P, K0)).output
    want = oracles.betti(P.leq.tolist())
    assert want == {0: 1, 1: 1}
    assert cx.betti(sh.sections(I)) == want


def test_resolution_properties(rng):
    for _ in range(20):
        X = rand_space(rng)
        F = rand_sheaf(rng, X)
        res = rs.i_complex(F)
        I = res.output
        assert I.check() and res.iota.is_chain_map()
        assert sh.is_quasi_iso(res.iota)
        assert rs.is_fibrant(I)
        if I.dims:
            assert min(I.dims) >= min(F.dims, default=0)
            assert max(I.dims) - max(F.dims, default=0) <= X.chain_length()


def test_cohomology_matches_nerve_oracle(rng):
    for _ in range(15):
        X = rand_space(rng)
        I = rs.i_complex(sh.constant(X, K0)).output
        assert cx.betti(sh.sections(I)) == oracles.betti(X.leq.tolist())


# -- functoriality ------------------------------------------------------------------------------

def test_i_on_identity_and_composition(rng):
    for _ in range(10):
        X = rand_space(rng)
        F, G, H = (rand_sheaf(rng, X) for _ in range(3))
        assert rs.i_on_graded_map(sh.identity(F)) == sh.identity(rs.i_complex(F).output)
        f, g = sh.random_chain_map(rng, F, G), sh.random_chain_map(rng, G, H)
        assert rs.i_on_graded_map(sh.compose(g, f)) == sh.compose(rs.i_on_graded_map(g), rs.i_on_graded_map(f))


def test_iota_is_natural(rng):
    for _ in range(10):
        X = rand_space(rng)
        F, G = rand_sheaf(rng, X), rand_sheaf(rng, X)
        f = sh.random_chain_map(rng, F, G)
        iF, iG = rs.i_complex(F), rs.i_complex(G)
        ifm = rs.i_on_graded_map(f, iF.output, iG.output)
        assert ifm.is_chain_map()
        assert sh.compose(ifm, iF.iota) == sh.compose(iG.iota, f)


@pytest.mark.parametrize("degree", [-1, 1])
def test_i_is_dg_and_linear(rng, degree):
    for _ in range(8):
        X = rand_space(rng)
        F, G = rand_sheaf(rng, X), rand_sheaf(rng, X)
        h = sh.random_graded_map(rng, F, G, degree)
        h2 = sh.random_graded_map(rng, F, G, degree)
        assert rs.i_on_graded_map(h.differential()) == rs.i_on_graded_map(h).differential()
        lhs = rs.i_on_graded_map(h.scale(3) + h2.scale(5))
        assert lhs == rs.i_on_graded_map(h).scale(3) + rs.i_on_graded_map(h2).scale(5)


# -- homotopy theory of fibrant objects -----------------------------------------------------------

def test_is_fibrant_examples(S):
    o = S.index("o")
    assert rs.is_fibrant(rs.i_complex(sh.constant(S, K0)).output)
    j = fs.factor_locally_closed(S, [o])
    assert not rs.is_fibrant(sh.lower_shriek(j, sh.constant(j.space, K0)))
    assert rs.is_fibrant(sh.zero_sheaf(S))


def test_acyclics_map_null_homotopically_to_fibrants(rng):
    for _ in range(8):
        X = rand_space(rng)
        A = sh.sheaf_cone(sh.identity(rand_sheaf(rng, X, (0, 1))))
        I = rs.i_complex(rand_sheaf(rng, X, (0, 1))).output
        f = sh.random_chain_map(rng, A, I)
        h = rs.is_homotopic(f, sh.zero_map(A, I))
        assert h is not None and h.verify()


def test_i_sends_quasi_isos_to_homotopy_equivalences(rng):
    for _ in range(5):
        X = fs.random_space(rng, int(rng.integers(1, 4)), max_chain=2)
        F = rand_sheaf(rng, X, (0, 1))
        res = rs.i_complex(F)
        f = rs.i_on_graded_map(res.iota)
        got = rs.homotopy_inverse(f)
        assert got is not None
        g, h1, h2 = got
        assert g.is_chain_map() and h1.verify() and h2.verify()


def test_homotopy_inverse_rejects_non_quasi_iso(S):
    I = rs.i_complex(sh.constant(S, K0)).output
    assert rs.homotopy_inverse(sh.zero_map(I, I)) is None


def test_compare_orderings(rng):
    for _ in range(5):
        X = rand_space(rng)
        F = rand_sheaf(rng, X)
        assert rs.compare_orderings(F, list(rng.permutation(X.n)))
