from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sixlab import chaincx as cx
from sixlab import exactla as la

import oracles


def k_at(n: int, k: int = 1) -> cx.Complex:
    return cx.point_complex(n, k)


def two_term(a: int, deg: int = 0) -> cx.Complex:
    """[k --a--> k] in degrees deg, deg+1."""
    return cx.Complex({deg: 1, deg + 1: 1}, {deg: la.mat([[a]])})


complexes = st.integers(0, 2**32 - 1).map(
    lambda s: cx.random_complex(np.random.default_rng(s), max_dim=4, window=(-2, 2)))


# -- shift, cone, icone -----------------------------------------------------------

def test_shift_examples(rng):
    A = cx.random_complex(rng)
    assert cx.shift(0, A) == A
    assert cx.shift(1, cx.shift(-1, A)) == A
    assert cx.shift(2, k_at(0)) == k_at(-2)
    S = cx.shift(1, two_term(1))
    assert S.dims == {-1: 1, 0: 1} and S.diff(-1)[0, 0] == la.get_prime() - 1


def test_cone_of_zero_source_and_identity(rng):
    A = cx.random_complex(rng)
    assert cx.cone(cx.zero_map(cx.zero_complex(), A)) == A
    C = cx.cone(cx.identity(k_at(0)))
    assert C == cx.Complex({-1: 1, 0: 1}, {-1: la.mat([[1]])})
    assert cx.betti(cx.cone(cx.identity(A))) == {}


def test_icone_examples(rng):
    assert cx.icone(cx.zero_complex()).is_zero()
    assert cx.icone(k_at(0)) == two_term(1, -1)
    A = cx.random_complex(rng)
    assert cx.icone_map(cx.identity(A)) == cx.identity(cx.icone(A))


def test_icone_is_functorial(rng):
    A, B, C = (cx.random_complex(rng, max_dim=3) for _ in range(3))
    f, g = cx.random_chain_map(rng, A, B), cx.random_chain_map(rng, B, C)
    assert cx.icone_map(cx.compose(g, f)) == cx.compose(cx.icone_map(g), cx.icone_map(f))


@settings(max_examples=40, deadline=None)
@given(complexes)
def test_constructions_square_to_zero(A):
    assert A.check()
    assert cx.shift(3, A).check()
    assert cx.icone(A).check()
    assert cx.hom_complex(A, A).check()
    assert cx.cone(cx.identity(A)).check()


# -- cohomology -----------------------------------------------------------------------

def test_cohomology_examples():
    assert cx.cohomology(cx.icone(k_at(0))).dims == {}
    S, _, _ = cx.direct_sum(k_at(0), k_at(2))
    assert cx.cohomology(S).dims == {0: 1, 2: 1}
    assert cx.cohomology(two_term(0)).dims == {0: 1, 1: 1}
    assert cx.cohomology(two_term(5)).dims == {}


@settings(max_examples=40, deadline=None)
@given(complexes)
def test_cohomology_matches_rank_oracle(A):
    want = {}
    for n in A.degrees():
        h = A.dim(n) - oracles.rank_mod_p(A.diff(n).tolist()) - oracles.rank_mod_p(A.diff(n - 1).tolist())
        if h:
            want[n] = h
    assert cx.betti(A) == want
    H = cx.cohomology(A)
    assert H.dims == want
    for n, R in H.reps.items():
        if R.size:
            assert not la.mul(A.diff(n), R).any()
            assert np.array_equal(la.mul(H.proj[n], R), la.eye(R.shape[1]))


# -- hom complex and homotopies ------------------------------------------------------------

def test_hom_complex_examples(rng):
    assert cx.hom_complex(k_at(0), k_at(0)) == k_at(0)
    A = cx.random_complex(rng)
    while A.is_zero():
        A = cx.random_complex(rng)
    assert cx.betti(cx.hom_complex(A, A)).get(0, 0) >= 1
    assert cx.betti(cx.hom_complex(cx.icone(k_at(0)), k_at(0))) == {}


def test_hom_differential_rule(rng):
    A, B = cx.random_complex(rng, max_dim=3), cx.random_complex(rng, max_dim=3)
    v = rng.integers(0, la.get_prime(), size=cx.pack(cx.zero_map(A, B, 1)).size)
    f = cx.unpack(v, A, B, 1)
    D = cx.hom_differential(A, B, 1)
    assert np.array_equal(la.mul(D, cx.pack(f).reshape(-1, 1))[:, 0], cx.pack(f.differential()))


def test_is_homotopic_examples(rng):
    A = cx.random_complex(rng)
    f = cx.random_chain_map(rng, A, A)
    h = cx.is_homotopic(f, f)
    assert h is not None and h.h.is_zero()
    I = cx.icone(k_at(0))
    h = cx.is_homotopic(cx.identity(I), cx.zero_map(I, I))
    assert h is not None and h.verify()
    K = k_at(0)
    assert cx.is_homotopic(cx.identity(K), cx.zero_map(K, K)) is None
    with pytest.raises(ValueError):
        cx.is_homotopic(cx.identity(K), cx.identity(I))


def test_h0_of_hom_counts_homotopy_classes(rng):
    for _ in range(10):
        A, B = cx.random_complex(rng, max_dim=3), cx.random_complex(rng, max_dim=3)
        f, g = cx.random_chain_map(rng, A, B), cx.random_chain_map(rng, A, B)
        H = cx.cohomology(cx.hom_complex(A, B))
        diff = cx.pack(f - g)
        cls = la.mul(H.proj.get(0, la.zeros(0, diff.size)), diff.reshape(-1, 1)) if diff.size else la.zeros(0, 1)
        assert (cx.is_homotopic(f, g) is not None) == (not cls.any())


def test_homotopy_inverse_examples():
    K = k_at(0)
    g, h1, h2 = cx.homotopy_inverse(cx.identity(K))
    assert g == cx.identity(K) and h1.verify() and h2.verify()
    T, incs, _ = cx.direct_sum(K, cx.icone(K))
    got = cx.homotopy_inverse(incs[0])
    assert got is not None
    g, h1, h2 = got
    assert g.is_chain_map() and h1.verify() and h2.verify()
    assert cx.homotopy_inverse(cx.zero_map(K, K)) is None


def test_qiso_iff_homotopy_equivalence(rng):
    for _ in range(20):
        A, B = cx.random_complex(rng, max_dim=3), cx.random_complex(rng, max_dim=3)
        f = cx.random_chain_map(rng, A, B)
        got = cx.homotopy_inverse(f)
        assert (got is not None) == (cx.betti(cx.cone(f)) == {})


# -- structure theorems ---------------------------------------------------------------------

def test_decompose_examples():
    d = cx.decompose_semisimple(two_term(1))
    assert d.S.is_zero() and d.T.dims == {1: 1}
    d = cx.decompose_semisimple(k_at(0))
    assert d.S.dims == {0: 1} and d.T.is_zero()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_decompose_is_exact_iso(seed):
    A = cx.random_complex(np.random.default_rng(seed), max_dim=6, window=(-3, 3))
    d = cx.decompose_semisimple(A)
    assert d.iso.is_chain_map() and d.inverse.is_chain_map()
    assert cx.compose(d.inverse, d.iso) == cx.identity(A)
    assert cx.compose(d.iso, d.inverse) == cx.identity(d.target)
    assert all(not d.S.diff(n).any() for n in d.S.degrees())
    assert d.S.dims == cx.betti(A)
    assert d.T.dims == {n: la.rank(A.diff(n - 1)) for n in A.degrees() if la.rank(A.diff(n - 1))}


def _reassembles(m, md):
    got = md.reassemble()
    return all(np.array_equal(m.comp(n), got[n]) for n in m.degrees())


def test_classify_mono_examples():
    K = k_at(0)
    md = cx.classify_mono(cx.identity(K))
    assert md.summands == [("id_S", 0, 1)]
    m = cx.ChainMap(K, cx.icone(K), {0: la.mat([[1]])})
    md = cx.classify_mono(m)
    assert md.summands == [("k->icone", 0, 1)] and _reassembles(m, md)
    md = cx.classify_mono(cx.zero_map(cx.zero_complex(), k_at(3)))
    assert md.summands == [("0->k", -3, 1)]


def test_classify_mono_rejects_non_injective():
    K = k_at(0)
    with pytest.raises(ValueError):
        cx.classify_mono(cx.zero_map(K, K))


def test_classify_mono_random(rng):
    for _ in range(50):
        m = cx.random_mono(rng)
        md = cx.classify_mono(m)
        assert _reassembles(m, md)
        assert {tag for tag, _, _ in md.summands} <= set(cx.MONO_TYPES)


def test_icone_sends_monos_to_trivial_cofibrations(rng):
    for _ in range(20):
        m = cx.random_mono(rng)
        im = cx.icone_map(m)
        assert all(la.rank(im.comp(n)) == im.source.dim(n) for n in im.degrees())
        # cokernel of a degreewise mono is acyclic iff the map is a quasi-isomorphism
        assert cx.is_quasi_iso(im)


# -- factorisations ---------------------------------------------------------------------------

@pytest.mark.parametrize("mode", ["cof-then-trivfib", "trivcof-then-fib"])
def test_factorize_composes(rng, mode):
    for _ in range(10):
        A, B = cx.random_complex(rng, max_dim=3), cx.random_complex(rng, max_dim=3)
        f = cx.random_chain_map(rng, A, B)
        left, mid, right = cx.factorize(f, mode)
        assert mid.check() and left.is_chain_map() and right.is_chain_map()
        assert cx.compose(right, left) == f
        assert all(la.rank(left.comp(n)) == A.dim(n) for n in left.degrees())
        assert all(la.rank(right.comp(n)) == B.dim(n) for n in mid.degrees())
        weq = right if mode == "cof-then-trivfib" else left
        assert cx.is_quasi_iso(weq)


def test_factorize_identity_and_zero():
    K = k_at(0)
    left, mid, right = cx.factorize(cx.identity(K))
    assert cx.compose(right, left) == cx.identity(K)
    left, mid, right = cx.factorize(cx.zero_map(K, cx.zero_complex()))
    assert mid == cx.icone(K) and cx.betti(mid) == {}


def test_factorize_is_linear(rng):
    A, B = cx.random_complex(rng, max_dim=3), cx.random_complex(rng, max_dim=3)
    f, g = cx.random_chain_map(rng, A, B), cx.random_chain_map(rng, A, B)
    a, b = 3, 7
    lhs = cx.factorize(f.scale(a) + g.scale(b))[2]
    rf, rg = cx.factorize(f)[2], cx.factorize(g)[2]
    assert lhs == rf.scale(a) + rg.scale(b) - cx.factorize(cx.zero_map(A, B))[2].scale(a + b - 1)


def test_json_round_trip(rng):
    A = cx.random_complex(rng)
    doc = A.to_json()
    assert set(doc) >= {"window", "dims", "d"}
    assert cx.Complex.from_json(doc) == A
