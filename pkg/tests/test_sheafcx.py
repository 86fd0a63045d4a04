from __future__ import annotations

import numpy as np
import pytest

from sixlab import chaincx as cx
from sixlab import exactla as la
from sixlab import finsite as fs
from sixlab import sheafcx as sh

import oracles

K0 = cx.point_complex(0)


@pytest.fixture
def S():
    return fs.sierpinski()


def pt(X, name):
    return X.index(name)


def stalk_dims(F, n=0):
    return tuple(F.dim(x, n) for x in range(F.space.n))


def rep_data(F):
    """Degree-0 stalk dimensions and restrictions as plain lists."""
    X = F.space
    dims = [F.dim(x, 0) for x in range(X.n)]
    rho = {(x, y): F.rho(x, y, 0).tolist() for x, y in X.pairs()}
    return dims, rho


def z0(C: cx.Complex) -> int:
    return C.dim(0) - la.rank(C.diff(0))


def random_small(rng, X, window=(0, 1)):
    return sh.random_sheaf(rng, X, max_dim=2, window=window)


# -- basic sheaves and sections ------------------------------------------------------------

def test_basic_sheaves(S):
    c, o = pt(S, "c"), pt(S, "o")
    C = sh.constant(S, K0)
    assert stalk_dims(C) == (1, 1) and np.array_equal(C.rho(c, o, 0), [[1]])
    Eo = sh.skyscraper(S, o, K0)
    assert stalk_dims(Eo) == (1, 1) and np.array_equal(Eo.rho(c, o, 0), [[1]])
    Ec = sh.skyscraper(S, c, K0)
    assert Ec.dim(c, 0) == 1 and Ec.dim(o, 0) == 0
    for F in (C, Eo, Ec):
        assert F.check()
    with pytest.raises(ValueError):
        sh.random_sheaf(np.random.default_rng(0), S, max_dim=9)


def test_sections_examples(S, rng):
    assert sh.sections(sh.constant(S, K0)) == K0
    assert sh.sections(sh.constant(fs.pseudo_circle(), K0)) == K0
    assert sh.sections(sh.skyscraper(S, pt(S, "o"), K0)) == K0
    F = random_small(rng, S)
    assert sh.sections(F, []).is_zero()


def test_sections_match_limit_oracle(rng):
    for _ in range(15):
        X = fs.random_space(rng, int(rng.integers(1, 6)))
        F = random_small(rng, X, window=(0, 0))
        dims, rho = rep_data(F)
        for x in range(X.n):
            U = sorted(fs.minimal_open(X, x))
            assert sh.sections(F, U).dim(0) == oracles.limit_dim(X.leq.tolist(), U, dims, rho)
        assert sh.sections(F).dim(0) == oracles.limit_dim(X.leq.tolist(), list(range(X.n)), dims, rho)


# -- pullback and pushforward --------------------------------------------------------------

def test_pullback_examples(S, rng):
    F = random_small(rng, S)
    assert sh.pullback(fs.identity_map(S), F) == F
    for x in range(S.n):
        P = sh.pullback(fs.point_inclusion(S, x), F)
        assert P.stalk(0) == F.stalk(x)
    V = cx.random_complex(rng, max_dim=2)
    assert sh.pullback(fs.terminal_map(S), sh.constant(fs.point(), V)) == sh.constant(S, V)


def test_pushforward_examples(S, rng):
    F = random_small(rng, S)
    # equal up to the pivot basis of sections over each U_x; the unit is the comparison
    eta = sh.unit_pull_push(fs.identity_map(S), F)
    assert eta.is_chain_map() and all(
        la.rank(eta.comp(x, n)) == F.dim(x, n) == eta.target.dim(x, n) for x in range(S.n) for n in F.degrees())
    assert sh.pushforward(fs.terminal_map(S), sh.constant(S, K0)).stalk(0) == K0
    jo = sh.pushforward(fs.point_inclusion(S, pt(S, "o")), sh.constant(fs.point(), K0))
    assert jo == sh.constant(S, K0)


def test_pushforward_stalks_are_sections(rng):
    for _ in range(10):
        X, Y = fs.random_space(rng, 4), fs.random_space(rng, 3)
        a = fs.random_map(rng, Y, X)
        F = random_small(rng, Y)
        P = sh.pushforward(a, F)
        assert P.check()
        for x in range(X.n):
            assert P.stalk(x) == sh.sections(F, a.preimage(fs.minimal_open(X, x)))


def test_functoriality_of_pull_push(rng):
    for _ in range(8):
        X, Y, Z = fs.random_space(rng, 3), fs.random_space(rng, 3), fs.random_space(rng, 3)
        b, a = fs.random_map(rng, Z, Y), fs.random_map(rng, Y, X)
        ab = fs.compose_maps(a, b)
        F = random_small(rng, X)
        assert sh.pullback(ab, F) == sh.pullback(b, sh.pullback(a, F))
        G = random_small(rng, Z)
        lhs, rhs = sh.pushforward(ab, G), sh.pushforward(a, sh.pushforward(b, G))
        comp = sh.push_comp(a, b, G)
        assert comp.is_chain_map() and all(
            la.rank(comp.comp(x, n)) == lhs.dim(x, n) == rhs.dim(x, n) for x in range(X.n) for n in lhs.degrees())


def test_pull_push_adjunction_is_bijective(rng):
    for _ in range(8):
        X, Y = fs.random_space(rng, 3), fs.random_space(rng, 3)
        a = fs.random_map(rng, Y, X)
        F, G = random_small(rng, X), random_small(rng, Y)
        aF, aG = sh.pullback(a, F), sh.pushforward(a, G)
        assert z0(sh.global_hom(aF, G)) == z0(sh.global_hom(F, aG))
        f = sh.random_chain_map(rng, aF, G)
        eta = sh.unit_pull_push(a, F)
        flat = sh.compose(sh.pushforward_map(a, f, source=eta.target, target=aG), eta)
        assert flat.is_chain_map()
        eps = sh.counit_pull_push(a, G, middle=aG)
        back = sh.compose(eps, sh.pullback_map(a, flat, source=aF, target=eps.source))
        assert back == f


# -- tensor and Hom -----------------------------------------------------------------------

def test_tensor(rng):
    X = fs.random_space(rng, 4)
    F, G = random_small(rng, X), random_small(rng, X)
    T = sh.tensor(F, G)
    assert T.check()
    for x in range(X.n):
        for n in T.degrees():
            assert T.dim(x, n) == sum(F.dim(x, a) * G.dim(x, n - a) for a in F.degrees())
    assert sh.tensor(sh.unit_object(X), F) == F
    sw = sh.swap(F, G)
    assert sw.is_chain_map() and sh.compose(sh.swap(G, F), sw) == sh.identity(T)
    with pytest.raises(ValueError):
        sh.tensor(F, sh.constant(fs.point(), K0))


def test_sheaf_hom_examples(S, rng):
    G = random_small(rng, S)
    H = sh.sheaf_hom(sh.constant(S, K0), G)
    assert all(cx.betti(H.stalk(x)) == cx.betti(G.stalk(x)) for x in range(S.n))
    assert all(H.stalk(x).dims == G.stalk(x).dims for x in range(S.n))
    j = fs.factor_locally_closed(S, [pt(S, "o")])
    H = sh.sheaf_hom(sh.lower_shriek(j, sh.constant(j.space, K0)), sh.constant(S, K0))
    assert stalk_dims(H) == (1, 1) and sh.sections(H) == K0
    with pytest.raises(ValueError):
        sh.sheaf_hom(G, sh.constant(fs.point(), K0))


def test_sheaf_hom_stalks_match_end_oracle(rng):
    for _ in range(15):
        X = fs.random_space(rng, int(rng.integers(1, 5)))
        F, G = random_small(rng, X, (0, 0)), random_small(rng, X, (0, 0))
        H = sh.sheaf_hom(F, G)
        fd, fr = rep_data(F)
        gd, gr = rep_data(G)
        for x in range(X.n):
            U = sorted(fs.minimal_open(X, x))
            assert H.dim(x, 0) == oracles.natural_family_dim(X.leq.tolist(), U, fd, gd, fr, gr)


def test_global_hom_is_representation_hom(rng):
    for _ in range(10):
        X = fs.random_space(rng, 3)
        F, G = random_small(rng, X), random_small(rng, X)
        for f in sh.natural_chain_maps(F, G):
            assert f.is_chain_map() and f.is_natural()
        assert len(sh.natural_chain_maps(F, G)) == z0(sh.global_hom(F, G))


# -- the !-functors ----------------------------------------------------------------------------

def test_lower_shriek_examples(S, rng):
    c, o = pt(S, "c"), pt(S, "o")
    full = fs.factor_locally_closed(S, range(S.n))
    F = random_small(rng, S)
    assert sh.lower_shriek(full, F) == F
    j = fs.factor_locally_closed(S, [o])
    assert stalk_dims(sh.lower_shriek(j, sh.constant(j.space, K0))) == (0, 1)
    i = fs.factor_locally_closed(S, [c])
    assert stalk_dims(sh.lower_shriek(i, sh.constant(i.space, K0))) == (1, 0)


def test_upper_shriek_examples(S, rng):
    c, o = pt(S, "c"), pt(S, "o")
    j = fs.factor_locally_closed(S, [o])
    F = random_small(rng, S)
    assert sh.upper_shriek_adjoint(j, F) == sh.pullback(j.map, F)
    i = fs.factor_locally_closed(S, [c])
    assert sh.upper_shriek_adjoint(i, sh.constant(S, K0)).is_zero()
    assert sh.upper_shriek_adjoint(i, sh.skyscraper(S, c, K0)) == sh.constant(i.space, K0)


def _immersions(X):
    from itertools import combinations
    for r in range(1, X.n + 1):
        for T in combinations(range(X.n), r):
            j = fs.factor_locally_closed(X, T)
            if j is not None:
                yield j


def test_shriek_adjunction_and_triangles(rng):
    X = fs.random_space(rng, 4)
    for j in _immersions(X):
        F, G = random_small(rng, j.space), random_small(rng, X)
        L, U = sh.lower_shriek(j, F), sh.upper_shriek_adjoint(j, G)
        assert U.check()
        assert z0(sh.global_hom(L, G)) == z0(sh.global_hom(F, U))
        eta = sh.unit_shriek(j, F)
        eps = sh.counit_shriek(j, L)
        tri = sh.compose(eps, sh.lower_shriek_map(j, eta, source=L, target=eps.source))
        assert tri == sh.identity(L)
        epsG = sh.counit_shriek(j, G, middle=U)
        assert epsG.is_chain_map()


def test_base_change_for_immersions(rng):
    for _ in range(6):
        X, Xp = fs.random_space(rng, 3), fs.random_space(rng, 3)
        beta = fs.random_map(rng, Xp, X)
        for j in _immersions(X):
            sq = fs.pullback_square(j.map, beta)
            jp = fs.immersion_from_map(sq.alpha_prime)
            assert jp is not None
            F = random_small(rng, j.space)
            lhs = sh.pullback(beta, sh.lower_shriek(j, F))
            rhs = sh.lower_shriek(jp, sh.pullback(sq.beta_prime, F))
            assert lhs == rhs


def test_exact_functors_preserve_acyclics(rng):
    for _ in range(8):
        X, Y = fs.random_space(rng, 3), fs.random_space(rng, 3)
        a = fs.random_map(rng, Y, X)
        A = sh.sheaf_cone(sh.identity(random_small(rng, X)))
        assert all(cx.betti(sh.pullback(a, A).stalk(y)) == {} for y in range(Y.n))
        for j in _immersions(X):
            B = sh.sheaf_cone(sh.identity(random_small(rng, j.space)))
            L = sh.lower_shriek(j, B)
            assert all(cx.betti(L.stalk(x)) == {} for x in range(X.n))


def test_json_round_trip(rng):
    X = fs.random_space(rng, 4)
    F = random_small(rng, X)
    assert sh.SheafComplex.from_json(F.to_json(), X) == F
