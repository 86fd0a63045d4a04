from __future__ import annotations

from itertools import combinations

import numpy as np
import pytest

from sixlab import chaincx as cx
from sixlab import finsite as fs

import oracles

# order-complex cohomology, frozen from oracles.betti
NERVE_BETTI = {"pt": {0: 1}, "sierpinski": {0: 1}, "pseudo-circle": {0: 1, 1: 1}, "interval": {0: 1}}


def subsets(n):
    for r in range(n + 1):
        yield from (frozenset(c) for c in combinations(range(n), r))


def test_validate_space():
    fs.validate_space(fs.point())
    fs.validate_space(fs.sierpinski())
    bad = fs.FinSpace(np.array([[1, 1], [1, 1]], dtype=bool))
    with pytest.raises(fs.SpaceError, match="antisymmetry"):
        fs.validate_space(bad)
    with pytest.raises(fs.SpaceError, match="reflexivity"):
        fs.validate_space(fs.FinSpace(np.zeros((1, 1), dtype=bool)))
    chain = np.eye(3, dtype=bool)
    chain[0, 1] = chain[1, 2] = True
    with pytest.raises(fs.SpaceError, match="transitivity"):
        fs.validate_space(fs.FinSpace(chain))


def test_minimal_open():
    S = fs.sierpinski()
    c, o = S.index("c"), S.index("o")
    assert fs.minimal_open(S, o) == {o}
    assert fs.minimal_open(S, c) == {c, o}
    D = fs.discrete(3)
    assert all(fs.minimal_open(D, x) == {x} for x in range(3))
    with pytest.raises(ValueError):
        fs.minimal_open(S, 5)


def test_minimal_open_is_smallest(rng):
    for _ in range(10):
        X = fs.random_space(rng, int(rng.integers(1, 6)))
        opens = X.opens()
        for x in range(X.n):
            U = fs.minimal_open(X, x)
            assert U in opens
            assert all(U <= W for W in opens if x in W)


def test_factor_locally_closed():
    S = fs.sierpinski()
    c, o = S.index("c"), S.index("o")
    j = fs.factor_locally_closed(S, [o])
    assert j is not None and j.is_open and j.V == {o} and j.Z == j.V | {c}
    i = fs.factor_locally_closed(S, [c])
    assert i is not None and i.is_closed and i.V == {c, o}
    I = fs.interval()
    assert fs.factor_locally_closed(I, [0, 2]) is None
    k = fs.factor_locally_closed(I, [1])
    assert k is not None and not k.is_open and not k.is_closed


def test_locally_closed_matches_definition(rng):
    for _ in range(5):
        X = fs.random_space(rng, int(rng.integers(1, 6)))
        opens = set(X.opens())
        closeds = {frozenset(range(X.n)) - U for U in opens}
        for T in subsets(X.n):
            want = any(T == V & Z for V in opens for Z in closeds)
            j = fs.factor_locally_closed(X, T)
            assert (j is not None) == want
            if j is not None:
                assert set(j.subset) == j.V & j.Z and X.is_open(j.V) and X.is_closed(j.Z)


def test_pullback_squares():
    S = fs.sierpinski()
    c, o = S.index("c"), S.index("o")
    sq = fs.pullback_square(fs.point_inclusion(S, c), fs.point_inclusion(S, o))
    assert sq.alpha_prime.source.n == 0 and sq.commutes()
    a = fs.point_inclusion(S, c)
    sq = fs.pullback_square(a, fs.identity_map(S))
    assert sq.beta_prime.source == a.source
    sq = fs.pullback_square(fs.identity_map(S), fs.identity_map(S))
    assert sq.points == ((c, c), (o, o)) and sq.alpha_prime.source == S
    with pytest.raises(ValueError):
        fs.pullback_square(a, fs.identity_map(fs.point()))


def test_pullback_fibres(rng):
    for _ in range(10):
        X = fs.random_space(rng, 4)
        Y, Xp = fs.random_space(rng, 3), fs.random_space(rng, 3)
        a, b = fs.random_map(rng, Y, X), fs.random_map(rng, Xp, X)
        sq = fs.pullback_square(a, b)
        assert sq.commutes()
        assert sq.alpha_prime.is_continuous() and sq.beta_prime.is_continuous()
        for xp in range(Xp.n):
            fibre = [i for i in range(sq.alpha_prime.source.n) if sq.alpha_prime(i) == xp]
            assert len(fibre) == sum(a(y) == b(xp) for y in range(Y.n))


@pytest.mark.parametrize("name", sorted(NERVE_BETTI))
def test_nerve_cohomology(name):
    X = fs.BUILTIN_SPACES[name]()
    assert oracles.betti(X.leq.tolist()) == NERVE_BETTI[name]
    N = fs.nerve_cochain(X)
    assert N.check()
    assert cx.betti(N) == NERVE_BETTI[name]


def test_nerve_matches_oracle_on_random_spaces(rng):
    for _ in range(20):
        X = fs.random_space(rng, int(rng.integers(1, 7)))
        assert cx.betti(fs.nerve_cochain(X)) == oracles.betti(X.leq.tolist())


def test_pseudo_circle_orientation():
    P = fs.pseudo_circle()
    assert {P.names[x] for x in range(P.n) if P.is_closed([x])} == {"x", "y"}
    assert {P.names[x] for x in range(P.n) if P.is_open([x])} == {"a", "b"}


def test_opens_form_a_topology(rng):
    for n in range(1, 6):
        X = fs.random_space(rng, n)
        opens = set(X.opens())
        assert opens == set(oracles.up_sets(X.leq.tolist()))
        assert frozenset() in opens and frozenset(range(n)) in opens
        for U in opens:
            for W in opens:
                assert U | W in opens and U & W in opens


def test_continuity_is_monotonicity(rng):
    for _ in range(30):
        Y, X = fs.random_space(rng, 3), fs.random_space(rng, 3)
        a = fs.ContinuousMap(Y, X, tuple(int(v) for v in rng.integers(0, 3, size=3)))
        assert a.is_continuous() == a.is_continuous_topologically()


def test_json_round_trip(rng):
    X = fs.random_space(rng, 5)
    doc = X.to_json()
    assert set(doc) >= {"points", "leq"}
    assert fs.FinSpace.from_json(doc) == X
