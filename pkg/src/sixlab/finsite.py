"""Finite T0 spaces as posets.

Convention: ``x <= y`` iff y lies in every open neighbourhood of x. Opens are
up-sets and the minimal open around x is ``U_x = {y : x <= y}``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import chaincx as cx
from . import exactla as la

__all__ = [
    "SpaceError", "FinSpace", "ContinuousMap", "LocallyClosedImmersion",
    "CartesianSquare", "validate_space", "minimal_open", "factor_locally_closed",
    "immersion_from_map", "pullback_square", "nerve_cochain", "point",
    "sierpinski", "pseudo_circle", "interval", "discrete", "random_space",
    "random_map", "BUILTIN_SPACES",
]


class SpaceError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FinSpace:
    leq: np.ndarray
    names: tuple[str, ...] = ()

    def __post_init__(self):
        leq = np.asarray(self.leq, dtype=bool)
        if leq.ndim != 2 or leq.shape[0] != leq.shape[1]:
            raise SpaceError("relation table must be square")
        object.__setattr__(self, "leq", leq)
        if not self.names:
            object.__setattr__(self, "names", tuple(str(i) for i in range(leq.shape[0])))

    @property
    def n(self) -> int:
        return self.leq.shape[0]

    def le(self, x: int, y: int) -> bool:
        return bool(self.leq[x, y])

    def up(self, x: int) -> list[int]:
        return [int(y) for y in np.flatnonzero(self.leq[x])]

    def down(self, x: int) -> list[int]:
        return [int(y) for y in np.flatnonzero(self.leq[:, x])]

    def pairs(self) -> list[tuple[int, int]]:
        """Strict relations x < y."""
        return [(x, y) for x in range(self.n) for y in range(self.n) if x != y and self.leq[x, y]]

    def covers(self) -> list[tuple[int, int]]:
        out = []
        for x, y in self.pairs():
            if not any(self.leq[x, z] and self.leq[z, y] for z in range(self.n) if z not in (x, y)):
                out.append((x, y))
        return out

    def is_open(self, S: Iterable[int]) -> bool:
        S = set(S)
        return all(y in S for x in S for y in self.up(x))

    def is_closed(self, S: Iterable[int]) -> bool:
        S = set(S)
        return all(y in S for x in S for y in self.down(x))

    def chain_length(self) -> int:
        """Number of strict steps in a longest chain."""
        order = sorted(range(self.n), key=lambda x: -len(self.up(x)))
        best = {x: 0 for x in range(self.n)}
        for x in reversed(order):
            for y in self.up(x):
                if y != x:
                    best[x] = max(best[x], best[y] + 1)
        return max(best.values(), default=0)

    def opens(self) -> list[frozenset[int]]:
        return [frozenset(S) for r in range(self.n + 1)
                for S in itertools.combinations(range(self.n), r) if self.is_open(S)]

    def subspace(self, S: Sequence[int]) -> "FinSpace":
        S = list(S)
        return FinSpace(self.leq[np.ix_(S, S)], tuple(self.names[i] for i in S))

    def index(self, name: str | int) -> int:
        if isinstance(name, (int, np.integer)):
            if not 0 <= name < self.n:
                raise ValueError(f"point {name} out of range")
            return int(name)
        try:
            return self.names.index(name)
        except ValueError:
            raise ValueError(f"unknown point {name!r}") from None

    def __eq__(self, other) -> bool:
        return isinstance(other, FinSpace) and np.array_equal(self.leq, other.leq)

    __hash__ = None

    def to_json(self) -> dict:
        return {"points": self.n, "leq": [[x, y] for x, y in self.pairs()], "names": list(self.names)}

    @classmethod
    def from_json(cls, doc: dict) -> "FinSpace":
        return from_relations(doc["points"], [tuple(p) for p in doc.get("leq", [])], doc.get("names"))


def from_relations(n: int, pairs: Iterable[tuple[int, int]], names: Sequence[str] | None = None,
                   close: bool = True) -> FinSpace:
    """Space generated by the given relations (reflexive-transitive closure)."""
    leq = np.eye(n, dtype=bool)
    for x, y in pairs:
        leq[x, y] = True
    if close:
        for k in range(n):
            leq |= leq[:, [k]] & leq[[k], :]
    return FinSpace(leq, tuple(names) if names else ())


def validate_space(S: FinSpace) -> None:
    L = S.leq
    for x in range(S.n):
        if not L[x, x]:
            raise SpaceError(f"reflexivity fails at ({x},{x})")
    for x in range(S.n):
        for y in range(S.n):
            if x != y and L[x, y] and L[y, x]:
                raise SpaceError(f"antisymmetry fails at ({x},{y})")
    for x in range(S.n):
        for y in range(S.n):
            if L[x, y]:
                for z in range(S.n):
                    if L[y, z] and not L[x, z]:
                        raise SpaceError(f"transitivity fails at ({x},{z}) via {y}")


def minimal_open(S: FinSpace, x: int) -> frozenset[int]:
    if not 0 <= x < S.n:
        raise ValueError(f"point {x} out of range")
    return frozenset(S.up(x))


# -- maps ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ContinuousMap:
    source: FinSpace
    target: FinSpace
    assign: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "assign", tuple(int(a) for a in self.assign))
        if len(self.assign) != self.source.n:
            raise ValueError("assignment length differs from source size")
        if any(not 0 <= a < self.target.n for a in self.assign):
            raise ValueError("assignment leaves the target")

    def __call__(self, y: int) -> int:
        return self.assign[y]

    def is_continuous(self) -> bool:
        return all(self.target.le(self(x), self(y)) for x, y in self.source.pairs())

    def preimage(self, S: Iterable[int]) -> list[int]:
        S = set(S)
        return [y for y in range(self.source.n) if self(y) in S]

    def is_continuous_topologically(self) -> bool:
        """Preimages of opens are open."""
        return all(self.source.is_open(self.preimage(U)) for U in self.target.opens())

    def to_json(self) -> dict:
        return {"assign": list(self.assign)}

    def __eq__(self, other) -> bool:
        return (isinstance(other, ContinuousMap) and self.assign == other.assign
                and self.source == other.source and self.target == other.target)

    __hash__ = None


def identity_map(X: FinSpace) -> ContinuousMap:
    return ContinuousMap(X, X, tuple(range(X.n)))


def compose_maps(a: ContinuousMap, b: ContinuousMap) -> ContinuousMap:
    """a after b."""
    if not b.target == a.source:
        raise ValueError("maps are not composable")
    return ContinuousMap(b.source, a.target, tuple(a(b(z)) for z in range(b.source.n)))


def terminal_map(X: FinSpace) -> ContinuousMap:
    return ContinuousMap(X, point(), (0,) * X.n)


def point_inclusion(X: FinSpace, x: int) -> ContinuousMap:
    return ContinuousMap(point(), X, (x,))


@dataclass(frozen=True, eq=False)
class LocallyClosedImmersion:
    """Inclusion of S = V n Z with V open (the union of the U_x, x in S) and Z closed."""

    ambient: FinSpace
    subset: tuple[int, ...]
    V: frozenset[int]
    Z: frozenset[int]

    @property
    def space(self) -> FinSpace:
        return self.ambient.subspace(self.subset)

    @property
    def map(self) -> ContinuousMap:
        return ContinuousMap(self.space, self.ambient, self.subset)

    def local(self, x: int) -> int | None:
        """Index in the subspace of an ambient point, or None."""
        try:
            return self.subset.index(x)
        except ValueError:
            return None

    @property
    def is_open(self) -> bool:
        return self.ambient.is_open(self.subset)

    @property
    def is_closed(self) -> bool:
        return self.ambient.is_closed(self.subset)

    @property
    def is_proper(self) -> bool:
        """Closed immersions are the proper ones."""
        return self.is_closed

    def boundary(self) -> list[int]:
        """Points of the closure of S outside S."""
        cl = {y for x in self.subset for y in self.ambient.down(x)}
        return sorted(cl - set(self.subset))


def factor_locally_closed(X: FinSpace, S: Iterable[int]) -> LocallyClosedImmersion | None:
    S = tuple(sorted(set(S)))
    V = frozenset(y for x in S for y in X.up(x))
    Sset = set(S)
    # S is closed in V iff it is down-closed inside V
    for y in V:
        for x in S:
            if X.le(y, x) and y not in Sset:
                return None
    Z = frozenset(y for x in S for y in X.down(x))
    return LocallyClosedImmersion(X, S, V, Z)


def immersion_from_map(a: ContinuousMap) -> LocallyClosedImmersion | None:
    """Recognise an order embedding with locally closed image."""
    img = list(a.assign)
    if len(set(img)) != len(img):
        return None
    for x in range(a.source.n):
        for y in range(a.source.n):
            if a.source.le(x, y) != a.target.le(img[x], img[y]):
                return None
    if img != sorted(img):
        return None
    return factor_locally_closed(a.target, img)


def compose_immersions(outer: LocallyClosedImmersion, inner: LocallyClosedImmersion) -> LocallyClosedImmersion:
    """outer after inner, where inner lives in outer's subspace."""
    if not inner.ambient == outer.space:
        raise ValueError("immersions are not composable")
    S = [outer.subset[i] for i in inner.subset]
    j = factor_locally_closed(outer.ambient, S)
    assert j is not None
    return j


@dataclass(frozen=True)
class CartesianSquare:
    """Y' --b'--> Y, Y' --a'--> X', with a: Y -> X, b: X' -> X."""

    alpha: ContinuousMap
    beta: ContinuousMap
    alpha_prime: ContinuousMap
    beta_prime: ContinuousMap
    points: tuple[tuple[int, int], ...]

    def commutes(self) -> bool:
        return all(self.alpha(self.beta_prime(i)) == self.beta(self.alpha_prime(i))
                   for i in range(self.alpha_prime.source.n))


def pullback_square(alpha: ContinuousMap, beta: ContinuousMap) -> CartesianSquare:
    if not alpha.target == beta.target:
        raise ValueError("maps do not share a target")
    Y, Xp = alpha.source, beta.source
    pts = tuple((y, xp) for xp in range(Xp.n) for y in range(Y.n) if alpha(y) == beta(xp))
    m = len(pts)
    leq = np.zeros((m, m), dtype=bool)
    for i, (y, xp) in enumerate(pts):
        for j, (y2, xp2) in enumerate(pts):
            leq[i, j] = Y.le(y, y2) and Xp.le(xp, xp2)
    Yp = FinSpace(leq, tuple(f"({Y.names[y]},{Xp.names[xp]})" for y, xp in pts))
    ap = ContinuousMap(Yp, Xp, tuple(xp for _, xp in pts))
    bp = ContinuousMap(Yp, Y, tuple(y for y, _ in pts))
    return CartesianSquare(alpha, beta, ap, bp, pts)


# -- nerve oracle ---------------------------------------------------------------

def chains(S: FinSpace) -> dict[int, list[tuple[int, ...]]]:
    """Strict chains x0 < x1 < ... grouped by length - 1."""
    out: dict[int, list[tuple[int, ...]]] = {}
    frontier = [(x,) for x in range(S.n)]
    k = 0
    while frontier:
        out[k] = frontier
        nxt = []
        for c in frontier:
            for y in S.up(c[-1]):
                if y != c[-1]:
                    nxt.append(c + (y,))
        frontier = nxt
        k += 1
    return out


def nerve_cochain(S: FinSpace) -> cx.Complex:
    """Simplicial cochains of the order complex."""
    ch = chains(S)
    idx = {k: {c: i for i, c in enumerate(cs)} for k, cs in ch.items()}
    dims = {k: len(cs) for k, cs in ch.items()}
    d = {}
    for k, cs in ch.items():
        if k + 1 not in ch:
            continue
        M = la.zeros(len(ch[k + 1]), len(cs))
        for r, c in enumerate(ch[k + 1]):
            for i in range(len(c)):
                face = c[:i] + c[i + 1:]
                M[r, idx[k][face]] += 1 if i % 2 == 0 else -1
        d[k] = M % la.get_prime()
    return cx.Complex(dims, d)


# -- built-in spaces -------------------------------------------------------------

def point() -> FinSpace:
    return FinSpace(np.ones((1, 1), dtype=bool), ("*",))


def sierpinski() -> FinSpace:
    """c <= o: o is the open point, c the closed one."""
    return from_relations(2, [(0, 1)], ("c", "o"))


def pseudo_circle() -> FinSpace:
    """x, y closed; a, b open; x, y <= a and x, y <= b."""
    return from_relations(4, [(0, 2), (0, 3), (1, 2), (1, 3)], ("x", "y", "a", "b"))


def interval() -> FinSpace:
    """The 3-chain 0 <= 1 <= 2."""
    return from_relations(3, [(0, 1), (1, 2)], ("p0", "p1", "p2"))


def discrete(n: int) -> FinSpace:
    return FinSpace(np.eye(n, dtype=bool))


BUILTIN_SPACES = {
    "pt": point,
    "sierpinski": sierpinski,
    "pseudo-circle": pseudo_circle,
    "interval": interval,
}


def random_space(rng: np.random.Generator, n: int, max_chain: int = 3, density: float = 0.4) -> FinSpace:
    """Random poset on n points whose longest chain has at most max_chain steps."""
    while True:
        level = rng.integers(0, max_chain + 1, size=n)
        pairs = [(x, y) for x in range(n) for y in range(n)
                 if level[x] > level[y] and rng.random() < density]
        # pairs point from higher level to lower level, so chains are bounded by levels
        S = from_relations(n, pairs)
        if S.chain_length() <= max_chain:
            return S


def random_map(rng: np.random.Generator, Y: FinSpace, X: FinSpace, tries: int = 200) -> ContinuousMap:
    """Random order-preserving map by rejection, falling back to a constant map."""
    for _ in range(tries):
        a = ContinuousMap(Y, X, tuple(int(v) for v in rng.integers(0, X.n, size=Y.n)))
        if a.is_continuous():
            return a
    return ContinuousMap(Y, X, (int(rng.integers(0, X.n)),) * Y.n)
