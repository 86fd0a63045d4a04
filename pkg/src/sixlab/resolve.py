"""A strictly functorial injective resolution built from Godement envelopes.

For a representation M of the specialisation poset, ``G(M)_y = sum_{x >= y} M_x``
(blocks in increasing point order) receives the canonical mono stacking the
restrictions, and ``C(M)_y = sum_{x > y} M_x`` is its canonical cokernel. The
resolution of a single sheaf is ``G(M) -> G(C M) -> G(C^2 M) -> ...``; on a
complex F the columns ``R_j(F^n) = G(C^j F^n)`` are totalised with the vertical
differential signed by ``(-1)^n``. Everything is built from block-diagonal
copies of the input maps, so ``i`` is k-linear, strictly functorial and
commutes with the Hom-complex differential.

Sheaves produced here carry a Godement layout (see :mod:`sixlab.sheafcx`),
which gives free coordinates for natural maps into them. Homotopy questions
with a fibrant target are solved in those coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import chaincx as cx
from . import exactla as la
from .finsite import FinSpace
from .sheafcx import SheafComplex, SheafMap, identity, layout_offsets, compose, sections_map

__all__ = [
    "Tower", "ResolutionResult", "Resolution1", "godement", "cokernel", "is_injective_sheaf",
    "inj_resolve_sheaf", "i_complex", "i_on_graded_map", "iota", "is_fibrant",
    "is_homotopic", "homotopy_inverse", "SheafHomotopy", "compare_orderings",
    "SolveTooLarge", "MAX_SOLVE_ENTRIES",
]

#: Largest dense linear system (rows x columns) a homotopy solve may allocate.
MAX_SOLVE_ENTRIES = 4_000_000


class SolveTooLarge(ValueError):
    """A homotopy problem exceeds :data:`MAX_SOLVE_ENTRIES`."""


def _guard(rows: int, cols: int) -> None:
    if rows * cols > MAX_SOLVE_ENTRIES:
        raise SolveTooLarge(f"homotopy system of size {rows} x {cols} exceeds the limit")


def _sign(n: int) -> int:
    return -1 if n % 2 else 1


# -- single-degree representations --------------------------------------------

class Tower:
    """The canonical cokernel tower C^0 M, C^1 M, ... of a representation."""

    def __init__(self, X: FinSpace, dims: Sequence[int], rho):
        self.X = X
        self.strict_up = [[z for z in X.up(y) if z != y] for y in range(X.n)]
        self.dims: list[tuple[int, ...]] = [tuple(dims)]
        self.rho: list[dict[tuple[int, int], np.ndarray]] = [
            {(y, z): rho(y, z) for y, z in X.pairs() if dims[y] and dims[z]}]
        while any(self.dims[-1]):
            self._grow()
        self.dims.pop()
        self.rho.pop()

    @property
    def length(self) -> int:
        return len(self.dims)

    def r(self, j: int, y: int, z: int) -> np.ndarray:
        if y == z:
            return la.eye(self.dims[j][y])
        m = self.rho[j].get((y, z))
        return m if m is not None else la.zeros(self.dims[j][z], self.dims[j][y])

    def offsets(self, j: int, y: int, strict: bool) -> list[tuple[int, int, int]]:
        """(x, offset, size) of the blocks of C^{j+1}_y (strict) or G(C^j)_y."""
        pts = self.strict_up[y] if strict else self.X.up(y)
        out, off = [], 0
        for x in pts:
            k = self.dims[j][x]
            out.append((x, off, k))
            off += k
        return out

    def _grow(self) -> None:
        j = len(self.dims) - 1
        X = self.X
        new_dims = tuple(sum(self.dims[j][x] for x in self.strict_up[y]) for y in range(X.n))
        res = {}
        for y, z in X.pairs():
            if not (new_dims[y] and new_dims[z]):
                continue
            src = {x: (o, k) for x, o, k in self.offsets(j, y, True)}
            M = la.zeros(new_dims[z], new_dims[y])
            oz, kz = src[z]
            for x, o, k in self.offsets(j, z, True):
                if not k:
                    continue
                so, _ = src[x]
                M[o:o + k, so:so + k] = la.eye(k)
                if kz:
                    M[o:o + k, oz:oz + kz] = (-self.r(j, z, x)) % la.get_prime()
            res[(y, z)] = M
        self.dims.append(new_dims)
        self.rho.append(res)

    def godement_dim(self, j: int, y: int) -> int:
        return sum(self.dims[j][x] for x in self.X.up(y))

    def mono(self, j: int, y: int) -> np.ndarray:
        """C^j_y -> G(C^j)_y."""
        mats = [self.r(j, y, x) for x in self.X.up(y)]
        return np.vstack(mats) if mats else la.zeros(0, self.dims[j][y])

    def pi(self, j: int, y: int) -> np.ndarray:
        """G(C^j)_y -> C^{j+1}_y = C^j M restricted to the strict up-set."""
        rows = sum(self.dims[j][x] for x in self.strict_up[y])
        cols = self.godement_dim(j, y)
        M = la.zeros(rows, cols)
        src = {x: (o, k) for x, o, k in self.offsets(j, y, False)}
        oy, ky = src[y]
        for x, o, k in self.offsets(j, y, True):
            if k:
                so, _ = src[x]
                M[o:o + k, so:so + k] = la.eye(k)
                if ky:
                    M[o:o + k, oy:oy + ky] = (-self.r(j, y, x)) % la.get_prime()
        return M

    def vertical(self, j: int, y: int, target: "Tower") -> np.ndarray:
        """mono_{j+1} after pi_j : G(C^j)_y -> G(C^{j+1})_y (target is self)."""
        if j + 1 >= self.length:
            return la.zeros(0, self.godement_dim(j, y))
        return la.mul(self.mono(j + 1, y), self.pi(j, y))


def tower_maps(X: FinSpace, phi: Sequence[np.ndarray], src: Tower, tgt: Tower) -> list[list[np.ndarray]]:
    """C^j(phi) at every point, for all j where either tower is nonzero."""
    out = [list(phi)]
    L = max(src.length, tgt.length)
    for j in range(L - 1):
        prev = out[-1]
        nxt = []
        for y in range(X.n):
            blocks = [prev[x] for x in src.strict_up[y]]
            nxt.append(_blockdiag(blocks))
        out.append(nxt)
    return out


def _blockdiag(blocks: Sequence[np.ndarray]) -> np.ndarray:
    r = sum(b.shape[0] for b in blocks)
    c = sum(b.shape[1] for b in blocks)
    M = la.zeros(r, c)
    i = j = 0
    for b in blocks:
        M[i:i + b.shape[0], j:j + b.shape[1]] = b
        i += b.shape[0]
        j += b.shape[1]
    return M


def _godement_of(X: FinSpace, y: int, level: Sequence[np.ndarray]) -> np.ndarray:
    return _blockdiag([level[x] for x in X.up(y)])


def _degree_tower(F: SheafComplex, n: int) -> Tower:
    return Tower(F.space, [F.dim(x, n) for x in range(F.space.n)], lambda a, b: F.rho(a, b, n))


def _single(F: SheafComplex, n: int) -> SheafComplex:
    X = F.space
    return SheafComplex(X, {0: tuple(F.dim(x, n) for x in range(X.n))}, {},
                        {0: {(a, b): F.rho(a, b, n) for a, b in X.pairs()}})


# -- Godement envelope and cokernel of a single sheaf ------------------------------------

def godement(M: SheafComplex, n: int = 0) -> tuple[SheafComplex, SheafMap]:
    """G(M) for the degree-n piece of M, with its canonical mono."""
    X = M.space
    T = _degree_tower(M, n)
    gens = tuple((x, M.dim(x, n)) for x in range(X.n) if M.dim(x, n))
    G = _from_layout(X, {n: gens}, {})
    mono = SheafMap(_single_at(M, n), G, 0, {n: tuple(T.mono(0, y) if T.length else la.zeros(0, 0)
                                                  for y in range(X.n))} if T.length else {})
    return G, mono


def _single_at(F: SheafComplex, n: int) -> SheafComplex:
    X = F.space
    return SheafComplex(X, {n: tuple(F.dim(x, n) for x in range(X.n))}, {},
                        {n: {(a, b): F.rho(a, b, n) for a, b in X.pairs()}})


def cokernel(M: SheafComplex, n: int = 0) -> tuple[SheafComplex, SheafMap]:
    """The canonical cokernel C(M) of M -> G(M), with the projection from G(M)."""
    X = M.space
    T = _degree_tower(M, n)
    G, _ = godement(M, n)
    if T.length < 2:
        return SheafComplex(X, {}), SheafMap(G, SheafComplex(X, {}), 0, {})
    C = SheafComplex(X, {n: T.dims[1]}, {}, {n: dict(T.rho[1])})
    pi = SheafMap(G, C, 0, {n: tuple(T.pi(0, y) for y in range(X.n))})
    return C, pi


def _from_layout(X: FinSpace, gens: dict[int, tuple], d: dict) -> SheafComplex:
    from .sheafcx import _layout_projection
    dims = {n: tuple(sum(m for x, m in g if X.le(y, x)) for y in range(X.n)) for n, g in gens.items()}
    res = {n: {(y, z): _layout_projection(X, g, y, z) for y, z in X.pairs()} for n, g in gens.items()}
    return SheafComplex(X, dims, d, res, gens=gens)


def _natural_solve_retraction(M: SheafComplex, n: int, mono: Sequence[np.ndarray], gdims: Sequence[int],
                              grho) -> list[np.ndarray] | None:
    """Natural r: G -> M with r mono = id, or None."""
    X = M.space
    layout, off = [], 0
    for y in range(X.n):
        r, c = M.dim(y, n), gdims[y]
        layout.append((off, r, c))
        off += r * c
    rows, rhs = [], []
    for y, z in X.covers():
        oy, ry, cy = layout[y]
        oz, rz, cz = layout[z]
        if not (rz and cy):
            continue
        R = la.zeros(rz * cy, off)
        if ry:
            R[:, oy:oy + ry * cy] = np.kron(M.rho(y, z, n), la.eye(cy))
        if cz:
            R[:, oz:oz + rz * cz] -= np.kron(la.eye(rz), grho(y, z).T)
        rows.append(R)
        rhs.append(la.zeros(rz * cy, 1))
    for y in range(X.n):
        o, r, c = layout[y]
        if not r:
            continue
        m = mono[y]
        R = la.zeros(r * r, off)
        R[:, o:o + r * c] = np.kron(la.eye(r), m.T)
        rows.append(R)
        rhs.append(la.eye(r).reshape(-1, 1))
    if not rows:
        return [la.zeros(M.dim(y, n), gdims[y]) for y in range(X.n)]
    sol = la.solve(np.vstack(rows) % la.get_prime(), np.vstack(rhs))
    if sol is None:
        return None
    return [sol[o:o + r * c, 0].reshape(r, c) for o, r, c in layout]


def is_injective_sheaf(M: SheafComplex, n: int = 0) -> tuple[bool, list[np.ndarray] | None]:
    """Whether the degree-n piece of M is injective, with a retraction of its Godement mono."""
    X = M.space
    if M.gens is not None and M.check_layout():
        # a retraction of the mono into G(M): read off each block's own point
        g = M.gens.get(n, ())
        T = _degree_tower(M, n)
        ret = []
        for y in range(X.n):
            R = la.zeros(M.dim(y, n), T.godement_dim(0, y) if T.length else 0)
            goff = {x: o for x, o, _ in T.offsets(0, y, False)} if T.length else {}
            for bi, x, m, off in layout_offsets(X, g, y):
                # block bi is read from the summand M_x of G(M)_y, where it sits at its own offset
                own = next(o2 for i2, _, _, o2 in layout_offsets(X, g, x) if i2 == bi)
                R[off:off + m, goff[x] + own:goff[x] + own + m] = la.eye(m)
            ret.append(R)
        return True, ret
    T = _degree_tower(M, n)
    if not T.length:
        return True, [la.zeros(0, 0) for _ in range(X.n)]
    gdims = [T.godement_dim(0, y) for y in range(X.n)]
    G, _ = godement(M, n)
    ret = _natural_solve_retraction(M, n, [T.mono(0, y) for y in range(X.n)], gdims,
                                    lambda a, b: G.rho(a, b, n))
    return ret is not None, ret


@dataclass
class Resolution1:
    """0 -> M -> I^0 -> ... -> I^l -> 0 for a single sheaf."""

    terms: list[SheafComplex]
    augmentation: SheafMap
    maps: list[SheafMap]

    @property
    def length(self) -> int:
        return len(self.terms) - 1


def inj_resolve_sheaf(M: SheafComplex, n: int = 0, early_stop: bool = True) -> Resolution1:
    """Iterate Godement envelopes on cokernels, stopping early at an injective cokernel."""
    X = M.space
    T = _degree_tower(M, n)
    terms, maps = [], []
    aug = None
    for j in range(T.length):
        Cj = SheafComplex(X, {0: T.dims[j]}, {}, {0: dict(T.rho[j])})
        if early_stop and j > 0 and is_injective_sheaf(Cj)[0]:
            terms.append(Cj)
            maps.append(SheafMap(terms[-2], Cj, 0, {0: tuple(T.pi(j - 1, y) for y in range(X.n))}))
            break
        gens = tuple((x, T.dims[j][x]) for x in range(X.n) if T.dims[j][x])
        Gj = _from_layout(X, {0: gens}, {})
        if j == 0:
            aug = SheafMap(_single(M, n), Gj, 0, {0: tuple(T.mono(0, y) for y in range(X.n))})
        else:
            maps.append(SheafMap(terms[-1], Gj, 0, {0: tuple(T.vertical(j - 1, y, T) for y in range(X.n))}))
        terms.append(Gj)
    if len(terms) - 1 > X.chain_length():
        raise RuntimeError("resolution exceeded the chain-length bound")
    if aug is None:
        aug = SheafMap(_single(M, n), SheafComplex(X, {}), 0, {})
    return Resolution1(terms, aug, maps)


# -- the resolution functor on complexes ---------------------------------------------------

@dataclass(eq=False)
class ResolutionResult:
    input: SheafComplex
    output: SheafComplex
    iota: SheafMap

    def to_json(self) -> dict:
        return {"input": self.input.to_json(), "output": self.output.to_json(), "iota": self.iota.to_json()}


def _towers(F: SheafComplex) -> dict[int, Tower]:
    cache = F.__dict__.setdefault("_towers", {})
    if not cache:
        for n in F.dims:
            cache[n] = _degree_tower(F, n)
    return cache


def _i_layout(F: SheafComplex) -> dict[int, list[tuple[int, int]]]:
    """Degree m of iF: list of (j, n) columns present."""
    T = _towers(F)
    out: dict[int, list[tuple[int, int]]] = {}
    for n, t in T.items():
        for j in range(t.length):
            out.setdefault(n + j, []).append((j, n))
    return {m: sorted(v) for m, v in out.items()}


def _column_offsets(F: SheafComplex, cols: list[tuple[int, int]], y: int) -> dict[tuple[int, int], tuple[int, int]]:
    T = _towers(F)
    out, off = {}, 0
    for j, n in cols:
        k = T[n].godement_dim(j, y)
        out[(j, n)] = (off, k)
        off += k
    return out


def i_complex(F: SheafComplex) -> ResolutionResult:
    """The resolution iF with its augmentation iota: F -> iF."""
    cached = F.__dict__.get("_resolution")
    if cached is not None:
        return cached
    X = F.space
    T = _towers(F)
    lay = _i_layout(F)
    gens = {m: tuple((x, T[n].dims[j][x]) for j, n in cols for x in range(X.n) if T[n].dims[j][x])
            for m, cols in lay.items()}
    d = {}
    for m, cols in lay.items():
        if m + 1 not in lay:
            continue
        mats = []
        for y in range(X.n):
            so = _column_offsets(F, cols, y)
            to = _column_offsets(F, lay[m + 1], y)
            D = la.zeros(sum(k for _, k in to.values()), sum(k for _, k in so.values()))
            for (j, n), (o, k) in so.items():
                if not k:
                    continue
                if (j, n + 1) in to:
                    tw = tower_maps(X, [F.diff(x, n) for x in range(X.n)], T[n], T[n + 1])
                    oo, kk = to[(j, n + 1)]
                    if kk:
                        D[oo:oo + kk, o:o + k] = _godement_of(X, y, tw[j])
                if (j + 1, n) in to:
                    oo, kk = to[(j + 1, n)]
                    if kk:
                        D[oo:oo + kk, o:o + k] = (_sign(n) * T[n].vertical(j, y, T[n])) % la.get_prime()
            mats.append(D)
        d[m] = tuple(mats)
    I = _from_layout(X, gens, d)
    I.meta = {"kind": "i", "source": F}
    maps = {}
    for n in F.dims:
        mats = []
        for y in range(X.n):
            to = _column_offsets(F, lay[n], y)
            M = la.zeros(sum(k for _, k in to.values()), F.dim(y, n))
            o, k = to[(0, n)]
            M[o:o + k, :] = T[n].mono(0, y)
            mats.append(M)
        maps[n] = tuple(mats)
    res = ResolutionResult(F, I, SheafMap(F, I, 0, maps))
    F.__dict__["_resolution"] = res
    return res


def iota(F: SheafComplex) -> SheafMap:
    return i_complex(F).iota


def i_on_graded_map(h: SheafMap, source: SheafComplex | None = None,
                    target: SheafComplex | None = None) -> SheafMap:
    """i(h): iA -> iB of the same degree; column (j, n) goes to (j, n + deg) by G C^j(h^n)."""
    A, B, k = h.source, h.target, h.degree
    X = A.space
    IA = source or i_complex(A).output
    IB = target or i_complex(B).output
    TA, TB = _towers(A), _towers(B)
    la_, lb = _i_layout(A), _i_layout(B)
    maps = {}
    for m, cols in la_.items():
        if m + k not in lb:
            continue
        mats = []
        tw = {}
        for j, n in cols:
            if n + k in TB:
                tw[n] = tower_maps(X, [h.comp(x, n) for x in range(X.n)], TA[n], TB[n + k])
        for y in range(X.n):
            so = _column_offsets(A, cols, y)
            to = _column_offsets(B, lb[m + k], y)
            M = la.zeros(sum(kk for _, kk in to.values()), sum(kk for _, kk in so.values()))
            for (j, n), (o, kk) in so.items():
                if kk and (j, n + k) in to and n in tw:
                    oo, k2 = to[(j, n + k)]
                    if k2:
                        M[oo:oo + k2, o:o + kk] = _godement_of(X, y, tw[n][j])
            mats.append(M)
        maps[m] = tuple(mats)
    return SheafMap(IA, IB, k, maps)


def is_fibrant(F: SheafComplex) -> bool:
    """Bounded and componentwise injective (hence h-injective)."""
    if F.gens is not None and F.check_layout():
        return True
    return all(is_injective_sheaf(F, n)[0] for n in F.dims)


def compare_orderings(F: SheafComplex, perm: Sequence[int]) -> bool:
    """Resolve F with the points relabelled by perm; both augmentations are quasi-isomorphisms
    and the two resolutions have isomorphic stalk cohomology."""
    from .finsite import ContinuousMap
    from .sheafcx import pullback, is_quasi_iso
    X = F.space
    perm = list(perm)
    inv = [0] * X.n
    for a, b in enumerate(perm):
        inv[b] = a
    leq = X.leq[np.ix_(perm, perm)]
    Xp = FinSpace(leq, tuple(X.names[i] for i in perm))
    to_p = ContinuousMap(Xp, X, tuple(perm))
    back = ContinuousMap(X, Xp, tuple(inv))
    Fp = pullback(to_p, F)
    Ip = i_complex(Fp)
    I_back = pullback(back, Ip.output)
    i_back = SheafMap(F, I_back, 0, {n: tuple(Ip.iota.comp(inv[x], n) for x in range(X.n)) for n in F.dims})
    ok = is_quasi_iso(i_back) and is_quasi_iso(iota(F))
    I = i_complex(F).output
    return ok and all(cx.betti(I.stalk(x)) == cx.betti(I_back.stalk(x)) for x in range(X.n))


# -- homotopies with fibrant targets -------------------------------------------------------------

class _NatCoords:
    """Natural degree-k maps S -> T, T with a Godement layout, in block coordinates.

    The parameter of a map is, for every source degree n and every block
    (x, m) of T^{n+k}, an m x dim S_x^n matrix: the block's component at x.
    """

    def __init__(self, S: SheafComplex, T: SheafComplex, k: int):
        self.S, self.T, self.k = S, T, k
        X = S.space
        self.blocks = []  # (n, block index, x, m, offset)
        off = 0
        for n in sorted(S.dims):
            for bi, (x, m) in enumerate(T.gens.get(n + k, ())):
                c = S.dim(x, n)
                if m and c:
                    self.blocks.append((n, bi, x, m, off))
                    off += m * c
        self.size = off
        self.index = {(n, bi): (x, m, o) for n, bi, x, m, o in self.blocks}

    def build(self, theta: np.ndarray) -> SheafMap:
        S, T, k = self.S, self.T, self.k
        X = S.space
        maps = {}
        for n in S.dims:
            mats = []
            g = T.gens.get(n + k, ())
            for y in range(X.n):
                M = la.zeros(T.dim(y, n + k), S.dim(y, n))
                for bi, x, m, off in layout_offsets(X, g, y):
                    if (n, bi) in self.index:
                        _, _, o = self.index[(n, bi)]
                        th = theta[o:o + m * S.dim(x, n)].reshape(m, S.dim(x, n))
                        M[off:off + m, :] = la.mul(th, S.rho(y, x, n))
                mats.append(M)
            maps[n] = tuple(mats)
        return SheafMap(S, T, k, maps)


def _target_rows(T: SheafComplex, deg: int):
    """(block index, x, m, offset in the stalk at x) of every block of T^deg."""
    X = T.space
    out = []
    for bi, (x, m) in enumerate(T.gens.get(deg, ())):
        for i, _, _, off in layout_offsets(X, T.gens[deg], x):
            if i == bi:
                out.append((bi, x, m, off))
                break
    return out


class _EqSpace:
    """Block coordinates of natural degree-k maps S -> T (targets in T's layout)."""

    def __init__(self, S: SheafComplex, T: SheafComplex, k: int):
        self.rows = []
        off = 0
        for n in sorted(S.dims):
            for bi, x, m, toff in _target_rows(T, n + k):
                c = S.dim(x, n)
                if m and c:
                    self.rows.append((n, bi, x, m, toff, off))
                    off += m * c
        self.size = off

    def coords(self, f: SheafMap) -> np.ndarray:
        v = la.zeros(self.size, 1)
        for n, bi, x, m, toff, off in self.rows:
            c = f.source.dim(x, n)
            v[off:off + m * c, 0] = f.comp(x, n)[toff:toff + m, :].reshape(-1)
        return v


def _D_matrix(P: _NatCoords, E: _EqSpace) -> np.ndarray:
    """Block coordinates of D(phi) as a linear function of phi's parameters."""
    S, T, k = P.S, P.T, P.k
    X = S.space
    s = _sign(k)
    M = la.zeros(E.size, P.size)
    for n, bi, x, m, toff, off in E.rows:
        c = S.dim(x, n)
        # rows_b(d_T phi_x^n): phi_x^n = sum over blocks b' of T^{n+k} visible at x
        dT = T.diff(x, n + k)[toff:toff + m, :]
        g = T.gens.get(n + k, ())
        for bj, xx, mm, off2 in layout_offsets(X, g, x):
            if (n, bj) not in P.index or not np.any(dT[:, off2:off2 + mm]):
                continue
            _, _, po = P.index[(n, bj)]
            L = dT[:, off2:off2 + mm]
            R = S.rho(x, xx, n)
            M[off:off + m * c, po:po + mm * S.dim(xx, n)] += np.kron(L, R.T)
        # - (-1)^k rows_b(phi_x^{n+1}) d_S^n; the block at its own point has theta directly
        if (n + 1, bi) in P.index and S.dim(x, n + 1):
            _, _, po = P.index[(n + 1, bi)]
            M[off:off + m * c, po:po + m * S.dim(x, n + 1)] -= s * np.kron(la.eye(m), S.diff(x, n).T)
    return M % la.get_prime()


def _precompose_matrix(P: _NatCoords, E: _EqSpace, f: SheafMap) -> np.ndarray:
    """Block coordinates of g f as a linear function of g's parameters (f of degree 0)."""
    S = f.source
    M = la.zeros(E.size, P.size)
    for n, bi, x, m, toff, off in E.rows:
        if (n, bi) in P.index:
            _, _, po = P.index[(n, bi)]
            fx = f.comp(x, n)
            M[off:off + m * S.dim(x, n), po:po + m * fx.shape[0]] = np.kron(la.eye(m), fx.T)
    return M % la.get_prime()


@dataclass(eq=False)
class SheafHomotopy:
    f: SheafMap
    g: SheafMap
    h: SheafMap

    def verify(self) -> bool:
        return (self.f - self.g) == self.h.differential()


def _has_layout(T: SheafComplex) -> bool:
    return T.gens is not None and T.check_layout()


def is_homotopic(f: SheafMap, g: SheafMap) -> SheafHomotopy | None:
    """A natural h of degree -1 with f - g = dh + hd, or None."""
    if f.source.dims != g.source.dims or f.target.dims != g.target.dims:
        raise ValueError("maps do not share endpoints")
    S, T = f.source, f.target
    if _has_layout(T):
        P = _NatCoords(S, T, -1)
        E = _EqSpace(S, T, 0)
        _guard(E.size, P.size)
        A = _D_matrix(P, E)
        b = E.coords(f - g)
        if A.shape[1] == 0:
            return SheafHomotopy(f, g, SheafMap(S, T, -1, {})) if not np.any(b) else None
        sol = la.solve(A, b)
        if sol is None:
            return None
        return SheafHomotopy(f, g, P.build(sol[:, 0]))
    return _generic_homotopy(f, g)


def _generic_homotopy(f: SheafMap, g: SheafMap) -> SheafHomotopy | None:
    """Fallback: solve in the Hom complex of representations."""
    from .sheafcx import sheaf_hom, sections_data, hom_section_to_map
    S, T = f.source, f.target
    H = sheaf_hom(S, T)
    C, fams = sections_data(H, range(S.space.n))
    diff = f - g

    def vec(phi: SheafMap, k: int) -> np.ndarray:
        out = []
        for x in range(S.space.n):
            fam = H.meta["fams"][x][k]
            v = la.zeros(fam.full, 1)
            for (y, n), o, _, r, c in fam.layout:
                if y == x:
                    v[o:o + r * c, 0] = phi.comp(x, n).reshape(-1)
            out.append(fam.coords(v))
        return np.vstack(out) if out else la.zeros(0, 1)

    gfam = fams.get(0)
    if gfam is None or not gfam.dim:
        return SheafHomotopy(f, g, SheafMap(S, T, -1, {})) if diff.is_zero() else None
    target = gfam.coords(vec(diff, 0))
    dm = C.diff(-1)
    if dm.shape[1] == 0:
        return SheafHomotopy(f, g, SheafMap(S, T, -1, {})) if not np.any(target) else None
    sol = la.solve(dm, target)
    if sol is None:
        return None
    return SheafHomotopy(f, g, hom_section_to_map(H, fams, -1, sol[:, 0]))


def homotopy_inverse(f: SheafMap) -> tuple[SheafMap, SheafHomotopy, SheafHomotopy] | None:
    """(g, g f ~ id, f g ~ id) for a chain map between fibrant sheaves, or None."""
    A, B = f.source, f.target
    if not (_has_layout(A) and _has_layout(B)):
        raise ValueError("homotopy_inverse needs Godement layouts on both ends")
    Pg = _NatCoords(B, A, 0)
    Eg = _EqSpace(B, A, 1)
    Ph = _NatCoords(A, A, -1)
    Eh = _EqSpace(A, A, 0)
    _guard(Eg.size + Eh.size, Pg.size + Ph.size)
    # D g = 0 and D h1 - g f = -id
    top = np.hstack([_D_matrix(Pg, Eg), la.zeros(Eg.size, Ph.size)])
    bot = np.hstack([(-_precompose_matrix(Pg, Eh, f)) % la.get_prime(), _D_matrix(Ph, Eh)])
    Mx = np.vstack([top, bot])
    rhs = np.vstack([la.zeros(Eg.size, 1), (-Eh.coords(identity(A))) % la.get_prime()])
    if Mx.shape[1] == 0:
        sol = la.zeros(0, 1) if not np.any(rhs) else None
    else:
        sol = la.solve(Mx, rhs)
    if sol is None:
        return None
    g = Pg.build(sol[:Pg.size, 0])
    h1 = SheafHomotopy(compose(g, f), identity(A), Ph.build(sol[Pg.size:, 0]))
    h2 = is_homotopic(compose(f, g), identity(B))
    if h2 is None:
        return None
    return g, h1, h2
