"""Complexes of sheaves of F_p vector spaces on finite spaces.

A sheaf on a finite space is a representation of its specialisation poset:
a stalk complex per point and restriction chain maps ``rho[x<=y]``. Stalks
are the values on minimal opens.

Some sheaves carry a *Godement layout* (``gens``): in degree n the stalk at y
is the concatenation of the blocks ``(x, m)`` of ``gens[n]`` with ``y <= x``,
and restrictions are the block projections. Such a sheaf is a direct sum of
coinduced sheaves ``E_x(k^m)`` and hence injective; the layout also gives free
coordinates for natural maps into it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import chaincx as cx
from . import exactla as la
from .finsite import ContinuousMap, FinSpace, LocallyClosedImmersion

__all__ = [
    "SheafComplex", "SheafMap", "Family", "constant", "skyscraper", "zero_sheaf",
    "random_sheaf", "identity", "compose", "zero_map", "sections", "sections_map",
    "pullback", "pullback_map", "pushforward", "pushforward_map", "tensor",
    "tensor_map", "swap", "assoc", "left_unitor", "right_unitor", "sheaf_hom",
    "sheaf_hom_map", "lower_shriek", "lower_shriek_map", "upper_shriek_adjoint",
    "upper_shriek_map", "unit_pull_push", "counit_pull_push", "unit_shriek",
    "counit_shriek", "shriek_to_push", "push_comp", "ushriek_comp",
    "pull_push_hom_iso", "shriek_hom_iso", "upper_hom_iso", "curry",
    "is_quasi_iso", "global_hom", "hom_section_to_map", "natural_chain_maps", "random_chain_map", "random_graded_map",
]


def _sign(n: int) -> int:
    return -1 if n % 2 else 1


# -- data -------------------------------------------------------------------------

@dataclass(eq=False)
class SheafComplex:
    space: FinSpace
    dims: dict[int, tuple[int, ...]]
    d: dict[int, tuple[np.ndarray, ...]] = field(default_factory=dict)
    res: dict[int, dict[tuple[int, int], np.ndarray]] = field(default_factory=dict)
    gens: dict[int, tuple[tuple[int, int], ...]] | None = None
    meta: dict | None = None

    def __post_init__(self):
        n = self.space.n
        dims = {}
        for k, v in self.dims.items():
            v = tuple(int(a) for a in v)
            if len(v) != n:
                raise ValueError("dims need one entry per point")
            if any(v):
                dims[int(k)] = v
        self.dims = dims
        p = la.get_prime()
        d = {}
        for k, mats in self.d.items():
            if k in dims and k + 1 in dims:
                d[k] = tuple(np.asarray(m, dtype=np.int64) % p for m in mats)
        self.d = d
        res = {}
        for k, r in self.res.items():
            if k in dims:
                res[k] = {xy: np.asarray(m, dtype=np.int64) % p for xy, m in r.items()
                          if dims[k][xy[0]] and dims[k][xy[1]]}
        self.res = res
        if self.gens is not None:
            self.gens = {k: tuple((x, m) for x, m in g if m) for k, g in self.gens.items() if k in dims}

    # accessors
    def dim(self, x: int, n: int) -> int:
        v = self.dims.get(n)
        return v[x] if v else 0

    def diff(self, x: int, n: int) -> np.ndarray:
        mats = self.d.get(n)
        if mats is None:
            return la.zeros(self.dim(x, n + 1), self.dim(x, n))
        return mats[x]

    def rho(self, x: int, y: int, n: int) -> np.ndarray:
        if x == y:
            return la.eye(self.dim(x, n))
        m = self.res.get(n, {}).get((x, y))
        if m is None:
            return la.zeros(self.dim(y, n), self.dim(x, n))
        return m

    @property
    def window(self) -> tuple[int, int]:
        if not self.dims:
            return (0, -1)
        return (min(self.dims), max(self.dims))

    def degrees(self) -> range:
        lo, hi = self.window
        return range(lo, hi + 1)

    def is_zero(self) -> bool:
        return not self.dims

    def stalk(self, x: int) -> cx.Complex:
        return cx.Complex({n: self.dim(x, n) for n in self.dims}, {n: self.diff(x, n) for n in self.d})

    def restriction(self, x: int, y: int) -> cx.GradedMap:
        return cx.ChainMap(self.stalk(x), self.stalk(y), {n: self.rho(x, y, n) for n in self.dims})

    def total_dim(self) -> int:
        return sum(sum(v) for v in self.dims.values())

    def check(self) -> bool:
        """d^2 = 0, restrictions are chain maps, and restrictions compose."""
        X = self.space
        for x in range(X.n):
            if not self.stalk(x).check():
                return False
        for x, y in X.pairs():
            for n in self.degrees():
                if not np.array_equal(la.mul(self.diff(y, n), self.rho(x, y, n)),
                                      la.mul(self.rho(x, y, n + 1), self.diff(x, n))):
                    return False
            for z in X.up(y):
                if z != y:
                    for n in self.degrees():
                        if not np.array_equal(la.mul(self.rho(y, z, n), self.rho(x, y, n)), self.rho(x, z, n)):
                            return False
        return True

    def check_layout(self) -> bool:
        """The stored Godement layout matches the stalks and restrictions."""
        if self.gens is None:
            return False
        X = self.space
        for n in self.degrees():
            g = self.gens.get(n, ())
            for y in range(X.n):
                if sum(m for x, m in g if X.le(y, x)) != self.dim(y, n):
                    return False
            for y, z in X.pairs():
                if not np.array_equal(self.rho(y, z, n), _layout_projection(X, g, y, z)):
                    return False
        return True

    def __eq__(self, other) -> bool:
        if not isinstance(other, SheafComplex) or self.dims != other.dims:
            return False
        if not self.space == other.space:
            return False
        X = self.space
        for n in self.degrees():
            for x in range(X.n):
                if not np.array_equal(self.diff(x, n), other.diff(x, n)):
                    return False
            for x, y in X.pairs():
                if not np.array_equal(self.rho(x, y, n), other.rho(x, y, n)):
                    return False
        return True

    __hash__ = None

    def to_json(self, space_ref: str | dict | None = None) -> dict:
        X = self.space
        return {
            "space": space_ref if space_ref is not None else X.to_json(),
            "stalks": {X.names[x]: self.stalk(x).to_json() for x in range(X.n)},
            "res": {f"{X.names[x]}<={X.names[y]}": self.restriction(x, y).to_json() for x, y in X.pairs()},
        }

    @classmethod
    def from_json(cls, doc: dict, space: FinSpace) -> "SheafComplex":
        stalks = [cx.Complex.from_json(doc["stalks"][space.names[x]]) for x in range(space.n)]
        degs = sorted({n for s in stalks for n in s.dims})
        dims = {n: tuple(s.dim(n) for s in stalks) for n in degs}
        d = {n: tuple(s.diff(n) for s in stalks) for n in degs}
        res = {n: {} for n in degs}
        for key, cm in doc.get("res", {}).items():
            a, b = key.split("<=")
            x, y = space.index(a), space.index(b)
            for n, rows in cm.get("maps", {}).items():
                n = int(n)
                res[n][(x, y)] = np.asarray(rows, dtype=np.int64).reshape(stalks[y].dim(n), stalks[x].dim(n))
        F = cls(space, dims, d, res)
        return _close_restrictions(F)


def _close_restrictions(F: SheafComplex) -> SheafComplex:
    """Fill restrictions along composite relations from the covering ones."""
    X = F.space
    res = {n: dict(r) for n, r in F.res.items()}
    order = sorted(range(X.n), key=lambda x: len(X.up(x)))
    for n in F.dims:
        for x, y in sorted(X.pairs(), key=lambda p: -len(X.up(p[0])) + len(X.up(p[1]))):
            if (x, y) in res.get(n, {}) or not (F.dim(x, n) and F.dim(y, n)):
                continue
            for z in X.up(x):
                if z not in (x, y) and X.le(z, y) and (x, z) in res[n]:
                    rzy = res[n].get((z, y)) if z != y else la.eye(F.dim(y, n))
                    if rzy is not None:
                        res[n][(x, y)] = la.mul(rzy, res[n][(x, z)])
                        break
    return SheafComplex(X, F.dims, F.d, res, F.gens)


def _layout_projection(X: FinSpace, g: Sequence[tuple[int, int]], y: int, z: int) -> np.ndarray:
    """Block projection from the layout stalk at y to the one at z (y <= z)."""
    src = [(x, m) for x, m in g if X.le(y, x)]
    rows = sum(m for x, m in src if X.le(z, x))
    M = la.zeros(rows, sum(m for _, m in src))
    r = c = 0
    for x, m in src:
        if X.le(z, x):
            M[r:r + m, c:c + m] = la.eye(m)
            r += m
        c += m
    return M


def layout_offsets(X: FinSpace, g: Sequence[tuple[int, int]], y: int) -> list[tuple[int, int, int, int]]:
    """(block index, x, m, offset) of the blocks visible at y."""
    out, off = [], 0
    for i, (x, m) in enumerate(g):
        if X.le(y, x):
            out.append((i, x, m, off))
            off += m
    return out


@dataclass(eq=False)
class SheafMap:
    """Graded map of sheaf complexes; ``maps[n][x]`` sends F_x^n to G_x^{n+degree}."""

    source: SheafComplex
    target: SheafComplex
    degree: int = 0
    maps: dict[int, tuple[np.ndarray, ...]] = field(default_factory=dict)

    def __post_init__(self):
        p = la.get_prime()
        out = {}
        for n, mats in self.maps.items():
            if n not in self.source.dims or (n + self.degree) not in self.target.dims:
                continue
            mats = tuple(np.asarray(m, dtype=np.int64) % p for m in mats)
            for x, m in enumerate(mats):
                if m.shape != (self.target.dim(x, n + self.degree), self.source.dim(x, n)):
                    raise ValueError(f"component ({x},{n}) has shape {m.shape}")
            if any(np.any(m) for m in mats):
                out[n] = mats
        self.maps = out

    def comp(self, x: int, n: int) -> np.ndarray:
        mats = self.maps.get(n)
        if mats is None:
            return la.zeros(self.target.dim(x, n + self.degree), self.source.dim(x, n))
        return mats[x]

    def stalk(self, x: int) -> cx.GradedMap:
        return cx.GradedMap(self.source.stalk(x), self.target.stalk(x), self.degree,
                            {n: self.comp(x, n) for n in self.source.dims})

    def is_zero(self) -> bool:
        return not self.maps

    def is_natural(self) -> bool:
        F, G, k = self.source, self.target, self.degree
        for x, y in F.space.pairs():
            for n in F.dims:
                if not np.array_equal(la.mul(G.rho(x, y, n + k), self.comp(x, n)),
                                      la.mul(self.comp(y, n), F.rho(x, y, n))):
                    return False
        return True

    def differential(self) -> "SheafMap":
        F, G, k = self.source, self.target, self.degree
        s = _sign(k)
        out = {}
        for n in F.degrees():
            out[n] = tuple(la.mul(G.diff(x, n + k), self.comp(x, n)) - s * la.mul(self.comp(x, n + 1), F.diff(x, n))
                           for x in range(F.space.n))
        return SheafMap(F, G, k + 1, out)

    def is_chain_map(self) -> bool:
        return self.degree == 0 and self.differential().is_zero()

    def _parallel(self, other: "SheafMap") -> None:
        if (self.degree != other.degree or self.source.dims != other.source.dims
                or self.target.dims != other.target.dims):
            raise ValueError("maps are not parallel")

    def __add__(self, other: "SheafMap") -> "SheafMap":
        self._parallel(other)
        X = self.source.space
        return SheafMap(self.source, self.target, self.degree,
                        {n: tuple(self.comp(x, n) + other.comp(x, n) for x in range(X.n)) for n in self.source.dims})

    def __sub__(self, other: "SheafMap") -> "SheafMap":
        return self + other.scale(-1)

    def scale(self, c: int) -> "SheafMap":
        return SheafMap(self.source, self.target, self.degree,
                        {n: tuple(c * m for m in mats) for n, mats in self.maps.items()})

    def __eq__(self, other) -> bool:
        if not isinstance(other, SheafMap):
            return False
        try:
            self._parallel(other)
        except ValueError:
            return False
        return all(np.array_equal(self.comp(x, n), other.comp(x, n))
                   for n in self.source.dims for x in range(self.source.space.n))

    __hash__ = None

    def to_json(self) -> dict:
        X = self.source.space
        return {"degree": self.degree,
                "maps": {X.names[x]: self.stalk(x).to_json()["maps"] for x in range(X.n)}}


# -- constructors -------------------------------------------------------------------

def zero_sheaf(X: FinSpace) -> SheafComplex:
    return SheafComplex(X, {}, gens={})


def constant(X: FinSpace, V: cx.Complex) -> SheafComplex:
    dims = {n: (V.dim(n),) * X.n for n in V.dims}
    d = {n: (V.diff(n),) * X.n for n in V.dims}
    res = {n: {xy: la.eye(V.dim(n)) for xy in X.pairs()} for n in V.dims}
    F = SheafComplex(X, dims, d, res)
    if X.n == 1:
        F.gens = {n: ((0, V.dim(n)),) for n in V.dims}
    return F


def skyscraper(X: FinSpace, x: int, V: cx.Complex) -> SheafComplex:
    """Coinduced sheaf E_x(V): stalk V at every y <= x, identity restrictions."""
    dims = {n: tuple(V.dim(n) if X.le(y, x) else 0 for y in range(X.n)) for n in V.dims}
    d = {n: tuple(V.diff(n) if X.le(y, x) else la.zeros(dims.get(n + 1, (0,) * X.n)[y], dims[n][y])
                  for y in range(X.n)) for n in V.dims}
    res = {n: {(a, b): la.eye(V.dim(n)) for a, b in X.pairs() if X.le(b, x)} for n in V.dims}
    return SheafComplex(X, dims, d, res, gens={n: ((x, V.dim(n)),) for n in V.dims})


def from_stalks(X: FinSpace, stalks: Sequence[cx.Complex], res: dict) -> SheafComplex:
    degs = sorted({n for s in stalks for n in s.dims})
    dims = {n: tuple(s.dim(n) for s in stalks) for n in degs}
    d = {n: tuple(s.diff(n) for s in stalks) for n in degs}
    return SheafComplex(X, dims, d, res)


def _natural_constraints(X: FinSpace, sdims: Sequence[int], tdims: Sequence[int],
                         srho, trho, pts: Sequence[int] | None = None) -> tuple[np.ndarray, list]:
    """Constraint matrix for families (phi_y: S_y -> T_y) commuting with restrictions."""
    pts = list(range(X.n)) if pts is None else list(pts)
    layout, off = [], 0
    for y in pts:
        layout.append((y, off, tdims[y], sdims[y]))
        off += tdims[y] * sdims[y]
    pos = {y: (o, r, c) for y, o, r, c in layout}
    rows = []
    ptset = set(pts)
    sub = X.subspace(pts) if pts else None
    covers = [(pts[a], pts[b]) for a, b in sub.covers()] if pts else []
    for y, z in covers:
        oy, ry, cy = pos[y]
        oz, rz, cz = pos[z]
        if not (rz and cy):
            continue
        # trho(y,z) phi_y - phi_z srho(y,z) = 0, an (rz x cy) block of equations
        R = la.zeros(rz * cy, off)
        if ry and cy:
            R[:, oy:oy + ry * cy] = np.kron(trho(y, z), la.eye(cy))
        if rz and cz:
            R[:, oz:oz + rz * cz] -= np.kron(la.eye(rz), srho(y, z).T)
        rows.append(R)
    M = np.vstack(rows) % la.get_prime() if rows else la.zeros(0, off)
    return M, layout


def random_rep(rng: np.random.Generator, X: FinSpace, max_dim: int = 2) -> tuple[tuple[int, ...], dict]:
    """Image of a random natural map from a sum of representables to a sum of coinduced sheaves."""
    p = la.get_prime()
    for _ in range(50):
        P = [int(x) for x in rng.integers(0, X.n, size=int(rng.integers(1, max_dim + 2)))]
        E = [int(x) for x in rng.integers(0, X.n, size=int(rng.integers(1, max_dim + 2)))]
        C = rng.integers(0, p, size=(len(E), len(P)))
        imgs = []
        for z in range(X.n):
            cols = [i for i, x in enumerate(P) if X.le(x, z)]
            rows = [j for j, y in enumerate(E) if X.le(z, y)]
            Mz = C[np.ix_(rows, cols)] if rows and cols else la.zeros(len(rows), len(cols))
            imgs.append((rows, cols, Mz, cx._colspace(Mz % p) if Mz.size else la.zeros(len(rows), 0)))
        dims = tuple(B.shape[1] for *_, B in imgs)
        if 0 < max(dims, default=0) <= max_dim:
            break
    res = {}
    for y, z in X.pairs():
        ry, _, _, By = imgs[y]
        rz, _, _, Bz = imgs[z]
        if By.shape[1] and Bz.shape[1]:
            sel = la.zeros(len(rz), len(ry))
            for a, j in enumerate(rz):
                sel[a, ry.index(j)] = 1
            res[(y, z)] = la.solve(Bz, la.mul(sel, By))
    return dims, res


def random_sheaf(rng: np.random.Generator, X: FinSpace, max_dim: int = 2,
                 window: tuple[int, int] = (0, 1)) -> SheafComplex:
    """Random bounded sheaf complex with random natural differentials, d^2 = 0."""
    lo, hi = window
    if not (0 <= max_dim <= 6) or not (0 <= hi - lo <= 6):
        raise ValueError("random sheaves need dims <= 6 and a window of at most 7 degrees")
    reps = {n: random_rep(rng, X, max_dim) for n in range(lo, hi + 1)}
    dims = {n: r[0] for n, r in reps.items()}
    res = {n: r[1] for n, r in reps.items()}
    G = SheafComplex(X, dims, {}, res)
    d: dict[int, tuple] = {}
    prev = None
    for n in range(lo, hi):
        sd, td = dims[n], dims[n + 1]
        M, layout = _natural_constraints(X, sd, td, lambda a, b, n=n: G.rho(a, b, n),
                                         lambda a, b, n=n: G.rho(a, b, n + 1))
        extra = []
        if prev is not None:
            # d^n d^{n-1} = 0, linear in d^n
            for y, o, r, c in layout:
                if r and c:
                    R = la.zeros(r * prev[y].shape[1], M.shape[1])
                    R[:, o:o + r * c] = np.kron(la.eye(r), prev[y].T)
                    extra.append(R)
        A = np.vstack([M] + extra) if extra else M
        K = la.kernel(A) if A.shape[1] else la.zeros(0, 0)
        if K.shape[1]:
            v = la.mul(K, rng.integers(0, la.get_prime(), size=(K.shape[1], 1)))[:, 0]
            if rng.random() < 0.2:
                v = np.zeros_like(v)
        else:
            v = np.zeros(A.shape[1], dtype=np.int64)
        mats = tuple(v[o:o + r * c].reshape(r, c) for y, o, r, c in layout)
        d[n] = mats
        prev = mats
    return SheafComplex(X, dims, d, res)


# -- morphism algebra ---------------------------------------------------------------

def identity(F: SheafComplex) -> SheafMap:
    return SheafMap(F, F, 0, {n: tuple(la.eye(F.dim(x, n)) for x in range(F.space.n)) for n in F.dims})


def zero_map(F: SheafComplex, G: SheafComplex, degree: int = 0) -> SheafMap:
    return SheafMap(F, G, degree, {})


def compose(g: SheafMap, f: SheafMap) -> SheafMap:
    """g after f."""
    if f.target.dims != g.source.dims:
        raise ValueError("composition endpoints do not match")
    X = f.source.space
    return SheafMap(f.source, g.target, f.degree + g.degree,
                    {n: tuple(la.mul(g.comp(x, n + f.degree), f.comp(x, n)) for x in range(X.n))
                     for n in f.source.dims})


def compose_all(*fs: SheafMap) -> SheafMap:
    """Left-to-right path composition: compose_all(f, g, h) = h g f."""
    out = fs[0]
    for f in fs[1:]:
        out = compose(f, out)
    return out


def is_quasi_iso(f: SheafMap) -> bool:
    """Stalkwise quasi-isomorphism (cone acyclic at every point)."""
    return f.degree == 0 and all(cx.is_quasi_iso(f.stalk(x)) for x in range(f.source.space.n))


def sheaf_cone(f: SheafMap) -> SheafComplex:
    X = f.source.space
    stalks = [cx.cone(f.stalk(x)) for x in range(X.n)]
    res = {}
    for x, y in X.pairs():
        cm = cx.cone_map(f.stalk(x), f.stalk(y), f.source.restriction(x, y), f.target.restriction(x, y))
        for n, m in cm.maps.items():
            res.setdefault(n, {})[(x, y)] = m
    return from_stalks(X, stalks, res)


# -- family spaces (limits and ends) ----------------------------------------------------

@dataclass
class Family:
    """A subspace of a direct sum of blocks, with a pivot-canonical basis."""

    layout: list  # (key, offset, size) or richer tuples, offsets into the full vector
    K: np.ndarray
    free: np.ndarray

    @property
    def full(self) -> int:
        return self.K.shape[0]

    @property
    def dim(self) -> int:
        return self.K.shape[1]

    def coords(self, V: np.ndarray) -> np.ndarray:
        return V[self.free] if self.dim else la.zeros(0, V.shape[1])


def _family(layout: list, full: int, constraints: np.ndarray) -> Family:
    K = la.kernel(constraints) if constraints.shape[0] else la.eye(full)
    free = la.free_rows(K) if K.shape[1] else np.zeros(0, dtype=np.int64)
    return Family(layout, K, free)


def _section_family(F: SheafComplex, S: Sequence[int], n: int) -> Family:
    X = F.space
    S = sorted(S)
    layout, off = [], 0
    for y in S:
        layout.append((y, off, F.dim(y, n)))
        off += F.dim(y, n)
    pos = {y: (o, k) for y, o, k in layout}
    rows = []
    if S:
        sub = X.subspace(S)
        for a, b in sub.covers():
            y, z = S[a], S[b]
            oy, ky = pos[y]
            oz, kz = pos[z]
            if kz:
                R = la.zeros(kz, off)
                if ky:
                    R[:, oy:oy + ky] = F.rho(y, z, n)
                R[:, oz:oz + kz] -= la.eye(kz)
                rows.append(R)
    M = np.vstack(rows) % la.get_prime() if rows else la.zeros(0, off)
    return _family(layout, off, M)


def _restrict_family_vector(src: Family, tgt: Family) -> np.ndarray:
    """Matrix selecting tgt's blocks out of src's full vector (blocks keyed identically)."""
    spos = {blk[0]: (blk[1], blk[2]) for blk in src.layout}
    M = la.zeros(tgt.full, src.full)
    for blk in tgt.layout:
        key, o, k = blk[0], blk[1], blk[2]
        so, sk = spos[key]
        M[o:o + k, so:so + sk] = la.eye(k)
    return M


def sections_data(F: SheafComplex, S: Iterable[int]) -> tuple[cx.Complex, dict[int, Family]]:
    S = sorted(set(S))
    fams = {n: _section_family(F, S, n) for n in F.degrees()}
    dims = {n: f.dim for n, f in fams.items()}
    d = {}
    for n in F.degrees():
        if n + 1 not in fams or not fams[n].dim or not fams[n + 1].dim:
            continue
        src, tgt = fams[n], fams[n + 1]
        D = la.zeros(tgt.full, src.full)
        for y, o, k in src.layout:
            to, tk = next((b[1], b[2]) for b in tgt.layout if b[0] == y)
            if k and tk:
                D[to:to + tk, o:o + k] = F.diff(y, n)
        d[n] = tgt.coords(la.mul(D, src.K))
    return cx.Complex(dims, d), fams


def sections(F: SheafComplex, S: Iterable[int] | None = None) -> cx.Complex:
    """Limit of F over the subposet S (all of X by default)."""
    if S is None:
        S = range(F.space.n)
    return sections_data(F, S)[0]


def sections_map(f: SheafMap, S: Iterable[int] | None = None) -> cx.GradedMap:
    X = f.source.space
    S = sorted(set(range(X.n) if S is None else S))
    A, fa = sections_data(f.source, S)
    B, fb = sections_data(f.target, S)
    maps = {}
    for n in f.source.degrees():
        src, tgt = fa[n], fb.get(n + f.degree)
        if tgt is None or not src.dim or not tgt.dim:
            continue
        M = la.zeros(tgt.full, src.full)
        for (y, o, k), (_, to, tk) in zip(src.layout, tgt.layout):
            if k and tk:
                M[to:to + tk, o:o + k] = f.comp(y, n)
        maps[n] = tgt.coords(la.mul(M, src.K))
    return cx.GradedMap(A, B, f.degree, maps)


def global_hom(F: SheafComplex, G: SheafComplex) -> cx.Complex:
    """Hom complex of F, G as representations."""
    return sections(sheaf_hom(F, G))


def hom_section_to_map(H: SheafComplex, fams: dict[int, Family], k: int, v: np.ndarray) -> SheafMap:
    """Decode a global section of degree k of ``H = sheaf_hom(S, T)`` (in ``fams[k]``
    coordinates, as returned by :func:`sections_data`) into a natural map S -> T."""
    S, T = H.meta["F"], H.meta["G"]
    X = S.space
    comp = {}
    fam = fams.get(k)
    if fam is not None and fam.dim:
        full = la.mul(fam.K, v.reshape(-1, 1))
        for y, o, kk in fam.layout:
            loc_fam = H.meta["fams"][y][k]
            loc = la.mul(loc_fam.K, full[o:o + kk]) if kk else la.zeros(loc_fam.full, 1)
            for (yy, n), oo, _, r, c in loc_fam.layout:
                if yy == y:
                    comp[(y, n)] = loc[oo:oo + r * c, 0].reshape(r, c)
    maps = {n: tuple(comp.get((x, n), la.zeros(T.dim(x, n + k), S.dim(x, n))) for x in range(X.n))
            for n in S.dims}
    return SheafMap(S, T, k, maps)


def natural_chain_maps(S: SheafComplex, T: SheafComplex) -> list[SheafMap]:
    """A basis of the natural chain maps S -> T (degree-0 cocycles of the Hom complex)."""
    H = sheaf_hom(S, T)
    C, fams = sections_data(H, range(S.space.n))
    if not C.dim(0):
        return []
    Z = la.kernel(C.diff(0))
    return [hom_section_to_map(H, fams, 0, Z[:, i]) for i in range(Z.shape[1])]


def random_chain_map(rng: np.random.Generator, S: SheafComplex, T: SheafComplex) -> SheafMap:
    """A uniformly random natural chain map S -> T."""
    basis = natural_chain_maps(S, T)
    out = zero_map(S, T)
    for b in basis:
        out = out + b.scale(int(rng.integers(0, la.get_prime())))
    return out


def random_graded_map(rng: np.random.Generator, S: SheafComplex, T: SheafComplex, degree: int = 0) -> SheafMap:
    """A uniformly random natural graded map S -> T of the given degree (not a chain map in general)."""
    H = sheaf_hom(S, T)
    C, fams = sections_data(H, range(S.space.n))
    v = rng.integers(0, la.get_prime(), size=C.dim(degree)).astype(np.int64)
    return hom_section_to_map(H, fams, degree, v)


# -- pullback and pushforward ---------------------------------------------------------------

def pullback(a: ContinuousMap, F: SheafComplex) -> SheafComplex:
    """Stalk at y is F at a(y)."""
    Y = a.source
    dims = {n: tuple(F.dim(a(y), n) for y in range(Y.n)) for n in F.dims}
    d = {n: tuple(F.diff(a(y), n) for y in range(Y.n)) for n in F.dims}
    res = {n: {(y, z): F.rho(a(y), a(z), n) for y, z in Y.pairs()} for n in F.dims}
    return SheafComplex(Y, dims, d, res)


def pullback_map(a: ContinuousMap, f: SheafMap, source: SheafComplex | None = None,
                 target: SheafComplex | None = None) -> SheafMap:
    S = source or pullback(a, f.source)
    T = target or pullback(a, f.target)
    return SheafMap(S, T, f.degree, {n: tuple(f.comp(a(y), n) for y in range(a.source.n)) for n in f.source.dims})


def pushforward(a: ContinuousMap, F: SheafComplex) -> SheafComplex:
    """Stalk at x is the sections of F over the preimage of U_x."""
    X = a.target
    data = [sections_data(F, a.preimage(X.up(x))) for x in range(X.n)]
    degs = sorted({n for C, _ in data for n in C.dims})
    dims = {n: tuple(C.dim(n) for C, _ in data) for n in degs}
    d = {n: tuple(C.diff(n) for C, _ in data) for n in degs}
    res = {}
    for x, y in X.pairs():
        for n in degs:
            src, tgt = data[x][1].get(n), data[y][1].get(n)
            if src is None or tgt is None or not src.dim or not tgt.dim:
                continue
            res.setdefault(n, {})[(x, y)] = tgt.coords(la.mul(_restrict_family_vector(src, tgt), src.K))
    out = SheafComplex(X, dims, d, res)
    out.meta = {"kind": "push", "map": a, "F": F, "fams": [fam for _, fam in data]}
    return out


def pushforward_map(a: ContinuousMap, f: SheafMap, source: SheafComplex | None = None,
                    target: SheafComplex | None = None) -> SheafMap:
    S = source or pushforward(a, f.source)
    T = target or pushforward(a, f.target)
    X = a.target
    maps = {}
    for n in f.source.dims:
        mats = []
        for x in range(X.n):
            src = S.meta["fams"][x].get(n)
            tgt = T.meta["fams"][x].get(n + f.degree)
            if src is None or tgt is None or not src.dim or not tgt.dim:
                mats.append(la.zeros(T.dim(x, n + f.degree), S.dim(x, n)))
                continue
            M = la.zeros(tgt.full, src.full)
            for (y, o, k), (_, to, tk) in zip(src.layout, tgt.layout):
                if k and tk:
                    M[to:to + tk, o:o + k] = f.comp(y, n)
            mats.append(tgt.coords(la.mul(M, src.K)))
        maps[n] = tuple(mats)
    return SheafMap(S, T, f.degree, maps)


def unit_pull_push(a: ContinuousMap, F: SheafComplex, target: SheafComplex | None = None) -> SheafMap:
    """F -> a_* a^{-1} F."""
    T = target or pushforward(a, pullback(a, F))
    X = a.target
    maps = {}
    for n in F.dims:
        mats = []
        for x in range(X.n):
            fam = T.meta["fams"][x].get(n)
            if fam is None or not fam.dim or not F.dim(x, n):
                mats.append(la.zeros(T.dim(x, n), F.dim(x, n)))
                continue
            M = la.zeros(fam.full, F.dim(x, n))
            for y, o, k in fam.layout:
                if k:
                    M[o:o + k, :] = F.rho(x, a(y), n)
            mats.append(fam.coords(M))
        maps[n] = tuple(mats)
    return SheafMap(F, T, 0, maps)


def counit_pull_push(a: ContinuousMap, G: SheafComplex, middle: SheafComplex | None = None) -> SheafMap:
    """a^{-1} a_* G -> G, evaluation at y."""
    P = middle or pushforward(a, G)
    S = pullback(a, P)
    Y = a.source
    maps = {}
    for n in G.dims:
        mats = []
        for y in range(Y.n):
            fam = P.meta["fams"][a(y)].get(n)
            if fam is None or not fam.dim or not G.dim(y, n):
                mats.append(la.zeros(G.dim(y, n), S.dim(y, n)))
                continue
            o, k = next((b[1], b[2]) for b in fam.layout if b[0] == y)
            mats.append(fam.K[o:o + k, :])
        maps[n] = tuple(mats)
    return SheafMap(S, G, 0, maps)


def push_comp(a: ContinuousMap, b: ContinuousMap, F: SheafComplex) -> SheafMap:
    """(a b)_* F -> a_* b_* F, restricting a section to each b-preimage."""
    from .finsite import compose_maps
    ab = compose_maps(a, b)
    S = pushforward(ab, F)
    M1 = pushforward(b, F)
    T = pushforward(a, M1)
    X = a.target
    maps = {}
    for n in F.dims:
        mats = []
        for x in range(X.n):
            src = S.meta["fams"][x].get(n)
            tgt = T.meta["fams"][x].get(n)
            if src is None or tgt is None or not src.dim or not tgt.dim:
                mats.append(la.zeros(T.dim(x, n), S.dim(x, n)))
                continue
            # tgt full vector: for each y in a^{-1}(U_x), coordinates in (b_* F)_y
            V = la.zeros(tgt.full, src.dim)
            for y, o, k in tgt.layout:
                if not k:
                    continue
                inner = M1.meta["fams"][y][n]
                sel = _restrict_family_vector(src, inner)
                V[o:o + k, :] = inner.coords(la.mul(sel, src.K))
            mats.append(tgt.coords(V))
        maps[n] = tuple(mats)
    return SheafMap(S, T, 0, maps)


# -- tensor -------------------------------------------------------------------------------

def tensor(F: SheafComplex, G: SheafComplex) -> SheafComplex:
    if not F.space == G.space:
        raise ValueError("sheaves live on different spaces")
    X = F.space
    stalks = [cx.tensor(F.stalk(x), G.stalk(x)) for x in range(X.n)]
    res = {}
    for x, y in X.pairs():
        m = cx.tensor_map(F.restriction(x, y), G.restriction(x, y))
        for n, c in m.maps.items():
            res.setdefault(n, {})[(x, y)] = c
    return from_stalks(X, stalks, res)


def _stalkwise(S: SheafComplex, T: SheafComplex, degree: int, fn: Callable[[int], cx.GradedMap]) -> SheafMap:
    X = S.space
    stalk_maps = [fn(x) for x in range(X.n)]
    return SheafMap(S, T, degree, {n: tuple(stalk_maps[x].comp(n) for x in range(X.n)) for n in S.dims})


def tensor_map(f: SheafMap, g: SheafMap, source: SheafComplex | None = None,
               target: SheafComplex | None = None) -> SheafMap:
    S = source or tensor(f.source, g.source)
    T = target or tensor(f.target, g.target)
    return _stalkwise(S, T, f.degree + g.degree, lambda x: cx.tensor_map(f.stalk(x), g.stalk(x)))


def swap(F: SheafComplex, G: SheafComplex) -> SheafMap:
    return _stalkwise(tensor(F, G), tensor(G, F), 0, lambda x: cx.swap_map(F.stalk(x), G.stalk(x)))


def assoc(E: SheafComplex, F: SheafComplex, G: SheafComplex) -> SheafMap:
    return _stalkwise(tensor(tensor(E, F), G), tensor(E, tensor(F, G)), 0,
                      lambda x: cx.assoc_map(E.stalk(x), F.stalk(x), G.stalk(x)))


def unit_object(X: FinSpace) -> SheafComplex:
    return constant(X, cx.point_complex(0))


def left_unitor(F: SheafComplex) -> SheafMap:
    return _stalkwise(tensor(unit_object(F.space), F), F, 0, lambda x: cx.left_unitor(F.stalk(x)))


def right_unitor(F: SheafComplex) -> SheafMap:
    return _stalkwise(tensor(F, unit_object(F.space)), F, 0, lambda x: cx.right_unitor(F.stalk(x)))


# -- sheaf Hom ----------------------------------------------------------------------------------

def _hom_family(F: SheafComplex, G: SheafComplex, pts: Sequence[int], k: int) -> Family:
    """Degree-k natural families (phi_y: F_y^n -> G_y^{n+k}) over the points pts."""
    X = F.space
    pts = sorted(pts)
    layout, off = [], 0
    for y in pts:
        for n in sorted(F.dims):
            r, c = G.dim(y, n + k), F.dim(y, n)
            if r and c:
                layout.append(((y, n), off, r * c, r, c))
                off += r * c
    pos = {blk[0]: blk for blk in layout}
    rows = []
    if pts:
        sub = X.subspace(pts)
        for a, b in sub.covers():
            y, z = pts[a], pts[b]
            for n in sorted(F.dims):
                rz, cy = G.dim(z, n + k), F.dim(y, n)
                if not (rz and cy):
                    continue
                R = la.zeros(rz * cy, off)
                if (y, n) in pos:
                    _, o, _, r, c = pos[(y, n)]
                    R[:, o:o + r * c] = np.kron(G.rho(y, z, n + k), la.eye(c))
                if (z, n) in pos:
                    _, o, _, r, c = pos[(z, n)]
                    R[:, o:o + r * c] -= np.kron(la.eye(r), F.rho(y, z, n).T)
                rows.append(R)
    M = np.vstack(rows) % la.get_prime() if rows else la.zeros(0, off)
    return _family(layout, off, M)


def _hom_D(F: SheafComplex, G: SheafComplex, src: Family, tgt: Family, k: int) -> np.ndarray:
    """Full-vector matrix of D: degree k families -> degree k+1 families."""
    s = _sign(k)
    tpos = {blk[0]: blk for blk in tgt.layout}
    D = la.zeros(tgt.full, src.full)
    for (y, n), o, _, r, c in src.layout:
        if (y, n) in tpos:
            _, to, _, tr, tc = tpos[(y, n)]
            D[to:to + tr * tc, o:o + r * c] += np.kron(G.diff(y, n + k), la.eye(c))
        if (y, n - 1) in tpos:
            _, to, _, tr, tc = tpos[(y, n - 1)]
            D[to:to + tr * tc, o:o + r * c] -= s * np.kron(la.eye(r), F.diff(y, n - 1).T)
    return D % la.get_prime()


def _hom_range(F: SheafComplex, G: SheafComplex) -> range:
    if F.is_zero() or G.is_zero():
        return range(0)
    return range(G.window[0] - F.window[1], G.window[1] - F.window[0] + 1)


def sheaf_hom(F: SheafComplex, G: SheafComplex) -> SheafComplex:
    """Stalk at x: natural families over U_x, restriction = truncation."""
    if not F.space == G.space:
        raise ValueError("sheaves live on different spaces")
    X = F.space
    ks = list(_hom_range(F, G))
    fams = [{k: _hom_family(F, G, X.up(x), k) for k in ks} for x in range(X.n)]
    dims = {k: tuple(fams[x][k].dim for x in range(X.n)) for k in ks}
    d = {}
    for k in ks:
        if k + 1 in dims:
            d[k] = tuple(fams[x][k + 1].coords(la.mul(_hom_D(F, G, fams[x][k], fams[x][k + 1], k), fams[x][k].K))
                         for x in range(X.n))
    res = {}
    for x, y in X.pairs():
        for k in ks:
            src, tgt = fams[x][k], fams[y][k]
            if src.dim and tgt.dim:
                res.setdefault(k, {})[(x, y)] = tgt.coords(la.mul(_restrict_family_vector(src, tgt), src.K))
    out = SheafComplex(X, dims, d, res)
    out.meta = {"kind": "hom", "F": F, "G": G, "fams": fams}
    return out


def _hom_transform(S: SheafComplex, T: SheafComplex, block_fn) -> SheafMap:
    """Map between Hom sheaves given blockwise on full family vectors.

    ``block_fn(x, k, src_family, tgt_family)`` returns the full-vector matrix.
    """
    X = S.space
    maps = {}
    for k in S.dims:
        mats = []
        for x in range(X.n):
            src = S.meta["fams"][x].get(k)
            tgt = T.meta["fams"][x].get(k)
            if src is None or tgt is None or not src.dim or not tgt.dim:
                mats.append(la.zeros(T.dim(x, k), S.dim(x, k)))
                continue
            M = block_fn(x, k, src, tgt)
            mats.append(tgt.coords(la.mul(M, src.K)))
        maps[k] = tuple(mats)
    return SheafMap(S, T, 0, maps)


def sheaf_hom_map(f: SheafMap | None, g: SheafMap | None, F: SheafComplex | None = None,
                  G: SheafComplex | None = None, source: SheafComplex | None = None,
                  target: SheafComplex | None = None) -> SheafMap:
    """Hom(f, g): Hom(F, G) -> Hom(F', G') for chain maps f: F' -> F and g: G -> G'.

    Either slot may be None, meaning the identity of F (resp. G).
    """
    F = f.target if f is not None else F
    G = g.source if g is not None else G
    Fp = f.source if f is not None else F
    Gp = g.target if g is not None else G
    S = source or sheaf_hom(F, G)
    T = target or sheaf_hom(Fp, Gp)

    def block(x, k, src, tgt):
        spos = {blk[0]: blk for blk in src.layout}
        M = la.zeros(tgt.full, src.full)
        for (y, n), to, _, tr, tc in tgt.layout:
            if (y, n) not in spos:
                continue
            _, so, _, sr, sc = spos[(y, n)]
            left = g.comp(y, n + k) if g is not None else la.eye(sr)
            right = f.comp(y, n) if f is not None else la.eye(sc)
            # vec(L P R) = kron(L, R^T) vec(P)
            M[to:to + tr * tc, so:so + sr * sc] = np.kron(left, right.T)
        return M % la.get_prime()

    return _hom_transform(S, T, block)


def curry(E: SheafComplex, F: SheafComplex, G: SheafComplex) -> SheafMap:
    """Hom(E (x) F, G) -> Hom(E, Hom(F, G)), theta -> (e -> (f -> theta(e (x) f)))."""
    X = E.space
    EF = tensor(E, F)
    S = sheaf_hom(EF, G)
    HFG = sheaf_hom(F, G)
    T = sheaf_hom(E, HFG)
    hf = HFG.meta["fams"]
    p = la.get_prime()

    def block(x, k, src, tgt):
        spos = {blk[0]: blk for blk in src.layout}
        M = la.zeros(tgt.full, src.full)
        for (y, a), to, _, tr, tc in tgt.layout:
            # psi_y^a: E_y^a -> Hom(F,G)_y^{a+k}; column i is a family over U_y
            inner = hf[y][a + k]
            for i in range(tc):
                cols = la.zeros(inner.full, src.full)
                for (z, b), io, _, ir, ic in inner.layout:
                    # chi_z^b: F_z^b -> G_z^{a+b+k}; chi = sum_j v_j theta_z[:, (j, .)] with v = rho(e_i)
                    key = (z, a + b)
                    if key not in spos:
                        continue
                    _, so, _, sr, sc = spos[key]
                    lay = {aa: (oo, ra, rb) for aa, oo, ra, rb in cx._tensor_layout(E.stalk(z), F.stalk(z), a + b)}
                    if a not in lay:
                        continue
                    oo, ra, rb = lay[a]
                    v = E.rho(y, z, a)[:, i]
                    for jj in range(ra):
                        if v[jj] == 0:
                            continue
                        for row in range(sr):
                            for col in range(rb):
                                # chi[row, col] += v_jj * theta[row, oo + jj*rb + col]
                                cols[io + row * ic + col, so + row * sc + oo + jj * rb + col] += v[jj]
                cols %= p
                coords = inner.coords(cols)
                for r in range(tr):
                    M[to + r * tc + i, :] = coords[r]
        return M % p

    return _hom_transform(S, T, block)


def pull_push_hom_iso(a: ContinuousMap, E: SheafComplex, F: SheafComplex) -> SheafMap:
    """a_* Hom(a^{-1} E, F) -> Hom(E, a_* F), phi -> (e -> (phi_y(rho e))_y)."""
    aE = pullback(a, E)
    H = sheaf_hom(aE, F)
    S = pushforward(a, H)
    PF = pushforward(a, F)
    T = sheaf_hom(E, PF)
    X = a.target
    p = la.get_prime()
    maps = {}
    for k in S.dims:
        mats = []
        for x in range(X.n):
            src = S.meta["fams"][x].get(k)  # sections of H over a^{-1}(U_x): blocks (y, dim H_y^k)
            tgt = T.meta["fams"][x].get(k)
            if src is None or tgt is None or not src.dim or not tgt.dim:
                mats.append(la.zeros(T.dim(x, k), S.dim(x, k)))
                continue
            # expand a section (coords in H_y for each y) into families phi_y: F... full vectors
            out = la.zeros(tgt.full, src.dim)
            spos = {blk[0]: blk for blk in src.layout}
            for col in range(src.dim):
                sec = src.K[:, col]
                phi = {}
                for y, o, kk in src.layout:
                    if kk:
                        full = la.mul(H.meta["fams"][y][k].K, sec[o:o + kk].reshape(-1, 1))[:, 0]
                        lay = {blk[0]: blk for blk in H.meta["fams"][y][k].layout}
                        phi[y] = (full, lay)
                for (xp, n), to, _, tr, tc in tgt.layout:
                    # psi_{xp}^n: E_{xp}^n -> (a_* F)_{xp}^{n+k}
                    pf = PF.meta["fams"][xp][n + k]
                    for i in range(tc):
                        vec = la.zeros(pf.full, 1)
                        for y, po, pk in pf.layout:
                            if not pk or y not in phi:
                                continue
                            full, lay = phi[y]
                            if (y, n) not in lay:
                                continue
                            _, ho, _, hr, hc = lay[(y, n)]
                            mat = full[ho:ho + hr * hc].reshape(hr, hc)
                            e = E.rho(xp, a(y), n)[:, i]
                            vec[po:po + pk, 0] = la.mul(mat, e.reshape(-1, 1))[:, 0]
                        coords = pf.coords(vec % p)[:, 0]
                        for r in range(tr):
                            out[to + r * tc + i, col] = coords[r]
            mats.append(tgt.coords(out % p))
        maps[k] = tuple(mats)
    return SheafMap(S, T, 0, maps)


# -- extension by zero and exceptional restriction ---------------------------------------------------

def lower_shriek(j: LocallyClosedImmersion, F: SheafComplex) -> SheafComplex:
    """Extension by zero along a locally closed immersion."""
    X = j.ambient
    loc = [j.local(x) for x in range(X.n)]
    dims = {n: tuple(F.dim(loc[x], n) if loc[x] is not None else 0 for x in range(X.n)) for n in F.dims}
    d = {n: tuple(F.diff(loc[x], n) if loc[x] is not None
                  else la.zeros(dims.get(n + 1, (0,) * X.n)[x], dims[n][x]) for x in range(X.n)) for n in F.dims}
    res = {n: {(x, y): F.rho(loc[x], loc[y], n) for x, y in X.pairs()
               if loc[x] is not None and loc[y] is not None} for n in F.dims}
    out = SheafComplex(X, dims, d, res)
    if F.gens is not None and j.is_closed:
        # closed pushforward keeps coinduced summands coinduced
        out.gens = {n: tuple((j.subset[x], m) for x, m in g) for n, g in F.gens.items()}
    return out


def lower_shriek_map(j: LocallyClosedImmersion, f: SheafMap, source=None, target=None) -> SheafMap:
    S = source or lower_shriek(j, f.source)
    T = target or lower_shriek(j, f.target)
    X = j.ambient
    loc = [j.local(x) for x in range(X.n)]
    return SheafMap(S, T, f.degree, {n: tuple(f.comp(loc[x], n) if loc[x] is not None
                                              else la.zeros(T.dim(x, n + f.degree), S.dim(x, n))
                                              for x in range(X.n)) for n in f.source.dims})


def _ushriek_basis(j: LocallyClosedImmersion, F: SheafComplex, s: int, n: int) -> np.ndarray:
    """Basis (columns) of ker(F_s -> prod of F_w, w in U_s outside S) for s in S."""
    X = F.space
    Sset = set(j.subset)
    out_pts = [w for w in X.up(s) if w not in Sset]
    if F.gens is not None:
        g = F.gens.get(n, ())
        cols = []
        for _, x, m, off in layout_offsets(X, g, s):
            if x in Sset:
                cols.extend(range(off, off + m))
        B = la.zeros(F.dim(s, n), len(cols))
        for c, r in enumerate(cols):
            B[r, c] = 1
        return B
    if not out_pts:
        return la.eye(F.dim(s, n))
    M = np.vstack([F.rho(s, w, n) for w in out_pts])
    return la.kernel(M)


def upper_shriek_adjoint(j: LocallyClosedImmersion, F: SheafComplex) -> SheafComplex:
    """Right adjoint of extension by zero; stalks are subspaces of F's stalks."""
    X, S = j.ambient, j.space
    bases = {n: [_ushriek_basis(j, F, s, n) for s in j.subset] for n in F.dims}
    frees = {n: [la.free_rows(B) if B.shape[1] else np.zeros(0, dtype=np.int64) for B in bs]
             for n, bs in bases.items()}
    dims = {n: tuple(B.shape[1] for B in bs) for n, bs in bases.items()}

    def coords(n, i, V):
        return V[frees[n][i]] if bases[n][i].shape[1] else la.zeros(0, V.shape[1])

    d = {}
    for n in F.dims:
        if n + 1 in bases:
            d[n] = tuple(coords(n + 1, i, la.mul(F.diff(s, n), bases[n][i])) for i, s in enumerate(j.subset))
    res = {}
    for a, b in S.pairs():
        sa, sb = j.subset[a], j.subset[b]
        for n in F.dims:
            if bases[n][a].shape[1] and bases[n][b].shape[1]:
                res.setdefault(n, {})[(a, b)] = coords(n, b, la.mul(F.rho(sa, sb, n), bases[n][a]))
    out = SheafComplex(S, dims, d, res)
    if F.gens is not None:
        out.gens = {n: tuple((j.local(x), m) for x, m in g if j.local(x) is not None) for n, g in F.gens.items()}
    out.meta = {"kind": "ushriek", "j": j, "F": F, "bases": bases, "frees": frees}
    return out


def upper_shriek_map(j: LocallyClosedImmersion, f: SheafMap, source=None, target=None) -> SheafMap:
    S = source or upper_shriek_adjoint(j, f.source)
    T = target or upper_shriek_adjoint(j, f.target)
    mb, tb = S.meta["bases"], T.meta["bases"]
    tf = T.meta["frees"]
    maps = {}
    for n in f.source.dims:
        mats = []
        for i, s in enumerate(j.subset):
            src = mb[n][i]
            tgt = tb.get(n + f.degree, [la.zeros(0, 0)] * len(j.subset))[i]
            if not src.shape[1] or not tgt.shape[1]:
                mats.append(la.zeros(tgt.shape[1], src.shape[1]))
                continue
            mats.append(la.mul(f.comp(s, n), src)[tf[n + f.degree][i]])
        maps[n] = tuple(mats)
    return SheafMap(S, T, f.degree, maps)


def ushriek_embedding(U: SheafComplex) -> dict[int, list[np.ndarray]]:
    """Stalkwise inclusions of j^! F into F."""
    return U.meta["bases"]


def counit_shriek(j: LocallyClosedImmersion, G: SheafComplex, middle: SheafComplex | None = None) -> SheafMap:
    """j_! j^! G -> G."""
    U = middle or upper_shriek_adjoint(j, G)
    S = lower_shriek(j, U)
    X = j.ambient
    maps = {}
    for n in G.dims:
        mats = []
        for x in range(X.n):
            i = j.local(x)
            if i is None or n not in U.meta["bases"]:
                mats.append(la.zeros(G.dim(x, n), S.dim(x, n)))
            else:
                mats.append(U.meta["bases"][n][i])
        maps[n] = tuple(mats)
    return SheafMap(S, G, 0, maps)


def unit_shriek(j: LocallyClosedImmersion, F: SheafComplex) -> SheafMap:
    """F -> j^! j_! F (an isomorphism)."""
    L = lower_shriek(j, F)
    T = upper_shriek_adjoint(j, L)
    # j^! j_! F sits inside j_! F with full stalks on S, so the coordinate map is a row selection
    maps = {n: tuple(la.eye(F.dim(i, n))[T.meta["frees"][n][i]]
                     if T.dim(i, n) else la.zeros(0, F.dim(i, n)) for i in range(len(j.subset)))
            for n in F.dims}
    return SheafMap(F, T, 0, maps)


def shriek_to_push(j: LocallyClosedImmersion, F: SheafComplex, target: SheafComplex | None = None) -> SheafMap:
    """j_! F -> j_* F; at a point of S the section over S n U_x is its stalk."""
    S = lower_shriek(j, F)
    T = target or pushforward(j.map, F)
    X = j.ambient
    maps = {}
    for n in F.dims:
        mats = []
        for x in range(X.n):
            i = j.local(x)
            fam = T.meta["fams"][x].get(n)
            if i is None or fam is None or not fam.dim or not F.dim(i, n):
                mats.append(la.zeros(T.dim(x, n), S.dim(x, n)))
                continue
            M = la.zeros(fam.full, F.dim(i, n))
            for y, o, k in fam.layout:
                if k:
                    M[o:o + k, :] = F.rho(i, y, n)
            mats.append(fam.coords(M))
        maps[n] = tuple(mats)
    return SheafMap(S, T, 0, maps)


def ushriek_comp(outer: LocallyClosedImmersion, inner: LocallyClosedImmersion, F: SheafComplex) -> SheafMap:
    """(outer inner)^! F -> inner^! outer^! F, both viewed inside F's stalks."""
    from .finsite import compose_immersions
    ab = compose_immersions(outer, inner)
    S = upper_shriek_adjoint(ab, F)
    M1 = upper_shriek_adjoint(outer, F)
    T = upper_shriek_adjoint(inner, M1)
    maps = {}
    for n in F.dims:
        mats = []
        for i in range(len(ab.subset)):
            src = S.meta["bases"][n][i]
            mid_i = inner.subset[i]
            emb = la.mul(M1.meta["bases"][n][mid_i], T.meta["bases"][n][i]) if T.dim(i, n) else la.zeros(F.dim(ab.subset[i], n), 0)
            if not src.shape[1] or not emb.shape[1]:
                mats.append(la.zeros(emb.shape[1], src.shape[1]))
                continue
            mats.append(la.solve(emb, src))
        maps[n] = tuple(mats)
    return SheafMap(S, T, 0, maps)


def shriek_hom_iso(j: LocallyClosedImmersion, E: SheafComplex, F: SheafComplex) -> SheafMap:
    """j_* Hom(E, j^! F) -> Hom(j_! E, F): extend natural families by zero."""
    U = upper_shriek_adjoint(j, F)
    H = sheaf_hom(E, U)
    S = pushforward(j.map, H)
    LE = lower_shriek(j, E)
    T = sheaf_hom(LE, F)
    X = j.ambient
    p = la.get_prime()
    maps = {}
    for k in S.dims:
        mats = []
        for x in range(X.n):
            src = S.meta["fams"][x].get(k)
            tgt = T.meta["fams"][x].get(k)
            if src is None or tgt is None or not src.dim or not tgt.dim:
                mats.append(la.zeros(T.dim(x, k), S.dim(x, k)))
                continue
            tpos = {blk[0]: blk for blk in tgt.layout}
            out = la.zeros(tgt.full, src.dim)
            for col in range(src.dim):
                sec = src.K[:, col]
                for y, o, kk in src.layout:  # y indexes points of S
                    if not kk:
                        continue
                    fam = H.meta["fams"][y][k]
                    full = la.mul(fam.K, sec[o:o + kk].reshape(-1, 1))[:, 0]
                    for (yy, n), ho, _, hr, hc in fam.layout:
                        if yy != y:
                            continue
                        key = (j.subset[y], n)
                        if key not in tpos:
                            continue
                        _, to, _, tr, tc = tpos[key]
                        phi = full[ho:ho + hr * hc].reshape(hr, hc)
                        out[to:to + tr * tc, col] = la.mul(U.meta["bases"][n + k][y], phi).reshape(-1)
            mats.append(tgt.coords(out % p))
        maps[k] = tuple(mats)
    return SheafMap(S, T, 0, maps)


def upper_hom_iso(j: LocallyClosedImmersion, E: SheafComplex, F: SheafComplex) -> SheafMap:
    """Hom(j^{-1} E, j^! F) -> j^! Hom(E, F): extend natural families by zero."""
    U = upper_shriek_adjoint(j, F)
    jE = pullback(j.map, E)
    S = sheaf_hom(jE, U)
    HEF = sheaf_hom(E, F)
    T = upper_shriek_adjoint(j, HEF)
    p = la.get_prime()
    maps = {}
    for k in S.dims:
        mats = []
        for i, s in enumerate(j.subset):
            src = S.meta["fams"][i].get(k)
            if k not in T.meta["bases"] or src is None or not src.dim or not T.dim(i, k):
                mats.append(la.zeros(T.dim(i, k), S.dim(i, k)))
                continue
            tfam = HEF.meta["fams"][s][k]
            tpos = {blk[0]: blk for blk in tfam.layout}
            out = la.zeros(tfam.full, src.dim)
            for (y, n), o, _, r, c in src.layout:
                key = (j.subset[y], n)
                if key not in tpos:
                    continue
                _, to, _, tr, tc = tpos[key]
                for col in range(src.dim):
                    phi = src.K[o:o + r * c, col].reshape(r, c)
                    out[to:to + tr * tc, col] = la.mul(U.meta["bases"][n + k][y], phi).reshape(-1)
            # coordinates in Hom(E,F)_s, then in the j^! subspace
            hc = tfam.coords(out % p)
            mats.append(la.solve(T.meta["bases"][k][i], hc))
        maps[k] = tuple(mats)
    return SheafMap(S, T, 0, maps)
