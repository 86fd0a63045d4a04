"""Bounded cochain complexes of finite-dimensional F_p vector spaces.

Sign conventions: ``d_{[1]A} = -d_A`` and the cone differential is the block
matrix ``[[d_B, f], [0, -d_A]]`` on ``B^n + A^{n+1}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from . import exactla as la

__all__ = [
    "Complex", "GradedMap", "ChainMap", "Homotopy", "CohomologyData",
    "zero_complex", "point_complex", "shift", "shift_map", "direct_sum",
    "cone", "icone", "icone_map", "cohomology", "induced_on_cohomology",
    "hom_complex", "pack", "unpack", "hom_differential", "is_homotopic",
    "homotopy_inverse", "decompose_semisimple", "classify_mono", "factorize",
    "tensor", "tensor_map", "swap_map", "assoc_map", "left_unitor",
    "right_unitor", "compose", "identity", "zero_map", "is_quasi_iso",
    "random_complex", "random_chain_map", "random_mono",
]


def _sign(n: int) -> int:
    return -1 if n % 2 else 1


@dataclass(frozen=True, eq=False)
class Complex:
    """Cochain complex; ``d[n]`` maps degree n to degree n+1."""

    dims: Mapping[int, int]
    d: Mapping[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        dims = {int(n): int(k) for n, k in self.dims.items() if k}
        d = {}
        for n, m in self.d.items():
            n = int(n)
            if dims.get(n) and dims.get(n + 1):
                m = np.asarray(m, dtype=np.int64) % la.get_prime()
                if m.shape != (dims[n + 1], dims[n]):
                    raise ValueError(f"d^{n} has shape {m.shape}, expected {(dims[n + 1], dims[n])}")
                d[n] = m
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "d", d)

    def dim(self, n: int) -> int:
        return self.dims.get(n, 0)

    def diff(self, n: int) -> np.ndarray:
        m = self.d.get(n)
        return m if m is not None else la.zeros(self.dim(n + 1), self.dim(n))

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

    def check(self) -> bool:
        """d^{n+1} d^n == 0 for all n."""
        return all(la.is_zero(la.mul(self.diff(n + 1), self.diff(n))) for n in self.degrees())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Complex) or self.dims != other.dims:
            return False
        return all(np.array_equal(self.diff(n), other.diff(n)) for n in self.degrees())

    __hash__ = None

    def to_json(self) -> dict:
        lo, hi = self.window
        return {
            "window": [lo, hi],
            "dims": {str(n): k for n, k in sorted(self.dims.items())},
            "d": {str(n): m.astype(int).tolist() for n, m in sorted(self.d.items())},
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Complex":
        dims = {int(n): int(k) for n, k in doc.get("dims", {}).items()}
        d = {}
        for n, rows in doc.get("d", {}).items():
            n = int(n)
            d[n] = np.asarray(rows, dtype=np.int64).reshape(dims.get(n + 1, 0), dims.get(n, 0))
        return cls(dims, d)


@dataclass(frozen=True, eq=False)
class GradedMap:
    """Degree-``degree`` graded map; ``maps[n]`` sends A^n to B^{n+degree}."""

    source: Complex
    target: Complex
    degree: int = 0
    maps: Mapping[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        out = {}
        for n, m in self.maps.items():
            n = int(n)
            r, c = self.target.dim(n + self.degree), self.source.dim(n)
            if r and c:
                m = np.asarray(m, dtype=np.int64) % la.get_prime()
                if m.shape != (r, c):
                    raise ValueError(f"component {n} has shape {m.shape}, expected {(r, c)}")
                if np.any(m):
                    out[n] = m
        object.__setattr__(self, "maps", out)

    def comp(self, n: int) -> np.ndarray:
        m = self.maps.get(n)
        return m if m is not None else la.zeros(self.target.dim(n + self.degree), self.source.dim(n))

    def degrees(self) -> range:
        return self.source.degrees()

    def is_zero(self) -> bool:
        return not self.maps

    def differential(self) -> "GradedMap":
        """D f = d_B f - (-1)^deg f d_A."""
        s = _sign(self.degree)
        A, B, k = self.source, self.target, self.degree
        out = {}
        for n in A.degrees():
            out[n] = la.mul(B.diff(n + k), self.comp(n)) - s * la.mul(self.comp(n + 1), A.diff(n))
        return GradedMap(A, B, k + 1, out)

    def is_chain_map(self) -> bool:
        return self.degree == 0 and self.differential().is_zero()

    def __eq__(self, other) -> bool:
        if not isinstance(other, GradedMap) or self.degree != other.degree:
            return False
        if self.source.dims != other.source.dims or self.target.dims != other.target.dims:
            return False
        return all(np.array_equal(self.comp(n), other.comp(n)) for n in self.degrees())

    __hash__ = None

    def __add__(self, other: "GradedMap") -> "GradedMap":
        _check_parallel(self, other)
        return GradedMap(self.source, self.target, self.degree,
                         {n: self.comp(n) + other.comp(n) for n in self.degrees()})

    def __sub__(self, other: "GradedMap") -> "GradedMap":
        _check_parallel(self, other)
        return GradedMap(self.source, self.target, self.degree,
                         {n: self.comp(n) - other.comp(n) for n in self.degrees()})

    def scale(self, c: int) -> "GradedMap":
        return GradedMap(self.source, self.target, self.degree, {n: c * m for n, m in self.maps.items()})

    def to_json(self) -> dict:
        return {"degree": self.degree, "maps": {str(n): m.astype(int).tolist() for n, m in sorted(self.maps.items())}}


def _check_parallel(f: GradedMap, g: GradedMap) -> None:
    if f.degree != g.degree or f.source.dims != g.source.dims or f.target.dims != g.target.dims:
        raise ValueError("maps are not parallel")


def ChainMap(source: Complex, target: Complex, maps: Mapping[int, np.ndarray] | None = None) -> GradedMap:
    """A degree-zero graded map (commutation is checked by ``is_chain_map``)."""
    return GradedMap(source, target, 0, maps or {})


@dataclass(frozen=True)
class Homotopy:
    """``f - g = d h + h d`` with h of degree -1."""

    f: GradedMap
    g: GradedMap
    h: GradedMap

    def verify(self) -> bool:
        return (self.f - self.g) == self.h.differential()


# -- basic constructions -------------------------------------------------------

def zero_complex() -> Complex:
    return Complex({})


def point_complex(n: int = 0, k: int = 1) -> Complex:
    """k copies of the field concentrated in degree n."""
    return Complex({n: k})


def identity(A: Complex) -> GradedMap:
    return ChainMap(A, A, {n: la.eye(A.dim(n)) for n in A.degrees()})


def zero_map(A: Complex, B: Complex, degree: int = 0) -> GradedMap:
    return GradedMap(A, B, degree, {})


def compose(g: GradedMap, f: GradedMap) -> GradedMap:
    """g after f, with no sign (composition in the dg category)."""
    if f.target.dims != g.source.dims:
        raise ValueError("composition endpoints do not match")
    return GradedMap(f.source, g.target, f.degree + g.degree,
                     {n: la.mul(g.comp(n + f.degree), f.comp(n)) for n in f.source.degrees()})


def shift(n: int, A: Complex) -> Complex:
    s = _sign(n)
    return Complex({m - n: k for m, k in A.dims.items()}, {m - n: s * d for m, d in A.d.items()})


def shift_map(n: int, f: GradedMap) -> GradedMap:
    """[n]f; components are reindexed with sign (-1)^{n*deg}."""
    s = _sign(n * f.degree)
    return GradedMap(shift(n, f.source), shift(n, f.target), f.degree,
                     {m - n: s * c for m, c in f.maps.items()})


def direct_sum(*As: Complex) -> tuple[Complex, list[GradedMap], list[GradedMap]]:
    """Biproduct with its inclusions and projections."""
    degs = sorted({n for A in As for n in A.dims})
    dims = {n: sum(A.dim(n) for A in As) for n in degs}
    d = {}
    for n in degs:
        M = la.zeros(dims.get(n + 1, 0), dims[n])
        r = c = 0
        for A in As:
            if A.dim(n) and A.dim(n + 1):
                M[r:r + A.dim(n + 1), c:c + A.dim(n)] = A.diff(n)
            r += A.dim(n + 1)
            c += A.dim(n)
        d[n] = M
    S = Complex(dims, d)
    incs, projs = [], []
    offs = {n: 0 for n in degs}
    for A in As:
        inc, proj = {}, {}
        for n in A.dims:
            e = la.zeros(S.dim(n), A.dim(n))
            e[offs[n]:offs[n] + A.dim(n), :] = la.eye(A.dim(n))
            inc[n] = e
            proj[n] = e.T.copy()
            offs[n] += A.dim(n)
        incs.append(ChainMap(A, S, inc))
        projs.append(ChainMap(S, A, proj))
    return S, incs, projs


def cone(f: GradedMap) -> Complex:
    """Cone(f)^n = B^n + A^{n+1}, d = [[d_B, f], [0, -d_A]]."""
    A, B = f.source, f.target
    degs = sorted(set(B.dims) | {n - 1 for n in A.dims})
    dims = {n: B.dim(n) + A.dim(n + 1) for n in degs}
    d = {n: la.block([[B.diff(n), f.comp(n + 1)],
                      [la.zeros(A.dim(n + 2), B.dim(n)), -A.diff(n + 1)]]) for n in degs}
    return Complex(dims, d)


def cone_map(f: GradedMap, g: GradedMap, u: GradedMap, v: GradedMap) -> GradedMap:
    """Map Cone(f) -> Cone(g) induced by a strictly commuting square (v on targets, u on sources)."""
    C1, C2 = cone(f), cone(g)
    maps = {n: la.block([[v.comp(n), la.zeros(v.target.dim(n), u.source.dim(n + 1))],
                         [la.zeros(u.target.dim(n + 1), v.source.dim(n)), u.comp(n + 1)]])
            for n in C1.degrees()}
    return ChainMap(C1, C2, maps)


def icone(A: Complex) -> Complex:
    return cone(identity(A))


def icone_map(f: GradedMap) -> GradedMap:
    """icone(f) = cone(f, f)."""
    return cone_map(identity(f.source), identity(f.target), f, f)


# -- cohomology ---------------------------------------------------------------

def _colspace(M: np.ndarray) -> np.ndarray:
    """Pivot columns of M: a canonical basis of its image."""
    if M.shape[1] == 0 or M.shape[0] == 0:
        return la.zeros(M.shape[0], 0)
    _, piv = la._pivots(M, la.get_prime())
    return M[:, piv]


def _extend(base: np.ndarray, cands: np.ndarray) -> np.ndarray:
    """Columns of cands (in order) that extend base to a larger independent set."""
    n = base.shape[0]
    if cands.shape[1] == 0:
        return la.zeros(n, 0)
    M = np.hstack([base, cands])
    _, piv = la._pivots(M, la.get_prime())
    keep = [c - base.shape[1] for c in piv if c >= base.shape[1]]
    return cands[:, keep]


@dataclass(frozen=True)
class CohomologyData:
    """H^n as a subquotient: ``reps[n]`` are cycle representatives, ``proj[n]`` reads
    off the class of any cycle (rows index H^n)."""

    dims: dict[int, int]
    reps: dict[int, np.ndarray]
    proj: dict[int, np.ndarray]
    boundaries: dict[int, np.ndarray]
    cycles: dict[int, np.ndarray]


def cohomology(A: Complex) -> CohomologyData:
    dims, reps, proj, bnd, cyc = {}, {}, {}, {}, {}
    for n in A.degrees():
        Z = la.kernel(A.diff(n))
        Bn = _colspace(A.diff(n - 1))
        H = _extend(Bn, Z)
        rest = _extend(np.hstack([Bn, H]), la.eye(A.dim(n)))
        full = np.hstack([H, Bn, rest])
        inv = la.inverse(full)
        dims[n] = H.shape[1]
        reps[n] = H
        proj[n] = inv[:H.shape[1]]
        bnd[n] = Bn
        cyc[n] = Z
    return CohomologyData({n: k for n, k in dims.items() if k}, reps, proj, bnd, cyc)


def betti(A: Complex) -> dict[int, int]:
    """Dimensions of H^n by rank counts only."""
    out = {}
    for n in A.degrees():
        h = A.dim(n) - la.rank(A.diff(n)) - la.rank(A.diff(n - 1))
        if h:
            out[n] = h
    return out


def is_acyclic(A: Complex) -> bool:
    return not betti(A)


def is_quasi_iso(f: GradedMap) -> bool:
    return f.degree == 0 and is_acyclic(cone(f))


def induced_on_cohomology(f: GradedMap) -> dict[int, np.ndarray]:
    HA, HB = cohomology(f.source), cohomology(f.target)
    out = {}
    for n in f.source.degrees():
        if HA.dims.get(n) and HB.dims.get(n + f.degree):
            out[n] = la.mul(HB.proj[n + f.degree], f.comp(n), HA.reps[n])
    return out


# -- hom complexes ------------------------------------------------------------

def _hom_layout(A: Complex, B: Complex, k: int) -> list[tuple[int, int, int, int]]:
    """(n, offset, rows, cols) blocks of Hom^k(A,B)."""
    out, off = [], 0
    for n in sorted(A.dims):
        r, c = B.dim(n + k), A.dim(n)
        if r and c:
            out.append((n, off, r, c))
            off += r * c
    return out


def pack(f: GradedMap) -> np.ndarray:
    """Coordinates of f in Hom^deg(A,B): row-major blocks in increasing source degree."""
    parts = [f.comp(n).reshape(-1) for n, _, _, _ in _hom_layout(f.source, f.target, f.degree)]
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)


def unpack(v: np.ndarray, A: Complex, B: Complex, k: int) -> GradedMap:
    return GradedMap(A, B, k, {n: v[o:o + r * c].reshape(r, c) for n, o, r, c in _hom_layout(A, B, k)})


def hom_differential(A: Complex, B: Complex, k: int) -> np.ndarray:
    """Matrix of D: Hom^k(A,B) -> Hom^{k+1}(A,B)."""
    src, tgt = _hom_layout(A, B, k), _hom_layout(A, B, k + 1)
    tpos = {n: (o, r, c) for n, o, r, c in tgt}
    ncols = sum(r * c for _, _, r, c in src)
    nrows = sum(r * c for _, _, r, c in tgt)
    D = la.zeros(nrows, ncols)
    s = _sign(k)
    for n, o, r, c in src:
        # d_B^{n+k} f^n lands in block n of degree k+1
        if n in tpos:
            to, tr, tc = tpos[n]
            D[to:to + tr * tc, o:o + r * c] += np.kron(B.diff(n + k), la.eye(c))
        # -(-1)^k f^n d_A^{n-1} lands in block n-1
        if n - 1 in tpos:
            to, tr, tc = tpos[n - 1]
            D[to:to + tr * tc, o:o + r * c] -= s * np.kron(la.eye(r), A.diff(n - 1).T)
    return D % la.get_prime()


def hom_complex(A: Complex, B: Complex) -> Complex:
    lo = B.window[0] - A.window[1] if not (A.is_zero() or B.is_zero()) else 0
    hi = B.window[1] - A.window[0] if not (A.is_zero() or B.is_zero()) else -1
    dims, d = {}, {}
    for k in range(lo, hi + 1):
        dims[k] = sum(r * c for _, _, r, c in _hom_layout(A, B, k))
        d[k] = hom_differential(A, B, k)
    return Complex(dims, d)


def is_homotopic(f: GradedMap, g: GradedMap) -> Homotopy | None:
    """Explicit homotopy between parallel chain maps, or None."""
    _check_parallel(f, g)
    A, B = f.source, f.target
    D = hom_differential(A, B, f.degree - 1)
    rhs = pack(f - g).reshape(-1, 1)
    if rhs.size == 0:
        return Homotopy(f, g, zero_map(A, B, f.degree - 1))
    x = la.solve(D, rhs)
    if x is None:
        return None
    return Homotopy(f, g, unpack(x[:, 0], A, B, f.degree - 1))


def homotopy_inverse(f: GradedMap):
    """(g, h1, h2) with h1: g f ~ id_A and h2: f g ~ id_B, or None."""
    if not is_quasi_iso(f):
        return None
    A, B = f.source, f.target
    # unknowns: g in Hom^0(B,A), h in Hom^{-1}(A,A); equations D g = 0, g f - D h = id
    D0 = hom_differential(B, A, 0)
    Dm = hom_differential(A, A, -1)
    n_g, n_h = D0.shape[1], Dm.shape[1]
    # matrix of g -> g f on Hom^0(B,A) -> Hom^0(A,A)
    precomp = _precompose_matrix(B, A, f)
    top = np.hstack([D0, la.zeros(D0.shape[0], n_h)])
    bot = np.hstack([precomp, (-Dm) % la.get_prime()])
    M = np.vstack([top, bot])
    rhs = np.concatenate([np.zeros(D0.shape[0], dtype=np.int64), pack(identity(A))]).reshape(-1, 1)
    x = la.solve(M, rhs)
    if x is None:
        return None
    g = unpack(x[:n_g, 0], B, A, 0)
    h1 = Homotopy(compose(g, f), identity(A), unpack(x[n_g:, 0], A, A, -1))
    h2 = is_homotopic(compose(f, g), identity(B))
    if h2 is None:
        return None
    return g, h1, h2


def _precompose_matrix(B: Complex, C: Complex, f: GradedMap) -> np.ndarray:
    """Matrix of g -> g f from Hom^0(B,C) to Hom^0(A,C), f: A -> B of degree 0."""
    A = f.source
    src, tgt = _hom_layout(B, C, 0), _hom_layout(A, C, 0)
    spos = {n: (o, r, c) for n, o, r, c in src}
    M = la.zeros(sum(r * c for _, _, r, c in tgt), sum(r * c for _, _, r, c in src))
    for n, o, r, c in tgt:
        if n in spos:
            so, sr, sc = spos[n]
            M[o:o + r * c, so:so + sr * sc] = np.kron(la.eye(r), f.comp(n).T)
    return M


# -- structure theorems ----------------------------------------------------------

@dataclass(frozen=True)
class Decomposition:
    """A = S + icone(T) with ``iso``: A -> S+icone(T) and ``inverse`` its inverse."""

    S: Complex
    T: Complex
    iso: GradedMap
    inverse: GradedMap
    target: Complex


def decompose_semisimple(A: Complex) -> Decomposition:
    """Split A as its cohomology plus the identity cone on its boundaries."""
    H, Bb, C = {}, {}, {}
    for n in A.degrees():
        Z = la.kernel(A.diff(n))
        Bn = _colspace(A.diff(n - 1))
        H[n] = _extend(Bn, Z)
        C[n] = _extend(Z, la.eye(A.dim(n)))
    for n in A.degrees():
        # boundary basis chosen as d(C^{n-1}) so that d is the identity on the cone part
        Bb[n] = la.mul(A.diff(n - 1), C[n - 1]) if (n - 1) in C else la.zeros(A.dim(n), 0)
    S = Complex({n: H[n].shape[1] for n in H})
    T = Complex({n: Bb[n].shape[1] for n in Bb})
    target, _, _ = direct_sum(S, icone(T))
    Q, Qi = {}, {}
    for n in A.degrees():
        Q[n] = np.hstack([H[n], Bb[n], C[n]])
        Qi[n] = la.inverse(Q[n]) if Q[n].size else la.zeros(0, 0)
    inv = ChainMap(target, A, Q)
    iso = ChainMap(A, target, Qi)
    return Decomposition(S, T, iso, inv, target)


MONO_TYPES = ("id_S", "id_icone", "0->k", "0->icone", "k->icone")


@dataclass(frozen=True)
class MonoDecomposition:
    """m = beta * standard * alpha^{-1} degreewise."""

    summands: list[tuple[str, int, int]]
    standard: GradedMap
    alpha: dict[int, np.ndarray]
    beta: dict[int, np.ndarray]

    def reassemble(self) -> dict[int, np.ndarray]:
        out = {}
        for n in self.standard.degrees():
            out[n] = la.mul(self.beta[n], self.standard.comp(n), la.inverse(self.alpha[n])) \
                if self.alpha[n].size else la.zeros(self.standard.target.dim(n), 0)
        return out


def _basic_mono(tag: str) -> GradedMap:
    k = point_complex(0)
    ic = icone(k)
    if tag == "id_S":
        return identity(k)
    if tag == "id_icone":
        return identity(ic)
    if tag == "0->k":
        return zero_map(zero_complex(), k)
    if tag == "0->icone":
        return zero_map(zero_complex(), ic)
    if tag == "k->icone":
        return ChainMap(k, ic, {0: la.mat([[1]])})
    raise ValueError(tag)


def classify_mono(m: GradedMap) -> MonoDecomposition:
    """Decompose a degreewise-injective chain map into shifted basic monomorphisms."""
    A, B = m.source, m.target
    for n in A.degrees():
        if la.rank(m.comp(n)) != A.dim(n):
            raise ValueError(f"component {n} is not injective")
    p = la.get_prime()
    dec = decompose_semisimple(A)
    # contractible part of A: pairs (c in deg n-1, dc in deg n), stored in the cone columns
    cone_pairs = []  # (n, vector in A^{n-1}, vector in A^n)
    for n in A.degrees():
        h, b = dec.S.dim(n), dec.T.dim(n)
        Qn = dec.inverse.comp(n)
        for j in range(b):
            top = Qn[:, h + j]
            lo = dec.inverse.comp(n - 1)
            src = lo[:, dec.S.dim(n - 1) + dec.T.dim(n - 1) + j]
            cone_pairs.append((n, src, top))
    # retraction r of B onto m(icone(T_A)) and the complementary subcomplex ker r
    Cimg = {n: [] for n in B.degrees()}
    for n, c, dc in cone_pairs:
        Cimg[n - 1].append(la.mul(m.comp(n - 1), c.reshape(-1, 1))[:, 0])
        Cimg[n].append(la.mul(m.comp(n), dc.reshape(-1, 1))[:, 0])
    proj = _complement_projector(B, {n: (np.column_stack(v) if v else la.zeros(B.dim(n), 0)) for n, v in Cimg.items()})
    # adjusted cycle basis of A's semisimple part: s - m^{-1} r m s
    S_vecs = {}
    for n in A.degrees():
        Hn = dec.inverse.comp(n)[:, :dec.S.dim(n)]
        mh = la.mul(m.comp(n), Hn)
        kept = (mh - la.mul(proj[n], mh)) % p  # component in ker r
        corr = (mh - kept) % p  # lies in m(icone part) of A
        pre = la.solve(m.comp(n), corr) if corr.size else la.zeros(A.dim(n), 0)
        S_vecs[n] = (Hn - pre) % p
    Bp_cyc = {}
    summ: list[tuple[str, int, int]] = []
    a_cols = {n: [] for n in A.degrees()}
    b_cols = {n: [] for n in B.degrees()}
    std = []  # list of (tag, shift)

    def add(tag, shift, avecs, bvecs):
        std.append((tag, shift))
        for n, v in avecs:
            a_cols[n].append(v)
        for n, v in bvecs:
            b_cols[n].append(v)

    for n, c, dc in cone_pairs:
        sg = _sign(n)
        add("id_icone", -n, [(n - 1, c), (n, sg * dc % p)],
            [(n - 1, la.mul(m.comp(n - 1), c.reshape(-1, 1))[:, 0]),
             (n, sg * la.mul(m.comp(n), dc.reshape(-1, 1))[:, 0] % p)])
    # inside B' = ker r, analyse the images of the semisimple part
    for n in B.degrees():
        sg = _sign(n)
        Kp = (la.eye(B.dim(n)) - proj[n]) % p
        Kprev = (la.eye(B.dim(n - 1)) - proj[n - 1]) % p
        dprev = la.mul(B.diff(n - 1), Kprev) if B.dim(n - 1) else la.zeros(B.dim(n), 0)
        bnd = _colspace(dprev)
        Sn = S_vecs.get(n, la.zeros(A.dim(n), 0))
        imgs = la.mul(m.comp(n), Sn) if Sn.size else la.zeros(B.dim(n), 0)
        # coordinates of the images modulo boundaries
        comp = _extend(bnd, la.eye(B.dim(n)))
        quot = la.inverse(np.hstack([bnd, comp]))[bnd.shape[1]:]
        q = la.mul(quot, imgs) if imgs.size else la.zeros(quot.shape[0], 0)
        piv = la._pivots(q, p)[1] if q.size else []
        dead = la.mul(Sn, la.kernel(q)) if Sn.shape[1] else la.zeros(A.dim(n), 0)
        for j in piv:
            add("id_S", -n, [(n, Sn[:, j])], [(n, imgs[:, j])])
        dead_b = []
        for j in range(dead.shape[1]):
            s_vec = dead[:, j]
            b = la.mul(m.comp(n), s_vec.reshape(-1, 1))
            pre = la.mul(Kprev, la.solve(dprev, b))[:, 0]
            add("k->icone", -n, [(n, sg * s_vec % p)], [(n - 1, pre), (n, sg * b[:, 0] % p)])
            dead_b.append(b[:, 0])
        cur = np.hstack([bnd, imgs[:, piv]]) if piv else bnd
        Bp_cyc[n] = (cur, dead_b, Kp, Kprev)
    for n in B.degrees():
        sg = _sign(n)
        cur, dead_b, Kp, Kprev = Bp_cyc[n]
        Zp = la.kernel(B.diff(n))
        Zp = _colspace(la.mul(Kp, Zp)) if Zp.size else Zp
        # remaining cycle classes of B'
        for v in _extend(cur, Zp).T:
            add("0->k", -n, [], [(n, v)])
        # remaining boundaries, produced from chains in B'^{n-1}
        base = np.column_stack(dead_b) if dead_b else la.zeros(B.dim(n), 0)
        if B.dim(n - 1):
            cands = _extend(la.kernel(B.diff(n - 1)), _colspace(Kprev))
            for j in range(cands.shape[1]):
                c = cands[:, j]
                dc = la.mul(B.diff(n - 1), c.reshape(-1, 1))
                if la.rank(np.hstack([base, dc])) > base.shape[1]:
                    base = np.hstack([base, dc])
                    add("0->icone", -n, [], [(n - 1, c), (n, sg * dc[:, 0] % p)])
    alpha = {n: (np.column_stack(a_cols[n]) if a_cols[n] else la.zeros(A.dim(n), 0)) for n in A.degrees()}
    beta = {n: (np.column_stack(b_cols[n]) if b_cols[n] else la.zeros(B.dim(n), 0)) for n in B.degrees()}
    for n in set(A.degrees()) | set(B.degrees()):
        alpha.setdefault(n, la.zeros(A.dim(n), 0))
        beta.setdefault(n, la.zeros(B.dim(n), 0))
    standard = _standard_form(std)
    for n in B.degrees():
        if beta[n].shape[1] != B.dim(n) or la.rank(beta[n]) != B.dim(n):
            raise RuntimeError(f"incomplete target basis in degree {n}")
    counts: dict[tuple[str, int], int] = {}
    for t in std:
        counts[t] = counts.get(t, 0) + 1
    summ = [(t, s, c) for (t, s), c in counts.items()]
    summ.sort(key=lambda x: (MONO_TYPES.index(x[0]), x[1]))
    return MonoDecomposition(summ, standard, alpha, beta)


def _complement_projector(B: Complex, C: dict[int, np.ndarray]) -> dict[int, np.ndarray]:
    """Chain-level idempotent of B with image the contractible subcomplex C.

    A contractible subcomplex is a direct summand; the retraction is found by a
    linear solve over all chain-map constraints.
    """
    p = la.get_prime()
    degs = list(B.degrees())
    Cdims = {n: C[n].shape[1] for n in degs}
    if not any(Cdims.values()):
        return {n: la.zeros(B.dim(n), B.dim(n)) for n in range(degs[0] - 1, degs[-1] + 2)} if degs else {}
    Cc = Complex(Cdims, {n: la.solve(C[n + 1], la.mul(B.diff(n), C[n])) for n in degs
                         if Cdims.get(n) and Cdims.get(n + 1)})
    # r: B -> Cc chain map with r * incl = id
    incl = ChainMap(Cc, B, {n: C[n] for n in degs})
    D0 = hom_differential(B, Cc, 0)
    pre = _precompose_matrix(B, Cc, incl)
    M = np.vstack([D0, pre])
    rhs = np.concatenate([np.zeros(D0.shape[0], dtype=np.int64), pack(identity(Cc))]).reshape(-1, 1)
    x = la.solve(M, rhs)
    if x is None:
        raise RuntimeError("subcomplex is not a direct summand")
    r = unpack(x[:, 0], B, Cc, 0)
    out = {n: la.mul(C[n], r.comp(n)) if Cdims.get(n) else la.zeros(B.dim(n), B.dim(n)) for n in degs}
    out[degs[0] - 1] = la.zeros(0, 0)
    out[degs[-1] + 1] = la.zeros(0, 0)
    return out


def _standard_form(std: list[tuple[str, int]]) -> GradedMap:
    basics = {t: _basic_mono(t) for t in MONO_TYPES}
    pieces = [shift_map(s, basics[tag]) for tag, s in std]
    S, _, _ = direct_sum(*[f.source for f in pieces])
    T, _, _ = direct_sum(*[f.target for f in pieces])
    maps = {}
    for n in T.degrees():
        M = la.zeros(T.dim(n), S.dim(n))
        r = c = 0
        for f in pieces:
            b = f.comp(n)
            M[r:r + b.shape[0], c:c + b.shape[1]] = b
            r += f.target.dim(n)
            c += f.source.dim(n)
        maps[n] = M
    return ChainMap(S, T, maps)


def factorize(f: GradedMap, mode: str = "cof-then-trivfib") -> tuple[GradedMap, Complex, GradedMap]:
    """Mapping-cylinder (mode 1) or path-object (mode 2) factorisation f = right * left."""
    A, B = f.source, f.target
    if mode == "cof-then-trivfib":
        # Cyl^n = A^n + A^{n+1} + B^n, d(a, a', b) = (da + a', -da', db - f a')
        degs = sorted(set(A.dims) | {n - 1 for n in A.dims} | set(B.dims))
        dims = {n: A.dim(n) + A.dim(n + 1) + B.dim(n) for n in degs}
        d = {}
        for n in degs:
            d[n] = la.block([
                [A.diff(n), la.eye(A.dim(n + 1)), la.zeros(A.dim(n + 1), B.dim(n))],
                [la.zeros(A.dim(n + 2), A.dim(n)), -A.diff(n + 1), la.zeros(A.dim(n + 2), B.dim(n))],
                [la.zeros(B.dim(n + 1), A.dim(n)), -f.comp(n + 1), B.diff(n)],
            ])
        mid = Complex(dims, d)
        left = ChainMap(A, mid, {n: la.block([[la.eye(A.dim(n))], [la.zeros(A.dim(n + 1), A.dim(n))],
                                              [la.zeros(B.dim(n), A.dim(n))]]) for n in degs})
        right = ChainMap(mid, B, {n: la.block([[f.comp(n), la.zeros(B.dim(n), A.dim(n + 1)), la.eye(B.dim(n))]])
                                  for n in degs})
        return left, mid, right
    if mode == "trivcof-then-fib":
        # mid = A + W, W^n = B^{n-1} + B^n, d_W(b, b') = (-db - b', db')
        W = shift(-1, icone(B))
        mid, incs, projs = direct_sum(A, W)
        degs = sorted(mid.dims)
        left = incs[0]
        piW = {n: la.block([[la.zeros(B.dim(n), B.dim(n - 1)), la.eye(B.dim(n))]]) for n in degs}
        right = ChainMap(mid, B, {n: la.block([[f.comp(n), piW[n]]]) for n in degs})
        return left, mid, right
    raise ValueError(f"unknown mode {mode!r}")


# -- tensor products -------------------------------------------------------------

def _tensor_layout(A: Complex, B: Complex, n: int) -> list[tuple[int, int, int, int]]:
    """(a, offset, dimA^a, dimB^{n-a}) blocks of (A (x) B)^n."""
    out, off = [], 0
    for a in sorted(A.dims):
        ra, rb = A.dim(a), B.dim(n - a)
        if ra and rb:
            out.append((a, off, ra, rb))
            off += ra * rb
    return out


def _tensor_degrees(A: Complex, B: Complex) -> list[int]:
    if A.is_zero() or B.is_zero():
        return []
    return list(range(A.window[0] + B.window[0], A.window[1] + B.window[1] + 1))


def tensor(A: Complex, B: Complex) -> Complex:
    """Koszul tensor product: d(x (x) y) = dx (x) y + (-1)^|x| x (x) dy."""
    dims, d = {}, {}
    for n in _tensor_degrees(A, B):
        src = _tensor_layout(A, B, n)
        tgt = {a: (o, ra, rb) for a, o, ra, rb in _tensor_layout(A, B, n + 1)}
        dims[n] = sum(ra * rb for _, _, ra, rb in src)
        M = la.zeros(sum(ra * rb for _, (o, ra, rb) in tgt.items()), dims[n])
        for a, o, ra, rb in src:
            if a + 1 in tgt:
                to, tra, trb = tgt[a + 1]
                M[to:to + tra * trb, o:o + ra * rb] += np.kron(A.diff(a), la.eye(rb))
            if a in tgt:
                to, tra, trb = tgt[a]
                M[to:to + tra * trb, o:o + ra * rb] += _sign(a) * np.kron(la.eye(ra), B.diff(n - a))
        d[n] = M % la.get_prime()
    return Complex(dims, d)


def tensor_map(f: GradedMap, g: GradedMap, A2: Complex | None = None, B2: Complex | None = None) -> GradedMap:
    """(f (x) g)(x (x) y) = (-1)^{|g||x|} f x (x) g y."""
    S = tensor(f.source, g.source)
    T = tensor(f.target, g.target)
    k = f.degree + g.degree
    maps = {}
    for n in S.degrees():
        tgt = {a: (o, ra, rb) for a, o, ra, rb in _tensor_layout(f.target, g.target, n + k)}
        M = la.zeros(T.dim(n + k), S.dim(n))
        for a, o, ra, rb in _tensor_layout(f.source, g.source, n):
            if a + f.degree in tgt:
                to, tra, trb = tgt[a + f.degree]
                M[to:to + tra * trb, o:o + ra * rb] = _sign(g.degree * a) * np.kron(f.comp(a), g.comp(n - a))
        maps[n] = M % la.get_prime()
    return GradedMap(S, T, k, maps)


def swap_map(A: Complex, B: Complex) -> GradedMap:
    """x (x) y -> (-1)^{|x||y|} y (x) x."""
    S, T = tensor(A, B), tensor(B, A)
    maps = {}
    for n in S.degrees():
        tgt = {b: (o, rb, ra) for b, o, rb, ra in _tensor_layout(B, A, n)}
        M = la.zeros(T.dim(n), S.dim(n))
        for a, o, ra, rb in _tensor_layout(A, B, n):
            to, _, _ = tgt[n - a]
            s = _sign(a * (n - a))
            for i in range(ra):
                for j in range(rb):
                    M[to + j * ra + i, o + i * rb + j] = s
        maps[n] = M % la.get_prime()
    return ChainMap(S, T, maps)


def assoc_map(A: Complex, B: Complex, C: Complex) -> GradedMap:
    """(x (x) y) (x) z -> x (x) (y (x) z), no signs."""
    AB = tensor(A, B)
    BC = tensor(B, C)
    S, T = tensor(AB, C), tensor(A, BC)
    maps = {}
    for n in S.degrees():
        M = la.zeros(T.dim(n), S.dim(n))
        tl = {a: (o, ra, rbc) for a, o, ra, rbc in _tensor_layout(A, BC, n)}
        for ab, o, rab, rc in _tensor_layout(AB, C, n):
            c = n - ab
            for a, o2, ra, rb in _tensor_layout(A, B, ab):
                b = ab - a
                to, _, rbc = tl[a]
                inner = {bb: oo for bb, oo, _, _ in _tensor_layout(B, C, b + c)}[b]
                for i in range(ra):
                    for j in range(rb):
                        for l in range(rc):
                            src = o + (o2 + i * rb + j) * rc + l
                            dst = to + i * rbc + inner + j * rc + l
                            M[dst, src] = 1
        maps[n] = M
    return ChainMap(S, T, maps)


def left_unitor(A: Complex) -> GradedMap:
    """k@0 (x) A -> A."""
    S = tensor(point_complex(0), A)
    return ChainMap(S, A, {n: la.eye(A.dim(n)) for n in A.degrees()})


def right_unitor(A: Complex) -> GradedMap:
    """A (x) k@0 -> A."""
    S = tensor(A, point_complex(0))
    return ChainMap(S, A, {n: la.eye(A.dim(n)) for n in A.degrees()})


# -- random generation ---------------------------------------------------------

def _random_invertible(rng: np.random.Generator, n: int) -> np.ndarray:
    p = la.get_prime()
    while True:
        M = rng.integers(0, p, size=(n, n), dtype=np.int64)
        if la.rank(M) == n:
            return M


def random_complex(rng: np.random.Generator, max_dim: int = 6, window: tuple[int, int] = (-3, 3)) -> Complex:
    """A random complex: a random S + icone(T) conjugated by random bases."""
    lo, hi = window
    hdims = {n: int(rng.integers(0, 3)) for n in range(lo, hi + 1)}
    tdims = {n: 0 for n in range(lo, hi + 2)}
    for n in range(lo + 1, hi + 1):
        tdims[n] = int(rng.integers(0, 3))
    # cap total dimension per degree
    for n in range(lo, hi + 1):
        while hdims[n] + tdims[n] + tdims[n + 1] > max_dim:
            if hdims[n]:
                hdims[n] -= 1
            elif tdims[n + 1]:
                tdims[n + 1] -= 1
            else:
                tdims[n] -= 1
    S = Complex(hdims)
    T = Complex({n: k for n, k in tdims.items() if lo <= n <= hi})
    base, _, _ = direct_sum(S, icone(T))
    P = {n: _random_invertible(rng, base.dim(n)) for n in base.degrees()}
    d = {}
    for n in base.degrees():
        if base.dim(n) and base.dim(n + 1):
            d[n] = la.mul(P[n + 1], base.diff(n), la.inverse(P[n]))
    return Complex(dict(base.dims), d)


def random_chain_map(rng: np.random.Generator, A: Complex, B: Complex) -> GradedMap:
    D = hom_differential(A, B, 0)
    K = la.kernel(D)
    c = rng.integers(0, la.get_prime(), size=(K.shape[1], 1), dtype=np.int64)
    v = la.mul(K, c)[:, 0] if K.shape[1] else np.zeros(D.shape[1], dtype=np.int64)
    return unpack(v, A, B, 0)


def random_mono(rng: np.random.Generator, max_dim: int = 3, window: tuple[int, int] = (-2, 2)) -> GradedMap:
    """Inclusion A -> Cone(g: Q[-1] -> A) in random bases."""
    A = random_complex(rng, max_dim, window)
    Q = random_complex(rng, max_dim, window)
    Qm = shift(-1, Q)
    g = random_chain_map(rng, Qm, A)
    C = cone(g)
    degs = sorted(set(C.dims) | set(A.dims))
    PA = {n: _random_invertible(rng, A.dim(n)) for n in A.degrees()}
    PC = {n: _random_invertible(rng, C.dim(n)) for n in C.degrees()}
    A2 = Complex(dict(A.dims), {n: la.mul(PA[n + 1], A.diff(n), la.inverse(PA[n]))
                                for n in A.degrees() if A.dim(n) and A.dim(n + 1)})
    C2 = Complex(dict(C.dims), {n: la.mul(PC[n + 1], C.diff(n), la.inverse(PC[n]))
                                for n in C.degrees() if C.dim(n) and C.dim(n + 1)})
    maps = {}
    for n in degs:
        if A.dim(n):
            inc = la.block([[la.eye(A.dim(n))], [la.zeros(Qm.dim(n + 1), A.dim(n))]])
            maps[n] = la.mul(PC[n], inc, la.inverse(PA[n]))
    return ChainMap(A2, C2, maps)
