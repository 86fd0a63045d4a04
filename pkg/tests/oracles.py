"""Independent reference computations.

Nothing here imports sixlab: ranks are pure-Python Gaussian elimination mod p
and cohomology comes from the order complex (chains of the poset) with
simplicial cochains, which computes sheaf cohomology of the constant sheaf on
a finite space.
"""
from __future__ import annotations

from itertools import combinations

P = 32003


def rank_mod_p(rows: list[list[int]], p: int = P) -> int:
    A = [[v % p for v in r] for r in rows]
    if not A:
        return 0
    r, ncols = 0, len(A[0])
    for c in range(ncols):
        piv = next((i for i in range(r, len(A)) if A[i][c]), None)
        if piv is None:
            continue
        A[r], A[piv] = A[piv], A[r]
        inv = pow(A[r][c], p - 2, p)
        A[r] = [v * inv % p for v in A[r]]
        for i in range(len(A)):
            if i != r and A[i][c]:
                f = A[i][c]
                A[i] = [(a - f * b) % p for a, b in zip(A[i], A[r])]
        r += 1
    return r


def chains(leq: list[list[bool]]) -> list[tuple[int, ...]]:
    """Strictly increasing chains x0 < x1 < ... of the order (simplices of the order complex)."""
    n = len(leq)
    lt = lambda a, b: a != b and leq[a][b]
    out = []

    def grow(ch):
        out.append(ch)
        for y in range(n):
            if lt(ch[-1], y):
                grow(ch + (y,))

    for x in range(n):
        grow((x,))
    return out


def relative_betti(leq: list[list[bool]], sub: set[int] = frozenset(), p: int = P) -> dict[int, int]:
    """dim H^n(order complex of X, order complex of the subset), nonzero entries only."""
    simp = [s for s in chains(leq) if not set(s) <= set(sub)]
    by_dim: dict[int, list[tuple[int, ...]]] = {}
    for s in simp:
        by_dim.setdefault(len(s) - 1, []).append(s)
    index = {k: {s: i for i, s in enumerate(v)} for k, v in by_dim.items()}

    def coboundary(k: int) -> list[list[int]]:
        src, tgt = by_dim.get(k, []), by_dim.get(k + 1, [])
        M = [[0] * len(src) for _ in tgt]
        for r, t in enumerate(tgt):
            for i in range(len(t)):
                face = t[:i] + t[i + 1:]
                c = index.get(k, {}).get(face)
                if c is not None:
                    M[r][c] += (-1) ** i
        return M

    out = {}
    for k in sorted(by_dim):
        dim = len(by_dim[k])
        h = dim - rank_mod_p(coboundary(k), p) - (rank_mod_p(coboundary(k - 1), p) if k > 0 else 0)
        if h:
            out[k] = h
    return out


def betti(leq) -> dict[int, int]:
    """Cohomology of the constant sheaf."""
    return relative_betti(leq, set())


def local_betti(leq, Z: set[int]) -> dict[int, int]:
    """Cohomology with supports in a closed set Z: relative to the open complement."""
    return relative_betti(leq, set(range(len(leq))) - set(Z))


def compact_betti(leq, U: set[int]) -> dict[int, int]:
    """Sections of j_! k for an open U: relative to the closed complement."""
    return relative_betti(leq, set(range(len(leq))) - set(U))


def up_sets(leq) -> list[frozenset[int]]:
    n = len(leq)
    out = []
    for r in range(n + 1):
        for S in combinations(range(n), r):
            if all(y in S for x in S for y in range(n) if leq[x][y]):
                out.append(frozenset(S))
    return out


def _matmul(A, B, p=P):
    return [[sum(A[i][k] * B[k][j] for k in range(len(B))) % p for j in range(len(B[0]) if B else 0)]
            for i in range(len(A))]


def natural_family_dim(leq, pts, fdims, gdims, frho, grho, p: int = P) -> int:
    """Dimension of families (phi_y: F_y -> G_y), y in pts, with G_rho phi_y = phi_z F_rho.

    ``frho[(y, z)]`` / ``grho[(y, z)]`` are nested lists for every related pair y < z.
    Unknowns are the matrix entries of every phi_y, row-major, in order of pts.
    """
    offs, o = {}, 0
    for y in pts:
        offs[y] = o
        o += gdims[y] * fdims[y]
    rows = []
    for y in pts:
        for z in pts:
            if y == z or not leq[y][z]:
                continue
            # entry (r, c) of  G_rho[y,z] phi_y - phi_z F_rho[y,z]
            for r in range(gdims[z]):
                for c in range(fdims[y]):
                    row = [0] * o
                    for k in range(gdims[y]):
                        row[offs[y] + k * fdims[y] + c] += grho[(y, z)][r][k]
                    for k in range(fdims[z]):
                        row[offs[z] + r * fdims[z] + k] -= frho[(y, z)][k][c]
                    rows.append(row)
    return o - rank_mod_p(rows, p) if o else 0


def limit_dim(leq, pts, fdims, frho, p: int = P) -> int:
    """Dimension of compatible families (s_y), y in pts: natural maps out of the constant k."""
    ones = {y: 1 for y in pts}
    unit = {(y, z): [[1]] for y in pts for z in pts if y != z and leq[y][z]}
    return natural_family_dim(leq, pts, ones, fdims, unit, frho, p)
