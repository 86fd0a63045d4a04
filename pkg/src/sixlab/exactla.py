"""Exact dense linear algebra over a prime field.

Matrices are plain ``numpy.int64`` arrays with entries in ``[0, p)``. The
modulus lives in a context variable so that every module downstream agrees on
the field without threading ``p`` through each call.

The hot loop (Gauss-Jordan elimination) runs in a compiled Cython kernel when
the extension is built, and in a vectorised numpy loop otherwise.
"""
from __future__ import annotations

import contextlib
import contextvars
import os
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "DEFAULT_PRIME", "QQ", "get_prime", "prime_field", "kernel_backend",
    "set_kernel", "mat", "zeros", "eye", "mul", "rref", "rank", "kernel",
    "solve", "inverse", "is_zero", "block", "to_json", "from_json",
]

DEFAULT_PRIME = 32003


class _Rational:
    """Sentinel selecting the exact-rational backend."""

    def __repr__(self) -> str:
        return "QQ"


QQ = _Rational()

_PRIME: contextvars.ContextVar[int] = contextvars.ContextVar("sixlab_prime", default=DEFAULT_PRIME)


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    i = 2
    while i * i <= p:
        if p % i == 0:
            return False
        i += 1
    return True


def get_prime() -> int:
    return _PRIME.get()


@contextlib.contextmanager
def prime_field(p: int) -> Iterator[int]:
    """Run a block over F_p."""
    if not _is_prime(p) or p >= 2**31:
        raise ValueError(f"modulus {p} is not a prime below 2^31")
    tok = _PRIME.set(p)
    try:
        yield p
    finally:
        _PRIME.reset(tok)


# -- elimination kernels ----------------------------------------------------

def _rref_numpy(A: np.ndarray, ncols: int, p: int) -> list[int]:
    m = A.shape[0]
    r = 0
    pivots: list[int] = []
    for c in range(ncols):
        if r >= m:
            break
        nz = np.flatnonzero(A[r:, c])
        if nz.size == 0:
            continue
        piv = r + int(nz[0])
        if piv != r:
            A[[r, piv]] = A[[piv, r]]
        s = pow(int(A[r, c]), p - 2, p)
        if s != 1:
            A[r] = A[r] * s % p
        col = A[:, c].copy()
        col[r] = 0
        idx = np.flatnonzero(col)
        if idx.size:
            A[idx] = (A[idx] - np.outer(col[idx], A[r])) % p
        pivots.append(c)
        r += 1
    return pivots


try:
    from ._kernels import rref_inplace as _rref_compiled
except ImportError:  # extension not built
    _rref_compiled = None

_KERNEL = "compiled" if _rref_compiled is not None else "numpy"
if os.environ.get("SIXLAB_KERNEL") == "numpy":
    _KERNEL = "numpy"


def kernel_backend() -> str:
    """Name of the elimination kernel currently in use."""
    return _KERNEL


def set_kernel(name: str) -> None:
    """Select ``"compiled"`` or ``"numpy"`` elimination."""
    global _KERNEL
    if name == "compiled" and _rref_compiled is None:
        raise RuntimeError("compiled kernel is not built")
    if name not in ("compiled", "numpy"):
        raise ValueError(name)
    _KERNEL = name


def _eliminate(A: np.ndarray, ncols: int, p: int) -> list[int]:
    if _KERNEL == "compiled":
        return list(_rref_compiled(A, ncols, p))
    return _rref_numpy(A, ncols, p)


# -- rational backend ---------------------------------------------------------

def _rref_rational(A: list[list[Fraction]], ncols: int) -> list[int]:
    m = len(A)
    r = 0
    pivots = []
    for c in range(ncols):
        piv = next((i for i in range(r, m) if A[i][c] != 0), None)
        if piv is None:
            continue
        A[r], A[piv] = A[piv], A[r]
        s = A[r][c]
        A[r] = [x / s for x in A[r]]
        for i in range(m):
            if i != r and A[i][c] != 0:
                f = A[i][c]
                A[i] = [x - f * y for x, y in zip(A[i], A[r])]
        pivots.append(c)
        r += 1
        if r == m:
            break
    return pivots


def _as_fraction_rows(M) -> list[list[Fraction]]:
    return [[Fraction(x) for x in row] for row in np.asarray(M, dtype=object).tolist()]


# -- constructors -------------------------------------------------------------

def mat(rows: Sequence[Sequence[int]] | np.ndarray, p: int | None = None) -> np.ndarray:
    """Matrix with entries reduced mod p. Empty row lists need ``np.zeros`` shapes."""
    p = p or get_prime()
    a = np.asarray(rows, dtype=np.int64)
    if a.ndim == 1:
        a = a.reshape(-1, 1) if a.size else a.reshape(0, 0)
    return np.ascontiguousarray(a % p)


def zeros(r: int, c: int) -> np.ndarray:
    return np.zeros((r, c), dtype=np.int64)


def eye(n: int) -> np.ndarray:
    return np.eye(n, dtype=np.int64)


def mul(*ms: np.ndarray, p: int | None = None) -> np.ndarray:
    """Product of matrices mod p, left to right."""
    p = p or get_prime()
    out = ms[0]
    for m in ms[1:]:
        out = (out @ m) % p
    return out


def is_zero(M: np.ndarray) -> bool:
    return not np.any(M)


def block(rows: Sequence[Sequence[np.ndarray]]) -> np.ndarray:
    """``np.block`` that tolerates zero-size pieces."""
    heights = [max((b.shape[0] for b in row), default=0) for row in rows]
    widths = [max(rows[i][j].shape[1] for i in range(len(rows))) for j in range(len(rows[0]))] if rows else []
    out = zeros(sum(heights), sum(widths))
    r0 = 0
    for i, row in enumerate(rows):
        c0 = 0
        for j, b in enumerate(row):
            if b.size:
                out[r0:r0 + b.shape[0], c0:c0 + b.shape[1]] = b
            c0 += widths[j]
        r0 += heights[i]
    return out


# -- core operations ----------------------------------------------------------

def rref(M: np.ndarray, p: int | None = None, field=None):
    """Return ``(R, T, rank)`` with ``T @ M == R`` and R reduced row echelon.

    Pass ``field=QQ`` for the exact-rational backend (object arrays of Fraction).
    """
    m, n = M.shape
    if field is QQ:
        A = [row + [Fraction(int(i == j)) for j in range(m)] for i, row in enumerate(_as_fraction_rows(M))]
        piv = _rref_rational(A, n)
        A = np.array(A, dtype=object).reshape(m, n + m)
        return A[:, :n], A[:, n:], len(piv)
    p = p or get_prime()
    A = np.zeros((m, n + m), dtype=np.int64)
    A[:, :n] = M % p
    A[:, n:] = np.eye(m, dtype=np.int64)
    piv = _eliminate(A, n, p)
    return A[:, :n].copy(), A[:, n:].copy(), len(piv)


def _pivots(M: np.ndarray, p: int) -> tuple[np.ndarray, list[int]]:
    A = np.ascontiguousarray(M % p, dtype=np.int64)
    piv = _eliminate(A, A.shape[1], p)
    return A, piv


def rank(M: np.ndarray, p: int | None = None, field=None) -> int:
    if M.size == 0:
        return 0
    if field is QQ:
        return len(_rref_rational(_as_fraction_rows(M), M.shape[1]))
    p = p or get_prime()
    return len(_pivots(M, p)[1])


def kernel(M: np.ndarray, p: int | None = None, field=None) -> np.ndarray:
    """Pivot-canonical kernel basis as columns.

    Column k is the basis vector with a 1 in the k-th free coordinate and 0 in
    every other free coordinate.
    """
    m, n = M.shape
    if field is QQ:
        A = _as_fraction_rows(M)
        piv = _rref_rational(A, n)
        free = [c for c in range(n) if c not in set(piv)]
        K = np.array([[Fraction(0)] * len(free) for _ in range(n)], dtype=object).reshape(n, len(free))
        for k, f in enumerate(free):
            K[f, k] = Fraction(1)
            for r, c in enumerate(piv):
                K[c, k] = -A[r][f]
        return K
    p = p or get_prime()
    if m == 0:
        return eye(n)
    R, piv = _pivots(M, p)
    pivset = set(piv)
    free = [c for c in range(n) if c not in pivset]
    K = zeros(n, len(free))
    if free:
        K[free, np.arange(len(free))] = 1
        if piv:
            K[piv, :] = (-R[:len(piv)][:, free]) % p
    return K


def free_rows(K: np.ndarray) -> np.ndarray:
    """Rows where a pivot-canonical kernel basis restricts to the identity."""
    n, k = K.shape
    out = []
    for j in range(k):
        col = K[:, j]
        nz = np.flatnonzero(col)
        # the free coordinate is the last nonzero entry
        out.append(int(nz[-1]))
    return np.asarray(out, dtype=np.int64)


def solve(A: np.ndarray, b: np.ndarray, p: int | None = None, field=None) -> np.ndarray | None:
    """Pivot-canonical particular solution of ``A x = b``, or None."""
    if A.shape[0] != b.shape[0]:
        raise ValueError(f"row mismatch: A has {A.shape[0]}, b has {b.shape[0]}")
    m, n = A.shape
    k = b.shape[1]
    if field is QQ:
        rows = [ra + rb for ra, rb in zip(_as_fraction_rows(A), _as_fraction_rows(b))] if m else []
        piv = _rref_rational(rows, n)
        for r in range(len(piv), m):
            if any(x != 0 for x in rows[r][n:]):
                return None
        x = np.array([[Fraction(0)] * k for _ in range(n)], dtype=object).reshape(n, k)
        for r, c in enumerate(piv):
            x[c, :] = rows[r][n:]
        return x
    p = p or get_prime()
    if m == 0:
        return zeros(n, k)
    Ab = np.zeros((m, n + k), dtype=np.int64)
    Ab[:, :n] = A % p
    Ab[:, n:] = b % p
    piv = _eliminate(Ab, n, p)
    r = len(piv)
    if np.any(Ab[r:, n:]):
        return None
    x = zeros(n, k)
    if r:
        x[piv, :] = Ab[:r, n:]
    return x


def inverse(M: np.ndarray, p: int | None = None) -> np.ndarray:
    n = M.shape[0]
    if M.shape != (n, n):
        raise ValueError("inverse of a non-square matrix")
    x = solve(M, eye(n), p)
    if x is None or rank(M, p) != n:
        raise ValueError("matrix is singular")
    return x


def left_inverse(M: np.ndarray, p: int | None = None) -> np.ndarray:
    """Some L with ``L @ M == I`` for M of full column rank."""
    p = p or get_prime()
    m, n = M.shape
    if n == 0:
        return zeros(0, m)
    _, T, r = rref(M, p)
    if r != n:
        raise ValueError("matrix is not injective")
    return T[:n]


# -- serialisation ------------------------------------------------------------

def to_json(M: np.ndarray) -> dict:
    return {"shape": [int(M.shape[0]), int(M.shape[1])], "rows": M.astype(int).tolist()}


def from_json(doc) -> np.ndarray:
    if isinstance(doc, dict):
        r, c = doc["shape"]
        return mat(doc["rows"]).reshape(r, c) if r and c else zeros(r, c)
    a = np.asarray(doc, dtype=np.int64)
    return mat(a) if a.size else zeros(len(doc), 0)
