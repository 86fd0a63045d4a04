"""Row reduction over F_p: compiled kernel against the numpy fallback.

    python3 benchmarks/bench_rref.py [--sizes 50 100 200 400] [--repeat 3]

Both kernels run on the same random matrices; results are checked equal
before timings are reported.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from sixlab import exactla as la


def _time(kernel: str, M: np.ndarray, repeat: int) -> tuple[float, np.ndarray]:
    la.set_kernel(kernel)
    best, out = float("inf"), None
    for _ in range(repeat):
        t = time.perf_counter()
        out = la.rref(M)[0]
        best = min(best, time.perf_counter() - t)
    return best, out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[50, 100, 200, 400])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    p = la.get_prime()
    have_compiled = la.kernel_backend() == "compiled"
    print(f"p = {p}, compiled kernel {'available' if have_compiled else 'NOT built'}")
    print(f"{'n':>6} {'rank':>6} {'numpy s':>10} {'compiled s':>11} {'speedup':>8}")
    try:
        for n in args.sizes:
            # rank-deficient square matrices exercise the zero-column path too
            r = max(1, (3 * n) // 4)
            M = (rng.integers(0, p, (n, r)) @ rng.integers(0, p, (r, n))) % p
            tn, Rn = _time("numpy", M, args.repeat)
            if have_compiled:
                tc, Rc = _time("compiled", M, args.repeat)
                assert np.array_equal(Rn, Rc), "kernels disagree"
                print(f"{n:>6} {la.rank(M):>6} {tn:>10.4f} {tc:>11.4f} {tn / tc:>7.1f}x")
            else:
                print(f"{n:>6} {la.rank(M):>6} {tn:>10.4f} {'-':>11} {'-':>8}")
    finally:
        if have_compiled:
            la.set_kernel("compiled")


if __name__ == "__main__":
    main()
