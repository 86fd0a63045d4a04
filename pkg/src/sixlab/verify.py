"""Seeded property suites behind ``sixlab verify`` and the acceptance run.

Every suite returns a JSON-ready dict with a ``verdict`` of "pass" or "fail".
Reports contain no timings so that a fixed seed gives byte-identical output.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from . import chaincx as cx
from . import enh as en
from . import exactla as la
from . import finsite as fs
from . import fml
from . import resolve as rs
from . import sheafcx as sh

__all__ = [
    "structure_suite", "resolution_suite", "cohomology_suite", "shriek_values", "rows_suite",
    "diagrams_suite", "omega_suite", "fml_suite", "SUITES", "GROUPS", "run", "derived_cohomology",
]


def _rng(seed: int, tag: str) -> np.random.Generator:
    return np.random.default_rng([seed, sum(map(ord, tag))])


def _same(f: cx.GradedMap, M: dict[int, np.ndarray]) -> bool:
    return all(np.array_equal(f.comp(n), M[n]) for n in f.degrees())


def _verdict(ok: bool) -> str:
    return "pass" if ok else "fail"


# -- chain complexes ------------------------------------------------------------------------

def structure_suite(instances: int = 300, seed: int = 0) -> dict:
    """Semisimple decomposition is an exact isomorphism; monos reassemble from basic types."""
    rng = _rng(seed, "structure")
    dec_fail, mono_fail = [], []
    for k in range(instances):
        A = cx.random_complex(rng, max_dim=6, window=(-3, 3))
        d = cx.decompose_semisimple(A)
        ok = (d.iso.is_chain_map() and d.inverse.is_chain_map()
              and cx.compose(d.inverse, d.iso) == cx.identity(A)
              and cx.compose(d.iso, d.inverse) == cx.identity(d.target)
              and all(not d.S.diff(n).any() for n in d.S.degrees())
              and {n: d.S.dim(n) for n in d.S.degrees() if d.S.dim(n)} == cx.betti(A))
        if not ok:
            dec_fail.append(k)
        m = cx.random_mono(rng)
        md = cx.classify_mono(m)
        ok = (_same(m, md.reassemble())
              and all(tag in cx.MONO_TYPES for tag, *_ in md.summands))
        if not ok:
            mono_fail.append(k)
    return {"check": "structure", "instances": instances, "decomposition_failures": dec_fail,
            "mono_failures": mono_fail, "verdict": _verdict(not dec_fail and not mono_fail)}


# -- resolution ------------------------------------------------------------------------------

def _rand_site(rng: np.random.Generator, max_points: int = 6, max_chain: int = 3) -> fs.FinSpace:
    return fs.random_space(rng, int(rng.integers(1, max_points + 1)), max_chain=max_chain)


def resolution_suite(instances: int = 100, seed: int = 0) -> dict:
    """iota is a quasi-isomorphism into a certified injective complex; i is a strict dg functor."""
    rng = _rng(seed, "resolution")
    fails: dict[str, list[int]] = {"qiso": [], "injective": [], "window": [], "functor": [], "dg": []}
    for k in range(instances):
        X = _rand_site(rng)
        F = sh.random_sheaf(rng, X, max_dim=2, window=(-1, 1))
        res = rs.i_complex(F)
        I = res.output
        if not sh.is_quasi_iso(res.iota):
            fails["qiso"].append(k)
        if not all(rs.is_injective_sheaf(I, n)[0] for n in I.dims):
            fails["injective"].append(k)
        lo, hi = min(F.dims, default=0), max(F.dims, default=0)
        if I.dims and (min(I.dims) < lo or max(I.dims) - hi > X.chain_length()):
            fails["window"].append(k)
        G = sh.random_sheaf(rng, X, max_dim=2, window=(-1, 1))
        H = sh.random_sheaf(rng, X, max_dim=2, window=(-1, 1))
        a, b = (int(t) for t in rng.integers(-1, 2, size=2))
        f = sh.random_graded_map(rng, F, G, a)
        g = sh.random_graded_map(rng, G, H, b)
        if rs.i_on_graded_map(sh.compose(g, f)) != sh.compose(rs.i_on_graded_map(g), rs.i_on_graded_map(f)):
            fails["functor"].append(k)
        if rs.i_on_graded_map(f.differential()) != rs.i_on_graded_map(f).differential():
            fails["dg"].append(k)
    return {"check": "resolution", "instances": instances, "failures": fails,
            "verdict": _verdict(not any(fails.values()))}


# -- cohomology -------------------------------------------------------------------------------

def derived_cohomology(X: fs.FinSpace) -> dict[int, int]:
    """H*(X, k) through global sections of the resolution of the constant sheaf."""
    K = sh.constant(X, cx.point_complex(0))
    return cx.betti(sh.sections(rs.i_complex(K).output))


FIXED_COHOMOLOGY = {"pt": {0: 1}, "sierpinski": {0: 1}, "pseudo-circle": {0: 1, 1: 1}, "interval": {0: 1}}


def cohomology_suite(instances: int = 50, seed: int = 0) -> dict:
    """Resolution-based sheaf cohomology against the nerve cochain complex."""
    rng = _rng(seed, "cohomology")
    fails = []
    for k in range(instances):
        X = _rand_site(rng)
        if derived_cohomology(X) != cx.betti(fs.nerve_cochain(X)):
            fails.append(k)
    fixed = {}
    for name, want in FIXED_COHOMOLOGY.items():
        got = derived_cohomology(en.builtin_site(name))
        fixed[name] = {"got": {str(n): v for n, v in sorted(got.items())}, "pass": got == want}
    ok = not fails and all(v["pass"] for v in fixed.values())
    return {"check": "cohomology", "instances": instances, "failures": fails, "fixed": fixed,
            "verdict": _verdict(ok)}


def _point(X: fs.FinSpace, name: str) -> int:
    return X.names.index(name)


def shriek_values() -> dict:
    """Local cohomology at closed points and compactly supported sections of an open."""
    E = en.Enh()
    v0 = en.var(0)
    S, P = en.builtin_site("sierpinski"), en.builtin_site("pseudo-circle")
    out = {}

    def local(X: fs.FinSpace, x: str) -> dict[int, int]:
        j = fs.factor_locally_closed(X, [_point(X, x)])
        K = sh.constant(X, cx.point_complex(0))
        R = en.eval_derived(en.FunctorExpr("ushriek", (v0,), j), [K], E)
        return cx.betti(sh.sections(R))

    got = local(S, "c")
    out["sierpinski_closed_point"] = {"got": {str(n): v for n, v in sorted(got.items())}, "pass": got == {}}
    got = local(P, "x")
    out["pseudo_circle_closed_point"] = {"got": {str(n): v for n, v in sorted(got.items())},
                                         "pass": got == {1: 1}}
    j = fs.factor_locally_closed(S, [_point(S, "o")])
    K = sh.constant(j.space, cx.point_complex(0))
    R = en.eval_derived(en.FunctorExpr("gamma", (en.FunctorExpr("shriek", (v0,), j),)), [K], E)
    got = cx.betti(sh.sections(R))
    out["sierpinski_open_shriek_sections"] = {"got": {str(n): v for n, v in sorted(got.items())},
                                             "pass": got == {}}
    return {"check": "shriek", "values": out, "verdict": _verdict(all(v["pass"] for v in out.values()))}


# -- enhanced setting ----------------------------------------------------------------------------

def rows_suite(instances: int = 25, seed: int = 0) -> dict:
    rows = {r: en.check_row(r, instances, seed) for r in en.ROWS}
    compact = {r: {"verdict": v["verdict"], "marked_iso": v["marked_iso"], "legs": v["legs"],
                   "failed_instances": [x["instance"] for x in v["results"] if not x["pass"]]}
               for r, v in rows.items()}
    ok = all(v["verdict"] == "pass" for v in rows.values())
    return {"check": "rows", "instances": instances, "rows": compact, "verdict": _verdict(ok)}


def diagrams_suite(instances: int = 25, seed: int = 0) -> dict:
    ds = {d: en.check_diagram_suite(d, instances, seed) for d in en.DIAGRAMS}
    compact = {d: {"verdict": v["verdict"],
                   "failed_instances": [x["instance"] for x in v["results"] if not x["witness"]]}
               for d, v in ds.items()}
    ok = all(v["verdict"] == "pass" for v in ds.values())
    return {"check": "diagrams", "instances": instances, "diagrams": compact, "verdict": _verdict(ok)}


def omega_suite(instances: int = 25, seed: int = 0, maps: int = 10) -> dict:
    r = en.check_omega_suite(instances, maps, seed)
    gens = {g: {"qiso": all(x["qiso"] for x in v), "natural": all(x["natural"] for x in v)}
            for g, v in r["generators"].items()}
    return {"check": "omega", "instances": instances, "maps": maps, "generators": gens,
            "verdict": r["verdict"]}


def fml_suite(instances: int = 50, seed: int = 0) -> dict:
    r = fml.soundness_suite(terms=instances, bindings=2, seed=seed)
    failed = [x for x in r["results"] if not x["pass"]]
    return {"check": "fml", "instances": instances,
            "formally_invertible": sum(x["formally_invertible"] for x in r["results"]),
            "failures": failed, "corpus": r["corpus"], "corpus_failures": r["corpus_failures"],
            "verdict": r["verdict"]}


# -- driver ---------------------------------------------------------------------------------------

SUITES: dict[str, tuple[Callable[..., dict], int]] = {
    # name -> (suite, default instance count)
    "structure": (structure_suite, 300),
    "resolution": (resolution_suite, 100),
    "cohomology": (cohomology_suite, 50),
    "shriek": (lambda instances=0, seed=0: shriek_values(), 0),
    "rows": (rows_suite, 25),
    "diagrams": (diagrams_suite, 25),
    "omega": (omega_suite, 25),
    "fml": (fml_suite, 50),
}

GROUPS = {
    "structure": ["structure", "resolution", "cohomology", "shriek"],
    "rows": ["rows"],
    "diagrams": ["diagrams"],
    "omega": ["omega"],
    "fml": ["fml"],
}
GROUPS["all"] = sorted(SUITES)


def run(group: str, seed: int = 0, instances: int | None = None,
        progress: Callable[[str, dict], None] | None = None) -> dict:
    """Run the suites of a group in sorted order; ``instances`` overrides every default count."""
    if group not in GROUPS:
        raise KeyError(f"unknown suite {group!r}; choose from {', '.join(sorted(GROUPS))}")
    out = {}
    for name in sorted(GROUPS[group]):
        fn, default = SUITES[name]
        n = default if instances is None else instances
        r = fn(instances=n, seed=seed)
        out[name] = r
        if progress:
            progress(name, r)
    ok = all(r["verdict"] == "pass" for r in out.values())
    return {"suite": group, "seed": seed, "prime": la.get_prime(), "checks": out, "verdict": _verdict(ok)}
