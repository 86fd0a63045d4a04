"""Command-line front end.

    sixlab compute FORMULA [--space S] [--input NAME ...]
    sixlab verify {structure,rows,diagrams,omega,fml,all}
    sixlab describe ENTITY...
    sixlab check-row ROW
    sixlab check-diagram NAME

Exit status: 0 success, 1 verification failure, 2 usage, parse or type error.
"""
from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import click
import numpy as np

from . import chaincx as cx
from . import enh as en
from . import exactla as la
from . import finsite as fs
from . import fml
from . import resolve as rs
from . import sheafcx as sh
from . import verify as vf

__all__ = ["WorkspaceConfig", "load_workspace", "main", "cmd_compute", "cmd_verify", "cmd_describe"]

USAGE_ERROR = 2
FAILED = 1


@dataclass
class WorkspaceConfig:
    """Field, seed, instance count and the named entities available to formulas."""

    prime: int = la.DEFAULT_PRIME
    seed: int = 0
    instances: int | None = None
    space: str = "sierpinski"
    extra: dict[str, Any] = field(default_factory=dict)

    def workspace(self) -> fml.Workspace:
        ws = fml.default_workspace(self.space if self.space in en.BUILTIN_SITES else None)
        if self.extra:
            _register(ws, self.extra)
            if self.space in ws.spaces and self.space not in en.BUILTIN_SITES:
                X = ws.spaces[self.space]
                ws.objects.setdefault("constK", ws.objects[f"k_{self.space}"])
                for x, nm in enumerate(X.names):
                    if nm not in ws.immersions and nm not in ws.maps and nm not in ws.objects:
                        ws.immersions[nm] = fs.factor_locally_closed(X, [x])
        if self.space not in ws.spaces:
            raise click.UsageError(f"unknown site {self.space!r}")
        return ws


def _register(ws: fml.Workspace, doc: dict) -> None:
    for name, sd in doc.get("spaces", {}).items():
        ws.add_space(name, fs.FinSpace.from_json(sd))
    for name, md in doc.get("maps", {}).items():
        S, T = ws.get_space(md["source"]), ws.get_space(md["target"])
        ws.add_map(name, fs.ContinuousMap(S, T, tuple(_index(T, a) for a in md["assign"])))
    for name, jd in doc.get("immersions", {}).items():
        X = ws.get_space(jd["site"])
        ws.add_immersion(name, fs.factor_locally_closed(X, [_index(X, p) for p in jd["subset"]]))
    for name, od in doc.get("objects", {}).items():
        X = ws.get_space(od["space"])
        ws.add_object(name, sh.SheafComplex.from_json(od, X))


def _index(X: fs.FinSpace, p) -> int:
    return int(p) if isinstance(p, int) else X.index(p)


def load_workspace(path: str | None, prime: int, seed: int, instances: int | None, space: str) -> WorkspaceConfig:
    extra = {}
    if path:
        extra = json.loads(Path(path).read_text(encoding="utf-8"))
        prime = int(extra.get("field", prime))
        seed = int(extra.get("seed", seed))
        if instances is None and "instances" in extra:
            instances = int(extra["instances"])
    return WorkspaceConfig(prime, seed, instances, space, extra)


# -- output ---------------------------------------------------------------------------------

def _jsonable(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _dump(report: dict, path: str | None) -> None:
    if not path:
        return
    text = json.dumps(report, sort_keys=True, indent=2, default=_jsonable) + "\n"
    if path == "-":
        click.echo(text, nl=False)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _fmt(h: dict[int, int]) -> str:
    return "{" + ", ".join(f"{n}:{v}" for n, v in sorted(h.items())) + "}"


def _strkeys(h: dict) -> dict:
    return {str(k): v for k, v in sorted(h.items())}


# -- commands -----------------------------------------------------------------------------------

def _common(f):
    opts = [
        click.option("--field", "prime", type=int, default=la.DEFAULT_PRIME, show_default=True, help="Prime modulus."),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--instances", type=int, default=None, help="Override every instance count."),
        click.option("--workspace", "workspace_path", type=click.Path(exists=True, dir_okay=False),
                     default=None, help="Workspace JSON with spaces, maps, immersions and objects."),
        click.option("--space", default="sierpinski", show_default=True, help="Primary site."),
        click.option("--json", "json_path", default=None, help="Write the JSON report here ('-' for stdout)."),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def main() -> None:
    """Sheaves on finite spaces: resolutions, six operations, and their enhancements."""


def _run(prime: int, fn, *args):
    try:
        with la.prime_field(prime):
            return fn(*args)
    except ValueError as e:
        if isinstance(e, (fml.FmlError, en.EnhError, fs.SpaceError)) or "modulus" in str(e):
            click.echo(f"error: {e}", err=True)
            sys.exit(USAGE_ERROR)
        raise
    except KeyError as e:
        click.echo(f"error: {e.args[0] if e.args else e}", err=True)
        sys.exit(USAGE_ERROR)


def cmd_compute(cfg: WorkspaceConfig, formula: str, inputs: tuple[str, ...], backend: str,
                emit_resolution: bool) -> dict:
    """Parse, typecheck and interpret a formula; report cohomology."""
    ws = cfg.workspace()
    t = fml.parse(formula)
    rep = fml.typecheck(t, ws)
    ins = [ws.get_object(n) for n in inputs]
    report: dict[str, Any] = {"formula": fml.show(t), "backend": backend, "type": str(rep),
                              "prime": la.get_prime(), "inputs": list(inputs)}
    if not fml.is_two_term(t):
        if backend == "enh":
            ins = [ws.enh.i(J) for J in ins]
        R = fml.interpret(t, ws, ins, backend)
        glob = cx.betti(sh.sections(rs.i_complex(R).output))
        report["H"] = _strkeys(glob)
        report["stalks"] = {R.space.names[x]: _strkeys(cx.betti(R.stalk(x))) for x in range(R.space.n)}
        report["total_dim"] = R.total_dim()
        if emit_resolution:
            report["resolution"] = rs.i_complex(R).to_json()
        click.echo(f"{report['formula']} : {report['type']}")
        click.echo(f"H = {_fmt(glob)}")
    else:
        report["formally_invertible"] = rep.invertible
        if backend == "enh":
            z = fml.interpret(t, ws, [ws.enh.i(J) for J in ins], "enh")
            report["legs"] = z.report()
            report["two_iso"] = en.check_two_iso(z)
            action = en.zigzag_cohomology(z)
        else:
            action = fml.interpret(t, ws, ins, "trcat")
        report["cohomology_action"] = {f"{x}:{n}": m.tolist() for (x, n), m in sorted(action.items())}
        click.echo(f"{report['formula']} : {report['type']}")
        click.echo(f"formally invertible: {rep.invertible}")
        if "two_iso" in report:
            click.echo(f"2-isomorphism: {report['two_iso']}")
        if emit_resolution:
            report["resolution"] = [rs.i_complex(J).to_json() for J in ins]
    return report


@main.command("compute")
@click.argument("formula")
@click.option("--input", "inputs", multiple=True, help="Object bound to the next slot (repeatable).")
@click.option("--backend", type=click.Choice(["enh", "trcat"]), default="enh", show_default=True)
@click.option("--emit-resolution", is_flag=True, help="Include the resolution (with iota) in the JSON report.")
@_common
def compute(formula, inputs, backend, emit_resolution, prime, seed, instances, workspace_path, space, json_path):
    """Evaluate FORMULA and print cohomology dimensions."""
    cfg = load_workspace(workspace_path, prime, seed, instances, space)
    report = _run(cfg.prime, cmd_compute, cfg, formula, inputs, backend, emit_resolution)
    _dump(report, json_path)


def _first_failure(report: dict) -> dict | None:
    for name, r in sorted(report["checks"].items()):
        if r["verdict"] != "pass":
            return {"check": name, "detail": r}
    return None


def cmd_verify(cfg: WorkspaceConfig, suite: str) -> dict:
    if cfg.instances == 0:
        click.echo("warning: --instances 0 runs no sampled instances; the pass is vacuous", err=True)

    def progress(name, r):
        click.echo(f"{name:<12} {r['verdict']}")

    report = vf.run(suite, cfg.seed, cfg.instances, progress)
    if report["verdict"] != "pass":
        report["first_failure"] = _first_failure(report)
    click.echo(f"verify {suite}: {report['verdict']}")
    return report


@main.command("verify")
@click.argument("suite", type=click.Choice(sorted(vf.GROUPS)))
@_common
def verify(suite, prime, seed, instances, workspace_path, space, json_path):
    """Run property suites; exit 0 iff all pass."""
    cfg = load_workspace(workspace_path, prime, seed, instances, space)
    report = _run(cfg.prime, cmd_verify, cfg, suite)
    _dump(report, json_path)
    sys.exit(0 if report["verdict"] == "pass" else FAILED)


def _describe_space(name: str, X: fs.FinSpace) -> dict:
    covers = [[X.names[x], X.names[y]] for x, y in X.covers()]
    return {"kind": "site", "name": name, "points": list(X.names), "covers": covers,
            "opens": len(X.opens()), "chain_length": X.chain_length(),
            "closed_points": [X.names[x] for x in range(X.n) if X.is_closed([x])],
            "summary": f"{X.n} point{'s' * (X.n != 1)}, {len(covers)} relation{'s' * (len(covers) != 1)}"}


def _describe_object(name: str, F: sh.SheafComplex, ws: fml.Workspace) -> dict:
    X = F.space
    return {"kind": "object", "name": name, "site": ws.site_name(X),
            "stalk_dims": {X.names[x]: _strkeys({n: F.dim(x, n) for n in F.dims if F.dim(x, n)})
                           for x in range(X.n)},
            "summary": f"object on {ws.site_name(X)}, total dimension {F.total_dim()}"}


def _describe_resolution(name: str, F: sh.SheafComplex, ws: fml.Workspace) -> dict:
    res = rs.i_complex(F)
    I = res.output
    X = F.space
    length = (max(I.dims) - max(F.dims)) if I.dims and F.dims else 0
    return {"kind": "resolution", "name": name, "site": ws.site_name(X), "length": length,
            "degrees": {str(n): {X.names[x]: I.dim(x, n) for x in range(X.n)} for n in sorted(I.dims)},
            "iota_quasi_iso": sh.is_quasi_iso(res.iota),
            "summary": f"length-{length} resolution in degrees {min(I.dims, default=0)}..{max(I.dims, default=0)}"}


def cmd_describe(cfg: WorkspaceConfig, entity: tuple[str, ...]) -> dict:
    ws = cfg.workspace()
    words = [w for w in entity if w not in ("of", "on")]
    if not words:
        raise KeyError("nothing to describe")
    if words[0] == "resolution":
        if len(words) < 2:
            raise KeyError("describe resolution NAME [SITE]")
        obj = words[1]
        if len(words) > 2:
            cfg = WorkspaceConfig(cfg.prime, cfg.seed, cfg.instances, words[2], cfg.extra)
            ws = cfg.workspace()
        if obj not in ws.objects:
            raise KeyError(f"unknown object {obj!r}")
        out = _describe_resolution(obj, ws.objects[obj], ws)
    else:
        name = words[0]
        if name in ws.spaces:
            out = _describe_space(name, ws.spaces[name])
        elif name in ws.objects:
            out = _describe_object(name, ws.objects[name], ws)
        elif name in ws.immersions:
            j = ws.immersions[name]
            out = {"kind": "immersion", "name": name, "site": ws.site_name(j.ambient),
                   "subset": [j.ambient.names[x] for x in j.subset], "closed": j.is_closed,
                   "open": j.is_open, "summary": f"{'closed' if j.is_closed else 'open' if j.is_open else 'locally closed'} "
                                                  f"immersion into {ws.site_name(j.ambient)}"}
        elif name in ws.maps:
            a = ws.maps[name]
            out = {"kind": "map", "name": name, "source": ws.site_name(a.source), "target": ws.site_name(a.target),
                   "assign": [a.target.names[y] for y in a.assign],
                   "summary": f"{ws.site_name(a.source)} -> {ws.site_name(a.target)}"}
        else:
            raise KeyError(f"unknown entity {name!r}")
    click.echo(f"{out['name']}: {out['summary']}")
    return out


@main.command("describe")
@click.argument("entity", nargs=-1, required=True)
@_common
def describe(entity, prime, seed, instances, workspace_path, space, json_path):
    """Describe a site, object, map or immersion, or 'resolution NAME [SITE]'."""
    cfg = load_workspace(workspace_path, prime, seed, instances, space)
    _dump(_run(cfg.prime, cmd_describe, cfg, entity), json_path)


@main.command("check-row")
@click.argument("row")
@_common
def check_row(row, prime, seed, instances, workspace_path, space, json_path):
    """Sample one row of the generator table and report its legs."""
    cfg = load_workspace(workspace_path, prime, seed, instances, space)
    try:
        name = en.canonical_row(row)
    except en.UnsupportedRow:
        name = None
    if name not in en.ROWS:
        click.echo(f"error: unknown row {row!r}", err=True)
        sys.exit(USAGE_ERROR)
    n = 25 if cfg.instances is None else cfg.instances
    r = _run(cfg.prime, en.check_row, name, n, cfg.seed)
    click.echo(f"{r['row']}: {r['verdict']} ({n} instances)")
    for leg in r["legs"]:
        click.echo(f"  {leg['tag']:<24} {'backward' if leg['backward'] else 'forward ':<8} qiso={leg['qiso']}")
    _dump(r, json_path)
    sys.exit(0 if r["verdict"] == "pass" else FAILED)


@main.command("check-diagram")
@click.argument("name", type=click.Choice(sorted(en.DIAGRAMS)))
@_common
def check_diagram(name, prime, seed, instances, workspace_path, space, json_path):
    """Check that a coherence diagram commutes up to an explicit homotopy."""
    cfg = load_workspace(workspace_path, prime, seed, instances, space)
    n = 25 if cfg.instances is None else cfg.instances
    r = _run(cfg.prime, en.check_diagram_suite, name, n, cfg.seed)
    click.echo(f"{name}: {r['verdict']} ({n} instances)")
    _dump(r, json_path)
    sys.exit(0 if r["verdict"] == "pass" else FAILED)


if __name__ == "__main__":
    main()
