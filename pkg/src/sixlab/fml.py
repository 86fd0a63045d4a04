"""Formula terms: a small language for functor composites and 2-cells between them.

One-morphism terms are trees over the generating functors (``⊗``, ``Hom``,
``HomG``, ``Γ``, ``f^*``, ``f_*``, ``j_!``, ``j^!``, ``f^-1`` and named objects)
with numbered input slots. Two-morphism terms are built from table rows
(``row:<label> @ bindings``), ``ud:g`` for a registered chain map, identities,
formal inverses, vertical composition ``s · t`` (``t`` first), whiskering and
k-linear combinations. The normative grammar is ``docs/fml_grammar.ebnf``.

Terms are interpreted either in the enhanced setting (1-morphisms by
:func:`sixlab.enh.eval_underlined`, 2-morphisms as zig-zags) or in the
triangulated one (derived representatives, and stalk-cohomology actions).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Iterator, Sequence, Union

import numpy as np

from . import chaincx as cx
from . import enh as en
from . import exactla as la
from . import finsite as fs
from . import resolve as rs
from . import sheafcx as sh
from .enh import Enh, FunctorExpr, Leg, RowContext, ZigZag
from .finsite import ContinuousMap, FinSpace, LocallyClosedImmersion
from .sheafcx import SheafComplex, SheafMap

__all__ = [
    "FmlError", "FmlSyntaxError", "FmlTypeError", "FmlUnsupported", "Workspace", "default_workspace",
    "random_workspace", "MapRef", "Slot", "Obj", "App", "Row", "Inv", "Ud", "Id", "VComp", "Scale",
    "Sum", "Whisker", "Pre", "ObjectTerm", "TypeReport", "TwoTypeReport", "parse", "show",
    "typecheck", "to_expr", "is_formally_invertible", "interpret", "golden_corpus",
    "random_two_term", "soundness_suite", "is_two_term", "token_count", "show_expr",
]


class FmlError(ValueError):
    pass


class FmlSyntaxError(FmlError):
    def __init__(self, msg: str, text: str, pos: int):
        line = text.count("\n", 0, pos) + 1
        col = pos - (text.rfind("\n", 0, pos) + 1) + 1
        super().__init__(f"{msg} at line {line}, column {col}")
        self.line, self.column = line, col


class FmlTypeError(FmlError):
    def __init__(self, msg: str, subterm: str = ""):
        super().__init__(f"{msg}" + (f" in {subterm}" if subterm else ""))
        self.subterm = subterm


class FmlUnsupported(FmlError):
    pass


# -- syntax trees -----------------------------------------------------------------------------

GENS = ("tensor", "hom", "homg", "gamma", "pull", "push", "shriek", "ushriek", "pullinv")
_SUFFIX = {"^*": "pull", "_*": "push", "_!": "shriek", "^!": "ushriek", "^-1": "pullinv"}
_SUFFIX_OF = {v: k for k, v in _SUFFIX.items()}
_ARITY = {"tensor": 2, "hom": 2, "homg": 2}


@dataclass(frozen=True)
class MapRef:
    """A named map, a composite ``{a,b}`` (a after b) or a base change ``{u|v}``."""

    kind: str  # "name" | "comp" | "bc"
    names: tuple[str, ...]

    def __str__(self) -> str:
        if self.kind == "name":
            return self.names[0]
        sep = "," if self.kind == "comp" else "|"
        return "{" + sep.join(self.names) + "}"


@dataclass(frozen=True)
class Slot:
    index: int
    site: str | None = None
    op: bool = False


@dataclass(frozen=True)
class Obj:
    name: str


@dataclass(frozen=True)
class App:
    gen: str
    args: tuple
    ref: MapRef | None = None


OneMor = Union[Slot, Obj, App]


@dataclass(frozen=True)
class Row:
    label: str
    bindings: tuple[str, ...] = ()


@dataclass(frozen=True)
class Inv:
    term: Any


@dataclass(frozen=True)
class Ud:
    name: str


@dataclass(frozen=True)
class Id:
    mor: Any


@dataclass(frozen=True)
class VComp:
    """outer · inner: inner first."""

    outer: Any
    inner: Any


@dataclass(frozen=True)
class Scale:
    c: int
    term: Any


@dataclass(frozen=True)
class Sum:
    terms: tuple


@dataclass(frozen=True)
class Whisker:
    """A generator applied with one argument a two-term; other arguments are one-terms."""

    gen: str
    args: tuple
    ref: MapRef | None = None


@dataclass(frozen=True)
class Pre:
    """term ∘ (G_0, ..., G_{n-1}): the two-term evaluated at the given one-terms."""

    term: Any
    args: tuple


_TWO = (Row, Inv, Ud, Id, VComp, Scale, Sum, Whisker, Pre)


def is_two_term(t: Any) -> bool:
    return isinstance(t, _TWO)


# -- slots ------------------------------------------------------------------------------------

def _slots(t: OneMor) -> Iterator[Slot]:
    if isinstance(t, Slot):
        yield t
    elif isinstance(t, App):
        for a in t.args:
            yield from _slots(a)


def _map_slots(t: OneMor, fn) -> OneMor:
    if isinstance(t, Slot):
        return fn(t)
    if isinstance(t, App):
        return App(t.gen, tuple(_map_slots(a, fn) for a in t.args), t.ref)
    return t


def _arity(t: OneMor) -> int:
    return max((s.index for s in _slots(t)), default=-1) + 1


def _number(t: OneMor, text: str, pos: int) -> OneMor:
    """Give implicit slots (index -1) consecutive numbers; explicit numbering is kept."""
    ss = list(_slots(t))
    implicit = [s.index < 0 for s in ss]
    if all(implicit):
        it = iter(range(len(ss)))
        return _map_slots(t, lambda s: Slot(next(it), s.site, s.op))
    if any(implicit):
        raise FmlSyntaxError("cannot mix '-' and '#k' slots", text, pos)
    used = {s.index for s in ss}
    if used != set(range(len(used))):
        raise FmlSyntaxError("explicit slots must be numbered #0..#n-1", text, pos)
    return t


def _shift(t: OneMor, k: int) -> OneMor:
    return _map_slots(t, lambda s: Slot(s.index + k, s.site, s.op))


def _substitute(t: OneMor, subs: Sequence[OneMor]) -> OneMor:
    """Replace slot i by subs[i] (already numbered globally)."""
    return _map_slots(t, lambda s: subs[s.index])


def _compose(A: OneMor, B: OneMor) -> OneMor:
    """B into A's first slot; A's other slots move past B's."""
    m = _arity(B)
    subs = [B] + [Slot(i - 1 + m) for i in range(1, _arity(A))]
    out = _map_slots(A, lambda s: subs[s.index] if s.index else B)
    idx = [s.index for s in _slots(out)]
    if idx == list(range(len(idx))):
        return out
    return out


# -- lexer ----------------------------------------------------------------------------------

_IDENT = r"[A-Za-z][A-Za-z0-9']*(?:[-_][A-Za-z0-9']+)*"
_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<row>row:(?P<label>[^\s@,()]+))
  | (?P<obj>obj:(?P<oname>""" + _IDENT + r"""))
  | (?P<ud>ud:(?P<uname>""" + _IDENT + r"""))
  | (?P<suffix>\^\*|_\*|_!|\^!|\^-1)
  | (?P<hash>\#(?P<hnum>\d+))
  | (?P<num>\d+)
  | (?P<ident>""" + _IDENT + r""")
  | (?P<sym>∘|·|<<|⊗|Γ|\^op|[().,+*{}|@:\-])
""", re.VERBOSE)


@dataclass
class _Tok:
    kind: str
    value: str
    pos: int


def _lex(text: str) -> list[_Tok]:
    out, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise FmlSyntaxError(f"unexpected character {text[pos]!r}", text, pos)
        kind = m.lastgroup
        if kind in ("label", "oname", "uname", "hnum"):
            kind = {"label": "row", "oname": "obj", "uname": "ud", "hnum": "hash"}[kind]
        if m.group("row"):
            out.append(_Tok("row", m.group("label"), pos))
        elif m.group("obj"):
            out.append(_Tok("obj", m.group("oname"), pos))
        elif m.group("ud"):
            out.append(_Tok("ud", m.group("uname"), pos))
        elif m.group("hash"):
            out.append(_Tok("hash", m.group("hnum"), pos))
        elif not m.group("ws"):
            k = next(g for g in ("suffix", "num", "ident", "sym") if m.group(g))
            v = m.group(k)
            if k == "ident" and v in ("Tensor", "Gamma"):
                k, v = "sym", {"Tensor": "⊗", "Gamma": "Γ"}[v]
            out.append(_Tok(k, v, pos))
        pos = m.end()
    out.append(_Tok("end", "", len(text)))
    return out


# -- parser ------------------------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _lex(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def err(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.tok
        return FmlSyntaxError(msg, self.text, tok.pos)

    def at(self, kind: str, value: str | None = None) -> bool:
        return self.tok.kind == kind and (value is None or self.tok.value == value)

    def take(self, kind: str, value: str | None = None) -> _Tok:
        if not self.at(kind, value):
            want = value or kind
            got = self.tok.value or self.tok.kind
            raise self.err(f"expected {want!r}, found {got!r}")
        t = self.tok
        self.i += 1
        return t

    def accept(self, kind: str, value: str | None = None) -> bool:
        if self.at(kind, value):
            self.i += 1
            return True
        return False

    # entry
    def parse(self):
        start = self.tok
        t = self.sum()
        if not self.at("end"):
            raise self.err(f"unexpected {self.tok.value!r}")
        if not is_two_term(t):
            t = _number(t, self.text, start.pos)
        return t

    def sum(self):
        start = self.tok
        terms = [self.scaled()]
        while self.accept("sym", "+"):
            terms.append(self.scaled())
        if len(terms) == 1:
            return terms[0]
        if not all(is_two_term(t) for t in terms):
            raise self.err("'+' combines two-terms only", start)
        return Sum(tuple(terms))

    def scaled(self):
        if self.at("num") and self.peek().kind == "sym" and self.peek().value == "*":
            c = int(self.take("num").value)
            self.take("sym", "*")
            start = self.tok
            t = self.vert()
            if not is_two_term(t):
                raise self.err("scalars multiply two-terms only", start)
            return Scale(c % la.get_prime(), t)
        return self.vert()

    def vert(self):
        start = self.tok
        t = self.comp()
        while self.at("sym", "·") or self.at("sym", "<<"):
            self.i += 1
            u = self.comp()
            if not (is_two_term(t) and is_two_term(u)):
                raise self.err("vertical composition needs two-terms", start)
            t = VComp(t, u)
        return t

    def comp(self):
        start = self.tok
        t = self.atom()
        while self.at("sym", "∘") or self.at("sym", "."):
            self.i += 1
            pos = self.tok.pos
            if is_two_term(t):
                args = self.pre_args()
                t = Pre(t, args)
            else:
                u = self.atom()
                if is_two_term(u):
                    raise self.err("a two-term cannot be substituted into a one-term; use whiskering", start)
                t = _unnumber(_compose(_number(t, self.text, start.pos), _number(u, self.text, pos)))
        return t

    def pre_args(self) -> tuple:
        if self.at("sym", "(") and self._is_tuple():
            self.take("sym", "(")
            args = [self.onemor_arg()]
            while self.accept("sym", ","):
                args.append(self.onemor_arg())
            self.take("sym", ")")
            return tuple(args)
        pos = self.tok.pos
        u = self.atom()
        if is_two_term(u):
            raise self.err("expected a one-term after '∘'")
        return (_number(u, self.text, pos),)

    def _is_tuple(self) -> bool:
        depth, k = 0, self.i
        while k < len(self.toks):
            t = self.toks[k]
            if t.kind == "sym" and t.value in "({":
                depth += 1
            elif t.kind == "sym" and t.value in ")}":
                depth -= 1
                if depth == 0:
                    return False
            elif t.kind == "sym" and t.value == "," and depth == 1:
                return True
            elif t.kind == "end":
                return False
            k += 1
        return False

    def onemor_arg(self) -> OneMor:
        pos = self.tok.pos
        u = self.sum()
        if is_two_term(u):
            raise self.err("expected a one-term")
        return _number(u, self.text, pos)

    def atom(self):
        t = self.tok
        if t.kind == "row":
            self.i += 1
            binds = []
            if self.accept("sym", "@"):
                binds.append(self.take("ident").value)
                while (self.at("sym", ",") and self.peek().kind == "ident"
                       and not (self.peek(2).kind == "suffix" or
                                (self.peek(2).kind == "sym" and self.peek(2).value == "("))):
                    self.i += 1
                    binds.append(self.take("ident").value)
            return Row(t.value, tuple(binds))
        if t.kind == "ud":
            self.i += 1
            return Ud(t.value)
        if t.kind == "obj":
            self.i += 1
            return Obj(t.value)
        if t.kind == "hash" or (t.kind == "sym" and t.value == "-"):
            self.i += 1
            idx = int(t.value) if t.kind == "hash" else -1
            site, op = None, False
            if self.accept("sym", ":"):
                site = self.take("ident").value
                op = self.accept("sym", "^op")
            return Slot(idx, site, op)
        if t.kind == "ident" and t.value in ("inv", "id") and self.peek().kind == "sym" and self.peek().value == "(":
            self.i += 2
            pos = self.tok.pos
            inner = self.sum()
            self.take("sym", ")")
            if t.value == "inv":
                if not is_two_term(inner):
                    raise self.err("inv() takes a two-term", t)
                return Inv(inner)
            if is_two_term(inner):
                raise self.err("id() takes a one-term", t)
            return Id(_number(inner, self.text, pos))
        if t.kind == "sym" and t.value == "(":
            self.i += 1
            inner = self.sum()
            self.take("sym", ")")
            return inner
        gen, ref = self.gen()
        if self.at("sym", "("):
            self.take("sym", "(")
            args = [self.sum()]
            while self.accept("sym", ","):
                args.append(self.sum())
            self.take("sym", ")")
        else:
            args = [Slot(-1)] * _ARITY.get(gen, 1)
        want = _ARITY.get(gen, 1)
        if len(args) != want:
            raise self.err(f"{_gen_name(gen, ref)} takes {want} argument(s)", t)
        twos = [a for a in args if is_two_term(a)]
        if len(twos) > 1:
            raise self.err("whiskering takes exactly one two-term argument", t)
        if twos:
            return Whisker(gen, tuple(a if is_two_term(a) else _number(a, self.text, t.pos) for a in args), ref)
        return App(gen, tuple(args), ref)

    def gen(self) -> tuple[str, MapRef | None]:
        t = self.tok
        if t.kind == "sym" and t.value in ("⊗", "Γ"):
            self.i += 1
            return ("tensor" if t.value == "⊗" else "gamma"), None
        if t.kind == "ident" and t.value in ("Hom", "HomG"):
            self.i += 1
            return ("hom" if t.value == "Hom" else "homg"), None
        ref = self.mapref()
        s = self.take("suffix").value
        return _SUFFIX[s], ref

    def mapref(self) -> MapRef:
        if self.accept("sym", "{"):
            a = self.take("ident").value
            if self.accept("sym", "|"):
                b = self.take("ident").value
                self.take("sym", "}")
                return MapRef("bc", (a, b))
            names = [a]
            while self.accept("sym", ","):
                names.append(self.take("ident").value)
            self.take("sym", "}")
            if len(names) < 2:
                raise self.err("a composite needs at least two maps")
            return MapRef("comp", tuple(names))
        if not self.at("ident"):
            raise self.err(f"expected a term, found {self.tok.value or self.tok.kind!r}")
        return MapRef("name", (self.take("ident").value,))


def _unnumber(t: OneMor) -> OneMor:
    """Return composed slots to implicit form when they already run in order."""
    idx = [s.index for s in _slots(t)]
    if idx == list(range(len(idx))):
        return _map_slots(t, lambda s: Slot(-1, s.site, s.op))
    return t


def _gen_name(gen: str, ref: MapRef | None) -> str:
    if gen in ("tensor", "gamma"):
        return "⊗" if gen == "tensor" else "Γ"
    if gen in ("hom", "homg"):
        return "Hom" if gen == "hom" else "HomG"
    return f"{ref}{_SUFFIX_OF[gen]}"


def parse(text: str):
    """Parse a one-term or a two-term."""
    return _Parser(text).parse()


# -- printer -----------------------------------------------------------------------------------

def _show1(t: OneMor, explicit: bool) -> str:
    if isinstance(t, Slot):
        s = f"#{t.index}" if explicit else "-"
        if t.site:
            s += f":{t.site}" + ("^op" if t.op else "")
        return s
    if isinstance(t, Obj):
        return f"obj:{t.name}"
    return f"{_gen_name(t.gen, t.ref)}({', '.join(_show1(a, explicit) for a in t.args)})"


def _show_one(t: OneMor) -> str:
    idx = [s.index for s in _slots(t)]
    return _show1(t, idx != list(range(len(idx))))


_PREC = {Sum: 0, Scale: 1, VComp: 2, Pre: 3}


def _show_two(t, ctx: int = 0) -> str:
    p = _PREC.get(type(t), 4)
    if isinstance(t, Row):
        return f"row:{t.label}" + (f" @ {', '.join(t.bindings)}" if t.bindings else "")
    if isinstance(t, Ud):
        s = f"ud:{t.name}"
    elif isinstance(t, Id):
        s = f"id({_show_one(t.mor)})"
    elif isinstance(t, Inv):
        s = f"inv({_show_two(t.term)})"
    elif isinstance(t, VComp):
        s = f"{_show_two(t.outer, 2)} · {_show_two(t.inner, 3)}"
    elif isinstance(t, Scale):
        s = f"{t.c} * {_show_two(t.term, 2)}"
    elif isinstance(t, Sum):
        s = " + ".join(_show_two(u, 1) for u in t.terms)
    elif isinstance(t, Pre):
        inner = _show_two(t.term, 4)
        if len(t.args) == 1:
            s = f"{inner} ∘ {_wrap_one(t.args[0])}"
        else:
            s = f"{inner} ∘ ({', '.join(_show_one(a) for a in t.args)})"
    elif isinstance(t, Whisker):
        s = f"{_gen_name(t.gen, t.ref)}({', '.join(_show_two(a) if is_two_term(a) else _show_one(a) for a in t.args)})"
    else:
        raise FmlError(f"not a term: {t!r}")
    return f"({s})" if p < ctx else s


def _wrap_one(t: OneMor) -> str:
    s = _show_one(t)
    return s if isinstance(t, (App, Obj)) or s == "-" else f"({s})"


def show(t) -> str:
    """Canonical text of a term; ``parse(show(t)) == t``."""
    return _show_two(t) if is_two_term(t) else _show_one(t)


# -- workspace ------------------------------------------------------------------------------------

@dataclass
class Workspace:
    """Named sites, maps, immersions, objects and chain maps, plus an evaluation context."""

    spaces: dict[str, FinSpace] = field(default_factory=dict)
    maps: dict[str, ContinuousMap] = field(default_factory=dict)
    immersions: dict[str, LocallyClosedImmersion] = field(default_factory=dict)
    objects: dict[str, SheafComplex] = field(default_factory=dict)
    chain_maps: dict[str, SheafMap] = field(default_factory=dict)
    enh: Enh = field(default_factory=Enh)
    derived: dict[str, Any] = field(default_factory=dict)

    def _fresh(self, name: str) -> None:
        if any(name in d for d in (self.spaces, self.maps, self.immersions, self.objects, self.chain_maps)):
            raise FmlError(f"name {name!r} is already registered")

    def add_space(self, name: str, X: FinSpace, points: bool = False, primary: bool = False) -> FinSpace:
        self._fresh(name)
        self.spaces[name] = X
        self.objects[f"O_{name}"] = self.enh.unit_object(X)
        self.objects[f"k_{name}"] = sh.constant(X, _k())
        self.maps[f"id_{name}"] = fs.identity_map(X)
        if "pt" not in self.spaces and X.n != 1:
            self.add_space("pt", fs.point())
        if primary:
            self.objects.setdefault("constK", self.objects[f"k_{name}"])
        if points:
            for x, nm in enumerate(X.names):
                if re.fullmatch(_IDENT, nm) and not any(nm in d for d in (self.spaces, self.maps,
                                                                         self.immersions, self.objects)):
                    self.immersions[nm] = fs.factor_locally_closed(X, [x])
        return X

    def add_map(self, name: str, a: ContinuousMap) -> None:
        self._fresh(name)
        if not a.is_continuous():
            raise FmlError(f"map {name!r} is not continuous")
        self.maps[name] = a

    def add_immersion(self, name: str, j: LocallyClosedImmersion) -> None:
        self._fresh(name)
        self.immersions[name] = j

    def add_object(self, name: str, F: SheafComplex) -> None:
        self._fresh(name)
        self.objects[name] = F

    def add_chain_map(self, name: str, g: SheafMap) -> None:
        self._fresh(name)
        if not g.is_chain_map() or g.degree != 0:
            raise FmlError(f"{name!r} is not a chain map of degree 0")
        self.chain_maps[name] = g

    # lookups
    def site_name(self, X: FinSpace) -> str:
        for nm, Y in self.spaces.items():
            if Y == X:
                return nm
        return f"<{X.n}-point site>"

    def map_name(self, a: ContinuousMap) -> str:
        for nm, b in list(self.maps.items()) + [(k, v) for k, v in self.derived.items()
                                                 if isinstance(v, ContinuousMap)]:
            if a == b:
                return nm
        for nm, j in list(self.immersions.items()) + [(k, v) for k, v in self.derived.items()
                                                      if isinstance(v, LocallyClosedImmersion)]:
            if a == j.map:
                return nm
        return "<map>"

    def immersion_name(self, j: LocallyClosedImmersion) -> str:
        for nm, i in list(self.immersions.items()) + [(k, v) for k, v in self.derived.items()
                                                      if isinstance(v, LocallyClosedImmersion)]:
            if en._vkey(i) == en._vkey(j):
                return nm
        return "<immersion>"

    def object_name(self, F: SheafComplex) -> str:
        for nm, G in self.objects.items():
            if G is F:
                return nm
        return "<object>"

    def get_map(self, name: str) -> ContinuousMap:
        if name in self.maps:
            return self.maps[name]
        if name in self.immersions:
            return self.immersions[name].map
        if name in self.derived:
            v = self.derived[name]
            return v.map if isinstance(v, LocallyClosedImmersion) else v
        raise FmlTypeError(f"unregistered map {name!r}")

    def get_immersion(self, name: str) -> LocallyClosedImmersion:
        if name in self.immersions:
            return self.immersions[name]
        v = self.derived.get(name)
        if isinstance(v, LocallyClosedImmersion):
            return v
        a = self.get_map(name)
        j = fs.immersion_from_map(a)
        if j is None:
            raise FmlUnsupported(f"{name!r} is not a locally closed immersion; !-functors are unavailable")
        return j

    def get_space(self, name: str) -> FinSpace:
        if name not in self.spaces:
            raise FmlTypeError(f"unregistered site {name!r}")
        return self.spaces[name]

    def get_object(self, name: str) -> SheafComplex:
        if name not in self.objects:
            raise FmlTypeError(f"unregistered object {name!r}")
        return self.objects[name]

    def _is_imm(self, name: str) -> bool:
        return name in self.immersions or isinstance(self.derived.get(name), LocallyClosedImmersion)

    def resolve(self, ref: MapRef, want_immersion: bool = False) -> ContinuousMap | LocallyClosedImmersion:
        """Look up or build (and cache under its printed name) the map a reference denotes."""
        key = str(ref)
        if ref.kind == "name":
            return self.get_immersion(key) if want_immersion else self.get_map(key)
        if key not in self.derived:
            if ref.kind == "comp":
                if all(self._is_imm(n) for n in ref.names):
                    js = [self.get_immersion(n) for n in ref.names]
                    out = js[-1]
                    for j in reversed(js[:-1]):
                        if not out.ambient == j.space:
                            raise FmlTypeError(f"immersions in {key} are not composable")
                        out = fs.compose_immersions(j, out)
                    self.derived[key] = out
                else:
                    ms = [self.get_map(n) for n in ref.names]
                    out = ms[-1]
                    for m in reversed(ms[:-1]):
                        if not out.target == m.source:
                            raise FmlTypeError(f"maps in {key} are not composable")
                        out = fs.compose_maps(m, out)
                    self.derived[key] = out
            else:
                u, v = ref.names
                sq, first = self._square(u, v)
                other = MapRef("bc", (v, u))
                if first:
                    self.derived[key], self.derived[str(other)] = sq.alpha_prime, sq.beta_prime
                else:
                    self.derived[key], self.derived[str(other)] = sq.beta_prime, sq.alpha_prime
        v = self.derived[key]
        if want_immersion:
            if isinstance(v, LocallyClosedImmersion):
                return v
            j = fs.immersion_from_map(v)
            if j is None:
                raise FmlUnsupported(f"{key} is not a locally closed immersion; !-functors are unavailable")
            return j
        return v.map if isinstance(v, LocallyClosedImmersion) else v

    def _square(self, u: str, v: str) -> tuple[fs.CartesianSquare, bool]:
        """The fibre square of u and v; the immersion (or the first name) is placed first."""
        first = self._is_imm(u) or not (self._is_imm(v) or v < u)
        a, b = (u, v) if first else (v, u)
        ma, mb = self.get_map(a), self.get_map(b)
        if not ma.target == mb.target:
            raise FmlTypeError(f"{a} and {b} do not share a target")
        return fs.pullback_square(ma, mb), first


def _k() -> cx.Complex:
    return cx.point_complex(0, 1)


def default_workspace(primary: str | None = None) -> Workspace:
    """Built-in sites, their identity maps, constant and unit objects, and, for the
    primary site, point immersions named after the points."""
    ws = Workspace()
    ws.add_space("pt", fs.point(), primary=primary == "pt")
    for nm in ("sierpinski", "pseudo-circle", "interval"):
        ws.add_space(nm, en.builtin_site(nm), points=nm == primary, primary=nm == primary)
    for nm, X in list(ws.spaces.items()):
        if nm != "pt":
            ws.add_map(f"s_{nm}", fs.terminal_map(X))
    return ws


# -- typing --------------------------------------------------------------------------------------

@dataclass(frozen=True)
class ObjectTerm:
    site: str
    op: bool = False
    space: FinSpace | None = field(default=None, compare=False, repr=False)

    def __str__(self) -> str:
        return self.site + ("^op" if self.op else "")


@dataclass
class TypeReport:
    sources: tuple[ObjectTerm, ...]
    target: ObjectTerm
    expr: FunctorExpr

    def __str__(self) -> str:
        return f"({', '.join(map(str, self.sources))}) -> {self.target}"


@dataclass
class TwoTypeReport:
    source: FunctorExpr
    target: FunctorExpr
    sources: tuple[ObjectTerm, ...]
    target_obj: ObjectTerm
    invertible: bool

    def __str__(self) -> str:
        return f"({', '.join(map(str, self.sources))}) -> {self.target_obj}"


class _Sites:
    """Union-find over slot variables and concrete sites."""

    def __init__(self):
        self.parent: dict[Any, Any] = {}
        self.space: dict[Any, FinSpace] = {}

    def find(self, a):
        while self.parent.get(a, a) != a:
            a = self.parent[a]
        return a

    def concrete(self, X: FinSpace):
        k = en._vkey(X)
        self.space[k] = X
        return k

    def unify(self, a, b, where: str) -> Any:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        ca, cb = ra in self.space, rb in self.space
        if ca and cb:
            raise FmlTypeError(f"site mismatch ({self.space[ra].n} vs {self.space[rb].n} points)", where)
        if ca:
            self.parent[rb] = ra
            return ra
        self.parent[ra] = rb
        return rb


def _infer(expr: FunctorExpr, ws: Workspace, U: _Sites | None = None) -> tuple[dict[int, Any], Any, _Sites]:
    U = U or _Sites()
    slot_site: dict[int, Any] = {}

    def go(e: FunctorExpr):
        where = show_expr(e, ws)
        op, p = e.op, e.param
        if op == "var":
            v = slot_site.setdefault(p, ("var", p))
            return U.find(v)
        if op == "object":
            return U.concrete(p.space)
        s = [go(a) for a in e.args]
        if op in ("tensor", "shom", "homglob"):
            r = U.unify(s[0], s[1], where)
            return U.concrete(fs.point()) if op == "homglob" else r
        if op == "gamma":
            return U.concrete(fs.point())
        if op in ("pull", "pullinv"):
            U.unify(s[0], U.concrete(p.target), where)
            return U.concrete(p.source)
        if op == "push":
            U.unify(s[0], U.concrete(p.source), where)
            return U.concrete(p.target)
        if op == "shriek":
            U.unify(s[0], U.concrete(p.space), where)
            return U.concrete(p.ambient)
        if op == "ushriek":
            U.unify(s[0], U.concrete(p.ambient), where)
            return U.concrete(p.space)
        raise FmlError(op)

    tgt = go(expr)
    return slot_site, tgt, U


def _objterm(U: _Sites, v, ws: Workspace, op: bool = False) -> ObjectTerm:
    r = U.find(v)
    if r not in U.space:
        return ObjectTerm("?", op)
    return ObjectTerm(ws.site_name(U.space[r]), op, U.space[r])


def show_expr(e: FunctorExpr, ws: Workspace) -> str:
    """A FunctorExpr in term syntax, naming parameters through the workspace."""
    op, p = e.op, e.param
    if op == "var":
        return f"#{p}"
    if op == "object":
        return f"obj:{ws.object_name(p)}"
    args = ", ".join(show_expr(a, ws) for a in e.args)
    if op in ("tensor", "shom", "homglob", "gamma"):
        return {"tensor": "⊗", "shom": "Hom", "homglob": "HomG", "gamma": "Γ"}[op] + f"({args})"
    if op in ("shriek", "ushriek"):
        nm = ws.immersion_name(p)
    else:
        nm = ws.map_name(p)
    suf = {"pull": "^*", "pullinv": "^-1", "push": "_*", "shriek": "_!", "ushriek": "^!"}[op]
    return f"{nm}{suf}({args})"


def _expr_key(e: FunctorExpr) -> tuple:
    if e.op == "var":
        return ("var", e.param)
    k = en._vkey(e.param) if e.param is not None else None
    op = "pull" if e.op == "pullinv" else e.op
    return (op, k) + tuple(_expr_key(a) for a in e.args)


def _head_key(e: FunctorExpr) -> tuple:
    return _expr_key(e)[:2]


def to_expr(t: OneMor, ws: Workspace) -> FunctorExpr:
    """Lower a one-term to a FunctorExpr with workspace parameters."""
    if isinstance(t, Slot):
        return en.var(t.index)
    if isinstance(t, Obj):
        try:
            return FunctorExpr("object", (), ws.get_object(t.name))
        except FmlTypeError as e:
            raise FmlTypeError(str(e), _show_one(t)) from None
    args = tuple(to_expr(a, ws) for a in t.args)
    g = t.gen
    try:
        return _lower_app(g, args, t, ws)
    except FmlTypeError as e:
        if e.subterm:
            raise
        raise FmlTypeError(str(e), _show_one(t)) from None


def _lower_app(g: str, args: tuple[FunctorExpr, ...], t: App, ws: Workspace) -> FunctorExpr:
    if g == "tensor":
        return FunctorExpr("tensor", args)
    if g == "hom":
        return FunctorExpr("shom", args)
    if g == "homg":
        return FunctorExpr("homglob", args)
    if g == "gamma":
        return FunctorExpr("gamma", args)
    if g in ("shriek", "ushriek"):
        return FunctorExpr(g, args, ws.resolve(t.ref, want_immersion=True))
    return FunctorExpr(g, args, ws.resolve(t.ref))


def _shift_expr(e: FunctorExpr, k: int) -> FunctorExpr:
    if e.op == "var":
        return en.var(e.param + k)
    return FunctorExpr(e.op, tuple(_shift_expr(a, k) for a in e.args), e.param)


def _subst_expr(e: FunctorExpr, subs: Sequence[FunctorExpr]) -> FunctorExpr:
    if e.op == "var":
        return subs[e.param]
    return FunctorExpr(e.op, tuple(_subst_expr(a, subs) for a in e.args), e.param)


def _expr_arity(e: FunctorExpr) -> int:
    return max(e.slots(), default=-1) + 1


def _check_variance(t: OneMor, expr: FunctorExpr, ws: Workspace, U: _Sites, slot_site: dict) -> None:
    for s in _slots(t):
        v = expr.variance(s.index)
        if s.op != (v < 0) and (s.site is not None or s.op):
            raise FmlTypeError(f"slot #{s.index} is {'contravariant' if v < 0 else 'covariant'} "
                               f"but marked {'^op' if s.op else 'covariant'}", _show_one(t))
        if s.site is not None:
            U.unify(slot_site.get(s.index, ("var", s.index)), U.concrete(ws.get_space(s.site)), _show_one(t))


def _onemor_report(t: OneMor, ws: Workspace) -> TypeReport:
    expr = to_expr(t, ws)
    slot_site, tgt, U = _infer(expr, ws)
    for s in _slots(t):
        expr.variance(s.index)
    _check_variance(t, expr, ws, U, slot_site)
    n = _arity(t)
    srcs = tuple(_objterm(U, slot_site.get(i, ("var", i)), ws, expr.variance(i) < 0) for i in range(n))
    return TypeReport(srcs, _objterm(U, tgt, ws), expr)


# row bindings ---------------------------------------------------------------------------

def _row_context(r: Row, ws: Workspace) -> tuple[str, RowContext]:
    try:
        row = en.canonical_row(r.label)
    except en.UnsupportedRow as e:
        raise FmlTypeError(str(e), show(r)) from None
    kind = en._ROW_SHAPES.get(row, (1, "imm"))[1]
    b = r.bindings
    c = RowContext()

    def need(k: int):
        if len(b) != k:
            raise FmlTypeError(f"row {row} takes {k} binding(s), got {len(b)}", show(r))

    if row in ("left", "right", "id_*", "id^*", "id_!", "id^!"):
        need(1)
        c.X = ws.get_space(b[0])
        if row == "id^!":
            c.j = fs.factor_locally_closed(c.X, range(c.X.n))
    elif kind is None:
        need(0)
    elif kind == "map":
        need(1)
        c.alpha = ws.get_map(b[0])
    elif kind == "pair":
        need(2)
        c.alpha, c.beta = ws.get_map(b[0]), ws.get_map(b[1])
        if not c.beta.target == c.alpha.source:
            raise FmlTypeError(f"{b[1]} and {b[0]} are not composable", show(r))
        ws.resolve(MapRef("comp", (b[0], b[1])))
    elif kind in ("open", "closed", "imm"):
        need(1)
        c.j = ws.get_immersion(b[0])
        if row == "alpha_!-to-alpha_*-proper" and not c.j.is_closed:
            raise FmlTypeError(f"row {row} needs a proper (closed) immersion", show(r))
        if row == "alpha_!-to-alpha_*-not-proper" and c.j.is_closed:
            raise FmlTypeError(f"row {row} needs a non-proper immersion", show(r))
    elif kind == "imm2":
        need(2)
        c.j, c.j2 = ws.get_immersion(b[0]), ws.get_immersion(b[1])
        if not c.j2.ambient == c.j.space:
            raise FmlTypeError(f"{b[1]} does not land in the domain of {b[0]}", show(r))
        ws.resolve(MapRef("comp", (b[0], b[1])), want_immersion=True)
    elif kind == "square":
        need(2)
        c.base_j = ws.get_immersion(b[0])
        beta = ws.get_map(b[1])
        sq, first = ws._square(b[0], b[1])
        if not first:
            raise FmlTypeError("base change needs the immersion first", show(r))
        ws.resolve(MapRef("bc", (b[0], b[1])))
        if fs.immersion_from_map(sq.alpha_prime) is None:
            raise FmlUnsupported("the base-changed immersion is not in canonical order")
        ws.derived[str(MapRef("bc", (b[0], b[1])))] = fs.immersion_from_map(sq.alpha_prime)
        c.square = sq
    return row, c


def _row_arity(row: str) -> int:
    if row == en.CONDITIONAL_ROW:
        return 1
    return en._ROW_SHAPES[row][0]


def _row_invertible(row: str, c: RowContext) -> bool:
    if row == en.CONDITIONAL_ROW:
        return c.j.is_closed
    return row in en.ISO_ROWS


def _match(p: FunctorExpr, e: FunctorExpr, sub: dict[int, FunctorExpr]) -> bool:
    """First-order matching of a pattern (its slots are variables) against an expression."""
    if p.op == "var":
        if p.param in sub:
            return _expr_key(sub[p.param]) == _expr_key(e)
        sub[p.param] = e
        return True
    if _head_key(p) != _head_key(e):
        return False
    return len(p.args) == len(e.args) and all(_match(a, b, sub) for a, b in zip(p.args, e.args))


def _outer_instance(t: VComp, inner_tgt: FunctorExpr, outer_src: FunctorExpr, n: int,
                    ws: Workspace) -> list[FunctorExpr]:
    """The slot instantiation making the outer source equal the inner target."""
    sub: dict[int, FunctorExpr] = {}
    if not _match(outer_src, inner_tgt, sub) or len(sub) != n:
        raise FmlTypeError(f"cannot compose: {show_expr(inner_tgt, ws)} does not match "
                           f"{show_expr(outer_src, ws)}", show(t))
    return [sub[i] for i in range(n)]


def _two_type(t, ws: Workspace) -> tuple[FunctorExpr, FunctorExpr, int, bool]:
    """(source expr, target expr, arity, formally invertible)."""
    if isinstance(t, Row):
        row, c = _row_context(t, ws)
        s, u = en.row_signature(row, c, ws.enh)
        return s, u, _row_arity(row), _row_invertible(row, c)
    if isinstance(t, Ud):
        if t.name not in ws.chain_maps:
            raise FmlTypeError(f"unregistered chain map {t.name!r}", show(t))
        g = ws.chain_maps[t.name]
        S, T = ws.object_name(g.source), ws.object_name(g.target)
        if "<object>" in (S, T):
            raise FmlTypeError(f"endpoints of {t.name!r} are not registered objects", show(t))
        return (FunctorExpr("object", (), g.source), FunctorExpr("object", (), g.target), 0,
                sh.is_quasi_iso(g))
    if isinstance(t, Id):
        e = to_expr(t.mor, ws)
        _infer(e, ws)
        return e, e, _arity(t.mor), True
    if isinstance(t, Inv):
        s, u, n, inv = _two_type(t.term, ws)
        if not inv:
            raise FmlTypeError("inverse of a term that is not formally invertible", show(t))
        return u, s, n, True
    if isinstance(t, VComp):
        s1, u1, n1, i1 = _two_type(t.inner, ws)
        s2, u2, n2, i2 = _two_type(t.outer, ws)
        sub = _outer_instance(t, u1, s2, n2, ws)
        return s1, _subst_expr(u2, sub), n1, i1 and i2
    if isinstance(t, Scale):
        s, u, n, i = _two_type(t.term, ws)
        return s, u, n, i and t.c % la.get_prime() != 0
    if isinstance(t, Sum):
        types = [_two_type(u, ws) for u in t.terms]
        for s, u, _, _ in types[1:]:
            if _expr_key(s) != _expr_key(types[0][0]) or _expr_key(u) != _expr_key(types[0][1]):
                raise FmlTypeError("summands are not parallel", show(t))
        return types[0][0], types[0][1], types[0][2], False
    if isinstance(t, Whisker):
        srcs, tgts, off, inv = [], [], 0, True
        for a in t.args:
            if is_two_term(a):
                s, u, n, inv = _two_type(a, ws)
                srcs.append(_shift_expr(s, off))
                tgts.append(_shift_expr(u, off))
            else:
                e = to_expr(a, ws)
                n = _arity(a)
                srcs.append(_shift_expr(e, off))
                tgts.append(_shift_expr(e, off))
            off += n
        op = {"tensor": "tensor", "hom": "shom", "homg": "homglob", "gamma": "gamma"}.get(t.gen, t.gen)
        param = None
        if t.ref is not None:
            param = ws.resolve(t.ref, want_immersion=t.gen in ("shriek", "ushriek"))
        S, T = FunctorExpr(op, tuple(srcs), param), FunctorExpr(op, tuple(tgts), param)
        pos = next(i for i, a in enumerate(t.args) if is_two_term(a))
        if op in ("shom", "homglob") and pos == 0:
            S, T = T, S
        _infer(S, ws)
        _infer(T, ws)
        return S, T, off, inv
    if isinstance(t, Pre):
        s, u, n, inv = _two_type(t.term, ws)
        args = list(t.args)
        if len(args) == 1 and n > 1:
            args += [Slot(i) for i in range(n - 1)]
        if len(args) != n:
            raise FmlTypeError(f"expected {n} argument(s) after '∘', got {len(args)}", show(t))
        subs, off = [], 0
        for a in args:
            subs.append(_shift_expr(to_expr(a, ws), off))
            off += _arity(a)
        S, T = _subst_expr(s, subs), _subst_expr(u, subs)
        _infer(S, ws)
        _infer(T, ws)
        return S, T, off, inv
    raise FmlError(f"not a two-term: {t!r}")


def typecheck(t, ws: Workspace) -> TypeReport | TwoTypeReport:
    """Sites of every slot and of the output; raises FmlTypeError on the first conflict."""
    if not is_two_term(t):
        return _onemor_report(t, ws)
    s, u, n, inv = _two_type(t, ws)
    U = _Sites()
    ss, st, U = _infer(s, ws, U)
    ts, tt, U = _infer(u, ws, U)
    for i in range(n):
        a, b = ss.get(i), ts.get(i)
        if a is not None and b is not None:
            U.unify(a, b, show(t))
    U.unify(st, tt, show(t))
    srcs = []
    for i in range(n):
        v = ss.get(i, ts.get(i, ("var", i)))
        try:
            neg = s.variance(i) < 0 if i in s.slots() else u.variance(i) < 0
        except en.EnhError as e:
            raise FmlTypeError(str(e), show(t)) from None
        srcs.append(_objterm(U, v, ws, neg))
    return TwoTypeReport(s, u, tuple(srcs), _objterm(U, st, ws), inv)


def is_formally_invertible(t, ws: Workspace) -> bool:
    """Every token is invertible by its marking or by a certified side condition."""
    if not is_two_term(t):
        raise FmlError("invertibility is a property of two-terms")
    return _two_type(t, ws)[3]


# -- interpretation ----------------------------------------------------------------------------------

def _reverse(z: ZigZag) -> ZigZag:
    legs = [Leg(l.map, not l.backward, l.tag, l._qiso) for l in reversed(z.legs)]
    return ZigZag(legs, f"inv({z.label})", z.target)


def _single(m: SheafMap, tag: str) -> ZigZag:
    return ZigZag([Leg(m, False, tag)], tag)


def _interp2(t, ws: Workspace, inputs: Sequence[SheafComplex]) -> ZigZag:
    E = ws.enh
    if isinstance(t, Row):
        row, c = _row_context(t, ws)
        c.inputs = tuple(inputs)
        if c.X is None and inputs:
            c.X = inputs[0].space
        return en.generator_zigzag(row, c, E)
    if isinstance(t, Ud):
        g = ws.chain_maps[t.name]
        return _single(E.i_map(g), f"ud:{t.name}")
    if isinstance(t, Id):
        expr = to_expr(t.mor, ws)
        return ZigZag([], "id", en.eval_underlined(expr, inputs, E, check=False))
    if isinstance(t, Inv):
        return _reverse(_interp2(t.term, ws, inputs))
    if isinstance(t, VComp):
        s1, u1, _, _ = _two_type(t.inner, ws)
        s2, _, n2, _ = _two_type(t.outer, ws)
        sub = _outer_instance(t, u1, s2, n2, ws)
        vals = [en.eval_underlined(e, inputs, E, check=False) for e in sub]
        return _interp2(t.inner, ws, inputs).then(_interp2(t.outer, ws, vals))
    if isinstance(t, (Scale, Sum)):
        parts = [(t.c, t.term)] if isinstance(t, Scale) else [(1, u) for u in t.terms]
        total = None
        for c, u in parts:
            m = en.reduce_roof(_interp2(u, ws, inputs)).scale(c)
            total = m if total is None else total + en.rebase(m, total.source, total.target)
        return _single(total, "linear")
    if isinstance(t, Whisker):
        vals, off, pos, inner = [], 0, 0, None
        for k, a in enumerate(t.args):
            if is_two_term(a):
                n = _two_type(a, ws)[2]
                inner = _interp2(a, ws, inputs[off:off + n])
                pos = k
                vals.append(None)
            else:
                n = _arity(a)
                vals.append(en.eval_underlined(to_expr(a, ws), inputs[off:off + n], E, check=False))
            off += n
        op = {"tensor": "tensor", "hom": "shom", "homg": "homglob", "gamma": "gamma"}.get(t.gen, t.gen)
        param = None
        if t.ref is not None:
            param = ws.resolve(t.ref, want_immersion=t.gen in ("shriek", "ushriek"))
        F = FunctorExpr(op, tuple(en.var(i) for i in range(len(t.args))), param)

        def apply(m: SheafMap) -> SheafMap:
            ins = list(vals)
            ins[pos] = m.source
            return en.eval_underlined_map(F, ins, pos, m, E)

        return inner.whisker(apply, contravariant=F.variance(pos) < 0, label=show(t))
    if isinstance(t, Pre):
        n = _two_type(t.term, ws)[2]
        args = list(t.args)
        if len(args) == 1 and n > 1:
            args += [Slot(i) for i in range(n - 1)]
        vals, off = [], 0
        for a in args:
            k = _arity(a)
            vals.append(en.eval_underlined(to_expr(a, ws), inputs[off:off + k], E, check=False))
            off += k
        return _interp2(t.term, ws, vals)
    raise FmlError(f"not a two-term: {t!r}")


def interpret(t, ws: Workspace, inputs: Sequence[SheafComplex], backend: str = "enh"):
    """Evaluate a term on concrete inputs.

    ``enh``: a one-term gives ``eval_underlined`` (inputs must be fibrant), a
    two-term gives its zig-zag. ``trcat``: a one-term gives ``eval_derived``
    on arbitrary inputs, a two-term gives the action on stalk cohomology,
    computed from the zig-zag at the resolved inputs.
    """
    if backend not in ("enh", "trcat"):
        raise FmlError(f"unknown backend {backend!r}")
    rep = typecheck(t, ws)
    n = len(rep.sources)
    if len(inputs) != n:
        raise FmlTypeError(f"term has {n} slot(s) but {len(inputs)} input(s) were given", show(t))
    for i, (s, J) in enumerate(zip(rep.sources, inputs)):
        if s.space is not None and not s.space == J.space:
            raise FmlTypeError(f"input {i} lives on the wrong site (expected {s.site})", show(t))
    if not is_two_term(t):
        if backend == "enh":
            return en.eval_underlined(rep.expr, inputs, ws.enh)
        return en.eval_derived(rep.expr, inputs, ws.enh)
    if backend == "enh":
        for J in inputs:
            if not rs.is_fibrant(J):
                raise en.EnhError("input in a fibrant slot is not fibrant")
        return _interp2(t, ws, inputs)
    return en.zigzag_cohomology(_interp2(t, ws, [ws.enh.i(J) for J in inputs]))


# -- corpus and random terms -------------------------------------------------------------------------

def golden_corpus() -> list[str]:
    """Canonical term texts shipped with the package (one per line, '#' comments)."""
    text = resources.files("sixlab").joinpath("fml_corpus.txt").read_text(encoding="utf-8")
    return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]


def random_workspace(rng: np.random.Generator) -> Workspace:
    """Built-in sites plus a random site, random maps and immersions, and a few chain maps."""
    ws = default_workspace("sierpinski")
    X = en._site(rng, 4)
    Y = en._site(rng, 3)
    if not any(Z == X for Z in ws.spaces.values()):
        ws.add_space("R", X)
    if not any(Z == Y for Z in ws.spaces.values()):
        ws.add_space("Q", Y)
    X = ws.spaces[ws.site_name(X)]
    Y = ws.spaces[ws.site_name(Y)]
    ws.add_map("a", fs.random_map(rng, Y, X))
    ws.add_map("b", fs.random_map(rng, ws.spaces["sierpinski"], Y))
    ws.add_map("f", fs.random_map(rng, ws.spaces["pt"], X))
    ws.add_immersion("j", en._locally_closed(rng, X, "imm"))
    j2 = en._locally_closed(rng, ws.immersions["j"].space, "imm")
    ws.add_immersion("k", j2)
    opn = en._locally_closed(rng, ws.spaces["sierpinski"], "open")
    ws.add_immersion("u", opn)
    ws.add_immersion("z", fs.factor_locally_closed(ws.spaces["sierpinski"], [0]))
    G = sh.random_sheaf(rng, X, max_dim=1, window=(0, 0))
    ws.add_object("G", G)
    ws.add_chain_map("g", sh.random_chain_map(rng, ws.objects[f"k_{ws.site_name(X)}"], G))
    ws.add_chain_map("e", sh.identity(G))
    return ws


_BASE_ROWS = [r for r in en.ROWS if r not in ("id^!",)]


def _random_token(rng: np.random.Generator, ws: Workspace):
    for _ in range(50):
        row = _BASE_ROWS[int(rng.integers(len(_BASE_ROWS)))]
        if rng.random() < 0.1:
            return Ud("g" if rng.random() < 0.5 else "e")
        kind = en._ROW_SHAPES[row][1]
        site = ["sierpinski", ws.site_name(ws.maps["a"].target)][int(rng.integers(2))]
        binds = {
            None: (), "map": ("a",), "pair": ("a", "b"), "open": ("u",), "closed": ("z",),
            "imm": ("j",), "imm2": ("j", "k"), "square": ("j", "f"),
        }[kind]
        if row in ("left", "right", "id_*", "id^*", "id_!"):
            binds = (site,)
        t = Row(row, binds)
        try:
            _two_type(t, ws)
        except FmlError:
            continue
        return t
    return Id(Slot(0))


_WHISKERS = ("push", "pull", "tensorL", "tensorR", "gamma", "homR", "shriek", "ushriek")


def _random_whisker(rng: np.random.Generator, ws: Workspace, t):
    kind = _WHISKERS[int(rng.integers(len(_WHISKERS)))]
    if kind in ("push", "pull"):
        return Whisker(kind, (t,), MapRef("name", ("a",)))
    if kind in ("shriek", "ushriek"):
        return Whisker(kind, (t,), MapRef("name", ("j",)))
    if kind == "tensorL":
        return Whisker("tensor", (t, Slot(0)))
    if kind == "tensorR":
        return Whisker("tensor", (Slot(0), t))
    if kind == "homR":
        return Whisker("hom", (Slot(0), t))
    return Whisker("gamma", (t,))


def token_count(t) -> int:
    """Generator tokens (rows and ud maps) in a two-term."""
    if isinstance(t, (Row, Ud)):
        return 1
    if isinstance(t, Id):
        return 0
    if isinstance(t, (Inv, Scale, Pre)):
        return token_count(t.term)
    if isinstance(t, VComp):
        return token_count(t.outer) + token_count(t.inner)
    if isinstance(t, Sum):
        return sum(token_count(u) for u in t.terms)
    return sum(token_count(a) for a in t.args if is_two_term(a))


def random_two_term(rng: np.random.Generator, ws: Workspace, max_tokens: int = 4):
    """A well-typed composite of at most max_tokens generator tokens."""
    for _ in range(200):
        t = _random_token(rng, ws)
        for _ in range(int(rng.integers(0, 5))):
            try:
                inv = _two_type(t, ws)[3]
            except FmlError:
                break
            r = rng.random()
            if r < 0.2 and inv:
                cand = Inv(t)
            elif r < 0.5:
                cand = _random_whisker(rng, ws, t)
            elif r < 0.8:
                cand = next((VComp(u, t) for u in (_random_token(rng, ws) for _ in range(20))
                             if _typeable(VComp(u, t), ws)), t)
            else:
                cand = VComp(Inv(t), t) if inv else t
            if token_count(cand) <= max_tokens and _typeable(cand, ws):
                t = cand
        if _typeable(t, ws):
            return t
    raise FmlError("could not build a random term")


def _typeable(t, ws: Workspace) -> bool:
    try:
        rep = typecheck(t, ws)
    except (FmlError, en.EnhError):
        return False
    return rep is not None


def _sample_inputs(rng: np.random.Generator, ws: Workspace, rep: TwoTypeReport) -> list[SheafComplex]:
    default = ws.spaces["sierpinski"]
    return [en.small_fibrant(rng, s.space if s.space is not None else default, max_total=6)
            for s in rep.sources]


def soundness_suite(terms: int = 50, bindings: int = 2, seed: int = 0, max_tokens: int = 4) -> dict:
    """Formal invertibility implies a 2-isomorphism on sampled bindings; corpus round-trips."""
    results, ok = [], True
    for k in range(terms):
        rng = en._row_rng(seed, "fml", k)
        ws = random_workspace(rng)
        t = random_two_term(rng, ws, max_tokens)
        rep = typecheck(t, ws)
        formal = rep.invertible
        semantic = []
        for _ in range(bindings):
            ins = _sample_inputs(rng, ws, rep)
            try:
                z = interpret(t, ws, ins, "enh")
                semantic.append(en.check_two_iso(z))
            except rs.SolveTooLarge:
                semantic.append(None)
        good = ((not formal) or all(s is not False for s in semantic)) and parse(show(t)) == t
        ok = ok and good
        results.append({"term": show(t), "formally_invertible": formal, "two_iso": semantic, "pass": good})
    corpus = golden_corpus()
    bad = [s for s in corpus if show(parse(s)) != s or parse(show(parse(s))) != parse(s)]
    ok = ok and not bad
    return {"terms": terms, "results": results, "corpus": len(corpus), "corpus_failures": bad,
            "verdict": "pass" if ok else "fail"}
