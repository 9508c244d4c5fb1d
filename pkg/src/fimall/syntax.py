"""Terms, formulas, signatures, substitution and first-order unification."""

from __future__ import annotations

import re
from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field
from typing import Union

# ---------------------------------------------------------------------------
# terms


@dataclass(frozen=True, order=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, order=True)
class Con:
    name: str
    args: tuple = ()

    def __str__(self) -> str:
        if not self.args:
            return self.name
        return f"{self.name}({', '.join(map(str, self.args))})"


Term = Union[Var, Con]


def term_vars(t: Term) -> set[str]:
    if isinstance(t, Var):
        return {t.name}
    out: set[str] = set()
    for a in t.args:
        out |= term_vars(a)
    return out


# ---------------------------------------------------------------------------
# formulas


@dataclass(frozen=True)
class One:
    pass


@dataclass(frozen=True)
class Tensor:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Lolli:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Plus:
    branches: tuple  # ((label, Formula), ...)

    def branch(self, label: str) -> "Formula":
        return dict(self.branches)[label]

    @property
    def labels(self) -> tuple:
        return tuple(l for l, _ in self.branches)


@dataclass(frozen=True)
class With:
    branches: tuple

    def branch(self, label: str) -> "Formula":
        return dict(self.branches)[label]

    @property
    def labels(self) -> tuple:
        return tuple(l for l, _ in self.branches)


@dataclass(frozen=True)
class Exists:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class Forall:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class Equal:
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class Pred:
    name: str
    args: tuple = ()


Formula = Union[One, Tensor, Lolli, Plus, With, Exists, Forall, Equal, Pred]

ZERO = Plus(())
TOP = With(())


def plus(a: Formula, b: Formula) -> Plus:
    return Plus((("pi1", a), ("pi2", b)))


def with_(a: Formula, b: Formula) -> With:
    return With((("pi1", a), ("pi2", b)))


def tensor(*fs: Formula) -> Formula:
    """Right-nested tensor of one or more formulas."""
    out = fs[-1]
    for f in reversed(fs[:-1]):
        out = Tensor(f, out)
    return out


def free_vars(obj) -> set[str]:
    if isinstance(obj, (Var, Con)):
        return term_vars(obj)
    if isinstance(obj, One):
        return set()
    if isinstance(obj, (Tensor, Lolli)):
        return free_vars(obj.left) | free_vars(obj.right)
    if isinstance(obj, (Plus, With)):
        out: set[str] = set()
        for _, f in obj.branches:
            out |= free_vars(f)
        return out
    if isinstance(obj, (Exists, Forall)):
        return free_vars(obj.body) - {obj.var}
    if isinstance(obj, Equal):
        return term_vars(obj.lhs) | term_vars(obj.rhs)
    if isinstance(obj, Pred):
        out = set()
        for a in obj.args:
            out |= term_vars(a)
        return out
    if hasattr(obj, "free_vars"):
        return obj.free_vars()
    raise TypeError(f"not a term or formula: {obj!r}")


def predicates(f: Formula) -> Iterator[tuple[Pred, bool]]:
    """Yield every predicate occurrence with its polarity (True = covariant)."""

    def go(f, pos):
        if isinstance(f, Pred):
            yield f, pos
        elif isinstance(f, Tensor):
            yield from go(f.left, pos)
            yield from go(f.right, pos)
        elif isinstance(f, Lolli):
            yield from go(f.left, not pos)
            yield from go(f.right, pos)
        elif isinstance(f, (Plus, With)):
            for _, g in f.branches:
                yield from go(g, pos)
        elif isinstance(f, (Exists, Forall)):
            yield from go(f.body, pos)

    yield from go(f, True)


# ---------------------------------------------------------------------------
# signatures


class SignatureError(ValueError):
    def __init__(self, msg: str, line: int | None = None, col: int | None = None):
        self.line, self.col = line, col
        where = f" at line {line}, column {col}" if line is not None else ""
        super().__init__(msg + where)


@dataclass(frozen=True)
class PredDef:
    name: str
    params: tuple
    body: Formula
    priority: int
    polarity: str  # "mu" | "nu"


@dataclass(frozen=True)
class Signature:
    defs: tuple = ()
    atoms: tuple = ()  # ((name, arity), ...) opaque predicates
    constructors: tuple = ()  # ((name, arity), ...)
    rules: tuple = ()  # ((lhs, rhs), ...) term rewrite rules
    _index: dict = field(default=None, compare=False, repr=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {d.name: d for d in self.defs})

    def lookup(self, name: str) -> PredDef:
        try:
            return self._index[name]
        except KeyError:
            raise SignatureError(f"unknown predicate {name}") from None

    def is_defined(self, name: str) -> bool:
        return name in self._index

    def arity(self, name: str) -> int | None:
        if name in self._index:
            return len(self._index[name].params)
        return dict(self.atoms).get(name)

    @property
    def max_priority(self) -> int:
        return max((d.priority for d in self.defs), default=0)

    def constructor_arity(self, name: str) -> int | None:
        return dict(self.constructors).get(name)

    def normalize(self, t: Term) -> Term:
        return normalize(t, self.rules)

    def extend(self, **kw) -> "Signature":
        parts = dict(defs=self.defs, atoms=self.atoms, constructors=self.constructors, rules=self.rules)
        for k, v in kw.items():
            parts[k] = parts[k] + tuple(v)
        return Signature(**parts)


def validate_signature(sig: Signature, where: dict | None = None) -> None:
    """Raise SignatureError unless every signature invariant holds."""
    where = where or {}

    def err(msg, name=None):
        raise SignatureError(msg, *where.get(name, (None, None)))

    seen = set()
    for d in sig.defs:
        if d.name in seen:
            err(f"predicate {d.name} defined twice", d.name)
        seen.add(d.name)
        if d.polarity not in ("mu", "nu"):
            err(f"bad polarity {d.polarity!r}", d.name)
        if d.priority < 1:
            err(f"priority of {d.name} must be positive", d.name)
    for name, _ in sig.atoms:
        if name in seen:
            err(f"{name} is both an atom and a defined predicate", name)
    by_prio: dict[int, tuple[str, str]] = {}
    for d in sig.defs:
        other = by_prio.setdefault(d.priority, (d.polarity, d.name))
        if other[0] != d.polarity:
            err(f"priority {d.priority} mixes mu ({other[1] if other[0] == 'mu' else d.name}) "
                f"and nu ({d.name if other[0] == 'mu' else other[1]})", d.name)
    variance: dict[str, set[bool]] = {}
    for d in sig.defs:
        extra = free_vars(d.body) - set(d.params)
        if extra:
            err(f"free variables {sorted(extra)} in body of {d.name}", d.name)
        _check_labels(d.body, lambda m: err(m, d.name))
        for p, pos in predicates(d.body):
            ar = sig.arity(p.name)
            if ar is None:
                err(f"unknown predicate {p.name} in body of {d.name}", d.name)
            if ar != len(p.args):
                err(f"predicate {p.name} expects {ar} arguments, got {len(p.args)}", d.name)
            if sig.is_defined(p.name):
                variance.setdefault(p.name, set()).add(pos)
    for name, pols in variance.items():
        if len(pols) > 1:
            err(f"predicate {name} occurs in mixed variance", name)


def _check_labels(f: Formula, err) -> None:
    if isinstance(f, (Plus, With)):
        labels = [l for l, _ in f.branches]
        if len(labels) != len(set(labels)):
            err(f"duplicate labels {labels}")
        for _, g in f.branches:
            _check_labels(g, err)
    elif isinstance(f, (Tensor, Lolli)):
        _check_labels(f.left, err)
        _check_labels(f.right, err)
    elif isinstance(f, (Exists, Forall)):
        _check_labels(f.body, err)


# ---------------------------------------------------------------------------
# substitutions


class Subst(Mapping):
    """Finite map from variable names to terms. Immutable and hashable."""

    __slots__ = ("_map", "_hash")

    def __init__(self, bindings=None, **kw):
        m = dict(bindings or {})
        m.update(kw)
        self._map = {k: v for k, v in m.items() if v != Var(k)}
        self._hash = None

    def __getitem__(self, k):
        return self._map[k]

    def __iter__(self):
        return iter(sorted(self._map))

    def __len__(self):
        return len(self._map)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._map.items()))
        return self._hash

    def __eq__(self, other):
        if isinstance(other, Subst):
            return self._map == other._map
        if isinstance(other, Mapping):
            return self._map == dict(other)
        return NotImplemented

    def __repr__(self):
        return "{" + ", ".join(f"{k} := {self._map[k]}" for k in self) + "}"

    def range_vars(self) -> set[str]:
        out: set[str] = set()
        for t in self._map.values():
            out |= term_vars(t)
        return out

    def without(self, names) -> "Subst":
        return Subst({k: v for k, v in self._map.items() if k not in names})

    def then(self, other: "Subst", rules=()) -> "Subst":
        """Composition: apply self first, then other."""
        out = {k: apply_subst(other, v, rules) for k, v in self._map.items()}
        for k, v in other._map.items():
            out.setdefault(k, v)
        return Subst(out)


class NoUnifier:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "NoUnifier"

    def __bool__(self):
        return False


NO_UNIFIER = NoUnifier()


def _match(pat: Term, t: Term, env: dict) -> bool:
    if isinstance(pat, Var):
        if pat.name in env:
            return env[pat.name] == t
        env[pat.name] = t
        return True
    if not isinstance(t, Con) or t.name != pat.name or len(t.args) != len(pat.args):
        return False
    return all(_match(p, a, env) for p, a in zip(pat.args, t.args))


def _plain_subst(env: Mapping, t: Term) -> Term:
    if isinstance(t, Var):
        return env.get(t.name, t)
    return Con(t.name, tuple(_plain_subst(env, a) for a in t.args))


def normalize(t: Term, rules=()) -> Term:
    """Innermost rewriting with the given (lhs, rhs) rules."""
    if not rules or isinstance(t, Var):
        return t
    t = Con(t.name, tuple(normalize(a, rules) for a in t.args))
    for lhs, rhs in rules:
        env: dict = {}
        if _match(lhs, t, env):
            return normalize(_plain_subst(env, rhs), rules)
    return t


def _rules_of(sig) -> tuple:
    if sig is None:
        return ()
    if isinstance(sig, Signature):
        return sig.rules
    return tuple(sig)


def fresh_name(base: str, avoid: set[str]) -> str:
    name = base
    while name in avoid:
        name += "'"
    return name


def apply_subst(theta: Mapping, obj, sig=None):
    """Capture-avoiding substitution on terms, formulas, or objects with a `subst` method.

    `sig` may be a Signature or a rule tuple; terms are then kept in normal form.
    """
    rules = _rules_of(sig)
    if not isinstance(theta, Subst):
        theta = Subst(theta)
    if not theta and not rules:
        return obj
    return _subst(theta, obj, rules)


def _subst(theta: Subst, obj, rules):
    if isinstance(obj, Var):
        return normalize(theta.get(obj.name, obj), rules) if obj.name in theta else obj
    if isinstance(obj, Con):
        return normalize(Con(obj.name, tuple(_subst(theta, a, rules) for a in obj.args)), rules)
    if isinstance(obj, One):
        return obj
    if isinstance(obj, Tensor):
        return Tensor(_subst(theta, obj.left, rules), _subst(theta, obj.right, rules))
    if isinstance(obj, Lolli):
        return Lolli(_subst(theta, obj.left, rules), _subst(theta, obj.right, rules))
    if isinstance(obj, Plus):
        return Plus(tuple((l, _subst(theta, f, rules)) for l, f in obj.branches))
    if isinstance(obj, With):
        return With(tuple((l, _subst(theta, f, rules)) for l, f in obj.branches))
    if isinstance(obj, (Exists, Forall)):
        inner = theta.without({obj.var})
        relevant = Subst({k: v for k, v in inner.items() if k in free_vars(obj.body)})
        var, body = obj.var, obj.body
        if var in relevant.range_vars():
            new = fresh_name(var, relevant.range_vars() | free_vars(body) | set(relevant))
            body = _subst(Subst({var: Var(new)}), body, ())
            var = new
        return type(obj)(var, _subst(relevant, body, rules))
    if isinstance(obj, Equal):
        return Equal(_subst(theta, obj.lhs, rules), _subst(theta, obj.rhs, rules))
    if isinstance(obj, Pred):
        return Pred(obj.name, tuple(_subst(theta, a, rules) for a in obj.args))
    if isinstance(obj, tuple):
        return tuple(_subst(theta, x, rules) for x in obj)
    if hasattr(obj, "subst"):
        return obj.subst(theta, rules)
    raise TypeError(f"cannot substitute into {obj!r}")


def mgu(s: Term, t: Term, sig=None) -> Subst | NoUnifier:
    """Most general unifier of two terms, or NO_UNIFIER.

    Variable-variable bindings map the larger name to the smaller one.
    """
    rules = _rules_of(sig)
    s, t = normalize(s, rules), normalize(t, rules)
    env: dict[str, Term] = {}

    def walk(x: Term) -> Term:
        while isinstance(x, Var) and x.name in env:
            x = env[x.name]
        return x

    def occurs(v: str, x: Term) -> bool:
        x = walk(x)
        if isinstance(x, Var):
            return x.name == v
        return any(occurs(v, a) for a in x.args)

    stack = [(s, t)]
    while stack:
        a, b = stack.pop()
        a, b = walk(a), walk(b)
        if a == b:
            continue
        if isinstance(a, Var) and isinstance(b, Var):
            hi, lo = (a, b) if a.name > b.name else (b, a)
            env[hi.name] = lo
        elif isinstance(a, Var):
            if occurs(a.name, b):
                return NO_UNIFIER
            env[a.name] = b
        elif isinstance(b, Var):
            if occurs(b.name, a):
                return NO_UNIFIER
            env[b.name] = a
        else:
            if a.name != b.name or len(a.args) != len(b.args):
                return NO_UNIFIER
            stack.extend(zip(a.args, b.args))

    def resolve(x: Term) -> Term:
        x = walk(x)
        if isinstance(x, Var):
            return x
        return Con(x.name, tuple(resolve(y) for y in x.args))

    return Subst({v: normalize(resolve(Var(v)), rules) for v in env})


def unfold_predicate(sig: Signature, name: str, args) -> Formula:
    d = sig.lookup(name)
    args = tuple(args)
    if len(args) != len(d.params):
        raise SignatureError(f"{name} expects {len(d.params)} arguments, got {len(args)}")
    return apply_subst(Subst(dict(zip(d.params, args))), d.body, sig)


# ---------------------------------------------------------------------------
# alpha equivalence


def canonical(f: Formula, depth: int = 0, env: dict | None = None) -> Formula:
    """Rename bound variables to positional names so alpha-variants coincide."""
    env = env or {}
    if isinstance(f, (Exists, Forall)):
        new = f"#{depth}"
        return type(f)(new, canonical(f.body, depth + 1, {**env, f.var: new}))
    if isinstance(f, (Tensor, Lolli)):
        return type(f)(canonical(f.left, depth, env), canonical(f.right, depth, env))
    if isinstance(f, (Plus, With)):
        return type(f)(tuple((l, canonical(g, depth, env)) for l, g in f.branches))
    if env and isinstance(f, (Equal, Pred)):
        return _subst(Subst({k: Var(v) for k, v in env.items()}), f, ())
    return f


def alpha_eq(a: Formula, b: Formula) -> bool:
    return a == b or canonical(a) == canonical(b)


# ---------------------------------------------------------------------------
# JSON


def to_json(obj):
    if isinstance(obj, Var):
        return {"tag": "Var", "name": obj.name}
    if isinstance(obj, Con):
        return {"tag": "Con", "name": obj.name, "args": [to_json(a) for a in obj.args]}
    if isinstance(obj, One):
        return {"tag": "One"}
    if isinstance(obj, (Tensor, Lolli)):
        return {"tag": type(obj).__name__, "left": to_json(obj.left), "right": to_json(obj.right)}
    if isinstance(obj, (Plus, With)):
        return {"tag": type(obj).__name__,
                "branches": [{"label": l, "body": to_json(f)} for l, f in obj.branches]}
    if isinstance(obj, (Exists, Forall)):
        return {"tag": type(obj).__name__, "var": obj.var, "body": to_json(obj.body)}
    if isinstance(obj, Equal):
        return {"tag": "Equal", "lhs": to_json(obj.lhs), "rhs": to_json(obj.rhs)}
    if isinstance(obj, Pred):
        return {"tag": "Pred", "name": obj.name, "args": [to_json(a) for a in obj.args]}
    if isinstance(obj, Signature):
        return {
            "tag": "Signature",
            "constructors": [[n, a] for n, a in obj.constructors],
            "atoms": [[n, a] for n, a in obj.atoms],
            "rules": [[to_json(l), to_json(r)] for l, r in obj.rules],
            "defs": [{"name": d.name, "params": list(d.params), "priority": d.priority,
                      "polarity": d.polarity, "body": to_json(d.body)} for d in obj.defs],
        }
    raise TypeError(f"cannot serialize {obj!r}")


def from_json(j):
    tag = j["tag"]
    if tag == "Var":
        return Var(j["name"])
    if tag == "Con":
        return Con(j["name"], tuple(from_json(a) for a in j["args"]))
    if tag == "One":
        return One()
    if tag in ("Tensor", "Lolli"):
        return {"Tensor": Tensor, "Lolli": Lolli}[tag](from_json(j["left"]), from_json(j["right"]))
    if tag in ("Plus", "With"):
        cls = Plus if tag == "Plus" else With
        return cls(tuple((b["label"], from_json(b["body"])) for b in j["branches"]))
    if tag in ("Exists", "Forall"):
        return (Exists if tag == "Exists" else Forall)(j["var"], from_json(j["body"]))
    if tag == "Equal":
        return Equal(from_json(j["lhs"]), from_json(j["rhs"]))
    if tag == "Pred":
        return Pred(j["name"], tuple(from_json(a) for a in j["args"]))
    if tag == "Signature":
        return Signature(
            defs=tuple(PredDef(d["name"], tuple(d["params"]), from_json(d["body"]), d["priority"],
                               d["polarity"]) for d in j["defs"]),
            atoms=tuple((n, a) for n, a in j["atoms"]),
            constructors=tuple((n, a) for n, a in j["constructors"]),
            rules=tuple((from_json(l), from_json(r)) for l, r in j["rules"]),
        )
    raise ValueError(f"unknown tag {tag}")


# ---------------------------------------------------------------------------
# printing

_LOLLI, _PLUS, _WITH, _TENSOR, _ATOM = 1, 2, 3, 4, 5


def show(obj, unicode: bool = False) -> str:
    """Render a term or formula. The ASCII form parses back to the same object."""
    if isinstance(obj, (Var, Con)):
        return str(obj)
    return _show(obj, _LOLLI, True, unicode)


def _binary_labels(f) -> bool:
    return f.labels == ("pi1", "pi2")


def _show(f, level: int, last: bool, u: bool) -> str:
    sym = {"*": "⊗", "-o": "⊸", "+": "⊕", "&": "&", "exists": "∃", "forall": "∀", "top": "⊤"} if u else {}

    def s(k):
        return sym.get(k, k)

    def wrap(text, mine):
        return f"({text})" if mine < level else text

    if isinstance(f, One):
        return "1"
    if isinstance(f, Equal):
        return f"{f.lhs} = {f.rhs}"
    if isinstance(f, Pred):
        return f.name if not f.args else f"{f.name}({', '.join(map(str, f.args))})"
    if isinstance(f, Tensor):
        return wrap(f"{_show(f.left, _ATOM, False, u)} {s('*')} {_show(f.right, _TENSOR, last or level > _TENSOR, u)}", _TENSOR)
    if isinstance(f, Lolli):
        return wrap(f"{_show(f.left, _PLUS, False, u)} {s('-o')} {_show(f.right, _LOLLI, last or level > _LOLLI, u)}", _LOLLI)
    if isinstance(f, (Plus, With)):
        op = "+" if isinstance(f, Plus) else "&"
        mine = _PLUS if op == "+" else _WITH
        if not f.branches:
            return "0" if op == "+" else s("top")
        if _binary_labels(f):
            a, b = f.branches[0][1], f.branches[1][1]
            return wrap(f"{_show(a, mine, False, u)} {s(op)} {_show(b, mine + 1, last or level > mine, u)}", mine)
        inner = ", ".join(f"{l}: {_show(g, _LOLLI, True, u)}" for l, g in f.branches)
        return f"{s(op)}{{{inner}}}"
    if isinstance(f, (Exists, Forall)):
        q = "exists" if isinstance(f, Exists) else "forall"
        vs, body = [f.var], f.body
        while isinstance(body, type(f)):
            vs.append(body.var)
            body = body.body
        text = f"{s(q)} {' '.join(vs)}. {_show(body, _LOLLI, True, u)}"
        return text if last else f"({text})"
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+|\#[^\n]*)
  | (?P<nl>\n)
  | (?P<sym>\|-|-o|=>|:=|⊢|⊸|⊗|⊕|∃|∀|⊤|[(){}\[\],.:;*+&=/])
  | (?P<num>\d+)
  | (?P<id>[^\W\d][\w']*|[†★][\w']*)
    """,
    re.VERBOSE,
)
_UNICODE = {"⊢": "|-", "⊸": "-o", "⊗": "*", "⊕": "+", "∃": "exists", "∀": "forall", "⊤": "top"}


@dataclass
class Tok:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Tok]:
    out, line, start, pos = [], 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise SignatureError(f"unexpected character {text[pos]!r}", line, pos - start + 1)
        kind, val = m.lastgroup, m.group()
        if kind == "nl":
            line, start = line + 1, m.end()
        elif kind != "ws":
            val = _UNICODE.get(val, val)
            if val in ("exists", "forall", "top"):
                kind = "id"
            out.append(Tok(kind, val, line, pos - start + 1))
        pos = m.end()
    out.append(Tok("eof", "", line, pos - start + 1))
    return out


class Parser:
    """Recursive-descent parser shared by signature, proof-script and program readers."""

    def __init__(self, text: str | list[Tok], sig: Signature | None = None, preds: dict | None = None):
        self.toks = tokenize(text) if isinstance(text, str) else text
        self.i = 0
        self.sig = sig or Signature()
        self.preds = dict(preds or {})  # name -> arity, for forward references
        for d in self.sig.defs:
            self.preds.setdefault(d.name, len(d.params))
        for n, a in self.sig.atoms:
            self.preds.setdefault(n, a)
        self.cons = dict(self.sig.constructors)

    # token helpers
    @property
    def tok(self) -> Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Tok | None = None):
        tok = tok or self.tok
        raise SignatureError(msg, tok.line, tok.col)

    def at(self, *texts) -> bool:
        return self.tok.kind != "eof" and self.tok.text in texts

    def eat(self, text: str) -> Tok:
        if self.tok.text != text or self.tok.kind == "eof":
            self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> str:
        if self.tok.kind != "id":
            self.error(f"expected identifier, found {self.tok.text or 'end of input'!r}")
        t = self.tok
        self.i += 1
        return t.text

    def number(self) -> int:
        if self.tok.kind != "num":
            self.error(f"expected number, found {self.tok.text!r}")
        t = self.tok
        self.i += 1
        return int(t.text)

    # terms
    def term(self, bound: frozenset = frozenset()) -> Term:
        tok = self.tok
        name = self.ident()
        if self.at("(") and name not in bound:
            self.eat("(")
            args = [] if self.at(")") else self.term_list(bound)
            self.eat(")")
            ar = self.cons.get(name)
            if ar is None:
                self.error(f"unknown predicate or constructor {name}", tok)
            if ar != len(args):
                self.error(f"constructor {name} expects {ar} arguments, got {len(args)}", tok)
            return Con(name, tuple(args))
        if name not in bound and self.cons.get(name) == 0:
            return Con(name)
        if name not in bound and name in self.cons:
            self.error(f"constructor {name} expects {self.cons[name]} arguments", tok)
        return Var(name)

    def term_list(self, bound) -> list:
        out = [self.term(bound)]
        while self.at(","):
            self.eat(",")
            out.append(self.term(bound))
        return out

    # formulas
    def formula(self, bound: frozenset = frozenset()) -> Formula:
        left = self.plus_f(bound)
        if self.at("-o"):
            self.eat("-o")
            return Lolli(left, self.formula(bound))
        return left

    def plus_f(self, bound) -> Formula:
        f = self.with_f(bound)
        while self.at("+") and self.peek().text != "{":
            self.eat("+")
            f = plus(f, self.with_f(bound))
        return f

    def with_f(self, bound) -> Formula:
        f = self.tensor_f(bound)
        while self.at("&") and self.peek().text != "{":
            self.eat("&")
            f = with_(f, self.tensor_f(bound))
        return f

    def tensor_f(self, bound) -> Formula:
        left = self.unary(bound)
        if self.at("*"):
            self.eat("*")
            return Tensor(left, self.tensor_f(bound))
        return left

    def unary(self, bound) -> Formula:
        if self.tok.kind == "id" and self.tok.text in ("exists", "forall"):
            q = self.ident()
            vs = [self.ident()]
            while not self.at("."):
                vs.append(self.ident())
            self.eat(".")
            body = self.formula(bound | set(vs))
            for v in reversed(vs):
                body = (Exists if q == "exists" else Forall)(v, body)
            return body
        return self.atom(bound)

    def atom(self, bound) -> Formula:
        tok = self.tok
        if tok.kind == "num" and tok.text in ("0", "1"):
            self.i += 1
            return One() if tok.text == "1" else ZERO
        if self.at("("):
            self.eat("(")
            f = self.formula(bound)
            self.eat(")")
            return f
        if self.at("+", "&") and self.peek().text == "{":
            op = self.tok.text
            self.i += 2
            branches = []
            while not self.at("}"):
                label = self.ident()
                self.eat(":")
                branches.append((label, self.formula(bound)))
                if not self.at("}"):
                    self.eat(",")
            self.eat("}")
            labels = [l for l, _ in branches]
            if len(labels) != len(set(labels)):
                self.error(f"duplicate labels {labels}", tok)
            return (Plus if op == "+" else With)(tuple(branches))
        if tok.kind == "id" and tok.text == "top":
            self.i += 1
            return TOP
        if tok.kind == "id" and tok.text in self.preds and tok.text not in bound:
            name = self.ident()
            args = []
            if self.at("("):
                self.eat("(")
                args = [] if self.at(")") else self.term_list(bound)
                self.eat(")")
            if len(args) != self.preds[name]:
                self.error(f"predicate {name} expects {self.preds[name]} arguments, got {len(args)}", tok)
            return Pred(name, tuple(args))
        if tok.kind == "id":
            lhs = self.term(bound)
            if not self.at("="):
                if isinstance(lhs, Con) or lhs.name in bound:
                    self.error("expected '=' after term", self.tok)
                self.error(f"unknown predicate {lhs.name}", tok)
            self.eat("=")
            return Equal(lhs, self.term(bound))
        self.error(f"unexpected {tok.text or 'end of input'!r}")


_HEADER = re.compile(r"([^\W\d][\w']*)\s*(?:\(([^()]*)\))?\s*=\s*(\d+)\s*(mu|nu|μ|ν)(?![\w'])")


def parse_signature(text: str, base: Signature | None = None) -> Signature:
    """Parse `con`, `atom`, `rule` and definition statements into a validated Signature."""
    sig, _ = _parse_signature_prefix(text, base)
    return sig


def _parse_signature_prefix(text, base=None, stop=("proof",)):
    base = base or Signature()
    preds = {}
    for m in _HEADER.finditer(text):
        params = [p.strip() for p in (m.group(2) or "").split(",") if p.strip()]
        preds[m.group(1)] = len(params)
    p = Parser(text, base, preds)
    defs, atoms, cons, rules = list(base.defs), list(base.atoms), list(base.constructors), list(base.rules)
    where = {}
    while p.tok.kind != "eof" and not (p.tok.kind == "id" and p.tok.text in stop):
        if p.at(";"):
            p.eat(";")
            continue
        tok = p.tok
        head = p.ident()
        if head in ("con", "atom"):
            while True:
                n = p.ident()
                p.eat("/")
                a = p.number()
                if head == "con":
                    if n in p.cons and p.cons[n] != a:
                        p.error(f"constructor {n} redeclared with arity {a}", tok)
                    cons.append((n, a))
                    p.cons[n] = a
                else:
                    atoms.append((n, a))
                    p.preds[n] = a
                if not p.at(","):
                    break
                p.eat(",")
        elif head == "rule":
            lhs = p.term()
            p.eat("=>")
            rhs = p.term()
            if not isinstance(lhs, Con):
                p.error("rewrite rule must start with a constructor", tok)
            if term_vars(rhs) - term_vars(lhs):
                p.error("rewrite rule introduces variables", tok)
            rules.append((lhs, rhs))
        else:
            params = []
            if p.at("("):
                p.eat("(")
                if not p.at(")"):
                    params.append(p.ident())
                    while p.at(","):
                        p.eat(",")
                        params.append(p.ident())
                p.eat(")")
            p.eat("=")
            prio = p.number()
            pol = p.ident()
            pol = {"μ": "mu", "ν": "nu"}.get(pol, pol)
            if pol not in ("mu", "nu"):
                p.error(f"expected mu or nu, found {pol!r}")
            body = p.formula(frozenset(params))
            defs.append(PredDef(head, tuple(params), body, prio, pol))
            where[head] = (tok.line, tok.col)
    sig = Signature(tuple(defs), tuple(dict.fromkeys(atoms)), tuple(dict.fromkeys(cons)), tuple(rules))
    validate_signature(sig, where)
    return sig, p


def parse_formula(text: str, sig: Signature | None = None, bound=frozenset()) -> Formula:
    p = Parser(text, sig)
    f = p.formula(frozenset(bound))
    if p.tok.kind != "eof":
        p.error(f"trailing input {p.tok.text!r}")
    return f


def parse_term(text: str, sig: Signature | None = None) -> Term:
    p = Parser(text, sig)
    t = p.term()
    if p.tok.kind != "eof":
        p.error(f"trailing input {p.tok.text!r}")
    return t


def show_signature(sig: Signature) -> str:
    lines = []
    if sig.constructors:
        lines.append("con " + ", ".join(f"{n}/{a}" for n, a in sig.constructors))
    if sig.atoms:
        lines.append("atom " + ", ".join(f"{n}/{a}" for n, a in sig.atoms))
    for l, r in sig.rules:
        lines.append(f"rule {l} => {r}")
    for d in sig.defs:
        head = d.name + (f"({', '.join(d.params)})" if d.params else "")
        lines.append(f"{head} ={d.priority} {d.polarity} {show(d.body)}")
    return "\n".join(lines) + "\n"
