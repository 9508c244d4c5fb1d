"""Subsingleton session-typed processes: the .ssn format, annotated typing, and the guard check.

Session types reuse the logic's formula classes: ``One``, ``Plus`` and ``With`` over labels, and
``Pred(t)`` for a type name.  A typing derivation is an ordinary ``CircularDerivation`` whose
position variables are channels, so the guard condition is exactly the trace check of
``validity.check_validity``.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field, replace

from .derivation import (
    EQ, LT, Backedge, CircularDerivation, Entry, Node, PositionVar, Rule, Sequent, equal_delta,
    fixpoint_delta,
)
from .syntax import One, Plus, PredDef, Pred, Signature, SignatureError, With, alpha_eq, show, validate_signature
from .validity import Invalid, Valid, check_validity

# ---------------------------------------------------------------------------
# process terms


@dataclass(frozen=True)
class Fwd:
    """``y <- x``"""
    y: str
    x: str


@dataclass(frozen=True)
class Spawn:
    """``(w : A) <- { P }; Q``: P uses the left channel and provides w, Q uses w."""
    w: str
    type: object
    left: object
    right: object


@dataclass(frozen=True)
class Close:
    """``close R y``"""
    y: str


@dataclass(frozen=True)
class Wait:
    """``wait L x; P``"""
    x: str
    cont: object


@dataclass(frozen=True)
class Send:
    """``R y.k; P`` or ``L x.k; P``; k may be an unfolding message ``mu_t`` / ``nu_t``."""
    side: str
    chan: str
    label: str
    cont: object


@dataclass(frozen=True)
class Case:
    """``case R y (l => P | ...)`` or ``case L x (...)``; a single ``mu_t``/``nu_t`` branch receives an unfolding."""
    side: str
    chan: str
    branches: tuple  # ((label, process), ...)


@dataclass(frozen=True)
class Call:
    """``y <- X <- x`` (x omitted when X has no left channel)"""
    y: str
    name: str
    x: str | None


Process = Fwd | Spawn | Close | Wait | Send | Case | Call


def unfolding(label: str) -> tuple[str, str] | None:
    """('mu', t) for ``mu_t``, ('nu', t) for ``nu_t``, otherwise None."""
    m = re.fullmatch(r"(mu|nu)_(\w+)", label)
    return (m.group(1), m.group(2)) if m else None


def rename(p: Process, m: dict) -> Process:
    """Rename free channel names; spawned names shadow."""
    r = lambda c: m.get(c, c)  # noqa: E731
    match p:
        case Fwd(y, x):
            return Fwd(r(y), r(x))
        case Spawn(w, a, left, right):
            inner = {k: v for k, v in m.items() if k != w}
            return Spawn(w, a, rename(left, inner), rename(right, inner))
        case Close(y):
            return Close(r(y))
        case Wait(x, cont):
            return Wait(r(x), rename(cont, m))
        case Send(side, c, k, cont):
            return Send(side, r(c), k, rename(cont, m))
        case Case(side, c, branches):
            return Case(side, r(c), tuple((k, rename(q, m)) for k, q in branches))
        case Call(y, name, x):
            return Call(r(y), name, None if x is None else r(x))
    raise TypeError(p)


def subterm(p: Process, path: tuple) -> Process:
    for i in path:
        p = children(p)[i]
    return p


def children(p: Process) -> list:
    match p:
        case Spawn(_, _, left, right):
            return [left, right]
        case Wait(_, cont) | Send(_, _, _, cont):
            return [cont]
        case Case(_, _, branches):
            return [q for _, q in branches]
    return []


def show_process(p: Process) -> str:
    match p:
        case Fwd(y, x):
            return f"{y} <- {x}"
        case Spawn(w, a, left, right):
            return f"({w} : {show_type(a)}) <- {{ {show_process(left)} }}; {show_process(right)}"
        case Close(y):
            return f"close R {y}"
        case Wait(x, cont):
            return f"wait L {x}; {show_process(cont)}"
        case Send(side, c, k, cont):
            return f"{side} {c}.{k}; {show_process(cont)}"
        case Case(side, c, branches):
            return f"case {side} {c} (" + " | ".join(f"{k} => {show_process(q)}" for k, q in branches) + ")"
        case Call(y, name, x):
            return f"{y} <- {name} <-" + (f" {x}" if x else "")
    raise TypeError(p)


def show_type(a) -> str:
    return show(a)


# ---------------------------------------------------------------------------
# programs


@dataclass(frozen=True)
class ProcDef:
    name: str
    left: tuple | None  # (channel, type) or None
    right: tuple  # (channel, type)
    body: Process


@dataclass
class Program:
    sig: Signature
    defs: dict = field(default_factory=dict)  # name -> ProcDef, in source order

    @property
    def n(self) -> int:
        return self.sig.max_priority

    def lookup(self, name: str) -> ProcDef:
        try:
            return self.defs[name]
        except KeyError:
            raise SessionTypeError(f"unknown definition {name}") from None


class ProgramSyntaxError(ValueError):
    def __init__(self, msg: str, line: int | None = None, col: int | None = None):
        self.line, self.col = line, col
        super().__init__(msg + (f" at line {line}, column {col}" if line is not None else ""))


class SessionTypeError(ValueError):
    def __init__(self, msg: str, where: str | None = None):
        self.where = where
        super().__init__(f"{where}: {msg}" if where else msg)


_TOK = re.compile(r"(?P<ws>\s+|#[^\n]*)|(?P<sym><-|=>|\|-|[(){};.:|,+&=])|(?P<num>\d+)|(?P<id>[A-Za-z_][\w']*)")


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list:
    out, line, start, pos = [], 1, 0, 0
    while pos < len(text):
        m = _TOK.match(text, pos)
        if not m:
            raise ProgramSyntaxError(f"unexpected character {text[pos]!r}", line, pos - start + 1)
        if m.lastgroup != "ws":
            out.append(_Tok(m.lastgroup, m.group(), line, pos - start + 1))
        for i, ch in enumerate(m.group()):
            if ch == "\n":
                line, start = line + 1, pos + i + 1
        pos = m.end()
    out.append(_Tok("eof", "", line, pos - start + 1))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.tok
        raise ProgramSyntaxError(msg, tok.line, tok.col)

    def at(self, *texts) -> bool:
        return self.tok.text in texts and self.tok.kind != "eof"

    def eat(self, text: str) -> _Tok:
        if self.tok.text != text:
            self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> str:
        if self.tok.kind != "id":
            self.error(f"expected a name, found {self.tok.text or 'end of input'!r}")
        t = self.tok
        self.i += 1
        return t.text

    # types
    def stype(self):
        if self.at("1"):
            self.i += 1
            return One()
        if self.at("+", "&"):
            op = self.tok.text
            self.i += 1
            self.eat("{")
            branches = []
            while True:
                label = self.ident()
                self.eat(":")
                branches.append((label, self.stype()))
                if not self.at(","):
                    break
                self.i += 1
            self.eat("}")
            return Plus(tuple(branches)) if op == "+" else With(tuple(branches))
        return Pred(self.ident())

    def channel_decl(self, allow_empty: bool):
        if allow_empty and self.at("."):
            self.i += 1
            return None
        self.eat("(")
        c = self.ident()
        self.eat(":")
        a = self.stype()
        self.eat(")")
        return (c, a)

    # processes
    def process(self) -> Process:
        t = self.tok
        if self.at("close"):
            self.i += 1
            self.eat("R")
            return Close(self.ident())
        if self.at("wait"):
            self.i += 1
            self.eat("L")
            x = self.ident()
            self.eat(";")
            return Wait(x, self.process())
        if self.at("case"):
            self.i += 1
            side = self.side()
            c = self.ident()
            self.eat("(")
            branches = [self.branch()]
            while self.at("|"):
                self.i += 1
                branches.append(self.branch())
            self.eat(")")
            labels = [k for k, _ in branches]
            if len(set(labels)) != len(labels):
                self.error("duplicate branch label", t)
            return Case(side, c, tuple(branches))
        if self.at("R", "L") and self.toks[self.i + 1].kind == "id":
            side = self.side()
            c = self.ident()
            self.eat(".")
            k = self.ident()
            self.eat(";")
            return Send(side, c, k, self.process())
        if self.at("("):
            if self.toks[self.i + 2].text == ":":
                self.i += 1
                w = self.ident()
                self.eat(":")
                a = self.stype()
                self.eat(")")
                self.eat("<-")
                self.eat("{")
                left = self.process()
                self.eat("}")
                self.eat(";")
                return Spawn(w, a, left, self.process())
            self.i += 1
            p = self.process()
            self.eat(")")
            return p
        if t.kind == "id":
            y = self.ident()
            self.eat("<-")
            name = self.ident()
            if not self.at("<-"):
                return Fwd(y, name)
            self.i += 1
            x = self.ident() if self.tok.kind == "id" else None
            return Call(y, name, x)
        self.error(f"expected a process, found {t.text or 'end of input'!r}")

    def side(self) -> str:
        if not self.at("R", "L"):
            self.error("expected R or L")
        s = self.tok.text
        self.i += 1
        return s

    def branch(self):
        k = self.ident()
        self.eat("=>")
        return (k, self.process())


def parse_program(text: str) -> Program:
    """Parse ``type`` and ``proc`` declarations into a Program (signature checked, bodies not yet typed)."""
    p = _Parser(text)
    defs, procs, where = [], {}, {}
    while p.tok.kind != "eof":
        start = p.tok
        if p.at("type"):
            p.i += 1
            name = p.ident()
            p.eat("=")
            if p.tok.kind != "num":
                p.error("expected a priority")
            prio = int(p.tok.text)
            p.i += 1
            pol = p.ident()
            if pol not in ("mu", "nu"):
                p.error("expected mu or nu")
            body = p.stype()
            where[name] = (start.line, start.col)
            defs.append(PredDef(name, (), body, prio, pol))
        elif p.at("proc"):
            p.i += 1
            name = p.ident()
            if name in procs:
                p.error(f"process {name} defined twice", start)
            p.eat(":")
            left = p.channel_decl(allow_empty=True)
            p.eat("|-")
            right = p.channel_decl(allow_empty=False)
            p.eat("=")
            body = p.process()
            if left and left[0] == right[0]:
                p.error("left and right channels must differ", start)
            procs[name] = ProcDef(name, left, right, body)
            _check_linear(body, left and left[0], right[0], name, p, start)
        else:
            p.error(f"expected 'type' or 'proc', found {p.tok.text!r}")
    sig = Signature(defs=tuple(defs))
    validate_signature(sig, where)
    for d in sig.defs:
        _check_session_type(d.body, sig, d.name)
    for d in procs.values():
        for decl in (d.left, d.right):
            if decl:
                _check_session_type(decl[1], sig, d.name)
    return Program(sig, procs)


def _check_session_type(a, sig: Signature, where: str) -> None:
    match a:
        case One():
            return
        case Plus(branches) | With(branches):
            for k, b in branches:
                if unfolding(k):
                    raise SessionTypeError(f"label {k} is reserved for unfolding messages", where)
                _check_session_type(b, sig, where)
            return
        case Pred(name, args) if not args:
            if not sig.is_defined(name):
                raise SessionTypeError(f"unknown session type {name}", where)
            return
    raise SessionTypeError(f"{show(a)} is not a session type", where)


def _check_linear(p: Process, left, right, where, parser, tok) -> None:
    """Every action names the current left channel with L and the right channel with R."""
    def bad(msg):
        parser.error(f"in {where}: {msg}", tok)

    match p:
        case Fwd(y, x):
            if (y, x) != (right, left):
                bad(f"forward {show_process(p)} must connect {left} to {right}")
        case Spawn(w, _, q1, q2):
            if w in (left, right):
                bad(f"spawned channel {w} shadows an endpoint")
            _check_linear(q1, left, w, where, parser, tok)
            _check_linear(q2, w, right, where, parser, tok)
        case Close(y):
            if y != right or left is not None:
                bad(f"close R {y} needs no left channel and right channel {y}")
        case Wait(x, cont):
            if x != left:
                bad(f"wait L {x} does not use the left channel {left}")
            _check_linear(cont, None, right, where, parser, tok)
        case Send(side, c, _, cont):
            _check_side(side, c, left, right, bad)
            _check_linear(cont, left, right, where, parser, tok)
        case Case(side, c, branches):
            _check_side(side, c, left, right, bad)
            for _, q in branches:
                _check_linear(q, left, right, where, parser, tok)
        case Call(y, name, x):
            if y != right or x != left:
                bad(f"call {show_process(p)} must use channels {left} and {right}")


def _check_side(side, c, left, right, bad) -> None:
    want = right if side == "R" else left
    if c != want:
        bad(f"{side} {c} does not name the {'right' if side == 'R' else 'left'} channel {want}")


# ---------------------------------------------------------------------------
# typing derivations


@dataclass
class TypingDerivation(CircularDerivation):
    """A typing derivation; ``terms`` maps node ids to process terms, ``sites`` to (definition, path)."""
    terms: dict = field(default_factory=dict)
    sites: dict = field(default_factory=dict)


# rule kind for each process head, with the channel side it acts on
def rule_kind(p: Process) -> str:
    match p:
        case Fwd():
            return "Id"
        case Spawn():
            return "Cut"
        case Close():
            return "1R"
        case Wait():
            return "1L"
        case Call():
            return "Def"
        case Send(side, _, k, _):
            u = unfolding(k)
            if u:
                return "muR" if side == "R" else "nuL"
            return "+R" if side == "R" else "&L"
        case Case(side, _, branches):
            if len(branches) == 1 and unfolding(branches[0][0]):
                return "nuR" if side == "R" else "muL"
            return "&R" if side == "R" else "+L"
    raise TypeError(p)


class _Typer:
    def __init__(self, prog: Program, name: str):
        self.prog = prog
        self.sig = prog.sig
        self.n = prog.n
        self.name = name
        self.nodes: dict = {}
        self.terms: dict = {}
        self.sites: dict = {}
        self.used = set()
        for d in prog.defs.values():
            self.used |= {d.right[0]} | ({d.left[0]} if d.left else set())
        self.counter = itertools.count(1)

    def fresh_channel(self, base: str) -> str:
        while True:
            c = f"{base}{next(self.counter)}"
            if c not in self.used:
                self.used.add(c)
                return c

    def err(self, msg: str, nid: str):
        raise SessionTypeError(msg, f"{self.name} at {nid}")

    def build(self) -> TypingDerivation:
        d = self.prog.lookup(self.name)
        left = (PositionVar(d.left[0], 0), d.left[1]) if d.left else None
        seq = Sequent((left,) if left else (), (PositionVar(d.right[0], 0), d.right[1]))
        root = self.name
        call = Call(d.right[0], self.name, d.left[0] if d.left else None)
        stack = [(root, seq, call, (self.name, "call"), frozenset(), {})]
        self.nodes[root] = Node(root, seq)
        while stack:
            nid, seq, term, site, delta, calls = stack.pop()
            node = self.nodes[nid]
            node.delta = delta
            self.terms[nid], self.sites[nid] = term, site
            premises = self.step(nid, seq, term, site, calls)
            node.premises = tuple(p[0] for p in premises)
            for pid, pseq, pterm, psite, pdelta, pcalls in reversed(premises):
                self.nodes[pid] = Node(pid, pseq)
                stack.append((pid, pseq, pterm, psite, pdelta, pcalls))
        td = TypingDerivation(self.sig, self.nodes, root, terms=self.terms, sites=self.sites)
        errs = check_typing(self.prog, td)
        if errs:
            raise SessionTypeError("; ".join(errs[:3]), self.name)
        return td

    def step(self, nid, seq: Sequent, term: Process, site, calls) -> list:
        """Close node `nid` with the rule for `term`; return its premises to expand."""
        node = self.nodes[nid]
        sig, n = self.sig, self.n
        left = seq.ante[0] if seq.ante else None
        x, a = left if left else (None, None)
        y, b = seq.succ
        kind = rule_kind(term)
        out = []

        def premise(i, pseq, pterm, delta=frozenset(), psite=None):
            pid = f"{nid}.{i}"
            out.append((pid, pseq, pterm, psite or (site[0], site[1] + (i,) if site[1] != "call" else ()),
                        frozenset(delta), calls))

        def need(cond, msg):
            if not cond:
                self.err(msg, nid)

        def unfold_type(t):
            return sig.lookup(t.name)

        match term:
            case Fwd():
                need(left is not None and alpha_eq(a, b), f"forward between {show(a) if a else 'nothing'} and {show(b)}")
                node.rule = Rule("Id")
            case Spawn(w, c, q1, q2):
                w1 = self.fresh_channel(w)
                wv = PositionVar(w1, 0)
                q1, q2 = rename(q1, {w: w1}), rename(q2, {w: w1})
                node.rule = Rule("Cut", fresh=wv, formula=c, split=(x,) if x else ())
                premise(0, Sequent(seq.ante, (wv, c)), q1)
                premise(1, Sequent(((wv, c),), seq.succ), q2)
            case Close():
                need(left is None, "close with a live left channel")
                need(isinstance(b, One), f"close on {show(b)}")
                node.rule = Rule("1R", principal=y)
            case Wait(_, cont):
                need(isinstance(a, One), f"wait on {show(a)}")
                node.rule = Rule("1L", principal=x)
                premise(0, Sequent((), seq.succ), cont)
            case Send("R", _, k, cont):
                u = unfolding(k)
                y1 = y.succ()
                if u:
                    need(isinstance(b, Pred) and u[1] == b.name, f"{k} sent on {show(b)}")
                    dfn = unfold_type(b)
                    need(u[0] == dfn.polarity == "mu", f"{k} sent to the right on a {dfn.polarity} type")
                    node.rule = Rule("muR", principal=y)
                    premise(0, Sequent(seq.ante, (y1, dfn.body)), cont, fixpoint_delta("muR", y1, y, dfn.priority, n))
                else:
                    need(isinstance(b, Plus), f"label {k} sent to the right on {show(b)}")
                    need(k in b.labels, f"label {k} not in {show(b)}")
                    node.rule = Rule("+R", principal=y, label=k)
                    premise(0, Sequent(seq.ante, (y1, b.branch(k))), cont, equal_delta(y1, y, n))
            case Send("L", _, k, cont):
                u = unfolding(k)
                x1 = x.succ()
                if u:
                    need(isinstance(a, Pred) and u[1] == a.name, f"{k} sent on {show(a)}")
                    dfn = unfold_type(a)
                    need(u[0] == dfn.polarity == "nu", f"{k} sent to the left on a {dfn.polarity} type")
                    node.rule = Rule("nuL", principal=x)
                    premise(0, Sequent(((x1, dfn.body),), seq.succ), cont, fixpoint_delta("nuL", x1, x, dfn.priority, n))
                else:
                    need(isinstance(a, With), f"label {k} sent to the left on {show(a)}")
                    need(k in a.labels, f"label {k} not in {show(a)}")
                    node.rule = Rule("&L", principal=x, label=k)
                    premise(0, Sequent(((x1, a.branch(k)),), seq.succ), cont, equal_delta(x1, x, n))
            case Case(side, _, branches):
                chan, typ = (y, b) if side == "R" else (x, a)
                c1 = chan.succ()

                def with_chan(f):
                    return Sequent(seq.ante, (c1, f)) if side == "R" else Sequent(((c1, f),), seq.succ)

                u = unfolding(branches[0][0]) if len(branches) == 1 else None
                if u:
                    need(isinstance(typ, Pred) and u[1] == typ.name, f"{branches[0][0]} received on {show(typ)}")
                    dfn = unfold_type(typ)
                    want = "nu" if side == "R" else "mu"
                    need(u[0] == dfn.polarity == want, f"{branches[0][0]} received on the {side} of a {dfn.polarity} type")
                    k = kind
                    node.rule = Rule(k, principal=chan)
                    premise(0, with_chan(dfn.body), branches[0][1], fixpoint_delta(k, c1, chan, dfn.priority, n))
                else:
                    want = With if side == "R" else Plus
                    need(isinstance(typ, want), f"case {side} on {show(typ)}")
                    given = [k for k, _ in branches]
                    need(sorted(given) == sorted(typ.labels), f"branches {given} do not match {show(typ)}")
                    node.rule = Rule(kind, principal=chan)
                    by_label = dict(branches)
                    for i, k in enumerate(typ.labels):
                        premise(i, with_chan(typ.branch(k)), by_label[k], equal_delta(c1, chan, n),
                                psite=(site[0], site[1] + (given.index(k),)))
            case Call(_, name, _):
                dfn = self.prog.lookup(name)
                need((dfn.left is None) == (left is None), f"call to {name} with the wrong number of channels")
                need(dfn.left is None or alpha_eq(dfn.left[1], a), f"call to {name} at left type {show(a) if a else '.'}")
                need(alpha_eq(dfn.right[1], b), f"call to {name} at right type {show(b)}")
                target = calls.get(name)
                if target is not None:
                    tseq = self.nodes[target].seq
                    rho = tuple(sorted(_roles(seq, tseq)))
                    node.rule = Rule("Back")
                    node.back = Backedge(target, _empty(), rho)
                    return []
                calls = {**calls, name: nid}
                m = {dfn.right[0]: y.name}
                if dfn.left:
                    m[dfn.left[0]] = x.name
                node.rule = Rule("Def", label=name)
                premise(0, seq, rename(dfn.body, m), psite=(name, ()))
        return out


def _roles(bud: Sequent, target: Sequent) -> list:
    pairs = [(bud.succ[0], target.succ[0])]
    if bud.ante:
        pairs.append((bud.ante[0][0], target.ante[0][0]))
    return pairs


def _empty():
    from .syntax import Subst
    return Subst()


def typecheck(prog: Program, names=None) -> dict:
    """Typing derivation for every definition (or just `names`); raises SessionTypeError."""
    return {name: _Typer(prog, name).build() for name in (names or prog.defs)}


def check_typing(prog: Program, td: TypingDerivation) -> list:
    """Local correctness of a typing derivation: re-derive each node from its term and compare."""
    errs = []
    for nid, node in td.nodes.items():
        if node.rule is None:
            errs.append(f"{nid}: open goal")
            continue
        term = td.terms.get(nid)
        if term is None:
            errs.append(f"{nid}: no process term")
            continue
        want = rule_kind(term)
        if node.rule.kind != want and not (want == "Def" and node.rule.kind == "Back"):
            errs.append(f"{nid}: rule {node.rule.kind} for a {want} term")
        if node.back is not None:
            tgt = td.nodes.get(node.back.target)
            if tgt is None or tgt.rule is None or tgt.rule.kind != "Def":
                errs.append(f"{nid}: backedge to a non-call node")
            elif not (td.terms[node.back.target].name == term.name and alpha_eq(tgt.seq.succ[1], node.seq.succ[1])):
                errs.append(f"{nid}: backedge between different calls")
            elif not _on_path(td, node.back.target, nid):
                errs.append(f"{nid}: backedge target is not an ancestor")
            continue
        for pid in node.premises:
            p = td.nodes[pid]
            for e in p.delta:
                if e.new.gen != e.old.gen + 1 or e.new.name != e.old.name:
                    errs.append(f"{pid}: generation step {e.old} to {e.new}")
            if len(p.seq.ante) > 1:
                errs.append(f"{pid}: more than one left channel")
    return errs


def _on_path(td, anc, nid) -> bool:
    return anc in td.path(nid)


# ---------------------------------------------------------------------------
# guard check


@dataclass
class Guarded:
    threads: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return True

    def describe(self) -> str:
        if not self.threads:
            return "Guarded (no recursion)"
        return "Guarded: " + "; ".join(f"{c} via {pv} at priority {i}" for c, pv, i in self.threads)


@dataclass
class Unguarded:
    cycle: str
    threads: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return False

    def describe(self) -> str:
        return f"Unguarded: cycle {self.cycle}"


def guard_verdict(td: TypingDerivation) -> Guarded | Unguarded:
    v = check_validity(td, local=False)
    if isinstance(v, Valid):
        return Guarded(v.threads)
    return Unguarded(v.cycle, v.threads)


def guard_check(prog: Program, typings: dict | None = None) -> dict:
    """Guarded or Unguarded(cycle) for every definition."""
    typings = typings or typecheck(prog)
    return {name: guard_verdict(td) for name, td in typings.items()}


def check_process(prog: Program, term: Process, left, right) -> TypingDerivation:
    """Typecheck a single running term at the given (channel, type) endpoints."""
    name = "__term__"
    while name in prog.defs:
        name += "_"
    extra = Program(prog.sig, {**prog.defs, name: ProcDef(name, left, right, term)})
    return _Typer(extra, name).build()
