"""Processes as formulas: configuration and type predicates, star derivations, and certificates.

Channels become term variables and generations become terms over ``succ``; a channel at a
generation is the pair ``ch(x, a)``.  Messages are the atom ``Msg(chan, gen, label)``.

Pattern matching on process syntax is desugared by specialization: every non-call subterm of a
definition body gets its own predicate ``Cfg_X`` / ``Cfg_X_1_0`` (named by its path), whose body
is the clause for that subterm's head constructor.  A call site ``y <- Y <- x`` is encoded as
``Call_Y(x, a, y, b)``, a greatest fixed point one priority above the session types that unfolds
to ``Cfg_Y``.  Session types become ``P_t`` predicates that inherit the priority of ``t``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

from .derivation import LT, Builder, CircularDerivation, DerivationError, Fresh, PositionVar, check_local
from .session import (
    Call, Case, Close, Fwd, Process, Program, Send, Spawn, TypingDerivation, Wait, children, guard_verdict,
    show_process, typecheck, unfolding,
)
from .syntax import (
    Con, Equal, Exists, Formula, Lolli, One, Plus, Pred, PredDef, Signature, Tensor, Var, With, _match,
    canonical, show, validate_signature,
)
from .validity import Order, OmegaClosure, check_validity

MSG = "Msg"
DONE = "Done"
CLOSED = "closed"


def succ(t):
    return Con("succ", (t,))


def ch(x, a):
    return Con("ch", (x, a))


def msg(chan, gen, label: str) -> Pred:
    return Pred(MSG, (chan, gen, Con(label)))


def _term(t):
    return Var(t) if isinstance(t, str) else t


@dataclass(frozen=True)
class Endpoint:
    """A channel at a generation; both parts are terms (strings are read as variables)."""
    chan: object
    gen: object

    @property
    def args(self) -> tuple:
        return (_term(self.chan), _term(self.gen))

    def next(self) -> "Endpoint":
        return Endpoint(_term(self.chan), succ(_term(self.gen)))


def _args(left: Endpoint | None, right: Endpoint) -> tuple:
    return (left.args if left else ()) + right.args


# ---------------------------------------------------------------------------
# configurations


@dataclass(frozen=True)
class Emp:
    """The empty configuration; its two endpoints are the same channel."""


@dataclass(frozen=True)
class Comp:
    """``left |z:typ| right``: two configurations sharing the internal channel z."""
    left: object
    z: str
    typ: object
    right: object


def encode_cfg(c, left: Endpoint | None, right: Endpoint, child=None) -> Formula:
    """The Cfg clause for the head constructor of `c` at the given endpoints.

    Sub-configurations appear as predicates named by ``child(i)``; a call is ``Call_Y``.
    """
    child = child or (lambda i: f"Cfg_{i}")

    def sub(i, p, l, r):
        if isinstance(p, Call):
            return Pred(f"Call_{p.name}", _args(l, r))
        return Pred(child(i), _args(l, r))

    x, y = left, right
    match c:
        case Emp():
            if x is None or x != y:
                raise ValueError("the empty configuration needs equal endpoints")
            return One()
        case Comp(c1, z, _, c2) | Spawn(z, _, c1, c2):
            avoid = {str(t) for t in _args(x, y)}
            zv = _fresh_var("z", avoid)
            ev = _fresh_var("e", avoid | {zv})
            mid = Endpoint(zv, ev)
            return Exists(zv, Exists(ev, Tensor(sub(0, c1, x, mid), sub(1, c2, mid, y))))
        case Fwd():
            return Equal(ch(*x.args), ch(*y.args))
        case Close():
            return Tensor(msg(*y.args, CLOSED), One())
        case Wait(_, q):
            return Lolli(msg(*x.args, CLOSED), sub(0, q, None, y))
        case Send("L", _, k, q):
            return Tensor(msg(*x.args, k), sub(0, q, x.next(), y))
        case Send("R", _, k, q):
            return Tensor(msg(*y.args, k), sub(0, q, x, y.next()))
        case Case("R", _, branches):
            if len(branches) == 1 and unfolding(branches[0][0]):
                return Lolli(msg(*y.args, branches[0][0]), sub(0, branches[0][1], x, y.next()))
            return With(tuple((k, Lolli(msg(*y.args, k), sub(i, q, x, y.next())))
                              for i, (k, q) in enumerate(branches)))
        case Case("L", _, branches):
            if len(branches) == 1 and unfolding(branches[0][0]):
                return Lolli(msg(*x.args, branches[0][0]), sub(0, branches[0][1], x.next(), y))
            return With(tuple((k, Lolli(msg(*x.args, k), sub(i, q, x.next(), y)))
                              for i, (k, q) in enumerate(branches)))
        case Call(_, name, _):
            return Pred(f"Call_{name}", _args(x, y))
    raise TypeError(f"not a configuration: {c!r}")


def _fresh_var(base: str, avoid: set) -> str:
    name = base
    while name in avoid:
        name += "'"
    return name


# ---------------------------------------------------------------------------
# the encoded signature


class TypeNames:
    """Predicate names for session types: ``P_t`` for a type name, ``P_one``, and ``P_t_k`` inside t."""

    def __init__(self, sig: Signature):
        self.sig = sig
        self.names: dict = {}
        self.order: list = []
        self._count = itertools.count(1)
        self.intern(One(), "P_one")
        for d in sig.defs:
            self.intern(Pred(d.name), f"P_{d.name}")
        for d in sig.defs:
            self._walk(d.body, d.name)

    def _walk(self, a, owner):
        self.intern(a, owner=owner)
        if isinstance(a, (Plus, With)):
            for _, b in a.branches:
                self._walk(b, owner)

    def intern(self, a, name=None, owner="anon") -> str:
        key = repr(canonical(a))
        if key not in self.names:
            self.names[key] = name or f"P_{owner}_{next(self._count)}"
            self.order.append(a)
        return self.names[key]

    def __call__(self, a) -> str:
        key = repr(canonical(a))
        if key not in self.names:
            self._walk(a, "anon")
        return self.names[key]


def encode_type_pred(sig: Signature, typ, y: Endpoint, names: TypeNames | None = None) -> Formula:
    """The body of [y:typ]: what the provider of `y` at this generation owes its client."""
    names = names or TypeNames(sig)
    nxt = y.next()
    match typ:
        case One():
            return Tensor(msg(*y.args, CLOSED), Pred(DONE))
        case With(branches):
            return With(tuple((k, Lolli(msg(*y.args, k), Pred(names(a), nxt.args))) for k, a in branches))
        case Plus(branches):
            return Plus(tuple((k, Tensor(msg(*y.args, k), Pred(names(a), nxt.args))) for k, a in branches))
        case Pred(t):
            d = sig.lookup(t)
            label = f"{d.polarity}_{t}"
            body = Pred(names(d.body), nxt.args)
            return Tensor(msg(*y.args, label), body) if d.polarity == "mu" else Lolli(msg(*y.args, label), body)
    raise TypeError(f"not a session type: {typ!r}")


def type_pred(names: TypeNames, typ, y: Endpoint) -> Pred:
    return Pred(names(typ), y.args)


@dataclass
class EncodedSignature:
    base: Signature
    prog: Program
    types: TypeNames
    sites: dict  # predicate name -> (definition, path, term, has_left)

    @property
    def n(self) -> int:
        return self.prog.n


def _sites(prog: Program) -> dict:
    out = {}

    def walk(name, path, p, has_left):
        if isinstance(p, Call):
            return
        pred = f"Cfg_{name}" + "".join(f"_{i}" for i in path)
        out[pred] = (name, path, p, has_left)
        match p:
            case Spawn(_, _, q1, q2):
                walk(name, path + (0,), q1, has_left)
                walk(name, path + (1,), q2, True)
            case Wait(_, q):
                walk(name, path + (0,), q, False)
            case _:
                for i, q in enumerate(children(p)):
                    walk(name, path + (i,), q, has_left)

    for d in prog.defs.values():
        walk(d.name, (), d.body, d.left is not None)
    return out


def site_params(has_left: bool) -> tuple:
    return (Endpoint("x", "a") if has_left else None, Endpoint("y", "b"))


def encode_signature(prog: Program) -> EncodedSignature:
    """Type predicates at their own priorities, Call_Y at n+1 (nu), structure at n+2 (mu)."""
    sig, n = prog.sig, prog.n
    names = TypeNames(sig)
    for d in prog.defs.values():
        for ep in (d.left, d.right):
            if ep:
                names(ep[1])
    sites = _sites(prog)
    for _, _, p, _ in sites.values():
        if isinstance(p, Spawn):
            names(p.type)

    defs = []
    y = Endpoint("y", "b")
    for a in names.order:
        body = encode_type_pred(sig, a, y, names)
        if isinstance(a, Pred):
            d = sig.lookup(a.name)
            defs.append(PredDef(names(a), ("y", "b"), body, d.priority, d.polarity))
        else:
            defs.append(PredDef(names(a), ("y", "b"), body, n + 2, "mu"))
    defs.append(PredDef(DONE, (), One(), n + 2, "mu"))
    for pred, (name, path, p, has_left) in sites.items():
        left, right = site_params(has_left)
        body = encode_cfg(p, left, right, child=lambda i, path=path, name=name: f"Cfg_{name}" + "".join(
            f"_{j}" for j in path + (i,)))
        defs.append(PredDef(pred, tuple(str(t) for t in _args(left, right)), body, n + 2, "mu"))
    for d in prog.defs.values():
        left, right = site_params(d.left is not None)
        body = encode_cfg(d.body, left, right, child=lambda i, name=d.name: f"Cfg_{name}_{i}")
        if not isinstance(d.body, Call):
            body = Pred(f"Cfg_{d.name}", _args(left, right))
        defs.append(PredDef(f"Call_{d.name}", tuple(str(t) for t in _args(left, right)), body, n + 1, "nu"))

    labels = {CLOSED}
    for d in sig.defs:
        labels.add(f"{d.polarity}_{d.name}")
    for a in names.order:
        if isinstance(a, (Plus, With)):
            labels |= set(a.labels)
    constructors = (("ch", 2), ("succ", 1)) + tuple((k, 0) for k in sorted(labels))
    base = Signature(tuple(defs), atoms=((MSG, 3),), constructors=constructors)
    validate_signature(base)
    return EncodedSignature(base, prog, names, sites)


# ---------------------------------------------------------------------------
# strong progress


def gen_var(chan: str) -> Var:
    return Var(f"g_{chan}")


def root_endpoints(prog: Program, main: str):
    d = prog.lookup(main)
    left = Endpoint(d.left[0], f"g_{d.left[0]}") if d.left else None
    return d, left, Endpoint(d.right[0], f"g_{d.right[0]}")


@dataclass(frozen=True)
class ProgressGoal:
    formula: Formula  # what the star derivation proves
    text: str  # the abbreviation, spelled out


def strong_progress_formula(enc: EncodedSignature, main: str) -> ProgressGoal:
    """``Cfg(C) -o [y:B]`` for a closed main; for an open one the quantified form is text only."""
    d, left, right = root_endpoints(enc.prog, main)
    cfg = Pred(f"Call_{main}", _args(left, right))
    goal = type_pred(enc.types, d.right[1], right)
    if left is None:
        f = Lolli(cfg, goal)
        return ProgressGoal(f, show(f))
    f = Lolli(Tensor(type_pred(enc.types, d.left[1], left), cfg), goal)
    z, eta = "z", "eta"
    a = show(d.left[1])
    text = (f"forall X. (forall {z}. forall {eta}. X in [[. |- {z}^{eta} : {a}]] -o "
            f"X |{d.left[0]}:{a}| {main} in [[. |- {d.right[0]}^{right.gen} : {show(d.right[1])}]])")
    return ProgressGoal(f, text)


# ---------------------------------------------------------------------------
# star derivations


@dataclass
class StarDerivation(CircularDerivation):
    """A star derivation; ``pairs`` maps typing node ids to the star node that mirrors them."""
    pairs: dict = field(default_factory=dict)


class _Star:
    def __init__(self, enc: EncodedSignature, td: TypingDerivation):
        self.enc = enc
        self.td = td
        chans = {pv.name for node in td.nodes.values() for pv in node.seq.posvars()}
        self.b = Builder(enc.base, Fresh("w", avoid=chans | {"c"}))
        self.pairs: dict = {}
        self.parent: dict = {}
        self._ids = itertools.count(1)

    def nid(self, base: str) -> str:
        return f"{base}/{next(self._ids)}"

    def apply(self, gid, kind, principal=None, base=None, **kw) -> list:
        k = len(self.b.nodes[gid].seq.ante) + 2
        ids = [self.nid(base or gid.split("/")[0]) for _ in range(k)]
        out = self.b.apply(gid, kind, principal, ids=ids, **kw)
        for p in out:
            self.parent[p] = gid
        return out

    def fresh(self, gid) -> PositionVar:
        return self.b.nodes[gid].rule.fresh

    def cfg(self, gid) -> PositionVar:
        for pv, f in self.b.nodes[gid].seq.ante:
            if isinstance(f, Pred) and f.name.startswith(("Cfg_", "Call_")):
                return pv
        raise DerivationError(f"no configuration antecedent at {gid}")

    def chan(self, gid, name) -> PositionVar:
        for pv, _ in self.b.nodes[gid].seq.ante:
            if pv.name == name:
                return pv
        raise DerivationError(f"no channel {name} at {gid}")

    def id_msg(self, gid, rule, principal, w, base):
        """Hand the received message w to its consumer; returns the continuation goal."""
        if rule == "-oL":
            g1, g2 = self.apply(gid, "-oL", principal, base, split=[w])
        else:
            g1, g2 = self.apply(gid, "*R", None, base, split=[w])
        self.apply(g1, "Id", None, base)
        return g2

    def build(self, root_gid) -> dict:
        stack = [(self.td.root, root_gid)]
        while stack:
            nid, gid = stack.pop()
            self.pairs[nid] = gid
            for pair in self.block(nid, gid):
                stack.append(pair)
        for nid, gid in self.pairs.items():
            node = self.td.nodes[nid]
            if node.rule.kind == "Back":
                self.back(gid, self.pairs[node.back.target])
        return self.pairs

    def back(self, gid, target):
        bud, tgt = self.b.nodes[gid].seq, self.b.nodes[target].seq
        env: dict = {}
        pat = {f.name: f for _, f in tgt.ante}
        for _, f in bud.ante:
            t = pat.get(f.name)
            if t is None or not all(_match(p, a, env) for p, a in zip(t.args, f.args)):
                raise DerivationError(f"bud {gid} does not match {target}")
        if not all(_match(p, a, env) for p, a in zip(tgt.succ[1].args, bud.succ[1].args)):
            raise DerivationError(f"bud {gid} does not match {target}")
        self.b.back(gid, target, {k: v for k, v in env.items() if v != Var(k)})

    def block(self, nid, gid) -> list:
        """Close `gid` with the rule block for typing node `nid`; returns (typing, star) premise pairs."""
        node = self.td.nodes[nid]
        kind = node.rule.kind
        prem = node.premises
        if kind == "Back":
            return []
        c = self.cfg(gid)
        y = self.b.nodes[gid].seq.succ[0]
        left = self.td.nodes[nid].seq.ante
        x = self.chan(gid, left[0][0].name) if left else None
        if kind == "Def":
            (g,) = self.apply(gid, "nuL", c, nid)
            return [(prem[0], g)]
        (g,) = self.apply(gid, "muL", c, nid)
        c = c.succ()
        match kind:
            case "Id":
                (g,) = self.apply(g, "=L", c, nid)
                self.apply(g, "Id", None, nid)
                return []
            case "1R":
                (g,) = self.apply(g, "muR", None, nid)
                (g,) = self.apply(g, "*L", c, nid)
                g = self.id_msg(g, "*R", None, self.fresh(self._parent(g)), nid)
                (g,) = self.apply(g, "muR", None, nid)
                (g,) = self.apply(g, "1L", c, nid)
                self.apply(g, "1R", None, nid)
                return []
            case "1L":
                (g,) = self.apply(g, "muL", x, nid)
                x = x.succ()
                (g,) = self.apply(g, "*L", x, nid)
                g = self.id_msg(g, "-oL", c, self.fresh(self._parent(g)), nid)
                (g,) = self.apply(g, "muL", x, nid)
                (g,) = self.apply(g, "1L", x.succ(), nid)
                return [(prem[0], g)]
            case "Cut":
                w = node.rule.fresh
                (g,) = self.apply(g, "EL", c, nid, eigen=w.name)
                (g,) = self.apply(g, "EL", c, nid, eigen=gen_var(w.name).name)
                (g,) = self.apply(g, "*L", c, nid)
                d = self.fresh(self._parent(g))
                typ = self.td.nodes[prem[0]].seq.succ[1]
                formula = type_pred(self.enc.types, typ, Endpoint(w.name, gen_var(w.name)))
                split = [d] + ([x] if x else [])
                g1, g2 = self.apply(g, "Cut", None, nid, fresh=w, formula=formula, split=split)
                return [(prem[0], g1), (prem[1], g2)]
            case "&L" | "nuL":
                (g,) = self.apply(g, "muL" if kind == "&L" else "nuL", x, nid)
                x = x.succ()
                if kind == "&L":
                    (g,) = self.apply(g, "&L", x, nid, label=node.rule.label)
                (g,) = self.apply(g, "*L", c, nid)
                g = self.id_msg(g, "-oL", x, self.fresh(self._parent(g)), nid)
                return [(prem[0], g)]
            case "+R" | "muR":
                (g,) = self.apply(g, "muR", None, nid)
                if kind == "+R":
                    (g,) = self.apply(g, "+R", None, nid, label=node.rule.label)
                (g,) = self.apply(g, "*L", c, nid)
                g = self.id_msg(g, "*R", None, self.fresh(self._parent(g)), nid)
                return [(prem[0], g)]
            case "muL":
                (g,) = self.apply(g, "muL", x, nid)
                (g,) = self.apply(g, "*L", x.succ(), nid)
                g = self.id_msg(g, "-oL", c, self.fresh(self._parent(g)), nid)
                return [(prem[0], g)]
            case "nuR":
                (g,) = self.apply(g, "nuR", None, nid)
                (g,) = self.apply(g, "-oR", None, nid)
                g = self.id_msg(g, "-oL", c, self.fresh(self._parent(g)), nid)
                return [(prem[0], g)]
            case "+L":
                (g,) = self.apply(g, "muL", x, nid)
                x = x.succ()
                out = []
                labels = self.b.nodes[g].seq.lookup(x).labels
                for p, k, h in zip(prem, labels, self.apply(g, "+L", x, nid)):
                    (h,) = self.apply(h, "&L", c, nid, label=k)
                    (h,) = self.apply(h, "*L", x, nid)
                    h = self.id_msg(h, "-oL", c, self.fresh(self._parent(h)), nid)
                    out.append((p, h))
                return out
            case "&R":
                (g,) = self.apply(g, "muR", None, nid)
                out = []
                labels = self.b.nodes[g].seq.succ[1].labels
                for p, k, h in zip(prem, labels, self.apply(g, "&R", None, nid)):
                    (h,) = self.apply(h, "-oR", None, nid)
                    w = self.fresh(self._parent(h))
                    (h,) = self.apply(h, "&L", c, nid, label=k)
                    h = self.id_msg(h, "-oL", c, w, nid)
                    out.append((p, h))
                return out
        raise DerivationError(f"no block for typing rule {kind}")

    def _parent(self, gid) -> str:
        return self.parent[gid]


def build_star_derivation(prog: Program, main: str, td: TypingDerivation | None = None,
                          enc: EncodedSignature | None = None, check: bool = True) -> StarDerivation:
    """The circular derivation of strong progress for `main`, one block per typing rule."""
    enc = enc or encode_signature(prog)
    td = td or typecheck(prog, [main])[main]
    d, left, right = root_endpoints(prog, main)
    st = _Star(enc, td)
    b = st.b
    cfg = Pred(f"Call_{main}", _args(left, right))
    yv = PositionVar(right.chan, 0)
    goal = (yv, type_pred(enc.types, d.right[1], right))
    if left is None:
        root = b.root_seq(_seq((), (yv, Lolli(cfg, goal[1]))), id="main")
        (star,) = b.apply(root, "-oR", fresh=PositionVar("c", 0), ids=[main])
    else:
        xv = PositionVar(left.chan, 0)
        star = b.root_seq(_seq(((xv, type_pred(enc.types, d.left[1], left)), (PositionVar("c", 0), cfg)), goal), id=main)
    st.build(star)
    out = b.done(check=False)
    sd = StarDerivation(out.sig, out.nodes, out.root, pairs=st.pairs)
    if check:
        errs = check_local(sd)
        if errs:
            raise DerivationError("; ".join(map(str, errs[:5])))
    return sd


def _seq(ante, succ):
    from .derivation import Sequent
    return Sequent(tuple(ante), succ)


def empty_star(sig_types: TypeNames, base: Signature, typ, chan: str = "x") -> CircularDerivation:
    """The block for the empty configuration: unfold Cfg to 1, drop it, and close with Id."""
    ep = Endpoint(chan, gen_var(chan))
    emp = Pred("Cfg_empty", ep.args + ep.args)
    base = base.extend(defs=[PredDef("Cfg_empty", ("x", "a", "y", "b"), One(), base.max_priority, "mu")])
    b = Builder(base, Fresh("w", avoid={chan, "c"}))
    p = type_pred(sig_types, typ, ep)
    root = b.root_seq(_seq(((PositionVar(chan, 0), p), (PositionVar("c", 0), emp)), (PositionVar(f"{chan}'", 0), p)),
                      id="empty")
    (g,) = b.apply(root, "muL", PositionVar("c", 0))
    (g,) = b.apply(g, "1L", PositionVar("c", 1))
    b.apply(g, "Id")
    return b.done()


# ---------------------------------------------------------------------------
# lockstep


@dataclass(frozen=True)
class Divergence:
    typing_node: str
    star_node: str
    left: PositionVar
    right: PositionVar
    priority: int
    typing: Order
    star: Order

    def describe(self) -> str:
        return (f"at {self.typing_node} / {self.star_node}: {self.left}_{self.priority} vs {self.right}_{self.priority}"
                f" is {self.typing.name} in the typing and {self.star.name} in the star derivation")


@dataclass(frozen=True)
class BisimReport:
    pairs: int
    divergence: Divergence | None = None

    @property
    def agree(self) -> bool:
        return self.divergence is None

    def describe(self) -> str:
        if self.agree:
            return f"agreement over {self.pairs} pairs"
        return "divergence " + self.divergence.describe()


def _le(o: Order) -> bool:
    return o in (Order.LESS, Order.EQUAL)


def lockstep_bisim(typing: TypingDerivation, star: StarDerivation) -> BisimReport:
    """Walk typing steps and star block steps together, comparing channel orders at priorities <= n."""
    n = typing.n
    count = 0
    for nid in typing.order():
        if nid not in star.pairs:
            return BisimReport(count, Divergence(nid, "?", None, None, 0, Order.EQUAL, Order.INCOMPARABLE))
        gid = star.pairs[nid]
        count += 1
        t_om, s_om = typing.omega(nid), star.omega(gid)
        chans = {e.new for e in t_om} | {e.old for e in t_om} | {pv for x in typing.path(nid)
                                                                 for pv in typing.nodes[x].seq.posvars()}
        here = typing.nodes[nid].seq.posvars()
        tc, sc = OmegaClosure(t_om, n), OmegaClosure(s_om, star.n)
        for p in sorted(here):
            for q in sorted(chans):
                if p == q:
                    continue
                for i in range(1, n + 1):
                    for a, b in ((p, q), (q, p)):
                        t, s = tc.relation(a, b, i), sc.relation(a, b, i)
                        if _le(t) != _le(s):
                            return BisimReport(count, Divergence(nid, gid, a, b, i, t, s))
    return BisimReport(count)


def inject_fault(star: StarDerivation) -> tuple:
    """Drop one strict entry at a session-type priority; returns (corrupted copy, star node id)."""
    n = star.n - 2
    for gid in star.order():
        node = star.nodes[gid]
        hits = sorted(e for e in node.delta if e.rel == LT and e.prio <= n)
        if hits:
            nodes = dict(star.nodes)
            nodes[gid] = replace(node, delta=node.delta - {hits[0]})
            return StarDerivation(star.sig, nodes, star.root, pairs=star.pairs), gid
    return None, None


# ---------------------------------------------------------------------------
# certificates


@dataclass
class Certificate:
    main: str
    guard: object
    star_derivation: StarDerivation | None = None
    validity: object = None
    lockstep: BisimReport | None = None
    runtime_outcome: object = None
    normalize: object = None
    stage_errors: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return bool(self.guard) and bool(self.validity) and self.lockstep is not None and self.lockstep.agree

    def summary(self) -> dict:
        return {
            "main": self.main,
            "guard": self.guard.describe() if self.guard is not None else None,
            "validity": self.validity.describe() if self.validity is not None else None,
            "lockstep": self.lockstep.describe() if self.lockstep else None,
            "runtime": str(self.runtime_outcome) if self.runtime_outcome is not None else None,
            "normalize": self.normalize,
            "errors": self.stage_errors,
            "certified": self.ok,
        }


def certify(prog: Program, main: str, run_budget: int | None = None, normalize_depth: int | None = None,
            seed: int | None = None) -> Certificate:
    """typecheck, guard, star derivation, validity, lockstep, then optional normalization and run."""
    td = typecheck(prog, [main])[main]
    guard = guard_verdict(td)
    cert = Certificate(main, guard)
    try:
        star = build_star_derivation(prog, main, td)
    except DerivationError as e:
        cert.stage_errors["star"] = str(e)
        return cert
    cert.star_derivation = star
    cert.validity = check_validity(star, local=False)
    cert.lockstep = lockstep_bisim(td, star)
    if normalize_depth is not None:
        from .cutelim import FuelExhausted, eliminate_cuts
        try:
            r = eliminate_cuts(star, normalize_depth)
            cert.normalize = {"depth": normalize_depth, "treat_events": r.treat_events,
                              "cut_free": r.derivation.is_cut_free()}
        except (FuelExhausted, DerivationError) as e:
            cert.stage_errors["normalize"] = str(e)
    if run_budget is not None and prog.lookup(main).left is None:
        from .runtime import run_program
        cert.runtime_outcome = run_program(prog, main, run_budget, seed).outcome
    return cert
