"""Annotated sequents, the annotated rule set, and circular derivations."""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field, replace
from typing import NamedTuple

from .syntax import (
    Con, Equal, Exists, Forall, Formula, Lolli, NO_UNIFIER, One, Parser, Plus, Pred, Signature,
    SignatureError, Subst, Tensor, Var, With, _parse_signature_prefix, alpha_eq, apply_subst,
    canonical, free_vars, from_json, mgu, show, show_signature, term_vars, to_json,
    unfold_predicate,
)

LT, EQ = "<", "="

L_RULES = {"1L", "*L", "-oL", "+L", "&L", "EL", "AL", "muL", "nuL", "=L"}
R_RULES = {"1R", "*R", "-oR", "+R", "&R", "ER", "AR", "muR", "nuR", "=R"}
FRESH_RULES = {"Cut", "*R", "*L", "-oR", "-oL"}
SPLIT_RULES = {"Cut", "*R", "-oL"}
ALL_RULES = L_RULES | R_RULES | {"Id", "Cut", "Subst", "Back", "Open"}


@dataclass(frozen=True, order=True)
class PositionVar:
    name: str
    gen: int = 0

    def __str__(self) -> str:
        return f"{self.name}^{self.gen}"

    def succ(self) -> "PositionVar":
        return PositionVar(self.name, self.gen + 1)


class Entry(NamedTuple):
    """`new rel old` at priority `prio`."""
    new: PositionVar
    rel: str
    old: PositionVar
    prio: int

    def __str__(self) -> str:
        return f"{self.new}_{self.prio} {self.rel} {self.old}_{self.prio}"


def _fkey(f: Formula) -> str:
    return repr(canonical(f))


@dataclass(frozen=True)
class Sequent:
    ante: tuple  # ((PositionVar, Formula), ...)
    succ: tuple  # (PositionVar, Formula)

    def posvars(self) -> set:
        return {pv for pv, _ in self.ante} | {self.succ[0]}

    def lookup(self, pv: PositionVar) -> Formula:
        for v, f in self.ante:
            if v == pv:
                return f
        raise KeyError(pv)

    def without(self, *pvs) -> tuple:
        return tuple((v, f) for v, f in self.ante if v not in pvs)

    def replace(self, pv, *items) -> tuple:
        out = []
        for v, f in self.ante:
            out.extend(items) if v == pv else out.append((v, f))
        return tuple(out)

    def subst(self, theta, rules=()) -> "Sequent":
        return Sequent(tuple((v, apply_subst(theta, f, rules)) for v, f in self.ante),
                       (self.succ[0], apply_subst(theta, self.succ[1], rules)))

    def free_vars(self) -> set:
        out = set(free_vars(self.succ[1]))
        for _, f in self.ante:
            out |= free_vars(f)
        return out

    def rename(self, fn) -> "Sequent":
        return Sequent(tuple((fn(v), f) for v, f in self.ante), (fn(self.succ[0]), self.succ[1]))

    def erase(self) -> tuple:
        return tuple(f for _, f in self.ante), self.succ[1]

    def key(self) -> tuple:
        return tuple(sorted((v, _fkey(f)) for v, f in self.ante)), (self.succ[0], _fkey(self.succ[1]))

    def same(self, other: "Sequent") -> bool:
        return self.key() == other.key()

    def show(self, unicode: bool = False) -> str:
        ante = ", ".join(f"{v}:{show(f, unicode)}" for v, f in self.ante)
        turn = "⊢" if unicode else "|-"
        return f"{ante} {turn} {self.succ[0]}:{show(self.succ[1], unicode)}"

    __str__ = show


@dataclass(frozen=True)
class AnnotatedSequent:
    sequent: Sequent
    omega: frozenset


@dataclass(frozen=True)
class Rule:
    kind: str
    principal: PositionVar | None = None
    fresh: PositionVar | None = None
    label: str | None = None
    term: object = None
    eigen: str | None = None
    subst: object = None
    formula: Formula | None = None
    split: tuple | None = None  # antecedents of the first premise (Cut, *R, -oL)

    def show(self) -> str:
        bits = []
        if self.principal is not None and self.kind in L_RULES:
            bits.append(str(self.principal))
        if self.fresh is not None:
            bits.append(f"fresh {self.fresh}")
        if self.label is not None:
            bits.append(self.label)
        if self.term is not None:
            bits.append(f"t={self.term}")
        if self.eigen is not None:
            bits.append(f"x={self.eigen}")
        return f"{self.kind}({', '.join(bits)})" if bits else self.kind


class Backedge(NamedTuple):
    target: str
    theta: Subst
    rho: tuple  # ((bud posvar, target posvar), ...)

    @property
    def rho_map(self) -> dict:
        return dict(self.rho)


@dataclass
class Node:
    id: str
    seq: Sequent
    rule: Rule | None = None
    premises: tuple = ()
    delta: frozenset = frozenset()
    back: Backedge | None = None
    origin: str | None = None  # graph node this was instantiated from, if any


class RuleViolation(NamedTuple):
    node: str
    message: str

    def __str__(self) -> str:
        return f"{self.node}: {self.message}"


class DerivationError(ValueError):
    pass


@dataclass
class CircularDerivation:
    sig: Signature
    nodes: dict
    root: str
    _parent: dict | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.sig.max_priority

    def __getitem__(self, nid: str) -> Node:
        return self.nodes[nid]

    def parent(self, nid: str) -> str | None:
        if self._parent is None:
            self._parent = {}
            for node in self.nodes.values():
                for p in node.premises:
                    self._parent[p] = node.id
        return self._parent.get(nid)

    def path(self, nid: str) -> list:
        out = [nid]
        while (p := self.parent(out[-1])) is not None:
            out.append(p)
        return out[::-1]

    def omega(self, nid: str) -> frozenset:
        out = set()
        for x in self.path(nid):
            out |= self.nodes[x].delta
        return frozenset(out)

    def annotated(self, nid: str) -> AnnotatedSequent:
        return AnnotatedSequent(self.nodes[nid].seq, self.omega(nid))

    def backedges(self) -> list:
        return [(n.id, n.back.target, n.back.theta) for n in self.nodes.values() if n.back is not None]

    def order(self) -> list:
        """Node ids in breadth-first order from the root."""
        out, q = [], deque([self.root])
        seen = set()
        while q:
            x = q.popleft()
            if x in seen:
                continue
            seen.add(x)
            out.append(x)
            q.extend(self.nodes[x].premises)
        return out

    def is_cut_free(self) -> bool:
        return all(n.rule is None or n.rule.kind != "Cut" for n in self.nodes.values())

    def height(self) -> int:
        def h(x):
            node = self.nodes[x]
            kids = [h(p) for p in node.premises]
            layer = 0 if node.rule is None or node.rule.kind in ("Open", "Back", "Subst") else 1
            return layer + max(kids, default=0)
        return h(self.root)


# ---------------------------------------------------------------------------
# rule engine


def all_prios(n: int):
    return range(1, n + 1)


def fixpoint_delta(kind: str, new: PositionVar, old: PositionVar, j: int, n: int) -> frozenset:
    out = {Entry(new, EQ, old, i) for i in all_prios(n) if i != j}
    if kind in ("muL", "nuR"):
        out.add(Entry(new, LT, old, j))
    return frozenset(out)


def equal_delta(new: PositionVar, old: PositionVar, n: int) -> frozenset:
    return frozenset(Entry(new, EQ, old, i) for i in all_prios(n))


def expand(sig: Signature, seq: Sequent, rule: Rule) -> list:
    """Premises (sequent, omega delta) of `rule` applied to `seq`.

    Fresh position variables and eigenvariables must already be chosen in `rule`.
    """
    k = rule.kind
    n = sig.max_priority
    z, goal = seq.succ
    none = frozenset()
    if k in L_RULES:
        y = rule.principal
        a = seq.lookup(y)
    if k in ("Id", "1R", "=R", "Back", "Open"):
        return []
    if k == "Cut":
        w = rule.fresh
        left = tuple(x for x in seq.ante if x[0] in rule.split)
        right = tuple(x for x in seq.ante if x[0] not in rule.split)
        return [(Sequent(left, (w, rule.formula)), none),
                (Sequent(right + ((w, rule.formula),), seq.succ), none)]
    if k == "1L":
        return [(Sequent(seq.without(y), seq.succ), none)]
    if k == "*R":
        w = rule.fresh
        left = tuple(x for x in seq.ante if x[0] in rule.split)
        right = tuple(x for x in seq.ante if x[0] not in rule.split)
        return [(Sequent(left, (w, goal.left)), equal_delta(w, z, n)),
                (Sequent(right, (z, goal.right)), none)]
    if k == "*L":
        w = rule.fresh
        return [(Sequent(seq.replace(y, (w, a.left), (y, a.right)), seq.succ), equal_delta(w, y, n))]
    if k == "-oR":
        return [(Sequent(seq.ante + ((rule.fresh, goal.left),), (z, goal.right)), none)]
    if k == "-oL":
        w = rule.fresh
        rest = seq.without(y)
        left = tuple(x for x in rest if x[0] in rule.split)
        right = tuple(x for x in rest if x[0] not in rule.split)
        return [(Sequent(left, (w, a.left)), none), (Sequent(right + ((y, a.right),), seq.succ), none)]
    if k == "+R":
        return [(Sequent(seq.ante, (z, goal.branch(rule.label))), none)]
    if k == "&R":
        return [(Sequent(seq.ante, (z, f)), none) for _, f in goal.branches]
    if k == "+L":
        return [(Sequent(seq.replace(y, (y, f)), seq.succ), none) for _, f in a.branches]
    if k == "&L":
        return [(Sequent(seq.replace(y, (y, a.branch(rule.label))), seq.succ), none)]
    if k == "ER":
        body = apply_subst(Subst({goal.var: rule.term}), goal.body, sig)
        return [(Sequent(seq.ante, (z, body)), none)]
    if k == "AR":
        body = apply_subst(Subst({goal.var: Var(rule.eigen)}), goal.body, sig)
        return [(Sequent(seq.ante, (z, body)), none)]
    if k == "EL":
        body = apply_subst(Subst({a.var: Var(rule.eigen)}), a.body, sig)
        return [(Sequent(seq.replace(y, (y, body)), seq.succ), none)]
    if k == "AL":
        body = apply_subst(Subst({a.var: rule.term}), a.body, sig)
        return [(Sequent(seq.replace(y, (y, body)), seq.succ), none)]
    if k in ("muR", "nuR"):
        d = sig.lookup(goal.name)
        z1 = z.succ()
        return [(Sequent(seq.ante, (z1, unfold_predicate(sig, goal.name, goal.args))),
                 fixpoint_delta(k, z1, z, d.priority, n))]
    if k in ("muL", "nuL"):
        d = sig.lookup(a.name)
        y1 = y.succ()
        return [(Sequent(seq.replace(y, (y1, unfold_predicate(sig, a.name, a.args))), seq.succ),
                 fixpoint_delta(k, y1, y, d.priority, n))]
    if k == "=L":
        theta = mgu(a.lhs, a.rhs, sig)
        if theta is NO_UNIFIER:
            return []
        return [(Sequent(seq.without(y), seq.succ).subst(theta, sig.rules), none)]
    if k == "Subst":
        raise DerivationError("Subst premises are supplied, not computed")
    raise DerivationError(f"unknown rule {k}")


def premise_count(sig: Signature, seq: Sequent, rule: Rule) -> int:
    return len(expand(sig, seq, rule)) if rule.kind != "Subst" else 1


# ---------------------------------------------------------------------------
# local checking


def _shape_ok(kind: str, f: Formula, sig: Signature) -> str | None:
    want = {
        "1L": One, "1R": One, "*L": Tensor, "*R": Tensor, "-oL": Lolli, "-oR": Lolli,
        "+L": Plus, "+R": Plus, "&L": With, "&R": With, "EL": Exists, "ER": Exists,
        "AL": Forall, "AR": Forall, "=L": Equal, "=R": Equal,
        "muL": Pred, "muR": Pred, "nuL": Pred, "nuR": Pred,
    }[kind]
    if not isinstance(f, want):
        return f"{kind} applied to {show(f)}"
    if kind[:2] in ("mu", "nu"):
        if not sig.is_defined(f.name):
            return f"{kind} on undefined predicate {f.name}"
        if sig.lookup(f.name).polarity != kind[:2]:
            return f"{kind} on {sig.lookup(f.name).polarity} predicate {f.name}"
    return None


def _ms(items) -> list:
    return sorted((v, _fkey(f)) for v, f in items)


def check_local(d: CircularDerivation, allow_open: bool = False) -> list:
    """All local rule violations of `d`; an empty list means the derivation is locally correct."""
    out: list[RuleViolation] = []
    sig = d.sig
    if d.root not in d.nodes:
        return [RuleViolation(d.root, "missing root")]
    seen = set()
    stack = [(d.root, frozenset())]
    while stack:
        nid, context = stack.pop()
        if nid in seen:
            out.append(RuleViolation(nid, "node reached twice; premises must form a tree"))
            continue
        seen.add(nid)
        node = d.nodes[nid]
        seq = node.seq
        context = context | seq.posvars()
        errs = _check_node(d, node, context, allow_open)
        out.extend(RuleViolation(nid, e) for e in errs)
        for p in node.premises:
            if p not in d.nodes:
                out.append(RuleViolation(nid, f"missing premise {p}"))
            else:
                stack.append((p, context))
    for nid in d.nodes:
        if nid not in seen:
            out.append(RuleViolation(nid, "unreachable node"))
    return out


def _check_node(d, node, context, allow_open) -> list:
    sig, seq, rule = d.sig, node.seq, node.rule
    errs = []
    names = [v for v, _ in seq.ante]
    if len(set(names)) != len(names) or seq.succ[0] in names:
        errs.append("position variables of a sequent must be distinct")
    if rule is None:
        return errs + ["open premise slot (no rule)"]
    k = rule.kind
    if k not in ALL_RULES:
        return errs + [f"unknown rule {k}"]
    if k == "Open":
        return errs if allow_open else errs + ["open leaf"]
    prem = [d.nodes[p] for p in node.premises if p in d.nodes]
    if k == "Back":
        return errs + _check_back(d, node)
    if k == "Subst":
        if len(prem) != 1:
            return errs + ["Subst needs exactly one premise"]
        p = prem[0]
        if p.seq.posvars() != seq.posvars() or not p.seq.subst(rule.subst, sig.rules).same(seq):
            errs.append("Subst conclusion is not the premise instantiated by theta")
        if p.delta:
            errs.append("Subst premise must not change omega")
        return errs
    if k in L_RULES:
        if rule.principal not in names:
            return errs + [f"principal {rule.principal} not among antecedents"]
        bad = _shape_ok(k, seq.lookup(rule.principal), sig)
    elif k in R_RULES:
        bad = _shape_ok(k, seq.succ[1], sig)
    else:
        bad = None
    if bad:
        return errs + [bad]
    if k == "Id":
        if len(seq.ante) != 1 or not alpha_eq(seq.ante[0][1], seq.succ[1]):
            errs.append("Id needs exactly x:A |- z:A")
    if k == "1R" and seq.ante:
        errs.append("1R needs an empty context")
    if k == "=R":
        f = seq.succ[1]
        if seq.ante or sig.normalize(f.lhs) != sig.normalize(f.rhs):
            errs.append("=R needs an empty context and s = s")
    if k in FRESH_RULES:
        w = rule.fresh
        if w is None:
            return errs + [f"{k} needs a fresh position variable"]
        if w in context or any(w.name == v.name for v in seq.posvars()):
            errs.append(f"position variable {w} is not fresh")
    if k in ("EL", "AR"):
        x = rule.eigen
        if x is None or x in seq.free_vars():
            errs.append(f"eigenvariable {x} is not fresh")
    if k in ("+R", "&L"):
        f = seq.succ[1] if k == "+R" else seq.lookup(rule.principal)
        if rule.label not in f.labels:
            return errs + [f"label {rule.label} not in {list(f.labels)}"]
    if k in ("ER", "AL") and rule.term is None:
        return errs + [f"{k} needs a witness term"]
    if k in SPLIT_RULES:
        pool = {v for v, _ in seq.ante} - ({rule.principal} if k == "-oL" else set())
        if rule.split is None or not set(rule.split) <= pool:
            return errs + [f"{k} split does not partition the context"]
    if k == "Cut" and rule.formula is None:
        return errs + ["Cut needs a cut formula"]
    if k == "=L":
        f = seq.lookup(rule.principal)
        theta = mgu(f.lhs, f.rhs, sig)
        if rule.subst is not None and theta is not NO_UNIFIER and rule.subst != theta:
            errs.append("mgu mismatch in =L")
    expected = expand(sig, seq, rule)
    if len(expected) != len(prem):
        return errs + [f"{k} expects {len(expected)} premises, found {len(prem)}"]
    for i, ((eseq, edelta), p) in enumerate(zip(expected, prem)):
        if k == "Cut" and i == 0 and not alpha_eq(p.seq.succ[1], rule.formula):
            errs.append("Cut formula mismatch")
        if _ms(eseq.ante) != _ms(p.seq.ante):
            errs.append(f"premise {i} antecedents differ from the {k} schema: "
                        + _diff(eseq, p.seq))
        if eseq.succ[0] != p.seq.succ[0] or not alpha_eq(eseq.succ[1], p.seq.succ[1]):
            errs.append(f"premise {i} succedent differs from the {k} schema: "
                        f"expected {eseq.succ[0]}:{show(eseq.succ[1])}, got {p.seq.succ[0]}:{show(p.seq.succ[1])}")
        if edelta != p.delta:
            missing = edelta - p.delta
            extra = p.delta - edelta
            if any(e.rel == LT for e in missing):
                errs.append("missing strict-decrease entry in omega: " + ", ".join(map(str, sorted(missing))))
            elif missing:
                errs.append("missing omega entries: " + ", ".join(map(str, sorted(missing))))
            if extra:
                errs.append("unexpected omega entries: " + ", ".join(map(str, sorted(extra))))
    return errs


def _diff(a: Sequent, b: Sequent) -> str:
    ka, kb = _ms(a.ante), _ms(b.ante)
    missing = [f"{v}" for v, _ in ka if (v, _) not in kb]
    extra = [f"{v}" for v, _ in kb if (v, _) not in ka]
    return f"missing {missing}, unexpected {extra}"


def backedge_rho(bud: Sequent, target: Sequent, theta: Subst, sig: Signature) -> dict | None:
    """A position-variable bijection showing bud == theta(target), or None."""
    inst = target.subst(theta, sig.rules)
    if len(inst.ante) != len(bud.ante) or not alpha_eq(inst.succ[1], bud.succ[1]):
        return None
    rho = {bud.succ[0]: inst.succ[0]}
    free = list(inst.ante)
    for v, f in bud.ante:
        for i, (tv, tf) in enumerate(free):
            if alpha_eq(f, tf):
                rho[v] = tv
                del free[i]
                break
        else:
            return None
    return rho


def _check_back(d, node) -> list:
    b = node.back
    if node.premises:
        return ["a bud has no premises"]
    if b is None or b.target not in d.nodes:
        return ["backedge target missing"]
    target = d.nodes[b.target]
    if target.rule is None or target.rule.kind in ("Back", "Open"):
        return ["backedge must point at an interior node"]
    rho = b.rho_map
    inst = target.seq.subst(b.theta, d.sig.rules)
    if len(set(rho.values())) != len(rho) or set(rho) != node.seq.posvars() or set(rho.values()) != inst.posvars():
        return ["backedge renaming is not a bijection on position variables"]
    inv = {t: s for s, t in rho.items()}
    if not inst.rename(inv.__getitem__).same(node.seq):
        return [f"bud is not an instance of {b.target} under theta"]
    return []


# ---------------------------------------------------------------------------
# building derivations


class Fresh:
    """Fresh-name supply for position variables and eigenvariables."""

    def __init__(self, prefix: str = "w", avoid=()):
        self.prefix = prefix
        self.avoid = set(avoid)
        self.k = 0

    def pv(self) -> PositionVar:
        while True:
            self.k += 1
            name = f"{self.prefix}{self.k}"
            if name not in self.avoid:
                return PositionVar(name, 0)

    def var(self, base: str) -> str:
        self.k += 1
        return f"{base.rstrip(chr(39))}_{self.k}"


class Builder:
    """Incremental construction of annotated derivations, goal by goal."""

    def __init__(self, sig: Signature, fresh: Fresh | None = None):
        self.sig = sig
        self.nodes: dict[str, Node] = {}
        self.root_id: str | None = None
        self.fresh = fresh or Fresh("w", avoid={"z"})
        self._auto = itertools.count(1)

    def _id(self, want=None) -> str:
        if want is not None:
            if want in self.nodes:
                raise DerivationError(f"duplicate node id {want}")
            return want
        while True:
            nid = f"n{next(self._auto)}"
            if nid not in self.nodes:
                return nid

    def root(self, ante, succ: Formula, id: str | None = None, names=None, succ_name: str = "z") -> str:
        names = names or [f"x{i}" for i in range(len(ante))]
        seq = Sequent(tuple((PositionVar(n, 0), f) for n, f in zip(names, ante)), (PositionVar(succ_name, 0), succ))
        return self.root_seq(seq, id)

    def root_seq(self, seq: Sequent, id: str | None = None) -> str:
        nid = self._id(id)
        self.nodes[nid] = Node(nid, seq)
        self.root_id = nid
        self.fresh.avoid |= {v.name for v in seq.posvars()}
        return nid

    def seq(self, gid: str) -> Sequent:
        return self.nodes[gid].seq

    def find(self, gid: str, pred: str | None = None, formula: Formula | None = None,
             cls=None, index: int = 0) -> PositionVar:
        hits = []
        for v, f in self.nodes[gid].seq.ante:
            if pred is not None and not (isinstance(f, Pred) and f.name == pred):
                continue
            if formula is not None and not alpha_eq(f, formula):
                continue
            if cls is not None and not isinstance(f, cls):
                continue
            hits.append(v)
        if len(hits) <= index:
            raise DerivationError(f"no antecedent matching in {gid}: {self.nodes[gid].seq}")
        return hits[index]

    def apply(self, gid: str, kind: str, principal=None, *, label=None, term=None, eigen=None,
              formula=None, split=None, fresh=None, ids=None) -> list:
        node = self.nodes[gid]
        if node.rule is not None:
            raise DerivationError(f"goal {gid} already closed")
        if kind in L_RULES and principal is None:
            raise DerivationError(f"{kind} needs a principal antecedent")
        if isinstance(principal, str):
            principal = self.find(gid, pred=principal)
        if kind in FRESH_RULES and fresh is None:
            fresh = self.fresh.pv()
        if kind in ("EL", "AR") and eigen is None:
            f = node.seq.lookup(principal) if kind == "EL" else node.seq.succ[1]
            eigen = f.var
            avoid = node.seq.free_vars()
            while eigen in avoid:
                eigen += "'"
        if split is not None:
            split = tuple(split)
        subst = None
        if kind == "=L":
            f = node.seq.lookup(principal)
            subst = mgu(f.lhs, f.rhs, self.sig)
            subst = None if subst is NO_UNIFIER else subst
        rule = Rule(kind, principal if kind in L_RULES else (node.seq.succ[0] if kind in R_RULES else None),
                    fresh if kind in FRESH_RULES else None, label, term, eigen, subst, formula, split)
        premises = expand(self.sig, node.seq, rule)
        ids = list(ids or [])
        out = []
        for i, (pseq, delta) in enumerate(premises):
            pid = self._id(ids[i] if i < len(ids) else None)
            self.nodes[pid] = Node(pid, pseq, delta=delta)
            out.append(pid)
        node.rule = rule
        node.premises = tuple(out)
        return out

    def back(self, gid: str, target: str, theta=None) -> None:
        node = self.nodes[gid]
        theta = Subst(theta or {})
        rho = backedge_rho(node.seq, self.nodes[target].seq, theta, self.sig)
        if rho is None:
            raise DerivationError(f"{gid} is not an instance of {target} under {theta}:\n"
                                  f"  bud    {node.seq}\n  target {self.nodes[target].seq.subst(theta, self.sig.rules)}")
        node.rule = Rule("Back")
        node.back = Backedge(target, theta, tuple(sorted(rho.items())))

    def subst(self, gid: str, premise: Sequent, theta, id=None) -> str:
        node = self.nodes[gid]
        pid = self._id(id)
        self.nodes[pid] = Node(pid, premise)
        node.rule = Rule("Subst", subst=Subst(theta))
        node.premises = (pid,)
        return pid

    def open_goals(self) -> list:
        return [n.id for n in self.nodes.values() if n.rule is None]

    def done(self, check: bool = True) -> CircularDerivation:
        d = CircularDerivation(self.sig, dict(self.nodes), self.root_id)
        if check:
            errs = check_local(d)
            if errs:
                raise DerivationError("; ".join(map(str, errs[:5])))
        return d


# ---------------------------------------------------------------------------
# plain (unannotated) proof scripts


@dataclass
class PlainNode:
    id: str
    ante: tuple
    succ: Formula
    kind: str
    premises: tuple = ()
    target: str | None = None
    theta: Subst | None = None


@dataclass
class PlainDerivation:
    sig: Signature
    nodes: dict
    root: str


_KIND_ALIASES = {
    "id": "Id", "cut": "Cut", "back": "Back", "subst": "Subst",
    "⊗R": "*R", "⊗L": "*L", "⊸R": "-oR", "⊸L": "-oL", "⊕R": "+R", "⊕L": "+L",
    "∃R": "ER", "∃L": "EL", "∀R": "AR", "∀L": "AL", "μR": "muR", "μL": "muL", "νR": "nuR", "νL": "nuL",
}


def parse_script(text: str, sig: Signature | None = None) -> PlainDerivation:
    """Read a proof file: optional signature statements, then `proof` and one node per line."""
    sig, p = _parse_signature_prefix(text, sig)
    if p.tok.kind != "eof":
        p.eat("proof")
    nodes: dict[str, PlainNode] = {}
    order = []
    while p.tok.kind != "eof":
        if p.at(";"):
            p.eat(";")
            continue
        tok = p.tok
        nid = p.ident() if p.tok.kind == "id" else p.eat(p.tok.text).text
        p.eat(":")
        p.eat("[")
        ante = []
        while not p.at("]"):
            ante.append(p.formula())
            if not p.at("]"):
                p.eat(",")
        p.eat("]")
        p.eat("|-")
        succ = p.formula()
        p.eat(";")
        kind = _rule_token(p)
        kind = _KIND_ALIASES.get(kind, kind)
        if kind not in ALL_RULES:
            p.error(f"unknown rule {kind}", tok)
        prem, target, theta = [], None, None
        if p.at("("):
            p.eat("(")
            if kind in ("Back", "Subst"):
                if kind == "Back":
                    target = _node_id(p)
                    if p.at(","):
                        p.eat(",")
                theta = _subst_lit(p) if p.at("{") else Subst()
                if kind == "Subst":
                    p.eat(",")
                    prem.append(_node_id(p))
            else:
                while not p.at(")"):
                    prem.append(_node_id(p))
                    if not p.at(")"):
                        p.eat(",")
            p.eat(")")
        if nid in nodes:
            p.error(f"duplicate node {nid}", tok)
        nodes[nid] = PlainNode(nid, tuple(ante), succ, kind, tuple(prem), target, theta)
        order.append(nid)
    if not order:
        raise SignatureError("proof section has no nodes")
    return PlainDerivation(sig, nodes, order[0])


def _rule_token(p: Parser) -> str:
    parts = []
    while not p.at("(") and p.tok.kind != "eof" and p.tok.line == p.toks[p.i - 1].line:
        parts.append(p.tok.text)
        p.i += 1
    return "".join(parts)


def _node_id(p: Parser) -> str:
    if p.tok.kind in ("id", "num"):
        t = p.tok
        p.i += 1
        return t.text
    p.error(f"expected node id, found {p.tok.text!r}")


def _subst_lit(p: Parser) -> Subst:
    p.eat("{")
    out = {}
    while not p.at("}"):
        v = p.ident()
        p.eat(":=")
        out[v] = p.term()
        if not p.at("}"):
            p.eat(",")
    p.eat("}")
    return Subst(out)


def show_script(d, with_signature: bool = True) -> str:
    """Render a plain or annotated derivation in the proof-script format."""
    plain = erase(d) if isinstance(d, CircularDerivation) else d
    lines = [show_signature(plain.sig).rstrip("\n"), "proof"] if with_signature else []
    order, seen, q = [], set(), deque([plain.root])
    while q:
        x = q.popleft()
        if x in seen:
            continue
        seen.add(x)
        order.append(x)
        q.extend(plain.nodes[x].premises)
    for nid in order:
        n = plain.nodes[nid]
        ante = ", ".join(show(f) for f in n.ante)
        if n.kind == "Back":
            args = f"({n.target}, {_show_theta(n.theta)})"
        elif n.kind == "Subst":
            args = f"({_show_theta(n.theta)}, {n.premises[0]})"
        else:
            args = f"({', '.join(n.premises)})"
        lines.append(f"{nid}: [{ante}] |- {show(n.succ)} ; {n.kind}{args}")
    return "\n".join(lines) + "\n"


def _show_theta(theta) -> str:
    return "{" + ", ".join(f"{k} := {theta[k]}" for k in theta) + "}"


def erase(d: CircularDerivation) -> PlainDerivation:
    nodes = {}
    for n in d.nodes.values():
        kind = n.rule.kind if n.rule else "Open"
        nodes[n.id] = PlainNode(
            n.id, tuple(f for _, f in n.seq.ante), n.seq.succ[1], kind, tuple(n.premises),
            n.back.target if n.back else None,
            n.back.theta if n.back else (n.rule.subst if kind == "Subst" else None))
    return PlainDerivation(d.sig, nodes, d.root)


def _match_term(pat, t, var, env) -> bool:
    if isinstance(pat, Var):
        if pat.name == var:
            if var in env:
                return env[var] == t
            env[var] = t
            return True
        return pat == t
    return (isinstance(t, Con) and t.name == pat.name and len(t.args) == len(pat.args)
            and all(_match_term(a, b, var, env) for a, b in zip(pat.args, t.args)))


def _match_formula(pat, f, var, env, sig) -> bool:
    """First-order match of `pat` against `f`, solving only for `var`."""
    if type(pat) is not type(f):
        return False
    if isinstance(pat, One):
        return True
    if isinstance(pat, (Tensor, Lolli)):
        return _match_formula(pat.left, f.left, var, env, sig) and _match_formula(pat.right, f.right, var, env, sig)
    if isinstance(pat, (Plus, With)):
        return (pat.labels == f.labels
                and all(_match_formula(a, b, var, env, sig) for (_, a), (_, b) in zip(pat.branches, f.branches)))
    if isinstance(pat, (Exists, Forall)):
        if pat.var == var:
            return alpha_eq(pat, f)
        body = f.body if f.var == pat.var else apply_subst({f.var: Var(pat.var)}, f.body)
        return _match_formula(pat.body, body, var, env, sig)
    if isinstance(pat, Equal):
        return _match_term(pat.lhs, f.lhs, var, env) and _match_term(pat.rhs, f.rhs, var, env)
    if isinstance(pat, Pred):
        return (pat.name == f.name and len(pat.args) == len(f.args)
                and all(_match_term(a, b, var, env) for a, b in zip(pat.args, f.args)))
    return False


def _witness(body: Formula, var: str, target: Formula, sig: Signature):
    env: dict = {}
    if _match_formula(body, target, var, env, sig):
        t = env.get(var, Var(var))
        if alpha_eq(apply_subst({var: t}, body, sig), target):
            return t
    # terms may have been normalized after substitution; fall back to a search over subterms
    for t in _subterms(target):
        if alpha_eq(apply_subst({var: t}, body, sig), target):
            return t
    return None


def _subterms(f):
    seen = []

    def term(t):
        if t not in seen:
            seen.append(t)
        if isinstance(t, Con):
            for a in t.args:
                term(a)

    def go(g):
        if isinstance(g, (Tensor, Lolli)):
            go(g.left), go(g.right)
        elif isinstance(g, (Plus, With)):
            for _, h in g.branches:
                go(h)
        elif isinstance(g, (Exists, Forall)):
            go(g.body)
        elif isinstance(g, Equal):
            term(g.lhs), term(g.rhs)
        elif isinstance(g, Pred):
            for a in g.args:
                term(a)

    go(f)
    return seen


def _split_for(pool, wanted) -> tuple | None:
    """Choose antecedents (posvar, formula) from `pool` whose formulas are the multiset `wanted`."""
    free = list(pool)
    chosen = []
    for f in wanted:
        for i, (v, g) in enumerate(free):
            if alpha_eq(f, g):
                chosen.append(v)
                del free[i]
                break
        else:
            return None
    return tuple(chosen)


def _same_plain(seq: Sequent, ante, succ) -> bool:
    return (sorted(_fkey(f) for _, f in seq.ante) == sorted(_fkey(f) for f in ante)
            and alpha_eq(seq.succ[1], succ))


def _candidate_rules(sig, seq: Sequent, pn: PlainNode, prem: list, fresh: Fresh):
    k = pn.kind
    z, goal = seq.succ
    if k in ("Id", "1R", "=R"):
        yield Rule(k)
        return
    if k in FRESH_RULES:
        w = fresh.pv()
    if k in L_RULES:
        tried = set()
        for v, f in seq.ante:
            key = _fkey(f)
            if key in tried:
                continue
            tried.add(key)
            if _shape_ok(k, f, sig):
                continue
            yield from _l_rule(sig, seq, k, v, f, pn, prem, w if k in FRESH_RULES else None)
        return
    if k == "Cut":
        if len(prem) == 2:
            split = _split_for(seq.ante, prem[0].ante)
            if split is not None:
                yield Rule("Cut", fresh=w, formula=prem[0].succ, split=split)
        return
    if k == "*R":
        if len(prem) == 2:
            split = _split_for(seq.ante, prem[0].ante)
            if split is not None:
                yield Rule("*R", z, fresh=w, split=split)
        return
    if k == "-oR":
        yield Rule("-oR", z, fresh=w)
        return
    if k == "+R" and isinstance(goal, Plus) and prem:
        for label, f in goal.branches:
            if alpha_eq(f, prem[0].succ):
                yield Rule("+R", z, label=label)
        return
    if k == "ER" and isinstance(goal, Exists) and prem:
        t = _witness(goal.body, goal.var, prem[0].succ, sig)
        if t is not None:
            yield Rule("ER", z, term=t)
        return
    if k == "AR" and isinstance(goal, Forall) and prem:
        t = _witness(goal.body, goal.var, prem[0].succ, sig)
        if isinstance(t, Var):
            yield Rule("AR", z, eigen=t.name)
        return
    if k in ("&R", "muR", "nuR"):
        yield Rule(k, z)


def _l_rule(sig, seq, k, v, f, pn, prem, w):
    if k in ("1L", "+L", "muL", "nuL"):
        yield Rule(k, v)
    elif k == "*L":
        yield Rule(k, v, fresh=w)
    elif k == "=L":
        theta = mgu(f.lhs, f.rhs, sig)
        yield Rule(k, v, subst=None if theta is NO_UNIFIER else theta)
    elif k == "-oL" and len(prem) == 2:
        split = _split_for(seq.without(v), prem[0].ante)
        if split is not None:
            yield Rule(k, v, fresh=w, split=split)
    elif k == "&L" and prem:
        for label, _ in f.branches:
            yield Rule(k, v, label=label)
    elif k in ("EL", "AL") and prem:
        for g in prem[0].ante:
            t = _witness(f.body, f.var, g, sig)
            if t is None or (k == "EL" and not isinstance(t, Var)):
                continue
            yield Rule(k, v, eigen=t.name) if k == "EL" else Rule(k, v, term=t)


def annotate(plain: PlainDerivation, fresh: Fresh | None = None, root_names=None) -> CircularDerivation:
    """Annotate a plain derivation with position variables, generations and omega."""
    sig = plain.sig
    root = plain.nodes[plain.root]
    names = root_names or [f"x{i}" for i in range(len(root.ante))]
    fresh = fresh or Fresh("w", avoid=set(names) | {"z"})
    nodes: dict[str, Node] = {}
    rootseq = Sequent(tuple((PositionVar(n, 0), f) for n, f in zip(names, root.ante)), (PositionVar("z", 0), root.succ))
    stack = [(plain.root, rootseq, frozenset())]
    backs = []
    while stack:
        nid, seq, delta = stack.pop()
        pn = plain.nodes[nid]
        if not _same_plain(seq, pn.ante, pn.succ):
            raise DerivationError(f"node {nid} does not match the sequent produced by its parent:\n"
                                  f"  script {', '.join(map(show, pn.ante))} |- {show(pn.succ)}\n  derived {seq}")
        node = Node(nid, seq, delta=delta)
        nodes[nid] = node
        if pn.kind == "Back":
            backs.append(nid)
            continue
        if pn.kind == "Open":
            node.rule = Rule("Open")
            continue
        prem = [plain.nodes[p] for p in pn.premises]
        if pn.kind == "Subst":
            pseq = Sequent(tuple(zip([v for v, _ in seq.ante], prem[0].ante)), (seq.succ[0], prem[0].succ))
            node.rule = Rule("Subst", subst=pn.theta)
            node.premises = (prem[0].id,)
            stack.append((prem[0].id, pseq, frozenset()))
            continue
        for rule in _candidate_rules(sig, seq, pn, prem, fresh):
            try:
                out = expand(sig, seq, rule)
            except (KeyError, SignatureError, AttributeError):
                continue
            if len(out) == len(prem) and all(_same_plain(s, p.ante, p.succ) for (s, _), p in zip(out, prem)):
                break
        else:
            raise DerivationError(f"cannot read node {nid} as an instance of {pn.kind}")
        node.rule = rule
        node.premises = tuple(p.id for p in prem)
        for (s, dl), p in zip(out, prem):
            stack.append((p.id, s, dl))
    for nid in backs:
        pn = plain.nodes[nid]
        if pn.target not in nodes:
            raise DerivationError(f"backedge target {pn.target} is not in the derivation")
        rho = backedge_rho(nodes[nid].seq, nodes[pn.target].seq, pn.theta or Subst(), sig)
        if rho is None:
            raise DerivationError(f"bud {nid} is not an instance of {pn.target}")
        nodes[nid].rule = Rule("Back")
        nodes[nid].back = Backedge(pn.target, pn.theta or Subst(), tuple(sorted(rho.items())))
    return CircularDerivation(sig, nodes, plain.root)


def load(text: str, sig: Signature | None = None) -> CircularDerivation:
    return annotate(parse_script(text, sig))


# ---------------------------------------------------------------------------
# JSON


def _pv_json(v: PositionVar):
    return [v.name, v.gen]


def _seq_json(s: Sequent):
    return {"ante": [[_pv_json(v), to_json(f)] for v, f in s.ante], "succ": [_pv_json(s.succ[0]), to_json(s.succ[1])]}


def _seq_from(j) -> Sequent:
    return Sequent(tuple((PositionVar(*v), from_json(f)) for v, f in j["ante"]),
                   (PositionVar(*j["succ"][0]), from_json(j["succ"][1])))


def _entry_json(e: Entry):
    return [_pv_json(e.new), e.rel, _pv_json(e.old), e.prio]


def _theta_json(t):
    return None if t is None else {k: to_json(t[k]) for k in t}


def _theta_from(j):
    return None if j is None else Subst({k: from_json(v) for k, v in j.items()})


def derivation_to_json(d: CircularDerivation, omega: bool = True) -> dict:
    out = {"root": d.root, "signature": to_json(d.sig), "nodes": []}
    for nid in d.order() + [x for x in d.nodes if x not in set(d.order())]:
        n = d.nodes[nid]
        r = n.rule or Rule("Open")
        j = {
            "id": nid, "sequent": _seq_json(n.seq), "premises": list(n.premises),
            "delta": sorted(map(_entry_json, n.delta)),
            "rule": {
                "kind": r.kind,
                "principal": _pv_json(r.principal) if r.principal else None,
                "fresh": _pv_json(r.fresh) if r.fresh else None,
                "label": r.label, "term": to_json(r.term) if r.term is not None else None,
                "eigen": r.eigen, "subst": _theta_json(r.subst),
                "formula": to_json(r.formula) if r.formula is not None else None,
                "split": [_pv_json(v) for v in r.split] if r.split is not None else None,
            },
        }
        if n.back:
            j["back"] = {"target": n.back.target, "theta": _theta_json(n.back.theta),
                         "rho": [[_pv_json(a), _pv_json(b)] for a, b in n.back.rho]}
        if n.origin:
            j["origin"] = n.origin
        if omega:
            j["omega"] = sorted(map(_entry_json, d.omega(nid)))
        out["nodes"].append(j)
    return out


def derivation_from_json(j: dict) -> CircularDerivation:
    sig = from_json(j["signature"])
    nodes = {}
    for n in j["nodes"]:
        r = n["rule"]
        pv = lambda x: PositionVar(*x) if x else None
        rule = Rule(r["kind"], pv(r["principal"]), pv(r["fresh"]), r["label"],
                    from_json(r["term"]) if r["term"] is not None else None, r["eigen"],
                    _theta_from(r["subst"]), from_json(r["formula"]) if r["formula"] is not None else None,
                    tuple(PositionVar(*v) for v in r["split"]) if r["split"] is not None else None)
        back = None
        if "back" in n:
            b = n["back"]
            back = Backedge(b["target"], _theta_from(b["theta"]),
                            tuple((PositionVar(*a), PositionVar(*c)) for a, c in b["rho"]))
        nodes[n["id"]] = Node(n["id"], _seq_from(n["sequent"]), rule, tuple(n["premises"]),
                              frozenset(Entry(PositionVar(*a), rel, PositionVar(*b), p) for a, rel, b, p in n["delta"]),
                              back, n.get("origin"))
    return CircularDerivation(sig, nodes, j["root"])


# ---------------------------------------------------------------------------
# instances and unrolling


@dataclass(frozen=True)
class Proof:
    """A node of the underlying infinite derivation: a graph node under an instantiation.

    `theta` instantiates term variables; `ren` maps position-variable names to
    (new name, generation offset).
    """
    d: CircularDerivation = field(repr=False, compare=False)
    node: str
    theta: Subst = Subst()
    ren: tuple = ()

    def _ren(self) -> dict:
        return dict(self.ren)

    def pv(self, v: PositionVar) -> PositionVar:
        r = self._ren().get(v.name)
        return v if r is None else PositionVar(r[0], v.gen + r[1])

    @property
    def sequent(self) -> Sequent:
        return self.d.nodes[self.node].seq.subst(self.theta, self.d.sig.rules).rename(self.pv)

    def resolve(self) -> "Proof":
        """Follow backedges and Subst nodes until a proper rule is reached."""
        cur = self
        for _ in range(len(self.d.nodes) + 1):
            node = cur.d.nodes[cur.node]
            kind = node.rule.kind if node.rule else "Open"
            if kind == "Back":
                b = node.back
                ren = {}
                for bud_pv, tgt_pv in b.rho:
                    img = cur.pv(bud_pv)
                    ren[tgt_pv.name] = (img.name, img.gen - tgt_pv.gen)
                cur = Proof(cur.d, b.target, b.theta.then(cur.theta, self.d.sig.rules), tuple(sorted(ren.items())))
            elif kind == "Subst":
                cur = Proof(cur.d, node.premises[0], node.rule.subst.then(cur.theta, self.d.sig.rules), cur.ren)
            else:
                return cur
        raise DerivationError("backedge cycle without rules")

    def instantiate(self, theta) -> "Proof":
        return replace(self, theta=self.theta.then(Subst(theta), self.d.sig.rules))

    def renamed(self, cur: str, new: str, shift: int) -> "Proof":
        """Rename the current position-variable name `cur` to `new`, shifting generations."""
        ren = self._ren()
        hits = [g for g, (n, _) in ren.items() if n == cur]
        if not hits:
            hits = [cur]
            ren[cur] = (cur, 0)
        for g in hits:
            ren[g] = (new, ren[g][1] + shift)
        return replace(self, ren=tuple(sorted(ren.items())))

    @property
    def rule(self) -> Rule | None:
        return self.d.nodes[self.node].rule

    def step(self, fresh: Fresh, fresh_pv: PositionVar | None = None) -> tuple:
        """(instantiated rule, premise Proofs, premise deltas); self must be resolved."""
        d, sig = self.d, self.d.sig
        node = d.nodes[self.node]
        r = node.rule
        theta, ren = self.theta, self._ren()
        if r is None or r.kind == "Open":
            return Rule("Open"), [], []
        new_fresh = None
        if r.fresh is not None:
            new_fresh = fresh_pv or fresh.pv()
            ren[r.fresh.name] = (new_fresh.name, new_fresh.gen - r.fresh.gen)
        eigen = None
        if r.eigen is not None:
            eigen = fresh.var(r.eigen)
            theta = Subst({**dict(theta), r.eigen: Var(eigen)})
        ren_t = tuple(sorted(ren.items()))
        rule = Rule(
            r.kind,
            self.pv(r.principal) if r.principal else None,
            new_fresh,
            r.label,
            apply_subst(theta, r.term, sig) if r.term is not None else None,
            eigen,
            None,
            apply_subst(theta, r.formula, sig) if r.formula is not None else None,
            tuple(self.pv(v) for v in r.split) if r.split is not None else None,
        )
        if r.kind == "=L":
            eq = self.sequent.lookup(rule.principal)
            eta = mgu(eq.lhs, eq.rhs, sig)
            if eta is NO_UNIFIER:
                return replace(rule, subst=None), [], []
            rule = replace(rule, subst=eta)
            prem = d.nodes[node.premises[0]]
            lam = Subst({v: apply_subst(eta, apply_subst(theta, Var(v), sig), sig) for v in prem.seq.free_vars()})
            p = Proof(d, prem.id, lam, ren_t)
            return rule, [p], [_ren_delta(prem.delta, p)]
        kids = [Proof(d, p, theta, ren_t) for p in node.premises]
        return rule, kids, [_ren_delta(d.nodes[p].delta, k) for p, k in zip(node.premises, kids)]


def _ren_delta(delta, proof: Proof) -> frozenset:
    return frozenset(Entry(proof.pv(e.new), e.rel, proof.pv(e.old), e.prio) for e in delta)


def unroll(d: CircularDerivation, depth: int) -> CircularDerivation:
    """The first `depth` rule layers of the underlying infinite derivation, as a tree.

    Frontier leaves carry the rule `Open`. Naming is breadth-first, so a
    shallower unrolling is always a prefix of a deeper one.
    """
    used = set()
    for n in d.nodes.values():
        used |= {v.name for v in n.seq.posvars()}
    fresh = Fresh("u", avoid=used)
    nodes: dict[str, Node] = {}
    q = deque([("r", Proof(d, d.root).resolve(), 0, frozenset())])
    while q:
        addr, proof, layer, delta = q.popleft()
        seq = proof.sequent
        node = Node(addr, seq, delta=delta, origin=proof.node)
        nodes[addr] = node
        if layer >= depth:
            node.rule = Rule("Open")
            continue
        rule, kids, deltas = proof.step(fresh)
        node.rule = rule
        node.premises = tuple(f"{addr}.{i}" for i in range(len(kids)))
        for i, (k, dl) in enumerate(zip(kids, deltas)):
            kr = k.resolve()
            q.append((f"{addr}.{i}", kr, layer + 1, dl))
    return CircularDerivation(d.sig, nodes, "r")


def restrict(d: CircularDerivation, depth: int) -> CircularDerivation:
    """Cut a tree derivation down to `depth` rule layers (deeper nodes become Open)."""
    nodes = {}
    q = deque([(d.root, 0)])
    while q:
        nid, layer = q.popleft()
        n = d.nodes[nid]
        if layer >= depth:
            nodes[nid] = replace(n, rule=Rule("Open"), premises=())
            continue
        nodes[nid] = replace(n)
        q.extend((p, layer + 1) for p in n.premises)
    return CircularDerivation(d.sig, nodes, d.root)


def tree_signature(d: CircularDerivation) -> list:
    """Comparable content of a tree derivation (for prefix-stability checks)."""
    out = []
    for nid in d.order():
        n = d.nodes[nid]
        out.append((nid, n.seq.key(), n.rule.show() if n.rule else None, tuple(sorted(n.delta))))
    return out
