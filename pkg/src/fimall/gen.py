"""Random small signatures and locally correct circular derivations."""

from __future__ import annotations

import random

from .derivation import Builder, CircularDerivation, DerivationError, backedge_rho
from .syntax import One, Plus, PredDef, Signature, Pred, Tensor, With, Subst, validate_signature

NAMES = ("A", "B")


def random_signature(rng: random.Random) -> Signature:
    """Two nullary predicates at priorities 1 and 2 with random polarity and small bodies."""
    defs = []
    for prio, name in enumerate(NAMES, start=1):
        defs.append(PredDef(name, (), _body(rng, 2), prio, rng.choice(["mu", "nu"])))
    sig = Signature(tuple(defs))
    validate_signature(sig)
    return sig


def _body(rng, size):
    if size <= 0 or rng.random() < 0.3:
        return rng.choice([Pred("A"), Pred("B"), One()])
    op = rng.choice(["+", "*", "&", "+"])
    l, r = _body(rng, size - 1), _body(rng, size - 1)
    if op == "*":
        return Tensor(l, r)
    branches = (("l", l), ("r", r))
    return Plus(branches) if op == "+" else With(branches)


def _moves(b: Builder, gid: str):
    seq = b.seq(gid)
    out = []
    ante = seq.ante
    goal = seq.succ[1]
    if len(ante) == 1 and ante[0][1] == goal:
        out.append(("Id", {}))
    if not ante and isinstance(goal, One):
        out.append(("1R", {}))
    for v, f in ante:
        if isinstance(f, Pred):
            out.append((f"{b.sig.lookup(f.name).polarity}L", {"principal": v}))
        elif isinstance(f, One):
            out.append(("1L", {"principal": v}))
        elif isinstance(f, Tensor):
            out.append(("*L", {"principal": v}))
        elif isinstance(f, Plus):
            out.append(("+L", {"principal": v}))
        elif isinstance(f, With):
            out.append(("&L", {"principal": v, "label": "l"}))
            out.append(("&L", {"principal": v, "label": "r"}))
    if isinstance(goal, Pred):
        out.append((f"{b.sig.lookup(goal.name).polarity}R", {}))
    elif isinstance(goal, Plus):
        out += [("+R", {"label": "l"}), ("+R", {"label": "r"})]
    elif isinstance(goal, With):
        out.append(("&R", {}))
    elif isinstance(goal, Tensor):
        vs = [v for v, _ in ante]
        for mask in range(1 << len(vs)):
            out.append(("*R", {"split": [v for i, v in enumerate(vs) if mask >> i & 1]}))
    return out


def random_derivation(rng: random.Random, max_nodes: int = 8, tries: int = 200) -> CircularDerivation | None:
    """A locally correct circular derivation with at most `max_nodes` nodes, or None."""
    for _ in range(tries):
        sig = random_signature(rng)
        d = _attempt(rng, sig, max_nodes)
        if d is not None:
            return d
    return None


def _attempt(rng, sig, max_nodes, ante=None, succ=None, names=None, succ_name="z"):
    b = Builder(sig)
    if ante is None:
        ante = [Pred(rng.choice(NAMES)) for _ in range(rng.choice([1, 1, 2]))]
    if succ is None:
        succ = rng.choice([Pred("A"), Pred("B"), Pred("A"), One()])
    root = b.root(ante, succ, names=names, succ_name=succ_name)
    goals = [root]
    while goals:
        if len(b.nodes) > max_nodes:
            return None
        gid = goals.pop(rng.randrange(len(goals)))
        seq = b.seq(gid)
        closers = [t for t, n in b.nodes.items()
                   if t != gid and n.rule is not None and n.rule.kind != "Back"
                   and backedge_rho(seq, n.seq, Subst(), sig) is not None]
        moves = _moves(b, gid)
        finals = [m for m in moves if m[0] in ("Id", "1R")]
        if finals and rng.random() < 0.8:
            b.apply(gid, finals[0][0])
            continue
        if closers and rng.random() < 0.7:
            b.back(gid, rng.choice(closers))
            continue
        if not moves:
            return None
        kind, kw = rng.choice(moves)
        try:
            goals.extend(b.apply(gid, kind, **kw))
        except DerivationError:
            return None
    if len(b.nodes) > max_nodes or not any(n.back for n in b.nodes.values()):
        return None
    return b.done()


def random_cut_proof(rng: random.Random, max_nodes: int = 8, tries: int = 2000) -> CircularDerivation | None:
    """Two valid random derivations Γ ⊢ C and C ⊢ E over one signature, joined by a cut on C."""
    from .validity import check_validity
    for _ in range(tries):
        sig = random_signature(rng)
        mid = Pred(rng.choice(NAMES))
        d1 = _attempt(rng, sig, max_nodes, succ=mid, succ_name="c")
        if d1 is None or not check_validity(d1):
            continue
        d2 = _attempt(rng, sig, max_nodes, ante=[mid], names=["c"])
        if d2 is None or not check_validity(d2):
            continue
        return cut_compose(d1, d2)
    return None


def cut_compose(d1: CircularDerivation, d2: CircularDerivation) -> CircularDerivation:
    """Cut the succedent c of d1 against the antecedent c of d2 (both named "c")."""
    from dataclasses import replace
    from .derivation import Backedge, Node, Rule, Sequent
    r1, r2 = d1.nodes[d1.root].seq, d2.nodes[d2.root].seq
    cut = r1.succ
    assert cut[0].name == "c" and [v for v, _ in r2.ante] == [cut[0]]
    nodes = {}
    for tag, d in (("a", d1), ("b", d2)):
        for nid, n in d.nodes.items():
            back = n.back and Backedge(f"{tag}.{n.back.target}", n.back.theta, n.back.rho)
            nodes[f"{tag}.{nid}"] = replace(n, id=f"{tag}.{nid}", premises=tuple(f"{tag}.{p}" for p in n.premises),
                                           back=back)
    seq = Sequent(r1.ante, r2.succ)
    rule = Rule("Cut", fresh=cut[0], formula=cut[1], split=tuple(v for v, _ in r1.ante))
    nodes["cut"] = Node("cut", seq, rule, (f"a.{d1.root}", f"b.{d2.root}"))
    return CircularDerivation(d1.sig, nodes, "cut")
