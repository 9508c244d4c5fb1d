"""Asynchronous execution of configurations.

Small-step rules, one per clause of the configuration encoding read operationally:

    y <- x              the two channel identities are merged (alias union)
    (z:C) <- {P}; Q     P is placed left of Q on a fresh channel at generation 0
    close R y           deposit y^b.closed, the process ends
    wait L x; Q         consume x^a.closed, continue without a left channel
    case R y (...)      consume a label from the client on y^b, y advances
    L x.k; Q            deposit x^a.k for the provider, x advances
    R y.k; Q            deposit y^b.k for the client, y advances
    case L x (...)      consume a label from the provider on x^a, x advances
    case R y (nu_t =>)  consume y^b.nu_t from the client
    L x.nu_t; Q         deposit x^a.nu_t
    R y.mu_t; Q         deposit y^b.mu_t
    case L x (mu_t =>)  consume x^a.mu_t from the provider
    y <- Y <- x         replaced by the body of Y; unfolding takes no budget

Messages are keyed by (channel, generation), so a receiver at generation a can only consume the
message sent at generation a.  Type 1 closes without advancing the generation.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

from .session import (
    Call, Case, Close, Fwd, Process, Program, Send, Spawn, Wait, check_process, rename, unfolding,
)
from .syntax import One, Plus, Pred, With

PROVIDER, CLIENT = "provider", "client"


@dataclass
class Proc:
    term: Process
    left: str | None
    lgen: int
    ltype: object
    right: str
    rgen: int
    rtype: object
    pid: int = 0


@dataclass(frozen=True)
class Message:
    channel: str
    gen: int
    payload: str
    sender: str  # provider | client
    external: bool = False
    step: int = 0

    def to_json(self) -> dict:
        return {"step": self.step, "channel": self.channel, "gen": self.gen, "payload": self.payload,
                "sender": self.sender, "external": self.external}


@dataclass(frozen=True)
class Outcome:
    kind: str  # Empty | ExternalPoised | Running | BudgetExhausted
    endpoint: str | None = None
    awaiting: str | None = None

    def __str__(self) -> str:
        if self.kind == "ExternalPoised":
            return f"ExternalPoised({self.endpoint}, {self.awaiting})"
        return self.kind


class RuntimeFault(RuntimeError):
    """A configuration that is neither finished, poised, nor able to step (a typing bug)."""


@dataclass
class RunResult:
    outcome: Outcome
    steps: int
    trace: list  # Message, in deposit order
    receives: list  # Message, in receive order

    @property
    def external_sends(self) -> int:
        return sum(m.external for m in self.trace)

    @property
    def external_receives(self) -> int:
        return sum(m.external for m in self.receives)


class Configuration:
    """Running processes in channel order, a mailbox, and the external endpoints."""

    def __init__(self, prog: Program, procs: list, externals: tuple, check: bool = False):
        self.prog = prog
        self.procs = procs
        self.externals = externals  # (left channel or None, right channel)
        self.mailbox: dict = {}
        self.alias: dict = {}  # channel -> (channel, offset)
        self.external = {c for c in externals if c}
        self.check = check
        self._ids = itertools.count(1)
        self._pids = itertools.count(len(procs) + 1)
        self.steps = 0
        self.trace: list = []
        self.receives: list = []
        for p in procs:
            self._settle(p)

    @classmethod
    def start(cls, prog: Program, main: str, check: bool = False) -> "Configuration":
        d = prog.lookup(main)
        left = d.left[0] if d.left else None
        p = Proc(Call(d.right[0], main, left), left, 0, d.left[1] if d.left else None, d.right[0], 0, d.right[1], 1)
        return cls(prog, [p], (left, d.right[0]), check)

    # channels -----------------------------------------------------------
    def resolve(self, chan: str, gen: int) -> tuple:
        while chan in self.alias:
            chan, off = self.alias[chan]
            gen += off
        return chan, gen

    def _fresh(self, base: str) -> str:
        return f"{base}#{next(self._ids)}"

    def deposit(self, chan: str, gen: int, payload: str, sender: str) -> None:
        key = self.resolve(chan, gen)
        if key in self.mailbox:
            raise RuntimeFault(f"two messages on {key[0]}^{key[1]}")
        m = Message(key[0], key[1], payload, sender, key[0] in self.external, self.steps)
        self.mailbox[key] = m
        self.trace.append(m)

    def peek(self, chan: str, gen: int, sender: str) -> Message | None:
        m = self.mailbox.get(self.resolve(chan, gen))
        return m if m is not None and m.sender == sender else None

    def consume(self, chan: str, gen: int) -> Message:
        m = self.mailbox.pop(self.resolve(chan, gen))
        self.receives.append(m)
        return m

    def _merge(self, x: str, a: int, y: str, b: int) -> None:
        """Identify (y, b + k) with (x, a + k) for every k."""
        rx, ga = self.resolve(x, a)
        ry, gb = self.resolve(y, b)
        if rx == ry:
            return
        self.alias[ry] = (rx, ga - gb)
        if ry in self.external:
            self.external.add(rx)
        for (c, g), m in list(self.mailbox.items()):
            if c == ry:
                del self.mailbox[(c, g)]
                self.mailbox[(rx, g + ga - gb)] = m

    # unfolding -----------------------------------------------------------
    def _settle(self, p: Proc) -> bool:
        """Unfold calls; False if the unfolding never reaches an action."""
        for _ in range(len(self.prog.defs) + 1):
            if not isinstance(p.term, Call):
                return True
            d = self.prog.lookup(p.term.name)
            m = {d.right[0]: p.term.y}
            if d.left:
                m[d.left[0]] = p.term.x
            p.term = rename(d.body, m)
        return not isinstance(p.term, Call)

    # stepping ------------------------------------------------------------
    def is_sender(self, p: Proc) -> bool:
        return isinstance(p.term, (Fwd, Spawn, Close, Send, Call))

    def enabled(self, p: Proc) -> bool:
        t = p.term
        if isinstance(t, Wait):
            return self.peek(p.left, p.lgen, PROVIDER) is not None
        if isinstance(t, Case):
            if t.side == "R":
                return self.peek(p.right, p.rgen, CLIENT) is not None
            return self.peek(p.left, p.lgen, PROVIDER) is not None
        return True

    def act(self, p: Proc) -> None:
        """Perform one step of `p` (which must be enabled)."""
        self.steps += 1
        sig = self.prog.sig
        match p.term:
            case Call():
                if not self._settle(p):
                    return  # a silent divergent unfolding burns one step
            case Fwd():
                self._merge(p.left, p.lgen, p.right, p.rgen)
                self.procs.remove(p)
            case Spawn(w, c, q1, q2):
                chan = self._fresh(w)
                new = Proc(rename(q1, {w: chan}), p.left, p.lgen, p.ltype, chan, 0, c, next(self._pids))
                p.term, p.left, p.lgen, p.ltype = rename(q2, {w: chan}), chan, 0, c
                self.procs.insert(self.procs.index(p), new)
                self._settle(new)
            case Close(y):
                self.deposit(y, p.rgen, "closed", PROVIDER)
                self.procs.remove(p)
            case Wait(x, cont):
                self.consume(x, p.lgen)
                p.term, p.left, p.ltype = cont, None, None
            case Send("R", y, k, cont):
                self.deposit(y, p.rgen, k, PROVIDER)
                p.rtype = _advance(sig, p.rtype, k)
                p.term, p.rgen = cont, p.rgen + 1
            case Send("L", x, k, cont):
                self.deposit(x, p.lgen, k, CLIENT)
                p.ltype = _advance(sig, p.ltype, k)
                p.term, p.lgen = cont, p.lgen + 1
            case Case("R", y, branches):
                k = self.consume(y, p.rgen).payload
                p.rtype = _advance(sig, p.rtype, k)
                p.term, p.rgen = dict(branches)[k], p.rgen + 1
            case Case("L", x, branches):
                k = self.consume(x, p.lgen).payload
                p.ltype = _advance(sig, p.ltype, k)
                p.term, p.lgen = dict(branches)[k], p.lgen + 1
        if p in self.procs:
            self._settle(p)
        if self.check:
            self.check_types()

    def check_types(self) -> None:
        """Every running process still typechecks at its current channel types."""
        for p in self.procs:
            left = (p.left, p.ltype) if p.left is not None else None
            check_process(self.prog, p.term, left, (p.right, p.rtype))

    def blocked_externally(self) -> Outcome | None:
        for p in self.procs:
            t = p.term
            if isinstance(t, Wait) and self.resolve(p.left, 0)[0] in self.external:
                return Outcome("ExternalPoised", p.left, "closed")
            if isinstance(t, Case):
                chan = p.right if t.side == "R" else p.left
                if self.resolve(chan, 0)[0] in self.external:
                    return Outcome("ExternalPoised", chan, "|".join(k for k, _ in t.branches))
        return None

    def outcome(self) -> Outcome:
        if not self.procs:
            internal = [m for m in self.mailbox.values() if not m.external]
            if internal:
                raise RuntimeFault(f"undelivered internal messages {internal}")
            return Outcome("Empty")
        poised = self.blocked_externally()
        if poised is None:
            raise RuntimeFault("every process is blocked on an internal channel")
        return poised


def _advance(sig, typ, k: str):
    """The continuation type after message k."""
    u = unfolding(k)
    if u:
        return sig.lookup(u[1]).body
    if isinstance(typ, (Plus, With)):
        return typ.branch(k)
    if isinstance(typ, Pred):
        return _advance(sig, sig.lookup(typ.name).body, k)
    if isinstance(typ, One):
        return None
    raise RuntimeFault(f"message {k} on {typ}")


def round_robin(cfg: Configuration, budget: int):
    """Each tick lets every sender act once, in channel order, then every enabled receiver."""
    while cfg.steps < budget:
        moved = False
        for senders in (True, False):
            for p in list(cfg.procs):
                if cfg.steps >= budget:
                    return
                if p in cfg.procs and cfg.is_sender(p) == senders and cfg.enabled(p):
                    cfg.act(p)
                    moved = True
        if not moved:
            return


def random_policy(seed: int):
    rng = random.Random(seed)

    def policy(cfg: Configuration, budget: int):
        while cfg.steps < budget:
            ready = [p for p in cfg.procs if cfg.enabled(p)]
            if not ready:
                return
            cfg.act(rng.choice(ready))
    return policy


def run(cfg: Configuration, budget: int, policy=None) -> RunResult:
    """Step `cfg` until it is empty, poised on an external channel, or `budget` steps are used."""
    (policy or round_robin)(cfg, budget)
    if any(cfg.enabled(p) for p in cfg.procs):
        outcome = Outcome("BudgetExhausted")
    else:
        outcome = cfg.outcome()
    return RunResult(outcome, cfg.steps, cfg.trace, cfg.receives)


def run_program(prog: Program, main: str, budget: int = 10_000, seed: int | None = None,
                check: bool = False) -> RunResult:
    cfg = Configuration.start(prog, main, check)
    return run(cfg, budget, None if seed is None else random_policy(seed))
