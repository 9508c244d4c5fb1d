import pytest

from fimall.fixtures import load_program
from fimall.runtime import run_program
from fimall.session import Guarded, guard_check

CLOSED = [("closewait.ssn", "CloseWait"), ("closewait.ssn", "Unit"), ("drain.ssn", "DrainTwo"),
          ("drain.ssn", "CopyTwo"), ("drain.ssn", "Two"), ("server.ssn", "Session"), ("server.ssn", "Server")]


def test_close_wait_pair():
    r = run_program(load_program("closewait.ssn"), "CloseWait", budget=10)
    assert r.outcome.kind == "Empty"
    # the handshake itself; the other message closes the configuration's own channel
    assert len([m for m in r.trace if not m.external]) == 1
    assert len(r.receives) == 1


def test_loop_streams_six_sends():
    r = run_program(load_program("loop.ssn"), "Loop", budget=6)
    assert r.outcome.kind == "BudgetExhausted"
    assert len(r.trace) == r.external_sends == 6
    assert [m.payload for m in r.trace] == ["mu_nat", "s"] * 3


def test_pong_alone_waits_for_its_provider():
    r = run_program(load_program("pingpong.ssn"), "Pong", budget=100)
    assert r.outcome.kind == "ExternalPoised"
    assert r.outcome.endpoint == "w" and r.outcome.awaiting == "mu_ack"


@pytest.mark.parametrize("name, main", CLOSED)
def test_guarded_closed_fixtures_finish(name, main):
    prog = load_program(name)
    assert isinstance(guard_check(prog, None)[main], Guarded)
    r = run_program(prog, main, budget=10_000, check=True)
    assert r.outcome.kind in ("Empty", "ExternalPoised")


@pytest.mark.parametrize("name, main", [("loop.ssn", "LoopMain"), ("pingpong.ssn", "PingPong")])
def test_unguarded_runs_forever(name, main):
    r = run_program(load_program(name), main, budget=10_000)
    assert r.outcome.kind == "BudgetExhausted" and r.external_receives == 0


@pytest.mark.parametrize("name, main", CLOSED + [("pingpong.ssn", "PingPong")])
def test_outcome_stable_over_seeds(name, main):
    prog = load_program(name)
    kinds = {run_program(prog, main, budget=10_000, seed=s).outcome.kind for s in range(5)}
    assert len(kinds) == 1


def test_session_trace_order():
    r = run_program(load_program("server.ssn"), "Session", budget=100)
    internal = [m for m in r.trace if not m.external]
    assert {(m.channel, m.gen) for m in internal} == {(m.channel, m.gen) for m in r.receives}
    assert r.trace[-1].external and r.trace[-1].payload == "closed"
