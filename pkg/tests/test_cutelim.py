import pytest

from fimall.cutelim import FuelExhausted, TapeError, check_tape, eliminate_cuts, tape_conclusion
from fimall.derivation import Sequent, PositionVar, check_local, restrict, tree_signature
from fimall.fixtures import cut_corpus, load_fixture, nat_double, unit_cut
from fimall.validity import check_validity
from fimall.syntax import Pred, parse_signature

SIG = parse_signature("atom A/0, B/0, C/0, D/0")


def seq(ante, succ):
    return Sequent(tuple((PositionVar(n), Pred(f)) for n, f in ante), (PositionVar(succ[0]), Pred(succ[1])))


@pytest.fixture(scope="module")
def corpus():
    return cut_corpus()


def test_unit_cut_events_golden():
    r = eliminate_cuts(unit_cut(), 3)
    got = [(e.kind, e.address, e.detail) for e in r.events]
    assert got == [
        ("RFlip", "r", "*R"),
        ("Merge", "r.0", ""),
        ("PRd", "r.0", "1"),
        ("RFlip", "r.0", "1R"),
        ("IdOut", "r.1", ""),
    ]
    out = r.derivation
    assert out.is_cut_free() and out.height() == 2
    assert not check_local(out, allow_open=True)


def test_cut_free_input_is_untouched():
    d = nat_double()
    r = eliminate_cuts(d, 5)
    assert r.treat_events == 0
    from fimall.derivation import unroll
    assert tree_signature(r.derivation) == tree_signature(unroll(d, 5))


def test_tape_conclusion_chain():
    # three sequents in a chain: only the unconnected antecedents survive
    tape = [seq([("a", "A")], ("x", "B")), seq([("x", "B"), ("b", "C")], ("y", "C")),
            seq([("y", "C"), ("c", "D")], ("z", "D"))]
    check_tape(tape)
    conc = tape_conclusion(tape)
    assert [v.name for v, _ in conc.ante] == ["a", "b", "c"]
    assert conc.succ[0].name == "z"


def test_tape_rejects_two_outputs():
    with pytest.raises(TapeError):
        tape_conclusion([seq([("a", "A")], ("x", "B")), seq([("b", "A")], ("y", "B"))])


def test_tape_rejects_disconnected_or_reused_names():
    with pytest.raises(TapeError):
        check_tape([seq([("a", "A")], ("x", "B")), seq([("x", "B"), ("x", "B")], ("y", "C"))])


def test_fuel_exhaustion_reports_address():
    with pytest.raises(FuelExhausted) as err:
        eliminate_cuts(load_fixture("nat_succ_cut.fim"), 8, fuel=1)
    assert err.value.address


def test_corpus_size_and_validity(corpus):
    assert len(corpus) >= 20
    assert {"hanoi", "unit_cut", "nat_succ_cut", "stream_cut", "stream_double_cut"} <= set(corpus)
    for d in corpus.values():
        assert not check_local(d)
        assert check_validity(d)


@pytest.mark.parametrize("depth", range(1, 9))
def test_corpus_cut_free_and_locally_correct(corpus, depth):
    for name, d in corpus.items():
        r = eliminate_cuts(d, depth, debug=True)
        assert r.derivation.is_cut_free(), name
        assert not check_local(r.derivation, allow_open=True), name
        assert r.treat_events <= 100_000


def test_corpus_prefix_stable(corpus):
    for name, d in corpus.items():
        prev = None
        for depth in range(1, 9):
            out = eliminate_cuts(d, depth).derivation
            if prev is not None:
                assert tree_signature(restrict(out, depth - 1)) == tree_signature(prev), (name, depth)
            prev = out


def test_hanoi_deep_unfolding_is_cut_free():
    r = eliminate_cuts(load_fixture("hanoi.fim"), 16, debug=True)
    assert r.derivation.is_cut_free()
    assert r.treat_events > 0
    assert not check_local(r.derivation, allow_open=True)
