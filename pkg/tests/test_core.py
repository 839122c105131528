import pytest
from hypothesis import given, settings, strategies as st

from tmlab.core import (ABORT, COMMIT, OK, Configuration, Execution, History, MalformedExecution,
                        Marker, Primitive, ReplayMismatch, RmwEvent, SnapshotStore, StaleSnapshot,
                        TOpEvent, TRY_COMMIT, TraceParseError, UnknownBaseObject, UnknownPrimitive,
                        apply_primitive, cas, concurrent, contention_predicates, faa, fai,
                        format_history, format_trace, is_step_contention_free, is_trivial,
                        parse_history, parse_primitive, parse_top, parse_trace, parse_value,
                        read, real_time_precedes, t_read, t_write, write)

STATES = range(-4, 5)

prims = st.one_of(
    st.just(read()), st.just(fai()),
    st.builds(write, st.integers(-4, 4)),
    st.builds(cas, st.integers(-4, 4), st.integers(-4, 4)),
    st.builds(faa, st.integers(-4, 4)),
)


def inv(k, op):
    return TOpEvent(0, k, "inv", op)


def res(k, op, v):
    return TOpEvent(0, k, "res", op, v)


def rmw(k, base, prim, resp):
    return RmwEvent(0, k, base, prim, resp)


def test_markers_are_not_values():
    assert ABORT != 0 and COMMIT != 1
    assert isinstance(OK, Marker)
    assert parse_value("A") is ABORT and parse_value("C") is COMMIT and parse_value("ok") is OK
    assert parse_value("-7") == -7


@pytest.mark.parametrize("prim,state,new,resp", [
    (read(), 5, 5, 5),
    (write(3), 5, 3, OK),
    (cas(5, 9), 5, 9, 1),
    (cas(4, 9), 5, 5, 0),
    (fai(), 5, 6, 5),
    (faa(-2), 5, 3, 5),
])
def test_primitive_semantics(prim, state, new, resp):
    assert prim.update(state) == new
    assert prim.respond(state) == resp


def test_triviality_and_awar_examples():
    assert read().trivial and not read().awar
    assert cas(1, 1).trivial and faa(0).trivial
    assert not write(1).trivial and not write(1).reads and not write(1).awar
    assert cas(0, 1).awar and fai().awar and faa(3).awar


@given(prims)
def test_is_trivial_agrees_with_state_sweep(p):
    assert is_trivial(p) == all(p.update(s) == s for s in STATES)


@given(prims)
def test_primitive_text_round_trip(p):
    assert parse_primitive(str(p)) == p


def test_unknown_primitive():
    with pytest.raises(UnknownPrimitive):
        Primitive("swap", (1,))
    with pytest.raises(UnknownPrimitive):
        parse_primitive("cas(1)")


def test_apply_primitive():
    c = Configuration({"b": 0})
    c2, ev = apply_primitive(c, "b", cas(0, 1), "T1")
    assert c2.memory["b"] == 1 and ev.response == 1 and c.memory["b"] == 0
    with pytest.raises(UnknownBaseObject):
        apply_primitive(c, "nope", read(), "T1")
    with pytest.raises(UnknownPrimitive):
        apply_primitive(c, "b", "read", "T1")


def test_well_formed_rejects_overlapping_ops():
    with pytest.raises(MalformedExecution, match="event 1"):
        History([inv("T1", t_read("X")), inv("T1", t_read("Y"))])


def test_well_formed_rejects_rmw_outside_op_and_events_after_commit():
    with pytest.raises(MalformedExecution):
        Execution([rmw("T1", "b", read(), 0)], {"b": 0})
    with pytest.raises(MalformedExecution):
        History([inv("T1", TRY_COMMIT), res("T1", TRY_COMMIT, COMMIT), inv("T1", t_read("X"))])


def test_replay_mismatch_and_unknown_base():
    ev = [inv("T1", t_read("X")), rmw("T1", "b", read(), 3)]
    with pytest.raises(ReplayMismatch):
        Execution(ev, {"b": 0})
    with pytest.raises(UnknownBaseObject):
        Execution(ev, {})
    assert len(Execution(ev, {"b": 3})) == 2


def test_records_and_dsets():
    H = History([inv("T1", t_read("X")), res("T1", t_read("X"), 0),
                 inv("T1", t_write("Y", 1)), res("T1", t_write("Y", 1), OK),
                 inv("T2", t_read("Z"))])
    r1, r2 = H.record("T1"), H.record("T2")
    assert r1.rset == {"X"} and r1.wset == {"Y"} and r1.updating and r1.complete
    assert not r1.t_complete
    assert r2.status == "live" and r2.dset == {"Z"} and r2.read_only
    assert r2.current_dset() == {"Z"}


def test_real_time_order():
    H = History([inv("T1", TRY_COMMIT), res("T1", TRY_COMMIT, COMMIT),
                 inv("T2", TRY_COMMIT), inv("T3", TRY_COMMIT), res("T2", TRY_COMMIT, COMMIT)])
    assert real_time_precedes(H, "T1", "T2") and real_time_precedes(H, "T1", "T3")
    assert not real_time_precedes(H, "T2", "T1")
    assert concurrent(H, "T2", "T3")


@settings(max_examples=50)
@given(st.lists(st.sampled_from(["T1", "T2", "T3"]), min_size=1, max_size=12))
def test_real_time_order_is_strict_partial_order(order):
    evs = []
    for k in order:
        evs += [inv(k, t_read("X")), res(k, t_read("X"), 0)]
    H0 = History(evs)
    for k in H0.txns:
        evs += [inv(k, TRY_COMMIT), res(k, TRY_COMMIT, COMMIT)]
    H = History(evs)
    ks = H.txns
    for a in ks:
        assert not real_time_precedes(H, a, a)
        for b in ks:
            if real_time_precedes(H, a, b):
                assert not real_time_precedes(H, b, a)
                for c in ks:
                    if real_time_precedes(H, b, c):
                        assert real_time_precedes(H, a, c)


def test_projection_partition():
    H = parse_history(open_fixture("stale_reader.history"))
    parts = [e for k in H.txns for e in H.project(k)]
    assert sorted(parts, key=lambda e: e.seq) == list(H.events)


def test_step_contention_free():
    H = History([inv("T1", t_read("X")), res("T1", t_read("X"), 0), inv("T2", t_read("X")),
                 res("T2", t_read("X"), 0), inv("T1", TRY_COMMIT), res("T1", TRY_COMMIT, COMMIT)])
    assert not is_step_contention_free(H, "T1")
    assert is_step_contention_free(H, "T1", op=0)
    assert is_step_contention_free(H, "T2")
    assert not is_step_contention_free(H)


def test_contention_predicates():
    empty = contention_predicates(History())
    assert empty.is_t_complete and empty.is_t_sequential and empty.is_sequential
    H = History([inv("T1", t_read("X")), inv("T2", t_read("X"))])
    flags = contention_predicates(H)
    assert not flags.is_complete and not flags.is_sequential and not flags.is_t_sequential


def test_snapshot_store_round_trip():
    store = SnapshotStore()
    c = Configuration({"a": 1, "b": 2}, {"T1": {"status": "live"}})
    tok = store.snapshot(c)
    c.memory["a"] = 99
    assert store.restore(tok) == Configuration({"a": 1, "b": 2}, {"T1": {"status": "live"}})
    store.discard(tok)
    with pytest.raises(StaleSnapshot):
        store.restore(tok)


def test_configuration_quiescence():
    c = Configuration({}, {"T1": {"status": "committed"}, "T2": {"status": "complete"}})
    assert c.is_quiescent() and not c.is_t_quiescent()


def test_trace_round_trip():
    ev = [inv("T1", t_write("X", 2)), rmw("T1", "b", cas(0, 2), 1), rmw("T1", "c", write(4), OK),
          res("T1", t_write("X", 2), OK)]
    E = Execution(ev, {"b": 0, "c": 0}, {"X": 0})
    E2 = parse_trace(format_trace(E))
    assert E2 == E and E2.t_initial == {"X": 0}


def test_history_round_trip_fixture():
    text = open_fixture("writer_first.history")
    assert format_history(parse_history(text)) == text


def test_parse_errors_carry_line_numbers():
    with pytest.raises(TraceParseError) as exc:
        parse_history("TINIT X 0\nINV T1 read(X)\nRES T1 read(X) -> zz\n")
    assert exc.value.line == 3
    with pytest.raises(TraceParseError) as exc:
        parse_history("INV T1 read(X)\nINV T1 read(X)\n")
    assert exc.value.line == 2
    with pytest.raises(TraceParseError) as exc:
        parse_trace("INIT b 0\nINV T1 read(X)\nRMW T1 b read() -> 5\n")
    assert exc.value.line == 3
    with pytest.raises(TraceParseError):
        parse_history("INIT b 0\nINV T1 read(X)\nRMW T1 b read() -> 0\n")


def test_top_text_round_trip():
    for op in (t_read("X1"), t_write("X2", -3), TRY_COMMIT):
        assert parse_top(str(op)) == op


def open_fixture(name):
    from pathlib import Path
    return (Path(__file__).parent / "fixtures" / name).read_text()
