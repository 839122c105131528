import pytest

from tmlab.core import (COMMIT, RmwEvent, StaleSnapshot, TOpEvent, TRY_COMMIT, check_well_formed,
                        contention_predicates, fai, is_step_contention_free, t_read, t_write)
from tmlab.harness import (Fragment, Invoke, NoQualifyingPrefix, Runner, RunSolo, Start, Step,
                           UnexpectedAbort, format_annotations, longest_unobservable_prefix,
                           parse_annotations, phase_value, run_schedule, scenario_intro,
                           scenario_lemma1, scenario_theorem1, scenario_theorem2, scenario_theorem3)
from tmlab.tms import TMS, make_tm

ALL = sorted(TMS)


# -- scheduling primitives


def test_empty_schedule():
    run = run_schedule(make_tm("mv-invisible", ["X"]), [])
    assert len(run.execution) == 0 and run.fragments == []


def test_run_solo_writer_commits():
    run = run_schedule(make_tm("visible-read", ["X"]), [RunSolo("T1", (t_write("X", 1),))])
    H = run.execution.history()
    assert contention_predicates(H).is_t_sequential
    assert H.record("T1").status == "committed"


def test_alternating_steps_interleave_as_commanded():
    sched = [Start("T1"), Start("T2"), Invoke("T1", t_read("X")), Invoke("T2", t_read("Y"))]
    sched += [Step("T1"), Step("T2")] * 2
    run = run_schedule(make_tm("strict-dap-attempt", ["X", "Y"]), sched)
    assert [e.txn for e in run.execution.events] == ["T1", "T2", "T1", "T2", "T1", "T2"]
    assert [type(e) for e in run.execution.events[2:]] == [RmwEvent] * 4


def test_step_to_completion():
    sched = [Start("T1"), Invoke("T1", t_read("X")), Step("T1", None)]
    run = run_schedule(make_tm("visible-read", ["X"]), sched)
    assert run.execution.events[-1].payload == 0


def test_unexpected_abort_names_fragment():
    sched = [Start("R"), Invoke("R", t_read("X")), Step("R", None),
             Fragment("writer", (RunSolo("W", (t_write("X", 1),)),))]
    with pytest.raises(UnexpectedAbort, match="writer"):
        run_schedule(make_tm("visible-read", ["X"]), sched)
    sched[-1] = Fragment("writer", (RunSolo("W", (t_write("X", 1),), may_abort=True),))
    run = run_schedule(make_tm("visible-read", ["X"]), sched)
    assert run.fragment("writer")[1] == len(run.execution)


def test_replay_fidelity():
    sched = [Start("T1"), Invoke("T1", t_write("X", 1)), Step("T1", None),
             Fragment("f", (RunSolo("T2", (t_read("X"), t_write("Y", 2))),)),
             Invoke("T1", TRY_COMMIT), Step("T1", 3)]
    a = run_schedule(make_tm("mv-invisible", ["X", "Y"]), sched)
    b = run_schedule(make_tm("mv-invisible", ["X", "Y"]), sched)
    assert a.execution == b.execution
    assert a.poised == b.poised and a.fragments == b.fragments
    assert format_annotations(a) == format_annotations(b)


def test_annotation_round_trip():
    r = Runner(make_tm("mv-invisible", ["X1", "X2"]))
    r.begin("T1")
    with r.fragment("w"):
        r.run_op("T1", t_write("X1", 1))
    r.invoke("T1", TRY_COMMIT)
    run = r.annotated()
    poised, frags = parse_annotations(format_annotations(run))
    assert frags == run.fragments
    assert poised == {n: t for n, t in run.poised.items() if t}


def test_clone_and_probe_do_not_perturb():
    r = Runner(make_tm("mv-invisible", ["X"]))
    r.begin("T1")
    r.run_op("T1", t_write("X", 1))
    before = list(r.events)
    assert r.probe(["X"]) == [0]
    assert r.events == before
    c = r.clone()
    c.run_op("T1", TRY_COMMIT)
    assert r.events == before and c.probe(["X"]) == [1]


def test_snapshot_restore():
    r = Runner(make_tm("visible-read", ["X"]))
    tok = r.snapshot()
    r.run_txn("T1", [t_write("X", 4)])
    back = r.restore(tok)
    assert back.events == [] and back.probe(["X"]) == [0]
    with pytest.raises(StaleSnapshot):
        r.restore(99)


# -- longest unobservable prefix


def _solo_writer_events(tm, ops):
    r = Runner(tm)
    r.run_txn("T1", ops)
    return r.events


def test_prefix_for_mv_is_just_before_clock_increment():
    tm = make_tm("mv-invisible", ["X1", "X2", "X3"])
    pi = _solo_writer_events(tm, [t_write("X1", 1), t_write("X3", 1)])
    fai_pos = next(i for i, e in enumerate(pi) if isinstance(e, RmwEvent) and e.prim == fai())
    ell = longest_unobservable_prefix(tm, [t_write("X1", 1), t_write("X3", 1)], ["X1", "X3"], 1)
    assert ell == fai_pos


def test_prefix_independent_scan_strict_dap_attempt():
    tm = make_tm("strict-dap-attempt", ["X1", "X2", "X3"])
    ops = [t_write("X1", 1), t_write("X3", 1)]
    pi = _solo_writer_events(tm, ops)
    first_val_write = next(i for i, e in enumerate(pi)
                           if isinstance(e, RmwEvent) and e.base == "X1.val" and not e.trivial)
    assert longest_unobservable_prefix(tm, ops, ["X1", "X3"], 1) == first_val_write


def test_prefix_empty_script():
    assert longest_unobservable_prefix(make_tm("mv-invisible", ["X1"]), [], ["X1"], 1) == 0


def test_prefix_target_is_initial_value():
    with pytest.raises(NoQualifyingPrefix):
        longest_unobservable_prefix(make_tm("mv-invisible", ["X1"]), [t_write("X1", 1)], ["X1"], 0)


# -- scenarios


def test_intro_mv_aborts_t1():
    rep = scenario_intro("mv-invisible")
    assert "FATE T1 aborted" in rep.lines and rep.ok
    assert rep.data["verdict"].serializable


def test_intro_visible_read():
    rep = scenario_intro("visible-read")
    fate_t1 = rep.data["fates"][0][0]
    assert rep.data["verdict"].serializable or fate_t1 is not COMMIT
    assert rep.ok


@pytest.mark.parametrize("tm", ALL)
def test_intro_rounds_repeat(tm):
    rep = scenario_intro(tm, rounds=3)
    assert len(set(rep.data["fates"])) == 1 and len(rep.data["fates"]) == 3


def test_theorem1_single_phase():
    rep = scenario_theorem1("mv-invisible", 1, 2)
    H = rep.runs[0][1].execution.history()
    assert H.txns == ["T0"]
    assert rep.data["distinct"] == {"X1": 1, "X2": 1}
    assert [line for line in rep.lines if line.startswith("READ ")] == [
        "READ T0 X1 -> 0 expect 0 ok", "READ T0 X2 -> 0 expect 0 ok"]


def test_theorem1_mv_three_phases():
    rep = scenario_theorem1("mv-invisible", 3, 2)
    assert rep.ok
    assert rep.data["distinct"] == {"X1": 3, "X2": 3}
    assert "DISTINCT X1 3" in rep.lines


def test_theorem1_mv_versions():
    rep = scenario_theorem1("mv-invisible", 8, 4)
    assert rep.ok and rep.checks["versions"]
    assert all(n == 8 for n in rep.data["distinct"].values())


def test_phase_values_distinct_per_object():
    vals = [phase_value(i, 2) for i in range(20)]
    assert len(set(vals)) == 20


@pytest.mark.parametrize("tm", ALL)
def test_theorem1_invisible_and_reads_imply_distinct(tm):
    rep = scenario_theorem1(tm, 3, 2)
    if rep.checks["invisible"] and rep.checks["reads"]:
        assert rep.checks["distinct"]


def test_theorem2_strict_dap_attempt_one_disjunct():
    rep = scenario_theorem2("strict-dap-attempt")
    assert rep.ok and len(rep.data["disjuncts"]) == 1
    assert "FIRED 1" in rep.lines


def test_theorem2_mv_contends_across_dsets():
    rep = scenario_theorem2("mv-invisible")
    assert rep.data["disjuncts"] == ["cross-dset-contention"]
    assert {v.base for v in rep.data["strict_dap"]} == {"clock"}
    assert rep.data["verdict"].serializable


def test_theorem2_fragments_are_contiguous():
    run = scenario_theorem2("strict-dap-attempt").runs[0][1]
    for label in ("beta", "gamma"):
        s, e = run.fragment(label)
        assert len({ev.txn for ev in run.execution.events[s:e]}) == 1


def test_theorem3_visible_read_sweep():
    rep = scenario_theorem3("visible-read", 8)
    assert rep.ok
    assert len(rep.data["swept"]) == 14 and min(rep.data["swept"].values()) >= 1
    assert all(v.serializable for v in rep.data["verdicts"].values())


def test_theorem3_smallest_case():
    rep = scenario_theorem3("visible-read", 2)
    assert rep.ok and set(rep.data["swept"]) == {(1, "b"), (1, "c")}
    assert rep.text().endswith("RESULT PASS\n")


def test_theorem3_split_point_is_first_nontrivial_event():
    rep = scenario_theorem3("visible-read", 4, splits=[2])
    run = dict(rep.runs)["j2c"]
    s, e = run.fragment("alpha_2^1")
    assert [type(x) for x in run.execution.events[s:e]] == []  # the announcement is the first step
    nxt = run.execution.events[run.fragment("alpha_2^2")[0]]
    assert isinstance(nxt, RmwEvent) and not nxt.trivial


def test_theorem3_no_write_means_empty_second_half():
    rep = scenario_theorem3("mv-invisible", 3, splits=[1])
    run = dict(rep.runs)["j1b"]
    s, e = run.fragment("alpha_1^2")
    assert [type(x) for x in run.execution.events[s:e]] == [TOpEvent]


def test_theorem3_rejects_bad_split():
    with pytest.raises(ValueError):
        scenario_theorem3("visible-read", 4, splits=[4])


def test_lemma1_visible_read_no_contention():
    rep = scenario_lemma1("visible-read")
    assert rep.ok and rep.data["cross"] == []


def test_lemma1_mv_contends_on_clock():
    rep = scenario_lemma1("mv-invisible")
    assert not rep.ok and {b for _, _, b in rep.data["cross"]} == {"clock"}


def test_lemma1_empty_second_fragment():
    rep = scenario_lemma1("mv-invisible", rho2=("T2", [], 0))
    assert rep.data["cross"] == []


def test_lemma1_fragments_step_contention_free():
    rep = scenario_lemma1("visible-read", alpha=[("T0", [t_write("X3", 2)])],
                          rho1=("T1", [t_read("X1"), t_write("X1", 5)], 4))
    E = rep.runs[0][1].execution
    assert is_step_contention_free(E, "T1") and is_step_contention_free(E, "T2")


@pytest.mark.parametrize("tm", ALL)
@pytest.mark.parametrize("scenario", [
    lambda tm: scenario_intro(tm, 2),
    lambda tm: scenario_theorem1(tm, 3, 2),
    scenario_theorem2,
    lambda tm: scenario_theorem3(tm, 3),
    scenario_lemma1,
])
def test_every_scenario_well_formed_with_verdict(tm, scenario):
    rep = scenario(tm)
    for _, run in rep.runs:
        check_well_formed(run.execution.history().events)
    if rep.scenario != "lemma1":
        assert any(line.startswith("VERDICT") for line in rep.lines)
