"""Scripted step-level scheduler and the proof-schedule scenarios.

A :class:`Runner` drives one :class:`~tmlab.tms.Machine` and logs every
command it issues, so any point of a run can be cloned by replaying the log
on a fresh machine.  Probes run on clones and never touch the main run.
"""
from __future__ import annotations

import contextlib
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from .analysis import (check_strict_dap, check_weak_dap, contentions, disjoint_access,
                       distinct_values_probe, invisible_reads_violations, pattern_report)
from .core import (ABORT, COMMIT, Execution, History, Primitive, TMError, TOp, TOpEvent,
                   TRY_COMMIT, parse_primitive, t_read, t_write)
from .serializability import check_strict_serializability
from .tms import TM, Machine, make_tm, TMS


class ProbeAborted(TMError):
    """A read-only probe transaction aborted."""


class NoQualifyingPrefix(TMError):
    pass


class UnexpectedAbort(TMError):
    pass


# ---------------------------------------------------------------------------
# Runner


@dataclass
class AnnotatedRun:
    execution: Execution
    poised: dict = field(default_factory=dict)  # prefix length -> {txn: (base, prim)}
    fragments: list = field(default_factory=list)  # (start, end, label)
    meta: dict = field(default_factory=dict)

    def fragment(self, label: str) -> tuple[int, int]:
        for s, e, l in self.fragments:
            if l == label:
                return s, e
        raise KeyError(label)


class Runner:
    def __init__(self, tm: TM, annotate: bool = True):
        self.tm = tm
        self.machine = Machine(tm)
        self.annotate = annotate
        self.commands: list[tuple] = []
        self.fragments: list[tuple[int, int, str]] = []
        self.poised: dict[int, dict] = {}
        self._snaps: dict[int, int] = {}
        self._scripts: dict[str, list] = {}
        self._note()

    # -- commands

    def begin(self, txn: str, process: Optional[int] = None) -> None:
        p = process if process is not None else self.machine.free_process()
        self.machine.begin(txn, p)
        self.commands.append(("begin", txn, p))
        self._note()

    def invoke(self, txn: str, op: TOp) -> None:
        self.machine.invoke(txn, op)
        self.commands.append(("invoke", txn, op))
        self._note()

    def step(self, txn: str, count: int = 1) -> list:
        evs = []
        for _ in range(count):
            evs.append(self.machine.step(txn))
            self.commands.append(("step", txn))
            self._note()
        return evs

    def finish(self, txn: str):
        while True:
            ev = self.step(txn)[0]
            if isinstance(ev, TOpEvent):
                return ev.payload

    def run_op(self, txn: str, op: TOp):
        self.invoke(txn, op)
        return self.finish(txn)

    def run_txn(self, txn: str, ops: Sequence[TOp], commit: bool = True,
                process: Optional[int] = None) -> list:
        """Run a whole transaction solo; stops at the first abort."""
        if txn not in self.machine.txns:
            self.begin(txn, process)
        out = []
        for op in list(ops) + ([TRY_COMMIT] if commit else []):
            r = self.run_op(txn, op)
            out.append(r)
            if r is ABORT:
                break
        return out

    def drive(self, txn: str, ops: Sequence[TOp], limit: Optional[int] = None) -> int:
        """Run ``ops`` of ``txn`` until it has emitted ``limit`` more events.

        Returns the number of events emitted.  Begins ``txn`` if needed.
        """
        if txn not in self.machine.txns:
            self.begin(txn)
        self.assign(txn, ops)
        n = 0
        while limit is None or n < limit:
            if not self.advance(txn):
                break
            n += 1
        return n

    def assign(self, txn: str, ops: Sequence[TOp]) -> None:
        """Register the operations :meth:`advance` will invoke for ``txn``."""
        self._scripts[txn] = list(ops)

    def movable(self, txn: str) -> bool:
        status = self.machine.status(txn)
        return status == "pending" or (status == "idle" and bool(self._scripts.get(txn)))

    def advance(self, txn: str) -> bool:
        """Apply the next event of ``txn`` following its registered script."""
        status = self.machine.status(txn)
        if status == "pending":
            self.step(txn)
            return True
        script = self._scripts.get(txn)
        if status != "idle" or not script:
            return False
        self.invoke(txn, script.pop(0))
        return True

    @contextlib.contextmanager
    def fragment(self, label: str):
        start = len(self.machine.events)
        try:
            yield
        finally:
            self.fragments.append((start, len(self.machine.events), label))

    # -- state

    @property
    def events(self) -> list:
        return self.machine.events

    def execution(self) -> Execution:
        return self.machine.execution()

    def history(self) -> History:
        return self.execution().history()

    def annotated(self, **meta) -> AnnotatedRun:
        return AnnotatedRun(self.execution(), {k: dict(v) for k, v in self.poised.items()},
                            list(self.fragments), dict(meta))

    def clone(self) -> "Runner":
        return self._replay(len(self.commands))

    def snapshot(self) -> int:
        token = len(self._snaps) + 1
        self._snaps[token] = len(self.commands)
        return token

    def restore(self, token: int) -> "Runner":
        from .core import StaleSnapshot
        if token not in self._snaps:
            raise StaleSnapshot(token)
        return self._replay(self._snaps[token])

    def probe(self, objs: Iterable[str], txn: str = "P") -> list:
        """Fresh read-only transaction reading ``objs`` solo on a clone."""
        clone = self.clone()
        vals = clone.run_txn(txn, [t_read(x) for x in objs])
        if ABORT in vals:
            raise ProbeAborted(f"probe {txn} aborted")
        return vals[:-1]

    def _replay(self, n: int) -> "Runner":
        r = Runner(self.tm, annotate=False)
        for cmd in self.commands[:n]:
            if cmd[0] == "begin":
                r.machine.begin(cmd[1], cmd[2])
            elif cmd[0] == "invoke":
                r.machine.invoke(cmd[1], cmd[2])
            else:
                r.machine.step(cmd[1])
            r.commands.append(cmd)
        r._scripts = {k: list(v) for k, v in self._scripts.items()} if n == len(self.commands) else {}
        return r

    def _note(self) -> None:
        if not self.annotate:
            return
        table = {}
        for k in self.machine.live():
            req = self.machine.poised(k)
            if req is not None:
                table[k] = req
        self.poised[len(self.machine.events)] = table


# ---------------------------------------------------------------------------
# Static schedules


@dataclass(frozen=True)
class Start:
    txn: str
    process: Optional[int] = None


@dataclass(frozen=True)
class Invoke:
    txn: str
    op: TOp


@dataclass(frozen=True)
class Step:
    txn: str
    count: Optional[int] = 1  # None: until the current operation responds


@dataclass(frozen=True)
class RunSolo:
    txn: str
    ops: tuple
    commit: bool = True
    may_abort: bool = False


@dataclass(frozen=True)
class Fragment:
    label: str
    commands: tuple


def run_schedule(tm: TM, schedule: Sequence, annotate: bool = True) -> AnnotatedRun:
    runner = Runner(tm, annotate=annotate)
    _exec(runner, schedule, None)
    return runner.annotated()


def _exec(runner: Runner, commands, frag: Optional[str]) -> None:
    for c in commands:
        if isinstance(c, Start):
            runner.begin(c.txn, c.process)
        elif isinstance(c, Invoke):
            runner.invoke(c.txn, c.op)
        elif isinstance(c, Step):
            if c.count is None:
                runner.finish(c.txn)
            else:
                runner.step(c.txn, c.count)
        elif isinstance(c, RunSolo):
            out = runner.run_txn(c.txn, c.ops, c.commit)
            if ABORT in out and not c.may_abort:
                where = f" in fragment {frag}" if frag else ""
                raise UnexpectedAbort(f"{c.txn} aborted{where}")
        elif isinstance(c, Fragment):
            with runner.fragment(c.label):
                _exec(runner, c.commands, c.label)
        else:
            raise TMError(f"unknown schedule command {c!r}")


# ---------------------------------------------------------------------------
# Annotation sidecar


def format_annotations(run: AnnotatedRun) -> str:
    lines = []
    for n in sorted(run.poised):
        for k, (base, prim) in sorted(run.poised[n].items()):
            lines.append(f"POISED {n} {k} {base} {prim}")
    for s, e, label in run.fragments:
        lines.append(f"FRAG {s} {e} {label}")
    return "\n".join(lines) + ("\n" if lines else "")


def parse_annotations(text: str) -> tuple[dict, list]:
    poised: dict[int, dict] = {}
    frags = []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "POISED" and len(parts) == 5:
            poised.setdefault(int(parts[1]), {})[parts[2]] = (parts[3], parse_primitive(parts[4]))
        elif parts[0] == "FRAG" and len(parts) == 4:
            frags.append((int(parts[1]), int(parts[2]), parts[3]))
        else:
            raise TMError(f"annotation line {lineno}: {line!r}")
    return poised, frags


# ---------------------------------------------------------------------------
# Reports


@dataclass
class Report:
    scenario: str
    tm: str
    lines: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    runs: list = field(default_factory=list)  # (label, AnnotatedRun)
    data: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def check(self, name: str, passed: bool) -> bool:
        self.checks[name] = self.checks.get(name, True) and bool(passed)
        return passed

    def text(self) -> str:
        out = [f"SCENARIO {self.scenario} tm={self.tm}"] + list(self.lines)
        out += [f"CHECK {k} {'PASS' if v else 'FAIL'}" for k, v in self.checks.items()]
        out.append(f"RESULT {'PASS' if self.ok else 'FAIL'}")
        return "\n".join(out) + "\n"


def _build(tm: Union[str, type, TM], objects: dict, n_processes: int = 4) -> TM:
    if isinstance(tm, TM):
        tm = type(tm)
    if isinstance(tm, str):
        return make_tm(tm, objects, n_processes)
    return tm(objects, n_processes)


def _verdict_line(tag: str, H: History) -> tuple[str, object]:
    v = check_strict_serializability(H)
    order = " ".join(v.order) if v.serializable else f"completions={v.completions} orders={v.orders}"
    return f"VERDICT {tag} {v.outcome} {order}", v


# ---------------------------------------------------------------------------
# longest unobservable prefix


def longest_unobservable_prefix(tm: TM, writer_script: Sequence[TOp], probes: Sequence[str],
                                target_values: Union[int, Sequence[int]], writer: str = "T1") -> int:
    """Length of the longest prefix of the writer's solo run no probe observes.

    ``probes`` name the t-objects read by single-read probe transactions,
    each run solo to completion on a clone after the prefix; a probe
    observes when it returns its target.  The scan stops at the first
    observing prefix, so one more writer step makes some probe observe.
    Returns the full length if no prefix is observed.
    """
    if isinstance(target_values, int):
        target_values = [target_values] * len(probes)
    script = list(writer_script)
    if script and script[-1] != TRY_COMMIT:
        script.append(TRY_COMMIT)
    full = Runner(tm, annotate=False)
    total = full.drive(writer, script) if script else 0
    for ell in range(total + 1):
        r = Runner(tm, annotate=False)
        if script:
            r.drive(writer, script, limit=ell)
        for i, (obj, target) in enumerate(zip(probes, target_values)):
            if r.probe([obj], txn=f"P{i}")[0] == target:
                if ell == 0:
                    raise NoQualifyingPrefix(f"probe of {obj} observes {target} before the writer runs")
                return ell - 1
    return total


# ---------------------------------------------------------------------------
# Scenarios


def scenario_intro(tm, rounds: int = 1) -> Report:
    """T1 reads X; T2 reads Y, writes X, commits; T1 writes Y and tries to commit."""
    t = _build(tm, {"X": 0, "Y": 0})
    rep = Report("intro", t.name)
    runner = Runner(t)
    fates = []
    for r in range(rounds):
        a, b = f"T{2 * r + 1}", f"T{2 * r + 2}"
        nv = r + 1
        with runner.fragment(f"round{r}"):
            runner.begin(a)
            x = runner.run_op(a, t_read("X"))
            out_b = runner.run_txn(b, [t_read("Y"), t_write("X", nv)])
            fate_a = ABORT
            if x is not ABORT and runner.run_op(a, t_write("Y", nv)) is not ABORT:
                fate_a = runner.run_op(a, TRY_COMMIT)
        fate_b = out_b[-1]
        rep.lines.append(f"FATE {a} {'committed' if fate_a is COMMIT else 'aborted'}")
        rep.lines.append(f"FATE {b} {'committed' if fate_b is COMMIT else 'aborted'}")
        fates.append((fate_a, fate_b))
    line, v = _verdict_line("history", runner.history())
    rep.lines.append(line)
    rep.check("serializable", v.serializable)
    rep.check("rounds-agree", len(set(fates)) <= 1)
    rep.data.update(fates=fates, verdict=v)
    rep.runs.append(("main", runner.annotated(scenario="intro")))
    return rep


def phase_value(i: int, ell: int) -> int:
    """Value written to X_ell in phase i (0 is the initial value)."""
    return 0 if i == 0 else 100 * i + ell


def _windows(c: int, max_txns: int = 10) -> list[tuple[int, int]]:
    if 2 * c - 1 <= max_txns:
        return [(0, c - 1)]
    span = max_txns // 2 - 1
    out, a = [], 0
    while True:
        b = min(c - 1, a + span if a else span)
        out.append((a, b))
        if b == c - 1:
            return out
        a = b


def scenario_theorem1(tm, c: int, L: int) -> Report:
    """Phased construction: writers of fresh values interleaved with invisible readers."""
    if c < 1 or L < 1:
        raise ValueError("need c >= 1 and L >= 1")
    objs = [f"X{ell}" for ell in range(1, L + 1)]
    t = _build(tm, {x: 0 for x in objs}, n_processes=max(4, c + 1))
    rep = Report("theorem1", t.name)
    runner = Runner(t)
    readers = [f"T{2 * i}" for i in range(c)]
    ok_reads = True

    def expect(txn, obj, got, want):
        nonlocal ok_reads
        good = got == want
        ok_reads &= good
        rep.lines.append(f"READ {txn} {obj} -> {got} expect {want} {'ok' if good else 'MISMATCH'}")

    for i in range(c):
        if i > 0:
            w = f"T{2 * i - 1}"
            with runner.fragment(f"rho_{i}"):
                out = runner.run_txn(w, [t_write(x, phase_value(i, ell)) for ell, x in enumerate(objs, 1)])
            rep.lines.append(f"WRITER {w} {'committed' if out[-1] is COMMIT else 'aborted'}")
            ok_reads &= out[-1] is COMMIT
        with runner.fragment(f"alpha_{i}"):
            runner.begin(readers[i])
            expect(readers[i], "X1", runner.run_op(readers[i], t_read("X1")), phase_value(i, 1))

    distinct = {}
    for ell, x in enumerate(objs, 1):
        try:
            vals = distinct_values_probe(runner, x, readers)
        except ProbeAborted as exc:
            rep.lines.append(f"PROBE-ABORT {x} {exc}")
            rep.check("distinct", False)
            continue
        distinct[x] = len(set(vals))
        rep.lines.append(f"DISTINCT {x} {distinct[x]}")
        rep.check("distinct", distinct[x] >= c)
        rep.check("probe-values", vals == [phase_value(i, ell) for i in range(c)])

    if hasattr(t, "version_count"):
        for x in objs:
            n = t.version_count(runner.machine.memory, x)
            rep.lines.append(f"VERSIONS {x} {n}")
            rep.check("versions", n >= c)

    for i in range(c):
        with runner.fragment(f"extend_{i}"):
            for ell, x in enumerate(objs[1:], 2):
                expect(readers[i], x, runner.run_op(readers[i], t_read(x)), phase_value(i, ell))
            fate = runner.run_op(readers[i], TRY_COMMIT)
            rep.lines.append(f"READER {readers[i]} {'committed' if fate is COMMIT else 'aborted'}")
            rep.check("read-only-commit", fate is COMMIT)
    rep.check("reads", ok_reads)

    E = runner.execution()
    inv = invisible_reads_violations(E)
    rep.lines += [f"INVIS-VIOLATION {k} {i}" for k, i in inv]
    rep.check("invisible", not inv)

    H = E.history()
    verdicts = []
    for a, b in _windows(c):
        keep = {readers[i] for i in range(a, b + 1)} | {f"T{2 * i - 1}" for i in range(max(a, 1), b + 1)}
        init = {x: phase_value(a - 1, ell) if a > 0 else 0 for ell, x in enumerate(objs, 1)}
        if a > 0:
            keep.discard(readers[a - 1])
        sub = History([e for e in H.events if e.txn in keep], init)
        line, v = _verdict_line(f"phases={a}-{b}", sub)
        rep.lines.append(line)
        verdicts.append(v)
        rep.check("serializable", v.serializable)

    run = runner.annotated(scenario="theorem1", c=c, L=L)
    wdap = check_weak_dap(run.execution, run.poised)
    rep.lines += [v.line() for v in wdap]
    rep.lines.append(f"WDAP-COUNT {len(wdap)}")
    rep.runs.append(("main", run))
    rep.data.update(distinct=distinct, verdicts=verdicts, weak_dap=wdap, invisible=inv)
    return rep


def scenario_theorem2(tm, nv: int = 1) -> Report:
    """Adversarial schedule against a strict-DAP candidate.

    Reports which of the three failure modes shows up: a read-only abort,
    contention between transactions with disjoint data sets, or a final
    history that is not strictly serializable.
    """
    objs = {"X1": 0, "X2": 0, "X3": 0}
    t = _build(tm, objs)
    rep = Report("theorem2", t.name)
    script = [t_write("X1", nv), t_write("X3", nv), TRY_COMMIT]
    solo = Runner(t, annotate=False)
    plen = solo.drive("T1", script)
    try:
        ell = longest_unobservable_prefix(t, script, ["X1", "X3"], nv)
    except ProbeAborted:
        rep.lines.append("DISJUNCT read-only-abort (probe)")
        rep.check("premise", True)
        rep.check("disjunct", True)
        rep.data["disjuncts"] = ["read-only-abort"]
        return rep
    rep.lines.append(f"PI length={plen} prefix={ell}")
    if not rep.check("premise", ell < plen):
        rep.lines.append("PREMISE no unobservable proper prefix")
        return rep

    runner = Runner(t)
    with runner.fragment("pi_prime"):
        runner.drive("T1", script, limit=ell)
    probe_run = runner.clone()
    probe_run.advance("T1")
    beta_obj = alpha_obj = None
    for cand, other in (("X3", "X1"), ("X1", "X3")):
        if probe_run.probe([cand])[0] == nv:
            beta_obj, alpha_obj = cand, other
            break
    if beta_obj is None:
        rep.lines.append("PREMISE neither probe observes after pi'.e")
        rep.check("premise", False)
        return rep
    rep.lines.append(f"BRANCH beta reads {beta_obj}, alpha_1 reads {alpha_obj}")

    def frag(label, fn):
        with runner.fragment(label):
            return fn()

    runner.begin("T0")
    r0 = frag("alpha_1", lambda: runner.run_op("T0", t_read(alpha_obj)))
    rep.lines.append(f"FRAGMENT alpha_1 T0 read({alpha_obj}) -> {r0} expect 0")
    frag("e", lambda: runner.advance("T1"))
    out3 = frag("beta", lambda: runner.run_txn("T3", [t_read(beta_obj)]))
    rep.lines.append(f"FRAGMENT beta T3 read({beta_obj}) -> {out3[0]} expect {nv}; {out3[-1]}")
    out2 = frag("gamma", lambda: runner.run_txn("T2", [t_write("X2", nv)]))
    rep.lines.append(f"FRAGMENT gamma T2 write(X2,{nv}) -> {out2[-1]}")
    if out2[-1] is not COMMIT:
        rep.lines.append("DEVIATION gamma aborted")
    r2 = c0 = ABORT
    if r0 is not ABORT:
        r2 = frag("alpha_2", lambda: runner.run_op("T0", t_read("X2")))
        if r2 is not ABORT:
            c0 = runner.run_op("T0", TRY_COMMIT)
    rep.lines.append(f"FRAGMENT alpha_2 T0 read(X2) -> {r2}; {c0}")
    read_only_abort = ABORT in (r0, r2, c0) or ABORT in out3

    run = runner.annotated(scenario="theorem2", branch=beta_obj)
    sdap = check_strict_dap(run.execution)
    rep.lines += [v.line() for v in sdap]
    line, verdict = _verdict_line("final", run.execution.history())
    rep.lines.append(line)
    fired = []
    if read_only_abort:
        fired.append("read-only-abort")
    if sdap:
        fired.append("cross-dset-contention")
    if not verdict.serializable:
        fired.append("not-serializable")
    rep.lines += [f"DISJUNCT {d}" for d in fired]
    rep.lines.append(f"FIRED {len(fired)}")
    rep.check("disjunct", bool(fired))
    rep.runs.append(("main", run))
    rep.data.update(disjuncts=fired, verdict=verdict, prefix=ell, pi_length=plen,
                    strict_dap=sdap, branch=beta_obj)
    return rep


def _first_nontrivial_offset(runner: Runner, txn: str) -> int:
    """Events ``txn``'s in-flight operation emits before its first nontrivial one."""
    probe = runner.clone()
    n = 0
    while True:
        ev = probe.step(txn)[0]
        if isinstance(ev, TOpEvent) or not ev.trivial:
            return n
        n += 1


def scenario_theorem3(tm, m: int, splits: Optional[Iterable[int]] = None, nv: int = 1) -> Report:
    """A long read-only transaction T0 against writers slipped into each read."""
    if m < 2:
        raise ValueError("need m >= 2")
    objs = {f"X{i}": 0 for i in range(1, m + 1)}
    t = _build(tm, objs)
    rep = Report("theorem3", t.name)
    splits = list(range(1, m)) if splits is None else list(splits)
    reads = [t_read(f"X{i}") for i in range(1, m + 1)]

    solo = Runner(t)
    with solo.fragment("solo"):
        solo.run_txn("T0", reads)
    pats = pattern_report(solo.execution())["T0"]
    counts = [o.count for o in pats.ops[:m - 1]]
    rep.lines.append("SOLO per-read " + " ".join(str(n) for n in counts))
    rep.check("solo-each-read", all(n >= 1 for n in counts))
    rep.runs.append(("solo", solo.annotated(scenario="theorem3", ordering="solo")))

    t_last = f"T{m}"
    for j in splits:
        if not 1 <= j < m:
            raise ValueError(f"split {j} outside 1..{m - 1}")
        tj = f"T{j}"
        for ordering in ("b", "c"):
            runner = Runner(t)
            if ordering == "b":
                with runner.fragment("delta_m"):
                    runner.run_txn(t_last, [t_write(f"X{m}", nv)])
            runner.begin("T0")
            resp = []
            for i in range(1, j):
                with runner.fragment(f"alpha_{i}"):
                    resp.append(runner.run_op("T0", reads[i - 1]))
            runner.invoke("T0", reads[j - 1])
            with runner.fragment(f"alpha_{j}^1"):
                runner.step("T0", _first_nontrivial_offset(runner, "T0"))
            with runner.fragment(f"delta_{j}"):
                out_j = runner.run_txn(tj, [t_write(f"X{j}", nv)])
            with runner.fragment(f"alpha_{j}^2"):
                resp.append(runner.finish("T0"))
            if ordering == "c":
                with runner.fragment("delta_m"):
                    runner.run_txn(t_last, [t_write(f"X{m}", nv)])
            with runner.fragment("alpha_rest"):
                for op in reads[j:]:
                    resp.append(runner.run_op("T0", op))
                fate = runner.run_op("T0", TRY_COMMIT)
            run = runner.annotated(scenario="theorem3", m=m, j=j, ordering=ordering)
            E = run.execution
            p = pattern_report(E)["T0"]
            swept = p.ops[j - 1].count
            in_reads = sum(o.count for o in p.ops[:m])
            line, v = _verdict_line(f"j={j} ordering={ordering}", E.history())
            rep.lines.append(f"RUN j={j} ordering={ordering} T0 -> {' '.join(map(str, resp))} {fate}; "
                             f"{tj} {out_j[-1]}")
            rep.lines.append(f"PATTERNS j={j} ordering={ordering} swept={swept} reads={in_reads} total={p.total}")
            rep.lines.append(line)
            rep.check("swept-read-pattern", swept >= 1)
            rep.check("patterns>=m-1", in_reads >= m - 1)
            rep.check("serializable", v.serializable)
            rep.check("read-only-commit", fate is COMMIT)
            if ordering == "b":
                rep.check("last-read-new", resp[-1] == nv)
            wdap = check_weak_dap(E, run.poised)
            rep.lines += [w.line() for w in wdap]
            rep.data.setdefault("weak_dap", []).extend(wdap)
            rep.data.setdefault("swept", {})[(j, ordering)] = swept
            rep.data.setdefault("verdicts", {})[(j, ordering)] = v
            rep.runs.append((f"j{j}{ordering}", run))
    return rep


def scenario_lemma1(tm, alpha: Sequence = (), rho1=None, rho2=None, nv: int = 7) -> Report:
    """Two step-contention-free fragments of disjoint-access transactions.

    ``alpha`` is a list of ``(txn, ops)`` committed solo first; ``rho1`` and
    ``rho2`` are ``(txn, ops, limit)`` where ``limit`` caps the number of
    events (None runs to t-completion).
    """
    rho1 = rho1 or ("T1", [t_read("X1"), t_write("X1", nv)], None)
    rho2 = rho2 or ("T2", [t_read("X2"), t_write("X2", nv)], None)
    objs = set()
    for _, ops in alpha:
        objs |= {o.obj for o in ops}
    for _, ops, _ in (rho1, rho2):
        objs |= {o.obj for o in ops}
    objs.discard(None)
    t = _build(tm, {x: 0 for x in sorted(objs, key=lambda s: (len(s), s))})
    rep = Report("lemma1", t.name)
    runner = Runner(t)
    with runner.fragment("alpha"):
        for txn, ops in alpha:
            runner.run_txn(txn, ops)
    spans = []
    for label, (txn, ops, limit) in (("rho1", rho1), ("rho2", rho2)):
        script = list(ops)
        if limit is None and script and script[-1] != TRY_COMMIT:
            script.append(TRY_COMMIT)
        with runner.fragment(label):
            start = len(runner.events)
            if script or limit:
                runner.drive(txn, script, limit)
            spans.append((start, len(runner.events), txn))
    E = runner.execution()
    (s1, e1, k1), (s2, e2, k2) = spans
    disjoint = True
    if k1 in E.records and k2 in E.records:
        disjoint = disjoint_access(E, k1, k2, in_flight=True)
    rep.lines.append(f"DISJOINT-ACCESS {k1} {k2} {disjoint}")
    cross = [(i, j, b) for i, j, b in contentions(E) if s1 <= i < e1 and s2 <= j < e2]
    rep.lines += [f"CONTENTION {i} {j} {b}" for i, j, b in cross]
    rep.check("premise", disjoint)
    rep.check("no-contention", not cross)
    rep.runs.append(("main", runner.annotated(scenario="lemma1")))
    rep.data.update(cross=cross, disjoint=disjoint)
    return rep


# ---------------------------------------------------------------------------
# Hand-built histories with known verdicts


def _h(*rows) -> list:
    out = []
    for txn, kind, op, payload in rows:
        out.append(TOpEvent(0, txn, kind, op, payload))
    return out


def _txn_rows(txn, ops_resps) -> list:
    rows = []
    for op, resp in ops_resps:
        rows.append((txn, "inv", op, None))
        if resp is not None:
            rows.append((txn, "res", op, resp))
    return rows


def stale_reader_history(nv: int = 1) -> History:
    """pi'.alpha_1.e.beta.gamma.alpha_2 with T1 left pending in tryC."""
    from .core import OK
    rows = _txn_rows("T1", [(t_write("X1", nv), OK), (t_write("X3", nv), OK), (TRY_COMMIT, None)])
    rows += _txn_rows("T0", [(t_read("X1"), 0)])
    rows += _txn_rows("T3", [(t_read("X3"), nv), (TRY_COMMIT, COMMIT)])
    rows += _txn_rows("T2", [(t_write("X2", nv), OK), (TRY_COMMIT, COMMIT)])
    rows += _txn_rows("T0", [(t_read("X2"), nv), (TRY_COMMIT, COMMIT)])
    return History(_h(*rows), {"X1": 0, "X2": 0, "X3": 0})


def writer_first_history(nv: int = 1) -> History:
    """gamma.pi'.alpha_1.e.beta, then T0 reads X2 -> nv and commits."""
    from .core import OK
    rows = _txn_rows("T2", [(t_write("X2", nv), OK), (TRY_COMMIT, COMMIT)])
    rows += _txn_rows("T1", [(t_write("X1", nv), OK), (t_write("X3", nv), OK), (TRY_COMMIT, None)])
    rows += _txn_rows("T0", [(t_read("X1"), 0)])
    rows += _txn_rows("T3", [(t_read("X3"), nv), (TRY_COMMIT, COMMIT)])
    rows += _txn_rows("T0", [(t_read("X2"), nv), (TRY_COMMIT, COMMIT)])
    return History(_h(*rows), {"X1": 0, "X2": 0, "X3": 0})


def split_read_history(m: int = 4, j: int = 2, nv: int = 1) -> History:
    """T0 reads X_j -> v around T_j's write, then reads X_m -> nv after T_m commits."""
    from .core import OK
    if not 1 <= j < m:
        raise ValueError("need 1 <= j < m")
    rows = []
    for i in range(1, j):
        rows += _txn_rows("T0", [(t_read(f"X{i}"), 0)])
    rows.append(("T0", "inv", t_read(f"X{j}"), None))
    rows += _txn_rows(f"T{j}", [(t_write(f"X{j}", nv), OK), (TRY_COMMIT, COMMIT)])
    rows.append(("T0", "res", t_read(f"X{j}"), 0))
    rows += _txn_rows(f"T{m}", [(t_write(f"X{m}", nv), OK), (TRY_COMMIT, COMMIT)])
    for i in range(j + 1, m + 1):
        rows += _txn_rows("T0", [(t_read(f"X{i}"), nv if i == m else 0)])
    rows += _txn_rows("T0", [(TRY_COMMIT, COMMIT)])
    return History(_h(*rows), {f"X{i}": 0 for i in range(1, m + 1)})


SCENARIOS = ("intro", "theorem1", "theorem2", "theorem3", "lemma1")
