"""Reference TM implementations driven one base-object step at a time.

A TM is a stateless strategy: each t-operation is a generator that yields
``(base, primitive)`` accesses, receives the primitive's response, and
returns the t-operation's response.  All shared state lives in base objects;
per-transaction private state lives in ``TxnContext.local``.  A
:class:`Machine` owns the memory and the live generators.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Generator, Iterable, Mapping, Optional, Union

from .core import (ABORT, COMMIT, OK, Configuration, Execution, Primitive, RmwEvent, TMError,
                   TOp, TOpEvent, UnknownBaseObject, cas, faa, fai, read, write)

Access = tuple  # (base, Primitive)
OpGen = Generator[Access, object, object]

STEP_BUDGET = 10_000


class ProcessBusy(TMError):
    pass


class StepBudgetExceeded(TMError):
    pass


class NotRunnable(TMError):
    pass


@dataclass
class TxnContext:
    id: str
    process: int
    local: dict = field(default_factory=dict)


class TM:
    """Base class; subclasses supply the three t-operation generators."""

    name = "abstract"

    def __init__(self, objects: Union[Mapping[str, int], Iterable[str]] = (), n_processes: int = 4):
        if not isinstance(objects, Mapping):
            objects = {x: 0 for x in objects}
        self.objects = dict(objects)
        self.n_processes = n_processes

    def initial_memory(self) -> dict[str, int]:
        raise NotImplementedError

    def initial_value(self, base: str) -> int:
        """Initial value of a base object created on first touch."""
        raise UnknownBaseObject(base)

    def owner(self, base: str) -> Optional[str]:
        """The t-object whose metadata ``base`` belongs to; None for global cells."""
        head = base.split(".", 1)[0]
        return head if head in self.objects else None

    def new_local(self) -> dict:
        return {"reads": {}, "writes": {}}

    def read(self, tx: TxnContext, obj: str) -> OpGen:
        raise NotImplementedError

    def write(self, tx: TxnContext, obj: str, value: int) -> OpGen:
        tx.local["writes"][obj] = value
        return OK
        yield  # pragma: no cover

    def try_commit(self, tx: TxnContext) -> OpGen:
        raise NotImplementedError

    def operation(self, tx: TxnContext, op: TOp) -> OpGen:
        if op.obj is not None and op.obj not in self.objects:
            raise TMError(f"unknown t-object {op.obj}")
        if op.kind == "read":
            return self.read(tx, op.obj)
        if op.kind == "write":
            return self.write(tx, op.obj, op.value)
        return self.try_commit(tx)


class MvInvisibleTM(TM):
    """Multi-version TM with invisible reads.

    A global seqlock ``clock`` orders updating transactions: odd while a
    writer holds it, and ``clock // 2`` is the timestamp of the last commit.
    Each t-object X keeps an append-only version list in cells ``X.val.i``,
    ``X.ts.i`` with length ``X.n``.  Versions are never reclaimed.
    """

    name = "mv-invisible"

    def initial_memory(self) -> dict[str, int]:
        mem = {"clock": 0}
        for x, v in self.objects.items():
            mem.update({f"{x}.n": 1, f"{x}.ts.0": 0, f"{x}.val.0": v})
        return mem

    def initial_value(self, base: str) -> int:
        parts = base.split(".")
        if len(parts) == 3 and parts[0] in self.objects and parts[1] in ("val", "ts") and parts[2].isdigit():
            return 0
        raise UnknownBaseObject(base)

    def read(self, tx, obj):
        loc = tx.local
        if obj in loc["writes"]:
            return loc["writes"][obj]
        if obj in loc["reads"]:
            return loc["reads"][obj]
        if "snap" not in loc:
            c = yield ("clock", read())
            loc["snap"] = c // 2
        n = yield (f"{obj}.n", read())
        for i in range(n - 1, -1, -1):
            ts = yield (f"{obj}.ts.{i}", read())
            if ts <= loc["snap"]:
                v = yield (f"{obj}.val.{i}", read())
                loc["reads"][obj] = v
                return v
        raise TMError(f"no version of {obj} visible at {loc['snap']}")  # pragma: no cover

    def try_commit(self, tx):
        loc = tx.local
        if not loc["writes"]:
            return COMMIT
        c = yield ("clock", read())
        if c % 2:
            return ABORT
        ok = yield ("clock", cas(c, c + 1))
        if not ok:
            return ABORT
        for obj in sorted(loc["reads"]):
            n = yield (f"{obj}.n", read())
            ts = yield (f"{obj}.ts.{n - 1}", read())
            if ts > loc["snap"]:
                yield ("clock", write(c))
                return ABORT
        stamp = c // 2 + 1
        for obj in sorted(loc["writes"]):
            n = yield (f"{obj}.n", read())
            yield (f"{obj}.val.{n}", write(loc["writes"][obj]))
            yield (f"{obj}.ts.{n}", write(stamp))
            yield (f"{obj}.n", write(n + 1))
        yield ("clock", fai())
        return COMMIT

    @staticmethod
    def version_count(memory: Mapping[str, int], obj: str) -> int:
        return memory[f"{obj}.n"]


class VisibleReadTM(TM):
    """Single-version TM whose readers announce themselves per t-object.

    Cells per t-object X: ``X.val``, ``X.ver``, ``X.lock`` and one
    announcement counter ``X.ann.p`` per process (odd = a reader of p is
    active on X).  Writers lock their write set in ascending order, validate
    their reads, and abort if another process is announced on anything they
    write.  Every cell belongs to one t-object.
    """

    name = "visible-read"

    def initial_memory(self) -> dict[str, int]:
        mem = {}
        for x, v in self.objects.items():
            mem.update({f"{x}.val": v, f"{x}.ver": 0, f"{x}.lock": 0})
            for p in range(1, self.n_processes + 1):
                mem[f"{x}.ann.{p}"] = 0
        return mem

    def new_local(self) -> dict:
        return {"reads": {}, "writes": {}, "announced": []}

    def read(self, tx, obj):
        loc = tx.local
        if obj in loc["writes"]:
            return loc["writes"][obj]
        if obj in loc["reads"]:
            return loc["reads"][obj][0]
        yield (f"{obj}.ann.{tx.process}", faa(1))
        loc["announced"].append(obj)
        ver = yield (f"{obj}.ver", read())
        val = yield (f"{obj}.val", read())
        loc["reads"][obj] = (val, ver)
        return val

    def _withdraw(self, tx):
        for obj in tx.local["announced"]:
            yield (f"{obj}.ann.{tx.process}", faa(1))
        tx.local["announced"] = []

    def _release(self, locked):
        for obj in locked:
            yield (f"{obj}.lock", write(0))

    def try_commit(self, tx):
        loc = tx.local
        p = tx.process
        if not loc["writes"]:
            yield from self._withdraw(tx)
            return COMMIT
        locked = []
        for obj in sorted(loc["writes"]):
            ok = yield (f"{obj}.lock", cas(0, p))
            if not ok:
                yield from self._release(locked)
                yield from self._withdraw(tx)
                return ABORT
            locked.append(obj)
        valid = True
        for obj in sorted(loc["reads"]):
            if obj not in loc["writes"]:
                held = yield (f"{obj}.lock", read())
                if held:
                    valid = False
                    break
            ver = yield (f"{obj}.ver", read())
            if ver != loc["reads"][obj][1]:
                valid = False
                break
        if not valid:
            yield from self._release(locked)
            yield from self._withdraw(tx)
            return ABORT
        for obj in sorted(loc["writes"]):
            for q in range(1, self.n_processes + 1):
                if q == p:
                    continue
                a = yield (f"{obj}.ann.{q}", read())
                if a % 2:
                    yield from self._release(locked)
                    yield from self._withdraw(tx)
                    return ABORT
        for obj in sorted(loc["writes"]):
            yield (f"{obj}.val", write(loc["writes"][obj]))
            yield (f"{obj}.ver", fai())
            yield (f"{obj}.lock", write(0))
        yield from self._withdraw(tx)
        return COMMIT


class StrictDapAttemptTM(TM):
    """Per-object metadata only, trivial reads, no reader coordination.

    Strictly disjoint-access parallel and wait-free for readers by
    construction, which leaves strict serializability as the casualty.
    """

    name = "strict-dap-attempt"

    def initial_memory(self) -> dict[str, int]:
        mem = {}
        for x, v in self.objects.items():
            mem.update({f"{x}.val": v, f"{x}.ver": 0, f"{x}.lock": 0})
        return mem

    def read(self, tx, obj):
        loc = tx.local
        if obj in loc["writes"]:
            return loc["writes"][obj]
        if obj in loc["reads"]:
            return loc["reads"][obj][0]
        ver = yield (f"{obj}.ver", read())
        val = yield (f"{obj}.val", read())
        loc["reads"][obj] = (val, ver)
        return val

    def try_commit(self, tx):
        loc = tx.local
        if not loc["writes"]:
            return COMMIT
        locked = []
        for obj in sorted(loc["writes"]):
            ok = yield (f"{obj}.lock", cas(0, tx.process))
            if not ok:
                for o in locked:
                    yield (f"{o}.lock", write(0))
                return ABORT
            locked.append(obj)
        for obj in sorted(loc["reads"]):
            if obj not in loc["writes"]:
                held = yield (f"{obj}.lock", read())
            else:
                held = 0
            ver = yield (f"{obj}.ver", read())
            if held or ver != loc["reads"][obj][1]:
                for o in locked:
                    yield (f"{o}.lock", write(0))
                return ABORT
        for obj in sorted(loc["writes"]):
            yield (f"{obj}.val", write(loc["writes"][obj]))
            yield (f"{obj}.ver", fai())
            yield (f"{obj}.lock", write(0))
        return COMMIT


TMS = {cls.name: cls for cls in (MvInvisibleTM, VisibleReadTM, StrictDapAttemptTM)}


def mv_invisible_tm(objects=(), n_processes: int = 4) -> MvInvisibleTM:
    return MvInvisibleTM(objects, n_processes)


def visible_read_tm(objects=(), n_processes: int = 4) -> VisibleReadTM:
    return VisibleReadTM(objects, n_processes)


def strict_dap_attempt_tm(objects=(), n_processes: int = 4) -> StrictDapAttemptTM:
    return StrictDapAttemptTM(objects, n_processes)


def make_tm(name: str, objects=(), n_processes: int = 4) -> TM:
    try:
        return TMS[name](objects, n_processes)
    except KeyError:
        raise TMError(f"unknown TM {name!r}; choose from {', '.join(TMS)}") from None


# ---------------------------------------------------------------------------


@dataclass
class _Live:
    ctx: TxnContext
    status: str = "idle"  # idle | pending | committed | aborted
    op: Optional[TOp] = None
    gen: Optional[OpGen] = None
    request: Optional[Access] = None
    result: object = None
    steps: int = 0


class Machine:
    """Drives a TM: holds base-object memory and in-flight operations."""

    def __init__(self, tm: TM, step_budget: int = STEP_BUDGET):
        self.tm = tm
        self.memory = tm.initial_memory()
        self.initial = dict(self.memory)
        self.events: list = []
        self.txns: dict[str, _Live] = {}
        self.step_budget = step_budget

    # -- lifecycle

    def begin(self, txn: str, process: int) -> None:
        if txn in self.txns:
            raise TMError(f"transaction {txn} already started")
        if not 1 <= process <= self.tm.n_processes:
            raise TMError(f"no process {process}")
        for t in self.txns.values():
            if t.ctx.process == process and t.status in ("idle", "pending"):
                raise ProcessBusy(f"process {process} still runs {t.ctx.id}")
        self.txns[txn] = _Live(TxnContext(txn, process, self.tm.new_local()))

    def invoke(self, txn: str, op: TOp) -> TOpEvent:
        t = self._get(txn)
        if t.status != "idle":
            raise NotRunnable(f"{txn} is {t.status}")
        gen = self.tm.operation(t.ctx, op)
        t.op, t.status, t.steps = op, "pending", 0
        t.gen, t.request, t.result = gen, None, None
        ev = self._emit(TOpEvent(0, txn, "inv", op))
        self._advance(t, None, first=True)
        return ev

    def step(self, txn: str):
        """Apply the poised event of ``txn``: one RMW, or the op's response."""
        t = self._get(txn)
        if t.status != "pending":
            raise NotRunnable(f"{txn} has no operation in flight")
        t.steps += 1
        if t.steps > self.step_budget:
            raise StepBudgetExceeded(f"{txn}: {t.op} exceeded {self.step_budget} steps")
        if t.request is not None:
            base, prim = t.request
            if base not in self.memory:
                self.memory[base] = self.tm.initial_value(base)
                self.initial[base] = self.memory[base]
            old = self.memory[base]
            self.memory[base] = prim.update(old)
            resp = prim.respond(old)
            ev = self._emit(RmwEvent(0, txn, base, prim, resp))
            self._advance(t, resp)
            return ev
        ev = self._emit(TOpEvent(0, txn, "res", t.op, t.result))
        if t.result is ABORT:
            t.status = "aborted"
        elif t.result is COMMIT:
            t.status = "committed"
        else:
            t.status = "idle"
        t.op = t.gen = None
        return ev

    def finish(self, txn: str):
        """Step ``txn`` until its current operation responds; return the response."""
        while True:
            ev = self.step(txn)
            if isinstance(ev, TOpEvent):
                return ev.payload

    # -- inspection

    def poised(self, txn: str) -> Optional[Access]:
        """The (base, primitive) ``txn`` applies next, if it is one."""
        t = self.txns.get(txn)
        if t is None or t.status != "pending":
            return None
        return t.request

    def status(self, txn: str) -> str:
        return self._get(txn).status

    def live(self) -> list[str]:
        return [k for k, t in self.txns.items() if t.status in ("idle", "pending")]

    def process_of(self, txn: str) -> int:
        return self._get(txn).ctx.process

    def free_process(self) -> int:
        busy = {t.ctx.process for t in self.txns.values() if t.status in ("idle", "pending")}
        for p in range(1, self.tm.n_processes + 1):
            if p not in busy:
                return p
        raise ProcessBusy("all processes busy")

    def execution(self) -> Execution:
        return Execution(self.events, self.initial, self.tm.objects, validate=False)

    def configuration(self) -> Configuration:
        states = {
            k: {"status": "live" if t.status in ("idle", "pending") else t.status,
                "phase": t.status, "op": t.op, "steps": t.steps,
                "local": copy.deepcopy(t.ctx.local)}
            for k, t in self.txns.items()
        }
        return Configuration(dict(self.memory), states)

    # -- internals

    def _get(self, txn: str) -> _Live:
        try:
            return self.txns[txn]
        except KeyError:
            raise TMError(f"transaction {txn} not started") from None

    def _emit(self, ev):
        if isinstance(ev, RmwEvent):
            ev = RmwEvent(len(self.events), ev.txn, ev.base, ev.prim, ev.response)
        else:
            ev = TOpEvent(len(self.events), ev.txn, ev.kind, ev.op, ev.payload)
        self.events.append(ev)
        return ev

    def _advance(self, t: _Live, value, first: bool = False) -> None:
        gen = t.gen
        if not hasattr(gen, "send"):  # operation returned without yielding
            t.request, t.result = None, gen
            return
        try:
            t.request = next(gen) if first else gen.send(value)
        except StopIteration as stop:
            t.request, t.result = None, stop.value
