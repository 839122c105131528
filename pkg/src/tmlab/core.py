"""Executions of a TM implementation over shared base objects.

Base objects hold integers and are touched only through read-modify-write
primitives.  An execution is a sequence of RMW events interleaved with the
invocations and responses of transactional operations; a history is the
latter subsequence alone.
"""
from __future__ import annotations

import copy
import enum
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union


class TMError(Exception):
    """Base class for errors raised by this package."""


class MalformedExecution(TMError):
    pass


class ReplayMismatch(TMError):
    pass


class UnknownBaseObject(TMError):
    pass


class UnknownPrimitive(TMError):
    pass


class UnknownTransaction(TMError):
    pass


class StaleSnapshot(TMError):
    pass


class Marker(enum.Enum):
    """Reserved responses, disjoint from the integer value domain."""

    OK = "ok"
    ABORT = "A"
    COMMIT = "C"

    def __str__(self) -> str:
        return self.value


OK = Marker.OK
ABORT = Marker.ABORT
COMMIT = Marker.COMMIT

Value = Union[int, Marker]


def format_value(v: Value) -> str:
    return str(v)


def parse_value(text: str) -> Value:
    for m in Marker:
        if text == m.value:
            return m
    try:
        return int(text)
    except ValueError:
        raise ValueError(f"not a value: {text!r}") from None


# ---------------------------------------------------------------------------
# Primitives

_ARITY = {"read": 0, "write": 1, "cas": 2, "fai": 0, "faa": 1}


@dataclass(frozen=True)
class Primitive:
    """An RMW primitive with bound arguments.

    ``update`` is the state transition and ``respond`` the value handed
    back to the caller; both are functions of the pre-state only.
    """

    name: str
    args: tuple = ()

    def __post_init__(self) -> None:
        if self.name not in _ARITY:
            raise UnknownPrimitive(self.name)
        if len(self.args) != _ARITY[self.name]:
            raise UnknownPrimitive(f"{self.name} takes {_ARITY[self.name]} argument(s)")

    def update(self, state: int) -> int:
        if self.name == "read":
            return state
        if self.name == "write":
            return self.args[0]
        if self.name == "cas":
            expected, new = self.args
            return new if state == expected else state
        if self.name == "fai":
            return state + 1
        return state + self.args[0]

    def respond(self, state: int) -> Value:
        if self.name == "write":
            return OK
        if self.name == "cas":
            return int(state == self.args[0])
        return state

    @property
    def trivial(self) -> bool:
        return is_trivial(self)

    @property
    def reads(self) -> bool:
        """True if the response depends on the pre-state."""
        return self.name != "write"

    @property
    def awar(self) -> bool:
        """Nontrivial and reading: one atomic read-then-write of the same object."""
        return self.reads and not self.trivial

    def __str__(self) -> str:
        return f"{self.name}({','.join(str(a) for a in self.args)})"


def read() -> Primitive:
    return Primitive("read")


def write(v: int) -> Primitive:
    return Primitive("write", (v,))


def cas(expected: int, new: int) -> Primitive:
    return Primitive("cas", (expected, new))


def fai() -> Primitive:
    return Primitive("fai")


def faa(delta: int) -> Primitive:
    return Primitive("faa", (delta,))


def is_trivial(prim: Primitive) -> bool:
    """Closed form of "update(s) == s for every state s"."""
    if prim.name == "read":
        return True
    if prim.name == "cas":
        return prim.args[0] == prim.args[1]
    if prim.name == "faa":
        return prim.args[0] == 0
    return False


def parse_primitive(text: str) -> Primitive:
    text = text.strip()
    if not text.endswith(")") or "(" not in text:
        raise UnknownPrimitive(text)
    name, _, rest = text.partition("(")
    body = rest[:-1].strip()
    try:
        args = tuple(int(a) for a in body.split(",")) if body else ()
    except ValueError:
        raise UnknownPrimitive(text) from None
    return Primitive(name, args)


# ---------------------------------------------------------------------------
# Transactional operations and events


@dataclass(frozen=True)
class TOp:
    kind: str  # "read" | "write" | "tryC"
    obj: Optional[str] = None
    value: Optional[int] = None

    def __str__(self) -> str:
        if self.kind == "read":
            return f"read({self.obj})"
        if self.kind == "write":
            return f"write({self.obj},{self.value})"
        return "tryC()"


def t_read(obj: str) -> TOp:
    return TOp("read", obj)


def t_write(obj: str, value: int) -> TOp:
    return TOp("write", obj, value)


TRY_COMMIT = TOp("tryC")


def parse_top(text: str) -> TOp:
    text = text.strip()
    if text == "tryC()" or text == "tryC":
        return TRY_COMMIT
    name, _, rest = text.partition("(")
    if not rest.endswith(")"):
        raise ValueError(f"bad t-operation: {text!r}")
    args = [a.strip() for a in rest[:-1].split(",")]
    if name == "read" and len(args) == 1 and args[0]:
        return t_read(args[0])
    if name == "write" and len(args) == 2:
        return t_write(args[0], int(args[1]))
    raise ValueError(f"bad t-operation: {text!r}")


@dataclass(frozen=True)
class RmwEvent:
    seq: int
    txn: str
    base: str
    prim: Primitive
    response: Value

    @property
    def trivial(self) -> bool:
        return self.prim.trivial

    def __str__(self) -> str:
        return f"RMW {self.txn} {self.base} {self.prim} -> {self.response}"


@dataclass(frozen=True)
class TOpEvent:
    seq: int
    txn: str
    kind: str  # "inv" | "res"
    op: TOp
    payload: Optional[Value] = None

    @property
    def is_inv(self) -> bool:
        return self.kind == "inv"

    def __str__(self) -> str:
        if self.kind == "inv":
            return f"INV {self.txn} {self.op}"
        return f"RES {self.txn} {self.op} -> {self.payload}"


Event = Union[RmwEvent, TOpEvent]


def _renumber(events: Iterable[Event]) -> list:
    return [e if e.seq == i else _with_seq(e, i) for i, e in enumerate(events)]


def _with_seq(e: Event, seq: int) -> Event:
    if isinstance(e, RmwEvent):
        return RmwEvent(seq, e.txn, e.base, e.prim, e.response)
    return TOpEvent(seq, e.txn, e.kind, e.op, e.payload)


# ---------------------------------------------------------------------------
# Per-transaction bookkeeping


@dataclass
class TxnRecord:
    id: str
    rset: set = field(default_factory=set)
    wset: set = field(default_factory=set)
    status: str = "complete"  # live | complete | committed | aborted
    first: int = -1
    last: int = -1
    pending: Optional[TOp] = None

    @property
    def dset(self) -> set:
        return self.rset | self.wset

    @property
    def read_only(self) -> bool:
        return not self.wset

    @property
    def updating(self) -> bool:
        return bool(self.wset)

    @property
    def write_only(self) -> bool:
        return bool(self.wset) and not self.rset

    @property
    def complete(self) -> bool:
        return self.status != "live"

    @property
    def t_complete(self) -> bool:
        return self.status in ("committed", "aborted")

    def current_dset(self) -> set:
        """Data set so far plus the t-object of the operation in flight."""
        d = self.dset
        if self.pending is not None and self.pending.obj is not None:
            d = d | {self.pending.obj}
        return d


def check_well_formed(events: Sequence[Event]) -> dict[str, TxnRecord]:
    """Validate per-transaction sequentiality; return the transaction records.

    Raises :class:`MalformedExecution` naming the offending position.
    """
    records: dict[str, TxnRecord] = {}
    for pos, e in enumerate(events):
        rec = records.get(e.txn)
        if rec is None:
            rec = records[e.txn] = TxnRecord(e.txn, first=pos)
        if rec.t_complete:
            raise MalformedExecution(f"event {pos}: {e.txn} has events after its commit/abort")
        rec.last = pos
        if isinstance(e, RmwEvent):
            if rec.pending is None:
                raise MalformedExecution(f"event {pos}: RMW of {e.txn} outside a t-operation")
            continue
        if e.is_inv:
            if rec.pending is not None:
                raise MalformedExecution(f"event {pos}: {e.txn} invokes while {rec.pending} is pending")
            rec.pending = e.op
            rec.status = "live"
            if e.op.kind == "read":
                rec.rset.add(e.op.obj)
            elif e.op.kind == "write":
                rec.wset.add(e.op.obj)
            continue
        if rec.pending != e.op:
            raise MalformedExecution(f"event {pos}: response to {e.op} without matching invocation")
        p = e.payload
        ok = (
            p is ABORT
            or (e.op.kind == "read" and isinstance(p, int) and not isinstance(p, bool))
            or (e.op.kind == "write" and p is OK)
            or (e.op.kind == "tryC" and p is COMMIT)
        )
        if not ok:
            raise MalformedExecution(f"event {pos}: {e.op} cannot return {p}")
        rec.pending = None
        if p is ABORT:
            rec.status = "aborted"
        elif p is COMMIT:
            rec.status = "committed"
        else:
            rec.status = "complete"
    return records


# ---------------------------------------------------------------------------
# Histories and executions


class _EventSeq:
    events: tuple

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def __getitem__(self, i):
        return self.events[i]

    @property
    def records(self) -> dict[str, TxnRecord]:
        if self._records is None:
            self._records = check_well_formed(self.events)
        return self._records

    @property
    def txns(self) -> list[str]:
        """Participating transactions in order of first appearance."""
        return list(self.records)

    def record(self, k: str) -> TxnRecord:
        try:
            return self.records[k]
        except KeyError:
            raise UnknownTransaction(k) from None

    def project(self, k: str) -> list[Event]:
        return project(self, k)


class History(_EventSeq):
    """A well-formed sequence of t-operation events."""

    def __init__(self, events: Iterable[TOpEvent] = (), initial: Optional[Mapping[str, int]] = None):
        evs = list(events)
        for e in evs:
            if not isinstance(e, TOpEvent):
                raise MalformedExecution("histories contain t-operation events only")
        self.events = tuple(_renumber(evs))
        self.initial = dict(initial or {})
        self._records = None
        check_well_formed(self.events)

    def __eq__(self, other) -> bool:
        return isinstance(other, History) and self.events == other.events and self.initial == other.initial

    def __repr__(self) -> str:
        return f"History({len(self.events)} events)"

    @property
    def objects(self) -> set:
        return {e.op.obj for e in self.events if e.op.obj is not None} | set(self.initial)

    def initial_value(self, obj: str) -> int:
        return self.initial.get(obj, 0)


class Execution(_EventSeq):
    """A validated execution: well-formed, and every RMW response matches replay.

    ``initial`` gives the initial value of every base object touched.
    """

    def __init__(self, events: Iterable[Event] = (), initial: Optional[Mapping[str, int]] = None,
                 t_initial: Optional[Mapping[str, int]] = None, validate: bool = True):
        self.events = tuple(_renumber(events))
        self.initial = dict(initial or {})
        self.t_initial = dict(t_initial or {})
        self._records = None
        if validate:
            check_well_formed(self.events)
            replay(self)

    def __eq__(self, other) -> bool:
        return (isinstance(other, Execution) and self.events == other.events
                and self.initial == other.initial)

    def __repr__(self) -> str:
        return f"Execution({len(self.events)} events)"

    def history(self) -> History:
        return export_history(self)

    def rmw_events(self) -> list[RmwEvent]:
        return [e for e in self.events if isinstance(e, RmwEvent)]

    def prefix(self, n: int) -> "Execution":
        return Execution(self.events[:n], self.initial, self.t_initial, validate=False)

    def op_spans(self, k: str) -> list[tuple[TOp, list[int]]]:
        """Each t-operation of ``k`` with the execution positions of its events."""
        spans: list[tuple[TOp, list[int]]] = []
        for e in self.events:
            if e.txn != k:
                continue
            if isinstance(e, TOpEvent) and e.is_inv:
                spans.append((e.op, [e.seq]))
            elif spans:
                spans[-1][1].append(e.seq)
        return spans


def project(E: _EventSeq, k: str) -> list[Event]:
    return [e for e in E.events if e.txn == k]


def export_history(E: Execution) -> History:
    check_well_formed(E.events)
    return History([e for e in E.events if isinstance(e, TOpEvent)], E.t_initial)


def replay(E: Execution) -> dict[str, int]:
    """Re-apply E's RMW events from its initial values; return final states."""
    memory = dict(E.initial)
    for e in E.events:
        if not isinstance(e, RmwEvent):
            continue
        if e.base not in memory:
            raise UnknownBaseObject(f"event {e.seq}: {e.base}")
        resp = e.prim.respond(memory[e.base])
        if resp != e.response or type(resp) is not type(e.response):
            raise ReplayMismatch(f"event {e.seq}: {e.prim} on {e.base} returns {resp}, trace says {e.response}")
        memory[e.base] = e.prim.update(memory[e.base])
    return memory


# ---------------------------------------------------------------------------
# Configurations


@dataclass
class Configuration:
    """Base-object states plus opaque TM-private transaction states."""

    memory: dict = field(default_factory=dict)
    txn_states: dict = field(default_factory=dict)

    def copy(self) -> "Configuration":
        return copy.deepcopy(self)

    def is_quiescent(self) -> bool:
        return all(s.get("status") != "live" for s in self.txn_states.values())

    def is_t_quiescent(self) -> bool:
        return all(s.get("status") in ("committed", "aborted") for s in self.txn_states.values())


def apply_primitive(config: Configuration, base: str, prim: Primitive, txn: str,
                    seq: int = 0) -> tuple[Configuration, RmwEvent]:
    if not isinstance(prim, Primitive):
        raise UnknownPrimitive(repr(prim))
    if base not in config.memory:
        raise UnknownBaseObject(base)
    old = config.memory[base]
    new = Configuration(dict(config.memory), config.txn_states)
    new.memory[base] = prim.update(old)
    return new, RmwEvent(seq, txn, base, prim, prim.respond(old))


class SnapshotStore:
    """Snapshot/restore of configurations by opaque integer token."""

    def __init__(self) -> None:
        self._saved: dict[int, Configuration] = {}
        self._ids = itertools.count(1)

    def snapshot(self, config: Configuration) -> int:
        token = next(self._ids)
        self._saved[token] = config.copy()
        return token

    def restore(self, token: int) -> Configuration:
        try:
            return self._saved[token].copy()
        except KeyError:
            raise StaleSnapshot(token) from None

    def discard(self, token: int) -> None:
        self._saved.pop(token, None)


# ---------------------------------------------------------------------------
# Order and contention predicates


def real_time_precedes(H: _EventSeq, a: str, b: str) -> bool:
    ra, rb = H.record(a), H.record(b)
    return ra.t_complete and ra.last < rb.first


def concurrent(H: _EventSeq, a: str, b: str) -> bool:
    return not real_time_precedes(H, a, b) and not real_time_precedes(H, b, a)


def is_step_contention_free(E: _EventSeq, txn: Optional[str] = None, op: Optional[int] = None) -> bool:
    """Whether the scoped events are contiguous in E.

    With no ``txn`` the check covers every participating transaction; ``op``
    selects the op-th t-operation of ``txn``.
    """
    if txn is None:
        return all(is_step_contention_free(E, k) for k in E.txns)
    positions = [i for i, e in enumerate(E.events) if e.txn == txn]
    if op is not None:
        spans = []
        for i in positions:
            e = E.events[i]
            if isinstance(e, TOpEvent) and e.is_inv:
                spans.append([])
            if spans:
                spans[-1].append(i)
        positions = spans[op] if op < len(spans) else []
    return all(b == a + 1 for a, b in zip(positions, positions[1:]))


@dataclass(frozen=True)
class ContentionFlags:
    is_quiescent: bool
    is_t_quiescent: bool
    is_complete: bool
    is_t_complete: bool
    is_sequential: bool
    is_t_sequential: bool


def contention_predicates(E: _EventSeq) -> ContentionFlags:
    recs = E.records
    complete = all(r.complete for r in recs.values())
    t_complete = all(r.t_complete for r in recs.values())
    tops = [e for e in E.events if isinstance(e, TOpEvent)]
    sequential = all(
        not e.is_inv or i == len(tops) - 1 or (not tops[i + 1].is_inv and tops[i + 1].txn == e.txn)
        for i, e in enumerate(tops)
    )
    ks = list(recs)
    t_sequential = all(not concurrent(E, a, b) for a, b in itertools.combinations(ks, 2))
    return ContentionFlags(complete, t_complete, complete, t_complete, sequential, t_sequential)


def contend(e1: RmwEvent, e2: RmwEvent) -> bool:
    return e1.base == e2.base and not (e1.trivial and e2.trivial)


# ---------------------------------------------------------------------------
# Text formats


class TraceParseError(TMError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def format_trace(E: Execution) -> str:
    lines = [f"INIT {b} {v}" for b, v in sorted(E.initial.items())]
    lines += [f"TINIT {x} {v}" for x, v in sorted(E.t_initial.items())]
    lines += [str(e) for e in E.events]
    return "\n".join(lines) + "\n"


def format_history(H: History) -> str:
    lines = [f"TINIT {x} {v}" for x, v in sorted(H.initial.items())]
    lines += [str(e) for e in H.events]
    return "\n".join(lines) + ("\n" if lines else "")


def _parse_lines(text: str, allow_rmw: bool):
    events: list[Event] = []
    initial: dict[str, int] = {}
    t_initial: dict[str, int] = {}
    line_of: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tag, _, rest = line.partition(" ")
        try:
            if tag in ("INIT", "TINIT"):
                name, val = rest.split()
                (initial if tag == "INIT" else t_initial)[name] = int(val)
                continue
            if tag == "RMW":
                if not allow_rmw:
                    raise ValueError("RMW events are not allowed in a history")
                lhs, arrow, resp = rest.rpartition(" -> ")
                if not arrow:
                    raise ValueError("missing ' -> '")
                txn, base, prim = lhs.split(None, 2)
                events.append(RmwEvent(len(events), txn, base, parse_primitive(prim), parse_value(resp.strip())))
            elif tag == "INV":
                txn, op = rest.split(None, 1)
                events.append(TOpEvent(len(events), txn, "inv", parse_top(op)))
            elif tag == "RES":
                lhs, arrow, resp = rest.rpartition(" -> ")
                if not arrow:
                    raise ValueError("missing ' -> '")
                txn, op = lhs.split(None, 1)
                events.append(TOpEvent(len(events), txn, "res", parse_top(op), parse_value(resp.strip())))
            else:
                raise ValueError(f"unknown record {tag!r}")
        except (ValueError, UnknownPrimitive) as exc:
            raise TraceParseError(lineno, str(exc)) from None
        line_of.append(lineno)
    return events, initial, t_initial, line_of


def _locate(exc: TMError, line_of: list[int]) -> TraceParseError:
    msg = str(exc)
    if msg.startswith("event "):
        idx = int(msg.split()[1].rstrip(":"))
        return TraceParseError(line_of[idx], msg)
    return TraceParseError(line_of[-1] if line_of else 0, msg)


def parse_history(text: str) -> History:
    events, _, t_initial, line_of = _parse_lines(text, allow_rmw=False)
    try:
        return History(events, t_initial)
    except MalformedExecution as exc:
        raise _locate(exc, line_of) from None


def parse_trace(text: str) -> Execution:
    events, initial, t_initial, line_of = _parse_lines(text, allow_rmw=True)
    try:
        return Execution(events, initial, t_initial)
    except (MalformedExecution, ReplayMismatch, UnknownBaseObject) as exc:
        raise _locate(exc, line_of) from None
