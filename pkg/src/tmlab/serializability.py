"""Strict serializability by exhaustive search over completions and orders."""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .core import (ABORT, COMMIT, OK, History, MalformedExecution, TOpEvent, TRY_COMMIT,
                   check_well_formed, contention_predicates, real_time_precedes)

DEFAULT_MAX_TXNS = 10
DEFAULT_MAX_ORDERS = 10**6


@dataclass
class Completion:
    history: History
    decisions: list = field(default_factory=list)  # (txn, action) pairs


@dataclass
class SerializationVerdict:
    outcome: str  # serializable | not-serializable | bound-exceeded
    witness: Optional[History] = None
    order: tuple = ()
    completion: Optional[Completion] = None
    completions: int = 0
    orders: int = 0

    @property
    def serializable(self) -> bool:
        return self.outcome == "serializable"

    def report(self) -> str:
        lines = [f"VERDICT {self.outcome}"]
        if self.serializable:
            lines.append("WITNESS " + " ".join(self.order))
        else:
            lines.append(f"EXHAUSTED completions={self.completions} orders={self.orders}")
        return "\n".join(lines) + "\n"


def enumerate_completions(H: History) -> Iterator[Completion]:
    """Every completion of H, insertions placed at the end of the history.

    Pending reads and writes abort; a pending tryC branches commit-first;
    complete transactions that are not t-complete get ``tryC . A`` appended.
    """
    recs = H.records
    fixed: list = []
    branching: list[str] = []
    for k, r in recs.items():
        if r.t_complete:
            continue
        if r.pending is None:
            fixed.append((k, "tryC-abort"))
        elif r.pending.kind == "tryC":
            branching.append(k)
        else:
            fixed.append((k, "abort-pending"))
    for choice in itertools.product((COMMIT, ABORT), repeat=len(branching)):
        extra: list[TOpEvent] = []
        decisions = []
        for k, action in fixed:
            if action == "abort-pending":
                extra.append(TOpEvent(0, k, "res", recs[k].pending, ABORT))
            else:
                extra.append(TOpEvent(0, k, "inv", TRY_COMMIT))
                extra.append(TOpEvent(0, k, "res", TRY_COMMIT, ABORT))
            decisions.append((k, action))
        for k, outcome in zip(branching, choice):
            extra.append(TOpEvent(0, k, "res", TRY_COMMIT, outcome))
            decisions.append((k, "commit" if outcome is COMMIT else "abort"))
        yield Completion(History(list(H.events) + extra, H.initial), decisions)


def committed_projection(Hbar: History) -> History:
    recs = Hbar.records
    if not all(r.t_complete for r in recs.values()):
        raise MalformedExecution("committed projection needs a t-complete history")
    keep = {k for k, r in recs.items() if r.status == "committed"}
    return History([e for e in Hbar.events if e.txn in keep], Hbar.initial)


def equivalent(H1: History, H2: History) -> bool:
    if set(H1.txns) != set(H2.txns):
        return False
    return all(_ops(H1, k) == _ops(H2, k) for k in H1.txns)


def _ops(H: History, k: str) -> list:
    return [(e.kind, e.op, e.payload) for e in H.events if e.txn == k]


def latest_written_value(S: History, index: int) -> int:
    """Latest written value for the read whose response sits at ``index`` of S."""
    target = S.events[index]
    k, obj = target.txn, target.op.obj
    own = None
    for e in S.events[:index]:
        if e.txn == k and e.is_inv and e.op.kind == "write" and e.op.obj == obj:
            own = e.op.value
    if own is not None:
        return own
    recs = S.records
    value = S.initial_value(obj)
    first_k = recs[k].first
    # committed writers preceding T_k, in t-sequential order
    for e in S.events[:first_k]:
        if (e.is_inv and e.op.kind == "write" and e.op.obj == obj
                and recs[e.txn].status == "committed"):
            value = e.op.value
    return value


def is_legal_tsequential(S: History) -> bool:
    if not contention_predicates(S).is_t_sequential:
        raise MalformedExecution("legality is defined for t-sequential histories")
    for i, e in enumerate(S.events):
        if e.kind == "res" and e.op.kind == "read" and e.payload is not ABORT:
            if e.payload != latest_written_value(S, i):
                return False
    return True


class _Bound(Exception):
    pass


def txn_sort_key(k: str) -> tuple:
    """Order ids like T2 < T10."""
    return tuple(int(p) if p.isdigit() else p for p in re.split(r"(\d+)", k))


def check_strict_serializability(H: History, max_txns: int = DEFAULT_MAX_TXNS,
                                 max_orders: int = DEFAULT_MAX_ORDERS) -> SerializationVerdict:
    """Search for a serialization of H.

    Orders of committed transactions are built depth-first in lexicographic
    transaction-id order, extending the real-time order; a branch is cut as
    soon as an appended transaction reads a value other than the latest one.
    ``orders`` counts explored search nodes.
    """
    check_well_formed(H.events)
    txns = H.txns
    if len(txns) > max_txns:
        return SerializationVerdict("bound-exceeded")
    preds = {b: {a for a in txns if a != b and real_time_precedes(H, a, b)} for b in txns}
    verdict = SerializationVerdict("not-serializable")
    for comp in enumerate_completions(H):
        verdict.completions += 1
        cs = committed_projection(comp.history)
        committed = sorted(cs.txns, key=txn_sort_key)
        ops = {k: _ops(cs, k) for k in committed}
        try:
            order = _search(committed, ops, preds, H.initial, verdict, max_orders)
        except _Bound:
            return SerializationVerdict("bound-exceeded", completions=verdict.completions,
                                        orders=verdict.orders)
        if order is not None:
            events = [TOpEvent(0, k, kind, op, payload)
                      for k in order for kind, op, payload in ops[k]]
            verdict.outcome = "serializable"
            verdict.order = tuple(order)
            verdict.witness = History(events, H.initial)
            verdict.completion = comp
            return verdict
    return verdict


def _run_txn(ops: list, state: dict, initial: dict) -> Optional[dict]:
    """Apply one committed transaction; None if a read is not legal."""
    local: dict = {}
    for kind, op, payload in ops:
        if kind != "res":
            continue
        if op.kind == "read" and payload is not ABORT:
            expect = local.get(op.obj, state.get(op.obj, initial.get(op.obj, 0)))
            if payload != expect:
                return None
        elif op.kind == "write" and payload is OK:
            local[op.obj] = op.value
    new = dict(state)
    new.update(local)
    return new


def _search(committed, ops, preds, initial, verdict, max_orders):
    placed: list[str] = []
    done: set = set()
    cset = set(committed)
    dead: set = set()

    def dfs(state):
        if len(placed) == len(committed):
            return list(placed)
        key = (frozenset(done), frozenset(state.items()))
        if key in dead:
            return None
        for k in committed:
            if k in done or not (preds[k] & cset) <= done:
                continue
            verdict.orders += 1
            if verdict.orders > max_orders:
                raise _Bound
            new = _run_txn(ops[k], state, initial)
            if new is None:
                continue
            placed.append(k)
            done.add(k)
            found = dfs(new)
            if found is not None:
                return found
            placed.pop()
            done.discard(k)
        dead.add(key)
        return None

    return dfs({})


def check_witness(H: History, verdict: SerializationVerdict) -> bool:
    """Soundness check for a returned witness."""
    S = verdict.witness
    if S is None or verdict.completion is None:
        return False
    if not contention_predicates(S).is_t_sequential or not is_legal_tsequential(S):
        return False
    if not equivalent(S, committed_projection(verdict.completion.history)):
        return False
    pos = {k: i for i, k in enumerate(verdict.order)}
    for a in pos:
        for b in pos:
            if a != b and real_time_precedes(H, a, b) and pos[a] > pos[b]:
                return False
    return True

