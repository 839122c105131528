"""Structural predicates over executions.

RAW/AWAR detection, invisible-read scans, contention, strict and weak
disjoint-access parallelism, and conflict graphs.  Everything here is a pure
function of an :class:`~tmlab.core.Execution` (plus, for weak DAP, a table
of poised events per prefix).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import networkx as nx

from .core import (Execution, Primitive, RmwEvent, TMError, TOpEvent, TxnRecord,
                   check_well_formed, concurrent)


# ---------------------------------------------------------------------------
# RAW / AWAR


def _is_write(e) -> bool:
    return isinstance(e, RmwEvent) and not e.prim.trivial


def _is_read(e) -> bool:
    return isinstance(e, RmwEvent) and e.prim.reads


def find_raw(pi: Sequence, k: str) -> list[tuple[int, int]]:
    """Index pairs (i, j) of RAWs performed by ``k`` in the fragment ``pi``.

    ``pi[i]`` writes some b, ``pi[j]`` reads some b' != b, and ``k`` does
    not write b' strictly between them.  Indices are positions in ``pi``.
    """
    mine = [i for i, e in enumerate(pi) if e.txn == k and isinstance(e, RmwEvent)]
    pairs = []
    for a, i in enumerate(mine):
        if not _is_write(pi[i]):
            continue
        b = pi[i].base
        written = set()
        for j in mine[a + 1:]:
            e = pi[j]
            if _is_read(e) and e.base != b and e.base not in written:
                pairs.append((i, j))
            if _is_write(e):
                written.add(e.base)
    return pairs


def find_awar(pi: Sequence, k: str) -> list[int]:
    return [i for i, e in enumerate(pi)
            if e.txn == k and isinstance(e, RmwEvent) and e.prim.awar]


@dataclass
class OpPatterns:
    op: str
    ordinal: int
    raws: list = field(default_factory=list)  # (i, j, b, b') with execution positions
    awars: list = field(default_factory=list)  # (i, b)

    @property
    def count(self) -> int:
        return len(self.raws) + len(self.awars)

    @property
    def label(self) -> str:
        return f"{self.ordinal}:{self.op}"


@dataclass
class TxnPatterns:
    txn: str
    raws: list = field(default_factory=list)
    awars: list = field(default_factory=list)
    ops: list = field(default_factory=list)  # OpPatterns, one per t-operation

    @property
    def total(self) -> int:
        return len(self.raws) + len(self.awars)


@dataclass
class PatternReport:
    txns: dict = field(default_factory=dict)

    def __getitem__(self, k: str) -> TxnPatterns:
        return self.txns[k]

    @property
    def total(self) -> int:
        return sum(t.total for t in self.txns.values())

    def lines(self) -> list[str]:
        out = []
        for t in self.txns.values():
            for o in t.ops:
                for i, j, b, b2 in o.raws:
                    out.append(f"RAW {t.txn} {o.label} {i} {j} {b} {b2}")
                for i, b in o.awars:
                    out.append(f"AWAR {t.txn} {o.label} {i} {b}")
            out.append(f"PATTERNS {t.txn} raw={len(t.raws)} awar={len(t.awars)}")
        return out


def pattern_report(E: Execution) -> PatternReport:
    """RAWs/AWARs per transaction over E|k, and per t-operation fragment."""
    report = PatternReport()
    for k in E.txns:
        proj = E.project(k)
        tp = TxnPatterns(k)
        tp.raws = [(proj[i].seq, proj[j].seq, proj[i].base, proj[j].base) for i, j in find_raw(proj, k)]
        tp.awars = [(proj[i].seq, proj[i].base) for i in find_awar(proj, k)]
        for n, (op, positions) in enumerate(E.op_spans(k)):
            frag = [E.events[p] for p in positions]
            op_pat = OpPatterns(str(op), n)
            op_pat.raws = [(frag[i].seq, frag[j].seq, frag[i].base, frag[j].base) for i, j in find_raw(frag, k)]
            op_pat.awars = [(frag[i].seq, frag[i].base) for i in find_awar(frag, k)]
            tp.ops.append(op_pat)
        report.txns[k] = tp
    return report


# ---------------------------------------------------------------------------
# Invisible reads and contention


def invisible_reads_violations(E: Execution) -> list[tuple[str, int]]:
    recs = E.records
    return [(e.txn, e.seq) for e in E.events
            if isinstance(e, RmwEvent) and not e.trivial and recs[e.txn].read_only]


def contentions(E: Execution) -> list[tuple[int, int, str]]:
    by_base: dict[str, list[RmwEvent]] = {}
    for e in E.events:
        if isinstance(e, RmwEvent):
            by_base.setdefault(e.base, []).append(e)
    out = []
    for b, evs in by_base.items():
        for e1, e2 in itertools.combinations(evs, 2):
            if e1.txn != e2.txn and not (e1.trivial and e2.trivial):
                out.append((e1.seq, e2.seq, b))
    return sorted(out)


@dataclass(frozen=True)
class DapViolation:
    kind: str  # strict | weak
    t1: str
    t2: str
    base: str
    where: tuple  # (i, j) event positions (strict) or (prefix,) (weak)
    evidence: str

    def line(self) -> str:
        if self.kind == "strict":
            return f"SDAP-VIOLATION {self.t1} {self.t2} {self.base} {self.where[0]} {self.where[1]}"
        return f"WDAP-VIOLATION {self.where[0]} {self.t1} {self.t2} {self.base}"


def check_strict_dap(E: Execution) -> list[DapViolation]:
    recs = E.records
    out = []
    for i, j, b in contentions(E):
        t1, t2 = E.events[i].txn, E.events[j].txn
        d1, d2 = recs[t1].current_dset(), recs[t2].current_dset()
        if not (d1 & d2):
            out.append(DapViolation("strict", t1, t2, b, (i, j),
                                    f"Dset({t1})={sorted(d1)} Dset({t2})={sorted(d2)}"))
    return out


# ---------------------------------------------------------------------------
# Conflict graph and weak DAP


@dataclass
class ConflictGraph:
    graph: nx.Graph
    tau: set

    @property
    def vertices(self) -> set:
        return set(self.graph.nodes)

    @property
    def edges(self) -> set:
        return {frozenset(e) for e in self.graph.edges}


def _dsets(E, recs: Mapping[str, TxnRecord], in_flight: bool) -> dict[str, set]:
    return {k: (r.current_dset() if in_flight else r.dset) for k, r in recs.items()}


def conflict_graph(E, t1: str, t2: str, in_flight: bool = False) -> ConflictGraph:
    recs = check_well_formed(E.events)
    for t in (t1, t2):
        if t not in recs:
            raise TMError(f"unknown transaction {t}")
    dsets = _dsets(E, recs, in_flight)
    tau = {t1, t2} | {k for k in recs if concurrent(E, k, t1) or concurrent(E, k, t2)}
    g = nx.Graph()
    for k in tau:
        d = sorted(dsets[k])
        g.add_nodes_from(d)
        g.add_edges_from(itertools.combinations(d, 2))
    return ConflictGraph(g, tau)


def disjoint_access(E, t1: str, t2: str, in_flight: bool = False) -> bool:
    cg = conflict_graph(E, t1, t2, in_flight)
    recs = check_well_formed(E.events)
    d1 = recs[t1].current_dset() if in_flight else recs[t1].dset
    d2 = recs[t2].current_dset() if in_flight else recs[t2].dset
    if d1 & d2:
        return False
    reach = set()
    for x in d1:
        reach |= nx.node_connected_component(cg.graph, x)
    return not (reach & d2)


def check_weak_dap(execution: Execution, poised: Optional[Mapping[int, Mapping[str, tuple]]]) -> list[DapViolation]:
    """Pairs poised to contend while disjoint-access, at every prefix.

    ``poised[n]`` maps each live transaction to the ``(base, primitive)`` it
    is about to apply after the first ``n`` events.  Data sets of
    transactions in flight include the t-object of the current operation.
    """
    if poised is None:
        raise TMError("weak-DAP check needs a poised-event table")
    out = []
    for n in sorted(poised):
        table = poised[n]
        if len(table) < 2:
            continue
        prefix = None
        for (ta, (ba, pa)), (tb, (bb, pb)) in itertools.combinations(sorted(table.items()), 2):
            if ba != bb or (pa.trivial and pb.trivial):
                continue
            if prefix is None:
                prefix = execution.prefix(n)
            recs = check_well_formed(prefix.events)
            if ta not in recs or tb not in recs:
                continue
            if recs[ta].current_dset() & recs[tb].current_dset():
                continue
            if disjoint_access(prefix, ta, tb, in_flight=True):
                out.append(DapViolation("weak", ta, tb, ba, (n,),
                                        f"{ta}:{pa} {tb}:{pb} disjoint-access"))
    return out


# ---------------------------------------------------------------------------
# Distinct values


def distinct_values_probe(runner, obj: str, readers: Iterable[str]) -> list:
    """Responses of ``read(obj)`` by each reader, run solo in turn on a clone.

    A reader that is live in the run is extended with the read; any other id
    starts a fresh read-only transaction.  Aborts raise ProbeAborted.
    """
    from .harness import ProbeAborted
    from .core import ABORT, t_read

    clone = runner.clone()
    out = []
    for r in readers:
        if r not in clone.machine.txns:
            clone.begin(r)
        v = clone.run_op(r, t_read(obj))
        if v is ABORT:
            raise ProbeAborted(f"{r} aborted reading {obj}")
        out.append(v)
    return out
