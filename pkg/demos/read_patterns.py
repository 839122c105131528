"""Count the expensive synchronization patterns a long reader has to issue.

T0 reads X1..Xm while writers commit new values around it.  For a TM whose
metadata is confined to the objects a transaction touches, every read (bar
the last) needs a read-after-write or an atomic write-after-read.

    python3 demos/read_patterns.py
"""
from tmlab.analysis import pattern_report
from tmlab.core import t_read
from tmlab.harness import Runner, scenario_theorem3
from tmlab.tms import make_tm

for m in (4, 8, 16):
    rep = scenario_theorem3("visible-read", m)
    swept = rep.data["swept"]
    print(f"m={m:2d}: {len(swept)} runs, min patterns in the swept read {min(swept.values())}, "
          f"checks {'pass' if rep.ok else 'FAIL'}")

# Same reads on the multi-version TM: no patterns at all, which it pays for
# by sharing a global clock between unrelated writers.
r = Runner(make_tm("mv-invisible", [f"X{i}" for i in range(1, 5)]))
r.run_txn("T0", [t_read(f"X{i}") for i in range(1, 5)])
print()
print("mv-invisible solo reader:", pattern_report(r.execution()).lines()[-1])
