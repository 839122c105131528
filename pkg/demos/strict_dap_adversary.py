"""The adversarial schedule against transactions that never share metadata.

The writer T1 is run solo up to the last step after which nobody can tell it
wrote anything.  Readers and an unrelated writer are then slotted in around
its next step.  Something has to give: a reader aborts, two transactions with
disjoint data sets touch the same base object, or the history stops being
strictly serializable.

    python3 demos/strict_dap_adversary.py
"""
from tmlab.core import format_history
from tmlab.harness import scenario_theorem2

for tm in ("strict-dap-attempt", "mv-invisible", "visible-read"):
    rep = scenario_theorem2(tm)
    print(f"{tm:20s} prefix={rep.data['prefix']:2d}/{rep.data['pi_length']:2d} "
          f"branch={rep.data['branch']} fired={rep.data['disjuncts']}")

rep = scenario_theorem2("strict-dap-attempt")
print()
print("history of the strict-dap-attempt run:")
print(format_history(rep.runs[0][1].execution.history()))
