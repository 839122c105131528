"""Phased writers against invisible readers: watch the version lists grow.

Each phase commits a fresh value to every t-object while a read-only
transaction from every earlier phase is still live.  Since the readers are
invisible, the TM cannot tell which old values will still be asked for, so it
has to keep all of them.

    python3 demos/space_growth.py
"""
from tmlab.harness import scenario_theorem1

for c in (2, 4, 8):
    rep = scenario_theorem1("mv-invisible", c, 3)
    distinct = rep.data["distinct"]
    print(f"c={c}: distinct values per object {distinct}, all checks {'pass' if rep.ok else 'FAIL'}")

# A single-version TM cannot keep the old values around; the readers notice.
rep = scenario_theorem1("strict-dap-attempt", 3, 2)
print()
print("strict-dap-attempt, c=3:")
for line in rep.lines:
    if line.startswith(("READ ", "VERDICT")) and ("MISMATCH" in line or "VERDICT" in line):
        print("  " + line)
