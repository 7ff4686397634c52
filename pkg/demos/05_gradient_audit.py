"""Finite-difference audit of every differentiable op and the full network.

Each case is run in double precision with central differences; the
reported number is the worst per-coordinate relative error.
"""

from hrec.audit import TOLERANCE, run_audit

worst = run_audit(seeds=[0])
for name, err in worst.items():
    flag = "ok" if err <= TOLERANCE else "FAIL"
    print(f"{name:24s} {err:.2e}  {flag}")
