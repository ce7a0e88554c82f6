"""
A Qubit-shaped incident, through the command line
==================================================

The committed fixture holds 16 deposits of the zero-address token that were
never backed by a lock, plus 4 deposits backed by a far smaller lock, hidden
among ordinary traffic.  Offline analysis should flag all 20 as UDE.
"""

import json
import tempfile
from pathlib import Path

from bridgescope.cli import main

fixture = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "qubit"
args = ["analyze", str(fixture / "src.trace"), str(fixture / "dst.trace"),
        "--actions", str(fixture / "relayer.log"), "--config", str(fixture / "config.json")]

# table view for people
code = main(args + ["--format", "table"])
print("exit code:", code)

# the structured view ends with a summary record
out = Path(tempfile.mkdtemp()) / "qubit.report.jsonl"
main(args + ["-o", str(out)])
out_text = out.read_text()
out.unlink()
summary = json.loads(out_text.splitlines()[-1])
print(json.dumps(summary["counts"]), "in", len(summary["clusters"]), "cluster(s)")

# the two shapes are told apart by the failed conjunct
rows = [json.loads(line) for line in out_text.splitlines()[:-1]]
by_conjunct = {}
for r in rows:
    by_conjunct[r["failed_conjunct"]] = by_conjunct.get(r["failed_conjunct"], 0) + 1
print("by failed conjunct:", by_conjunct)
