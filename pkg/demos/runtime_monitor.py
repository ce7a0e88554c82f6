"""
Screening unlocks before the relayer sends them
================================================

The runtime monitor receives each pending unlock together with the events the
relayer predicts it will emit.  Anything suspicious, and anything it cannot
evaluate, is aborted.
"""

import tempfile
from dataclasses import replace
from pathlib import Path

from bridgescope.monitor import (
    DecisionLog, Monitor, encode_request, pending_from_sequence, replay,
)
from bridgescope.sequences import sequences_for
from bridgescope.simulator import ScenarioSpec, Simulator

# one honest transfer and one where the attacker redirects the payout
sim = Simulator(ScenarioSpec(seed=3))
honest = sim.gen_benign()
attack = sim.inject("UU", "redirected")
labeled = sim.finish()
seqs = sequences_for(labeled.dataset())

log_path = Path(tempfile.mkdtemp()) / "decisions.log"
monitor = Monitor(labeled.config, log_=DecisionLog(log_path))

for seq in seqs:
    d = monitor.screen(pending_from_sequence(seq), seq.key[:18])
    print(d.verdict.value, [(v.bug.value, v.failed_conjunct) for v in d.violations])

# submitting the honest unlock twice is refused the second time
honest_seq = next(s for s in seqs if s.key == honest.key)
again = monitor.screen(pending_from_sequence(honest_seq), "resubmit")
print("resubmission:", again.verdict.value, "-", again.error)

# a prediction paying ten times the authorized amount is aborted too
p = pending_from_sequence(honest_seq)
inflated = replace(p.predicted_events[0], amount=p.predicted_events[0].amount * 10)
print("inflated payout:", Monitor(labeled.config).screen(replace(p, predicted_events=(inflated,)))
      .verdict.value)

# garbage on the wire fails closed
print("garbage:", monitor.screen_line("not a request").verdict.value)

# the decision log replays to identical decisions
pairs = list(replay(DecisionLog.load(log_path), labeled.config))
print("replayed", len(pairs), "decisions; identical:", all(a == b for a, b in pairs))
print("request wire format:", encode_request(p, "demo")[:120], "...")
