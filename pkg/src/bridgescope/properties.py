"""The three security patterns and their violations.

RD  every source transaction is valid             -> UDE (deposit without lock)
CP  every lock action is valid                    -> IEP (inconsistent event parsing)
AU  every unlock event is valid                   -> UU  (unauthorized unlocking)

By default a failure is reported only at its root: a lock action that fails
solely because its source transaction fails RD is not reported again under CP,
and an unlock that fails solely because its lock action is invalid is not
reported again under AU.  ``cascade=True`` reports every failing check.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .config import BridgeConfig, Matching
from .facts import (
    UPSTREAM_LOCK_ACTION,
    UPSTREAM_SOURCE_TX,
    FactVerdict,
    StatePool,
    v_lock_action,
    v_source_tx,
    v_unlock_event,
)
from .model import ExecutionSequence, LockAction, Trace, UnlockEvent
from .sequences import Dataset, correlate


class Property(enum.Enum):
    RD = "RD"
    CP = "CP"
    AU = "AU"


class Bug(enum.Enum):
    UDE = "UDE"
    IEP = "IEP"
    UU = "UU"


class Severity(enum.Enum):
    CONFIRMED = "confirmed"
    SUSPICIOUS = "suspicious"


BUG_OF = {Property.RD: Bug.UDE, Property.CP: Bug.IEP, Property.AU: Bug.UU}
_PROPERTY_ORDER = {Property.RD: 0, Property.CP: 1, Property.AU: 2}


@dataclass(frozen=True)
class Violation:
    property: Property
    key: str
    chain: str
    block: int
    tx: str
    verdict: FactVerdict = field(compare=False)
    severity: Severity = Severity.SUSPICIOUS
    sequence: ExecutionSequence | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.verdict.holds:
            raise ValueError("a violation needs a failing verdict")

    @property
    def bug(self) -> Bug:
        return BUG_OF[self.property]

    @property
    def failed_conjunct(self) -> str:
        return self.verdict.failed_conjunct

    def sort_key(self) -> tuple:
        return (self.block, self.tx, _PROPERTY_ORDER[self.property], self.key)

    def to_record(self) -> dict:
        addrs = sorted({a.hex for a in self.sequence.participants()}) if self.sequence else []
        return {
            "type": "violation",
            "property": self.property.value,
            "bug": self.bug.value,
            "key": self.key,
            "chain": self.chain,
            "block": self.block,
            "tx": self.tx,
            "fact": self.verdict.fact.value,
            "failed_conjunct": self.verdict.failed_conjunct,
            "severity": self.severity.value,
            "addresses": addrs,
        }


def check_rd(trace: Trace, cfg: BridgeConfig, matching: Matching | None = None) -> Violation | None:
    v = v_source_tx(trace, cfg, matching)
    if v.holds:
        return None
    return Violation(Property.RD, trace.key, trace.tx.chain, trace.block, trace.tx.hash, v)


def _cp(a: LockAction, trace: Trace | None, v: FactVerdict, cascade: bool) -> Violation | None:
    if v.holds or (not cascade and v.failed_conjunct == UPSTREAM_SOURCE_TX):
        return None
    block = a.block or (trace.block if trace is not None else 0)
    return Violation(Property.CP, a.key, a.tx.chain, block, a.tx.hash, v)


def check_cp(
    a: LockAction, trace: Trace | None, cfg: BridgeConfig, matching: Matching | None = None,
    *, cascade: bool = False,
) -> Violation | None:
    """IEP unless the action's only defect is an invalid source transaction (that is UDE)."""
    return _cp(a, trace, v_lock_action(a, trace, cfg, matching), cascade)


def check_au(
    e: UnlockEvent, pool: StatePool, cfg: BridgeConfig, matching: Matching | None = None,
    *, cascade: bool = False,
) -> Violation | None:
    v = v_unlock_event(e, pool, cfg, matching)
    if v.holds or (not cascade and v.failed_conjunct == UPSTREAM_LOCK_ACTION):
        return None
    return Violation(Property.AU, e.key, e.tx.chain, e.block, e.tx.hash, v)


def check_all(
    ds: Dataset,
    cfg: BridgeConfig,
    matching: Matching | None = None,
    *,
    cascade: bool = False,
    pool: StatePool | None = None,
) -> list[Violation]:
    """Run RD, CP and AU over a whole dataset.

    Output is deduplicated per (property, key) and sorted by first-seen block, then
    tx hash.  A violation whose sequence touches a blacklisted address is confirmed.
    """
    if pool is None:
        pool = StatePool(ds.traces, ds.lock_actions, ds.unlock_actions)
    found: dict[tuple, Violation] = {}

    def keep(v: Violation | None) -> None:
        if v is not None:
            found.setdefault((v.property, v.key), v)

    for trace in ds.traces:
        if trace.deposit_events:
            keep(check_rd(trace, cfg, matching))
    for a in pool.lock_actions():
        keep(_cp(a, pool.trace_for(a.tx), pool.lock_verdict(a, cfg, matching), cascade))
    for e in sorted(ds.unlock_events, key=lambda e: (e.tx.chain, e.tx.hash, e.tx.index)):
        keep(check_au(e, pool, cfg, matching, cascade=cascade))

    if not found:
        return []
    seqs = correlate(ds.traces, ds.lock_actions, ds.unlock_actions, ds.unlock_events)
    by_source: dict[str, ExecutionSequence] = {}
    by_unlock: dict[str, ExecutionSequence] = {}
    for s in seqs:
        by_source.setdefault(s.key, s)
        if s.unlock_event is not None:
            by_unlock[s.unlock_event.key] = s
    out = []
    for v in found.values():
        seq = by_unlock.get(v.key) if v.property is Property.AU else by_source.get(v.key)
        out.append(_with_sequence(v, seq, cfg))
    out.sort(key=Violation.sort_key)
    return out


def _with_sequence(v: Violation, seq: ExecutionSequence | None, cfg: BridgeConfig) -> Violation:
    severity = Severity.SUSPICIOUS
    if seq is not None and cfg.blacklist and seq.participants() & cfg.blacklist:
        severity = Severity.CONFIRMED
    return Violation(v.property, v.key, v.chain, v.block, v.tx, v.verdict, severity, seq)


def attach_sequence(v: Violation, seq: ExecutionSequence | None, cfg: BridgeConfig) -> Violation:
    return _with_sequence(v, seq, cfg)
