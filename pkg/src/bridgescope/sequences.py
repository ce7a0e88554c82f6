"""Group raw records into traces and stitch traces and actions into execution sequences."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .config import BridgeConfig
from .errors import DuplicateEvent
from .ingest import RawRecord, apply_filters
from .model import (
    NATIVE,
    AssetId,
    DepositEvent,
    ExecutionSequence,
    LockAction,
    LockEvent,
    NativeTransfer,
    Trace,
    TxRef,
    UnlockAction,
    UnlockEvent,
    asset_key,
)


def synthesize_native(t: NativeTransfer, cfg: BridgeConfig) -> LockEvent | UnlockEvent:
    """A native transfer paid out by a router is an unlock; any other is a lock.

    The synthesized event's emitter is the NATIVE marker, which is what makes the
    emitter-equals-asset check pass for base-coin transfers.
    """
    chain = t.tx.chain
    asset = AssetId(chain, NATIVE, cfg.native_symbol(chain))
    if cfg.is_router(t.sender):
        return UnlockEvent(t.tx, NATIVE, asset, t.amount, t.to, t.block)
    return LockEvent(t.tx, NATIVE, asset, t.amount, t.to, t.block)


def build_traces(records: Iterable[RawRecord], cfg: BridgeConfig | None = None) -> list[Trace]:
    """Group event records by transaction, ordered by log index.

    Action records are ignored.  Native transfers need ``cfg`` to be classified.
    """
    groups: dict[tuple[str, str], dict[int, object]] = {}
    for rec in records:
        st = rec.state
        if rec.kind == "native_transfer":
            if cfg is None:
                raise ValueError("native transfers need a config to identify routers")
            st = synthesize_native(st, cfg)
        elif rec.kind not in ("lock_event", "deposit_event", "unlock_event"):
            continue
        slot = groups.setdefault(st.tx.key, {})
        if st.tx.index in slot:
            raise DuplicateEvent(
                f"two events at {st.tx.chain}:{st.tx.hash} index {st.tx.index}"
            )
        slot[st.tx.index] = st
    traces = []
    for (chain, h), evs in groups.items():
        traces.append(Trace(TxRef(chain, h, 0), tuple(evs[i] for i in sorted(evs))))
    traces.sort(key=lambda t: (t.block, t.tx.chain, t.tx.hash))
    return traces


@dataclass
class Dataset:
    """Everything the property checks range over."""

    traces: list[Trace] = field(default_factory=list)
    lock_actions: list[LockAction] = field(default_factory=list)
    unlock_actions: list[UnlockAction] = field(default_factory=list)
    dropped: int = 0

    @property
    def unlock_events(self) -> list[UnlockEvent]:
        return [e for t in self.traces for e in t.unlock_events]

    def __len__(self) -> int:
        return (sum(len(t.events) for t in self.traces)
                + len(self.lock_actions) + len(self.unlock_actions))


def assemble(records: Iterable[RawRecord], cfg: BridgeConfig) -> Dataset:
    """Filter records, build traces and collect actions in input order."""
    filtered = apply_filters(records, cfg)
    recs = filtered.records
    ds = Dataset(build_traces(recs, cfg), dropped=filtered.dropped)
    for rec in recs:
        if rec.kind == "lock_action":
            ds.lock_actions.append(rec.state)
        elif rec.kind == "unlock_action":
            ds.unlock_actions.append(rec.state)
    return ds


def _unlock_event_order(e: UnlockEvent) -> tuple:
    return (e.block, e.tx.chain, e.tx.hash, e.tx.index)


def unlock_match_key(state) -> tuple:
    if isinstance(state, UnlockAction):
        return (state.dest_chain, asset_key(state.asset_dst), state.to_dst, state.amount_dst)
    return (state.tx.chain, asset_key(state.asset), state.to, state.amount)


def correlate(
    traces: Iterable[Trace],
    lock_actions: Iterable[LockAction],
    unlock_actions: Iterable[UnlockAction],
    unlock_events: Iterable[UnlockEvent],
) -> list[ExecutionSequence]:
    """Stitch states into execution sequences; anything unmatched becomes a partial sequence.

    List position is the ordinal used to break ties between identical unlock actions.
    Each unlock action is consumed by at most one unlock event.
    """
    traces = list(traces)
    by_tx = {t.tx.key: t for t in traces}
    slots: list[dict] = []
    by_lock_ref: dict[TxRef, list[dict]] = {}
    claimed: set[TxRef] = set()

    def new_slot(trace: Trace | None, **kw) -> dict:
        slot = dict(lock_events=trace.lock_events if trace else (), source_trace=trace,
                    deposit_event=None, lock_action=None, unlock_action=None, unlock_event=None)
        slot.update(kw)
        slots.append(slot)
        return slot

    for a in lock_actions:
        trace = by_tx.get(a.tx.key)
        dep = None
        if trace is not None:
            dep = next((d for d in trace.deposit_events if d.tx.index == a.tx.index), None)
            if dep is not None:
                claimed.add(dep.tx)
        slot = new_slot(trace, deposit_event=dep, lock_action=a)
        by_lock_ref.setdefault(a.tx, []).append(slot)

    for trace in traces:
        for dep in trace.deposit_events:
            if dep.tx not in claimed:
                by_lock_ref.setdefault(dep.tx, []).append(new_slot(trace, deposit_event=dep))

    pending: dict[tuple, list[tuple[int, dict]]] = {}
    for ordinal, aun in enumerate(unlock_actions):
        slot = next((s for s in by_lock_ref.get(aun.src_tx, ()) if s["unlock_action"] is None), None)
        if slot is None:
            slot = new_slot(by_tx.get(aun.src_tx.key))
        slot["unlock_action"] = aun
        pending.setdefault(unlock_match_key(aun), []).append((ordinal, slot))

    for e in sorted(unlock_events, key=_unlock_event_order):
        queue = pending.get(unlock_match_key(e))
        if queue:
            _, slot = queue.pop(0)  # lowest ordinal: queues are filled in ordinal order
            slot["unlock_event"] = e
        else:
            new_slot(None, unlock_event=e)

    seqs = [ExecutionSequence(**s) for s in slots]
    seqs.sort(key=_sequence_order)
    return seqs


def _sequence_order(s: ExecutionSequence) -> tuple:
    lk = s.lock_action.tx.index if s.lock_action else -1
    dep = s.deposit_event.tx.index if s.deposit_event else -1
    ue = s.unlock_event.key if s.unlock_event else ""
    return (s.key, lk, dep, ue)


def sequences_for(ds: Dataset) -> list[ExecutionSequence]:
    return correlate(ds.traces, ds.lock_actions, ds.unlock_actions, ds.unlock_events)
