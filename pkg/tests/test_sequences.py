import random

import pytest

from bridgescope.errors import DuplicateEvent
from bridgescope.ingest import RawRecord, kind_of
from bridgescope.model import NATIVE, LockEvent, NativeTransfer, TxRef, UnlockEvent
from bridgescope.sequences import assemble, build_traces, correlate, sequences_for

from helpers import CFG, DST, ROUTER_D, ROUTER_S, SRC, addr, benign, deposit, lock, txh, unlock_event


def recs(*states):
    return [RawRecord(kind_of(s), s, i) for i, s in enumerate(states)]


def test_grouping_by_transaction():
    traces = build_traces(recs(lock(1, 0), deposit(1, 1), deposit(2, 4)))
    assert sorted(len(t.events) for t in traces) == [1, 2]


def test_events_sorted_by_index():
    (t,) = build_traces(recs(deposit(1, 3), lock(1, 1)))
    assert [e.tx.index for e in t.events] == [1, 3]


def test_native_transfer_to_router_becomes_lock():
    nt = NativeTransfer(TxRef(SRC, txh(9), 0), addr(SRC, 0x11), 5, ROUTER_S)
    (t,) = build_traces(recs(nt), CFG)
    (ev,) = t.events
    assert isinstance(ev, LockEvent)
    assert ev.asset.contract is NATIVE and ev.amount == 5 and ev.to == ROUTER_S
    assert ev.asset.symbol == "ETH"


def test_native_transfer_from_router_becomes_unlock():
    nt = NativeTransfer(TxRef(DST, txh(9), 0), ROUTER_D, 5, addr(DST, 0x11))
    (t,) = build_traces(recs(nt), CFG)
    assert isinstance(t.events[0], UnlockEvent) and t.events[0].sc is NATIVE


def test_duplicate_event():
    with pytest.raises(DuplicateEvent):
        build_traces(recs(lock(1, 0), deposit(1, 0)))


def test_one_benign_transfer_is_one_full_sequence():
    t, alk, aun, ue = benign()
    ds = assemble(recs(*t.events, alk, aun, ue), CFG)
    (seq,) = sequences_for(ds)
    assert seq.complete and seq.unlock_event == ue and seq.deposit_event == t.events[1]


def test_orphan_unlock_event():
    *_, ue = benign()
    (seq,) = correlate([], [], [], [ue])
    assert seq.unlock_event == ue and seq.gaps == ("lock_events", "deposit_event", "lock_action",
                                                    "unlock_action", "source_trace")


def test_identical_actions_consumed_once():
    t, alk, aun, ue = benign()
    seqs = correlate([t], [alk], [aun, aun], [ue])
    with_event = [s for s in seqs if s.unlock_event is not None]
    open_auth = [s for s in seqs if s.unlock_action is not None and s.unlock_event is None]
    assert len(with_event) == 1 and len(open_auth) == 1
    # the first action (ordinal 0) was joined to the source slot and consumed the event
    assert with_event[0].lock_action == alk


def _all_states(seqs):
    out = set()
    for s in seqs:
        out.update(s.lock_events)
        for n in ("deposit_event", "lock_action", "unlock_action", "unlock_event"):
            if getattr(s, n) is not None:
                out.add((n, getattr(s, n)) if n.endswith("action") else getattr(s, n))
    return out


def test_correlation_conserves_states_and_ignores_input_order():
    bs = [benign(h, amount=100 + h, uh=900 + h) for h in range(1, 6)]
    orphan = unlock_event(bs[0][2], h=999)
    lone_dep = deposit(77, 1)
    states = [s for b in bs for s in (*b[0].events, *b[1:])] + [orphan, lone_dep]
    base = sequences_for(assemble(recs(*states), CFG))
    for seed in range(5):
        shuffled = states[:]
        random.Random(seed).shuffle(shuffled)
        assert sequences_for(assemble(recs(*shuffled), CFG)) == base
    got = _all_states(base)
    for b in bs:
        assert set(b[0].events) <= got
        assert ("lock_action", b[1]) in got and ("unlock_action", b[2]) in got and b[3] in got
    assert orphan in got and lone_dep in got
