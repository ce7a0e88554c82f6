import json

import pytest
from hypothesis import given, strategies as st

from bridgescope.errors import InvalidState, RecordParse
from bridgescope.ingest import (
    HEADER,
    FileConnector,
    adaptor_pull,
    apply_filters,
    decode_line,
    encode_line,
    iter_records,
    read_trace_file,
    render_trace_file,
    write_trace_file,
)
from bridgescope.config import BridgeConfig
from bridgescope.model import NATIVE, AssetId, NativeTransfer, TxRef

from helpers import CFG, DST, SRC, addr, benign, deposit, lock, txh, unlock_action


def _benign_lines():
    trace, alk, aun, ue = benign()
    return [encode_line(s) for s in (*trace.events, alk, aun, ue)], (trace, alk, aun, ue)


def test_state_round_trip():
    lines, (trace, alk, aun, ue) = _benign_lines()
    decoded = [decode_line(line)[1] for line in lines]
    assert decoded == [*trace.events, alk, aun, ue]
    # canonical: re-encoding is byte-identical
    assert [encode_line(s) for s in decoded] == lines


def test_wire_shape():
    line = encode_line(lock(amount=10**30))
    d = json.loads(line)
    assert d["kind"] == "lock_event" and d["amount"] == str(10**30)
    assert " " not in line and list(d) == sorted(d)


def test_five_lines_give_five_records():
    lines, _ = _benign_lines()
    recs = list(iter_records([HEADER] + lines))
    assert [r.ordinal for r in recs] == [0, 1, 2, 3, 4]


def test_empty_stream():
    assert list(iter_records([])) == []
    assert list(iter_records([HEADER])) == []


def test_lenient_skips_malformed_line():
    lines, _ = _benign_lines()
    lines[2] = '{"kind": "lock_action", "chain": "src"'
    errors = []
    recs = list(iter_records(lines, strict=False, errors=errors))
    assert len(recs) == 4 and len(errors) == 1
    assert errors[0].line == 3
    with pytest.raises(RecordParse):
        list(iter_records(lines))


@pytest.mark.parametrize("mutate", [
    lambda d: d.update(amount="12.5"),
    lambda d: d.update(amount="007"),
    lambda d: d.update(amount=str(2**256)),
    lambda d: d.update(to="0x12"),
    lambda d: d.update(kind="teleport"),
    lambda d: d.update(dest_chain=DST),  # unused field must stay empty
    lambda d: d.update(extra=1),
])
def test_malformed_records(mutate):
    d = json.loads(encode_line(lock()))
    mutate(d)
    with pytest.raises(RecordParse):
        decode_line(json.dumps(d))


def test_unknown_version_rejected():
    with pytest.raises(RecordParse):
        list(iter_records(["#xscope-trace v2"]))


def test_action_stream():
    trace, alk, aun, _ = benign()
    _, alk2, aun2, _ = benign(h=2)
    aun2 = unlock_action(alk2, authorized=False)
    lines = [encode_line(s) for s in (alk, aun, alk2, aun2)]
    recs = list(adaptor_pull(lines))
    assert len(recs) == 4 and recs[3].state.authorized is False
    with pytest.raises(RecordParse):
        list(adaptor_pull([encode_line(trace.events[0])]))


def test_file_round_trip_is_byte_identical(tmp_path):
    lines, states = _benign_lines()
    path = tmp_path / "a.trace"
    path.write_text(HEADER + "\n" + "\n".join(lines) + "\n")
    recs = list(read_trace_file(path))
    out = tmp_path / "b.trace"
    write_trace_file(out, recs)
    assert out.read_bytes() == path.read_bytes()


@given(st.integers(0, 2**256 - 1), st.integers(0, 2**32), st.integers(0, 10**9))
def test_amount_and_positions_round_trip(amount, index, block):
    ev = lock(amount=amount)
    ev = type(ev)(TxRef(SRC, txh(3), index), ev.sc, ev.asset, amount, ev.to, block)
    assert decode_line(encode_line(ev))[1] == ev


def test_filters_drop_records_touching_filtered_addresses():
    trace, alk, aun, ue = benign()
    bad = benign(h=2, to=0x66)
    recs = list(iter_records([encode_line(s) for s in (*trace.events, alk, aun, ue,
                                                        *bad[0].events, *bad[1:])]))
    cfg = BridgeConfig(routers=CFG.routers, native_symbols=CFG.native_symbols,
                       address_filters={addr(DST, 0x66)})
    res = apply_filters(recs, cfg)
    # the filtered user's deposit, lock action, unlock action and payout all go
    assert res.dropped == 4 and len(res.records) == 6


def test_native_symbol_mismatch_rejected():
    ev = lock(asset=AssetId(SRC, NATIVE, "DOGE"), sc=NATIVE)
    with pytest.raises(InvalidState):
        apply_filters(list(iter_records([encode_line(ev)])), CFG)


def test_file_connector_spans(tmp_path):
    path = tmp_path / "src.trace"
    evs = [lock(h, 0, block=b) for h, b in ((1, 5), (2, 7), (3, 12))]
    write_trace_file(path, evs)
    conn = FileConnector(path, SRC, span=5)
    batches = list(conn.batches())
    assert [len(b.records) for b in batches] == [2, 1]
