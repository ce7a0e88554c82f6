"""Trace-file wire format, file-backed chain connector and relayer adaptor.

One record per line, canonical JSON (sorted keys, no spaces), after a version
header.  Every record carries the same field set; fields a kind does not use
are empty strings.  Amounts are decimal strings so 256-bit values survive.
"""
from __future__ import annotations

import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Protocol

from .config import BridgeConfig
from .errors import InvalidState, RecordParse
from .model import (
    NATIVE,
    Address,
    AssetId,
    DepositEvent,
    LockAction,
    LockEvent,
    NativeTransfer,
    TxRef,
    UnlockAction,
    UnlockEvent,
    normalize_address,
)

log = logging.getLogger(__name__)

HEADER = "#xscope-trace v1"

FIELDS = (
    "kind", "chain", "tx", "index", "block", "sc", "asset", "symbol", "amount", "to",
    "dest_chain", "dest_asset", "dest_symbol", "dest_to", "authorized",
)

EVENT_KINDS = frozenset({"lock_event", "deposit_event", "unlock_event", "native_transfer"})
ACTION_KINDS = frozenset({"lock_action", "unlock_action"})
REQUEST_KINDS = frozenset({"predicted_unlock"})
ALL_KINDS = EVENT_KINDS | ACTION_KINDS | REQUEST_KINDS

_USED = {
    "lock_event": {"sc", "asset", "symbol", "amount", "to"},
    "unlock_event": {"sc", "asset", "symbol", "amount", "to"},
    "predicted_unlock": {"sc", "asset", "symbol", "amount", "to"},
    "native_transfer": {"sc", "amount", "to"},
    "deposit_event": {"sc", "asset", "symbol", "amount", "dest_chain", "dest_asset",
                      "dest_symbol", "dest_to"},
    "lock_action": {"asset", "symbol", "amount", "dest_chain", "dest_asset", "dest_symbol",
                    "dest_to"},
    "unlock_action": {"amount", "dest_chain", "dest_asset", "dest_symbol", "dest_to",
                      "authorized"},
}
_ALWAYS = {"kind", "chain", "tx", "index", "block"}


@dataclass(frozen=True)
class RawRecord:
    kind: str
    state: object
    ordinal: int = 0

    @property
    def block(self) -> int:
        return self.state.block


# -- encoding ---------------------------------------------------------------

def _contract_str(c) -> str:
    return "NATIVE" if c is NATIVE else c.hex


def _sc_str(sc) -> str:
    return "NATIVE" if sc is NATIVE else sc.hex


def kind_of(state) -> str:
    for cls, kind in (
        (LockEvent, "lock_event"), (DepositEvent, "deposit_event"), (UnlockEvent, "unlock_event"),
        (NativeTransfer, "native_transfer"), (LockAction, "lock_action"),
        (UnlockAction, "unlock_action"),
    ):
        if isinstance(state, cls):
            return kind
    raise TypeError(f"not a bridge state: {type(state).__name__}")


def encode_state(state, kind: str | None = None) -> dict:
    kind = kind or kind_of(state)
    d = dict.fromkeys(FIELDS, "")
    d["kind"] = kind
    if kind == "unlock_action":
        tx = state.src_tx
    else:
        tx = state.tx
    d.update(chain=tx.chain, tx=tx.hash, index=tx.index, block=state.block)
    if kind in ("lock_event", "unlock_event", "predicted_unlock"):
        d.update(sc=_sc_str(state.sc), asset=_contract_str(state.asset.contract),
                 symbol=state.asset.symbol or "", amount=str(state.amount), to=state.to.hex)
    elif kind == "native_transfer":
        d.update(sc=state.sender.hex, amount=str(state.amount), to=state.to.hex)
    elif kind == "deposit_event":
        d.update(sc=state.sc.hex, asset=_contract_str(state.asset_src.contract),
                 symbol=state.asset_src.symbol or "", amount=str(state.amount_src),
                 dest_chain=state.dest_chain, dest_asset=_contract_str(state.asset_dst.contract),
                 dest_symbol=state.asset_dst.symbol or "", dest_to=state.to_dst.hex)
    elif kind == "lock_action":
        d.update(asset=_contract_str(state.asset_src.contract), symbol=state.asset_src.symbol or "",
                 amount=str(state.amount_src), dest_chain=state.dest_chain,
                 dest_asset=_contract_str(state.asset_dst.contract),
                 dest_symbol=state.asset_dst.symbol or "", dest_to=state.to_dst.hex)
    elif kind == "unlock_action":
        d.update(amount=str(state.amount_dst), dest_chain=state.dest_chain,
                 dest_asset=_contract_str(state.asset_dst.contract),
                 dest_symbol=state.asset_dst.symbol or "", dest_to=state.to_dst.hex,
                 authorized=state.authorized)
    else:
        raise ValueError(f"unknown record kind {kind!r}")
    return d


def dumps_record(d: dict) -> str:
    return json.dumps(d, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def encode_line(state, kind: str | None = None) -> str:
    return dumps_record(encode_state(state, kind))


# -- decoding ---------------------------------------------------------------

def _need(d: dict, name: str) -> str:
    v = d.get(name, "")
    if not isinstance(v, str) or not v:
        raise ValueError(f"field {name!r} is required")
    return v


def _int_field(d: dict, name: str) -> int:
    v = d.get(name)
    if not isinstance(v, int) or isinstance(v, bool) or v < 0:
        raise ValueError(f"field {name!r} must be a nonnegative integer")
    return v


def _amount(d: dict) -> int:
    v = _need(d, "amount")
    if not v.isdigit() or (len(v) > 1 and v[0] == "0"):
        raise ValueError(f"amount must be a canonical decimal string: {v!r}")
    return int(v)


def _asset(chain: str, contract: str, symbol: str) -> AssetId:
    c = NATIVE if contract == "NATIVE" else normalize_address(contract, chain)
    return AssetId(chain, c, symbol or None)


def _contract(raw: str, chain: str):
    return NATIVE if raw == "NATIVE" else normalize_address(raw, chain)


def decode_state(d: dict) -> tuple[str, object]:
    """Inverse of :func:`encode_state`; raises ValueError on any malformed field."""
    if not isinstance(d, dict):
        raise ValueError("record must be a JSON object")
    unknown = set(d) - set(FIELDS)
    if unknown:
        raise ValueError(f"unknown field {sorted(unknown)[0]!r}")
    kind = d.get("kind")
    if kind not in ALL_KINDS:
        raise ValueError(f"unknown record kind {kind!r}")
    used = _USED[kind] | _ALWAYS
    for name in FIELDS:
        if name not in used and d.get(name, "") != "":
            raise ValueError(f"field {name!r} must be empty for {kind}")
    chain = _need(d, "chain")
    tx = TxRef(chain, _need(d, "tx"), _int_field(d, "index"))
    block = _int_field(d, "block")

    if kind in ("lock_event", "unlock_event", "predicted_unlock"):
        cls = LockEvent if kind == "lock_event" else UnlockEvent
        state = cls(tx=tx, sc=_contract(_need(d, "sc"), chain),
                    asset=_asset(chain, _need(d, "asset"), d.get("symbol", "")),
                    amount=_amount(d), to=normalize_address(_need(d, "to"), chain), block=block)
    elif kind == "native_transfer":
        state = NativeTransfer(tx=tx, sender=normalize_address(_need(d, "sc"), chain),
                               amount=_amount(d), to=normalize_address(_need(d, "to"), chain),
                               block=block)
    elif kind == "deposit_event":
        dest = _need(d, "dest_chain")
        state = DepositEvent(
            tx=tx, sc=normalize_address(_need(d, "sc"), chain),
            asset_src=_asset(chain, _need(d, "asset"), d.get("symbol", "")),
            amount_src=_amount(d), dest_chain=dest,
            asset_dst=_asset(dest, _need(d, "dest_asset"), d.get("dest_symbol", "")),
            to_dst=normalize_address(_need(d, "dest_to"), dest), block=block)
    elif kind == "lock_action":
        dest = _need(d, "dest_chain")
        state = LockAction(
            tx=tx, src_chain=chain,
            asset_src=_asset(chain, _need(d, "asset"), d.get("symbol", "")),
            amount_src=_amount(d), dest_chain=dest,
            asset_dst=_asset(dest, _need(d, "dest_asset"), d.get("dest_symbol", "")),
            to_dst=normalize_address(_need(d, "dest_to"), dest), block=block)
    else:  # unlock_action
        dest = _need(d, "dest_chain")
        authorized = d.get("authorized")
        if not isinstance(authorized, bool):
            raise ValueError("field 'authorized' must be true or false")
        state = UnlockAction(
            src_tx=tx, dest_chain=dest,
            asset_dst=_asset(dest, _need(d, "dest_asset"), d.get("dest_symbol", "")),
            amount_dst=_amount(d), to_dst=normalize_address(_need(d, "dest_to"), dest),
            authorized=authorized, block=block)
    return kind, state


def decode_line(line: str, lineno: int = 0, source: str = "") -> tuple[str, object]:
    try:
        return decode_state(json.loads(line))
    except json.JSONDecodeError as exc:
        raise RecordParse(lineno, f"invalid JSON: {exc.msg}", source) from None
    except (ValueError, InvalidState) as exc:
        raise RecordParse(lineno, str(exc), source) from None


# -- files ------------------------------------------------------------------

def iter_records(
    lines: Iterable[str],
    *,
    source: str = "",
    strict: bool = True,
    errors: list | None = None,
    kinds: frozenset = EVENT_KINDS | ACTION_KINDS,
    first_ordinal: int = 0,
) -> Iterator[RawRecord]:
    """Parse wire-format lines; ordinals count accepted records from ``first_ordinal``."""
    ordinal = first_ordinal
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip():
            continue
        if line.startswith("#"):
            if line.startswith("#xscope-trace") and line.strip() != HEADER:
                raise RecordParse(lineno, f"unsupported trace format {line.strip()!r}", source)
            continue
        try:
            kind, state = decode_line(line, lineno, source)
            if kind not in kinds:
                raise RecordParse(lineno, f"record kind {kind!r} not allowed here", source)
        except RecordParse as exc:
            if strict:
                raise
            log.warning("skipping malformed record: %s", exc)
            if errors is not None:
                errors.append(exc)
            continue
        yield RawRecord(kind, state, ordinal)
        ordinal += 1


def read_trace_file(
    path: str | os.PathLike, *, strict: bool = True, errors: list | None = None,
    first_ordinal: int = 0,
) -> Iterator[RawRecord]:
    """Stream records from a v1 trace file in file order."""
    with open(path, encoding="utf-8") as fh:
        yield from iter_records(fh, source=str(path), strict=strict, errors=errors,
                                first_ordinal=first_ordinal)


def adaptor_pull(
    relayer_log, *, strict: bool = True, errors: list | None = None, first_ordinal: int = 0,
) -> Iterator[RawRecord]:
    """Relayer adaptor: stream lock/unlock actions from a log path or an iterable of lines."""
    if isinstance(relayer_log, (str, os.PathLike)):
        with open(relayer_log, encoding="utf-8") as fh:
            yield from iter_records(fh, source=str(relayer_log), strict=strict, errors=errors,
                                    kinds=ACTION_KINDS, first_ordinal=first_ordinal)
    else:
        yield from iter_records(relayer_log, strict=strict, errors=errors, kinds=ACTION_KINDS,
                                first_ordinal=first_ordinal)


def render_trace_file(records: Iterable) -> str:
    lines = [HEADER]
    for rec in records:
        if isinstance(rec, RawRecord):
            lines.append(encode_line(rec.state, rec.kind))
        else:
            lines.append(encode_line(rec))
    return "\n".join(lines) + "\n"


def write_atomic(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_trace_file(path: str | os.PathLike, records: Iterable) -> None:
    write_atomic(path, render_trace_file(records))


# -- configurator hooks -----------------------------------------------------

def participants(state) -> set[Address]:
    out = set()
    for name in ("sc", "to", "to_dst", "sender"):
        v = getattr(state, name, None)
        if isinstance(v, Address):
            out.add(v)
    return out


@dataclass
class FilterResult:
    records: list[RawRecord]
    dropped: int = 0
    dropped_by_kind: dict = field(default_factory=dict)


def apply_filters(records: Iterable[RawRecord], cfg: BridgeConfig) -> FilterResult:
    """Drop records touching a filtered address and fill in native symbols.

    A NATIVE asset with a symbol that disagrees with the configured native symbol
    for its chain is rejected.
    """
    out = FilterResult([])
    for rec in records:
        if cfg.address_filters and participants(rec.state) & cfg.address_filters:
            out.dropped += 1
            out.dropped_by_kind[rec.kind] = out.dropped_by_kind.get(rec.kind, 0) + 1
            continue
        _check_native_symbols(rec.state, cfg)
        out.records.append(rec)
    return out


def _check_native_symbols(state, cfg: BridgeConfig) -> None:
    for name in ("asset", "asset_src", "asset_dst"):
        a = getattr(state, name, None)
        if isinstance(a, AssetId) and a.is_native and a.symbol is not None:
            expected = cfg.native_symbol(a.chain)
            if expected is not None and a.symbol != expected:
                raise InvalidState(
                    f"native asset on {a.chain} labelled {a.symbol!r}, configured {expected!r}"
                )


# -- chain connector --------------------------------------------------------

@dataclass(frozen=True)
class ConnectorBatch:
    chain: str
    from_block: int
    to_block: int
    records: tuple

    def __post_init__(self):
        if not 0 <= self.from_block <= self.to_block:
            raise ValueError(f"bad block range [{self.from_block}, {self.to_block}]")
        for rec in self.records:
            if not self.from_block <= rec.block <= self.to_block:
                raise ValueError(f"record at block {rec.block} outside batch range")


class ChainConnector(Protocol):
    chain: str

    def batches(self) -> Iterator[ConnectorBatch]: ...


class FileConnector:
    """Chain connector over a v1 trace file; emits contiguous block-range batches."""

    def __init__(self, path: str | os.PathLike, chain: str, span: int = 1000, strict: bool = True):
        if span < 1:
            raise ValueError("span must be positive")
        self.path = path
        self.chain = chain
        self.span = span
        self.strict = strict

    def batches(self) -> Iterator[ConnectorBatch]:
        recs = [r for r in read_trace_file(self.path, strict=self.strict)
                if _record_chain(r) == self.chain]
        if not recs:
            return
        recs.sort(key=lambda r: (r.block, r.ordinal))
        start = recs[0].block
        end = recs[-1].block
        i = 0
        lo = start
        while lo <= end:
            hi = lo + self.span - 1
            chunk = []
            while i < len(recs) and recs[i].block <= hi:
                chunk.append(recs[i])
                i += 1
            yield ConnectorBatch(self.chain, lo, min(hi, end), tuple(chunk))
            lo = hi + 1


def _record_chain(rec: RawRecord) -> str:
    st = rec.state
    return st.src_tx.chain if isinstance(st, UnlockAction) else st.tx.chain
