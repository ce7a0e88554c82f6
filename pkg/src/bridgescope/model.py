"""State types observed along one cross-chain transfer.

A transfer runs lock event -> deposit event -> lock action -> unlock action ->
unlock event.  Events are on-chain observations, actions are the relayer's
off-chain view.  Every type is an immutable dataclass that checks its own
chain-consistency invariants on construction.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Union

from .errors import AmountOverflow, InvalidState, MalformedAddress, MalformedHash

MAX_AMOUNT = 2**256 - 1

_ADDR_RE = re.compile(r"0x[0-9a-fA-F]{40}")
_HASH_RE = re.compile(r"0x[0-9a-fA-F]{64}")


class Native(enum.Enum):
    """Marker for a chain's base coin, which has no token contract."""

    NATIVE = "NATIVE"

    def __repr__(self) -> str:
        return "NATIVE"


NATIVE = Native.NATIVE


@dataclass(frozen=True, slots=True)
class Address:
    chain: str
    hex: str

    def __post_init__(self):
        _check_chain(self.chain)
        if not isinstance(self.hex, str) or not _ADDR_RE.fullmatch(self.hex):
            raise MalformedAddress(f"not a 20-byte hex address: {self.hex!r}")
        if self.hex != self.hex.lower():
            object.__setattr__(self, "hex", self.hex.lower())

    def __str__(self) -> str:
        return self.hex


def normalize_address(raw: str, chain: str) -> Address:
    """Parse a 0x-prefixed 40-digit hex string (any case) into an Address."""
    if not isinstance(raw, str) or not _ADDR_RE.fullmatch(raw):
        raise MalformedAddress(f"not a 20-byte hex address: {raw!r}")
    return Address(chain, raw.lower())


Contract = Union[Address, Native]


@dataclass(frozen=True, slots=True)
class AssetId:
    """An asset is identified by (chain, contract); the symbol is display only."""

    chain: str
    contract: Contract
    symbol: str | None = field(default=None, compare=False)

    def __post_init__(self):
        _check_chain(self.chain)
        if isinstance(self.contract, Address):
            if self.contract.chain != self.chain:
                raise InvalidState(
                    f"asset contract on {self.contract.chain!r}, asset on {self.chain!r}"
                )
        elif self.contract is not NATIVE:
            raise InvalidState(f"asset contract must be Address or NATIVE: {self.contract!r}")

    @property
    def is_native(self) -> bool:
        return self.contract is NATIVE

    def __str__(self) -> str:
        contract = "NATIVE" if self.is_native else self.contract.hex
        return f"{self.chain}:{contract}" + (f"({self.symbol})" if self.symbol else "")


def assets_equal(a: AssetId, b: AssetId) -> bool:
    return a.chain == b.chain and a.contract == b.contract


def asset_key(a: AssetId) -> tuple:
    return (a.chain, a.contract)


@dataclass(frozen=True, slots=True, order=True)
class TxRef:
    chain: str
    hash: str
    index: int = 0

    def __post_init__(self):
        _check_chain(self.chain)
        if not isinstance(self.hash, str) or not _HASH_RE.fullmatch(self.hash):
            raise MalformedHash(f"not a 32-byte hex hash: {self.hash!r}")
        if self.hash != self.hash.lower():
            object.__setattr__(self, "hash", self.hash.lower())
        if not isinstance(self.index, int) or isinstance(self.index, bool) or self.index < 0:
            raise InvalidState(f"log index must be a nonnegative integer: {self.index!r}")

    @property
    def key(self) -> tuple[str, str]:
        """(chain, hash): identifies the transaction, ignoring log position."""
        return (self.chain, self.hash)

    def same_tx(self, other: TxRef) -> bool:
        return self.chain == other.chain and self.hash == other.hash


def check_amount(value: int) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise InvalidState(f"amount must be an integer in smallest units: {value!r}")
    if value < 0:
        raise InvalidState(f"amount must be nonnegative: {value}")
    if value > MAX_AMOUNT:
        raise AmountOverflow(f"amount exceeds 256 bits: {value}")
    return value


def add_amounts(a: int, b: int) -> int:
    return check_amount(check_amount(a) + check_amount(b))


def _check_chain(chain: str) -> None:
    if not isinstance(chain, str) or not chain or not chain.isascii():
        raise InvalidState(f"chain id must be a nonempty ASCII string: {chain!r}")


def _same_chain(what: str, *chains: str) -> None:
    if len(set(chains)) != 1:
        raise InvalidState(f"{what}: chain mismatch {chains}")


def _check_block(block: int) -> None:
    if not isinstance(block, int) or isinstance(block, bool) or block < 0:
        raise InvalidState(f"block must be a nonnegative integer: {block!r}")


def _contract_chain(sc: Contract, default: str) -> str:
    return sc.chain if isinstance(sc, Address) else default


@dataclass(frozen=True, slots=True)
class LockEvent:
    """Token-contract event moving user funds, normally to the router.

    ``sc`` is NATIVE only for events synthesized from native-coin transfers.
    """

    tx: TxRef
    sc: Contract
    asset: AssetId
    amount: int
    to: Address
    block: int = 0

    def __post_init__(self):
        _same_chain("lock event", self.tx.chain, _contract_chain(self.sc, self.tx.chain),
                    self.asset.chain, self.to.chain)
        check_amount(self.amount)
        _check_block(self.block)


@dataclass(frozen=True, slots=True)
class DepositEvent:
    tx: TxRef
    sc: Address
    asset_src: AssetId
    amount_src: int
    dest_chain: str
    asset_dst: AssetId
    to_dst: Address
    block: int = 0

    def __post_init__(self):
        if not isinstance(self.sc, Address):
            raise InvalidState("deposit event must be emitted by a contract address")
        _same_chain("deposit event source", self.tx.chain, self.sc.chain, self.asset_src.chain)
        _same_chain("deposit event destination", self.dest_chain, self.asset_dst.chain,
                    self.to_dst.chain)
        check_amount(self.amount_src)
        _check_block(self.block)


@dataclass(frozen=True, slots=True)
class UnlockEvent:
    tx: TxRef
    sc: Contract
    asset: AssetId
    amount: int
    to: Address
    block: int = 0

    def __post_init__(self):
        _same_chain("unlock event", self.tx.chain, _contract_chain(self.sc, self.tx.chain),
                    self.asset.chain, self.to.chain)
        check_amount(self.amount)
        _check_block(self.block)

    @property
    def key(self) -> str:
        return f"{self.tx.chain}:{self.tx.hash}:{self.tx.index}"


@dataclass(frozen=True, slots=True)
class NativeTransfer:
    """Raw base-coin value transfer; turned into a lock or unlock event when traces are built."""

    tx: TxRef
    sender: Address
    amount: int
    to: Address
    block: int = 0

    def __post_init__(self):
        _same_chain("native transfer", self.tx.chain, self.sender.chain, self.to.chain)
        check_amount(self.amount)
        _check_block(self.block)


Event = Union[LockEvent, DepositEvent, UnlockEvent]


@dataclass(frozen=True, slots=True)
class Trace:
    """All events emitted by one transaction, ordered by log index."""

    tx: TxRef
    events: tuple = ()

    def __post_init__(self):
        if self.tx.index != 0:
            object.__setattr__(self, "tx", TxRef(self.tx.chain, self.tx.hash, 0))
        events = tuple(self.events)
        object.__setattr__(self, "events", events)
        last = -1
        for ev in events:
            if not ev.tx.same_tx(self.tx):
                raise InvalidState(f"event from {ev.tx.key} placed in trace of {self.tx.key}")
            if ev.tx.index <= last:
                raise InvalidState("trace events must have strictly increasing indices")
            last = ev.tx.index

    @property
    def key(self) -> str:
        return f"{self.tx.chain}:{self.tx.hash}"

    @property
    def block(self) -> int:
        return self.events[0].block if self.events else 0

    @property
    def lock_events(self) -> list[LockEvent]:
        return [e for e in self.events if isinstance(e, LockEvent)]

    @property
    def deposit_events(self) -> list[DepositEvent]:
        return [e for e in self.events if isinstance(e, DepositEvent)]

    @property
    def unlock_events(self) -> list[UnlockEvent]:
        return [e for e in self.events if isinstance(e, UnlockEvent)]


def empty_trace(tx: TxRef) -> Trace:
    return Trace(TxRef(tx.chain, tx.hash, 0), ())


@dataclass(frozen=True, slots=True)
class LockAction:
    """The relayer's parse of a deposit; ``tx.index`` points at the deposit event."""

    tx: TxRef
    src_chain: str
    dest_chain: str
    asset_src: AssetId
    amount_src: int
    asset_dst: AssetId
    to_dst: Address
    block: int = 0

    def __post_init__(self):
        _same_chain("lock action source", self.asset_src.chain, self.src_chain, self.tx.chain)
        _same_chain("lock action destination", self.asset_dst.chain, self.to_dst.chain,
                    self.dest_chain)
        check_amount(self.amount_src)
        _check_block(self.block)

    @property
    def key(self) -> str:
        return f"{self.tx.chain}:{self.tx.hash}"


@dataclass(frozen=True, slots=True)
class UnlockAction:
    """An unlock the relayer emits; ``authorized`` stands in for its signature."""

    src_tx: TxRef
    dest_chain: str
    asset_dst: AssetId
    amount_dst: int
    to_dst: Address
    authorized: bool = True
    block: int = 0

    def __post_init__(self):
        _same_chain("unlock action destination", self.asset_dst.chain, self.to_dst.chain,
                    self.dest_chain)
        check_amount(self.amount_dst)
        if not isinstance(self.authorized, bool):
            raise InvalidState("authorized must be a bool")
        _check_block(self.block)


@dataclass(frozen=True, slots=True)
class ExecutionSequence:
    """One candidate transfer; any stage may be missing in offline data."""

    lock_events: tuple = ()
    deposit_event: DepositEvent | None = None
    lock_action: LockAction | None = None
    unlock_action: UnlockAction | None = None
    unlock_event: UnlockEvent | None = None
    source_trace: Trace | None = None

    def __post_init__(self):
        object.__setattr__(self, "lock_events", tuple(self.lock_events))
        refs = [e.tx for e in self.lock_events]
        if self.deposit_event is not None:
            refs.append(self.deposit_event.tx)
        if self.lock_action is not None:
            refs.append(self.lock_action.tx)
        if self.unlock_action is not None:
            refs.append(self.unlock_action.src_tx)
        if self.source_trace is not None:
            refs.append(self.source_trace.tx)
        if len({r.key for r in refs}) > 1:
            raise InvalidState(f"sequence stages disagree on source tx: {sorted({r.key for r in refs})}")
        if not refs and self.unlock_event is None:
            raise InvalidState("empty execution sequence")

    @property
    def source_tx(self) -> TxRef | None:
        for ref in (
            self.source_trace.tx if self.source_trace else None,
            self.deposit_event.tx if self.deposit_event else None,
            self.lock_action.tx if self.lock_action else None,
            self.unlock_action.src_tx if self.unlock_action else None,
        ):
            if ref is not None:
                return ref
        return self.lock_events[0].tx if self.lock_events else None

    @property
    def key(self) -> str:
        src = self.source_tx
        if src is not None:
            return f"{src.chain}:{src.hash}"
        return self.unlock_event.key

    @property
    def gaps(self) -> tuple[str, ...]:
        missing = []
        if not self.lock_events:
            missing.append("lock_events")
        for name in ("deposit_event", "lock_action", "unlock_action", "unlock_event"):
            if getattr(self, name) is None:
                missing.append(name)
        if self.source_trace is None:
            missing.append("source_trace")
        return tuple(missing)

    @property
    def complete(self) -> bool:
        # lock events may legitimately be absent only in attack traces; completeness is
        # about the pipeline stages the monitor needs.
        return all(
            getattr(self, n) is not None
            for n in ("deposit_event", "lock_action", "unlock_action", "unlock_event", "source_trace")
        )

    def participants(self) -> set[Address]:
        out: set[Address] = set()
        for ev in self.lock_events:
            out.update(a for a in (ev.sc, ev.to) if isinstance(a, Address))
        if self.deposit_event:
            out.update((self.deposit_event.sc, self.deposit_event.to_dst))
        if self.lock_action:
            out.add(self.lock_action.to_dst)
        if self.unlock_action:
            out.add(self.unlock_action.to_dst)
        if self.unlock_event:
            out.add(self.unlock_event.to)
            if isinstance(self.unlock_event.sc, Address):
                out.add(self.unlock_event.sc)
        return out
