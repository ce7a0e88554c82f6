"""Builders for hand-made bridge states used across the test suite."""
from __future__ import annotations

from bridgescope.config import BridgeConfig
from bridgescope.model import (
    NATIVE,
    Address,
    AssetId,
    DepositEvent,
    LockAction,
    LockEvent,
    Trace,
    TxRef,
    UnlockAction,
    UnlockEvent,
)

SRC, DST = "src", "dst"


def addr(chain: str, n: int) -> Address:
    return Address(chain, "0x%040x" % n)


def txh(n: int) -> str:
    return "0x%064x" % n


ROUTER_S = addr(SRC, 0xA0)
ROUTER_D = addr(DST, 0xA0)
TOKEN_S = addr(SRC, 0x70)
TOKEN_D = addr(DST, 0x70)
FAKE_S = addr(SRC, 0xFA)
USER = 0x11
ATTACKER = 0xBAD

TOK_S = AssetId(SRC, TOKEN_S, "TOK")
TOK_D = AssetId(DST, TOKEN_D, "TOK")
ETH_S = AssetId(SRC, NATIVE, "ETH")
FAKE_ETH = AssetId(SRC, FAKE_S, "ETH")

CFG = BridgeConfig(routers={SRC: {ROUTER_S}, DST: {ROUTER_D}},
                   native_symbols={SRC: "ETH", DST: "BNB"})


def lock(h=1, i=0, *, sc=TOKEN_S, asset=TOK_S, amount=100, to=ROUTER_S, block=10) -> LockEvent:
    return LockEvent(TxRef(SRC, txh(h), i), sc, asset, amount, to, block)


def deposit(h=1, i=1, *, sc=ROUTER_S, asset=TOK_S, amount=100, asset_dst=TOK_D, to=USER,
            block=10) -> DepositEvent:
    return DepositEvent(TxRef(SRC, txh(h), i), sc, asset, amount, DST, asset_dst, addr(DST, to), block)


def lock_action(dep: DepositEvent, **kw) -> LockAction:
    fields = dict(tx=dep.tx, src_chain=dep.tx.chain, dest_chain=dep.dest_chain,
                  asset_src=dep.asset_src, amount_src=dep.amount_src, asset_dst=dep.asset_dst,
                  to_dst=dep.to_dst, block=dep.block)
    fields.update(kw)
    return LockAction(**fields)


def unlock_action(alk: LockAction, **kw) -> UnlockAction:
    fields = dict(src_tx=alk.tx, dest_chain=alk.dest_chain, asset_dst=alk.asset_dst,
                  amount_dst=alk.amount_src, to_dst=alk.to_dst, authorized=True, block=alk.block)
    fields.update(kw)
    return UnlockAction(**fields)


def unlock_event(aun: UnlockAction, h=900, i=0, **kw) -> UnlockEvent:
    fields = dict(tx=TxRef(DST, txh(h), i), sc=aun.asset_dst.contract, asset=aun.asset_dst,
                  amount=aun.amount_dst, to=aun.to_dst, block=50)
    fields.update(kw)
    return UnlockEvent(**fields)


def trace(*events) -> Trace:
    return Trace(TxRef(events[0].tx.chain, events[0].tx.hash, 0), tuple(events))


def benign(h=1, amount=100, to=USER, uh=900):
    """One faithful transfer: (trace, lock action, unlock action, unlock event)."""
    lk = lock(h, 0, amount=amount)
    dep = deposit(h, 1, amount=amount, to=to)
    alk = lock_action(dep)
    aun = unlock_action(alk)
    return trace(lk, dep), alk, aun, unlock_event(aun, uh)
