"""Validity and consistency facts over bridge states.

Each fact returns a :class:`FactVerdict`.  A failing verdict names the first
violated conjunct; for quantified facts it names the conjunct that failed on
the nearest-miss candidate, so a report says *why* nothing qualified.

Quantifiers range over finite state sets and are evaluated by enumeration,
with :class:`StatePool` providing the candidate indexes.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .config import BridgeConfig, Matching
from .errors import TraceMismatch
from .model import (
    DepositEvent,
    LockAction,
    LockEvent,
    Trace,
    TxRef,
    UnlockAction,
    UnlockEvent,
    asset_key,
    assets_equal,
    empty_trace,
)


class Fact(enum.Enum):
    V_Elk = "V(E_lk)"
    V_Edep = "V(E_dep)"
    C_Elk_Edep = "C(E_lk,E_dep)"
    V_tx = "V(tx)"
    C_Alk_Edep = "C(A_lk,E_dep)"
    V_Alk = "V(A_lk)"
    C_Alk_Aunlk = "C(A_lk,A_unlk)"
    C_Aunlk_Eunlk = "C(A_unlk,E_unlk)"
    V_Eunlk = "V(E_unlk)"


# failed-conjunct labels that mean "an upstream stage is invalid"
UPSTREAM_SOURCE_TX = "V(tx^s)"
UPSTREAM_LOCK_ACTION = "V(A_lk)"


@dataclass(frozen=True)
class FactVerdict:
    fact: Fact
    holds: bool
    failed_conjunct: str | None = None
    witnesses: tuple = ()
    subject: object = None
    cause: FactVerdict | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.holds and not self.failed_conjunct:
            raise ValueError("a failing verdict must name its failed conjunct")

    def __bool__(self) -> bool:
        return self.holds


def _ok(fact: Fact, witnesses: Iterable = (), subject=None) -> FactVerdict:
    return FactVerdict(fact, True, None, tuple(witnesses), subject)


def _fail(fact: Fact, conjunct: str, subject=None, cause=None) -> FactVerdict:
    return FactVerdict(fact, False, conjunct, (), subject, cause)


def _mode(cfg: BridgeConfig, matching: Matching | None) -> Matching:
    return cfg.matching if matching is None else matching


# -- conjunct lists -------------------------------------------------------
# Each helper returns every failed conjunct in a fixed order; facts report the
# first, nearest-miss diagnosis counts them.

def lock_event_failures(e: LockEvent, cfg: BridgeConfig) -> list[str]:
    routers = cfg.router_set(e.tx.chain)
    out = []
    if e.sc != e.asset.contract:
        out.append("sc≠asset")
    if e.to not in routers:
        out.append("to≠router")
    return out


def deposit_event_failures(e: DepositEvent, cfg: BridgeConfig) -> list[str]:
    return [] if e.sc in cfg.router_set(e.tx.chain) else ["sc≠router"]


def lock_deposit_failures(lk: LockEvent, dep: DepositEvent) -> list[str]:
    out = []
    if not lk.tx.same_tx(dep.tx):
        out.append("tx")
    if not assets_equal(lk.asset, dep.asset_src):
        out.append("asset")
    if lk.amount != dep.amount_src:
        out.append("amount")
    return out


def action_deposit_failures(a: LockAction, dep: DepositEvent) -> list[str]:
    out = []
    if not assets_equal(a.asset_src, dep.asset_src):
        out.append("asset^s")
    if a.amount_src != dep.amount_src:
        out.append("amount^s")
    if not assets_equal(a.asset_dst, dep.asset_dst):
        out.append("asset^d")
    if a.to_dst != dep.to_dst:
        out.append("to^d")
    return out


def lock_unlock_field_failures(alk: LockAction, aun: UnlockAction, cfg: BridgeConfig) -> list[str]:
    out = []
    if aun.dest_chain != alk.dest_chain:
        out.append("ID^d")
    if not assets_equal(aun.asset_dst, alk.asset_dst):
        out.append("asset^d")
    if aun.to_dst != alk.to_dst:
        out.append("to^d")
    bps = cfg.fee_tolerance_bps
    if bps is not None:
        # strict mode: destination amount may be shaved by at most bps, never inflated
        if aun.amount_dst > alk.amount_src or aun.amount_dst * 10_000 < alk.amount_src * (10_000 - bps):
            out.append("amount^d")
    return out


def unlock_action_event_failures(aun: UnlockAction, e: UnlockEvent) -> list[str]:
    out = []
    if not assets_equal(aun.asset_dst, e.asset):
        out.append("asset")
    if aun.asset_dst.contract != e.sc:
        out.append("asset=sc")
    if aun.amount_dst != e.amount:
        out.append("amount")
    if aun.to_dst != e.to:
        out.append("to")
    return out


def _nearest(candidates: Iterable[tuple[object, list[str]]]) -> tuple[object, str] | None:
    """Candidate with the fewest failed conjuncts (first wins ties) and its first failure."""
    best = None
    for cand, fails in candidates:
        if best is None or len(fails) < len(best[1]):
            best = (cand, fails)
    if best is None or not best[1]:
        return None
    return best[0], best[1][0]


# -- facts ------------------------------------------------------------------

def v_lock_event(e: LockEvent, cfg: BridgeConfig) -> FactVerdict:
    fails = lock_event_failures(e, cfg)
    return _fail(Fact.V_Elk, fails[0], e) if fails else _ok(Fact.V_Elk, subject=e)


def v_deposit_event(e: DepositEvent, cfg: BridgeConfig) -> FactVerdict:
    fails = deposit_event_failures(e, cfg)
    return _fail(Fact.V_Edep, fails[0], e) if fails else _ok(Fact.V_Edep, subject=e)


def c_lock_deposit(lk: LockEvent, dep: DepositEvent) -> FactVerdict:
    fails = lock_deposit_failures(lk, dep)
    return _fail(Fact.C_Elk_Edep, fails[0], dep) if fails else _ok(Fact.C_Elk_Edep, [lk], dep)


def c_action_deposit(a: LockAction, dep: DepositEvent) -> FactVerdict:
    fails = action_deposit_failures(a, dep)
    return _fail(Fact.C_Alk_Edep, fails[0], a) if fails else _ok(Fact.C_Alk_Edep, [dep], a)


def c_unlock_action_event(aun: UnlockAction, e: UnlockEvent) -> FactVerdict:
    fails = unlock_action_event_failures(aun, e)
    return _fail(Fact.C_Aunlk_Eunlk, fails[0], e) if fails else _ok(Fact.C_Aunlk_Eunlk, [aun], e)


def v_source_tx(trace: Trace, cfg: BridgeConfig, matching: Matching | None = None) -> FactVerdict:
    """Every valid deposit in the trace is backed by a valid, consistent lock event.

    A failing verdict's ``subject`` is the first deposit left without a lock.
    """
    mode = _mode(cfg, matching)
    deposits = [d for d in trace.deposit_events if not deposit_event_failures(d, cfg)]
    if not deposits:
        return _ok(Fact.V_tx, subject=trace)
    locks = trace.lock_events
    lock_fails = [lock_event_failures(lk, cfg) for lk in locks]
    edges: list[list[int]] = []
    for dep in deposits:
        row = [j for j, lk in enumerate(locks)
               if not lock_fails[j] and not lock_deposit_failures(lk, dep)]
        if not row:
            if not locks:
                return _fail(Fact.V_tx, "no-lock", dep)
            _, conj = _nearest(
                (lk, lock_fails[j] + lock_deposit_failures(lk, dep)) for j, lk in enumerate(locks)
            )
            return _fail(Fact.V_tx, conj, dep)
        edges.append(row)

    if mode is Matching.PAPER_LITERAL:
        return _ok(Fact.V_tx, [locks[row[0]] for row in edges], trace)

    assignment = _greedy_matching(edges) or _max_matching(edges, len(locks))
    for i, j in enumerate(assignment):
        if j < 0:
            return _fail(Fact.V_tx, "shared-lock", deposits[i])
    return _ok(Fact.V_tx, [locks[j] for j in assignment], trace)


def _greedy_matching(edges: list[list[int]]) -> list[int] | None:
    """First-free assignment; a complete one is already a perfect matching."""
    used: set[int] = set()
    out = []
    for row in edges:
        j = next((j for j in row if j not in used), None)
        if j is None:
            return None
        used.add(j)
        out.append(j)
    return out


def _max_matching(edges: list[list[int]], n_right: int) -> list[int]:
    """Maximum bipartite matching of deposits (rows) onto lock events (columns); -1 = unmatched."""
    rows = np.repeat(np.arange(len(edges)), [len(r) for r in edges])
    cols = np.fromiter((j for r in edges for j in r), dtype=np.int64, count=len(rows))
    graph = csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(len(edges), n_right))
    return maximum_bipartite_matching(graph, perm_type="column").tolist()


def v_lock_action(
    a: LockAction, trace: Trace | None, cfg: BridgeConfig, matching: Matching | None = None
) -> FactVerdict:
    """The action was parsed from a valid source transaction and agrees with a valid deposit in it."""
    if trace is None:
        trace = empty_trace(a.tx)
    if not trace.tx.same_tx(a.tx):
        raise TraceMismatch(f"trace {trace.key} does not belong to lock action {a.key}")
    vtx = v_source_tx(trace, cfg, matching)
    deposits = trace.deposit_events
    diag = []
    for dep in deposits:
        fails = deposit_event_failures(dep, cfg) + action_deposit_failures(a, dep)
        if not fails:
            if vtx.holds:
                return _ok(Fact.V_Alk, [dep], a)
            break
        diag.append((dep, fails))
    if not vtx.holds:
        return _fail(Fact.V_Alk, UPSTREAM_SOURCE_TX, a, cause=vtx)
    if not deposits:
        return _fail(Fact.V_Alk, "no-deposit", a)
    _, conj = _nearest(diag)
    return _fail(Fact.V_Alk, conj, a)


def c_lock_unlock_actions(
    alk: LockAction,
    aun: UnlockAction,
    trace: Trace | None,
    cfg: BridgeConfig,
    matching: Matching | None = None,
    *,
    lock_verdict: FactVerdict | None = None,
) -> FactVerdict:
    """The unlock follows a valid lock action to the same chain, asset and receiver.

    Amount is not compared unless the config enables strict amounts.
    """
    if trace is not None and not trace.tx.same_tx(alk.tx):
        raise TraceMismatch(f"trace {trace.key} does not belong to lock action {alk.key}")
    fails = lock_unlock_field_failures(alk, aun, cfg)
    if fails:
        return _fail(Fact.C_Alk_Aunlk, fails[0], aun)
    vlk = lock_verdict if lock_verdict is not None else v_lock_action(alk, trace, cfg, matching)
    if not vlk.holds:
        return _fail(Fact.C_Alk_Aunlk, UPSTREAM_LOCK_ACTION, aun, cause=vlk)
    return _ok(Fact.C_Alk_Aunlk, [alk], aun)


# -- pool -------------------------------------------------------------------

def _addr_key(a) -> str:
    return "NATIVE" if not hasattr(a, "hex") else a.hex


def lock_action_sort_key(a: LockAction) -> tuple:
    return (a.tx.chain, a.tx.hash, a.tx.index, a.block, a.dest_chain, a.asset_src.chain,
            _addr_key(a.asset_src.contract), a.amount_src, a.asset_dst.chain,
            _addr_key(a.asset_dst.contract), a.to_dst.hex)


def unlock_action_sort_key(a: UnlockAction) -> tuple:
    return (a.src_tx.chain, a.src_tx.hash, a.src_tx.index, a.block, a.dest_chain,
            _addr_key(a.asset_dst.contract), a.amount_dst, a.to_dst.hex, not a.authorized)


class _Bucketed:
    def __init__(self, sort_key):
        self._sort_key = sort_key
        self._buckets: dict[tuple, list] = {}
        self._dirty: set[tuple] = set()

    def add(self, key: tuple, item) -> None:
        self._buckets.setdefault(key, []).append(item)
        self._dirty.add(key)

    def get(self, key: tuple) -> list:
        bucket = self._buckets.get(key)
        if bucket is None:
            return []
        if key in self._dirty:
            bucket.sort(key=self._sort_key)
            self._dirty.discard(key)
        return bucket

    def __iter__(self):
        for key in sorted(self._buckets, key=repr):
            yield from self.get(key)


class StatePool:
    """Every known action and source trace, indexed for quantifier evaluation.

    Unlock actions are bucketed by their destination (chain, asset, receiver);
    lock actions by the destination they request and by source tx.  Buckets are
    kept in a canonical order so verdicts never depend on insertion order.
    """

    def __init__(self, traces=(), lock_actions=(), unlock_actions=()):
        self._traces: dict[tuple[str, str], Trace] = {}
        self._unlock = _Bucketed(unlock_action_sort_key)
        self._unlock_exact = _Bucketed(unlock_action_sort_key)
        self._lock_by_dest = _Bucketed(lock_action_sort_key)
        self._lock_by_tx = _Bucketed(lock_action_sort_key)
        self._vlk_cache: dict = {}
        for t in traces:
            self.add_trace(t)
        for a in lock_actions:
            self.add_lock_action(a)
        for a in unlock_actions:
            self.add_unlock_action(a)

    def add_trace(self, trace: Trace) -> None:
        old = self._traces.get(trace.tx.key)
        if old is not None:
            if old != trace:
                raise ValueError(f"conflicting traces for {trace.key}")
            return
        self._traces[trace.tx.key] = trace
        self._vlk_cache.clear()

    def add_lock_action(self, a: LockAction) -> None:
        self._lock_by_dest.add((a.dest_chain, asset_key(a.asset_dst), a.to_dst), a)
        self._lock_by_tx.add(a.tx.key, a)

    def add_unlock_action(self, a: UnlockAction) -> None:
        self._unlock.add((a.dest_chain, asset_key(a.asset_dst), a.to_dst), a)
        self._unlock_exact.add((a.dest_chain, asset_key(a.asset_dst), a.to_dst, a.amount_dst), a)

    def trace_for(self, tx: TxRef) -> Trace:
        return self._traces.get(tx.key) or empty_trace(tx)

    def has_trace(self, tx: TxRef) -> bool:
        return tx.key in self._traces

    def unlock_candidates(self, e: UnlockEvent) -> list[UnlockAction]:
        return self._unlock.get((e.tx.chain, asset_key(e.asset), e.to))

    def exact_unlock_candidates(self, e: UnlockEvent) -> list[UnlockAction]:
        """Unlock candidates that also agree on amount: the only ones that can match."""
        return self._unlock_exact.get((e.tx.chain, asset_key(e.asset), e.to, e.amount))

    def lock_candidates(self, aun: UnlockAction) -> list[LockAction]:
        return self._lock_by_dest.get((aun.dest_chain, asset_key(aun.asset_dst), aun.to_dst))

    def lock_actions_for_tx(self, tx: TxRef) -> list[LockAction]:
        return self._lock_by_tx.get(tx.key)

    def lock_actions(self) -> list[LockAction]:
        return list(self._lock_by_tx)

    def unlock_actions(self) -> list[UnlockAction]:
        return list(self._unlock)

    def lock_verdict(self, a: LockAction, cfg: BridgeConfig, matching: Matching | None) -> FactVerdict:
        mode = _mode(cfg, matching)
        key = (a, mode, cfg.fee_tolerance_bps, id(cfg))
        v = self._vlk_cache.get(key)
        if v is None:
            v = v_lock_action(a, self.trace_for(a.tx), cfg, mode)
            self._vlk_cache[key] = v
        return v


def v_unlock_event(
    e: UnlockEvent, pool: StatePool, cfg: BridgeConfig, matching: Matching | None = None
) -> FactVerdict:
    """Some authorized unlock action matches the event and follows a valid lock action."""
    # fast path: a witness must agree on amount, so try that narrow bucket first
    for aun in pool.exact_unlock_candidates(e):
        if not aun.authorized or unlock_action_event_failures(aun, e):
            continue
        for alk in pool.lock_candidates(aun):
            if not lock_unlock_field_failures(alk, aun, cfg) and \
                    pool.lock_verdict(alk, cfg, matching).holds:
                return _ok(Fact.V_Eunlk, [aun, alk], e)

    candidates = pool.unlock_candidates(e)
    consistent = []
    diag_event = []
    upstream = None
    for aun in candidates:
        if not aun.authorized:
            continue
        fails = unlock_action_event_failures(aun, e)
        if fails:
            diag_event.append((aun, fails))
            continue
        consistent.append(aun)
        for alk in pool.lock_candidates(aun):
            if lock_unlock_field_failures(alk, aun, cfg):
                continue
            vlk = pool.lock_verdict(alk, cfg, matching)
            if vlk.holds:
                return _ok(Fact.V_Eunlk, [aun, alk], e)
            if upstream is None:
                upstream = vlk

    if not candidates:
        return _fail(Fact.V_Eunlk, "no-action", e)
    if not consistent and not diag_event:
        return _fail(Fact.V_Eunlk, "unauthorized", e)
    if not consistent:
        _, conj = _nearest(diag_event)
        return _fail(Fact.V_Eunlk, conj, e)
    if upstream is not None:
        # the unlock is backed on every field; only the lock action itself is invalid
        return _fail(Fact.V_Eunlk, UPSTREAM_LOCK_ACTION, e, cause=upstream)

    diag_lock = []
    for aun in consistent:
        for alk in pool.lock_actions_for_tx(aun.src_tx):
            diag_lock.append((alk, lock_unlock_field_failures(alk, aun, cfg)))
    if not diag_lock:
        return _fail(Fact.V_Eunlk, "no-lock-action", e)
    _, conj = _nearest(diag_lock)
    return _fail(Fact.V_Eunlk, conj, e)


class PoolOverlay:
    """Read-only view of a base pool plus extra states, leaving the base untouched."""

    def __init__(self, base: StatePool, extra: StatePool):
        self.base = base
        self.extra = extra
        self._vlk_cache: dict = {}

    def trace_for(self, tx: TxRef) -> Trace:
        if self.extra.has_trace(tx):
            return self.extra.trace_for(tx)
        return self.base.trace_for(tx)

    def has_trace(self, tx: TxRef) -> bool:
        return self.extra.has_trace(tx) or self.base.has_trace(tx)

    def unlock_candidates(self, e: UnlockEvent) -> list[UnlockAction]:
        return sorted(self.base.unlock_candidates(e) + self.extra.unlock_candidates(e),
                      key=unlock_action_sort_key)

    def exact_unlock_candidates(self, e: UnlockEvent) -> list[UnlockAction]:
        return sorted(self.base.exact_unlock_candidates(e) + self.extra.exact_unlock_candidates(e),
                      key=unlock_action_sort_key)

    def lock_candidates(self, aun: UnlockAction) -> list[LockAction]:
        return sorted(self.base.lock_candidates(aun) + self.extra.lock_candidates(aun),
                      key=lock_action_sort_key)

    def lock_actions_for_tx(self, tx: TxRef) -> list[LockAction]:
        return sorted(self.base.lock_actions_for_tx(tx) + self.extra.lock_actions_for_tx(tx),
                      key=lock_action_sort_key)

    def lock_verdict(self, a: LockAction, cfg: BridgeConfig, matching: Matching | None) -> FactVerdict:
        if not self.extra.has_trace(a.tx):
            return self.base.lock_verdict(a, cfg, matching)
        key = (a, _mode(cfg, matching))
        if key not in self._vlk_cache:
            self._vlk_cache[key] = v_lock_action(a, self.trace_for(a.tx), cfg, matching)
        return self._vlk_cache[key]
