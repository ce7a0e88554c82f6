"""Runtime screening of outgoing unlocks before the relayer submits them.

The caller pre-executes the unlock and hands over the predicted destination
events together with the source trace and the lock action it was derived from.
Any violation, and any error while screening, aborts the unlock.
"""
from __future__ import annotations

import enum
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from typing import Iterable, Iterator

from .config import BridgeConfig, Matching
from .errors import IncompleteSequence, InvalidState
from .facts import PoolOverlay, StatePool
from .ingest import RawRecord, decode_state, encode_state, dumps_record
from .model import ExecutionSequence, LockAction, Trace, UnlockAction, UnlockEvent, asset_key
from .properties import Violation, attach_sequence, check_au, check_cp, check_rd
from .sequences import build_traces

log = logging.getLogger(__name__)


class Verdict(enum.Enum):
    ALLOW = "allow"
    ABORT = "abort"


@dataclass(frozen=True)
class PendingUnlock:
    action: UnlockAction | None
    predicted_events: tuple = ()
    source_trace: Trace | None = None
    lock_action: LockAction | None = None

    def __post_init__(self):
        object.__setattr__(self, "predicted_events", tuple(self.predicted_events))
        if self.action is not None:
            for e in self.predicted_events:
                if e.tx.chain != self.action.dest_chain:
                    raise InvalidState(
                        f"predicted event on {e.tx.chain}, unlock targets {self.action.dest_chain}"
                    )

    def missing(self) -> list[str]:
        out = [n for n in ("action", "source_trace", "lock_action") if getattr(self, n) is None]
        if not self.predicted_events:
            out.append("predicted_events")
        return out


@dataclass(frozen=True)
class MonitorDecision:
    verdict: Verdict
    violations: tuple = ()
    latency: float = 0.0
    error: str | None = None
    request_id: str = ""

    def __post_init__(self):
        blocked = bool(self.violations) or self.error is not None
        if blocked != (self.verdict is Verdict.ABORT):
            raise ValueError("abort exactly when there is a violation or an error")

    def to_record(self, with_latency: bool = True) -> dict:
        rec = {
            "type": "decision",
            "id": self.request_id,
            "verdict": self.verdict.value,
            "violations": [v.to_record() for v in self.violations],
            "error": self.error,
        }
        if with_latency:
            rec["latency_us"] = int(self.latency * 1e6)
        return rec


def action_key(a: UnlockAction) -> tuple:
    return (a.src_tx, a.dest_chain, asset_key(a.asset_dst), a.to_dst, a.amount_dst)


def replay_guard(history: Iterable, p: PendingUnlock) -> bool:
    """False when an allowed decision already consumed an identical unlock action.

    ``history`` yields ``(PendingUnlock, MonitorDecision)`` pairs, oldest first.
    """
    if p.action is None:
        return True
    key = action_key(p.action)
    for prev, decision in history:
        if decision.verdict is Verdict.ALLOW and prev is not None and prev.action is not None \
                and action_key(prev.action) == key:
            return False
    return True


# -- wire format for requests --------------------------------------------------

def encode_request(p: PendingUnlock, request_id: str = "") -> str:
    records = []
    if p.source_trace is not None:
        records += [encode_state(e) for e in p.source_trace.events]
    if p.lock_action is not None:
        records.append(encode_state(p.lock_action))
    if p.action is not None:
        records.append(encode_state(p.action))
    records += [encode_state(e, "predicted_unlock") for e in p.predicted_events]
    return dumps_record({"id": request_id, "records": records})


def decode_request(line: str, cfg: BridgeConfig) -> tuple[str, PendingUnlock]:
    obj = json.loads(line)
    if not isinstance(obj, dict) or not isinstance(obj.get("records"), list):
        raise ValueError("request must be an object with a 'records' list")
    request_id = obj.get("id", "")
    if not isinstance(request_id, str):
        raise ValueError("request id must be a string")
    trace_recs, lock_actions, unlock_actions, predicted = [], [], [], []
    for i, d in enumerate(obj["records"]):
        kind, state = decode_state(d)
        if kind == "predicted_unlock":
            predicted.append(state)
        elif kind == "lock_action":
            lock_actions.append(state)
        elif kind == "unlock_action":
            unlock_actions.append(state)
        else:
            trace_recs.append(RawRecord(kind, state, i))
    if len(lock_actions) > 1 or len(unlock_actions) > 1:
        raise ValueError("a request carries at most one lock action and one unlock action")
    traces = build_traces(trace_recs, cfg)
    if len(traces) > 1:
        raise ValueError("source events span more than one transaction")
    return request_id, PendingUnlock(
        action=unlock_actions[0] if unlock_actions else None,
        predicted_events=predicted,
        source_trace=traces[0] if traces else None,
        lock_action=lock_actions[0] if lock_actions else None,
    )


def pending_from_sequence(seq: ExecutionSequence) -> PendingUnlock:
    return PendingUnlock(
        action=seq.unlock_action,
        predicted_events=(seq.unlock_event,) if seq.unlock_event else (),
        source_trace=seq.source_trace,
        lock_action=seq.lock_action,
    )


# -- monitor ---------------------------------------------------------------------

class DecisionLog:
    """Append-only log of (request line, decision) entries, optionally mirrored to a file.

    Requests are stored verbatim so a replay sees exactly the bytes the monitor saw.
    """

    def __init__(self, path: str | os.PathLike | None = None):
        self.path = path
        self.entries: list[tuple[str, dict]] = []

    def append(self, request_line: str, decision: MonitorDecision) -> None:
        rec = decision.to_record()
        self.entries.append((request_line, rec))
        if self.path is not None:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(dumps_record({"request": request_line, "decision": rec}) + "\n")

    @classmethod
    def load(cls, path: str | os.PathLike) -> DecisionLog:
        out = cls()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    obj = json.loads(line)
                    out.entries.append((obj["request"], obj["decision"]))
        return out


class Monitor:
    """Screens pending unlocks against the actions it has already allowed.

    Decisions are serialized; the allowed-action pool only grows on Allow.
    """

    def __init__(self, cfg: BridgeConfig, matching: Matching | None = None,
                 log_: DecisionLog | None = None):
        self.cfg = cfg
        self.matching = matching
        self.pool = StatePool()
        self.history: list[tuple[PendingUnlock, MonitorDecision]] = []
        self.log = log_ if log_ is not None else DecisionLog()
        self._consumed: set[tuple] = set()
        self._lock = threading.Lock()

    def screen(self, p: PendingUnlock, request_id: str = "", *,
               request_line: str | None = None) -> MonitorDecision:
        with self._lock:
            start = time.perf_counter()
            try:
                violations = self._evaluate(p)
                error = None
            except Exception as exc:  # fail closed: never allow what could not be screened
                log.warning("screening %s failed: %s", request_id or "<request>", exc)
                violations, error = [], f"{type(exc).__name__}: {exc}"
            if violations or error:
                verdict = Verdict.ABORT
            else:
                verdict = Verdict.ALLOW
                self._commit(p)
            decision = MonitorDecision(verdict, tuple(violations), time.perf_counter() - start,
                                       error, request_id)
            self.history.append((p, decision))
            self.log.append(request_line or encode_request(p, request_id), decision)
            return decision

    def screen_line(self, line: str) -> MonitorDecision:
        """Decode and screen one request line; undecodable input aborts."""
        try:
            request_id, p = decode_request(line, self.cfg)
        except Exception as exc:
            decision = MonitorDecision(Verdict.ABORT, (), 0.0, f"{type(exc).__name__}: {exc}",
                                       _peek_id(line))
            with self._lock:
                self.history.append((None, decision))
                self.log.append(line.rstrip("\n"), decision)
            return decision
        return self.screen(p, request_id, request_line=line.rstrip("\n"))

    def _evaluate(self, p: PendingUnlock) -> list[Violation]:
        missing = p.missing()
        if missing:
            raise IncompleteSequence(f"missing {', '.join(missing)}")
        if p.lock_action.tx.key != p.source_trace.tx.key or p.action.src_tx.key != p.lock_action.tx.key:
            raise InvalidState("request stages refer to different source transactions")
        if self.pool.has_trace(p.source_trace.tx) and \
                self.pool.trace_for(p.source_trace.tx) != p.source_trace:
            raise InvalidState(f"source trace {p.source_trace.key} differs from an allowed one")
        if action_key(p.action) in self._consumed:
            raise InvalidState("unlock action already consumed by an allowed decision")
        cfg, matching = self.cfg, self.matching
        seq = ExecutionSequence(
            lock_events=p.source_trace.lock_events,
            deposit_event=next((d for d in p.source_trace.deposit_events
                                if d.tx.index == p.lock_action.tx.index), None),
            lock_action=p.lock_action, unlock_action=p.action,
            unlock_event=p.predicted_events[0], source_trace=p.source_trace,
        )
        extra = StatePool([p.source_trace], [p.lock_action], [p.action])
        view = PoolOverlay(self.pool, extra)
        found = [check_rd(p.source_trace, cfg, matching) if p.source_trace.deposit_events else None,
                 check_cp(p.lock_action, p.source_trace, cfg, matching)]
        found += [check_au(e, view, cfg, matching) for e in p.predicted_events]
        out = [attach_sequence(v, seq, cfg) for v in found if v is not None]
        out.sort(key=Violation.sort_key)
        return out

    def _commit(self, p: PendingUnlock) -> None:
        self.pool.add_trace(p.source_trace)
        self.pool.add_lock_action(p.lock_action)
        self.pool.add_unlock_action(p.action)
        self._consumed.add(action_key(p.action))


def _peek_id(line: str) -> str:
    try:
        obj = json.loads(line)
        rid = obj.get("id", "") if isinstance(obj, dict) else ""
        return rid if isinstance(rid, str) else ""
    except (ValueError, AttributeError):
        return ""


def screen(p: PendingUnlock, cfg: BridgeConfig, matching: Matching | None = None,
           monitor: Monitor | None = None) -> MonitorDecision:
    """Screen one pending unlock, against a fresh pool unless a monitor is given."""
    return (monitor or Monitor(cfg, matching)).screen(p)


def replay(log_: DecisionLog, cfg: BridgeConfig, matching: Matching | None = None
           ) -> Iterator[tuple[dict, dict]]:
    """Re-run every logged request on a fresh monitor; yields (logged, replayed) records
    without latency."""
    mon = Monitor(cfg, matching)
    for request_line, logged in log_.entries:
        replayed = mon.screen_line(request_line).to_record(with_latency=False)
        logged = {k: v for k, v in logged.items() if k != "latency_us"}
        yield logged, replayed
