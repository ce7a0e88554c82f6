"""Violation reports: per-bug summary, block-range clusters, filtering and rendering."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Iterable

from . import __version__
from .errors import BadFlag
from .ingest import RawRecord, dumps_record, encode_line
from .properties import Bug, Violation

DEFAULT_GAP = 500
SORTS = ("block", "tx", "bug")
FORMATS = ("table", "jsonl")


@dataclass(frozen=True)
class Cluster:
    chain: str
    from_block: int
    to_block: int
    count: int

    def to_record(self) -> dict:
        return {"chain": self.chain, "from_block": self.from_block, "to_block": self.to_block,
                "count": self.count}


def cluster_blocks(violations: Iterable[Violation], gap: int = DEFAULT_GAP) -> list[Cluster]:
    """Single-linkage grouping per chain: neighbours at most ``gap`` blocks apart share a cluster."""
    if gap < 0:
        raise BadFlag("cluster gap must be nonnegative")
    by_chain: dict[str, list[int]] = {}
    for v in violations:
        by_chain.setdefault(v.chain, []).append(v.block)
    out = []
    for chain in sorted(by_chain):
        blocks = sorted(by_chain[chain])
        lo = prev = blocks[0]
        n = 1
        for b in blocks[1:]:
            if b - prev > gap:
                out.append(Cluster(chain, lo, prev, n))
                lo, n = b, 0
            prev = b
            n += 1
        out.append(Cluster(chain, lo, prev, n))
    return out


def input_digest(records: Iterable[RawRecord]) -> str:
    """Order-independent content hash of the analyzed records."""
    lines = sorted(encode_line(r.state, r.kind) for r in records)
    h = hashlib.sha256()
    for line in lines:
        h.update(line.encode("utf-8"))
        h.update(b"\n")
    return "sha256:" + h.hexdigest()


@dataclass(frozen=True)
class Report:
    violations: tuple
    input_digest: str = ""
    gap: int = DEFAULT_GAP
    filtered_records: int = 0
    tool_version: str = __version__
    clusters: tuple = field(init=False)
    summary: dict = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "violations", tuple(self.violations))
        object.__setattr__(self, "clusters", tuple(cluster_blocks(self.violations, self.gap)))
        counts = {b.value: 0 for b in Bug}
        for v in self.violations:
            counts[v.bug.value] += 1
        object.__setattr__(self, "summary", counts)

    def summary_record(self) -> dict:
        return {
            "type": "summary",
            "counts": self.summary,
            "total": len(self.violations),
            "clusters": [c.to_record() for c in self.clusters],
            "filtered_records": self.filtered_records,
            "input_digest": self.input_digest,
            "tool_version": self.tool_version,
        }


@dataclass(frozen=True)
class ReportView:
    bug: str | None = None
    from_block: int | None = None
    to_block: int | None = None
    address: str | None = None
    tx: str | None = None
    sort: str = "block"
    fmt: str = "jsonl"

    def __post_init__(self):
        if self.bug is not None and self.bug not in {b.value for b in Bug}:
            raise BadFlag(f"--bug must be one of UDE, IEP, UU (got {self.bug!r})")
        if self.sort not in SORTS:
            raise BadFlag(f"--sort must be one of {', '.join(SORTS)} (got {self.sort!r})")
        if self.fmt not in FORMATS:
            raise BadFlag(f"--format must be one of {', '.join(FORMATS)} (got {self.fmt!r})")
        for name in ("from_block", "to_block"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise BadFlag(f"--{name.replace('_', '-')} must be nonnegative")

    def selects(self, v: Violation) -> bool:
        if self.bug is not None and v.bug.value != self.bug:
            return False
        if self.from_block is not None and v.block < self.from_block:
            return False
        if self.to_block is not None and v.block > self.to_block:
            return False
        if self.address is not None:
            needle = self.address.lower()
            if not v.sequence or needle not in {a.hex for a in v.sequence.participants()}:
                return False
        if self.tx is not None:
            needle = self.tx.lower()
            hashes = {v.tx}
            if v.sequence is not None and v.sequence.source_tx is not None:
                hashes.add(v.sequence.source_tx.hash)
            if needle not in hashes:
                return False
        return True


_BUG_ORDER = {b.value: i for i, b in enumerate(Bug)}


def apply_view(report: Report, view: ReportView) -> Report:
    kept = [v for v in report.violations if view.selects(v)]
    if view.sort == "tx":
        kept.sort(key=lambda v: v.tx)
    elif view.sort == "bug":
        kept.sort(key=lambda v: (_BUG_ORDER[v.bug.value], v.block, v.tx))
    else:
        kept.sort(key=lambda v: (v.block, v.tx))
    return replace(report, violations=tuple(kept))


def render_jsonl(report: Report) -> str:
    lines = [dumps_record(v.to_record()) for v in report.violations]
    lines.append(dumps_record(report.summary_record()))
    return "\n".join(lines) + "\n"


def render_table(report: Report) -> str:
    header = ("BLOCK", "CHAIN", "TX", "BUG", "CHECK", "FAILED", "SEVERITY")
    rows = [header] + [
        (str(v.block), v.chain, v.tx[:18] + "..", v.bug.value, v.property.value,
         v.failed_conjunct, v.severity.value)
        for v in report.violations
    ]
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    s = report.summary
    lines.append("")
    lines.append(f"{len(report.violations)} violations: UDE={s['UDE']} IEP={s['IEP']} UU={s['UU']}")
    for c in report.clusters:
        lines.append(f"  cluster {c.chain} blocks {c.from_block}-{c.to_block}: {c.count}")
    return "\n".join(lines) + "\n"


def report_filter_sort(report: Report, view: ReportView) -> str:
    shown = apply_view(report, view)
    return render_jsonl(shown) if view.fmt == "jsonl" else render_table(shown)


def load_report(text: str) -> tuple[list[dict], dict]:
    """Parse rendered JSONL back into (violation records, summary record)."""
    rows = [json.loads(line) for line in text.splitlines() if line.strip()]
    return [r for r in rows if r.get("type") == "violation"], \
        next(r for r in rows if r.get("type") == "summary")
