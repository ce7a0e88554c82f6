"""Bridge configuration: routers, native coin symbols, blacklist and address filters."""
from __future__ import annotations

import enum
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigInvalid, ConfigParse, MissingRouterConfig
from .model import Address, normalize_address

CONFIG_ENV = "BRIDGESCOPE_CONFIG"


class Matching(enum.Enum):
    """How lock events justify deposit events inside one source transaction.

    PAPER_LITERAL lets one lock event back any number of deposits; INJECTIVE
    demands a one-to-one assignment.
    """

    PAPER_LITERAL = "paper-literal"
    INJECTIVE = "injective"


@dataclass(frozen=True)
class BridgeConfig:
    routers: Mapping[str, frozenset] = field(default_factory=dict)
    native_symbols: Mapping[str, str] = field(default_factory=dict)
    blacklist: frozenset = frozenset()
    address_filters: frozenset = frozenset()
    matching: Matching = Matching.INJECTIVE
    fee_tolerance_bps: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "routers", {c: frozenset(a) for c, a in self.routers.items()})
        object.__setattr__(self, "native_symbols", dict(self.native_symbols))
        object.__setattr__(self, "blacklist", frozenset(self.blacklist))
        object.__setattr__(self, "address_filters", frozenset(self.address_filters))
        for chain, addrs in self.routers.items():
            for a in addrs:
                if a.chain != chain:
                    raise ConfigInvalid(f"routers.{chain}", f"address {a.hex} belongs to {a.chain}")
        overlap = self.blacklist & self.address_filters
        if overlap:
            first = min(overlap, key=lambda a: (a.chain, a.hex))
            raise ConfigInvalid(
                "blacklist", f"{first.chain}:{first.hex} also listed in address_filters"
            )
        if self.fee_tolerance_bps is not None and not 0 <= self.fee_tolerance_bps <= 10_000:
            raise ConfigInvalid("fee_tolerance_bps", "must be within 0..10000")

    def router_set(self, chain: str) -> frozenset:
        try:
            return self.routers[chain]
        except KeyError:
            raise MissingRouterConfig(chain) from None

    def is_router(self, addr) -> bool:
        return isinstance(addr, Address) and addr in self.routers.get(addr.chain, ())

    def native_symbol(self, chain: str) -> str | None:
        return self.native_symbols.get(chain)

    def to_dict(self) -> dict[str, Any]:
        def by_chain(addrs) -> dict[str, list[str]]:
            out: dict[str, list[str]] = {}
            for a in sorted(addrs, key=lambda a: (a.chain, a.hex)):
                out.setdefault(a.chain, []).append(a.hex)
            return out

        return {
            "routers": {c: sorted(a.hex for a in addrs) for c, addrs in sorted(self.routers.items())},
            "native_symbols": dict(sorted(self.native_symbols.items())),
            "blacklist": by_chain(self.blacklist),
            "address_filters": by_chain(self.address_filters),
            "matching": self.matching.value,
            "fee_tolerance_bps": self.fee_tolerance_bps,
        }


def _address_map(data: Any, where: str) -> list[Address]:
    if data is None:
        return []
    if not isinstance(data, dict):
        raise ConfigInvalid(where, "expected a mapping of chain -> list of addresses")
    out = []
    for chain, addrs in data.items():
        if isinstance(addrs, str):
            addrs = [addrs]
        if not isinstance(addrs, list):
            raise ConfigInvalid(f"{where}.{chain}", "expected a list of addresses")
        for i, raw in enumerate(addrs):
            try:
                out.append(normalize_address(raw, chain))
            except ValueError as exc:
                raise ConfigInvalid(f"{where}.{chain}[{i}]", str(exc)) from None
    return out


def config_from_dict(data: Any) -> BridgeConfig:
    if not isinstance(data, dict):
        raise ConfigInvalid("<root>", "expected a mapping")
    unknown = set(data) - {
        "routers", "native_symbols", "blacklist", "address_filters", "matching", "fee_tolerance_bps",
    }
    if unknown:
        raise ConfigInvalid(sorted(unknown)[0], "unknown field")
    routers: dict[str, set[Address]] = {}
    for a in _address_map(data.get("routers"), "routers"):
        routers.setdefault(a.chain, set()).add(a)
    for chain in (data.get("routers") or {}):
        routers.setdefault(chain, set())
    symbols = data.get("native_symbols") or {}
    if not isinstance(symbols, dict) or not all(
        isinstance(v, str) and v for v in symbols.values()
    ):
        raise ConfigInvalid("native_symbols", "expected a mapping of chain -> nonempty symbol")
    try:
        matching = Matching(data.get("matching", Matching.INJECTIVE.value))
    except ValueError:
        raise ConfigInvalid("matching", f"unknown matching mode {data.get('matching')!r}") from None
    bps = data.get("fee_tolerance_bps")
    if bps is not None and (not isinstance(bps, int) or isinstance(bps, bool)):
        raise ConfigInvalid("fee_tolerance_bps", "expected an integer or null")
    return BridgeConfig(
        routers=routers,
        native_symbols=symbols,
        blacklist=_address_map(data.get("blacklist"), "blacklist"),
        address_filters=_address_map(data.get("address_filters"), "address_filters"),
        matching=matching,
        fee_tolerance_bps=bps,
    )


def load_config(path: str | os.PathLike | None = None) -> BridgeConfig:
    """Load and validate a JSON config; falls back to ``$BRIDGESCOPE_CONFIG``."""
    if path is None:
        path = os.environ.get(CONFIG_ENV)
        if not path:
            raise ConfigParse(f"no config path given and ${CONFIG_ENV} is unset")
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigParse(f"{path}: {exc.strerror or exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParse(f"{path}:{exc.lineno}: {exc.msg}") from None
    return config_from_dict(data)


def dump_config(cfg: BridgeConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n"
