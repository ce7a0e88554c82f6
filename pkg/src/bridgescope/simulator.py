"""Seeded generator of labeled bridge datasets.

A benign transfer walks every step of the lock/unlock workflow: the user locks
funds at the source router, the router emits a deposit, the relayer parses a
lock action and authorizes an unlock, and the destination token pays out.
Attack injectors reproduce the observable footprint of each bug class; the
relayer, as victim, processes whatever the attacker's deposit says.
"""
from __future__ import annotations

import hashlib
import json
import os
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .config import BridgeConfig, dump_config
from .errors import SpecParse, UnknownVariant
from .ingest import RawRecord, kind_of, write_atomic, render_trace_file
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
from .sequences import Dataset, assemble

VARIANTS = {
    "UDE": ("no-lock", "wrong-amount", "unsafe-transfer"),
    "IEP": ("malicious-emitter", "fake-symbol", "wrong-amount-parse"),
    "UU": ("no-action", "unauthorized-action", "redirected"),
}
CYCLE = "cycle"

DEFAULT_NATIVE = {"src": "ETH", "dst": "BNB"}


@dataclass(frozen=True)
class Injection:
    bug: str
    variant: str = CYCLE
    count: int = 1

    def __post_init__(self):
        if self.bug not in VARIANTS:
            raise SpecParse(f"unknown bug class {self.bug!r}")
        if self.variant != CYCLE and self.variant not in VARIANTS[self.bug]:
            raise UnknownVariant(f"{self.bug} has no variant {self.variant!r}")
        if not isinstance(self.count, int) or self.count < 0:
            raise SpecParse("injection count must be a nonnegative integer")


@dataclass(frozen=True)
class ScenarioSpec:
    seed: int = 0
    benign_count: int = 0
    injections: tuple = ()
    chains: tuple = ("src", "dst")
    assets: tuple = ()
    user_count: int = 16
    native_symbols: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise SpecParse("seed must be a 64-bit unsigned integer")
        if not isinstance(self.benign_count, int) or self.benign_count < 0:
            raise SpecParse("benign count must be a nonnegative integer")
        if len(self.chains) != 2 or self.chains[0] == self.chains[1]:
            raise SpecParse("a scenario needs two distinct chains")
        if self.user_count < 1:
            raise SpecParse("user count must be positive")
        object.__setattr__(self, "injections", tuple(self.injections))
        src, dst = self.chains
        symbols = {c: DEFAULT_NATIVE.get(n, c.upper()) for c, n in zip(self.chains, ("src", "dst"))}
        symbols.update(self.native_symbols)
        assets = tuple(self.assets) or _default_assets(src, dst, symbols)
        for a, b in assets:
            if a.chain != src or b.chain != dst:
                raise SpecParse("asset pairs must map the source chain onto the destination chain")
            for x in (a, b):
                if x.is_native and x.symbol:
                    symbols[x.chain] = x.symbol
        object.__setattr__(self, "assets", assets)
        object.__setattr__(self, "native_symbols", symbols)

    @property
    def sequence_count(self) -> int:
        return self.benign_count + sum(i.count for i in self.injections)


def _derived_address(chain: str, label: str) -> Address:
    digest = hashlib.sha256(f"{chain}/{label}".encode()).hexdigest()
    return Address(chain, "0x" + digest[:40])


def router_address(chain: str) -> Address:
    return _derived_address(chain, "router")


def _default_assets(src: str, dst: str, symbols: dict) -> tuple:
    return (
        (AssetId(src, NATIVE, symbols[src]), AssetId(dst, _derived_address(dst, "wrapped-native"),
                                                     "W" + symbols[src])),
        (AssetId(src, _derived_address(src, "usdc"), "USDC"),
         AssetId(dst, _derived_address(dst, "usdc"), "USDC")),
    )


def _asset_from(obj, chain: str) -> AssetId:
    if not isinstance(obj, dict) or "contract" not in obj:
        raise SpecParse("asset must be an object with a 'contract' field")
    contract = obj["contract"]
    try:
        c = NATIVE if contract == "NATIVE" else normalize_address(contract, chain)
    except ValueError as exc:
        raise SpecParse(str(exc)) from None
    return AssetId(chain, c, obj.get("symbol"))


def scenario_from_dict(data) -> ScenarioSpec:
    if not isinstance(data, dict):
        raise SpecParse("scenario must be a JSON object")
    allowed = {"seed", "benign", "injections", "chains", "assets", "users", "native_symbols"}
    extra = set(data) - allowed
    if extra:
        raise SpecParse(f"unknown scenario field {sorted(extra)[0]!r}")
    chains = tuple(data.get("chains", ("src", "dst")))
    if len(chains) != 2:
        raise SpecParse("chains must list exactly two chain ids")
    try:
        injections = tuple(
            Injection(i["class"], i.get("variant", CYCLE), i.get("count", 1))
            for i in data.get("injections", ())
        )
    except (KeyError, TypeError):
        raise SpecParse("each injection needs a 'class'") from None
    assets = tuple(
        (_asset_from(p.get("src"), chains[0]), _asset_from(p.get("dst"), chains[1]))
        for p in data.get("assets", ())
    )
    return ScenarioSpec(
        seed=data.get("seed", 0),
        benign_count=data.get("benign", 0),
        injections=injections,
        chains=chains,
        assets=assets,
        user_count=data.get("users", 16),
        native_symbols=data.get("native_symbols", {}),
    )


def load_scenario(path: str | os.PathLike) -> ScenarioSpec:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise SpecParse(f"{path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise SpecParse(f"{path}:{exc.lineno}: {exc.msg}") from None
    return scenario_from_dict(data)


@dataclass
class Generated:
    key: str
    bug: str | None
    variant: str | None
    states: list = field(default_factory=list)


@dataclass
class LabeledDataset:
    spec: ScenarioSpec
    config: BridgeConfig
    events: list[RawRecord]
    actions: list[RawRecord]
    labels: dict[str, tuple[str, str]]
    benign_keys: set[str]

    @property
    def records(self) -> list[RawRecord]:
        return self.events + self.actions

    def dataset(self, cfg: BridgeConfig | None = None) -> Dataset:
        return assemble(self.records, cfg or self.config)

    def manifest_lines(self) -> list[str]:
        rows = [(k, b, v) for k, (b, v) in self.labels.items()]
        rows += [(k, "benign", "-") for k in self.benign_keys]
        rows.sort()
        return ["key\tclass\tvariant"] + ["\t".join(r) for r in rows]

    def files(self) -> dict[str, str]:
        """Output file name -> content."""
        out = {}
        for chain in self.spec.chains:
            out[f"{chain}.trace"] = render_trace_file(
                r for r in self.events if r.state.tx.chain == chain
            )
        out["relayer.log"] = render_trace_file(self.actions)
        out["labels.tsv"] = "\n".join(self.manifest_lines()) + "\n"
        out["config.json"] = dump_config(self.config)
        return out

    def write(self, outdir: str | os.PathLike) -> list[Path]:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        written = []
        for name, text in self.files().items():
            write_atomic(outdir / name, text)
            written.append(outdir / name)
        return written

    def summary(self) -> dict[str, int]:
        counts = {"benign": len(self.benign_keys)}
        for bug, _ in self.labels.values():
            counts[bug] = counts.get(bug, 0) + 1
        return counts


class Simulator:
    """Stateful generator; each ``gen_*``/``inject_*`` call appends one sequence."""

    def __init__(self, spec: ScenarioSpec):
        self.spec = spec
        self.rng = random.Random(spec.seed)
        self.src, self.dst = spec.chains
        self.routers = {c: router_address(c) for c in spec.chains}
        self.config = BridgeConfig(
            routers={c: {a} for c, a in self.routers.items()},
            native_symbols=dict(spec.native_symbols),
        )
        self.users = [self._raw_address() for _ in range(spec.user_count)]
        self.blocks = {self.src: 1_000, self.dst: 5_000}
        self._used_hashes: set[str] = set()
        self.generated: list[Generated] = []

    # -- primitives --
    def _raw_address(self) -> str:
        return "0x%040x" % self.rng.getrandbits(160)

    def _addr(self, chain: str, raw: str | None = None) -> Address:
        return Address(chain, raw or self._raw_address())

    def _hash(self) -> str:
        while True:
            h = "0x%064x" % self.rng.getrandbits(256)
            if h not in self._used_hashes:
                self._used_hashes.add(h)
                return h

    def _block(self, chain: str) -> int:
        self.blocks[chain] += self.rng.randint(1, 40)
        return self.blocks[chain]

    def _amount(self) -> int:
        return self.rng.randint(10**3, 10**24)

    def _pair(self, pair=None) -> tuple[AssetId, AssetId]:
        return pair if pair is not None else self.rng.choice(self.spec.assets)

    def _native_pair(self) -> tuple[AssetId, AssetId]:
        for a, b in self.spec.assets:
            if a.is_native:
                return a, b
        return AssetId(self.src, NATIVE, self.spec.native_symbols[self.src]), self.spec.assets[0][1]

    def _user(self) -> str:
        return self.rng.choice(self.users)

    # -- building blocks --
    def _lock(self, tx: TxRef, asset: AssetId, amount: int, sender: str, to: Address, block: int):
        if asset.is_native:
            return NativeTransfer(tx, self._addr(tx.chain, sender), amount, to, block)
        return LockEvent(tx, asset.contract, asset, amount, to, block)

    def _payout(self, asset: AssetId, amount: int, to: Address) -> tuple[object, str]:
        h = self._hash()
        block = self._block(self.dst)
        tx = TxRef(self.dst, h, self.rng.randint(0, 3))
        if asset.is_native:
            ev = NativeTransfer(tx, self.routers[self.dst], amount, to, block)
        else:
            ev = UnlockEvent(tx, asset.contract, asset, amount, to, block)
        return ev, f"{self.dst}:{h}:{tx.index}"

    def _source(self, a_src, a_dst, amount, user, *, lock="router", lock_amount=None,
                emitter=None):
        """Source-chain transaction: optional lock event then the deposit event."""
        h = self._hash()
        block = self._block(self.src)
        base = self.rng.randint(0, 3)
        states = []
        if lock is not None:
            to = self.routers[self.src] if lock == "router" else self._addr(self.src)
            states.append(self._lock(TxRef(self.src, h, base), a_src,
                                     amount if lock_amount is None else lock_amount, user, to, block))
        dep_ref = TxRef(self.src, h, base + 1)
        dep = DepositEvent(dep_ref, emitter or self.routers[self.src], a_src, amount, self.dst, a_dst,
                           self._addr(self.dst, user), block)
        states.append(dep)
        return states, dep, f"{self.src}:{h}"

    def _relay(self, dep: DepositEvent, *, asset_src=None, amount_src=None, to_dst=None,
               authorized=True, unlock_amount=None):
        alk = LockAction(dep.tx, dep.tx.chain, dep.dest_chain, asset_src or dep.asset_src,
                         dep.amount_src if amount_src is None else amount_src, dep.asset_dst,
                         dep.to_dst, dep.block)
        amount = alk.amount_src if unlock_amount is None else unlock_amount
        aun = UnlockAction(dep.tx, dep.dest_chain, alk.asset_dst, amount,
                           to_dst or alk.to_dst, authorized, dep.block)
        return alk, aun

    def _emit(self, gen: Generated) -> Generated:
        self.generated.append(gen)
        return gen

    # -- sequences --
    def gen_benign(self, pair=None) -> Generated:
        a_src, a_dst = self._pair(pair)
        amount = self._amount()
        states, dep, key = self._source(a_src, a_dst, amount, self._user())
        alk, aun = self._relay(dep)
        ev, _ = self._payout(a_dst, aun.amount_dst, aun.to_dst)
        return self._emit(Generated(key, None, None, states + [alk, aun, ev]))

    def inject_ude(self, variant: str, pair=None) -> Generated:
        if variant not in VARIANTS["UDE"]:
            raise UnknownVariant(f"UDE has no variant {variant!r}")
        a_src, a_dst = self._pair(pair)
        attacker = self._raw_address()
        amount = self._amount()
        if variant == "no-lock":
            states, dep, key = self._source(a_src, a_dst, amount, attacker, lock=None)
        elif variant == "wrong-amount":
            small = self.rng.randint(1, 1000)
            states, dep, key = self._source(a_src, a_dst, small * self.rng.randint(1000, 10**6),
                                            attacker, lock_amount=small)
        else:
            states, dep, key = self._source(a_src, a_dst, amount, attacker, lock="elsewhere")
        alk, aun = self._relay(dep)
        ev, _ = self._payout(a_dst, aun.amount_dst, aun.to_dst)
        return self._emit(Generated(key, "UDE", variant, states + [alk, aun, ev]))

    def inject_iep(self, variant: str, pair=None) -> Generated:
        if variant not in VARIANTS["IEP"]:
            raise UnknownVariant(f"IEP has no variant {variant!r}")
        attacker = self._raw_address()
        amount = self._amount()
        if variant == "malicious-emitter":
            a_src, a_dst = self._pair(pair)
            states, dep, key = self._source(a_src, a_dst, amount, attacker, lock=None,
                                            emitter=self._addr(self.src))
            alk, aun = self._relay(dep)
        elif variant == "fake-symbol":
            native, a_dst = pair or self._native_pair()
            fake = AssetId(self.src, self._addr(self.src), native.symbol or
                           self.spec.native_symbols[self.src])
            states, dep, key = self._source(fake, a_dst, amount, attacker)
            alk, aun = self._relay(dep, asset_src=native)
        else:
            a_src, a_dst = self._pair(pair)
            amount = self.rng.randint(10, 10**12)
            states, dep, key = self._source(a_src, a_dst, amount, attacker)
            alk, aun = self._relay(dep, amount_src=amount * 100)
        ev, _ = self._payout(aun.asset_dst, aun.amount_dst, aun.to_dst)
        return self._emit(Generated(key, "IEP", variant, states + [alk, aun, ev]))

    def inject_uu(self, variant: str, pair=None) -> Generated:
        if variant not in VARIANTS["UU"]:
            raise UnknownVariant(f"UU has no variant {variant!r}")
        a_src, a_dst = self._pair(pair)
        attacker = self._addr(self.dst)
        amount = self._amount()
        if variant == "no-action":
            ev, key = self._payout(a_dst, amount, attacker)
            return self._emit(Generated(key, "UU", variant, [ev]))
        if variant == "unauthorized-action":
            src_ref = TxRef(self.src, self._hash(), self.rng.randint(0, 3))
            aun = UnlockAction(src_ref, self.dst, a_dst, amount, attacker, False,
                               self._block(self.src))
            ev, key = self._payout(a_dst, amount, attacker)
            return self._emit(Generated(key, "UU", variant, [aun, ev]))
        states, dep, _ = self._source(a_src, a_dst, amount, self._user())
        alk, aun = self._relay(dep, to_dst=attacker)
        ev, key = self._payout(a_dst, aun.amount_dst, attacker)
        return self._emit(Generated(key, "UU", variant, states + [alk, aun, ev]))

    def inject(self, bug: str, variant: str, pair=None) -> Generated:
        return {"UDE": self.inject_ude, "IEP": self.inject_iep, "UU": self.inject_uu}[bug](
            variant, pair)

    def finish(self) -> LabeledDataset:
        events, actions = [], []
        labels, benign = {}, set()
        for gen in self.generated:
            if gen.bug is None:
                benign.add(gen.key)
            else:
                labels[gen.key] = (gen.bug, gen.variant)
            for st in gen.states:
                kind = kind_of(st)
                if kind in ("lock_action", "unlock_action"):
                    actions.append(RawRecord(kind, st, len(actions)))
                else:
                    events.append(RawRecord(kind, st, len(events)))
        return LabeledDataset(self.spec, self.config, events, actions, labels, benign)


def plan(spec: ScenarioSpec, rng: random.Random) -> list[tuple[str | None, str | None]]:
    jobs: list[tuple[str | None, str | None]] = [(None, None)] * spec.benign_count
    for inj in spec.injections:
        for i in range(inj.count):
            variant = inj.variant if inj.variant != CYCLE else VARIANTS[inj.bug][i % 3]
            jobs.append((inj.bug, variant))
    rng.shuffle(jobs)
    return jobs


def gen_dataset(spec: ScenarioSpec) -> LabeledDataset:
    """Interleave benign and injected sequences in seeded block order."""
    sim = Simulator(spec)
    for bug, variant in plan(spec, sim.rng):
        if bug is None:
            sim.gen_benign()
        else:
            sim.inject(bug, variant)
    return sim.finish()


def variants_of(bug: str) -> Sequence[str]:
    return VARIANTS[bug]
