"""Regenerate the committed attack-shaped fixtures.

    python tests/fixtures/build_fixtures.py

qubit/       20 UDE sequences: 16 deposits of the zero-address token with no lock at all
             (the reported shape) plus 4 deposits backed by a far smaller lock (crafted,
             unreported shape), among 30 benign transfers.
thorchain1/  9 IEP sequences: 6 deposits of a fake token whose symbol is the native coin's,
             parsed as the native coin, plus 3 deposits emitted by a non-router contract,
             among 30 benign transfers.
modes/       one source transaction with a single lock and two identical deposits:
             accepted under paper-literal matching, one UDE under injective matching.
"""
from __future__ import annotations

import sys
from pathlib import Path

from bridgescope.config import dump_config
from bridgescope.ingest import render_trace_file
from bridgescope.model import (
    Address,
    AssetId,
    DepositEvent,
    LockAction,
    LockEvent,
    TxRef,
    UnlockAction,
    UnlockEvent,
)
from bridgescope.simulator import ScenarioSpec, Simulator, router_address

HERE = Path(__file__).parent
ZERO = "0x" + "0" * 40
BENIGN = 30


def _interleave(sim: Simulator, jobs) -> dict[str, str]:
    jobs = list(jobs) + [None] * BENIGN
    sim.rng.shuffle(jobs)
    for job in jobs:
        if job is None:
            sim.gen_benign()
        else:
            bug, variant, pair = job
            sim.inject(bug, variant, pair)
    return sim.finish().files()


def qubit() -> dict[str, str]:
    sim = Simulator(ScenarioSpec(seed=20220127))
    pair = (AssetId("src", Address("src", ZERO), "ETH"),
            AssetId("dst", Address("dst", "0x" + "9e" * 20), "qXETH"))
    jobs = [("UDE", "no-lock", pair)] * 16 + [("UDE", "wrong-amount", None)] * 4
    return _interleave(sim, jobs)


def thorchain1() -> dict[str, str]:
    sim = Simulator(ScenarioSpec(seed=20210716))
    jobs = [("IEP", "fake-symbol", None)] * 6 + [("IEP", "malicious-emitter", None)] * 3
    return _interleave(sim, jobs)


def modes() -> dict[str, str]:
    sim = Simulator(ScenarioSpec(seed=1))
    cfg = sim.config
    router = router_address("src")
    token = Address("src", "0x" + "70" * 20)
    tok = AssetId("src", token, "TOK")
    wtok = AssetId("dst", Address("dst", "0x" + "71" * 20), "TOK")
    receiver = Address("dst", "0x" + "11" * 20)
    h = "0x" + "ab" * 32
    lk = LockEvent(TxRef("src", h, 0), token, tok, 500, router, 100)
    deps = [DepositEvent(TxRef("src", h, i), router, tok, 500, "dst", wtok, receiver, 100)
            for i in (1, 2)]
    actions, payouts = [], []
    for n, dep in enumerate(deps):
        alk = LockAction(dep.tx, "src", "dst", tok, 500, wtok, receiver, 100)
        aun = UnlockAction(dep.tx, "dst", wtok, 500, receiver, True, 100)
        actions += [alk, aun]
        payouts.append(UnlockEvent(TxRef("dst", "0x" + ("c%d" % n) * 32, 0), wtok.contract, wtok,
                                   500, receiver, 200 + n))
    return {
        "src.trace": render_trace_file([lk, *deps]),
        "dst.trace": render_trace_file(payouts),
        "relayer.log": render_trace_file(actions),
        "labels.tsv": "key\tclass\tvariant\nsrc:%s\tUDE\tshared-lock\n" % h,
        "config.json": dump_config(cfg),
    }


BUILDERS = {"qubit": qubit, "thorchain1": thorchain1, "modes": modes}


def build_all() -> dict[str, dict[str, str]]:
    return {name: fn() for name, fn in BUILDERS.items()}


def main(root: Path = HERE) -> None:
    for name, files in build_all().items():
        (root / name).mkdir(parents=True, exist_ok=True)
        for fname, text in files.items():
            (root / name / fname).write_text(text, encoding="utf-8", newline="\n")
            print(root / name / fname)


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else HERE)
