"""Randomized, always-valid transaction workloads.

Transactions are generated against a shadow ledger so that applying them in
order never fails. Alongside each transaction the generator records the
intended economic effect as a plain ``Op`` so an independent oracle can
check the ledger without reading transactions back.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from .debt import IssuanceRequest, issue_debt, repay, select_coins
from .ledger import Genesis, LedgerState
from .tx import KeyPair, Transaction, make_transfer


@dataclass(frozen=True)
class Op:
    kind: str  # "transfer" | "issue" | "repay"
    payer: bytes = b""  # sender / repaying party
    payee: bytes = b""  # recipient / creditor
    amount: int = 0
    debt_origin: bytes = b""
    outputs: tuple[tuple[bytes, int], ...] = ()


@dataclass
class Workload:
    genesis: Genesis
    keys: list[KeyPair]
    issuers: list[KeyPair]
    txs: list[Transaction] = field(default_factory=list)
    ops: list[Op] = field(default_factory=list)

    def key_by_hash(self) -> dict[bytes, KeyPair]:
        return {k.pubkey_hash: k for k in self.keys}


def validator_keys(n: int) -> list[KeyPair]:
    return [KeyPair.from_seed(f"validator-{i}") for i in range(n)]


def make_genesis(keys, issuers, allocation: int, validators: int = 0) -> Genesis:
    return Genesis(
        validators=[k.pubkey for k in validator_keys(validators)],
        issuers=[k.pubkey for k in issuers],
        allocations=[(k.pubkey_hash, allocation) for k in keys],
    )


def random_workload(
    seed: int,
    n_keys: int = 50,
    n_issuers: int = 5,
    n_txs: int = 1000,
    allocation: int = 10_000,
    validators: int = 0,
    weights: tuple[float, float, float] = (0.5, 0.2, 0.3),
) -> Workload:
    """Mixed transfers, issuances and repayments; issuers are the first keys."""
    rng = random.Random(seed)
    keys = [KeyPair.from_seed(f"workload-{seed}-key-{i}") for i in range(n_keys)]
    issuers = keys[:n_issuers]
    genesis = make_genesis(keys, issuers, allocation, validators)
    wl = Workload(genesis, keys, issuers)
    shadow = LedgerState.from_genesis(genesis)

    while len(wl.txs) < n_txs:
        kind = rng.choices(("transfer", "issue", "repay"), weights)[0]
        if kind == "repay" and not shadow.debts:
            kind = "issue"
        if kind == "issue" and not issuers:
            kind = "transfer"
        built = {"transfer": _transfer, "issue": _issue, "repay": _repay}[kind](rng, wl, shadow)
        if built is None:
            continue
        tx, op = built
        shadow.validate(tx)
        shadow.apply(tx)
        wl.txs.append(tx)
        wl.ops.append(op)
    return wl


def _funded(rng: random.Random, wl: Workload, shadow: LedgerState) -> KeyPair | None:
    funded = [k for k in wl.keys if shadow.balance_of(k.pubkey_hash) > 0]
    return rng.choice(funded) if funded else None


def _transfer(rng, wl, shadow):
    src = _funded(rng, wl, shadow)
    if src is None:
        return None
    dst = rng.choice([k for k in wl.keys if k is not src] or [src])
    balance = shadow.balance_of(src.pubkey_hash)
    amount = rng.randint(1, min(balance, 2_000))
    coins = select_coins(shadow.coins_of(src.pubkey_hash), amount)
    change = sum(c.amount for c in coins) - amount
    outputs = [(dst.pubkey_hash, amount)] + ([(src.pubkey_hash, change)] if change else [])
    tx = make_transfer([c.outpoint for c in coins], outputs, src)
    return tx, Op("transfer", src.pubkey_hash, dst.pubkey_hash, amount)


def _issue(rng, wl, shadow):
    issuer = rng.choice(wl.issuers)
    debtors = [(rng.choice(wl.keys).pubkey_hash, rng.randint(1, 500)) for _ in range(rng.randint(1, 4))]
    req = IssuanceRequest(issuer, tuple(debtors), rng.randint(1, 3))
    debt_tx, _ = issue_debt(req)
    if debt_tx.hash in shadow.applied:
        return None
    return debt_tx, Op("issue", b"", issuer.pubkey_hash, debt_tx.total_output(), debt_tx.hash, tuple(debtors))


def _repay(rng, wl, shadow):
    entry = shadow.debts[rng.choice(sorted(shadow.debts))]
    payer = _funded(rng, wl, shadow)
    if payer is None:
        return None
    balance = shadow.balance_of(payer.pubkey_hash)
    cap = min(entry.remaining, balance)
    # lean towards settling small remainders so loans actually close
    amount = cap if rng.random() < 0.3 else rng.randint(1, cap)
    payment, _ = repay(shadow, entry.odt_hash, payer, amount)
    return payment, Op("repay", payer.pubkey_hash, entry.creditor_lock.pubkey_hash, amount, entry.debt_origin)
