"""Debt issuance and repayment.

A debt transaction mints UTXOs for the debtor from an unmatched input that
records the creditor's public key. Its mirror, the outstanding debt
transaction (ODT), is an unmatched-input transaction paying the creditor;
it is derived deterministically from the committed debt transaction and
kept in the debt pool until repaid.

Repayment is an ordinary transfer to the creditor whose ``debt_ref`` names
the originating debt transaction. Paying the whole remainder removes the
pool entry. Paying less replaces it with a successor ODT for the rest,
derived from the payment transaction, so the payer can compute the
successor's hash without asking the node.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, NamedTuple, Sequence

from .errors import InsufficientFunding, MalformedTransaction, UnauthorizedIssuer
from .tx import (
    DEBT_INDEX,
    OUTSTANDING_INDEX,
    KeyPair,
    Kind,
    LockingCondition,
    OutPoint,
    Transaction,
    TxInput,
    TxOutput,
    make_transfer,
    sign_input,
)

if TYPE_CHECKING:
    from .ledger import LedgerState, OutstandingDebtEntry


class Coin(NamedTuple):
    outpoint: OutPoint
    amount: int


@dataclass(frozen=True)
class IssuanceRequest:
    issuer_key: KeyPair
    debtor_outputs: tuple[tuple[bytes, int], ...]  # (pubkey_hash, amount)
    loan_type: int


@dataclass(frozen=True)
class RepaymentRequest:
    odt_hash: bytes
    payer_key: KeyPair
    amount: int
    funding: tuple[Coin, ...]


def outstanding_for(debt_tx: Transaction) -> Transaction:
    """The ODT created alongside `debt_tx`: the full issuance owed to its creditor."""
    creditor = debt_tx.inputs[0].prev_field
    return Transaction(
        kind=Kind.OUTSTANDING_DEBT,
        inputs=(TxInput(debt_tx.hash, OUTSTANDING_INDEX),),
        outputs=(TxOutput(debt_tx.total_output(), LockingCondition.for_pubkey(creditor)),),
        loan_type=debt_tx.loan_type,
        debt_ref=debt_tx.hash,
    )


def successor_for(entry: "OutstandingDebtEntry", payment_tx: Transaction) -> Transaction:
    """ODT for what is left after a partial payment. Creditor and loan type carry over."""
    paid = payment_tx.outputs[0].amount
    return Transaction(
        kind=Kind.OUTSTANDING_DEBT,
        inputs=(TxInput(payment_tx.hash, OUTSTANDING_INDEX),),
        outputs=(TxOutput(entry.remaining - paid, entry.creditor_lock),),
        loan_type=entry.loan_type,
        debt_ref=entry.debt_origin,
    )


def issue_debt(
    req: IssuanceRequest, issuers: Iterable[bytes] | None = None
) -> tuple[Transaction, Transaction]:
    """Build the signed debt transaction and its outstanding-debt mirror.

    When `issuers` is given the issuer key is checked locally; otherwise the
    node enforces permissioning at validation time.
    """
    key = req.issuer_key
    if issuers is not None and key.pubkey not in set(issuers):
        raise UnauthorizedIssuer("issuer key is not in the genesis issuer set")
    if not req.debtor_outputs:
        raise MalformedTransaction("issuance needs at least one debtor output")
    if req.loan_type <= 0:
        raise MalformedTransaction("loan_type must be > 0")
    if any(amount <= 0 for _, amount in req.debtor_outputs):
        raise MalformedTransaction("debtor amounts must be positive")
    unsigned = Transaction(
        kind=Kind.DEBT,
        inputs=(TxInput(key.pubkey, DEBT_INDEX),),
        outputs=tuple(TxOutput(amt, LockingCondition(pkh)) for pkh, amt in req.debtor_outputs),
        loan_type=req.loan_type,
    )
    debt_tx = sign_input(unsigned, 0, key)
    return debt_tx, outstanding_for(debt_tx)


def _payment(entry: "OutstandingDebtEntry", req: RepaymentRequest) -> Transaction:
    if req.odt_hash != entry.odt_hash:
        raise ValueError("repayment request does not match the debt entry")
    funded = sum(c.amount for c in req.funding)
    if funded < req.amount:
        raise InsufficientFunding(f"funding {funded} < repayment {req.amount}")
    outputs = [(entry.creditor_lock.pubkey_hash, req.amount)]
    if funded > req.amount:
        outputs.append((req.payer_key.pubkey_hash, funded - req.amount))
    return make_transfer(
        [c.outpoint for c in req.funding], outputs, req.payer_key, debt_ref=entry.debt_origin
    )


def repay_full(entry: "OutstandingDebtEntry", req: RepaymentRequest) -> Transaction:
    """Match the ODT's input with the payer's funds; the entry leaves the pool on commit."""
    if req.amount != entry.remaining:
        raise ValueError(f"full repayment must equal the remaining {entry.remaining}")
    return _payment(entry, req)


def repay_partial(
    entry: "OutstandingDebtEntry", req: RepaymentRequest
) -> tuple[Transaction, Transaction]:
    """Split the debt into a payment now and a successor ODT for the rest."""
    if req.amount <= 0:
        raise ValueError("repayment amount must be positive")
    if req.amount >= entry.remaining:
        raise ValueError(
            f"amount {req.amount} does not leave a remainder of {entry.remaining}; use repay_full"
        )
    payment = _payment(entry, req)
    return payment, successor_for(entry, payment)


def select_coins(coins: Iterable[Coin], target: int) -> list[Coin]:
    """Greedy largest-first; ties broken by outpoint order."""
    picked, total = [], 0
    for coin in sorted(coins, key=lambda c: (-c.amount, c.outpoint)):
        if total >= target:
            break
        picked.append(coin)
        total += coin.amount
    if total < target:
        raise InsufficientFunding(f"balance {total} below target {target}")
    return picked


def select_utxos(state: "LedgerState", owner: bytes, target: int) -> list[OutPoint]:
    return [c.outpoint for c in select_coins(state.coins_of(owner), target)]


def repay(
    state: "LedgerState",
    odt_hash: bytes,
    payer_key: KeyPair,
    amount: int,
    funding: Sequence[Coin] | None = None,
) -> tuple[Transaction, Transaction | None]:
    """Route to full or partial repayment. Returns (payment, successor ODT or None)."""
    entry = state.debt_entry(odt_hash)
    if funding is None:
        funding = select_coins(state.coins_of(payer_key.pubkey_hash), amount)
    req = RepaymentRequest(odt_hash, payer_key, amount, tuple(funding))
    if amount == entry.remaining:
        return repay_full(entry, req), None
    return repay_partial(entry, req)
