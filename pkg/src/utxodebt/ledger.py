"""Replicated application state: UTXO pool, debt pool and issuer set.

Transitions are deterministic: validating and applying the same ordered
transaction log to a fresh state always yields the same ``state_root``.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .debt import Coin, outstanding_for, successor_for
from .errors import (
    BadSignature,
    MalformedTransaction,
    Replay,
    UnauthorizedIssuer,
    UnknownDebt,
    UnknownOutpoint,
    ValueMismatch,
)
from .tx import (
    COINBASE_INDEX,
    ZERO32,
    Kind,
    LockingCondition,
    OutPoint,
    Transaction,
    TxInput,
    TxOutput,
    check_structure,
    sha256,
    sighash,
    verify_signature,
    verify_unlock,
)

_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")
_UTXO_ROW = struct.Struct("<32sIQ32s")
_DEBT_ROW = struct.Struct("<32s32sQ32sH")


class GenesisError(ValueError):
    pass


@dataclass(frozen=True)
class OutstandingDebtEntry:
    odt_hash: bytes
    creditor_lock: LockingCondition
    remaining: int
    debt_origin: bytes
    loan_type: int

    @classmethod
    def from_odt(cls, odt: Transaction) -> "OutstandingDebtEntry":
        out = odt.outputs[0]
        return cls(odt.hash, out.lock, out.amount, odt.debt_ref, odt.loan_type)

    def to_json(self) -> dict:
        return {
            "odt_hash": self.odt_hash.hex(),
            "creditor": self.creditor_lock.pubkey_hash.hex(),
            "remaining": self.remaining,
            "debt_origin": self.debt_origin.hex(),
            "loan_type": self.loan_type,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "OutstandingDebtEntry":
        return cls(
            bytes.fromhex(obj["odt_hash"]),
            LockingCondition(bytes.fromhex(obj["creditor"])),
            int(obj["remaining"]),
            bytes.fromhex(obj["debt_origin"]),
            int(obj["loan_type"]),
        )


def _hex32(value, what: str) -> bytes:
    try:
        raw = bytes.fromhex(value)
    except (TypeError, ValueError):
        raise GenesisError(f"{what}: not hex: {value!r}") from None
    if len(raw) != 32:
        raise GenesisError(f"{what}: expected 32 bytes, got {len(raw)}")
    return raw


@dataclass
class Genesis:
    validators: list[bytes] = field(default_factory=list)
    issuers: list[bytes] = field(default_factory=list)
    allocations: list[tuple[bytes, int]] = field(default_factory=list)

    @classmethod
    def from_json(cls, obj: dict) -> "Genesis":
        if not isinstance(obj, dict):
            raise GenesisError("genesis must be a JSON object")
        try:
            validators = [_hex32(v, "validator") for v in obj.get("validators", [])]
            issuers = [_hex32(v, "issuer") for v in obj.get("issuers", [])]
            allocations = []
            for alloc in obj.get("allocations", []):
                amount = alloc["amount"]
                if not isinstance(amount, int) or isinstance(amount, bool) or not 0 < amount < 2**64:
                    raise GenesisError(f"bad allocation amount {amount!r}")
                allocations.append((_hex32(alloc["pubkey_hash"], "pubkey_hash"), amount))
        except (KeyError, TypeError) as exc:
            raise GenesisError(f"malformed genesis: {exc}") from None
        if sum(a for _, a in allocations) >= 2**64:
            raise GenesisError("genesis allocations overflow 64 bits")
        return cls(validators, issuers, allocations)

    @classmethod
    def load(cls, path: str | Path) -> "Genesis":
        try:
            obj = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise GenesisError(f"genesis is not valid JSON: {exc}") from None
        return cls.from_json(obj)

    def to_json(self) -> dict:
        return {
            "validators": [v.hex() for v in self.validators],
            "issuers": [v.hex() for v in self.issuers],
            "allocations": [{"pubkey_hash": h.hex(), "amount": a} for h, a in self.allocations],
        }

    def coinbase(self) -> Transaction | None:
        if not self.allocations:
            return None
        return Transaction(
            kind=Kind.COINBASE,
            inputs=(TxInput(ZERO32, COINBASE_INDEX),),
            outputs=tuple(TxOutput(a, LockingCondition(h)) for h, a in self.allocations),
        )


class LedgerState:
    def __init__(self, issuers: Iterable[bytes] = ()):
        self.utxos: dict[OutPoint, TxOutput] = {}
        self.debts: dict[bytes, OutstandingDebtEntry] = {}
        self.issuers = frozenset(issuers)
        self.height = 0
        self.applied: set[bytes] = set()
        # debt origin -> hash of its live ODT; one live entry per loan
        self._by_origin: dict[bytes, bytes] = {}

    @classmethod
    def from_genesis(cls, genesis: Genesis) -> "LedgerState":
        state = cls(genesis.issuers)
        cb = genesis.coinbase()
        if cb is not None:
            state.validate(cb, genesis=True)
            state.apply(cb)
        return state

    def copy(self) -> "LedgerState":
        new = LedgerState.__new__(LedgerState)
        new.utxos = dict(self.utxos)
        new.debts = dict(self.debts)
        new.issuers = self.issuers
        new.height = self.height
        new.applied = set(self.applied)
        new._by_origin = dict(self._by_origin)
        return new

    # -- validation ---------------------------------------------------------

    def validate(self, tx: Transaction, *, genesis: bool = False) -> Kind:
        """Raise a LedgerError subclass if `tx` cannot be applied to this state."""
        kind = check_structure(tx)
        if tx.hash in self.applied:
            raise Replay(f"transaction {tx.hash.hex()} already committed")
        if kind == Kind.COINBASE:
            if not genesis:
                raise MalformedTransaction("coinbase transactions only appear in genesis")
        elif kind == Kind.OUTSTANDING_DEBT:
            raise MalformedTransaction("outstanding debt transactions live in the debt pool, not in blocks")
        elif kind == Kind.DEBT:
            self._validate_debt(tx)
        else:
            self._validate_normal(tx)
        return kind

    def _validate_debt(self, tx: Transaction) -> None:
        txin = tx.inputs[0]
        if txin.unlock_pubkey not in self.issuers:
            raise UnauthorizedIssuer("debt issued by a key outside the issuer set")
        if not verify_signature(txin.unlock_pubkey, txin.unlock_sig, sighash(tx)):
            raise BadSignature("issuer signature does not verify")

    def _validate_normal(self, tx: Transaction) -> None:
        digest = sighash(tx)
        total_in = 0
        for txin in tx.inputs:
            utxo = self.utxos.get(txin.outpoint)
            if utxo is None:
                raise UnknownOutpoint(f"no unspent output {txin.outpoint}")
            if not verify_unlock(utxo.lock, txin, digest):
                raise BadSignature(f"unlock failed for {txin.outpoint}")
            total_in += utxo.amount
        total_out = tx.total_output()
        if total_in != total_out:
            raise ValueMismatch(f"inputs {total_in} != outputs {total_out}")
        if tx.debt_ref != ZERO32:
            entry = self.entry_for_origin(tx.debt_ref)
            if entry is None:
                raise UnknownDebt(f"no outstanding debt for {tx.debt_ref.hex()}")
            payment = tx.outputs[0]
            if payment.lock != entry.creditor_lock:
                raise MalformedTransaction("repayment must pay the creditor in its first output")
            if payment.amount > entry.remaining:
                raise ValueMismatch(f"repayment {payment.amount} exceeds remaining {entry.remaining}")

    # -- transitions --------------------------------------------------------

    def apply(self, tx: Transaction) -> None:
        """Apply a validated transaction in place."""
        h = tx.hash
        if tx.kind == Kind.NORMAL:
            for txin in tx.inputs:
                del self.utxos[txin.outpoint]
            if tx.debt_ref != ZERO32:
                self._apply_repayment(tx)
        for i, out in enumerate(tx.outputs):
            self.utxos[OutPoint(h, i)] = out
        if tx.kind == Kind.DEBT:
            self._insert_entry(OutstandingDebtEntry.from_odt(outstanding_for(tx)))
        self.applied.add(h)

    def _apply_repayment(self, tx: Transaction) -> None:
        entry = self.debts.pop(self._by_origin.pop(tx.debt_ref))
        if tx.outputs[0].amount < entry.remaining:
            self._insert_entry(OutstandingDebtEntry.from_odt(successor_for(entry, tx)))

    def _insert_entry(self, entry: OutstandingDebtEntry) -> None:
        self.debts[entry.odt_hash] = entry
        self._by_origin[entry.debt_origin] = entry.odt_hash

    # -- queries ------------------------------------------------------------

    def coins_of(self, owner: bytes) -> list[Coin]:
        return sorted(
            Coin(op, out.amount) for op, out in self.utxos.items() if out.lock.pubkey_hash == owner
        )

    def balance_of(self, owner: bytes) -> int:
        return sum(out.amount for out in self.utxos.values() if out.lock.pubkey_hash == owner)

    def aggregate_debt(self) -> int:
        return sum(e.remaining for e in self.debts.values())

    def debts_of_creditor(self, creditor: bytes) -> list[OutstandingDebtEntry]:
        return sorted(
            (e for e in self.debts.values() if e.creditor_lock.pubkey_hash == creditor),
            key=lambda e: e.odt_hash,
        )

    def debt_entry(self, odt_hash: bytes) -> OutstandingDebtEntry:
        try:
            return self.debts[odt_hash]
        except KeyError:
            raise UnknownDebt(f"no debt pool entry {odt_hash.hex()}") from None

    def entry_for_origin(self, debt_origin: bytes) -> OutstandingDebtEntry | None:
        odt = self._by_origin.get(debt_origin)
        return None if odt is None else self.debts[odt]

    def total_utxo_value(self) -> int:
        return sum(out.amount for out in self.utxos.values())

    def state_root(self) -> bytes:
        """SHA-256 over sorted UTXO rows, sorted debt rows, then height."""
        parts = [_U32.pack(len(self.utxos))]
        for op in sorted(self.utxos):
            out = self.utxos[op]
            parts.append(_UTXO_ROW.pack(op.tx_hash, op.index, out.amount, out.lock.pubkey_hash))
        parts.append(_U32.pack(len(self.debts)))
        for key in sorted(self.debts):
            e = self.debts[key]
            parts.append(
                _DEBT_ROW.pack(e.odt_hash, e.creditor_lock.pubkey_hash, e.remaining, e.debt_origin, e.loan_type)
            )
        parts.append(_U64.pack(self.height))
        return sha256(b"".join(parts))


def validate_against_state(state: LedgerState, tx: Transaction) -> Kind:
    return state.validate(tx)


def apply_transaction(state: LedgerState, tx: Transaction) -> LedgerState:
    """Functional form of LedgerState.apply: the input state is left untouched."""
    new = state.copy()
    new.apply(tx)
    return new


def balance_of(state: LedgerState, owner: bytes) -> int:
    return state.balance_of(owner)


def aggregate_debt(state: LedgerState) -> int:
    return state.aggregate_debt()


def debts_of_creditor(state: LedgerState, creditor: bytes) -> list[OutstandingDebtEntry]:
    return state.debts_of_creditor(creditor)


def state_root(state: LedgerState) -> bytes:
    return state.state_root()
