"""Transaction data structures, canonical wire format, hashing and signing.

Four transaction kinds share one layout and are told apart by the output
index carried in their (single) input:

    normal            every input index >= 0, each naming a live UTXO
    coinbase          one input, index -1   (genesis allocations only)
    debt              one input, index -2   (prev_field holds the creditor key)
    outstanding_debt  one input, index -3   (unmatched; lives in the debt pool)

Wire format (all integers little-endian, fixed width)::

    version u16 | kind u8 | n_in u32 | inputs | n_out u32 | outputs
    | locktime u32 | loan_type u16 | debt_ref[32]

    input  = prev_field[32] | output_index i32 | unlock_pubkey[32] | unlock_sig[64]
    output = amount u64 | pubkey_hash[32]
"""
from __future__ import annotations

import enum
import hashlib
import os
import struct
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable, Sequence

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from .errors import DuplicateInput, EncodingError, MalformedTransaction

TX_VERSION = 1
ZERO32 = bytes(32)
ZERO64 = bytes(64)

COINBASE_INDEX = -1
DEBT_INDEX = -2
OUTSTANDING_INDEX = -3

MAX_AMOUNT = 2**64 - 1
MAX_LIST_LEN = 2**16

_HEADER = struct.Struct("<HBI")
_INPUT = struct.Struct("<32si32s64s")
_OUTPUT = struct.Struct("<Q32s")
_COUNT = struct.Struct("<I")
_TRAILER = struct.Struct("<IH32s")


class Kind(enum.IntEnum):
    NORMAL = 0
    COINBASE = 1
    DEBT = 2
    OUTSTANDING_DEBT = 3


_SENTINEL_KIND = {
    COINBASE_INDEX: Kind.COINBASE,
    DEBT_INDEX: Kind.DEBT,
    OUTSTANDING_INDEX: Kind.OUTSTANDING_DEBT,
}


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def hash_pubkey(pubkey: bytes) -> bytes:
    return sha256(pubkey)


class KeyPair:
    """An Ed25519 signing key. Signatures are deterministic (RFC 8032)."""

    def __init__(self, secret: bytes):
        if len(secret) != 32:
            raise ValueError("Ed25519 secret must be 32 bytes")
        self.secret = bytes(secret)
        self._key = Ed25519PrivateKey.from_private_bytes(self.secret)
        self.pubkey = self._key.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
        self.pubkey_hash = hash_pubkey(self.pubkey)

    @classmethod
    def generate(cls) -> "KeyPair":
        return cls(os.urandom(32))

    @classmethod
    def from_seed(cls, seed: str | bytes) -> "KeyPair":
        """Deterministic key for tests and simulations. Never use for real funds."""
        if isinstance(seed, str):
            seed = seed.encode()
        return cls(sha256(b"utxodebt-seed:" + seed))

    @property
    def lock(self) -> "LockingCondition":
        return LockingCondition(self.pubkey_hash)

    def sign(self, digest: bytes) -> bytes:
        return self._key.sign(digest)

    def __repr__(self) -> str:
        return f"KeyPair(pubkey={self.pubkey.hex()[:16]}...)"


def verify_signature(pubkey: bytes, signature: bytes, digest: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(pubkey).verify(signature, digest)
    except (InvalidSignature, ValueError):
        return False
    return True


@dataclass(frozen=True)
class LockingCondition:
    """Pay-to-pubkey-hash: spendable by the key whose SHA-256 is pubkey_hash."""

    pubkey_hash: bytes

    @classmethod
    def for_pubkey(cls, pubkey: bytes) -> "LockingCondition":
        return cls(hash_pubkey(pubkey))


@dataclass(frozen=True, order=True)
class OutPoint:
    tx_hash: bytes
    index: int

    def __str__(self) -> str:
        return f"{self.tx_hash.hex()}:{self.index}"

    @classmethod
    def parse(cls, text: str) -> "OutPoint":
        h, _, i = text.partition(":")
        return cls(bytes.fromhex(h), int(i))


@dataclass(frozen=True)
class TxOutput:
    amount: int
    lock: LockingCondition


@dataclass(frozen=True)
class TxInput:
    # transaction hash for normal inputs; creditor public key for debt inputs
    prev_field: bytes
    output_index: int
    unlock_pubkey: bytes = ZERO32
    unlock_sig: bytes = ZERO64

    @property
    def outpoint(self) -> OutPoint:
        return OutPoint(self.prev_field, self.output_index)

    def unsigned(self) -> "TxInput":
        return replace(self, unlock_pubkey=ZERO32, unlock_sig=ZERO64)


@dataclass(frozen=True)
class Transaction:
    kind: Kind
    inputs: tuple[TxInput, ...]
    outputs: tuple[TxOutput, ...]
    loan_type: int = 0
    debt_ref: bytes = ZERO32
    version: int = TX_VERSION
    locktime: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))

    @cached_property
    def encoded(self) -> bytes:
        return canonical_encode(self)

    @cached_property
    def hash(self) -> bytes:
        return sha256(self.encoded)

    def total_output(self) -> int:
        return sum(o.amount for o in self.outputs)

    def __hash__(self) -> int:
        return hash(self.hash)


def _check_bytes(value: bytes, width: int, what: str) -> None:
    if not isinstance(value, (bytes, bytearray)) or len(value) != width:
        raise EncodingError(f"{what} must be {width} bytes")


def _check_int(value: int, lo: int, hi: int, what: str) -> None:
    if not isinstance(value, int) or not lo <= value <= hi:
        raise EncodingError(f"{what} out of range: {value!r}")


def canonical_encode(tx: Transaction) -> bytes:
    if len(tx.inputs) > MAX_LIST_LEN or len(tx.outputs) > MAX_LIST_LEN:
        raise EncodingError("list length exceeds 2^16 entries")
    _check_int(tx.version, 0, 0xFFFF, "version")
    _check_int(tx.locktime, 0, 0xFFFFFFFF, "locktime")
    _check_int(tx.loan_type, 0, 0xFFFF, "loan_type")
    _check_bytes(tx.debt_ref, 32, "debt_ref")

    parts = [_HEADER.pack(tx.version, int(tx.kind), len(tx.inputs))]
    for txin in tx.inputs:
        _check_bytes(txin.prev_field, 32, "prev_field")
        _check_bytes(txin.unlock_pubkey, 32, "unlock_pubkey")
        _check_bytes(txin.unlock_sig, 64, "unlock_sig")
        _check_int(txin.output_index, -(2**31), 2**31 - 1, "output_index")
        parts.append(
            _INPUT.pack(txin.prev_field, txin.output_index, txin.unlock_pubkey, txin.unlock_sig)
        )
    parts.append(_COUNT.pack(len(tx.outputs)))
    for out in tx.outputs:
        _check_int(out.amount, 0, MAX_AMOUNT, "amount")
        _check_bytes(out.lock.pubkey_hash, 32, "pubkey_hash")
        parts.append(_OUTPUT.pack(out.amount, out.lock.pubkey_hash))
    parts.append(_TRAILER.pack(tx.locktime, tx.loan_type, tx.debt_ref))
    return b"".join(parts)


def decode(data: bytes) -> Transaction:
    """Inverse of canonical_encode. Raises EncodingError on any malformed input."""
    view = memoryview(bytes(data))
    pos = 0

    def take(st: struct.Struct):
        nonlocal pos
        if pos + st.size > len(view):
            raise EncodingError("truncated transaction")
        values = st.unpack_from(view, pos)
        pos += st.size
        return values

    version, kind_tag, n_in = take(_HEADER)
    if kind_tag not in Kind._value2member_map_:
        raise EncodingError(f"unknown kind tag {kind_tag}")
    if n_in > MAX_LIST_LEN:
        raise EncodingError("too many inputs")
    inputs = [TxInput(*take(_INPUT)) for _ in range(n_in)]
    (n_out,) = take(_COUNT)
    if n_out > MAX_LIST_LEN:
        raise EncodingError("too many outputs")
    outputs = []
    for _ in range(n_out):
        amount, pkh = take(_OUTPUT)
        outputs.append(TxOutput(amount, LockingCondition(pkh)))
    locktime, loan_type, debt_ref = take(_TRAILER)
    if pos != len(view):
        raise EncodingError("trailing bytes after transaction")
    return Transaction(
        kind=Kind(kind_tag),
        inputs=tuple(inputs),
        outputs=tuple(outputs),
        loan_type=loan_type,
        debt_ref=debt_ref,
        version=version,
        locktime=locktime,
    )


def tx_hash(tx: Transaction) -> bytes:
    return tx.hash


def sighash(tx: Transaction) -> bytes:
    """Digest every input signs: the tx with all unlock fields zeroed."""
    stripped = replace(tx, inputs=tuple(i.unsigned() for i in tx.inputs))
    return sha256(canonical_encode(stripped))


def sign_input(tx: Transaction, input_index: int, key: KeyPair) -> Transaction:
    if not 0 <= input_index < len(tx.inputs):
        raise IndexError(f"no input {input_index}")
    sig = key.sign(sighash(tx))
    inputs = list(tx.inputs)
    inputs[input_index] = replace(inputs[input_index], unlock_pubkey=key.pubkey, unlock_sig=sig)
    return replace(tx, inputs=tuple(inputs))


def sign_all(tx: Transaction, key: KeyPair) -> Transaction:
    digest = sighash(tx)
    sig = key.sign(digest)
    inputs = tuple(replace(i, unlock_pubkey=key.pubkey, unlock_sig=sig) for i in tx.inputs)
    return replace(tx, inputs=inputs)


def verify_unlock(lock: LockingCondition, txin: TxInput, digest: bytes) -> bool:
    if hash_pubkey(txin.unlock_pubkey) != lock.pubkey_hash:
        return False
    return verify_signature(txin.unlock_pubkey, txin.unlock_sig, digest)


def classify(tx: Transaction) -> Kind:
    """Kind implied by the input sentinels; must agree with the kind tag."""
    if not tx.inputs:
        raise MalformedTransaction("transaction has no inputs")
    indices = [i.output_index for i in tx.inputs]
    if all(ix >= 0 for ix in indices):
        kind = Kind.NORMAL
    elif len(indices) == 1 and indices[0] in _SENTINEL_KIND:
        kind = _SENTINEL_KIND[indices[0]]
    else:
        raise MalformedTransaction(f"mixed or unknown input sentinels {indices}")
    if kind != tx.kind:
        raise MalformedTransaction(f"kind tag {tx.kind.name} disagrees with inputs ({kind.name})")
    return kind


def checked_sum(amounts: Iterable[int]) -> int:
    total = 0
    for a in amounts:
        total += a
        if total > MAX_AMOUNT:
            raise MalformedTransaction("amount sum overflows 64 bits")
    return total


def check_structure(tx: Transaction) -> Kind:
    """Stateless well-formedness checks. Returns the transaction kind."""
    canonical_encode(tx)  # field widths
    if tx.version != TX_VERSION:
        raise MalformedTransaction(f"unsupported version {tx.version}")
    if tx.locktime != 0:
        raise MalformedTransaction("locktime must be 0")
    kind = classify(tx)
    if not tx.outputs:
        raise MalformedTransaction("transaction has no outputs")
    if any(o.amount <= 0 for o in tx.outputs):
        raise MalformedTransaction("zero-value output")
    checked_sum(o.amount for o in tx.outputs)

    if kind == Kind.NORMAL:
        if tx.loan_type != 0:
            raise MalformedTransaction("loan_type is only meaningful on debt transactions")
        seen = set()
        for txin in tx.inputs:
            if txin.outpoint in seen:
                raise DuplicateInput(f"outpoint {txin.outpoint} spent twice")
            seen.add(txin.outpoint)
    elif kind == Kind.COINBASE:
        if tx.loan_type != 0 or tx.debt_ref != ZERO32:
            raise MalformedTransaction("coinbase carries no loan metadata")
    elif kind == Kind.DEBT:
        txin = tx.inputs[0]
        if txin.unlock_pubkey != txin.prev_field:
            raise MalformedTransaction("debt input must record the creditor key in both fields")
        if tx.loan_type == 0:
            raise MalformedTransaction("debt transaction needs loan_type > 0")
        if tx.debt_ref != ZERO32:
            raise MalformedTransaction("debt transaction must not carry debt_ref")
    else:
        if len(tx.outputs) != 1:
            raise MalformedTransaction("outstanding debt transaction pays exactly one creditor")
        if tx.debt_ref == ZERO32:
            raise MalformedTransaction("outstanding debt transaction must name its debt")
    return kind


def make_transfer(
    spends: Sequence[OutPoint],
    outputs: Sequence[tuple[bytes, int]],
    key: KeyPair,
    debt_ref: bytes = ZERO32,
) -> Transaction:
    """Normal transaction spending `spends` (all owned by `key`), signed."""
    tx = Transaction(
        kind=Kind.NORMAL,
        inputs=tuple(TxInput(op.tx_hash, op.index) for op in spends),
        outputs=tuple(TxOutput(amount, LockingCondition(pkh)) for pkh, amount in outputs),
        debt_ref=debt_ref,
    )
    return sign_all(tx, key)
