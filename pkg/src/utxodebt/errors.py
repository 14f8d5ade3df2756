"""Rejection classes shared by validation, the node boundary and the wallet.

Every class carries the stable numeric code reported over the node API.
"""


class LedgerError(Exception):
    code = 1
    reason = "malformed"


class MalformedTransaction(LedgerError):
    code = 1
    reason = "malformed"


class EncodingError(MalformedTransaction):
    pass


class UnknownOutpoint(LedgerError):
    code = 2
    reason = "unknown-outpoint"


class BadSignature(LedgerError):
    code = 3
    reason = "bad-signature"


class ValueMismatch(LedgerError):
    code = 4
    reason = "value-mismatch"


class DuplicateInput(ValueMismatch):
    """Two inputs (or a mempool entry and a new tx) spend the same outpoint."""

    reason = "duplicate-input"


class Replay(LedgerError):
    code = 5
    reason = "replay"


class UnauthorizedIssuer(LedgerError):
    code = 6
    reason = "unauthorized-issuer"


class InsufficientFunding(LedgerError):
    code = 7
    reason = "insufficient-funding"


class UnknownDebt(LedgerError):
    code = 8
    reason = "unknown-debt"


class NotProposer(Exception):
    """Raised when a validator is asked to propose out of turn."""


CODES = {
    0: "ok",
    1: "malformed",
    2: "unknown-outpoint",
    3: "bad-signature",
    4: "value-mismatch",
    5: "replay",
    6: "unauthorized-issuer",
    7: "insufficient-funding",
    8: "unknown-debt",
}
