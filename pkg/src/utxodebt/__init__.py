"""Credit as unspent outputs, debt as unmatched inputs, on a replicated UTXO ledger."""
from .block import Block, merkle_root
from .debt import (
    Coin,
    IssuanceRequest,
    RepaymentRequest,
    issue_debt,
    repay,
    repay_full,
    repay_partial,
    select_utxos,
)
from .ledger import Genesis, LedgerState, OutstandingDebtEntry
from .node import Application, Response
from .tx import (
    KeyPair,
    Kind,
    LockingCondition,
    OutPoint,
    Transaction,
    TxInput,
    TxOutput,
    canonical_encode,
    classify,
    decode,
    sighash,
    sign_input,
    tx_hash,
    verify_unlock,
)

__version__ = "0.1.0"
