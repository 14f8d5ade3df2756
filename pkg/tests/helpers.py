from utxodebt.debt import IssuanceRequest, issue_debt
from utxodebt.tx import Kind, LockingCondition, Transaction, TxInput, TxOutput, make_transfer


def spend_all(state, key, outputs):
    """Transfer built by hand: spend every coin `key` owns into `outputs` plus change."""
    coins = state.coins_of(key.pubkey_hash)
    total = sum(c.amount for c in coins)
    change = total - sum(a for _, a in outputs)
    outs = list(outputs) + ([(key.pubkey_hash, change)] if change else [])
    return make_transfer([c.outpoint for c in coins], outs, key)


def commit(state, tx):
    state.validate(tx)
    state.apply(tx)
    return tx


def issue(state, issuer, outputs, loan_type=1):
    debt_tx, odt = issue_debt(IssuanceRequest(issuer, tuple(outputs), loan_type))
    commit(state, debt_tx)
    return debt_tx, odt


def tx_from_vector(vec):
    return Transaction(
        kind=Kind(vec["kind_tag"]),
        inputs=tuple(
            TxInput(bytes.fromhex(i["prev_field"]), i["output_index"],
                    bytes.fromhex(i["unlock_pubkey"]), bytes.fromhex(i["unlock_sig"]))
            for i in vec["inputs"]
        ),
        outputs=tuple(TxOutput(o["amount"], LockingCondition(bytes.fromhex(o["pubkey_hash"])))
                      for o in vec["outputs"]),
        loan_type=vec["loan_type"],
        debt_ref=bytes.fromhex(vec["debt_ref"]),
        version=vec["version"],
        locktime=vec["locktime"],
    )
