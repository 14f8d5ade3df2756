"""Issue a loan, repay part of it, then settle the rest."""
from utxodebt import Genesis, KeyPair, LedgerState
from utxodebt.debt import IssuanceRequest, issue_debt, repay

bank = KeyPair.from_seed("bank")
carol = KeyPair.from_seed("carol")
dave = KeyPair.from_seed("dave")

genesis = Genesis(issuers=[bank.pubkey], allocations=[(dave.pubkey_hash, 200)])
state = LedgerState.from_genesis(genesis)


def commit(tx):
    state.validate(tx)
    state.apply(tx)


# the debt tx mints 100 for carol; the outstanding-debt record follows it into the pool
debt_tx, odt = issue_debt(IssuanceRequest(bank, ((carol.pubkey_hash, 100),), loan_type=1))
commit(debt_tx)
print("carol", state.balance_of(carol.pubkey_hash), "aggregate debt", state.aggregate_debt())

# anyone may repay; dave pays 30 and the pool entry is replaced by a 70 successor
payment, successor = repay(state, odt.hash, dave, 30)
commit(payment)
entry = state.debt_entry(successor.hash)
print("remaining", entry.remaining, "origin", entry.debt_origin.hex()[:16])

payment, successor = repay(state, successor.hash, carol, 70)
commit(payment)
print("settled:", successor is None, "aggregate debt", state.aggregate_debt())
print("bank", state.balance_of(bank.pubkey_hash))
