"""Splitting one issuance over many outputs hides who owes what but not how much is owed."""
from utxodebt import Genesis, KeyPair, LedgerState
from utxodebt.debt import IssuanceRequest, issue_debt

bank = KeyPair.from_seed("bank")
debtors = [KeyPair.from_seed(f"debtor-{i}") for i in range(8)]
genesis = Genesis(issuers=[bank.pubkey])

for k in (1, 2, 5, 8):
    state = LedgerState.from_genesis(genesis)
    shares = [1000 // k] * k
    shares[-1] += 1000 - sum(shares)
    debt_tx, _ = issue_debt(IssuanceRequest(bank, tuple(zip((d.pubkey_hash for d in debtors), shares)), 1))
    state.validate(debt_tx)
    state.apply(debt_tx)
    entries = state.debts_of_creditor(bank.pubkey_hash)
    print(f"k={k}  outputs={len(debt_tx.outputs)}  aggregate={state.aggregate_debt()}  "
          f"creditor remaining={sum(e.remaining for e in entries)}")
