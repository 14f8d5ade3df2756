"""Plain per-owner balances and per-creditor debts, updated by arithmetic only."""
from collections import defaultdict


class AccountOracle:
    def __init__(self, allocations):
        self.balances = defaultdict(int)
        for pkh, amount in allocations:
            self.balances[pkh] += amount
        self.genesis_total = sum(a for _, a in allocations)
        self.debts = defaultdict(dict)  # creditor -> {debt origin: remaining}
        self.issued = 0
        self.repaid = 0

    def apply(self, op):
        if op.kind == "transfer":
            self._move(op.payer, op.payee, op.amount)
        elif op.kind == "issue":
            for pkh, amount in op.outputs:
                self.balances[pkh] += amount
            self.debts[op.payee][op.debt_origin] = op.amount
            self.issued += op.amount
        elif op.kind == "repay":
            self._move(op.payer, op.payee, op.amount)
            book = self.debts[op.payee]
            book[op.debt_origin] -= op.amount
            assert book[op.debt_origin] >= 0
            if book[op.debt_origin] == 0:
                del book[op.debt_origin]
            self.repaid += op.amount
        else:
            raise ValueError(op.kind)

    def _move(self, src, dst, amount):
        self.balances[src] -= amount
        assert self.balances[src] >= 0, "oracle balance went negative"
        self.balances[dst] += amount

    def balance(self, pkh):
        return self.balances.get(pkh, 0)

    def creditor_book(self, creditor):
        return sorted(self.debts.get(creditor, {}).items())

    @property
    def outstanding(self):
        return self.issued - self.repaid
