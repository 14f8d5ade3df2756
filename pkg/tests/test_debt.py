from itertools import product

import pytest

from helpers import commit, issue
from oracles.account import AccountOracle
from utxodebt.debt import (
    Coin,
    IssuanceRequest,
    RepaymentRequest,
    issue_debt,
    repay,
    repay_full,
    repay_partial,
    select_coins,
    select_utxos,
)
from utxodebt.errors import InsufficientFunding, MalformedTransaction, UnauthorizedIssuer, UnknownDebt
from utxodebt.ledger import Genesis, LedgerState
from utxodebt.tx import DEBT_INDEX, OUTSTANDING_INDEX, KeyPair, Kind, OutPoint, sighash, verify_signature
from utxodebt.workload import Op


def coins(*amounts):
    return [Coin(OutPoint(bytes([i]) * 32, 0), a) for i, a in enumerate(amounts)]


class TestIssue:
    def test_pair_shape(self, keys):
        bank = keys["bank"]
        debt_tx, odt = issue_debt(IssuanceRequest(bank, ((keys["alice"].pubkey_hash, 60), (keys["bob"].pubkey_hash, 40)), 2))
        assert debt_tx.kind == Kind.DEBT and len(debt_tx.outputs) == 2
        (txin,) = debt_tx.inputs
        assert txin.prev_field == bank.pubkey == txin.unlock_pubkey and txin.output_index == DEBT_INDEX
        assert verify_signature(bank.pubkey, txin.unlock_sig, sighash(debt_tx))
        assert odt.kind == Kind.OUTSTANDING_DEBT
        assert odt.inputs[0].output_index == OUTSTANDING_INDEX
        assert odt.outputs[0].amount == 100 and odt.outputs[0].lock == bank.lock
        assert odt.debt_ref == debt_tx.hash and odt.loan_type == 2

    def test_split_matches_single(self, genesis, keys):
        aggregates = []
        for outputs in ([(keys["carol"].pubkey_hash, 100)], [(keys["carol"].pubkey_hash, 60), (keys["dave"].pubkey_hash, 40)]):
            s = LedgerState.from_genesis(genesis)
            issue(s, keys["bank"], outputs)
            aggregates.append(s.aggregate_debt())
        assert aggregates == [100, 100]

    def test_unauthorized_locally(self, keys):
        with pytest.raises(UnauthorizedIssuer):
            issue_debt(IssuanceRequest(keys["rogue"], ((keys["alice"].pubkey_hash, 1),), 1), issuers=[keys["bank"].pubkey])

    @pytest.mark.parametrize("outputs,loan_type", [((), 1), (((b"\x00" * 32, 5),), 0), (((b"\x00" * 32, 0),), 1)])
    def test_bad_requests(self, keys, outputs, loan_type):
        with pytest.raises(MalformedTransaction):
            issue_debt(IssuanceRequest(keys["bank"], outputs, loan_type))

    def test_committed_entry_matches_constructed_odt(self, state, keys):
        debt_tx, odt = issue(state, keys["bank"], [(keys["alice"].pubkey_hash, 7)])
        assert odt.hash in state.debts


class TestRepay:
    @pytest.fixture
    def loan(self, state, keys):
        debt_tx, odt = issue(state, keys["bank"], [(keys["dave"].pubkey_hash, 100)])
        return state, state.debt_entry(odt.hash)

    def test_full_exact(self, loan, keys):
        state, entry = loan
        # dave holds 70 + 100; pay a 70-remaining debt after a 30 partial
        pay, succ = repay(state, entry.odt_hash, keys["carol"], 30)
        commit(state, pay)
        entry = state.debt_entry(succ.hash)
        assert entry.remaining == 70
        seventy = next(c for c in state.coins_of(keys["dave"].pubkey_hash) if c.amount == 70)
        tx = repay_full(entry, RepaymentRequest(entry.odt_hash, keys["dave"], 70, (seventy,)))
        assert [(o.lock, o.amount) for o in tx.outputs] == [(keys["bank"].lock, 70)]
        commit(state, tx)
        assert state.debts == {}

    def test_full_with_change(self, loan, keys):
        state, entry = loan
        pay, succ = repay(state, entry.odt_hash, keys["carol"], 30)
        commit(state, pay)
        entry = state.debt_entry(succ.hash)
        hundred = next(c for c in state.coins_of(keys["dave"].pubkey_hash) if c.amount == 100)
        tx = repay_full(entry, RepaymentRequest(entry.odt_hash, keys["dave"], 70, (hundred,)))
        assert [(o.lock, o.amount) for o in tx.outputs] == [(keys["bank"].lock, 70), (keys["dave"].lock, 30)]
        assert tx.debt_ref == entry.debt_origin

    def test_full_insufficient(self, loan, keys):
        state, entry = loan
        fifty = state.coins_of(keys["rogue"].pubkey_hash)
        with pytest.raises(InsufficientFunding):
            repay_full(entry, RepaymentRequest(entry.odt_hash, keys["rogue"], 100, tuple(fifty)))

    def test_partial_30_of_100(self, loan, keys):
        state, entry = loan
        bank_before = state.balance_of(keys["bank"].pubkey_hash)
        req = RepaymentRequest(entry.odt_hash, keys["alice"], 30, tuple(state.coins_of(keys["alice"].pubkey_hash)))
        pay, succ = repay_partial(entry, req)
        assert pay.outputs[0].amount == 30 and pay.debt_ref == entry.debt_origin
        assert succ.outputs[0].amount == 70 and succ.debt_ref == entry.debt_origin
        assert succ.outputs[0].lock == entry.creditor_lock and succ.loan_type == entry.loan_type
        commit(state, pay)
        assert entry.odt_hash not in state.debts
        assert state.debt_entry(succ.hash).remaining == 70
        assert state.balance_of(keys["bank"].pubkey_hash) == bank_before + 30

    def test_partial_full_amount_refused(self, loan, keys):
        state, entry = loan
        req = RepaymentRequest(entry.odt_hash, keys["alice"], 100, tuple(state.coins_of(keys["alice"].pubkey_hash)))
        with pytest.raises(ValueError, match="repay_full"):
            repay_partial(entry, req)

    def test_partial_zero_refused(self, loan, keys):
        state, entry = loan
        with pytest.raises(ValueError):
            repay_partial(entry, RepaymentRequest(entry.odt_hash, keys["alice"], 0, ()))

    def test_unknown_debt(self, state, keys):
        with pytest.raises(UnknownDebt):
            repay(state, b"\x01" * 32, keys["alice"], 5)

    def test_partial_then_full_vs_single_full(self, genesis, keys):
        """One full repayment and a 30 + 70 split end in the same place, and match the oracle."""
        finals = []
        for plan in ([100], [30, 70]):
            s = LedgerState.from_genesis(genesis)
            oracle = AccountOracle(genesis.allocations)
            debt_tx, odt = issue(s, keys["bank"], [(keys["alice"].pubkey_hash, 100)])
            oracle.apply(Op("issue", b"", keys["bank"].pubkey_hash, 100, debt_tx.hash, ((keys["alice"].pubkey_hash, 100),)))
            current = odt.hash
            for amount in plan:
                pay, succ = repay(s, current, keys["alice"], amount)
                commit(s, pay)
                oracle.apply(Op("repay", keys["alice"].pubkey_hash, keys["bank"].pubkey_hash, amount, debt_tx.hash))
                current = succ.hash if succ is not None else None
            assert current is None and s.debts == {}
            for k in keys.values():
                assert s.balance_of(k.pubkey_hash) == oracle.balance(k.pubkey_hash)
            assert s.aggregate_debt() == oracle.outstanding == 0
            finals.append((s.balance_of(keys["bank"].pubkey_hash), s.balance_of(keys["alice"].pubkey_hash), s.aggregate_debt()))
        assert finals[0] == finals[1] == (100, 1000, 0)


class TestSelection:
    def test_greedy_largest_first(self):
        assert [c.amount for c in select_coins(coins(50, 30, 20), 60)] == [50, 30]

    def test_exact(self):
        assert [c.amount for c in select_coins(coins(50), 50)] == [50]

    def test_insufficient(self):
        with pytest.raises(InsufficientFunding):
            select_coins(coins(10, 10), 30)

    def test_ties_by_outpoint(self):
        picked = select_coins(list(reversed(coins(10, 10, 10))), 15)
        assert [c.outpoint.tx_hash[0] for c in picked] == [0, 1]

    def test_select_utxos_on_state(self, state, keys):
        issue(state, keys["bank"], [(keys["carol"].pubkey_hash, 50), (keys["carol"].pubkey_hash, 30), (keys["carol"].pubkey_hash, 20)])
        ops = select_utxos(state, keys["carol"].pubkey_hash, 160)
        assert [state.utxos[o].amount for o in ops] == [100, 50, 30]


def test_lineage_by_hash_chasing(state, keys):
    debt_tx, odt = issue(state, keys["bank"], [(keys["alice"].pubkey_hash, 50)])
    current, payments = odt.hash, []
    for amount in (5, 10, 35):
        pay, succ = repay(state, current, keys["bob"], amount)
        commit(state, pay)
        payments.append(pay)
        if succ is not None:
            assert succ.debt_ref == debt_tx.hash
            current = succ.hash
    assert all(p.debt_ref == debt_tx.hash for p in payments)
    assert sum(p.outputs[0].amount for p in payments) == 50
