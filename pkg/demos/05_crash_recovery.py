"""Crash one validator and bring it back; then crash two and watch progress stop."""
from utxodebt.simulation import Command, SimConfig, run_simulation, verify_replication
from utxodebt.workload import random_workload

wl = random_workload(seed=3, n_keys=10, n_issuers=2, n_txs=100, validators=4)
commands = [Command(5 * i, tx) for i, tx in enumerate(wl.txs)]

cfg = SimConfig(seed=3, blocks=80, crash_schedule=[(2, 50, 500)])
trace = run_simulation(cfg, commands, wl.genesis)
for v, (height, root) in sorted(trace.final.items()):
    print(f"validator {v}: height {height} root {root.hex()[:16]}")
print("agree:", verify_replication(trace))

# with two of four down the remaining pair can never reach a 3-vote quorum
cfg = SimConfig(seed=3, blocks=80, crash_schedule=[(1, 200, None), (3, 200, None)], max_ticks=3000)
trace = run_simulation(cfg, commands, wl.genesis)
last_before = max(r.height for r in trace.records if r.tick <= 200)
print("height at crash", last_before, "final height", trace.committed_height(), "agree:", verify_replication(trace))
