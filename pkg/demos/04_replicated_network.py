"""Four validators over a lossy network reach the same state at every height."""
import time

from utxodebt.simulation import Command, SimConfig, replay_oracle, run_simulation, verify_replication
from utxodebt.workload import random_workload

wl = random_workload(seed=1, n_keys=20, n_issuers=3, n_txs=300, validators=4)
commands = [Command(5 + 4 * i, tx) for i, tx in enumerate(wl.txs)]
cfg = SimConfig(validator_count=4, seed=1, delay_range=(1, 10), drop_probability=0.05, blocks=120)

t0 = time.perf_counter()
trace = run_simulation(cfg, commands, wl.genesis)
print(f"{trace.committed_height()} heights in {trace.ticks} ticks ({time.perf_counter() - t0:.2f}s)")
print(f"messages sent {trace.messages_sent}, dropped {trace.messages_dropped}")
print("replication agrees:", verify_replication(trace))

# a single sequential replay of the committed log lands on the same root
root = replay_oracle(wl.genesis, trace)
print("replay matches:", all(r == root for _, r in trace.final.values()))

# same seed, same trace, byte for byte
print("reproducible:", run_simulation(cfg, commands, wl.genesis).to_jsonl() == trace.to_jsonl())
