"""Simulate a few imperfect protocols and check the decoupling bound."""
from qrs.protocol import random_instance, run_protocol

print(" seed  fidelity   lhs       rhs       holds")
for seed in range(8):
    rep = run_protocol(*random_instance(seed))
    print(f" {seed:4d}  {rep.fidelity:.5f}  {rep.decoupling_lhs:.5f}  {rep.decoupling_rhs:8.5f}  {rep.holds}")
