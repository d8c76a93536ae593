"""Upper bounds on simulation rates for a few small sources.

Run with ``python3 demos/rates_tour.py``. Takes about a minute.
"""
import numpy as np

from qrs import OptimizerConfig, RateQuery, assisted_rate, unassisted_rate
from qrs import oracle_identity_assisted, oracle_identity_unassisted
from qrs.channels import amplitude_damping_channel, identity_channel
from qrs.random import rand_state
from qrs.tensor import correlated_classical, maximally_entangled, relabel

cfg = OptimizerConfig(restarts=4, seed=0)
ident = identity_channel([("A", 2)], [("B", 2)])
sources = {
    "Bell pair": relabel(maximally_entangled(2).density(), {"B": "R"}),
    "correlated bit": correlated_classical([0.5, 0.5]),
}

print("identity channel: optimizer vs closed form")
for name, src in sources.items():
    a = assisted_rate(RateQuery(src, ident, 0.0, config=cfg))
    u = unassisted_rate(RateQuery(src, ident, 0.0, config=cfg))
    print(f"  {name:15s} a = {a.value:.4f} (exact {oracle_identity_assisted(src):.4f})"
          f"   u = {u.value:.4f} (exact {oracle_identity_unassisted(src):.4f})")

# a noisy channel: the bound drops as the infidelity budget grows
src = rand_state([("A", 2), ("R", 2)], rank=1, seed=1)
ch = amplitude_damping_channel(0.3)
print("\namplitude damping, random pure source")
prev = None
for gamma in (0.0, 0.01, 0.05, 0.1, 0.2):
    r = assisted_rate(RateQuery(src, ch, gamma, config=cfg), warm_start=prev)
    prev = r
    print(f"  gamma = {gamma:4.2f}  a <= {r.value:.4f}  fidelity {r.fidelity:.4f}  ({r.status})")
