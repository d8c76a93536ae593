"""Reduced-size versions of the acceptance checks, runnable without pytest."""
from __future__ import annotations

import time

import numpy as np

from .channels import depolarizing_channel, identity_channel
from .entropics import conditional_mutual_information, fidelity, trace_distance
from .ki import block_state, ki_decompose, reconstruction_residual
from .protocol import random_instance, run_protocol
from .random import rand_channel, rand_density_matrix, rand_ket, rand_state, rand_unitary
from .rates import (
    OptimizerConfig,
    RateQuery,
    assisted_rate,
    entanglement_of_purification,
    feasible_point_value,
    gradient_check,
    unassisted_rate,
)
from .tensor import DensityOperator, correlated_classical, maximally_entangled, relabel

QUICK = OptimizerConfig(restarts=3)


def _bell():
    return relabel(maximally_entangled(2).density(), {"B": "R"})


def _identity():
    return identity_channel([("A", 2)], [("B", 2)])


def check_identity_assisted(seed):
    cfg = OptimizerConfig(restarts=3, seed=seed)
    a = assisted_rate(RateQuery(_bell(), _identity(), 0.0, config=cfg)).value
    b = assisted_rate(RateQuery(correlated_classical([0.5, 0.5]), _identity(), 0.0, config=cfg)).value
    return abs(a - 1) <= 0.01 and abs(b - 0.5) <= 0.01, f"bell {a:.4f}, correlated bit {b:.4f}"


def check_identity_unassisted(seed):
    cfg = OptimizerConfig(restarts=3, seed=seed)
    a = unassisted_rate(RateQuery(_bell(), _identity(), 0.0, config=cfg)).value
    b = unassisted_rate(RateQuery(correlated_classical([0.5, 0.5]), _identity(), 0.0, config=cfg)).value
    return abs(a - 1) <= 0.01 and abs(b - 1) <= 0.01, f"bell {a:.4f}, correlated bit {b:.4f}"


def check_depolarizing(seed):
    cfg = OptimizerConfig(restarts=3, seed=seed)
    src = rand_state([("A", 2), ("R", 2)], seed=seed)
    q = RateQuery(src, depolarizing_channel(2, 1.0), 0.0, config=cfg)
    a, u = assisted_rate(q).value, unassisted_rate(q).value
    return max(a, u) <= 0.01, f"assisted {a:.2e}, unassisted {u:.2e}"


def check_pure_collapse(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(3):
        src = rand_ket([("A", 2), ("R", 2)], seed=rng).density()
        ch = rand_channel([("A", 2)], [("B", 2), ("K", 2)], seed=rng)
        q = RateQuery(src, ch, 0.0, config=QUICK)
        worst = max(worst, abs(assisted_rate(q).value - feasible_point_value(q).value))
    return worst <= 1e-4, f"max deviation {worst:.2e}"


def check_eop(seed):
    v = entanglement_of_purification(correlated_classical([0.5, 0.5]), 4, config=OptimizerConfig(restarts=3, seed=seed))
    return abs(v - 1) <= 0.01, f"E_p {v:.4f}"


def check_ki(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(10):
        blocks = [(0.6, rand_density_matrix(2, seed=rng), rand_density_matrix(4, seed=rng)),
                  (0.4, rand_density_matrix(1, seed=rng), rand_density_matrix(2, seed=rng))]
        st = block_state(blocks, d_r=2)
        u = rand_unitary(st.layout.dims[0], seed=rng)
        m = np.kron(u, np.eye(2)) @ np.asarray(st.matrix) @ np.kron(u, np.eye(2)).conj().T
        st = DensityOperator(st.layout, m, check=False)
        worst = max(worst, reconstruction_residual(ki_decompose(st, seed=seed), st))
    return worst <= 1e-9, f"max residual {worst:.2e}"


def check_decoupling(seed):
    bad, n = 0, 0
    for i in range(20):
        rep = run_protocol(*random_instance([seed, i]))
        if rep.fidelity >= 0.9:
            n += 1
            bad += not rep.holds
    return bad == 0, f"{n - bad}/{n} instances hold"


def check_gradients(seed):
    e = max(gradient_check(kind=k, seed=seed + i) for k in ("assisted", "unassisted") for i in range(3))
    return e <= 1e-5, f"max relative error {e:.2e}"


def check_entropic(seed):
    rng = np.random.default_rng(seed)
    worst_ssa, worst_fvg = np.inf, -np.inf
    for _ in range(100):
        st = rand_state([("A", 2), ("B", 2), ("C", 2)], seed=rng)
        worst_ssa = min(worst_ssa, conditional_mutual_information(st, ["A"], ["B"], ["C"]))
        a, b = rand_state([("X", 3)], seed=rng), rand_state([("X", 3)], seed=rng)
        f, t = fidelity(a, b), trace_distance(a, b)
        worst_fvg = max(worst_fvg, (1 - f) - t, t - np.sqrt(max(0.0, 1 - f * f)))
    ok = worst_ssa >= -1e-9 and worst_fvg <= 1e-9
    return ok, f"min I(A:B|C) {worst_ssa:.1e}, Fuchs-van de Graaf slack {worst_fvg:.1e}"


CHECKS = [
    ("identity assisted oracle", check_identity_assisted),
    ("identity unassisted oracle", check_identity_unassisted),
    ("depolarizing channel", check_depolarizing),
    ("pure-input collapse", check_pure_collapse),
    ("entanglement of purification", check_eop),
    ("KI round trip", check_ki),
    ("decoupling inequality", check_decoupling),
    ("gradients", check_gradients),
    ("entropy inequalities", check_entropic),
]


def run_all(seed: int = 0) -> list[dict]:
    rows = []
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            passed, detail = fn(seed)
        except Exception as e:  # a crash is a failed check, not a crashed selftest
            passed, detail = False, f"{type(e).__name__}: {e}"
        rows.append({"name": name, "passed": bool(passed), "detail": detail,
                     "seconds": round(time.perf_counter() - t0, 1)})
    return rows
