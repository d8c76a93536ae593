import numpy as np
import pytest

from qrs.channels import QuantumChannel, depolarizing_channel, identity_channel
from qrs.entropics import decoupling_delta
from qrs.protocol import (
    SimProtocol,
    decoupling_check,
    direct_protocol,
    perturbed_protocol,
    purity_residual,
    random_instance,
    run_protocol,
    simulate,
)
from qrs.random import rand_channel, rand_state
from qrs.tensor import Ket, SystemLayout, maximally_entangled


def trivial_shared():
    return Ket(SystemLayout([("A0", 1), ("B0", 1)]), [1.0])


def test_identity_direct_is_perfect(bell, id2):
    rep = run_protocol(direct_protocol(id2), bell, id2)
    assert rep.fidelity == pytest.approx(1.0, abs=1e-12)
    assert rep.qubit_rate == pytest.approx(1.0)
    assert rep.entanglement_rate == pytest.approx(0.0, abs=1e-12)
    assert rep.decoupling_lhs == pytest.approx(0.0, abs=1e-10)
    assert rep.holds


def test_replacement_needs_no_communication(rng):
    src = rand_state([("A", 2), ("R", 2)], seed=rng)
    ch = depolarizing_channel(2, 1.0)
    enc = QuantumChannel([("A", 2), ("A0", 1)], [("M", 1), ("A1", 1)], np.eye(2)[:, None, :])
    dec = QuantumChannel([("M", 1), ("B0", 1)], [("B", 2), ("B1", 1)],
                         np.eye(2)[:, :, None] / np.sqrt(2))
    rep = run_protocol(SimProtocol(1, enc, dec, trivial_shared()), src, ch)
    assert rep.fidelity == pytest.approx(1.0, abs=1e-10)
    assert rep.qubit_rate == 0.0
    assert rep.holds


def test_fixed_output_decoder(bell, id2):
    enc = identity_channel([("A", 2), ("A0", 1)], [("M", 2), ("A1", 1)])
    # ignore the message and output |0>
    dec = QuantumChannel([("M", 2), ("B0", 1)], [("B", 2), ("B1", 1)],
                         [np.outer([1, 0], e) for e in np.eye(2)])
    rep = run_protocol(SimProtocol(1, enc, dec, trivial_shared()), bell, id2)
    # root fidelity between |Phi+> and |0><0| (x) I/2
    assert rep.fidelity == pytest.approx(0.5, abs=1e-12)


def test_trivial_a1b1_gives_zero_lhs(rng):
    src = rand_state([("A", 2), ("R", 2)], seed=rng)
    ch = rand_channel([("A", 2)], [("B", 2), ("K", 2)], seed=rng)
    state = simulate(direct_protocol(ch), src, ch)
    dc = decoupling_check(state, 0.0, 1)
    assert dc["lhs"] == pytest.approx(0.0, abs=1e-12)
    assert dc["holds"]


def test_shared_entanglement_passes_through(bell, id2):
    rep = run_protocol(direct_protocol(id2, shared_dim=2), bell, id2)
    assert rep.fidelity == pytest.approx(1.0, abs=1e-12)
    # A1 B1 is still maximally entangled but decoupled from the rest
    assert rep.decoupling_lhs == pytest.approx(0.0, abs=1e-10)
    assert rep.entanglement_rate == pytest.approx(0.0, abs=1e-12)


def test_perturbation_lowers_fidelity(rng):
    src = rand_state([("A", 2), ("R", 2)], seed=rng)
    ch = rand_channel([("A", 2)], [("B", 2), ("K", 2)], n_kraus=2, seed=rng)
    fs = [run_protocol(perturbed_protocol(ch, s, seed=5), src, ch).fidelity for s in (0.0, 0.3, 1.0)]
    assert fs[0] == pytest.approx(1.0, abs=1e-10)
    assert fs[0] >= fs[1] >= fs[2]


@pytest.mark.parametrize("seed", range(10))
def test_random_instances_satisfy_decoupling(seed):
    prot, src, ch = random_instance(seed)
    rep = run_protocol(prot, src, ch)
    assert 0 <= rep.fidelity <= 1 + 1e-12
    assert rep.holds
    assert rep.decoupling_rhs == pytest.approx(decoupling_delta(1, 1 - rep.fidelity, 2, 2))
    assert rep.purity_residual <= 1e-10


def test_two_copy_identity():
    src = maximally_entangled(2, ("A", "R")).density()
    ch = identity_channel([("A", 2)], [("B", 2)])
    enc = identity_channel([("A_1", 2), ("A_2", 2), ("A0", 1)], [("M", 4), ("A1", 1)])
    dec = identity_channel([("M", 4), ("B0", 1)], [("B_1", 2), ("B_2", 2), ("B1", 1)])
    rep = run_protocol(SimProtocol(2, enc, dec, trivial_shared()), src, ch)
    assert rep.fidelity == pytest.approx(1.0, abs=1e-12)
    assert rep.qubit_rate == pytest.approx(1.0)


def test_purity_of_dilated_output(bell, id2):
    state = simulate(perturbed_protocol(id2, 0.4, seed=1), bell, id2)
    assert purity_residual(state) <= 1e-12


def test_layout_errors(bell, id2):
    shared = trivial_shared()
    enc = identity_channel([("A", 2), ("A0", 1)], [("M", 2), ("A1", 1)])
    dec = identity_channel([("M", 2), ("B0", 1)], [("B", 2), ("B1", 1)])
    with pytest.raises(ValueError):
        SimProtocol(3, enc, dec, shared)
    bad_dec = identity_channel([("M", 4), ("B0", 1)], [("B", 4), ("B1", 1)])
    with pytest.raises(ValueError, match="message dimension"):
        SimProtocol(1, enc, bad_dec, shared)
    with pytest.raises(ValueError):
        SimProtocol(1, enc, dec, maximally_entangled(2, ("A0", "B0")))
    # encoder input does not match the source's A
    enc3 = identity_channel([("A", 3), ("A0", 1)], [("M", 3), ("A1", 1)])
    dec3 = identity_channel([("M", 3), ("B0", 1)], [("B", 3), ("B1", 1)])
    with pytest.raises(ValueError, match="encoder input"):
        simulate(SimProtocol(1, enc3, dec3, shared), bell, id2)
