import numpy as np
import pytest

from qrs.channels import (
    QuantumChannel,
    amplitude_damping_channel,
    apply_channel,
    canonicalize,
    channel_distance,
    complementary_channel,
    compose,
    dephasing_channel,
    depolarizing_channel,
    from_choi,
    identity_channel,
    kraus_to_choi,
    partial_trace_channel,
    replacement_channel,
    stinespring_dilation,
    tensor_channels,
    to_choi,
    validate_cptp,
)
from qrs.random import rand_channel, rand_state
from qrs.tensor import DensityOperator, Ket, SystemLayout, partial_trace, trace_norm

PLUS = Ket(SystemLayout([("A", 2)]), [1, 1], normalize=True).density()


def choi_oracle(kraus):
    """sum_ij |i><j| (x) N(|i><j|), built entry by entry."""
    r, d_out, d_in = kraus.shape
    j = np.zeros((d_in * d_out, d_in * d_out), dtype=complex)
    for i in range(d_in):
        for k in range(d_in):
            e = np.zeros((d_in, d_in))
            e[i, k] = 1
            out = sum(K @ e @ K.conj().T for K in kraus)
            j += np.kron(e, out)
    return j


def dilate_and_trace(channel, state):
    """Apply the canonical dilation, then trace out the environment."""
    dil = stinespring_dilation(channel)
    env = dil.environment
    big = QuantumChannel(channel.in_layout, dil.isometry.out_layout, [dil.matrix])
    return big, partial_trace(apply_channel(big, state), channel.out_layout.labels), env


def test_identity_channel_leaves_state(rng):
    st = rand_state([("A", 2), ("R", 3)], seed=rng)
    out = apply_channel(identity_channel([("A", 2)], [("B", 2)]), st)
    assert out.layout.labels == ("B", "R")
    np.testing.assert_allclose(out.matrix, st.matrix, atol=1e-15)


def test_depolarizing_gives_maximally_mixed(rng):
    st = rand_state([("A", 2)], seed=rng)
    out = apply_channel(depolarizing_channel(2, 1.0), st)
    np.testing.assert_allclose(out.matrix, np.eye(2) / 2, atol=1e-15)


def test_dephasing_plus_state():
    out = apply_channel(dephasing_channel(2), PLUS)
    np.testing.assert_allclose(out.matrix, np.eye(2) / 2, atol=1e-15)


def test_apply_on_inner_factor_keeps_position(rng):
    st = rand_state([("R", 2), ("A", 2), ("S", 2)], seed=rng)
    ch = rand_channel([("A", 2)], [("B", 3)], seed=rng)
    out = apply_channel(ch, st)
    assert out.layout.labels == ("R", "B", "S")
    assert abs(np.trace(out.matrix) - 1) < 1e-12
    assert np.linalg.eigvalsh(out.matrix).min() > -1e-12


def test_apply_layout_mismatch(rng):
    st = rand_state([("A", 3)], seed=rng)
    with pytest.raises(ValueError):
        apply_channel(identity_channel([("A", 2)]), st)


def test_constructor_rejects_non_tp():
    with pytest.raises(ValueError):
        QuantumChannel([("A", 2)], [("B", 2)], [np.eye(2), np.eye(2)])
    with pytest.raises(ValueError):
        QuantumChannel([("A", 2)], [("B", 2)], [np.eye(3)])


def test_dilation_of_identity():
    dil = stinespring_dilation(identity_channel([("A", 2)], [("B", 2)]))
    assert dil.isometry.out_layout.dim_of("E") == 1
    np.testing.assert_allclose(np.abs(dil.matrix), np.eye(2))


def test_dilation_of_dephasing_is_copy():
    dil = stinespring_dilation(dephasing_channel(2))
    v = np.asarray(dil.matrix).reshape(2, 2, 2)  # (out, env, in)
    for x in range(2):
        amp = np.abs(v[:, :, x])
        assert amp[x].max() == pytest.approx(1)
        assert np.count_nonzero(amp > 1e-12) == 1


def test_full_amplitude_damping_always_outputs_ground(rng):
    ch = amplitude_damping_channel(1.0)
    st = rand_state([("A", 2)], seed=rng)
    _, out, _ = dilate_and_trace(ch, st)
    np.testing.assert_allclose(out.matrix, np.diag([1, 0]), atol=1e-14)


def test_dilation_matches_kraus_action():
    rng = np.random.default_rng(11)
    for _ in range(100):
        d_in, d_out = rng.integers(1, 5, size=2)
        ch = rand_channel([("A", int(d_in))], [("B", int(d_out))], seed=rng)
        st = rand_state([("A", int(d_in)), ("R", 2)], seed=rng)
        dil = stinespring_dilation(ch)
        assert dil.isometry.is_isometry()
        assert dil.isometry.out_layout.dim_of("E") <= d_in * d_out
        big = QuantumChannel(ch.in_layout, dil.isometry.out_layout, [dil.matrix])
        via_dilation = partial_trace(apply_channel(big, st), ["B", "R"])
        direct = apply_channel(ch, st)
        assert trace_norm(np.asarray(via_dilation.matrix) - np.asarray(direct.matrix)) / 2 < 1e-9


def test_complementary_of_identity_is_scalar(rng):
    comp = complementary_channel(identity_channel([("A", 2)], [("B", 2)]))
    assert comp.d_out == 1
    out = apply_channel(comp, rand_state([("A", 2)], seed=rng))
    np.testing.assert_allclose(out.matrix, [[1]], atol=1e-14)


def test_complementary_of_dephasing_on_plus():
    out = apply_channel(complementary_channel(dephasing_channel(2)), PLUS)
    np.testing.assert_allclose(out.matrix, np.eye(2) / 2, atol=1e-14)


def test_complementary_of_depolarizing_keeps_purification(bell):
    comp = complementary_channel(depolarizing_channel(2, 1.0))
    out = apply_channel(comp, bell)
    # the environment carries everything: S(E R) = S(B) = 1 while S(E) = 2
    lam = np.linalg.eigvalsh(out.matrix)
    assert np.sort(lam)[-2:] == pytest.approx([0.5, 0.5])
    env = partial_trace(out, {"E"})
    np.testing.assert_allclose(env.matrix, np.eye(4) / 4, atol=1e-14)


def test_complementary_matches_dilated_trace_on_spanning_set(rng):
    ch = rand_channel([("A", 2)], [("B", 2)], n_kraus=3, seed=rng)
    comp = complementary_channel(ch)
    dil = stinespring_dilation(ch)
    big = QuantumChannel(ch.in_layout, dil.isometry.out_layout, [dil.matrix])
    basis = [np.array([[1, 0], [0, 0]]), np.array([[0, 0], [0, 1]]),
             np.array([[1, 1], [1, 1]]) / 2, np.array([[1, -1j], [1j, 1]]) / 2]
    for m in basis:
        st = DensityOperator(SystemLayout([("A", 2)]), m)
        np.testing.assert_allclose(apply_channel(comp, st).matrix,
                                   partial_trace(apply_channel(big, st), {"E"}).matrix, atol=1e-12)


def test_choi_examples():
    j_id = to_choi(identity_channel([("A", 2)], [("B", 2)]))
    expected = np.zeros((4, 4))
    for i in range(2):
        for k in range(2):
            expected[3 * i, 3 * k] = 1
    np.testing.assert_allclose(j_id, expected, atol=1e-15)
    assert np.trace(j_id).real == pytest.approx(2)
    np.testing.assert_allclose(to_choi(depolarizing_channel(2, 1.0)), np.eye(4) / 2, atol=1e-15)


def test_choi_matches_oracle_and_round_trips():
    rng = np.random.default_rng(21)
    for _ in range(100):
        d_in, d_out = (int(x) for x in rng.integers(1, 4, size=2))
        ch = rand_channel([("A", d_in)], [("B", d_out)], seed=rng)
        j = to_choi(ch)
        np.testing.assert_allclose(j, choi_oracle(np.asarray(ch.kraus)), atol=1e-12)
        back = from_choi(j, ch.in_layout, ch.out_layout)
        assert channel_distance(back, ch) <= 1e-9
        np.testing.assert_allclose(to_choi(back), j, atol=1e-9)
        assert len(back) <= d_in * d_out


def test_from_choi_errors():
    lay = [("A", 2)]
    with pytest.raises(ValueError):
        from_choi(np.diag([1, 0, 0, -0.5]) + np.eye(4) * 0.0, lay, lay)
    with pytest.raises(ValueError):
        from_choi(np.eye(4), lay, lay)  # trace-increasing


def test_validate_cptp_examples():
    rep = validate_cptp(identity_channel([("A", 2)]))
    assert rep.tp_residual == pytest.approx(0, abs=1e-15)
    assert rep.cp_min_eigenvalue == pytest.approx(0, abs=1e-15)
    assert rep.passed
    assert validate_cptp(QuantumChannel([("A", 2)], [("A", 2)], [np.eye(2)])).passed
    bad = validate_cptp(QuantumChannel([("A", 2)], [("A", 2)], [np.eye(2), np.eye(2)], check=False))
    assert bad.tp_residual == pytest.approx(1)
    assert not bad.passed


def test_composition_and_tensoring_stay_valid():
    rng = np.random.default_rng(4)
    for _ in range(30):
        a = rand_channel([("A", 2)], [("B", 3)], seed=rng)
        b = rand_channel([("B", 3)], [("C", 2)], seed=rng)
        assert validate_cptp(compose(b, a)).passed
        c = rand_channel([("X", 2)], [("Y", 2)], seed=rng)
        t = tensor_channels(a, c)
        assert validate_cptp(t).passed
        assert validate_cptp(canonicalize(t)).passed
        assert len(canonicalize(t)) <= t.d_in * t.d_out


def test_compose_matches_sequential_application(rng):
    a = rand_channel([("A", 2)], [("B", 3)], seed=rng)
    b = rand_channel([("B", 3)], [("C", 2)], seed=rng)
    st = rand_state([("A", 2), ("R", 2)], seed=rng)
    np.testing.assert_allclose(apply_channel(compose(b, a), st).matrix,
                               apply_channel(b, apply_channel(a, st)).matrix, atol=1e-13)


def test_canonical_form_is_deterministic(rng):
    ch = rand_channel([("A", 2)], [("B", 2)], seed=rng)
    k1 = np.asarray(canonicalize(ch).kraus)
    k2 = np.asarray(canonicalize(QuantumChannel(ch.in_layout, ch.out_layout, ch.kraus[::-1])).kraus)
    np.testing.assert_allclose(k1, k2, atol=1e-10)
    # degenerate Choi spectrum: the fully depolarizing channel
    d1 = np.asarray(canonicalize(depolarizing_channel(2, 1.0)).kraus)
    d2 = np.asarray(canonicalize(canonicalize(depolarizing_channel(2, 1.0))).kraus)
    np.testing.assert_allclose(d1, d2, atol=1e-12)


def test_replacement_and_partial_trace_channels(rng):
    target = rand_state([("B", 3)], seed=rng)
    out = apply_channel(replacement_channel([("A", 2)], target), rand_state([("A", 2)], seed=rng))
    np.testing.assert_allclose(out.matrix, target.matrix, atol=1e-14)
    st = rand_state([("A", 2), ("K", 2)], seed=rng)
    pt = partial_trace_channel(st.layout, ["A"])
    np.testing.assert_allclose(apply_channel(pt, st).matrix, partial_trace(st, ["A"]).matrix, atol=1e-14)


def test_kraus_to_choi_input_first():
    k = np.array([[[0, 1], [0, 0]], [[1, 0], [0, 0]]], dtype=complex)  # reset to |0>
    j = kraus_to_choi(k)
    np.testing.assert_allclose(j, np.kron(np.eye(2), np.diag([1, 0])), atol=1e-15)
