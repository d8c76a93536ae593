"""Exact simulation of small channel-simulation protocols with coherent feedback.

Alice holds n copies of A plus her half A0 of a shared pure state. Her
encoder maps A^n A0 -> M K^n A1; Bob's decoder maps M B0 -> B^n B1. Both
maps are dilated (environments W_A and W_B), so the whole protocol acts on
one pure vector and every entropy is computed from that vector.

Factor roles are matched by position:

* encoder input  [A copies..., A0]     output [M, K copies..., A1]
* decoder input  [M, B0]               output [B copies..., B1]

Copies of multi-factor A, K or B systems appear copy by copy in the same
grouping as :class:`qrs.rates.Instance` (all A factors of copy 1, then of
copy 2, and so on). Trivial systems are dimension-1 factors.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channels import QuantumChannel, canonicalize, identity_channel, isometry_from_kraus
from .entropics import decoupling_delta, entropy_of_matrix, entropy_of_spectrum, fidelity_matrices
from .random import rand_channel, rand_state
from .rates import Instance
from .tensor import DensityOperator, Ket, SystemLayout, maximally_entangled, purify, reduced_from_vector

MAX_DIM = 2**12
DECOUPLING_SLACK = 1e-9


@dataclass(frozen=True)
class SimProtocol:
    n: int
    encoder: QuantumChannel
    decoder: QuantumChannel
    shared_state: Ket
    # target state on A1 B1; defaults to the maximally entangled state
    target_state: Ket | None = None

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError("n must be 1 or 2")
        if len(self.shared_state.layout) != 2:
            raise ValueError("shared_state must have exactly two factors (A0, B0)")
        if len(self.encoder.out_layout) < 2 or len(self.encoder.in_layout) < 1:
            raise ValueError("encoder output must be [M, K..., A1]")
        if len(self.decoder.in_layout) != 2 or len(self.decoder.out_layout) < 2:
            raise ValueError("decoder must map [M, B0] -> [B..., B1]")
        if self.encoder.out_layout.dims[0] != self.decoder.in_layout.dims[0]:
            raise ValueError(
                f"message dimension mismatch: encoder sends {self.encoder.out_layout.dims[0]}, "
                f"decoder expects {self.decoder.in_layout.dims[0]}")
        d_a0, d_b0 = self.shared_state.layout.dims
        if self.encoder.in_layout.dims[-1] != d_a0:
            raise ValueError(f"encoder's last input must be A0 of dim {d_a0}")
        if self.decoder.in_layout.dims[1] != d_b0:
            raise ValueError(f"decoder's second input must be B0 of dim {d_b0}")
        if self.target_state is not None:
            dims = (self.encoder.out_layout.dims[-1], self.decoder.out_layout.dims[-1])
            if self.target_state.layout.dims != dims:
                raise ValueError(f"target state dims {self.target_state.layout.dims} != (A1, B1) {dims}")
        elif self.encoder.out_layout.dims[-1] != self.decoder.out_layout.dims[-1]:
            raise ValueError("A1 and B1 differ in dimension; pass an explicit target_state")

    @property
    def dim_m(self) -> int:
        return self.encoder.out_layout.dims[0]

    @property
    def dim_a1(self) -> int:
        return self.encoder.out_layout.dims[-1]

    @property
    def dim_b1(self) -> int:
        return self.decoder.out_layout.dims[-1]

    def target(self) -> Ket:
        if self.target_state is not None:
            return self.target_state
        return maximally_entangled(self.dim_a1, ("A1", "B1"))


@dataclass(frozen=True)
class ProtocolReport:
    fidelity: float
    qubit_rate: float
    entanglement_rate: float
    decoupling_lhs: float
    decoupling_rhs: float
    holds: bool
    purity_residual: float

    def to_dict(self) -> dict:
        return {
            "fidelity": self.fidelity,
            "qubit_rate": self.qubit_rate,
            "entanglement_rate": self.entanglement_rate,
            "lhs": self.decoupling_lhs,
            "rhs": self.decoupling_rhs,
            "holds": self.holds,
            "purity_residual": self.purity_residual,
        }


# ---------------------------------------------------------------------------
# pure-vector bookkeeping

class _Register:
    """A pure vector with named factors."""

    def __init__(self, labels: list, dims: list, vec: np.ndarray):
        self.labels, self.dims, self.vec = labels, dims, vec

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64))

    def apply(self, acting: Sequence[str], v: np.ndarray, out_labels: Sequence[str], out_dims: Sequence[int]):
        """Apply an isometry on ``acting``; its outputs are appended at the end."""
        idx = [self.labels.index(n) for n in acting]
        rest = [i for i in range(len(self.labels)) if i not in idx]
        t = np.transpose(self.vec.reshape(self.dims), idx + rest)
        d_in = int(np.prod([self.dims[i] for i in idx], dtype=np.int64))
        t = v @ t.reshape(d_in, -1)
        labels = [self.labels[i] for i in rest] + list(out_labels)
        dims = [self.dims[i] for i in rest] + list(out_dims)
        if int(np.prod(dims, dtype=np.int64)) > MAX_DIM:
            raise ValueError(f"total dimension {int(np.prod(dims))} exceeds {MAX_DIM}")
        n_rest = len(rest)
        t = t.reshape(list(out_dims) + [self.dims[i] for i in rest])
        t = np.transpose(t, list(range(len(out_dims), len(out_dims) + n_rest)) + list(range(len(out_dims))))
        return _Register(labels, dims, t.reshape(-1))

    def reduced(self, keep: Sequence[str]) -> np.ndarray:
        """Reduced density matrix with factors in the order of ``keep``."""
        idx = [self.labels.index(n) for n in keep]
        rest = [i for i in range(len(self.labels)) if i not in idx]
        t = np.transpose(self.vec.reshape(self.dims), idx + rest)
        m = t.reshape(int(np.prod([self.dims[i] for i in idx], dtype=np.int64)), -1)
        return m @ m.conj().T

    def split_spectrum(self, part: Sequence[str]) -> np.ndarray:
        """Schmidt coefficients squared across ``part`` vs the rest."""
        idx = [self.labels.index(n) for n in part]
        rest = [i for i in range(len(self.labels)) if i not in idx]
        t = np.transpose(self.vec.reshape(self.dims), idx + rest)
        m = t.reshape(int(np.prod([self.dims[i] for i in idx], dtype=np.int64)), -1)
        return np.linalg.svd(m, compute_uv=False) ** 2


def _dilation(channel: QuantumChannel) -> tuple[np.ndarray, int]:
    """Canonical Stinespring isometry with the environment as trailing factor."""
    ch = canonicalize(channel)
    return isometry_from_kraus(np.asarray(ch.kraus)), len(ch)


@dataclass
class ProtocolState:
    """The dilated output vector xi_n and the names of its parts."""

    register: _Register
    b: list
    k: list
    r: list
    r_prime: list
    env: list

    def part(self, *names: str) -> list:
        return [n for g in names for n in getattr(self, g)]


def simulate(protocol: SimProtocol, source: DensityOperator, channel: QuantumChannel,
             b_labels: Sequence[str] | None = None) -> ProtocolState:
    inst = Instance.build(source, channel, protocol.n, b_labels)
    enc, dec = protocol.encoder, protocol.decoder
    a_dims = list(inst.source.layout.select(inst.a_labels).dims)
    if list(enc.in_layout.dims[:-1]) != a_dims or len(enc.in_layout) != len(a_dims) + 1:
        raise ValueError(f"encoder input must be A copies {a_dims} followed by A0")
    k_dims = list(inst.channel.out_layout.select(inst.k_labels).dims) if inst.k_labels else []
    if list(enc.out_layout.dims[1:-1]) != k_dims:
        raise ValueError(f"encoder output must be [M, K copies {k_dims}, A1]")
    b_dims = list(inst.channel.out_layout.select(inst.b_labels).dims)
    if list(dec.out_layout.dims[:-1]) != b_dims:
        raise ValueError(f"decoder output must be [B copies {b_dims}, B1]")

    ket = purify(inst.source, "R'")
    phi = protocol.shared_state
    labels = list(inst.a_labels) + list(inst.r_labels) + ["R'", "A0", "B0"]
    dims = list(ket.layout.dims) + list(phi.layout.dims)
    if int(np.prod(dims, dtype=np.int64)) > MAX_DIM:
        raise ValueError(f"total dimension exceeds {MAX_DIM}")
    reg = _Register(labels, dims, np.kron(np.asarray(ket.amplitudes), np.asarray(phi.amplitudes)))

    v_enc, w_a = _dilation(enc)
    enc_out = ["M"] + list(inst.k_labels) + ["A1", "W_A"]
    reg = reg.apply(list(inst.a_labels) + ["A0"], v_enc, enc_out, list(enc.out_layout.dims) + [w_a])
    v_dec, w_b = _dilation(dec)
    dec_out = list(inst.b_labels) + ["B1", "W_B"]
    reg = reg.apply(["M", "B0"], v_dec, dec_out, list(dec.out_layout.dims) + [w_b])
    return ProtocolState(reg, list(inst.b_labels), list(inst.k_labels), list(inst.r_labels),
                         ["R'"], ["W_A", "W_B"])


def protocol_fidelity(protocol: SimProtocol, state: ProtocolState, source: DensityOperator,
                      channel: QuantumChannel, b_labels: Sequence[str] | None = None) -> float:
    """F(sigma^{(x)n} (x) Phi^{A1B1}, xi^{B^n K^n R^n A1 B1})."""
    inst = Instance.build(source, channel, protocol.n, b_labels)
    keep = state.part("b", "k", "r") + ["A1", "B1"]
    xi = state.register.reduced(keep)
    t = protocol.target()
    ideal = np.kron(inst.sigma_bkr, np.outer(t.amplitudes, t.amplitudes.conj()))
    return fidelity_matrices(ideal, xi)


def decoupling_check(state: ProtocolState, eps: float, n: int) -> dict:
    """I(B^n K^n W_A W_B R^n R' : A1 B1) of the dilated output against n delta(n, eps)."""
    reg = state.register
    other = state.part("b", "k", "env", "r", "r_prime")
    if set(other) | {"A1", "B1"} != set(reg.labels):
        raise ValueError("the decoupling split must cover every factor of the output")
    # the two sides of a pure vector share their Schmidt spectrum and S(all) = 0
    s_ab = entropy_of_spectrum(reg.split_spectrum(["A1", "B1"]))
    lhs = 2 * s_ab
    d_a1 = reg.dims[reg.labels.index("A1")]
    d_b1 = reg.dims[reg.labels.index("B1")]
    rhs = decoupling_delta(n, min(max(eps, 0.0), 1.0), d_a1, d_b1)
    return {"lhs": lhs, "rhs": rhs, "holds": bool(lhs <= rhs + DECOUPLING_SLACK)}


def run_protocol(protocol: SimProtocol, source: DensityOperator, channel: QuantumChannel,
                 b_labels: Sequence[str] | None = None) -> ProtocolReport:
    state = simulate(protocol, source, channel, b_labels)
    f = protocol_fidelity(protocol, state, source, channel, b_labels)
    n = protocol.n
    q = float(np.log2(protocol.dim_m)) / n
    s_a0 = entropy_of_matrix(reduced_from_vector(protocol.shared_state.amplitudes,
                                                 protocol.shared_state.layout.dims, [0]))
    t = protocol.target()
    s_a1 = entropy_of_matrix(reduced_from_vector(t.amplitudes, t.layout.dims, [0]))
    dc = decoupling_check(state, 1 - f, n)
    return ProtocolReport(f, q, (s_a0 - s_a1) / n, dc["lhs"], dc["rhs"], dc["holds"], purity_residual(state))


def purity_residual(state: ProtocolState) -> float:
    """|1 - Tr xi^2| for the full dilated output (zero for an exact isometric pipeline)."""
    v = state.register.vec
    return float(abs(1 - np.vdot(v, v).real ** 2))


# ---------------------------------------------------------------------------
# protocol builders

def _trivial_ket(labels=("A0", "B0")) -> Ket:
    return Ket(SystemLayout([(labels[0], 1), (labels[1], 1)]), [1.0])


def direct_protocol(channel: QuantumChannel, shared_dim: int = 1) -> SimProtocol:
    """n = 1 protocol that runs the channel's dilation at the encoder and sends B over M.

    The shared state passes through untouched (A1 = A0, B1 = B0), so the
    protocol is perfect.
    """
    d_a0 = shared_dim
    out = channel.out_layout
    d_b = out.dims[0]
    kraus = np.asarray(channel.kraus)
    enc_k = np.array([np.kron(k, np.eye(d_a0)) for k in kraus])
    enc = QuantumChannel([("A", channel.d_in), ("A0", d_a0)],
                         [("M", d_b)] + list(out.factors[1:]) + [("A1", d_a0)], enc_k, check=False)
    dec = identity_channel([("M", d_b), ("B0", d_a0)], [("B", d_b), ("B1", d_a0)])
    shared = maximally_entangled(d_a0, ("A0", "B0")) if d_a0 > 1 else _trivial_ket()
    return SimProtocol(1, enc, dec, shared)


def perturbed_protocol(channel: QuantumChannel, strength: float, seed=None, shared_dim: int = 2) -> SimProtocol:
    """Direct protocol followed by random unitaries exp(i s H) on (M, A1) and (B, B1)."""
    rng = np.random.default_rng(seed)
    base = direct_protocol(channel, shared_dim)

    def near_identity(d):
        h = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        h = (h + h.conj().T) / 2
        h /= np.linalg.norm(h, 2)
        lam, vec = np.linalg.eigh(h)
        return (vec * np.exp(1j * strength * lam)) @ vec.conj().T

    out = base.encoder.out_layout
    d_m, d_k, d_a1 = out.dims[0], int(np.prod(out.dims[1:-1], dtype=np.int64)), out.dims[-1]
    u = near_identity(d_m * d_a1).reshape(d_m, d_a1, d_m, d_a1)
    # act on M and A1, identity on K
    u_full = np.einsum("ijkl,ab->iajkbl", u, np.eye(d_k)).reshape(out.dim, out.dim)
    enc_k = np.array([u_full @ k for k in base.encoder.kraus])
    enc = QuantumChannel(base.encoder.in_layout, out, enc_k, check=False)
    ud = near_identity(base.decoder.d_out)
    dec = QuantumChannel(base.decoder.in_layout, base.decoder.out_layout,
                         [ud @ k for k in base.decoder.kraus], check=False)
    return SimProtocol(1, enc, dec, base.shared_state)


def random_instance(seed) -> tuple[SimProtocol, DensityOperator, QuantumChannel]:
    """Qubit source rho^{AR}, random channel A -> B K and a perturbed direct protocol."""
    rng = np.random.default_rng(seed)
    src = rand_state([("A", 2), ("R", 2)], seed=rng)
    ch = rand_channel([("A", 2)], [("B", 2), ("K", 2)], n_kraus=2, seed=rng)
    strength = float(rng.uniform(0.0, 0.6))
    return perturbed_protocol(ch, strength, rng), src, ch
