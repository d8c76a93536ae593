"""CPTP maps in Kraus, Choi and Stinespring form."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .tensor import (
    DensityOperator,
    LinearOperator,
    SystemLayout,
    eig_hermitian,
    permute_systems,
    trace_norm,
)

TP_TOL = 1e-9
CP_TOL = 1e-9
KRAUS_CUTOFF = 1e-12


def _layout(x) -> SystemLayout:
    return x if isinstance(x, SystemLayout) else SystemLayout(x)


class QuantumChannel:
    """Channel ``in_layout -> out_layout`` given by its Kraus operators.

    ``check=False`` skips the trace-preservation test so that invalid
    Kraus lists can still be inspected with :func:`validate_cptp`.
    """

    def __init__(self, in_layout, out_layout, kraus: Iterable, *, check: bool = True):
        self.in_layout = _layout(in_layout)
        self.out_layout = _layout(out_layout)
        ops = np.array([np.asarray(k, dtype=complex) for k in kraus])
        if ops.ndim != 3 or ops.shape[0] == 0:
            raise ValueError("a channel needs a non-empty list of Kraus matrices")
        if ops.shape[1:] != (self.out_layout.dim, self.in_layout.dim):
            raise ValueError(
                f"Kraus shape {ops.shape[1:]} does not match "
                f"({self.out_layout.dim}, {self.in_layout.dim})"
            )
        ops.setflags(write=False)
        self.kraus = ops
        if check:
            res = _tp_residual(ops)
            if res > TP_TOL:
                raise ValueError(f"Kraus operators are not trace preserving (residual {res:.3g})")

    @property
    def d_in(self) -> int:
        return self.in_layout.dim

    @property
    def d_out(self) -> int:
        return self.out_layout.dim

    def __len__(self) -> int:
        return self.kraus.shape[0]

    def __repr__(self) -> str:
        return (f"QuantumChannel({self.in_layout.to_list()} -> {self.out_layout.to_list()}, "
                f"{len(self)} Kraus)")


@dataclass(frozen=True)
class StinespringIsometry:
    isometry: LinearOperator
    environment: str

    @property
    def matrix(self) -> np.ndarray:
        return self.isometry.matrix


@dataclass(frozen=True)
class CPTPReport:
    tp_residual: float
    cp_min_eigenvalue: float

    @property
    def passed(self) -> bool:
        return self.tp_residual <= TP_TOL and self.cp_min_eigenvalue >= -CP_TOL


def _tp_residual(kraus: np.ndarray) -> float:
    s = np.einsum("koi,koj->ij", kraus.conj(), kraus)
    return float(np.linalg.norm(s - np.eye(s.shape[0]), 2))


# ---------------------------------------------------------------------------
# application

def apply_kraus(kraus: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Apply Kraus operators to the leading factor of ``rho``.

    ``rho`` has dimension ``d_in * d_rest`` with the channel input first.
    """
    r, d_out, d_in = kraus.shape
    d_rest = rho.shape[0] // d_in
    t = rho.reshape(d_in, d_rest, d_in, d_rest)
    out = np.einsum("koi,iajb,kpj->oapb", kraus, t, kraus.conj())
    return out.reshape(d_out * d_rest, d_out * d_rest)


def apply_channel(channel: QuantumChannel, state: DensityOperator,
                  acting_on: Sequence[str] | None = None) -> DensityOperator:
    """Apply ``channel`` to the factors ``acting_on`` of ``state``.

    The output factors take the place of the first acted-on factor; all
    other factors keep their order.
    """
    layout = state.layout
    acting = list(channel.in_layout.labels if acting_on is None else acting_on)
    idx = layout.indices(acting)
    if tuple(layout.dims[i] for i in idx) != channel.in_layout.dims:
        raise ValueError(
            f"channel input {channel.in_layout.to_list()} does not match systems "
            f"{[layout.factors[i] for i in idx]}"
        )
    rest = [n for n in layout.labels if n not in acting]
    clash = set(rest) & set(channel.out_layout.labels)
    if clash:
        raise ValueError(f"channel output labels {sorted(clash)} collide with untouched systems")
    front = permute_systems(state, acting + rest)
    out = apply_kraus(np.asarray(channel.kraus), np.asarray(front.matrix))
    new_layout = channel.out_layout + layout.select(rest)
    result = DensityOperator(new_layout, out, check=False)
    pos = min(idx)
    before = [n for n in layout.labels[:pos] if n not in acting]
    order = before + list(channel.out_layout.labels) + [n for n in rest if n not in before]
    return permute_systems(result, order)


# ---------------------------------------------------------------------------
# Choi representation

def kraus_to_choi(kraus: np.ndarray) -> np.ndarray:
    """Unnormalized Choi matrix sum_ij |i><j| (x) N(|i><j|), input factor first."""
    vecs = np.transpose(kraus, (0, 2, 1)).reshape(kraus.shape[0], -1)
    return vecs.T @ vecs.conj()


def to_choi(channel: QuantumChannel) -> np.ndarray:
    return kraus_to_choi(np.asarray(channel.kraus))


def _canonical_basis(vecs: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of span(vecs) (columns).

    Gram-Schmidt over the columns of the span's projector, then the first
    significant entry of each vector is made real positive.
    """
    proj = vecs @ vecs.conj().T
    basis = []
    for col in proj.T:
        v = col.copy()
        for b in basis:
            v -= b * (b.conj() @ v)
        n = np.linalg.norm(v)
        if n > 1e-6:
            basis.append(v / n)
        if len(basis) == vecs.shape[1]:
            break
    out = np.array(basis).T
    return _fix_phases(out)


def _fix_phases(vecs: np.ndarray) -> np.ndarray:
    out = vecs.copy()
    for k in range(out.shape[1]):
        col = out[:, k]
        nz = np.flatnonzero(np.abs(col) > 1e-10)
        if nz.size:
            a = col[nz[0]]
            out[:, k] = col * (abs(a) / a)
    return out


def choi_to_kraus(choi: np.ndarray, d_in: int, d_out: int,
                  cutoff: float = KRAUS_CUTOFF) -> np.ndarray:
    """Canonical Kraus operators from the Choi eigendecomposition.

    Ordered by descending Choi eigenvalue; degenerate eigenspaces get a
    deterministic basis.
    """
    lam, vec = eig_hermitian(choi)
    keep = lam > cutoff
    lam, vec = lam[keep], vec[:, keep]
    if lam.size == 0:
        raise ValueError("Choi matrix is zero")
    # regroup near-degenerate eigenvalues so the basis choice is reproducible
    out = np.empty_like(vec)
    start = 0
    while start < lam.size:
        stop = start + 1
        while stop < lam.size and abs(lam[stop] - lam[start]) <= 1e-9 * max(1.0, lam[start]):
            stop += 1
        if stop - start > 1:
            out[:, start:stop] = _canonical_basis(vec[:, start:stop])
        else:
            out[:, start:stop] = _fix_phases(vec[:, start:stop])
        start = stop
    ops = (out * np.sqrt(lam)).T.reshape(-1, d_in, d_out)
    return np.transpose(ops, (0, 2, 1)).copy()


def from_choi(choi, in_layout, out_layout, tol: float = 1e-8) -> QuantumChannel:
    in_layout, out_layout = _layout(in_layout), _layout(out_layout)
    j = np.asarray(choi, dtype=complex)
    d_in, d_out = in_layout.dim, out_layout.dim
    if j.shape != (d_in * d_out, d_in * d_out):
        raise ValueError(f"Choi matrix shape {j.shape} does not match dimensions {d_in}x{d_out}")
    lam, _ = eig_hermitian(j, tol=tol)
    if lam[-1] < -tol:
        raise ValueError(f"Choi matrix is not positive (eigenvalue {lam[-1]:.3g}); map is not CP")
    marg = np.einsum("iojo->ij", j.reshape(d_in, d_out, d_in, d_out))
    res = np.abs(marg - np.eye(d_in)).max()
    if res > tol:
        raise ValueError(f"Choi partial trace deviates from identity by {res:.3g}; map is not TP")
    kraus = choi_to_kraus(j, d_in, d_out)
    return QuantumChannel(in_layout, out_layout, kraus, check=False)


def canonicalize(channel: QuantumChannel) -> QuantumChannel:
    """Minimal Kraus form (count = Choi rank <= d_in * d_out)."""
    kraus = choi_to_kraus(to_choi(channel), channel.d_in, channel.d_out)
    return QuantumChannel(channel.in_layout, channel.out_layout, kraus, check=False)


def channel_distance(a: QuantumChannel, b: QuantumChannel) -> float:
    """Half the trace norm of the Choi difference divided by the input dimension."""
    if a.in_layout.dims != b.in_layout.dims or a.out_layout.dims != b.out_layout.dims:
        raise ValueError("channels act between different spaces")
    return 0.5 * trace_norm(to_choi(a) - to_choi(b)) / a.d_in


def validate_cptp(channel: QuantumChannel) -> CPTPReport:
    kraus = np.asarray(channel.kraus)
    lam = np.linalg.eigvalsh(kraus_to_choi(kraus))
    cp_min = float(lam[0])
    if abs(cp_min) < 1e-14:
        cp_min = 0.0
    res = _tp_residual(kraus)
    if res < 1e-15:
        res = 0.0
    return CPTPReport(tp_residual=res, cp_min_eigenvalue=cp_min)


# ---------------------------------------------------------------------------
# Stinespring view

def isometry_from_kraus(kraus: np.ndarray) -> np.ndarray:
    """V with V[(o, e), i] = K_e[o, i]; the environment is the last factor."""
    r, d_out, d_in = kraus.shape
    return np.transpose(kraus, (1, 0, 2)).reshape(d_out * r, d_in)


def kraus_from_isometry(v: np.ndarray, d_out: int) -> np.ndarray:
    """Inverse of :func:`isometry_from_kraus` (environment as the trailing factor)."""
    d_in = v.shape[1]
    r = v.shape[0] // d_out
    return np.transpose(v.reshape(d_out, r, d_in), (1, 0, 2)).copy()


def stinespring_dilation(channel: QuantumChannel, env_label: str = "E",
                         canonical: bool = True) -> StinespringIsometry:
    ch = canonicalize(channel) if canonical else channel
    kraus = np.asarray(ch.kraus)
    v = isometry_from_kraus(kraus)
    out = channel.out_layout + SystemLayout([(env_label, kraus.shape[0])])
    return StinespringIsometry(LinearOperator(channel.in_layout, out, v), env_label)


def complementary_channel(channel: QuantumChannel, env_label: str = "E") -> QuantumChannel:
    """Channel to the environment of the canonical Stinespring dilation."""
    dil = stinespring_dilation(channel, env_label)
    r = dil.isometry.out_layout.dim_of(env_label)
    v = np.asarray(dil.matrix).reshape(channel.d_out, r, channel.d_in)
    env_layout = SystemLayout([(env_label, r)])
    return QuantumChannel(channel.in_layout, env_layout, v, check=False)


def channel_from_isometry(v: np.ndarray, in_layout, out_layout) -> QuantumChannel:
    """Trace out the trailing environment factor of an isometry."""
    out_layout = _layout(out_layout)
    return QuantumChannel(in_layout, out_layout, kraus_from_isometry(v, out_layout.dim), check=False)


# ---------------------------------------------------------------------------
# combinators

def compose(second: QuantumChannel, first: QuantumChannel) -> QuantumChannel:
    """``second`` after ``first``."""
    if first.out_layout.dims != second.in_layout.dims:
        raise ValueError("output of the first channel does not match input of the second")
    k = np.einsum("aij,bjk->abik", second.kraus, first.kraus)
    k = k.reshape(-1, second.d_out, first.d_in)
    return QuantumChannel(first.in_layout, second.out_layout, k, check=False)


def tensor_channels(*channels: QuantumChannel) -> QuantumChannel:
    kraus = np.asarray(channels[0].kraus)
    in_l, out_l = channels[0].in_layout, channels[0].out_layout
    for ch in channels[1:]:
        kraus = np.einsum("aij,bkl->abikjl", kraus, ch.kraus).reshape(
            kraus.shape[0] * len(ch), kraus.shape[1] * ch.d_out, kraus.shape[2] * ch.d_in)
        in_l, out_l = in_l + ch.in_layout, out_l + ch.out_layout
    return QuantumChannel(in_l, out_l, kraus, check=False)


def relabel_channel(channel: QuantumChannel, mapping: dict[str, str]) -> QuantumChannel:
    return QuantumChannel(channel.in_layout.relabel(mapping), channel.out_layout.relabel(mapping),
                          channel.kraus, check=False)


# ---------------------------------------------------------------------------
# standard channels

def identity_channel(in_layout, out_layout=None) -> QuantumChannel:
    in_layout = _layout(in_layout)
    out_layout = in_layout if out_layout is None else _layout(out_layout)
    return QuantumChannel(in_layout, out_layout, [np.eye(in_layout.dim)])


def replacement_channel(in_layout, state: DensityOperator) -> QuantumChannel:
    """Discard the input and prepare ``state``."""
    in_layout = _layout(in_layout)
    lam, vec = eig_hermitian(state.matrix)
    ops = []
    for l, v in zip(lam, vec.T):
        if l <= KRAUS_CUTOFF:
            continue
        for i in range(in_layout.dim):
            k = np.zeros((state.dim, in_layout.dim), dtype=complex)
            k[:, i] = np.sqrt(l) * v
            ops.append(k)
    return QuantumChannel(in_layout, state.layout, ops)


def depolarizing_channel(d: int = 2, p: float = 1.0, labels=("A", "B")) -> QuantumChannel:
    """rho -> (1-p) rho + p I/d, built from the generalized Pauli basis."""
    x = np.roll(np.eye(d), 1, axis=0)
    z = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    ops = []
    for a in range(d):
        for b in range(d):
            w = np.linalg.matrix_power(x, a) @ np.linalg.matrix_power(z, b)
            coef = (1 - p + p / d**2) if (a, b) == (0, 0) else p / d**2
            if coef > 0:
                ops.append(np.sqrt(coef) * w)
    return QuantumChannel([(labels[0], d)], [(labels[1], d)], ops)


def dephasing_channel(d: int = 2, labels=("A", "B")) -> QuantumChannel:
    ops = []
    for i in range(d):
        k = np.zeros((d, d))
        k[i, i] = 1
        ops.append(k)
    return QuantumChannel([(labels[0], d)], [(labels[1], d)], ops)


def amplitude_damping_channel(g: float, labels=("A", "B")) -> QuantumChannel:
    k0 = np.array([[1, 0], [0, np.sqrt(1 - g)]])
    k1 = np.array([[0, np.sqrt(g)], [0, 0]])
    return QuantumChannel([(labels[0], 2)], [(labels[1], 2)], [k0, k1])


def partial_trace_channel(in_layout, keep: Sequence[str]) -> QuantumChannel:
    """Trace out every factor not in ``keep`` (kept factors stay in order)."""
    in_layout = _layout(in_layout)
    keep = list(keep)
    out_layout = in_layout.select(keep)
    idx = in_layout.indices(out_layout.labels)
    drop = [i for i in range(len(in_layout)) if i not in idx]
    d_drop = int(np.prod([in_layout.dims[i] for i in drop], dtype=np.int64))
    ops = []
    for j in range(d_drop):
        k = np.zeros((out_layout.dim, in_layout.dim), dtype=complex)
        jj = np.unravel_index(j, [in_layout.dims[i] for i in drop]) if drop else ()
        for o in range(out_layout.dim):
            oo = np.unravel_index(o, out_layout.dims)
            full = [0] * len(in_layout)
            for pos, val in zip(idx, oo):
                full[pos] = val
            for pos, val in zip(drop, jj):
                full[pos] = val
            k[o, np.ravel_multi_index(full, in_layout.dims)] = 1
        ops.append(k)
    return QuantumChannel(in_layout, out_layout, ops)
