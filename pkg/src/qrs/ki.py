"""Koashi-Imoto decomposition of a bipartite state rho^{AR}.

The A side of rho^{AR} splits as A = (+)_c N_c (x) Q_c (plus the kernel of
rho^A) with rho^{AR} = sum_c p_c omega_c^N (x) rho_c^{QR}. The
decomposition is read off from the *-algebra generated by the conditional
operators rho^A^{-1/2} Tr_R[(1 (x) M) rho] rho^A^{-1/2}, closed under the
modular flow of rho^A: that algebra equals (+)_c 1_{N_c} (x) B(Q_c).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .entropics import entropy_of_matrix, entropy_of_spectrum
from .tensor import (
    DensityOperator,
    LinearOperator,
    SystemLayout,
    permute_systems,
    ptrace,
    trace_norm,
)

SUPPORT_TOL = 1e-10
MERGE_TOL = 1e-7
FREQ_TOL = 1e-9
RANK_TOL = 1e-9
MAX_RETRIES = 5


class KIError(RuntimeError):
    pass


@dataclass(frozen=True)
class KIBlock:
    p: float
    dim_n: int
    dim_q: int
    omega: np.ndarray     # state on N_c
    rho_qr: np.ndarray    # state on Q_c (x) R
    isometry: np.ndarray  # A <- N_c (x) Q_c, shape (d_A, dim_n * dim_q)

    @property
    def signature(self) -> tuple[float, int, int]:
        return (self.p, self.dim_n, self.dim_q)


@dataclass(frozen=True)
class KIDecomposition:
    layout: SystemLayout          # [A, R...] of the decomposed state
    blocks: tuple[KIBlock, ...]
    u_ki: LinearOperator          # A -> (+)_c N_c Q_c (+) kernel, unitary
    kernel_dim: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def dim_a(self) -> int:
        return self.layout.dims[0]

    @property
    def dim_r(self) -> int:
        return self.layout.dim // self.dim_a

    def signatures(self) -> list[tuple[float, int, int]]:
        return [b.signature for b in self.blocks]


# ---------------------------------------------------------------------------
# linear-algebra helpers

def _orth(mats: Sequence[np.ndarray], tol: float = RANK_TOL) -> list[np.ndarray]:
    """Orthonormal (Hilbert-Schmidt) basis of span(mats)."""
    if not mats:
        return []
    shape = mats[0].shape
    a = np.array([m.reshape(-1) for m in mats]).T
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    scale = max(1.0, s[0]) if s.size else 1.0
    k = int(np.sum(s > tol * scale))
    return [u[:, i].reshape(shape) for i in range(k)]


def _nullspace(m: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    _, s, vh = np.linalg.svd(m)
    scale = max(1.0, s[0]) if s.size else 1.0
    rank = int(np.sum(s > tol * scale))
    return vh[rank:].conj().T


def _commutant(basis: Sequence[np.ndarray], d: int) -> list[np.ndarray]:
    eye = np.eye(d)
    rows = [np.kron(eye, b.T) - np.kron(b, eye) for b in basis]
    ns = _nullspace(np.vstack(rows))
    return _orth([ns[:, i].reshape(d, d) for i in range(ns.shape[1])])


def _intersection(a: Sequence[np.ndarray], b: Sequence[np.ndarray]) -> list[np.ndarray]:
    ma = np.array([x.reshape(-1) for x in a]).T
    mb = np.array([x.reshape(-1) for x in b]).T
    ns = _nullspace(np.hstack([ma, -mb]))
    shape = a[0].shape
    return _orth([(ma @ ns[: ma.shape[1], i]).reshape(shape) for i in range(ns.shape[1])])


def _clusters(values: np.ndarray, tol: float) -> list[np.ndarray]:
    """Index groups of sorted-adjacent values closer than ``tol``."""
    order = np.argsort(values)
    groups, cur = [], [order[0]]
    for i in order[1:]:
        if values[i] - values[cur[-1]] <= tol:
            cur.append(i)
        else:
            groups.append(np.array(cur))
            cur = [i]
    groups.append(np.array(cur))
    return groups


def _random_element(basis, rng, hermitian: bool) -> np.ndarray:
    c = rng.normal(size=len(basis)) + 1j * rng.normal(size=len(basis))
    z = sum(ci * b for ci, b in zip(c, basis))
    return (z + z.conj().T) / 2 if hermitian else z


# ---------------------------------------------------------------------------
# algebra construction

def _frequency_masks(log_lam: np.ndarray) -> list[np.ndarray]:
    """Boolean masks grouping matrix entries (j, k) by log l_j - log l_k."""
    diff = log_lam[:, None] - log_lam[None, :]
    flat = diff.reshape(-1)
    masks = []
    for g in _clusters(flat, FREQ_TOL):
        m = np.zeros(flat.size, dtype=bool)
        m[g] = True
        masks.append(m.reshape(diff.shape))
    return masks


def _modular_closed_algebra(gens: Sequence[np.ndarray], log_lam: np.ndarray) -> list[np.ndarray]:
    r = log_lam.size
    masks = _frequency_masks(log_lam)
    basis = _orth([np.eye(r, dtype=complex)] + list(gens) + [g.conj().T for g in gens])
    while True:
        cand = list(basis)
        for b in basis:
            cand.extend(b * m for m in masks)
        basis2 = _orth(cand)
        cand = list(basis2)
        for x in basis2:
            for y in basis2:
                cand.append(x @ y)
        basis3 = _orth(cand)
        if len(basis3) == len(basis):
            return basis3
        basis = basis3


def _conditional_generators(rho4: np.ndarray, support: np.ndarray, lam: np.ndarray) -> list[np.ndarray]:
    d_r = rho4.shape[1]
    w = support / np.sqrt(lam)
    gens = []
    for k in range(d_r):
        for l in range(d_r):
            gens.append(w.conj().T @ rho4[:, k, :, l] @ w)
    return _orth(gens)


def _split_block(alg_c, com_c, d_c, rng):
    """Tensor basis of a block: returns matrix with columns ordered (n, q)."""
    dim_q = int(round(np.sqrt(len(alg_c))))
    dim_n = int(round(np.sqrt(len(com_c))))
    if dim_n * dim_q != d_c or dim_q**2 != len(alg_c) or dim_n**2 != len(com_c):
        raise KIError(f"block of dimension {d_c} is not a factor: algebra dim {len(alg_c)}, "
                      f"commutant dim {len(com_c)}")
    if dim_n == 1:
        return np.eye(d_c, dtype=complex), dim_n, dim_q
    h = _random_element(com_c, rng, hermitian=True)
    lam, vec = np.linalg.eigh(h)
    groups = _clusters(lam, MERGE_TOL * max(1.0, np.abs(lam).max()))
    if len(groups) != dim_n or any(len(g) != dim_q for g in groups):
        raise KIError("commutant element has degenerate spectrum")
    spaces = [vec[:, g] for g in groups]
    e1 = spaces[0]
    cols = [e1]
    for ej in spaces[1:]:
        for _ in range(MAX_RETRIES):
            z = _random_element(com_c, rng, hermitian=False)
            m = ej @ (ej.conj().T @ (z @ e1))
            norms = np.linalg.norm(m, axis=0)
            if norms.min() > 1e-6 * max(1.0, np.abs(z).max()):
                break
        else:
            raise KIError("could not align tensor factors")
        cols.append(m / norms[0])
    return np.hstack(cols), dim_n, dim_q


def _structure(basis, com, center, r, rng):
    """Central decomposition and tensor bases for every block."""
    if len(center) == 1:
        projs = [np.eye(r, dtype=complex)]
        spread = 0.0
    else:
        z = _random_element(center, rng, hermitian=True)
        lam, vec = np.linalg.eigh(z)
        tol = MERGE_TOL * max(1.0, np.abs(lam).max())
        groups = _clusters(lam, tol)
        spread = max(float(np.ptp(lam[g])) for g in groups)
        projs = [vec[:, g] for g in groups]
        if len(projs) != len(center):
            raise KIError(f"center of dimension {len(center)} split into {len(projs)} blocks")
    blocks = []
    for w in projs:
        d_c = w.shape[1]
        alg_c = _orth([w.conj().T @ b @ w for b in basis])
        com_c = _orth([w.conj().T @ c @ w for c in com])
        t, dim_n, dim_q = _split_block(alg_c, com_c, d_c, rng)
        blocks.append((w @ t, dim_n, dim_q))
    return blocks, spread


def ki_decompose(state: DensityOperator, a_label: str | None = None, seed: int = 0) -> KIDecomposition:
    """Koashi-Imoto decomposition with respect to the factor ``a_label``.

    All other factors of ``state`` form the reference R. ``a_label``
    defaults to the first factor.
    """
    layout = state.layout
    a_label = layout.labels[0] if a_label is None else a_label
    rest = [n for n in layout.labels if n != a_label]
    st = permute_systems(state, [a_label] + rest)
    layout = st.layout
    d_a = layout.dims[0]
    d_r = layout.dim // d_a
    rho = np.asarray(st.matrix)
    rho4 = rho.reshape(d_a, d_r, d_a, d_r)

    lam, vec = np.linalg.eigh(ptrace(rho, [d_a, d_r], [0]))
    keep = lam > SUPPORT_TOL
    lam_s, support, kernel = lam[keep], vec[:, keep], vec[:, ~keep]
    r = lam_s.size

    gens = _conditional_generators(rho4, support, lam_s)
    basis = _modular_closed_algebra(gens, np.log(lam_s))
    com = _commutant(basis, r)
    center = _intersection(basis, com)

    rng = np.random.default_rng(seed)
    result = None
    retries = 0
    for attempt in range(MAX_RETRIES):
        try:
            b1, spread = _structure(basis, com, center, r, rng)
            b2, _ = _structure(basis, com, center, r, rng)
        except KIError:
            retries += 1
            continue
        sig1 = sorted((n, q) for _, n, q in b1)
        sig2 = sorted((n, q) for _, n, q in b2)
        if sig1 == sig2:
            result = b1
            break
        retries += 1
    if result is None:
        raise KIError("block signatures disagree across random draws")

    blocks = []
    for t, dim_n, dim_q in result:
        v = support @ t  # A <- N (x) Q
        vr = np.kron(v, np.eye(d_r))
        blk = vr.conj().T @ rho @ vr
        p = float(np.trace(blk).real)
        blk = blk / p
        dims = [dim_n, dim_q, d_r]
        omega = ptrace(blk, dims, [0])
        rho_qr = ptrace(blk, dims, [1, 2])
        blocks.append(KIBlock(p, dim_n, dim_q, omega, rho_qr, v))
    blocks.sort(key=lambda b: (-round(b.p, 9), b.dim_n, b.dim_q))

    u = np.vstack([b.isometry.conj().T for b in blocks] + ([kernel.conj().T] if kernel.size else []))
    out_dims = [b.dim_n * b.dim_q for b in blocks] + ([kernel.shape[1]] if kernel.size else [])
    out_layout = SystemLayout([("CNQ", int(sum(out_dims)))])
    dec = KIDecomposition(
        layout=layout,
        blocks=tuple(blocks),
        u_ki=LinearOperator(SystemLayout([layout.factors[0]]), out_layout, u),
        kernel_dim=int(kernel.shape[1]),
        diagnostics={
            "support_rank": r,
            "algebra_dim": len(basis),
            "commutant_dim": len(com),
            "center_dim": len(center),
            "retries": retries,
            "merged": bool(spread > 1e-12),
        },
    )
    res = reconstruction_residual(dec, state)
    dec.diagnostics["reconstruction_residual"] = res
    return dec


def ki_reconstruct(dec: KIDecomposition) -> DensityOperator:
    """sum_c p_c (V_c (x) 1)(omega_c (x) rho_c^{QR})(V_c (x) 1)^dagger on [A, R...]."""
    d_r = dec.dim_r
    out = np.zeros((dec.layout.dim, dec.layout.dim), dtype=complex)
    for b in dec.blocks:
        vr = np.kron(b.isometry, np.eye(d_r))
        out += b.p * vr @ np.kron(b.omega, b.rho_qr) @ vr.conj().T
    return DensityOperator(dec.layout, out, check=False)


def reconstruction_residual(dec: KIDecomposition, state: DensityOperator) -> float:
    st = permute_systems(state, dec.layout.labels)
    return 0.5 * trace_norm(np.asarray(ki_reconstruct(dec).matrix) - np.asarray(st.matrix))


def ki_state(dec: KIDecomposition) -> np.ndarray:
    """omega^{CNQR} = (U_KI (x) 1) rho (U_KI (x) 1)^dagger in the (+)_c N_c Q_c basis."""
    u = np.asarray(dec.u_ki.matrix)
    ur = np.kron(u, np.eye(dec.dim_r))
    return ur @ np.asarray(ki_reconstruct(dec).matrix) @ ur.conj().T


@dataclass(frozen=True)
class KIEntropies:
    s_c: float
    s_cq: float
    s_cnq: float


def ki_entropies(dec: KIDecomposition) -> KIEntropies:
    p = np.array([b.p for b in dec.blocks])
    h = entropy_of_spectrum(p)
    s_q = [entropy_of_matrix(ptrace(b.rho_qr, [b.dim_q, dec.dim_r], [0])) for b in dec.blocks]
    s_n = [entropy_of_matrix(b.omega) for b in dec.blocks]
    s_cq = h + float(np.dot(p, s_q))
    s_cnq = s_cq + float(np.dot(p, s_n))
    return KIEntropies(s_c=h, s_cq=s_cq, s_cnq=s_cnq)


def block_state(blocks: Sequence[tuple[float, np.ndarray, np.ndarray]], d_r: int,
                labels=("A", "R")) -> DensityOperator:
    """Assemble sum_c p_c |c><c| (x) omega_c (x) rho_c^{QR} with A = (+)_c N_c Q_c."""
    dims = [om.shape[0] * rq.shape[0] // d_r for _, om, rq in blocks]
    d_a = sum(dims)
    out = np.zeros((d_a * d_r, d_a * d_r), dtype=complex)
    off = 0
    for (p, om, rq), d in zip(blocks, dims):
        v = np.zeros((d_a, d))
        v[off: off + d, :] = np.eye(d)
        vr = np.kron(v, np.eye(d_r))
        out += p * vr @ np.kron(om, rq) @ vr.conj().T
        off += d
    return DensityOperator(SystemLayout([(labels[0], d_a), (labels[1], d_r)]), out)
