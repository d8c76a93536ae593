"""Dense states and operators over labeled tensor-product spaces.

Index convention: row-major, the first factor of a layout is the most
significant index of the flattened vector.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-10
POSITIVITY_TOL = 1e-10
TRACE_TOL = 1e-10
NORM_TOL = 1e-10
CLAMP = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SystemLayout:
    """Ordered list of ``(label, dimension)`` tensor factors."""

    factors: tuple[tuple[str, int], ...]

    def __init__(self, factors: Iterable[Sequence]):
        factors = tuple((str(name), int(d)) for name, d in factors)
        labels = [name for name, _ in factors]
        if any(not name for name in labels):
            raise ValueError("system labels must be non-empty")
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate system labels in {labels}")
        if any(d < 1 for _, d in factors):
            raise ValueError(f"dimensions must be >= 1, got {factors}")
        object.__setattr__(self, "factors", factors)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.factors)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64))

    def __len__(self) -> int:
        return len(self.factors)

    def __contains__(self, label: str) -> bool:
        return label in self.labels

    def __add__(self, other: "SystemLayout") -> "SystemLayout":
        return SystemLayout(self.factors + other.factors)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown system label {label!r}; layout has {self.labels}") from None

    def indices(self, labels: Iterable[str]) -> list[int]:
        return [self.index(name) for name in labels]

    def dim_of(self, label: str) -> int:
        return self.dims[self.index(label)]

    def select(self, labels: Iterable[str]) -> "SystemLayout":
        """Sub-layout with the given labels, kept in this layout's order."""
        keep = set(labels)
        for name in keep:
            self.index(name)
        return SystemLayout([f for f in self.factors if f[0] in keep])

    def reorder(self, labels: Sequence[str]) -> "SystemLayout":
        return SystemLayout([self.factors[i] for i in self.indices(labels)])

    def relabel(self, mapping: dict[str, str]) -> "SystemLayout":
        return SystemLayout([(mapping.get(n, n), d) for n, d in self.factors])

    def to_list(self) -> list:
        return [[n, d] for n, d in self.factors]


class Ket:
    """Normalized pure state on a layout."""

    def __init__(self, layout: SystemLayout, amplitudes, *, normalize: bool = False):
        if not isinstance(layout, SystemLayout):
            layout = SystemLayout(layout)
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if amps.size != layout.dim:
            raise ValueError(f"ket has {amps.size} amplitudes, layout dimension is {layout.dim}")
        norm = np.linalg.norm(amps)
        if normalize:
            if norm == 0:
                raise ValueError("cannot normalize the zero vector")
            amps = amps / norm
        elif abs(norm - 1) > NORM_TOL:
            raise ValueError(f"ket norm {norm} is not 1")
        self.layout = layout
        self.amplitudes = _frozen(amps)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.layout.dims)

    def density(self) -> "DensityOperator":
        v = self.amplitudes
        return DensityOperator(self.layout, np.outer(v, v.conj()), check=False)

    def __repr__(self) -> str:
        return f"Ket({self.layout.to_list()})"


class DensityOperator:
    """Unit-trace positive semidefinite operator on a layout.

    Pass ``check=False`` for internally produced states whose validity
    follows from construction.
    """

    def __init__(self, layout: SystemLayout, matrix, *, check: bool = True):
        if not isinstance(layout, SystemLayout):
            layout = SystemLayout(layout)
        m = np.asarray(matrix, dtype=complex)
        if m.shape != (layout.dim, layout.dim):
            raise ValueError(f"matrix shape {m.shape} does not match layout dimension {layout.dim}")
        if check:
            check_state_matrix(m)
        self.layout = layout
        self.matrix = _frozen(m)

    @property
    def dim(self) -> int:
        return self.layout.dim

    def __repr__(self) -> str:
        return f"DensityOperator({self.layout.to_list()})"


def check_state_matrix(m: np.ndarray) -> None:
    herm = np.abs(m - m.conj().T).max() if m.size else 0.0
    if herm > HERMITIAN_TOL:
        raise ValueError(f"state is not Hermitian (max deviation {herm:.3g})")
    tr = np.trace(m).real
    if abs(tr - 1) > TRACE_TOL:
        raise ValueError(f"state trace is {tr}, expected 1")
    lam = np.linalg.eigvalsh((m + m.conj().T) / 2)
    if lam[0] < -POSITIVITY_TOL:
        raise ValueError(f"state has negative eigenvalue {lam[0]:.3g}")


@dataclass(frozen=True)
class LinearOperator:
    """Matrix from ``in_layout`` to ``out_layout`` (rows index the output)."""

    in_layout: SystemLayout
    out_layout: SystemLayout
    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.shape != (self.out_layout.dim, self.in_layout.dim):
            raise ValueError(
                f"operator shape {m.shape} does not match layouts "
                f"({self.out_layout.dim}, {self.in_layout.dim})"
            )
        object.__setattr__(self, "matrix", m)

    def is_isometry(self, tol: float = 1e-9) -> bool:
        m = self.matrix
        return np.abs(m.conj().T @ m - np.eye(m.shape[1])).max() <= tol


# ---------------------------------------------------------------------------
# raw-array kernels

def ptrace(matrix: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Partial trace of a square matrix, keeping factor indices ``keep`` in order."""
    n = len(dims)
    keep = sorted(keep)
    drop = [i for i in range(n) if i not in keep]
    dk = int(np.prod([dims[i] for i in keep], dtype=np.int64))
    dd = int(np.prod([dims[i] for i in drop], dtype=np.int64))
    t = np.asarray(matrix).reshape(tuple(dims) * 2)
    t = np.transpose(t, keep + drop + [n + i for i in keep] + [n + i for i in drop])
    return np.einsum("ijkj->ik", t.reshape(dk, dd, dk, dd))


def reduced_from_vector(vec: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Reduced density matrix of the pure state ``vec`` on factors ``keep``."""
    n = len(dims)
    keep = sorted(keep)
    drop = [i for i in range(n) if i not in keep]
    t = np.transpose(np.asarray(vec).reshape(dims), keep + drop)
    dk = int(np.prod([dims[i] for i in keep], dtype=np.int64))
    m = t.reshape(dk, -1)
    return m @ m.conj().T


def eig_hermitian(matrix, tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in descending order and matching orthonormal eigenvectors (columns)."""
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    scale = max(1.0, float(np.abs(m).max())) if m.size else 1.0
    if m.size and np.abs(m - m.conj().T).max() > tol * scale:
        raise ValueError("matrix is not Hermitian")
    lam, vec = np.linalg.eigh((m + m.conj().T) / 2)
    return lam[::-1].copy(), vec[:, ::-1].copy()


def clamp_spectrum(lam: np.ndarray) -> tuple[np.ndarray, float]:
    """Zero out roundoff-level negative eigenvalues; returns (spectrum, clamped mass)."""
    lam = np.asarray(lam, dtype=float)
    neg = lam < 0
    mass = float(-lam[neg].sum())
    return np.where(neg, 0.0, lam), mass


# ---------------------------------------------------------------------------
# labeled operations

def partial_trace(state: DensityOperator, keep: Iterable[str]) -> DensityOperator:
    keep = set(keep)
    layout = state.layout
    idx = layout.indices(keep)
    sub = layout.select(keep)
    if len(idx) == len(layout):
        return state
    m = ptrace(np.asarray(state.matrix), layout.dims, idx)
    return DensityOperator(sub, m, check=False)


def reduced_state(ket: Ket, keep: Iterable[str]) -> DensityOperator:
    keep = set(keep)
    layout = ket.layout
    idx = layout.indices(keep)
    m = reduced_from_vector(ket.amplitudes, layout.dims, idx)
    return DensityOperator(layout.select(keep), m, check=False)


def purify(state: DensityOperator, purifier_label: str = "R'", dim: int | None = None) -> Ket:
    """Purification with the purifier appended as the last factor.

    The purifier dimension defaults to the rank of ``state``; a larger
    explicit ``dim`` pads with unused basis vectors.
    """
    lam, vec = eig_hermitian(state.matrix)
    lam, _ = clamp_spectrum(lam)
    rank = max(1, int(np.sum(lam > CLAMP)))
    d = rank if dim is None else int(dim)
    if d < rank:
        raise ValueError(f"purifier dimension {d} is below the state rank {rank}")
    amps = np.zeros((state.dim, d), dtype=complex)
    amps[:, :rank] = vec[:, :rank] * np.sqrt(lam[:rank])
    amps /= np.linalg.norm(amps)
    layout = state.layout + SystemLayout([(purifier_label, d)])
    return Ket(layout, amps.reshape(-1))


def _permutation(labels: Sequence[str], new_order: Sequence[str]) -> list[int]:
    if sorted(new_order) != sorted(labels) or len(set(new_order)) != len(new_order):
        raise ValueError(f"{list(new_order)} is not a permutation of {list(labels)}")
    return [list(labels).index(name) for name in new_order]


def permute_systems(obj, new_order: Sequence[str]):
    """Reorder the tensor factors of a Ket or DensityOperator."""
    layout = obj.layout
    perm = _permutation(layout.labels, new_order)
    new_layout = layout.reorder(new_order)
    if isinstance(obj, Ket):
        t = np.transpose(obj.tensor(), perm)
        return Ket(new_layout, t.reshape(-1))
    if isinstance(obj, DensityOperator):
        n = len(layout)
        t = np.asarray(obj.matrix).reshape(layout.dims * 2)
        t = np.transpose(t, perm + [n + p for p in perm])
        return DensityOperator(new_layout, t.reshape(layout.dim, layout.dim), check=False)
    raise TypeError(f"cannot permute {type(obj).__name__}")


def tensor_product(*objs):
    """Tensor product of Kets (returns Ket) or states (returns DensityOperator)."""
    if all(isinstance(o, Ket) for o in objs):
        layout = objs[0].layout
        amps = objs[0].amplitudes
        for o in objs[1:]:
            layout = layout + o.layout
            amps = np.kron(amps, o.amplitudes)
        return Ket(layout, amps, normalize=True)
    states = [o.density() if isinstance(o, Ket) else o for o in objs]
    layout = states[0].layout
    m = states[0].matrix
    for s in states[1:]:
        layout = layout + s.layout
        m = np.kron(m, s.matrix)
    return DensityOperator(layout, m, check=False)


def relabel(obj, mapping: dict[str, str]):
    layout = obj.layout.relabel(mapping)
    if isinstance(obj, Ket):
        return Ket(layout, obj.amplitudes)
    return DensityOperator(layout, obj.matrix, check=False)


# ---------------------------------------------------------------------------
# common states

def basis_ket(layout: SystemLayout, index: Sequence[int] | int) -> Ket:
    if not isinstance(layout, SystemLayout):
        layout = SystemLayout(layout)
    v = np.zeros(layout.dim, dtype=complex)
    if not isinstance(index, int):
        index = int(np.ravel_multi_index(tuple(index), layout.dims))
    v[index] = 1
    return Ket(layout, v)


def maximally_entangled(d: int, labels: tuple[str, str] = ("A", "B")) -> Ket:
    v = np.eye(d, dtype=complex).reshape(-1) / np.sqrt(d)
    return Ket(SystemLayout([(labels[0], d), (labels[1], d)]), v)


def maximally_mixed(layout: SystemLayout) -> DensityOperator:
    if not isinstance(layout, SystemLayout):
        layout = SystemLayout(layout)
    return DensityOperator(layout, np.eye(layout.dim) / layout.dim, check=False)


def correlated_classical(probs: Sequence[float], labels: tuple[str, str] = ("A", "R")) -> DensityOperator:
    """sum_x p_x |x><x| (x) |x><x|."""
    p = np.asarray(probs, dtype=float)
    d = p.size
    m = np.zeros((d * d, d * d), dtype=complex)
    for x in range(d):
        m[x * d + x, x * d + x] = p[x]
    return DensityOperator(SystemLayout([(labels[0], d), (labels[1], d)]), m)


def trace_norm(m: np.ndarray) -> float:
    return float(np.linalg.svd(m, compute_uv=False).sum())
