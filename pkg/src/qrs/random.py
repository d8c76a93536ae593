"""Seeded random states, unitaries, isometries and channels."""
from __future__ import annotations

import numpy as np

from .channels import QuantumChannel, kraus_from_isometry
from .tensor import DensityOperator, Ket, SystemLayout


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _layout(x) -> SystemLayout:
    return x if isinstance(x, SystemLayout) else SystemLayout(x)


def ginibre(rows: int, cols: int, seed=None) -> np.ndarray:
    rng = _rng(seed)
    return rng.normal(size=(rows, cols)) + 1j * rng.normal(size=(rows, cols))


def rand_isometry(d_out: int, d_in: int, seed=None) -> np.ndarray:
    """Haar-random isometry (columns orthonormal)."""
    q, r = np.linalg.qr(ginibre(d_out, d_in, seed))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def rand_unitary(d: int, seed=None) -> np.ndarray:
    return rand_isometry(d, d, seed)


def rand_density_matrix(d: int, rank: int | None = None, seed=None) -> np.ndarray:
    g = ginibre(d, d if rank is None else rank, seed)
    m = g @ g.conj().T
    return m / np.trace(m).real


def rand_state(layout, rank: int | None = None, seed=None) -> DensityOperator:
    layout = _layout(layout)
    return DensityOperator(layout, rand_density_matrix(layout.dim, rank, seed), check=False)


def rand_ket(layout, seed=None) -> Ket:
    layout = _layout(layout)
    return Ket(layout, ginibre(layout.dim, 1, seed)[:, 0], normalize=True)


def rand_channel(in_layout, out_layout, n_kraus: int | None = None, seed=None) -> QuantumChannel:
    in_layout, out_layout = _layout(in_layout), _layout(out_layout)
    r = in_layout.dim * out_layout.dim if n_kraus is None else n_kraus
    v = rand_isometry(out_layout.dim * r, in_layout.dim, seed)
    return QuantumChannel(in_layout, out_layout, kraus_from_isometry(v, out_layout.dim), check=False)
