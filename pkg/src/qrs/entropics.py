"""Entropies, fidelity, trace distance and continuity bounds (all in bits)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .tensor import CLAMP, DensityOperator, clamp_spectrum, partial_trace, trace_norm


@dataclass(frozen=True)
class EntropyReport:
    value: float
    spectrum: np.ndarray
    clamped_mass: float


def entropy_of_spectrum(lam) -> float:
    lam = np.asarray(lam, dtype=float)
    lam = lam[lam > CLAMP]
    return float(max(0.0, -np.sum(lam * np.log2(lam))))


def entropy_of_matrix(m: np.ndarray) -> float:
    lam = np.linalg.eigvalsh(m)
    return entropy_of_spectrum(lam)


def entropy_report(state: DensityOperator, subsystem: Iterable[str] | None = None) -> EntropyReport:
    st = state if subsystem is None else partial_trace(state, subsystem)
    lam = np.linalg.eigvalsh(np.asarray(st.matrix))[::-1]
    lam, mass = clamp_spectrum(lam)
    value = entropy_of_spectrum(lam)
    return EntropyReport(min(value, float(np.log2(st.dim))), lam, mass)


def von_neumann_entropy(state: DensityOperator, subsystem: Iterable[str] | None = None) -> float:
    """S(X) = -Tr rho_X log2 rho_X of the reduced state on ``subsystem``."""
    return entropy_report(state, subsystem).value


def _disjoint(*parts):
    parts = [set(p) for p in parts]
    seen = set()
    for p in parts:
        if seen & p:
            raise ValueError(f"subsystem sets overlap on {sorted(seen & p)}")
        seen |= p
    return parts


def mutual_information(state: DensityOperator, part1: Iterable[str], part2: Iterable[str]) -> float:
    a, b = _disjoint(part1, part2)
    s = von_neumann_entropy
    return s(state, a) + s(state, b) - s(state, a | b)


def conditional_mutual_information(state: DensityOperator, part1, part2, cond) -> float:
    """I(A:B|C) = S(AC) + S(BC) - S(ABC) - S(C)."""
    a, b, c = _disjoint(part1, part2, cond)
    s = von_neumann_entropy
    sc = s(state, c) if c else 0.0
    return s(state, a | c) + s(state, b | c) - s(state, a | b | c) - sc


def conditional_entropy(state: DensityOperator, part: Iterable[str], cond: Iterable[str]) -> float:
    a, b = _disjoint(part, cond)
    sb = von_neumann_entropy(state, b) if b else 0.0
    return von_neumann_entropy(state, a | b) - sb


# ---------------------------------------------------------------------------
# distances

def psd_sqrt(m: np.ndarray) -> np.ndarray:
    lam, vec = np.linalg.eigh((m + m.conj().T) / 2)
    lam = np.sqrt(np.clip(lam, 0, None))
    return (vec * lam) @ vec.conj().T


def fidelity_matrices(rho: np.ndarray, xi: np.ndarray) -> float:
    """F = ||sqrt(rho) sqrt(xi)||_1 (root fidelity)."""
    f = np.linalg.svd(psd_sqrt(rho) @ psd_sqrt(xi), compute_uv=False).sum()
    return float(min(1.0, f))


def _same_layout(a: DensityOperator, b: DensityOperator):
    if a.layout.dims != b.layout.dims:
        raise ValueError(f"layouts differ: {a.layout.to_list()} vs {b.layout.to_list()}")


def fidelity(rho: DensityOperator, xi: DensityOperator) -> float:
    _same_layout(rho, xi)
    return fidelity_matrices(np.asarray(rho.matrix), np.asarray(xi.matrix))


def trace_distance(rho: DensityOperator, xi: DensityOperator) -> float:
    _same_layout(rho, xi)
    return 0.5 * trace_norm(np.asarray(rho.matrix) - np.asarray(xi.matrix))


# ---------------------------------------------------------------------------
# scalar bounds

def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {eps}")
    return eps


def binary_entropy(eps: float) -> float:
    eps = _check_eps(eps)
    if eps in (0.0, 1.0):
        return 0.0
    return float(-eps * np.log2(eps) - (1 - eps) * np.log2(1 - eps))


def fannes_audenaert_bound(eps: float, dim: int) -> float:
    """|S(rho) - S(sigma)| <= T log2(d-1) + h(T) for trace distance T <= 1 - 1/d."""
    eps = _check_eps(eps)
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    if dim == 1:
        return 0.0
    t = min(eps, 1 - 1 / dim)
    extra = t * np.log2(dim - 1) if dim > 2 else 0.0
    return float(extra + binary_entropy(t))


def afw_bound(eps: float, dim_a: int) -> float:
    """Alicki-Fannes-Winter bound on |S(A|B)_rho - S(A|B)_sigma|."""
    eps = _check_eps(eps)
    if dim_a < 1:
        raise ValueError("dimension must be >= 1")
    return float(2 * eps * np.log2(dim_a) + (1 + eps) * binary_entropy(eps / (1 + eps)))


def decoupling_delta(n: int, eps: float, dim_a1: int, dim_b1: int) -> float:
    """Right-hand side n*delta(n, eps) of the decoupling bound.

    2 t log2(|A1||B1|) + 2 h(t) with t = sqrt(6 eps). The trace-distance
    argument t is capped at 1 in the first term and at 1/2 inside h, which
    leaves the value unchanged for eps <= 1/24 and keeps it a valid,
    monotone bound beyond.
    """
    eps = _check_eps(eps)
    if n < 1 or dim_a1 < 1 or dim_b1 < 1:
        raise ValueError("n and dimensions must be >= 1")
    t = np.sqrt(6 * eps)
    return float(2 * min(t, 1.0) * np.log2(dim_a1 * dim_b1) + 2 * binary_entropy(min(t, 0.5)))
