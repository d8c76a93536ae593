"""Riemannian gradient descent on the complex Stiefel manifold {V : V^dagger V = 1}.

Gradients follow the convention df = Re Tr(G^dagger dV).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Objective = Callable[[np.ndarray], tuple[float, np.ndarray]]


def _herm(x: np.ndarray) -> np.ndarray:
    return (x + x.conj().T) / 2


def project_tangent(v: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Orthogonal projection of an ambient matrix onto the tangent space at ``v``."""
    return g - v @ _herm(v.conj().T @ g)


def retract(v: np.ndarray, z: np.ndarray) -> np.ndarray:
    """QR retraction with the sign convention diag(R) > 0."""
    q, r = np.linalg.qr(v + z)
    d = np.diag(r)
    ph = np.where(np.abs(d) > 0, d / np.abs(d), 1.0)
    return q * ph


def inner(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.real(np.vdot(a, b)))


@dataclass
class DescentResult:
    point: np.ndarray
    value: float
    iterations: int
    converged: bool
    history: list[float] = field(default_factory=list)


def minimize(fun: Objective, v0: np.ndarray, max_iter: int = 500, tol: float = 1e-10,
             gtol: float = 1e-8, step0: float = 0.1, patience: int = 5) -> DescentResult:
    """Armijo-backtracked Riemannian gradient descent.

    Stops once the objective improves by less than ``tol`` for ``patience``
    consecutive steps or the Riemannian gradient norm falls below ``gtol``.
    """
    v = v0
    f, g = fun(v)
    rg = project_tangent(v, g)
    step = step0
    history = [f]
    stall = 0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        gn2 = inner(rg, rg)
        if gn2 < gtol**2:
            converged = True
            break
        t = step
        accepted = False
        for _ in range(40):
            v_new = retract(v, -t * rg)
            f_new, g_new = fun(v_new)
            if f_new <= f - 1e-4 * t * gn2:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            converged = True
            break
        improvement = f - f_new
        v, f = v_new, f_new
        rg = project_tangent(v, g_new)
        history.append(f)
        step = min(t * 2.0, 1e3)
        stall = stall + 1 if improvement < tol else 0
        if stall >= patience:
            converged = True
            break
    return DescentResult(v, f, it, converged, history)


def directional_check(fun: Objective, v: np.ndarray, rng: np.random.Generator,
                      n_dirs: int = 20, h: float = 1e-5) -> float:
    """Max relative error between the Riemannian gradient and central differences.

    The error of each direction z (unit norm) is |fd - <grad, z>| / ||grad||,
    where fd is the central difference along the retraction curve.
    """
    _, g = fun(v)
    rg = project_tangent(v, g)
    gnorm = np.linalg.norm(rg)
    worst = 0.0
    for _ in range(n_dirs):
        z = rng.normal(size=v.shape) + 1j * rng.normal(size=v.shape)
        z = project_tangent(v, z)
        z /= np.linalg.norm(z)
        fp, _ = fun(retract(v, h * z))
        fm, _ = fun(retract(v, -h * z))
        fd = (fp - fm) / (2 * h)
        an = inner(rg, z)
        worst = max(worst, abs(fd - an) / max(gnorm, 1e-12))
    return worst
