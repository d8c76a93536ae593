"""Upper bounds on the assisted and unassisted channel-simulation rates.

For a source rho^{AR}, a channel N: A -> BK and an infidelity budget gamma:

* assisted rate   a = min over L1: A -> BK of  I(B:RR')/2  at  tau1 = L1(rho^{ARR'})
* unassisted rate u = min over L2: A -> BK, L3: E -> E' of  S(BE')  at  tau3

both subject to F(sigma^{BKR}, tau^{BKR}) >= 1 - gamma with sigma = N(rho).
Channels are parameterized by Stinespring isometries on the complex
Stiefel manifold, so every iterate is a valid channel. The fidelity
constraint is handled by an augmented quadratic penalty; whatever the
optimizer returns is re-evaluated through the generic state/channel API
before it is reported.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import stiefel
from .channels import (
    QuantumChannel,
    apply_channel,
    apply_kraus,
    canonicalize,
    isometry_from_kraus,
    kraus_from_isometry,
    tensor_channels,
)
from .entropics import entropy_of_matrix, fidelity, mutual_information, von_neumann_entropy
from .ki import ki_decompose, ki_entropies
from .random import rand_isometry
from .tensor import (
    CLAMP,
    DensityOperator,
    SystemLayout,
    partial_trace,
    permute_systems,
    purify,
    relabel,
    tensor_product,
)

INV_LN2 = 1 / math.log(2)
CERT_TOL = 1e-8


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 16
    max_iterations: int = 400
    seed: int = 0
    penalty_initial: float = 1e2
    penalty_growth: float = 10.0
    penalty_stages: int = 4
    tol: float = 1e-10
    dim_e: int | None = None
    dim_eprime: int | None = None
    # effective budget used when gamma == 0
    gamma_zero: float = 1e-10
    seesaw_rounds: int = 6
    restoration_iterations: int = 400

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iterations < 1 or self.penalty_stages < 1:
            raise ValueError("iteration counts must be >= 1")


@dataclass(frozen=True)
class RateQuery:
    """Source rho^{AR}, channel N: A -> BK, budget gamma and copy count.

    The channel's input factors name A inside ``source``; every other
    factor of ``source`` is reference R. ``b_labels`` picks the output
    factors held by the decoder (default: the first one); the remaining
    outputs form K.
    """

    source: DensityOperator
    channel: QuantumChannel
    gamma: float = 0.0
    copies: int = 1
    config: OptimizerConfig = field(default_factory=OptimizerConfig)
    b_labels: tuple | None = None

    def __post_init__(self):
        if self.b_labels is not None:
            missing = set(self.b_labels) - set(self.channel.out_layout.labels)
            if missing or not self.b_labels:
                raise ValueError(f"B labels {sorted(missing)} are not channel outputs")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 1 <= self.copies <= 3:
            raise ValueError("copies must be 1, 2 or 3")
        for name, d in self.channel.in_layout.factors:
            if name not in self.source.layout or self.source.layout.dim_of(name) != d:
                raise ValueError(f"channel input factor {name!r} (dim {d}) is not a factor of the source")
        if len(self.channel.in_layout) == len(self.source.layout):
            raise ValueError("the source needs at least one reference factor")

    @property
    def gamma_effective(self) -> float:
        return self.gamma if self.gamma > 0 else self.config.gamma_zero


@dataclass
class RateResult:
    kind: str
    value: float                  # bits per copy, re-evaluated from ``channels``
    channels: dict
    fidelity: float
    constraint_residual: float
    gamma: float
    gamma_effective: float
    copies: int
    status: str                   # "optimized" or "fallback"
    restarts: list = field(default_factory=list)
    wall_clock: float = 0.0
    optimizer_value: float = float("nan")
    label: str = "m-copy upper bound"

    @property
    def certified(self) -> bool:
        return self.status == "optimized"


# ---------------------------------------------------------------------------
# problem instance

def _copy_labels(labels: Sequence[str], i: int, m: int) -> dict[str, str]:
    return {n: (f"{n}_{i}" if m > 1 else n) for n in labels}


def permute_channel_output(channel: QuantumChannel, order: Sequence[str]) -> QuantumChannel:
    out = channel.out_layout
    perm = [out.labels.index(n) for n in order]
    k = np.asarray(channel.kraus).reshape((len(channel),) + out.dims + (channel.d_in,))
    k = np.transpose(k, [0] + [p + 1 for p in perm] + [len(out) + 1])
    return QuantumChannel(channel.in_layout, out.reorder(order), k.reshape(len(channel), out.dim, -1),
                          check=False)


@dataclass
class Instance:
    """m-copy source and channel in grouped order [A.., R..] -> [B.., K..]."""

    source: DensityOperator
    channel: QuantumChannel
    a_labels: list
    r_labels: list
    b_labels: list
    k_labels: list
    copies: int

    def __post_init__(self):
        lay = self.source.layout
        self.d_a = lay.select(self.a_labels).dim
        self.d_r = lay.select(self.r_labels).dim
        out = self.channel.out_layout
        self.d_b = out.select(self.b_labels).dim
        self.d_k = out.select(self.k_labels).dim if self.k_labels else 1
        ket = purify(self.source, "R'")
        self.d_p = ket.layout.dim_of("R'")
        self.phi = np.asarray(ket.amplitudes).reshape(self.d_a, self.d_r * self.d_p)
        sig = apply_kraus(np.asarray(self.channel.kraus), np.asarray(self.source.matrix))
        self.sigma_bkr = sig
        lam, vec = np.linalg.eigh(sig)
        keep = lam > 1e-14
        self._sig_half = vec[:, keep] * np.sqrt(lam[keep])
        self.s_a = entropy_of_matrix(self.phi @ self.phi.conj().T)

    @classmethod
    def build(cls, source: DensityOperator, channel: QuantumChannel, copies: int = 1,
              b_labels: Sequence[str] | None = None) -> "Instance":
        a = list(channel.in_layout.labels)
        r = [n for n in source.layout.labels if n not in a]
        b = [channel.out_layout.labels[0]] if b_labels is None else list(b_labels)
        k = [n for n in channel.out_layout.labels if n not in b]
        src = permute_systems(source, a + r)
        if list(channel.out_layout.labels) != b + k:
            channel = permute_channel_output(channel, b + k)
        if copies == 1:
            return cls(src, channel, a, r, b, k, 1)
        m = copies
        srcs, chans = [], []
        for i in range(1, m + 1):
            mp = _copy_labels(src.layout.labels, i, m)
            srcs.append(relabel(src, mp))
            mp = _copy_labels(list(channel.in_layout.labels) + list(channel.out_layout.labels), i, m)
            chans.append(QuantumChannel(channel.in_layout.relabel(mp), channel.out_layout.relabel(mp),
                                        channel.kraus, check=False))
        am = [f"{n}_{i}" for i in range(1, m + 1) for n in a]
        rm = [f"{n}_{i}" for i in range(1, m + 1) for n in r]
        bm = [f"{n}_{i}" for i in range(1, m + 1) for n in b]
        km = [f"{n}_{i}" for i in range(1, m + 1) for n in k]
        src_m = permute_systems(tensor_product(*srcs), am + rm)
        ch_m = permute_channel_output(tensor_channels(*chans), bm + km)
        return cls(src_m, ch_m, am, rm, bm, km, m)

    # -- fidelity against sigma^{BKR} -------------------------------------

    def fidelity_and_grad(self, m_bkr: np.ndarray):
        """F(sigma, M M^dagger) and dF/dtau (Hermitian), restricted to supp(sigma)."""
        h = self._sig_half
        x = h.conj().T @ m_bkr
        a = x @ x.conj().T
        lam, w = np.linalg.eigh((a + a.conj().T) / 2)
        top = max(lam[-1], 0.0)
        ok = lam > 1e-14 * max(top, 1e-300)
        f = float(np.sum(np.sqrt(np.clip(lam[ok], 0, None))))
        inv_half = (w[:, ok] / np.sqrt(lam[ok])) @ w[:, ok].conj().T
        grad = 0.5 * h @ inv_half @ h.conj().T
        return f, grad


def _entropy_grad(rho: np.ndarray):
    """S(rho) in bits and dS/drho = -(log2 rho + 1/ln 2)."""
    lam, vec = np.linalg.eigh((rho + rho.conj().T) / 2)
    pos = lam > CLAMP
    s = float(max(0.0, -np.sum(lam[pos] * np.log2(lam[pos]))))
    lg = np.log2(np.clip(lam, 1e-16, None)) + INV_LN2
    return s, -(vec * lg) @ vec.conj().T


# ---------------------------------------------------------------------------
# objectives

class AssistedProblem:
    """Variable: isometry V: A -> B K E (rows ordered b, k, e)."""

    n_blocks = 1
    constrained_block = 0

    def __init__(self, inst: Instance, d_e: int):
        self.inst = inst
        self.d_e = d_e
        self.shapes = [(inst.d_b * inst.d_k * d_e, inst.d_a)]

    def _tensor(self, v):
        i = self.inst
        return (v @ i.phi).reshape(i.d_b, i.d_k, self.d_e, i.d_r, i.d_p)

    def objective(self, xs):
        """(1/2) I(B:RR') and its gradient."""
        i = self.inst
        t = self._tensor(xs[0])
        m_b = t.reshape(i.d_b, -1)
        m_ke = np.transpose(t, (1, 2, 0, 3, 4)).reshape(i.d_k * self.d_e, -1)
        s_b, l_b = _entropy_grad(m_b @ m_b.conj().T)
        s_ke, l_ke = _entropy_grad(m_ke @ m_ke.conj().T)
        f = 0.5 * (s_b + i.s_a - s_ke)
        g_t = (l_b @ m_b).reshape(t.shape)
        g_t -= np.transpose((l_ke @ m_ke).reshape(i.d_k, self.d_e, i.d_b, i.d_r, i.d_p), (2, 0, 1, 3, 4))
        g_v = g_t.reshape(-1, i.phi.shape[1]) @ i.phi.conj().T
        return f, [g_v]

    def fidelity(self, xs):
        i = self.inst
        t = self._tensor(xs[0])
        m = np.transpose(t, (0, 1, 3, 2, 4)).reshape(i.d_b * i.d_k * i.d_r, -1)
        f, gf = i.fidelity_and_grad(m)
        g_t = np.transpose((2 * gf @ m).reshape(i.d_b, i.d_k, i.d_r, self.d_e, i.d_p), (0, 1, 3, 2, 4))
        g_v = g_t.reshape(-1, i.phi.shape[1]) @ i.phi.conj().T
        return f, [g_v]

    def channels(self, xs):
        i = self.inst
        k = kraus_from_isometry(xs[0], i.d_b * i.d_k)
        return {"lambda1": QuantumChannel(i.channel.in_layout, i.channel.out_layout, k, check=False)}

    def initial(self, rng, warm=None):
        if warm is not None:
            return [warm[0]]
        return [rand_isometry(*self.shapes[0], seed=rng)]


class UnassistedProblem:
    """Variables: V2: A -> B K E and V3: E -> E' E'' (rows ordered e', e'')."""

    n_blocks = 2
    constrained_block = 0

    def __init__(self, inst: Instance, d_e: int, d_e1: int, d_e2: int | None = None):
        self.inst = inst
        self.d_e, self.d_e1 = d_e, d_e1
        self.d_e2 = d_e if d_e2 is None else d_e2
        self.shapes = [(inst.d_b * inst.d_k * d_e, inst.d_a), (d_e1 * self.d_e2, d_e)]

    def _t2(self, v2):
        i = self.inst
        return (v2 @ i.phi).reshape(i.d_b, i.d_k, self.d_e, -1)

    def objective(self, xs):
        """S(BE') and its gradients with respect to V2 and V3."""
        i = self.inst
        v2, v3 = xs
        t2 = self._t2(v2)
        t3 = np.einsum("xe,bker->bkxr", v3, t2)
        ref = t2.shape[-1]
        t3 = t3.reshape(i.d_b, i.d_k, self.d_e1, self.d_e2, ref)
        m = np.transpose(t3, (0, 2, 1, 3, 4)).reshape(i.d_b * self.d_e1, -1)
        s, lg = _entropy_grad(m @ m.conj().T)
        g3 = np.transpose((2 * lg @ m).reshape(i.d_b, self.d_e1, i.d_k, self.d_e2, ref), (0, 2, 1, 3, 4))
        g3 = g3.reshape(i.d_b, i.d_k, self.d_e1 * self.d_e2, ref)
        g_v3 = np.einsum("bkxr,bker->xe", g3, t2.conj())
        g_t2 = np.einsum("xe,bkxr->bker", v3.conj(), g3)
        g_v2 = g_t2.reshape(-1, ref) @ i.phi.conj().T
        return s, [g_v2, g_v3]

    def fidelity(self, xs):
        i = self.inst
        t = self._t2(xs[0]).reshape(i.d_b, i.d_k, self.d_e, i.d_r, i.d_p)
        m = np.transpose(t, (0, 1, 3, 2, 4)).reshape(i.d_b * i.d_k * i.d_r, -1)
        f, gf = i.fidelity_and_grad(m)
        g_t = np.transpose((2 * gf @ m).reshape(i.d_b, i.d_k, i.d_r, self.d_e, i.d_p), (0, 1, 3, 2, 4))
        g_v2 = g_t.reshape(-1, i.phi.shape[1]) @ i.phi.conj().T
        return f, [g_v2, np.zeros(self.shapes[1], dtype=complex)]

    def channels(self, xs):
        i = self.inst
        k2 = kraus_from_isometry(xs[0], i.d_b * i.d_k)
        k3 = kraus_from_isometry(xs[1], self.d_e1)
        return {
            "lambda2": QuantumChannel(i.channel.in_layout, i.channel.out_layout, k2, check=False),
            "lambda3": QuantumChannel([("E", self.d_e)], [("E'", self.d_e1)], k3, check=False),
        }

    def initial(self, rng, warm=None):
        v3 = rand_isometry(*self.shapes[1], seed=rng)
        if warm is not None:
            return [warm[0], warm[1] if len(warm) > 1 else v3]
        return [rand_isometry(*self.shapes[0], seed=rng), v3]


# ---------------------------------------------------------------------------
# augmented-penalty driver

class _Penalized:
    def __init__(self, problem, target: float, mu: float, lam: float):
        self.problem, self.target, self.mu, self.lam = problem, target, mu, lam

    def __call__(self, xs):
        f, g = self.problem.objective(xs)
        if self.mu == 0:
            return f, g
        fid, gf = self.problem.fidelity(xs)
        shift = self.target - fid + self.lam / (2 * self.mu)
        if shift > 0:
            f += self.mu * shift**2
            g = [gi - 2 * self.mu * shift * gfi for gi, gfi in zip(g, gf)]
        return f, g


def _block_fun(fun, xs, b):
    def inner(v):
        ys = list(xs)
        ys[b] = v
        f, g = fun(ys)
        return f, g[b]
    return inner


def _descend(fun, xs, cfg: OptimizerConfig):
    xs = list(xs)
    iters = 0
    if len(xs) == 1:
        res = stiefel.minimize(_block_fun(fun, xs, 0), xs[0], cfg.max_iterations, cfg.tol)
        return [res.point], res.value, res.iterations
    prev = np.inf
    value = np.inf
    per_block = max(20, cfg.max_iterations // cfg.seesaw_rounds)
    for _ in range(cfg.seesaw_rounds):
        for b in range(len(xs)):
            res = stiefel.minimize(_block_fun(fun, xs, b), xs[b], per_block, cfg.tol)
            xs[b] = res.point
            value = res.value
            iters += res.iterations
        if prev - value < cfg.tol:
            break
        prev = value
    return xs, value, iters


def _restore(problem, xs, target: float, cfg: OptimizerConfig):
    """Push the fidelity up to ``target`` along its Riemannian gradient.

    Each step is sized from the linear model of F so that the iterate lands
    just past the target instead of climbing all the way to F = 1.
    """
    b = problem.constrained_block
    xs = list(xs)
    boost = 1.5
    for _ in range(cfg.restoration_iterations):
        f, g = problem.fidelity(xs)
        if f >= target:
            break
        rg = stiefel.project_tangent(xs[b], g[b])
        gn2 = stiefel.inner(rg, rg)
        if gn2 < 1e-30:
            break
        t = boost * (target - f) / gn2
        ys = list(xs)
        ys[b] = stiefel.retract(xs[b], t * rg)
        f_new, _ = problem.fidelity(ys)
        if f_new > f:
            xs = ys
            boost = min(boost * 2, 1e6) if f_new < target else boost
        else:
            boost /= 4
    return xs


def _optimize(problem, xs, target: float, cfg: OptimizerConfig):
    lam = 0.0
    iters = 0
    margin = min(1e-12, (1 - target) / 10)
    for stage in range(cfg.penalty_stages):
        mu = cfg.penalty_initial * cfg.penalty_growth**stage
        fun = _Penalized(problem, target + margin, mu, lam)
        xs, _, it = _descend(fun, xs, cfg)
        iters += it
        fid, _ = problem.fidelity(xs)
        lam = max(0.0, lam + 2 * mu * (target + margin - fid))
    xs = _restore(problem, xs, target + margin, cfg)
    f, _ = problem.objective(xs)
    fid, _ = problem.fidelity(xs)
    return xs, f, fid, iters


# ---------------------------------------------------------------------------
# independent re-evaluation

def _purified(inst: Instance) -> DensityOperator:
    return purify(inst.source, "R'").density()


def evaluate_assisted(inst: Instance, lambda1: QuantumChannel) -> tuple[float, float]:
    """(I(B:RR')/2, F(sigma^{BKR}, tau^{BKR})) through the generic state API."""
    rho = _purified(inst)
    tau = apply_channel(lambda1, rho, inst.a_labels)
    sigma = apply_channel(inst.channel, inst.source, inst.a_labels)
    value = 0.5 * mutual_information(tau, inst.b_labels, inst.r_labels + ["R'"])
    keep = inst.b_labels + inst.k_labels + inst.r_labels
    return value, fidelity(sigma, partial_trace(tau, keep))


def evaluate_unassisted(inst: Instance, lambda2: QuantumChannel, lambda3: QuantumChannel) -> tuple[float, float]:
    """(S(BE'), F(sigma^{BKR}, tau2^{BKR})) with E the environment of the given Kraus order."""
    rho = _purified(inst)
    v = isometry_from_kraus(np.asarray(lambda2.kraus))
    d_e = len(lambda2)
    dil = QuantumChannel(lambda2.in_layout, lambda2.out_layout + SystemLayout([("E", d_e)]), [v],
                         check=False)
    tau2 = apply_channel(dil, rho, inst.a_labels)
    tau3 = apply_channel(lambda3, tau2, ["E"])
    value = von_neumann_entropy(tau3, inst.b_labels + ["E'"])
    sigma = apply_channel(inst.channel, inst.source, inst.a_labels)
    keep = inst.b_labels + inst.k_labels + inst.r_labels
    return value, fidelity(sigma, partial_trace(tau2, keep))


# ---------------------------------------------------------------------------
# public operations

def _default_dims(inst: Instance, cfg: OptimizerConfig):
    d_e = cfg.dim_e or inst.d_a * inst.d_b * inst.d_k
    d_e1 = cfg.dim_eprime or d_e
    return d_e, d_e1


def _pad_isometry(v: np.ndarray, d_front: int, r: int, d_e: int) -> np.ndarray | None:
    """Embed an isometry with environment r into environment d_e >= r."""
    if r > d_e:
        return None
    out = np.zeros((d_front, d_e, v.shape[1]), dtype=complex)
    out[:, :r, :] = v.reshape(d_front, r, -1)
    return out.reshape(d_front * d_e, -1)


def _run(kind: str, query: RateQuery, warm_start: RateResult | None = None) -> RateResult:
    t0 = time.perf_counter()
    cfg = query.config
    inst = Instance.build(query.source, query.channel, query.copies, query.b_labels)
    d_e, d_e1 = _default_dims(inst, cfg)
    if kind == "assisted":
        problem = AssistedProblem(inst, d_e)
    else:
        problem = UnassistedProblem(inst, d_e, d_e1)
    gamma_eff = query.gamma_effective
    target = 1.0 - gamma_eff
    front = inst.d_b * inst.d_k

    nat = canonicalize(inst.channel)
    v_nat = isometry_from_kraus(np.asarray(nat.kraus))
    nat_start = _pad_isometry(v_nat, front, len(nat), d_e)

    warm = None
    if warm_start is not None:
        key = "lambda1" if kind == "assisted" else "lambda2"
        wk = np.asarray(warm_start.channels[key].kraus)
        w2 = _pad_isometry(isometry_from_kraus(wk), front, wk.shape[0], d_e)
        if w2 is not None:
            warm = [w2]
            if kind == "unassisted":
                l3 = warm_start.channels["lambda3"]
                if l3.d_in == d_e and l3.d_out == d_e1 and len(l3) <= problem.d_e2:
                    w3 = _pad_isometry(isometry_from_kraus(np.asarray(l3.kraus)), d_e1, len(l3), problem.d_e2)
                    warm.append(w3)

    candidates = []  # (value, order, channels, source)
    trace = []

    def add_candidate(chans, order, src):
        if kind == "assisted":
            val, fid = evaluate_assisted(inst, chans["lambda1"])
        else:
            val, fid = evaluate_unassisted(inst, chans["lambda2"], chans["lambda3"])
        feasible = fid >= target
        if feasible:
            candidates.append((val, order, chans, fid, src))
        return val, fid, feasible

    # the simulated channel itself is always feasible
    fb = {"lambda1": inst.channel} if kind == "assisted" else _fallback_unassisted(inst)
    add_candidate(fb, (2, 0), "fallback")
    if warm_start is not None:
        add_candidate(warm_start.channels, (1, 0), "warm")

    for k in range(cfg.restarts):
        rng = np.random.default_rng([cfg.seed, k])
        if k == 0 and warm is not None:
            xs = problem.initial(rng, warm)
        elif k == (1 if warm is not None else 0) and nat_start is not None:
            xs = problem.initial(rng, [nat_start])
        else:
            xs = problem.initial(rng)
        xs, f_opt, fid, iters = _optimize(problem, xs, target, cfg)
        chans = problem.channels(xs)
        val, fid2, feasible = add_candidate(chans, (0, k), "restart")
        trace.append({"restart": k, "value": val / inst.copies, "optimizer_value": f_opt / inst.copies,
                      "fidelity": fid2, "feasible": bool(feasible), "iterations": iters})

    candidates.sort(key=lambda c: (c[0], c[1]))
    val, order, chans, fid, src = candidates[0]
    optimized = any(t["feasible"] for t in trace) or src == "warm"
    return RateResult(
        kind=kind,
        value=val / inst.copies,
        channels=chans,
        fidelity=fid,
        constraint_residual=max(0.0, target - fid),
        gamma=query.gamma,
        gamma_effective=gamma_eff,
        copies=inst.copies,
        status="optimized" if optimized else "fallback",
        restarts=trace,
        wall_clock=time.perf_counter() - t0,
        optimizer_value=val / inst.copies,
    )


def _fallback_unassisted(inst: Instance) -> dict:
    nat = canonicalize(inst.channel)
    r = len(nat)
    k3 = np.eye(r).reshape(r, 1, r)
    return {
        "lambda2": nat,
        "lambda3": QuantumChannel([("E", r)], [("E'", 1)], k3, check=False),
    }


def assisted_rate(query: RateQuery, warm_start: RateResult | None = None) -> RateResult:
    """Certified upper bound on a(rho^{(x)m}, gamma)/m."""
    return _run("assisted", query, warm_start)


def unassisted_rate(query: RateQuery, warm_start: RateResult | None = None) -> RateResult:
    """Certified upper bound on u(rho^{(x)m}, gamma)/m by see-saw over (L2, L3)."""
    return _run("unassisted", query, warm_start)


def feasible_point_value(query: RateQuery, kind: str = "assisted") -> RateResult:
    """Objective at the trivially feasible point L1 = N, or (L2, L3) = (N, trace)."""
    t0 = time.perf_counter()
    inst = Instance.build(query.source, query.channel, query.copies, query.b_labels)
    if kind == "assisted":
        chans = {"lambda1": inst.channel}
        val, fid = evaluate_assisted(inst, inst.channel)
    elif kind == "unassisted":
        chans = _fallback_unassisted(inst)
        val, fid = evaluate_unassisted(inst, chans["lambda2"], chans["lambda3"])
    else:
        raise ValueError(f"unknown rate kind {kind!r}")
    return RateResult(kind, val / inst.copies, chans, fid, 0.0, query.gamma, query.gamma_effective,
                      inst.copies, "fallback", [], time.perf_counter() - t0, val / inst.copies)


def instance_of(query: RateQuery) -> Instance:
    return Instance.build(query.source, query.channel, query.copies, query.b_labels)


# ---------------------------------------------------------------------------
# entanglement of purification

@dataclass
class EoPResult:
    value: float                  # bits, re-evaluated from ``channel``
    channel: QuantumChannel       # purifier Z -> E'
    restarts: list = field(default_factory=list)


class EoPProblem:
    """Variable: isometry W: Z -> E' E''; objective S(X E')."""

    n_blocks = 1

    def __init__(self, psi: np.ndarray, d_e1: int, d_e2: int):
        self.psi = psi  # shape (d_x, d_y, d_z)
        self.d_e1, self.d_e2 = d_e1, d_e2
        self.shapes = [(d_e1 * d_e2, psi.shape[2])]

    def objective(self, xs):
        w = xs[0]
        d_x, d_y, _ = self.psi.shape
        t = np.einsum("ez,xyz->xye", w, self.psi).reshape(d_x, d_y, self.d_e1, self.d_e2)
        m = np.transpose(t, (0, 2, 1, 3)).reshape(d_x * self.d_e1, -1)
        s, lg = _entropy_grad(m @ m.conj().T)
        g_t = np.transpose((2 * lg @ m).reshape(d_x, self.d_e1, d_y, self.d_e2), (0, 2, 1, 3))
        g_w = np.einsum("xye,xyz->ez", g_t.reshape(d_x, d_y, -1), self.psi.conj())
        return s, [g_w]


def _eop_evaluate(ket, x_labels, channel: QuantumChannel) -> float:
    out = apply_channel(channel, ket.density(), ["Z"])
    return von_neumann_entropy(out, list(x_labels) + ["E'"])


def eop_optimize(state: DensityOperator, ancilla_bound: int, x_labels: Sequence[str] | None = None,
                 config: OptimizerConfig | None = None) -> EoPResult:
    """Upper bound on E_p(X:Y) from channels Z -> E' with |E'| <= ancilla_bound.

    Z purifies ``state``; Y is every factor not in ``x_labels`` (default: the
    first factor).
    """
    cfg = config or OptimizerConfig()
    if ancilla_bound < 1:
        raise ValueError("ancilla_bound must be >= 1")
    lay = state.layout
    x = [lay.labels[0]] if x_labels is None else list(x_labels)
    y = [n for n in lay.labels if n not in x]
    if not y:
        raise ValueError("the state needs at least one factor outside X")
    st = permute_systems(state, x + y)
    ket = purify(st, "Z")
    d_x, d_y = lay.select(x).dim, lay.select(y).dim
    d_z = ket.layout.dim_of("Z")
    psi = np.asarray(ket.amplitudes).reshape(d_x, d_y, d_z)
    d_e1, d_e2 = ancilla_bound, d_z * ancilla_bound
    problem = EoPProblem(psi, d_e1, d_e2)
    z_layout = [("Z", d_z)]
    e_layout = [("E'", d_e1)]

    def as_channel(w):
        return QuantumChannel(z_layout, e_layout, kraus_from_isometry(w, d_e1), check=False)

    # discarding Z entirely gives S(X)
    k0 = np.zeros((d_z, d_e1, d_z), dtype=complex)
    k0[:, 0, :] = np.eye(d_z)
    best = (_eop_evaluate(ket, x, QuantumChannel(z_layout, e_layout, k0, check=False)), (1, 0),
            QuantumChannel(z_layout, e_layout, k0, check=False))
    trace = []
    for k in range(cfg.restarts):
        rng = np.random.default_rng([cfg.seed, k])
        w0 = rand_isometry(*problem.shapes[0], seed=rng)
        res = stiefel.minimize(_block_fun(problem.objective, [w0], 0), w0, cfg.max_iterations, cfg.tol)
        ch = as_channel(res.point)
        val = _eop_evaluate(ket, x, ch)
        trace.append({"restart": k, "value": val, "optimizer_value": res.value, "iterations": res.iterations})
        if (val, (0, k)) < best[:2]:
            best = (val, (0, k), ch)
    return EoPResult(best[0], best[2], trace)


def entanglement_of_purification(state: DensityOperator, ancilla_bound: int,
                                 x_labels: Sequence[str] | None = None,
                                 config: OptimizerConfig | None = None) -> float:
    return eop_optimize(state, ancilla_bound, x_labels, config).value


# ---------------------------------------------------------------------------
# closed forms for the identity channel

def oracle_identity_assisted(source: DensityOperator, a_label: str | None = None, seed: int = 0) -> float:
    """S(CQ) - S(C)/2 of the KI decomposition of ``source``."""
    e = ki_entropies(ki_decompose(source, a_label, seed=seed))
    return e.s_cq - 0.5 * e.s_c


def oracle_identity_unassisted(source: DensityOperator, a_label: str | None = None, seed: int = 0) -> float:
    """S(CQ) of the KI decomposition of ``source``."""
    return ki_entropies(ki_decompose(source, a_label, seed=seed)).s_cq


# ---------------------------------------------------------------------------
# diagnostics and constructions used by the property checks

def _random_qubit_query(seed) -> RateQuery:
    from .random import rand_channel, rand_state
    rng = np.random.default_rng(seed)
    src = rand_state([("A", 2), ("R", 2)], seed=rng)
    ch = rand_channel([("A", 2)], [("B", 2), ("K", 2)], seed=rng)
    return RateQuery(src, ch, gamma=0.05)


def gradient_check(query: RateQuery | None = None, kind: str = "assisted", seed: int = 0,
                   n_dirs: int = 20, h: float = 1e-5, mu: float = 1e2, lam: float = 0.3) -> float:
    """Max relative error of the penalized Riemannian gradient against central differences.

    Evaluated at a random Stiefel point; for the unassisted problem each
    block is checked with the other held fixed.
    """
    rng = np.random.default_rng(seed)
    query = query or _random_qubit_query(rng)
    inst = instance_of(query)
    d_e, d_e1 = _default_dims(inst, query.config)
    if kind == "assisted":
        problem = AssistedProblem(inst, d_e)
    elif kind == "unassisted":
        problem = UnassistedProblem(inst, d_e, d_e1)
    else:
        raise ValueError(f"unknown rate kind {kind!r}")
    xs = problem.initial(rng)
    fun = _Penalized(problem, 1 - query.gamma_effective, mu, lam)
    return max(stiefel.directional_check(_block_fun(fun, xs, b), xs[b], rng, n_dirs, h)
               for b in range(problem.n_blocks))


def flag_mixture(query: RateQuery, first: RateResult, second: RateResult, weight: float,
                 flag_label: str = "F"):
    """Mix two assisted solutions with an orthogonal flag handed to the decoder.

    The mixed channel A -> B K F has Kraus operators sqrt(w) K1 (x) |0> and
    sqrt(1-w) K2 (x) |1>. Returns ``(value, plain_value, fidelity)`` where
    ``value`` is I(BF:RR')/2, ``plain_value`` is I(B:RR')/2 with the flag
    discarded and ``fidelity`` is measured on BKR.
    """
    if not 0 <= weight <= 1:
        raise ValueError("weight must lie in [0, 1]")
    inst = instance_of(query)
    k1 = np.asarray(first.channels["lambda1"].kraus)
    k2 = np.asarray(second.channels["lambda1"].kraus)
    f0, f1 = np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]])
    ops = [np.sqrt(weight) * np.kron(k, f0) for k in k1] + [np.sqrt(1 - weight) * np.kron(k, f1) for k in k2]
    out = inst.channel.out_layout + SystemLayout([(flag_label, 2)])
    mixed = QuantumChannel(inst.channel.in_layout, out, ops, check=False)
    rho = _purified(inst)
    tau = apply_channel(mixed, rho, inst.a_labels)
    ref = inst.r_labels + ["R'"]
    value = 0.5 * mutual_information(tau, inst.b_labels + [flag_label], ref)
    plain = 0.5 * mutual_information(tau, inst.b_labels, ref)
    sigma = apply_channel(inst.channel, inst.source, inst.a_labels)
    fid = fidelity(sigma, partial_trace(tau, inst.b_labels + inst.k_labels + inst.r_labels))
    return value, plain, fid


def product_point(product_query: RateQuery, first: RateResult, second: RateResult):
    """Evaluate L1 (x) L1' on the product instance; returns ``(value, fidelity)``."""
    inst = instance_of(product_query)
    ch = tensor_channels(first.channels["lambda1"], second.channels["lambda1"])
    ch = QuantumChannel(inst.channel.in_layout, ch.out_layout, ch.kraus, check=False)
    if list(ch.out_layout.labels) != list(inst.channel.out_layout.labels):
        ch = permute_channel_output(ch, inst.channel.out_layout.labels)
    return evaluate_assisted(inst, ch)
