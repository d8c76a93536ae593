"""Command-line entry point ``qrs``.

All output is canonical JSON (sorted keys) on stdout or in ``--out``.
Exit codes: 0 success, 1 malformed input, 2 optimizer fell back to the
trivial feasible point, 3 selftest failure.
"""
from __future__ import annotations

import argparse
import sys
from importlib.metadata import PackageNotFoundError, version

from . import io
from .entropics import fidelity, trace_distance, von_neumann_entropy
from .ki import ki_decompose, ki_entropies
from .rates import OptimizerConfig, RateQuery, assisted_rate, eop_optimize, unassisted_rate

EXIT_OK, EXIT_INPUT, EXIT_FALLBACK, EXIT_SELFTEST = 0, 1, 2, 3


def tool_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:  # pragma: no cover - source checkout without install
        return "0+unknown"


def _csv(text: str | None):
    return None if text is None else [t.strip() for t in text.split(",") if t.strip()]


def _emit(report: dict, out: str | None):
    text = io.dumps(report)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _envelope(args, command: str, inputs: dict, tolerances: dict, result: dict) -> dict:
    return {
        "tool": "qrs",
        "version": tool_version(),
        "command": command,
        "seed": getattr(args, "seed", None),
        "inputs": inputs,
        "tolerances": tolerances,
        "result": result,
    }


def _config(args) -> OptimizerConfig:
    try:
        return OptimizerConfig(restarts=args.restarts, seed=args.seed, tol=args.tol,
                               dim_e=args.dim_e, dim_eprime=args.dim_eprime)
    except ValueError as e:
        raise io.InputError("arguments", "optimizer flags", str(e)) from None


def _config_dict(cfg: OptimizerConfig) -> dict:
    return {
        "restarts": cfg.restarts,
        "max_iterations": cfg.max_iterations,
        "penalty_initial": cfg.penalty_initial,
        "penalty_growth": cfg.penalty_growth,
        "penalty_stages": cfg.penalty_stages,
        "objective_tol": cfg.tol,
        "gamma_zero": cfg.gamma_zero,
        "dim_e": cfg.dim_e,
        "dim_eprime": cfg.dim_eprime,
    }


# ---------------------------------------------------------------------------
# subcommands

def cmd_rate(args) -> int:
    state, h_state = io.load_state(args.state)
    channel, h_chan = io.load_channel(args.channel)
    cfg = _config(args)
    b = _csv(args.b_labels)
    try:
        query = RateQuery(state, channel, args.gamma, args.copies, cfg, tuple(b) if b else None)
    except ValueError as e:
        raise io.InputError("arguments", "query", str(e)) from None
    fn = assisted_rate if args.kind == "assisted" else unassisted_rate
    res = fn(query)
    result = {
        "kind": res.kind,
        "label": res.label,
        "value": res.value,
        "fidelity": res.fidelity,
        "constraint_residual": res.constraint_residual,
        "gamma": res.gamma,
        "gamma_effective": res.gamma_effective,
        "copies": res.copies,
        "status": res.status,
        "channels": {k: io.channel_to_json(v) for k, v in sorted(res.channels.items())},
        "restarts": res.restarts,
    }
    tol = {**_config_dict(cfg), "certification": "value and fidelity recomputed from the returned Kraus operators"}
    report = _envelope(args, f"rate {args.kind}", {"state": h_state, "channel": h_chan}, tol, result)
    _emit(report, args.out)
    return EXIT_OK if res.certified else EXIT_FALLBACK


def cmd_eop(args) -> int:
    state, h_state = io.load_state(args.state)
    cfg = _config(args)
    try:
        res = eop_optimize(state, args.ancilla, _csv(args.x_labels), cfg)
    except ValueError as e:
        raise io.InputError("arguments", "query", str(e)) from None
    result = {"value": res.value, "ancilla_bound": args.ancilla, "channel": io.channel_to_json(res.channel),
              "restarts": res.restarts}
    _emit(_envelope(args, "eop", {"state": h_state}, _config_dict(cfg), result), args.out)
    return EXIT_OK


def cmd_ki(args) -> int:
    state, h_state = io.load_state(args.state)
    try:
        dec = ki_decompose(state, args.a_label, seed=args.seed)
    except (KeyError, ValueError) as e:
        raise io.InputError(args.state, "field $.layout", str(e)) from None
    ent = ki_entropies(dec)
    blocks = [{"p": b.p, "dim_n": b.dim_n, "dim_q": b.dim_q,
               "omega": io.encode_complex_array(b.omega)} for b in dec.blocks]
    result = {
        "blocks": blocks,
        "kernel_dim": dec.kernel_dim,
        "S(C)": ent.s_c,
        "S(CQ)": ent.s_cq,
        "S(CNQ)": ent.s_cnq,
        "diagnostics": dec.diagnostics,
    }
    _emit(_envelope(args, "ki", {"state": h_state}, {"support": 1e-10, "frequency": 1e-9}, result), args.out)
    return EXIT_OK


def cmd_entropy(args) -> int:
    state, h_state = io.load_state(args.state)
    sub = _csv(args.subsystem)
    try:
        value = von_neumann_entropy(state, sub)
    except KeyError as e:
        raise io.InputError("arguments", "--subsystem", f"unknown system {e}") from None
    result = {"subsystem": sub if sub is not None else list(state.layout.labels), "entropy": value}
    _emit(_envelope(args, "entropy", {"state": h_state}, {"clamp": 1e-12}, result), args.out)
    return EXIT_OK


def cmd_fidelity(args) -> int:
    a, h_a = io.load_state(args.state)
    b, h_b = io.load_state(args.other)
    try:
        result = {"fidelity": fidelity(a, b), "trace_distance": trace_distance(a, b)}
    except ValueError as e:
        raise io.InputError(args.other, "field $.layout", str(e)) from None
    _emit(_envelope(args, "fidelity", {"state": h_a, "other": h_b}, {}, result), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .protocol import random_instance, run_protocol

    rows = []
    for i in range(args.instances):
        prot, src, ch = random_instance([args.seed, i])
        rep = run_protocol(prot, src, ch)
        rows.append({"instance": i, "fidelity": rep.fidelity, "lhs": rep.decoupling_lhs,
                     "rhs": rep.decoupling_rhs, "holds": rep.holds})
    result = {"instances": rows, "all_hold": all(r["holds"] for r in rows)}
    _emit(_envelope(args, "verify decoupling", {}, {"slack": 1e-9}, result), args.out)
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_all

    rows = run_all(seed=args.seed)
    ok = all(r["passed"] for r in rows)
    if args.out:
        _emit(_envelope(args, "selftest", {}, {}, {"checks": rows, "passed": ok}), args.out)
    width = max(len(r["name"]) for r in rows)
    for r in rows:
        print(f"{'PASS' if r['passed'] else 'FAIL'}  {r['name']:<{width}}  {r['detail']}")
    print(f"{sum(r['passed'] for r in rows)}/{len(rows)} checks passed")
    return EXIT_OK if ok else EXIT_SELFTEST


# ---------------------------------------------------------------------------
# parser

def _optimizer_flags(p: argparse.ArgumentParser):
    p.add_argument("--restarts", type=int, default=16, help="independent random starts (default 16)")
    p.add_argument("--seed", type=int, default=0, help="master seed for all randomness")
    p.add_argument("--dim-e", type=int, default=None, help="environment dimension |E| (default |A||B||K|)")
    p.add_argument("--dim-eprime", type=int, default=None, help="dimension of E' (default |E|)")
    p.add_argument("--tol", type=float, default=1e-10, help="objective convergence tolerance in bits")
    p.add_argument("--out", default=None, help="write the JSON report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qrs", description="Channel-simulation rate toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    rate = sub.add_parser("rate", help="upper bounds on simulation rates")
    rsub = rate.add_subparsers(dest="kind", required=True)
    for kind in ("assisted", "unassisted"):
        p = rsub.add_parser(kind, help=f"{kind} rate a(rho, gamma)" if kind == "assisted" else "unassisted rate u(rho, gamma)")
        p.add_argument("--state", required=True, help="source state rho^{AR} (JSON)")
        p.add_argument("--channel", required=True, help="channel N: A -> BK (JSON)")
        p.add_argument("--gamma", type=float, default=0.0, help="infidelity budget in [0, 1]")
        p.add_argument("--copies", type=int, default=1, help="number of copies m (1 to 3)")
        p.add_argument("--b-labels", default=None, help="comma-separated decoder outputs (default: first output)")
        _optimizer_flags(p)
        p.set_defaults(func=cmd_rate)

    p = sub.add_parser("eop", help="entanglement of purification upper bound")
    p.add_argument("--state", required=True)
    p.add_argument("--ancilla", type=int, default=4, help="bound on the dimension of E'")
    p.add_argument("--x-labels", default=None, help="comma-separated X systems (default: first)")
    _optimizer_flags(p)
    p.set_defaults(func=cmd_eop)

    p = sub.add_parser("ki", help="Koashi-Imoto decomposition")
    p.add_argument("--state", required=True)
    p.add_argument("--a-label", default=None, help="the decomposed system (default: first)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_ki)

    p = sub.add_parser("entropy", help="von Neumann entropy of a marginal")
    p.add_argument("--state", required=True)
    p.add_argument("--subsystem", default=None, help="comma-separated systems (default: all)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("fidelity", help="fidelity and trace distance of two states")
    p.add_argument("--state", required=True)
    p.add_argument("--other", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_fidelity)

    verify = sub.add_parser("verify", help="protocol checks")
    vsub = verify.add_subparsers(dest="check", required=True)
    p = vsub.add_parser("decoupling", help="decoupling inequality on random near-perfect protocols")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("selftest", help="run the built-in acceptance checks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_selftest)
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except io.InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


def main():  # pragma: no cover - console script
    sys.exit(run())
