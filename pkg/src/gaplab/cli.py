"""Command-line front end: model/graph selection, every computation, the
verification battery, and JSON/CSV emission."""

from __future__ import annotations

import argparse
import ast
import math
import sys
from fractions import Fraction

import numpy as np

from . import bounds, discrete, galerkin, reporting, verify
from .simulate import autocorr_gap_estimate
from .models import (MODEL_IDS, RhoSpec, build_graph, model_from_id,
                     rate_by_name, rate_from_table)


# ---------------------------------------------------------------------------
# argument helpers
# ---------------------------------------------------------------------------

def _fraction(text: str) -> Fraction:
    return Fraction(text)


def _omega_range(text: str) -> list:
    """'3' -> [3]; '1:8' -> [1..8]; '1,3,5' -> [1, 3, 5]."""
    if ":" in text:
        lo, hi = text.split(":")
        return list(range(int(lo), int(hi) + 1))
    if "," in text:
        return [int(v) for v in text.split(",")]
    return [int(text)]


def _resolve_g(name: str):
    if name and name.startswith("table:"):
        path = name.split(":", 1)[1]
        pairs = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                k, v = line.split(",")
                pairs.append((int(k), float(v)))
        return rate_from_table(pairs, name=path)
    return rate_by_name(name or "constant-one")


_SAFE_FUNCS = {"sin": math.sin, "cos": math.cos, "tan": math.tan,
               "exp": math.exp, "sqrt": math.sqrt, "abs": abs, "pi": math.pi}


def _safe_expression(expr: str):
    """Arithmetic-only evaluator for density expressions in the variable theta."""
    tree = ast.parse(expr, mode="eval")
    allowed = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name,
               ast.Load, ast.Constant, ast.Add, ast.Sub, ast.Mult, ast.Div,
               ast.Pow, ast.USub, ast.UAdd, ast.Mod)
    for node in ast.walk(tree):
        if not isinstance(node, allowed):
            raise ValueError(f"disallowed syntax in expression: {ast.dump(node)[:40]}")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _SAFE_FUNCS:
                raise ValueError("only sin/cos/tan/exp/sqrt/abs calls are allowed")
        if isinstance(node, ast.Name) and node.id not in _SAFE_FUNCS and node.id != "theta":
            raise ValueError(f"unknown name {node.id!r} in expression")
    code = compile(tree, "<density>", "eval")

    def density(theta: float) -> float:
        return float(eval(code, {"__builtins__": {}}, {**_SAFE_FUNCS, "theta": theta}))

    return density


def _resolve_rho(spec: str) -> RhoSpec:
    if spec in (None, "uniform"):
        return RhoSpec.uniform()
    if spec.startswith("fourier:"):
        path = spec.split(":", 1)[1]
        coeffs = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = [float(v) for v in line.replace(",", " ").split()]
                coeffs.append(parts[0] if len(parts) == 1 else complex(parts[0], parts[1]))
        return RhoSpec(coefficients=coeffs, name=path)
    if spec.startswith("density:"):
        return RhoSpec(density=_safe_expression(spec.split(":", 1)[1]), name=spec)
    raise ValueError(f"unknown rho spec {spec!r} (uniform | fourier:FILE | density:EXPR)")


def _config_of(args) -> dict:
    cfg = {}
    for k, v in vars(args).items():
        if k in ("fn", "out", "format") or callable(v):
            continue
        cfg[k] = v if isinstance(v, (int, float, str, bool, type(None))) else str(v)
    return cfg


def _emit(args, command: str, results: list, references: list) -> None:
    out = open(args.out, "w") if args.out else sys.stdout
    try:
        if args.format == "csv":
            reporting.write_csv(out, results)
        else:
            config = {"command": command, **_config_of(args)}
            reporting.write_json(out, reporting.payload(config, results, references))
    finally:
        if args.out:
            out.close()


def _graph_from_args(args):
    return build_graph(args.graph, d=args.d, N=args.N)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_graph(args) -> int:
    g = _graph_from_args(args)
    rec = {"model": "-", "graph": {"kind": g.kind, "d": g.d, "N": g.N},
           "n_sites": g.n_sites, "n_edges": len(g.edges),
           "pair_scaling": g.pair_scaling, "method": "graph"}
    _emit(args, "graph", [rec], [])
    return 0


def cmd_states(args) -> int:
    g = _resolve_g(args.g)
    graph = _graph_from_args(args)
    states = discrete.enumerate_states(graph.n_sites, args.omega)
    measure = discrete.stationary_weights(g, states)
    rec = {"model": f"weights[{g.name}]",
           "graph": {"kind": graph.kind, "d": graph.d, "N": graph.N},
           "omega": args.omega, "dim": len(states),
           "max_weight": float(measure.weights.max()),
           "min_weight": float(measure.weights.min()),
           "method": "states"}
    _emit(args, "states", [rec], [])
    return 0


def cmd_gap_exact(args) -> int:
    model = model_from_id(args.model, g=_resolve_g(args.g),
                          gamma=args.gamma)
    if not model.is_discrete:
        raise ValueError("exact diagonalization covers the integer families; "
                         "use gap-galerkin or gap-mc for continuous models")
    graph = _graph_from_args(args)
    results = []
    for om in _omega_range(args.omega_range):
        gap, kappa, dim = discrete.exact_gap(model, graph, om)
        results.append(reporting.exact_record(args.model, graph, om, gap, kappa, dim))
    _emit(args, "gap-exact", results, ["pairwise generator, exact diagonalization"])
    return 0


def cmd_gap_galerkin(args) -> int:
    graph = _graph_from_args(args)
    kwargs = {}
    if args.model in ("kac", "kac-rho"):
        name = "kac-uniform" if args.model == "kac" else "kac-rho"
        if name == "kac-rho":
            kwargs["rho"] = _resolve_rho(args.rho)
    else:
        name = "gamma"
        kwargs["gamma"] = Fraction(args.gamma if args.gamma is not None else 1)
    pair = galerkin.assemble_galerkin(name, graph, degree=args.degree,
                                      mode=args.basis_mode, **kwargs)
    rep = galerkin.galerkin_eigensystem(pair)
    rec = reporting.galerkin_record(args.model, graph.n_sites, args.degree,
                                    f"{args.basis_mode} deg<={args.degree}",
                                    rep.gap, rep.gram_condition)
    _emit(args, "gap-galerkin", [rec], ["Rayleigh quotient on the polynomial sector"])
    return 0


def cmd_gap_mc(args) -> int:
    model = model_from_id(args.model, g=_resolve_g(args.g), gamma=args.gamma,
                          rho=_resolve_rho(args.rho) if args.rho else None)
    graph = _graph_from_args(args)
    om = _omega_range(args.omega_range)[0]
    observable = _observable_by_name(args.observable, model, graph, om)
    if args.stream:
        from .simulate import initial_config, simulate as run_dynamics
        cfg = initial_config(model, graph, om, seed=args.seed)
        horizon = args.dt * (args.samples + 1)
        with reporting.SampleStreamWriter(
                args.stream, [args.observable],
                meta={"model": args.model, "seed": args.seed, "dt": args.dt}) as w:
            run_dynamics(model, graph, cfg, horizon, seed=args.seed,
                         sample_dt=args.dt, observables={args.observable: observable},
                         stream_writer=w)
    est = autocorr_gap_estimate(
        model, graph, observable, omega=om, dt=args.dt,
        n_samples=args.samples, seed=args.seed)
    rec = reporting.mc_record(args.model, graph, om, est)
    _emit(args, "gap-mc", [rec], ["autocorrelation decay estimator"])
    return 0


def _observable_by_name(name, model, graph, omega):
    if name == "site-0":
        return lambda cfg: float(cfg[0])
    if name == "sum-squares":
        return lambda cfg: float(np.dot(cfg, cfg))
    if name == "sum-fourth":
        return lambda cfg: float(np.sum(np.asarray(cfg, dtype=float) ** 4))
    if name == "gap-eigenfunction":
        if model.is_discrete:
            states = discrete.enumerate_states(graph.n_sites, omega)
            gen = discrete.build_generator(model, graph, states)
            _, table = discrete.gap_eigenfunction(gen)
            return lambda cfg: table[states.index[tuple(int(v) for v in cfg)]]
        raise ValueError("gap-eigenfunction observable needs a discrete model")
    raise ValueError(f"unknown observable {name!r}")


def cmd_two_site(args) -> int:
    if args.model in ("kac", "kac-rho"):
        # rotation models: angle modes give the pair spectrum in closed form
        rho = _resolve_rho(args.rho) if args.model == "kac-rho" else RhoSpec.uniform()
        res = galerkin.two_site_fourier_gap(rho, n_max=args.n_max)
        results = [{"model": args.model, "mode": n, "gap": rate,
                    "method": "two-site fourier"} for n, rate in res.modes]
        results.append({"model": args.model, "mode": f"extremes over 1..{args.n_max}",
                        "gap": res.gap, "kappa": res.kappa,
                        "method": f"two-site fourier ({res.note})"})
        _emit(args, "two-site", results, ["two-site reduction"])
        return 0
    model = model_from_id(args.model, g=_resolve_g(args.g), gamma=args.gamma)
    omegas = _omega_range(args.omega_range)
    table = discrete.two_site_spectrum(model, omegas)
    results = [{"model": args.model, "omega": r.omega,
                "gap": reporting._scalar(r.gap), "kappa": reporting._scalar(r.kappa),
                "method": "two-site"}
               for r in table.rows]
    results.append({"model": args.model, "omega": "inf over range",
                    "gap": reporting._scalar(table.inf_gap),
                    "kappa": reporting._scalar(table.sup_kappa),
                    "method": f"two-site ({table.trend}; {table.note})"})
    _emit(args, "two-site", results, ["two-site reduction"])
    return 0


def cmd_kernel(args) -> int:
    g = _resolve_g(args.g)
    ext = discrete.kernel_spectrum_extremes(g, args.n_max)
    results = [{"model": f"kernel[{g.name}]", "n": n, "min": lo, "max": hi,
                "method": "kernel"}
               for n, lo, hi in ext.table]
    results.append({"model": f"kernel[{g.name}]", "n": f"<= {args.n_max}",
                    "min": ext.mu1, "max": ext.mu2, "method": "kernel extremes"})
    _emit(args, "kernel", results, ["one-site kernel"])
    return 0


def cmd_bounds(args) -> int:
    chain = bounds.certificate(_fraction(args.lambda3), _fraction(args.lambda2), args.d)
    doc = reporting.payload({"command": "bounds", **_config_of(args)},
                            [chain.to_json()], [s.rule for s in chain.steps])
    out = open(args.out, "w") if args.out else sys.stdout
    try:
        reporting.write_json(out, doc)
    finally:
        if args.out:
            out.close()
    return 0


def cmd_audit(args) -> int:
    g = _resolve_g(args.g)
    graph = _graph_from_args(args)
    states = discrete.enumerate_states(graph.n_sites, args.omega)
    measure = discrete.stationary_weights(g, states)
    rep = bounds.lemma_audit(states, measure,
                             graph if graph.kind == "lattice" else None,
                             n_functions=args.functions, seed=args.seed)
    rec = {"model": f"audit[{g.name}]",
           "graph": {"kind": graph.kind, "d": graph.d, "N": graph.N},
           "omega": args.omega, "checks": rep.checks_run,
           "violations": len(rep.violations),
           "max_ratio_transfer": rep.max_ratio_transfer,
           "max_ratio_swap": rep.max_ratio_swap,
           "observed_swap_constant": rep.observed_swap_constant,
           "max_ratio_path": rep.max_ratio_path,
           "method": "audit"}
    _emit(args, "audit", [rec], ["Lemma 1.5", "Lemma 1.6"])
    return 0 if rep.passed else 1


def cmd_verify_all(args) -> int:
    outcomes = verify.run_all(fast=args.fast, only=args.only or None)
    for oc in outcomes:
        print(oc.line())
    n_fail = sum(1 for oc in outcomes if not oc.passed)
    print(f"{len(outcomes) - n_fail}/{len(outcomes)} checks passed")
    return 0 if n_fail == 0 else 1


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="gaplab",
        description="spectral gaps of conservative binary-collision dynamics: "
                    "exact, polynomial-sector and Monte Carlo computations "
                    "plus certified comparison bounds")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, graph=True, model=False, omega=False):
        sp.add_argument("--out", default=None, help="output path (default stdout)")
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        if graph:
            sp.add_argument("--graph", choices=("complete", "lattice"), default="complete")
            sp.add_argument("--d", type=int, default=1)
            sp.add_argument("--N", type=int, default=3)
        if model:
            sp.add_argument("--model", choices=sorted(MODEL_IDS), default="zero-range")
            sp.add_argument("--g", default="constant-one",
                            help="rate function: constant-one | identity | table:FILE")
            sp.add_argument("--gamma", default=None, help="shape parameter")
            sp.add_argument("--rho", default=None,
                            help="angle density: uniform | fourier:FILE | density:EXPR")
        if omega:
            sp.add_argument("--omega", "--omega-range", dest="omega_range",
                            default="1", help="total: single, lo:hi, or comma list")

    sp = sub.add_parser("graph", help="vertex/edge structure and pair scaling")
    common(sp)
    sp.set_defaults(fn=cmd_graph)

    sp = sub.add_parser("states", help="state count and stationary weights")
    common(sp)
    sp.add_argument("--g", default="constant-one")
    sp.add_argument("--omega", type=int, default=1)
    sp.set_defaults(fn=cmd_states)

    sp = sub.add_parser("gap-exact", help="exact diagonalization gap")
    common(sp, model=True, omega=True)
    sp.set_defaults(fn=cmd_gap_exact)

    sp = sub.add_parser("gap-galerkin", help="polynomial-sector gap")
    common(sp)
    sp.add_argument("--model", choices=("kac", "kac-rho", "gamma-exchange"),
                    default="kac")
    sp.add_argument("--gamma", default=None, help="shape parameter")
    sp.add_argument("--rho", default=None,
                    help="angle density: uniform | fourier:FILE | density:EXPR")
    sp.add_argument("--degree", type=int, default=4)
    sp.add_argument("--basis-mode", choices=("full", "symmetric"), default="full")
    sp.set_defaults(fn=cmd_gap_galerkin)

    sp = sub.add_parser("gap-mc", help="autocorrelation gap estimate")
    common(sp, model=True, omega=True)
    sp.add_argument("--observable", default="gap-eigenfunction",
                    choices=("gap-eigenfunction", "site-0", "sum-squares", "sum-fourth"))
    sp.add_argument("--dt", type=float, default=0.5, help="sampling stride")
    sp.add_argument("--samples", type=int, default=5000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--stream", default=None,
                    help="also write the sampled series to this binary stream file")
    sp.set_defaults(fn=cmd_gap_mc)

    sp = sub.add_parser("two-site", help="pair spectrum sweep over totals")
    common(sp, graph=False, model=True, omega=True)
    sp.add_argument("--n-max", type=int, default=64,
                    help="angle modes examined for the rotation models")
    sp.set_defaults(fn=cmd_two_site)

    sp = sub.add_parser("kernel", help="conditional kernel spectra and extremes")
    common(sp, graph=False)
    sp.add_argument("--g", default="constant-one")
    sp.add_argument("--n-max", type=int, default=40)
    sp.set_defaults(fn=cmd_kernel)

    sp = sub.add_parser("bounds", help="certified bound chain from gap inputs")
    sp.add_argument("--lambda3", required=True, help="three-site gap (fraction ok)")
    sp.add_argument("--lambda2", required=True, help="two-site gap (fraction ok)")
    sp.add_argument("--d", type=int, default=1)
    sp.add_argument("--out", default=None)
    sp.add_argument("--format", choices=("json",), default="json")
    sp.set_defaults(fn=cmd_bounds)

    sp = sub.add_parser("audit", help="random-function inequality audit")
    common(sp)
    sp.add_argument("--g", default="constant-one")
    sp.add_argument("--omega", type=int, default=2)
    sp.add_argument("--functions", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(fn=cmd_audit)

    sp = sub.add_parser("verify-all", help="run the acceptance battery")
    sp.add_argument("--fast", action="store_true",
                    help="reduced Monte Carlo repetitions and sweep ranges")
    sp.add_argument("--only", nargs="*", default=None,
                    help="subset of check names")
    sp.set_defaults(fn=cmd_verify_all)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, ArithmeticError, RuntimeError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
