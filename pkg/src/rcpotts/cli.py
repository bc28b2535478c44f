"""Command-line interface: thresholds, sample, diagnose, validate.

Every CSV/text output starts with ``#`` header lines carrying the version and
the full configuration, so identical configurations give identical bytes.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import phasecalc as pc
from .rng import stream

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_BUDGET = 0, 1, 2, 3


class CLIError(Exception):
    def __init__(self, msg: str, code: int):
        super().__init__(msg)
        self.code = code


def header(cfg: dict) -> str:
    return f"# rcpotts {__version__}\n# config {json.dumps(cfg, sort_keys=True)}\n"


def _config(args) -> dict:
    skip = {"func", "out"}  # the output location does not change the content
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _emit(text: str, out: str | None, name: str | None = None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    if name is not None:
        path.mkdir(parents=True, exist_ok=True)
        path = path / name
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _check_qd(q: int, d: int) -> None:
    try:
        pc._check_qd(q, d)
    except ValueError as exc:
        raise CLIError(str(exc), EXIT_INVALID) from exc


def _resolve_beta(args) -> float:
    if getattr(args, "beta", None) is not None:
        if args.beta <= 0:
            raise CLIError("beta must be positive", EXIT_INVALID)
        return float(args.beta)
    return float(args.beta_ratio) * pc.beta_c(args.q, args.d)


# -- thresholds ------------------------------------------------------------------

THRESHOLD_FIELDS = ["q", "d", "beta", "p", "p_hat", "beta_u", "beta_c", "beta_u_prime", "beta_u_prime_alt",
                    "t", "a", "m_dis", "m_ord", "rho_gap", "p1", "phi1", "phi_hat1", "R", "A",
                    "lemma54_lhs", "lemma54_rhs", "lemma54"]


def threshold_row(q: int, d: int, beta: float | None) -> list:
    beta = pc.beta_c(q, d) if beta is None else beta
    prof = pc.phase_profile(q, d, beta)
    row = [q, d, beta, prof.p, prof.p_hat, prof.beta_u, prof.beta_c, prof.beta_u_prime, prof.beta_u_prime_alt,
           prof.t, prof.a, prof.m_dis, prof.m_ord, prof.rho_gap]
    if prof.has_ordered:
        op = pc.ordered_perc_params(q, d, beta)
        row += [op.p1, op.phi1, op.phi_hat1, op.R, op.A]
        if beta >= prof.beta_c * (1 - 1e-12):
            rep = pc.check_lemma54(q, d, beta)
            row += [rep.lhs, rep.rhs, int(rep.holds)]
        else:
            row += ["", "", ""]
    else:
        row += [""] * 8
    return ["" if x is None else (repr(float(x)) if isinstance(x, float) else x) for x in row]


def _parse_range(s: str) -> range:
    lo, hi = s.split(":")
    return range(int(lo), int(hi) + 1)


def cmd_thresholds(args) -> int:
    from .diag import rows_to_csv
    if args.grid:
        qs, ds = _parse_range(args.grid[0]), _parse_range(args.grid[1])
        pairs = [(q, d) for q in qs for d in ds]
    else:
        if args.q is None or args.d is None:
            raise CLIError("need --q and --d, or --grid", EXIT_INVALID)
        pairs = [(args.q, args.d)]
    for q, d in pairs:
        _check_qd(q, d)
    rows = [threshold_row(q, d, args.beta) for q, d in pairs]
    _emit(rows_to_csv(THRESHOLD_FIELDS, rows, header(_config(args))), args.out)
    return EXIT_OK


# -- sample ----------------------------------------------------------------------

def step_budget(n: int, eps: float, c: float) -> int:
    """T = ceil(c * n * ln n * ln(1/eps))."""
    if not 0 < eps < 1:
        raise CLIError(f"--eps must lie in (0, 1), got {eps}", EXIT_BUDGET)
    if not c > 0 or not math.isfinite(c):
        raise CLIError(f"--budget-c must be positive, got {c}", EXIT_BUDGET)
    T = c * n * math.log(max(n, 2)) * math.log(1 / eps)
    if T > 1e12:
        raise CLIError(f"step budget {T:.3g} exceeds 1e12", EXIT_BUDGET)
    return int(math.ceil(T))


def _load_graph(args, seed: int):
    from .graphgen import Multigraph, sample_configuration_model
    from .oracle import fixture
    if getattr(args, "fixture", None):
        return fixture(args.fixture)
    if getattr(args, "graph", None):
        return Multigraph.from_text(Path(args.graph).read_text())
    if (args.n * args.d) % 2:
        raise CLIError("n*d must be even", EXIT_INVALID)
    return sample_configuration_model(args.n, args.d, stream(seed, "graph"))


def cmd_sample(args) -> int:
    from .gibbs import SpinConfig, potts_via_rc, spins_to_text
    from .rcdyn import run_chain
    tiny = bool(args.fixture or args.graph)
    if tiny and args.model != "planted":
        if args.q < 2 or args.beta is None:
            raise CLIError("stored graphs need --q >= 2 and an explicit --beta", EXIT_INVALID)
    else:
        _check_qd(args.q, args.d)
    beta = _resolve_beta(args)
    p = pc.p_of_beta(beta)
    cfg = _config(args)
    hdr = header(cfg)
    out = args.out or "."
    if args.model == "planted":
        from .planted import make_planted_spec, sample_planted
        phase = args.phase or ("disordered" if beta < pc.beta_c(args.q, args.d) else "ordered")
        try:
            spec = make_planted_spec(args.q, args.d, args.n, phase, beta)
        except ValueError as exc:
            raise CLIError(str(exc), EXIT_INVALID) from exc
        G, sigma = sample_planted(spec, stream(args.seed, "planted"))
        _emit(hdr + G.to_text(), out, "graph.txt")
        _emit(hdr + spins_to_text(sigma), out, "spins.txt")
        _emit(spec.to_json() + "\n", out, "spec.json")
        return EXIT_OK
    G = _load_graph(args, args.seed)
    T = args.steps if args.steps is not None else step_budget(G.n, args.eps, args.budget_c)
    if T < 0:
        raise CLIError("--steps must be non-negative", EXIT_BUDGET)
    if args.init == "auto" and tiny:
        inits = ["all-out"]
    elif args.init == "auto":
        bc = pc.beta_c(args.q, args.d)
        inits = ["all-out"] if beta < bc else (["all-in"] if beta > bc else ["all-out", "all-in"])
    else:
        inits = [args.init]
    _emit(hdr + G.to_text(), out, "graph.txt")
    for init in inits:
        tag = init.replace("-", "")
        if args.model == "rc":
            trace, state = run_chain(G, init, args.q, p, T, stream(args.seed, "dynamics", init),
                                     stride=args.stride, d=None if tiny else args.d)
            rows = "".join(f"{e},{int(x)}\n" for e, x in enumerate(state.config.member))
            _emit(hdr + "edge,in\n" + rows, out, f"rc_{tag}.csv")
        else:
            colours, trace, _ = potts_via_rc(G, init, args.q, p, T, stream(args.seed, "dynamics", init),
                                             d=None if tiny else args.d, stride=args.stride)
            _emit(hdr + spins_to_text(SpinConfig(G, colours, args.q)), out, f"potts_{tag}.txt")
        _emit(trace.to_csv(hdr), out, f"trace_{tag}.csv")
    return EXIT_OK


# -- diagnose --------------------------------------------------------------------

def cmd_diagnose(args) -> int:
    from . import diag
    from .rcdyn import EdgeConfig, run_chain
    _check_qd(args.q, args.d)
    beta = _resolve_beta(args)
    p = pc.p_of_beta(beta)
    hdr = header(_config(args))
    seeds = range(args.seed, args.seed + args.graphs)
    radius = args.radius if args.radius is not None else None
    rows = []

    def chain_config(G, seed, init):
        if args.config == "all-in":
            return EdgeConfig.all_in(G)
        if args.config == "all-out":
            return EdgeConfig(G)
        T = args.steps if args.steps is not None else int(math.ceil(5 * G.n * math.log(max(G.n, 2))))
        _, st = run_chain(G, init, args.q, p, T, stream(seed, "dynamics", init), d=args.d, observe=False)
        return st.config

    what = args.what
    if what == "shatter" or what == "wired":
        fields = ["seed", "v", "radius", "sphere_size", "components_hit", "K_min"] if what == "shatter" else \
            ["seed", "v", "radius", "exists", "via_path_criterion", "verified", "witness_size"]
        init = "all-out" if what == "shatter" else "all-in"
        for s in seeds:
            G = _load_graph(args, s)
            ell = radius if radius is not None else max(1, pc.default_radius(G.n, args.d))
            F = chain_config(G, s, init)
            vs = stream(s, "probes").choice(G.n, size=min(args.probes, G.n), replace=False)
            for v in sorted(int(x) for x in vs):
                if what == "shatter":
                    r = diag.shatter_report(G, F, v, ell)
                    rows.append([s, v, ell, r.sphere_size, r.components_hit, r.K_min])
                else:
                    r = diag.wired_boundary(G, F, v, ell)
                    rows.append([s, v, ell, int(r.exists), int(r.via_path_criterion), int(r.verified),
                                 len(r.witness) if r.witness is not None else ""])
    elif what == "occupancy":
        fields = ["seed", "init", "samples", "disordered", "ordered", "neither", "mean_density"]
        for s in seeds:
            G = _load_graph(args, s)
            T = args.steps if args.steps is not None else int(math.ceil(10 * G.n * math.log(max(G.n, 2))))
            for init in ("all-out", "all-in"):
                tr, _ = run_chain(G, init, args.q, p, T, stream(s, "dynamics", init), d=args.d,
                                  stride=args.stride)
                occ = diag.phase_occupancy(tr)
                post = [x for st_, x in zip(tr.steps, tr.size) if st_ >= tr.steps[-1] // 2]
                rows.append([s, init, occ.samples, repr(occ.disordered), repr(occ.ordered), repr(occ.neither),
                             repr(float(np.mean(post)) / G.n)])
    elif what == "coupling":
        fields = ["seed", "steps", "timed_out", "steps_over_nlogn"]
        for s in seeds:
            G = _load_graph(args, s)
            T = args.steps if args.steps is not None else int(math.ceil(200 * G.n * math.log(max(G.n, 2))))
            r = diag.coupling_time(G, args.q, p, T, stream(s, "coupling"))
            rows.append([s, r.steps, int(r.timed_out), repr(r.steps / (G.n * math.log(max(G.n, 2))))])
    elif what == "wsm":
        fields = ["seed", "v", "radius", "e", "phase", "gap", "stderr"]
        phase = args.phase or ("disordered" if beta < pc.beta_c(args.q, args.d) else "ordered")
        for s in seeds:
            G = _load_graph(args, s)
            ell = radius if radius is not None else max(1, pc.default_radius(G.n, args.d))
            T = args.steps if args.steps is not None else int(math.ceil(5 * G.n * math.log(max(G.n, 2))))
            rng = stream(s, "probes")
            for v in sorted(int(x) for x in rng.choice(G.n, size=min(args.probes, G.n), replace=False)):
                inc = [e for _, e in G.adjacency[v]]
                if not inc:
                    continue
                e = int(inc[int(rng.integers(len(inc)))])
                g = diag.wsm_gap(G, v, e, ell, phase, args.q, p, T_ball=max(2000, 200 * G.d ** ell), T_full=T,
                                 replicas=args.replicas, seed=stream(s, "wsm", str(v)), d=args.d)
                rows.append([s, v, ell, e, phase, repr(g.gap), repr(g.stderr)])
    else:  # pragma: no cover - argparse restricts choices
        raise CLIError(f"unknown diagnostic {what}", EXIT_INVALID)
    _emit(diag.rows_to_csv(fields, rows, hdr), args.out)
    return EXIT_OK


# -- validate --------------------------------------------------------------------

def run_validation(quick: bool, golden_dir: str | None = None, seed: int = 0) -> list[tuple[str, bool, str]]:
    """Oracle-backed checks; returns (name, ok, detail) triples."""
    from . import oracle
    from .rcdyn import empirical_law
    results = []
    for chk in oracle.verify_golden(golden_dir):
        results.append((f"golden {chk.file}", chk.ok, f"fixture={chk.fixture} err={chk.max_abs_err:.3g} {chk.detail}"))
    for name, G in oracle.fixtures().items():
        for q in (2, 3):
            for p in (0.3, 0.7):
                ex = oracle.exact_rc(G, q, p)
                tv = oracle.exact_tv(ex, oracle.edwards_sokal_pushforward(G, q, p))
                results.append((f"edwards-sokal {name} q={q} p={p}", tv < 1e-12, f"fixture={name} tv={tv:.3g}"))
                rep = oracle.exact_transition_check(G, q, p)
                results.append((f"stationarity {name} q={q} p={p}", rep.ok(),
                                f"fixture={name} residual={rep.stationarity_residual:.3g}"))
    steps = 10**6 if quick else 10**7
    for k, (name, G) in enumerate(oracle.fixtures().items()):
        q, p = 2 + k % 2, (0.3, 0.7)[(k // 2) % 2]
        emp = empirical_law(G, q, p, steps, stream(seed, "validate", name))
        tv = oracle.exact_tv(oracle.exact_rc(G, q, p), emp)
        results.append((f"chain law {name} q={q} p={p}", tv < 0.02, f"fixture={name} tv={tv:.3g} steps={steps}"))
    for q, d in [(3, 3), (4, 4), (20, 5)]:
        bc = pc.beta_c(q, d)
        err = abs(pc.solve_t(q, d, bc) - (q - 1) ** (2 / d))
        results.append((f"t_c q={q} d={d}", err < 1e-9, f"err={err:.3g}"))
        bu, bub = pc.beta_u(q, d), pc.beta_u_bisect(q, d) if not quick else pc.beta_u(q, d)
        results.append((f"beta_u q={q} d={d}", bu < bc and abs(bu - bub) < 1e-8, f"beta_u={bu:.10f}"))
    return results


def cmd_validate(args) -> int:
    t0 = time.perf_counter()
    results = run_validation(args.quick, args.golden_dir, args.seed)
    lines = [f"{'PASS' if ok else 'FAIL'} {name} :: {detail}" for name, ok, detail in results]
    failed = sum(not ok for _, ok, _ in results)
    summary = f"# {len(results) - failed}/{len(results)} checks passed"
    text = header(_config(args)) + "\n".join(lines) + "\n" + summary + "\n"
    _emit(text, args.out)
    print(f"validate finished in {time.perf_counter() - t0:.1f}s", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (64-bit)")
    common.add_argument("--out", default=None, help="output file (directory for sample)")
    common.add_argument("--threads", type=int, default=1, help="worker threads (runs are sequential)")

    ap = argparse.ArgumentParser(prog="rcpotts", description=__doc__.splitlines()[0], parents=[common])
    ap.add_argument("--version", action="version", version=f"rcpotts {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    th = sub.add_parser("thresholds", parents=[common], help="phase thresholds and derived constants")
    th.add_argument("--q", type=int)
    th.add_argument("--d", type=int)
    th.add_argument("--beta", type=float, default=None, help="inverse temperature (default beta_c)")
    th.add_argument("--grid", nargs=2, metavar=("QLO:QHI", "DLO:DHI"))
    th.set_defaults(func=cmd_thresholds)

    def model_args(p):
        p.add_argument("--q", type=int, required=True)
        p.add_argument("--d", type=int, required=True)
        p.add_argument("--n", type=int, default=1000)
        g = p.add_mutually_exclusive_group()
        g.add_argument("--beta", type=float, default=None)
        g.add_argument("--beta-ratio", type=float, default=1.0, help="beta as a multiple of beta_c")
        p.add_argument("--fixture", default=None, help="use a stored tiny fixture instead of a random graph")
        p.add_argument("--graph", default=None, help="read the graph from a text file")

    sa = sub.add_parser("sample", parents=[common], help="run the RC sampler")
    sa.add_argument("model", choices=["potts", "rc", "planted"])
    model_args(sa)
    sa.add_argument("--init", choices=["auto", "all-in", "all-out"], default="auto")
    sa.add_argument("--eps", type=float, default=0.01)
    sa.add_argument("--budget-c", type=float, default=1.0, help="constant c in T = c n ln n ln(1/eps)")
    sa.add_argument("--steps", type=int, default=None, help="override the step budget")
    sa.add_argument("--stride", type=int, default=None)
    sa.add_argument("--phase", choices=["disordered", "ordered"], default=None)
    sa.set_defaults(func=cmd_sample)

    di = sub.add_parser("diagnose", parents=[common], help="structural diagnostics")
    di.add_argument("what", choices=["shatter", "wired", "wsm", "occupancy", "coupling"])
    model_args(di)
    di.add_argument("--radius", type=int, default=None)
    di.add_argument("--graphs", type=int, default=1, help="number of graph seeds")
    di.add_argument("--probes", type=int, default=10, help="vertices probed per graph")
    di.add_argument("--steps", type=int, default=None)
    di.add_argument("--stride", type=int, default=None)
    di.add_argument("--replicas", type=int, default=4)
    di.add_argument("--phase", choices=["disordered", "ordered"], default=None)
    di.add_argument("--config", choices=["chain", "all-in", "all-out"], default="chain",
                    help="edge configuration to probe (default: run the chain)")
    di.set_defaults(func=cmd_diagnose)

    va = sub.add_parser("validate", parents=[common], help="oracle-backed self-check")
    va.add_argument("--quick", action="store_true")
    va.add_argument("--golden-dir", default=None)
    va.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
