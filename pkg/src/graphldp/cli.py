"""Command-line interface: ``graphldp <command> [options]``.

Options may also come from a plain-text ``key = value`` file given with
``--config``; flags on the command line take precedence.  Exit status is 0
on success, 2 when a solve is infeasible and 1 on usage or domain errors.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from . import randgraph as rg
from . import varsolve as vs
from .graphon import Motif, t_density_graph

FORMAT_VERSION = 1
EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2
RANDOMIZED = {"solve", "sweep", "sample", "couple", "mcmc", "rate"}
SOLVER_RNG = "pcg64"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str) -> list:
    """'0.13:0.30:0.01' (inclusive range) or '0.1,0.2'."""
    if ":" in text:
        lo, hi, step = (float(x) for x in text.split(":"))
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return [round(lo + i * step, 12) for i in range(count)]
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list:
    return [int(x) for x in str(text).split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key = value file; flags override it")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int, help="worker cap (default $GRAPHLDP_THREADS or all cores)")
    common.add_argument("--output", "-o", help="write here instead of stdout")
    common.add_argument("--format", choices=["csv", "json"])

    motif = _Parser(add_help=False)
    motif.add_argument("--motif", default="triangle", help="preset (edge, triangle, c4, k4, path2) or '0-1,1-2'")

    solver = _Parser(add_help=False)
    solver.add_argument("--blocks", type=int, default=16)
    solver.add_argument("--restarts", type=int, default=32)

    parser = _Parser(prog="graphldp", description="Upper-tail large deviations for subgraph densities.")
    parser.add_argument("--version", action="version", version=f"graphldp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", parents=[common, motif, solver], help="solve one variational problem")
    p.add_argument("--kind", choices=["phi", "psi", "f", "psi_hat"], default="psi")
    p.add_argument("--mode", choices=["inequality", "equality"], default="inequality")
    p.add_argument("--p", type=float)
    p.add_argument("--r", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--b", type=float)
    p.add_argument("--mass-convention", choices=["density", "pairs"], default="density")

    p = sub.add_parser("sweep", parents=[common, motif, solver], help="psi curve over an r grid")
    p.add_argument("--p", type=float)
    p.add_argument("--r-grid", help="lo:hi:step or comma list")
    p.add_argument("--no-continuity", action="store_true", help="skip the left-limit diagnostic solves")

    p = sub.add_parser("sample", parents=[common], help="draw G(n, p) or G(n, m)")
    p.add_argument("--model", choices=["gnp", "gnm"], default="gnp")
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--m", type=int)

    p = sub.add_parser("couple", parents=[common], help="run the edge-count coupling")
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--runs", type=int, default=1)

    p = sub.add_parser("enumerate", parents=[common, motif], help="count graphs with t_H >= r")
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--r", type=float)
    p.add_argument("--method", choices=["auto", "exact", "mc"], default="auto")
    p.add_argument("--budget", type=int, default=10**8)
    p.add_argument("--samples", type=int, default=10**5)

    p = sub.add_parser("mcmc", parents=[common, motif], help="edge-swap chains on {|E| = m, t_H >= r}")
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--p", type=float, help="sets m = round(p C(n,2)) when --m is absent")
    p.add_argument("--r", type=float)
    p.add_argument("--steps", type=int, default=10**5)
    p.add_argument("--thin", type=int)
    p.add_argument("--burn-in", type=int, default=0)
    p.add_argument("--chains", type=int, default=1)

    p = sub.add_parser("rate", parents=[common, motif, solver], help="exact/MC tail rates next to -psi")
    p.add_argument("--p", type=float)
    p.add_argument("--r", type=float)
    p.add_argument("--n", dest="n_list", help="comma list of vertex counts")
    p.add_argument("--budget", type=int, default=10**8)
    p.add_argument("--samples", type=int, default=10**5)

    p = sub.add_parser("verify", parents=[common], help="run the invariant suite")
    p.add_argument("--suite", default="all")
    p.add_argument("--list", action="store_true", help="list check names and exit")
    return parser


def read_config(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for num, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{num}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def parse(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        actions = {}
        for a in sub._actions:
            actions[a.dest] = a
            for opt in a.option_strings:
                if opt.startswith("--"):
                    actions[opt[2:].replace("-", "_")] = a
        explicit = _explicit_dests(sub, argv)
        for key, value in cfg.items():
            act = actions.get(key)
            if act is None or key in ("help", "config"):
                raise UsageError(f"unknown config key {key!r} for {args.command}")
            if act.dest in explicit:
                continue
            if isinstance(act, argparse._StoreTrueAction):
                setattr(args, act.dest, value.lower() in ("1", "true", "yes"))
                continue
            try:
                converted = act.type(value) if act.type else value
            except ValueError:
                raise UsageError(f"bad value {value!r} for config key {key!r}") from None
            if act.choices is not None and converted not in act.choices:
                raise UsageError(f"config key {key!r} must be one of {', '.join(act.choices)}")
            setattr(args, act.dest, converted)
    return args


def _explicit_dests(sub, argv) -> set:
    flags = {}
    for a in sub._actions:
        for opt in a.option_strings:
            flags[opt] = a.dest
    seen = set()
    for tok in argv:
        key = tok.split("=", 1)[0]
        if key in flags:
            seen.add(flags[key])
    return seen


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))


def _resolved(args) -> dict:
    # worker count and destination do not affect results, so they stay out
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("config", "output", "threads")}


def _header(args, rng_name: str | None) -> dict:
    return {"program": "graphldp", "version": __version__, "format_version": FORMAT_VERSION,
            "command": args.command, "config": _resolved(args), "seed": args.seed,
            "rng_name": rng_name, "log_base": "e"}


def _comment(header: dict) -> str:
    return "# " + json.dumps(header, sort_keys=True) + "\n"


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_default) + "\n"


def _default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _csv(rows: list, columns: list) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_cell(row.get(c)) for c in columns))
    return "\n".join(lines) + "\n"


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _motif(args) -> Motif:
    try:
        return Motif.parse(args.motif)
    except (KeyError, ValueError) as exc:
        raise UsageError(f"bad motif {args.motif!r}: {exc}") from None


# -- commands ----------------------------------------------------------------


def cmd_solve(args):
    kind = {"phi": vs.Kind.PHI, "psi": vs.Kind.PSI, "f": vs.Kind.F_ENTROPY, "psi_hat": vs.Kind.PSI_HAT}[args.kind]
    mode = vs.Mode.EQUALITY if args.mode == "equality" or kind is vs.Kind.F_ENTROPY else vs.Mode.INEQUALITY
    if kind is vs.Kind.PSI_HAT:
        _require(args, "n", "m", "b")
        spec = vs.ProblemSpec(_motif(args), None, None, kind, mode, n=args.n, m=args.m, b=args.b,
                              mass_convention=args.mass_convention)
    else:
        _require(args, "p", "r")
        spec = vs.ProblemSpec(_motif(args), args.p, args.r, kind, mode, blocks=args.blocks)
    res = vs.solve(spec, restarts=args.restarts, seed=args.seed, threads=args.threads)
    out = {"header": _header(args, SOLVER_RNG), "result": res.to_dict()}
    code = EXIT_INFEASIBLE if res.status is vs.Status.INFEASIBLE else EXIT_OK
    return _json(out), code


def cmd_sweep(args):
    _require(args, "p", "r_grid")
    curve = vs.psi_curve(_motif(args), args.p, _floats(args.r_grid), blocks=args.blocks,
                         restarts=args.restarts, seed=args.seed, threads=args.threads,
                         continuity=not args.no_continuity)
    header = _header(args, SOLVER_RNG)
    header["r_H_estimate"] = curve.r_h_estimate
    if args.format == "json":
        pts = []
        for pt in curve.points:
            row = pt.row()
            row.update(agree=pt.agree, psi_equality=None if pt.psi_eq is None else pt.psi_eq.value,
                       left_gap=pt.left_gap, discontinuity_flag=pt.discontinuity_flag,
                       optimizer=pt.psi.optimizer.merged(1e-6).to_dict())
            pts.append(row)
        return _json({"header": header, "points": pts}), EXIT_OK
    text = _comment(header) + curve.to_csv()
    return text, EXIT_OK


def cmd_sample(args):
    _require(args, "n")
    if args.model == "gnp":
        _require(args, "p")
        g = rg.sample_gnp(args.n, args.p, args.seed)
    else:
        _require(args, "m")
        g = rg.sample_gnm(args.n, args.m, args.seed)
    return _comment(_header(args, rg.RNG_NAME)) + g.to_edgelist(), EXIT_OK


def cmd_couple(args):
    _require(args, "n", "m", "p", "eta")
    rows = []
    for i in range(args.runs):
        tr = rg.couple(args.n, args.m, args.p, args.eta, (args.seed, i) if args.runs > 1 else args.seed)
        rows.append({"run": i, "e_target": tr.e_target, "d_n": tr.d_n, "xor_size": tr.xor_size,
                     "bound": args.eta * args.n**2, "ok": tr.xor_size == abs(tr.d_n) < args.eta * args.n**2})
    cols = ["run", "e_target", "d_n", "xor_size", "bound", "ok"]
    if args.format == "json":
        return _json({"header": _header(args, rg.RNG_NAME), "runs": rows}), EXIT_OK
    return _comment(_header(args, rg.RNG_NAME)) + _csv(rows, cols), EXIT_OK


def cmd_enumerate(args):
    _require(args, "n", "m", "r")
    method = {"auto": "auto", "exact": "EXACT_ENUM", "mc": "MONTE_CARLO"}[args.method]
    est = rg.enumerate_tail(args.n, args.m, _motif(args), args.r, method=method, budget=args.budget,
                            samples=args.samples, seed=args.seed or 0)
    if est.method == "MONTE_CARLO" and args.seed is None:
        raise UsageError("--seed is required when Monte Carlo sampling is used")
    row = {"n": est.n, "m": est.m, "r": str(est.r), "count": est.count, "total": est.total,
           "log_prob_rate": est.log_prob_rate, "method": est.method, "std_error": est.std_error}
    cols = ["n", "m", "r", "count", "total", "log_prob_rate", "method", "std_error"]
    rng = rg.RNG_NAME if est.method == "MONTE_CARLO" else None
    if args.format == "json":
        return _json({"header": _header(args, rng), "result": row}), EXIT_OK
    return _comment(_header(args, rng)) + _csv([row], cols), EXIT_OK


def cmd_mcmc(args):
    _require(args, "n", "r")
    m = args.m
    if m is None:
        _require(args, "p")
        m = math.floor(args.p * args.n * (args.n - 1) / 2 + 0.5)
    h = _motif(args)
    rows = []
    for c in range(args.chains):
        for i, g in enumerate(rg.mcmc_conditioned(args.n, m, h, args.r, args.steps, args.seed * 1000 + c,
                                                  thin=args.thin, burn_in=args.burn_in)):
            rows.append({"chain": c, "sample": i, "edges": g.m, "t_H": t_density_graph(h, g)})
    header = _header(args, rg.RNG_NAME)
    header["m"] = m
    if args.chains > 1:
        by_chain = [[r["t_H"] for r in rows if r["chain"] == c] for c in range(args.chains)]
        header["gelman_rubin"] = rg.gelman_rubin(by_chain)
    cols = ["chain", "sample", "edges", "t_H"]
    if args.format == "json":
        return _json({"header": header, "samples": rows}), EXIT_OK
    return _comment(header) + _csv(rows, cols), EXIT_OK


def cmd_rate(args):
    _require(args, "p", "r", "n_list")
    h = _motif(args)
    spec = vs.ProblemSpec(h, args.p, args.r, vs.Kind.PSI, vs.Mode.INEQUALITY, blocks=args.blocks)
    psi = vs.solve(spec, restarts=args.restarts, seed=args.seed, threads=args.threads)
    p = args.p
    rows = rg.empirical_rate(_ints(args.n_list), lambda n: math.floor(p * n * (n - 1) / 2 + 0.5), h, args.r,
                             budget=args.budget, seed=args.seed, psi=psi.value, samples=args.samples)
    cols = ["n", "m", "p_n", "method", "count", "total", "log_prob_rate", "std_error", "log_binom_rate",
            "log_count_rate", "h_e_p_n", "neg_psi", "F_estimate"]
    header = _header(args, rg.RNG_NAME)
    header["psi_status"] = psi.status.value
    if args.format == "json":
        return _json({"header": header, "rows": rows}), EXIT_OK
    return _comment(header) + _csv(rows, cols), EXIT_OK


def cmd_verify(args):
    from . import verify

    if args.list:
        return "\n".join(verify.REGISTRY) + "\n", EXIT_OK
    if args.suite != "all" and args.suite not in verify.SUITES:
        raise UsageError(f"unknown suite {args.suite!r}; choose from all, {', '.join(verify.SUITES)}")
    lines, failed = [], 0
    for name, ok, detail in verify.run_suite(args.suite, args.seed):
        failed += not ok
        lines.append(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    lines.append(f"{len(lines) - failed} passed, {failed} failed")
    return _comment(_header(args, None)) + "\n".join(lines) + "\n", EXIT_ERROR if failed else EXIT_OK


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "sample": cmd_sample, "couple": cmd_couple,
            "enumerate": cmd_enumerate, "mcmc": cmd_mcmc, "rate": cmd_rate, "verify": cmd_verify}


def _execute(argv):
    args = parse(argv)
    if args.command in RANDOMIZED and args.seed is None:
        raise UsageError(f"--seed is required for {args.command}")
    if args.command == "verify" and args.seed is None:
        args.seed = 0
    if args.threads is not None and args.threads < 1:
        raise UsageError("--threads must be positive")
    text, code = COMMANDS[args.command](args)
    return text, code, args.output


def run(argv) -> tuple[str, int]:
    """Parse and dispatch; returns (output text, exit code)."""
    text, code, _ = _execute(argv)
    return text, code


def run_to_string(argv) -> str:
    return run(argv)[0]


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        text, code, output = _execute(argv)
    except (UsageError, ValueError, RuntimeError) as exc:
        print(f"graphldp: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
