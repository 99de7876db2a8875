"""copostab command-line interface."""
import argparse
import logging
import os
import sys
import time

import numpy as np

from . import __version__, registry
from .cpa import DEFAULT_EPS, DEFAULT_MAX_ITER, Status, run_cutting_plane
from .exceptions import CopostabError, NoSolutionError
from .io import (
    SystemDocument,
    load_system,
    report_from_verdict,
    trajectory_document,
    write_json,
)
from .lyapunov import lemma_residual, validate_certificate
from .system import InhomogeneousDlcs, Lcs, check_step_size, discretize, explore_branches
from .system import simulate as run_simulation

log = logging.getLogger("copostab")

EXIT_FEASIBLE, EXIT_INFEASIBLE, EXIT_LIMIT, EXIT_INPUT, EXIT_VALIDATE = 0, 1, 2, 3, 4
STATUS_EXIT = {
    Status.FEASIBLE: EXIT_FEASIBLE,
    Status.INFEASIBLE: EXIT_INFEASIBLE,
    Status.ITERATION_LIMIT: EXIT_LIMIT,
}


class InputError(Exception):
    pass


def parse_scheme(text):
    if text is None:
        return None
    if text == "explicit":
        return 0.0
    if text == "implicit":
        return 1.0
    if text.startswith("theta="):
        try:
            theta = float(text[6:])
        except ValueError:
            raise InputError(f"bad scheme {text!r}") from None
        if not 0.0 <= theta <= 1.0:
            raise InputError("theta must lie in [0, 1]")
        return theta
    raise InputError(f"scheme must be explicit, implicit or theta=T, got {text!r}")


def resolve_seed(args):
    env = os.environ.get("COPOSTAB_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise InputError(f"COPOSTAB_SEED must be an integer, got {env!r}") from None
    return args.seed


def load_input(args):
    if args.example and args.system:
        raise InputError("give either a system file or --example, not both")
    if args.example:
        sys_ = registry.get(args.example)
        return SystemDocument.from_system(sys_), sys_
    if not args.system:
        raise InputError("a system file or --example is required")
    doc = load_system(args.system)
    return doc, doc.to_system()


def as_dlcs(sys_, args):
    """Discretize LCS input; returns ``(dlcs, scheme_dict_or_None)``."""
    theta = parse_scheme(getattr(args, "scheme", None))
    if isinstance(sys_, Lcs):
        if theta is None or args.dt is None:
            raise InputError("continuous-time input needs --scheme and --dt")
        return discretize(sys_, args.dt, theta), {"theta": theta, "dt": args.dt}
    if isinstance(sys_, InhomogeneousDlcs):
        raise InputError("inhomogeneous systems must be reduced first")
    return sys_, None


def _print_table_row(name, verdict, out):
    mu = verdict.margin if verdict.status is Status.FEASIBLE else verdict.mu
    best = f"{mu:.3e}" if mu is not None and mu >= verdict.eps else f"< {verdict.eps:g}"
    print(f"{'System':<10} {'Status':<15} {'Best mu':>12} {'# iters.':>9} {'Time(s)':>9}", file=out)
    print(f"{name:<10} {verdict.status.value:<15} {best:>12} {verdict.iterations:>9d} "
          f"{verdict.elapsed:>9.3f}", file=out)


def cmd_check(args):
    doc, sys_ = load_input(args)
    dlcs, scheme = as_dlcs(sys_, args)
    seed = resolve_seed(args)
    t0 = time.perf_counter()
    try:
        verdict = run_cutting_plane(
            dlcs, args.mode, eps=args.eps, max_iter=args.max_iter, seed=seed,
            fast_sep=args.fast_sep,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    timings = {"cutting_plane_s": verdict.elapsed}
    validation = None
    code = STATUS_EXIT[verdict.status]
    if args.validate and verdict.status is Status.FEASIBLE:
        t1 = time.perf_counter()
        rep = validate_certificate(dlcs, verdict.certificate, seed=seed, jobs=args.jobs)
        timings["validation_s"] = time.perf_counter() - t1
        validation = rep.to_dict()
        if not rep.passed:
            log.error("certificate failed trajectory validation")
            code = EXIT_VALIDATE
    timings["total_s"] = time.perf_counter() - t0
    report = report_from_verdict(doc, verdict, scheme, validation, seed, timings)
    if args.output:
        write_json(report.to_dict(), args.output)
    if not args.quiet:
        _print_table_row(doc.name or "-", verdict, sys.stdout)
        for ev in verdict.events:
            print(ev)
    return code


def _initial_states(args, n_x, seed):
    if args.x0 is not None and args.random is not None:
        raise InputError("give either --x0 or --random")
    if args.x0 is not None:
        try:
            x0 = np.array([float(v) for v in args.x0.split(",")])
        except ValueError:
            raise InputError(f"bad --x0 {args.x0!r}") from None
        if x0.size != n_x:
            raise InputError(f"--x0 has {x0.size} entries, system has n_x={n_x}")
        return [x0]
    count = args.random if args.random is not None else 1
    if count < 1:
        raise InputError("--random must be positive")
    rng = np.random.default_rng(seed)
    xs = rng.standard_normal((count, n_x))
    return list(xs / np.linalg.norm(xs, axis=1, keepdims=True))


def cmd_simulate(args):
    doc, sys_ = load_input(args)
    dlcs, _ = as_dlcs(sys_, args)
    if args.steps < 0:
        raise InputError("--steps must be nonnegative")
    seed = resolve_seed(args)
    trajs, truncated = [], False
    try:
        for i, x0 in enumerate(_initial_states(args, dlcs.n_x, seed)):
            if args.policy == "all":
                branches, cut = explore_branches(dlcs, x0, args.steps)
                truncated = truncated or cut
                log.info("initial state %d: %d branches", i, len(branches))
                if not args.quiet:
                    print(f"x0[{i}]: {len(branches)} branches")
                trajs.extend(branches)
            else:
                trajs.append(run_simulation(dlcs, x0, args.steps, args.policy, seed))
    except NoSolutionError as exc:
        raise InputError(f"no LCP solution at step {exc.step}: {exc}") from exc
    out = trajectory_document(doc.name, trajs, dlcs, truncated)
    if args.output:
        write_json(out, args.output)
    if not args.quiet:
        worst = max(t["complementarity_residual"] for t in out["trajectories"])
        print(f"{len(trajs)} trajectories, {args.steps} steps, max residual {worst:.2e}")
        if args.x0 is not None and args.policy != "all":
            for x in trajs[0].states:
                print(" ".join(f"{v:.17g}" for v in x))
    return 0


def cmd_discretize(args):
    doc, sys_ = load_input(args)
    if not isinstance(sys_, Lcs):
        raise InputError("discretize expects a continuous-time (lcs) document")
    theta = parse_scheme(args.scheme)
    if theta is None or args.dt is None:
        raise InputError("--scheme and --dt are required")
    check = check_step_size(sys_, args.dt, theta)
    dlcs = discretize(sys_, args.dt, theta)
    out = SystemDocument.from_system(dlcs, name=doc.name).to_dict()
    text = write_json(out, args.output or "-")
    if not args.quiet:
        print(f"step bounds: dt*theta*|A~| = {check.theta_norm:.6g}, "
              f"dt*|R A~| = {check.resolvent_norm:.6g} (< 1)", file=sys.stderr)
        if not args.output:
            sys.stdout.write(text)
    return 0


def cmd_sweep(args):
    doc, sys_ = load_input(args)
    if not isinstance(sys_, Lcs):
        raise InputError("sweep expects a continuous-time (lcs) document")
    theta = parse_scheme(args.scheme)
    if theta is None:
        raise InputError("--scheme is required")
    try:
        dts = [float(v) for v in args.dts.split(",")]
    except ValueError:
        raise InputError(f"bad --dts {args.dts!r}") from None
    seed = resolve_seed(args)
    rng = np.random.default_rng(seed)
    probes = [rng.standard_normal((sys_.n_x, sys_.n_x)) for _ in range(5)]
    probes = [0.5 * (p + p.T) for p in probes]
    rows = []
    for dt in dts:
        dlcs = discretize(sys_, dt, theta)
        try:
            v = run_cutting_plane(dlcs, args.mode, eps=args.eps, max_iter=args.max_iter, seed=seed)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        mu = v.margin if v.status is Status.FEASIBLE else v.mu
        rows.append({
            "dt": dt,
            "status": v.status.value,
            "mu": mu,
            "iterations": v.iterations,
            "time_s": v.elapsed,
            "residuals": [lemma_residual(sys_, p, dt, theta) for p in probes],
        })
    for a, b in zip(rows, rows[1:]):
        both = a["status"] == b["status"] == Status.FEASIBLE.value
        a["mu_ratio_next"] = a["mu"] / b["mu"] if both and b["mu"] else None
        a["residual_ratio_next"] = [
            ra / rb if rb else None for ra, rb in zip(a["residuals"], b["residuals"])
        ]
    out = {"schema": "copostab.sweep/1", "system": doc.name, "mode": args.mode,
           "theta": theta, "seed": seed, "rows": rows}
    if args.output:
        write_json(out, args.output)
    if not args.quiet:
        print(f"{'dt':>8} {'Status':<15} {'Best mu':>12} {'# iters.':>9} {'Time(s)':>9} {'mu ratio':>9}")
        for r in rows:
            ratio = r.get("mu_ratio_next")
            print(f"{r['dt']:>8g} {r['status']:<15} {r['mu']:>12.3e} {r['iterations']:>9d} "
                  f"{r['time_s']:>9.3f} {'' if ratio is None else f'{ratio:.3f}':>9}")
    return 0


def cmd_examples(args):
    if args.name:
        doc = SystemDocument.from_system(registry.get(args.name))
        text = write_json(doc.to_dict(), args.output or "-")
        if not args.output:
            sys.stdout.write(text)
        return 0
    for name in registry.names():
        s = registry.get(name)
        kind = "lcs" if isinstance(s, Lcs) else "dlcs"
        print(f"{name:<8} {kind:<5} n_x={s.n_x} n_c={s.n_c}")
    return 0


def _add_input(p, scheme=True):
    p.add_argument("system", nargs="?", help="system JSON document")
    p.add_argument("--example", help="built-in example name")
    if scheme:
        p.add_argument("--scheme", help="explicit, implicit or theta=T")
        p.add_argument("--dt", type=float)


def build_parser():
    parser = argparse.ArgumentParser(prog="copostab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0)
    common.add_argument("-q", "--quiet", action="store_true")
    common.add_argument("--jobs", type=int, default=1, help="worker cap for validation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", parents=[common], help="search for a CQLF/EQLF certificate")
    _add_input(p)
    p.add_argument("--mode", choices=("cqlf", "eqlf"), default="cqlf")
    p.add_argument("--eps", type=float, default=DEFAULT_EPS)
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fast-sep", action="store_true", help="stop separation at the first violated piece")
    p.add_argument("--validate", action="store_true", help="simulate trajectories against the certificate")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("simulate", parents=[common], help="simulate trajectories")
    _add_input(p)
    p.add_argument("--x0")
    p.add_argument("--random", type=int)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--policy", choices=("lex", "random", "all"), default="lex")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("discretize", parents=[common], help="theta-scheme discretization of an LCS")
    _add_input(p)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_discretize)

    p = sub.add_parser("sweep", parents=[common], help="check over several step sizes")
    _add_input(p)
    p.add_argument("--mode", choices=("cqlf", "eqlf"), default="cqlf")
    p.add_argument("--dts", default="0.1,0.05,0.025")
    p.add_argument("--eps", type=float, default=DEFAULT_EPS)
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("examples", parents=[common], help="list or export built-in systems")
    p.add_argument("name", nargs="?")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_examples)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else 0
    level = logging.WARNING - 10 * args.verbose
    logging.basicConfig(level=max(level, logging.DEBUG), format="%(levelname)s: %(message)s")
    if args.jobs < 1:
        print("error: --jobs must be positive", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except (InputError, CopostabError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
