"""Command-line entry points.

Every CSV starts with ``#`` comment lines echoing the resolved configuration,
so a run can be reproduced from its own output.
"""

import argparse
import csv
import io
import logging
import os
import secrets
import sys

import numpy as np

from . import analysis, delaysim, ltcode, strategies
from .analysis import DelayParams
from .exceptions import InvalidParameterError, JobFailureError, SetupFailureError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FAILURE = 3

_STRATEGY_ALIASES = {"lt": strategies.LT, "mds": strategies.MDS, "rep": strategies.REPLICATION,
                     "replication": strategies.REPLICATION, "uncoded": strategies.UNCODED}


class UsageError(Exception):
    pass


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _add_strategy_args(p, default="lt"):
    p.add_argument("--strategy", choices=sorted(_STRATEGY_ALIASES), default=default)
    p.add_argument("--p", type=_positive_int, default=10, help="number of workers")
    p.add_argument("--alpha", type=float, default=2.0, help="LT redundancy factor")
    p.add_argument("--r", type=int, default=2, help="replication factor")
    p.add_argument("--k", type=int, default=None, help="MDS dimension (defaults to p/2)")
    p.add_argument("--c", type=_positive_float, default=ltcode.DEFAULT_C)
    p.add_argument("--delta", type=float, default=ltcode.DEFAULT_DELTA)


def _add_delay_args(p):
    p.add_argument("--mu", type=_positive_float, default=0.2, help="rate of the initial delay")
    p.add_argument("--tau", type=_positive_float, default=0.005, help="time per row-vector product")


def _spec_from_args(args):
    variant = _STRATEGY_ALIASES[args.strategy]
    if variant == strategies.UNCODED:
        return strategies.StrategySpec.uncoded(args.p)
    if variant == strategies.REPLICATION:
        return strategies.StrategySpec.replication(args.p, args.r)
    if variant == strategies.MDS:
        k = args.k if args.k is not None else max(args.p // 2, 1)
        return strategies.StrategySpec.mds(args.p, k)
    return strategies.StrategySpec.lt(args.p, args.alpha, args.c, args.delta)


def _resolve_seed(args):
    if args.seed is None:
        args.seed = secrets.randbits(63)
    return args.seed


def _config_lines(command, args):
    items = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command")}
    lines = [f"# ratelessmv {command}"]
    lines += [f"# {k}={v}" for k, v in items.items()]
    return lines


def _write_csv(path, header_lines, columns, rows):
    buf = io.StringIO()
    for line in header_lines:
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    if path == "-":
        sys.stdout.write(buf.getvalue())
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def _check_simulation(spec, m):
    if spec.variant == strategies.MDS and m % spec.k:
        raise InvalidParameterError(f"k={spec.k} must divide m={m}")
    if spec.variant in (strategies.REPLICATION, strategies.UNCODED):
        strategies.replication_plan(m, spec.p, spec.replicas)


def cmd_simulate(args):
    spec = _spec_from_args(args)
    params = DelayParams(args.mu, args.tau, args.p)
    _check_simulation(spec, args.m)
    _resolve_seed(args)
    mode = None
    if spec.variant == strategies.LT:
        mode = delaysim.Fixed(args.epsilon) if args.md_mode == "fixed" else delaysim.Coupled(args.c, args.delta)
    res = delaysim.run_monte_carlo(spec, args.m, params, args.trials, seed=args.seed, m_d_mode=mode)
    header = _config_lines("simulate", args)
    os.makedirs(args.out, exist_ok=True)

    rows = []
    for t, o in enumerate(res.outcomes):
        rows.append([t, _fmt(o.latency), o.total, o.m_d if o.m_d is not None else "",
                     int(o.decoded)] + o.counts.tolist())
    _write_csv(os.path.join(args.out, "trials.csv"), header,
               ["trial", "T", "C", "m_d", "decoded"] + [f"C_{i + 1}" for i in range(args.p)], rows)

    summary = res.summary()
    _write_csv(os.path.join(args.out, "summary.csv"), header, ["key", "value"],
               [[k, _fmt(v)] for k, v in summary.items()])

    lat = res.latencies[res.decoded_mask]
    comp = res.computations[res.decoded_mask]
    n = args.grid_points
    t_grid = np.linspace(0.0, float(lat.max()) if lat.size else 1.0, n)
    c_grid = np.linspace(0.0, float(comp.max()) if comp.size else 1.0, n)
    tail_rows = [["latency", _fmt(t), _fmt(v)] for t, v in zip(t_grid, res.latency_tail(t_grid))]
    tail_rows += [["computations", _fmt(c), _fmt(v)] for c, v in zip(c_grid, res.computation_tail(c_grid))]
    _write_csv(os.path.join(args.out, "tails.csv"), header, ["kind", "x", "prob_greater"], tail_rows)
    print(f"wrote {len(res.outcomes)} trials to {args.out} (mean T={summary['mean_T']:.4f}, "
          f"mean C={summary['mean_C']:.1f})")
    return EXIT_OK


def cmd_analyze(args):
    params = DelayParams(args.mu, args.tau, args.p)
    m, p = args.m, args.p
    k = args.k if args.k is not None else max(p // 2, 1)
    m_d = args.m_d if args.m_d is not None else int(np.ceil((1 + args.epsilon) * m))
    lo, hi = analysis.lt_latency_bounds(m_d, params)
    table = [
        ["uncoded", _fmt(analysis.uncoded_latency_mean(m, params)), "", "", m],
        ["replication", _fmt(analysis.rep_latency_mean(m, params, args.r)), "", "", args.r * m],
        ["mds", _fmt(analysis.mds_latency_mean(m, params, k)), "", "", m * p // k],
        ["lt", "", _fmt(lo), _fmt(hi), m_d],
    ]
    header = _config_lines("analyze", args)
    columns = ["strategy", "latency_mean", "latency_lower", "latency_upper", "computations_nominal"]
    _write_csv("-", header, columns, table)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_csv(os.path.join(args.out, "analysis.csv"), header, columns, table)
        grid = np.linspace(0, args.c0_max if args.c0_max else m * p // k, args.grid_points)
        bound_rows = []
        for c0 in grid:
            mds_b = analysis.mds_comp_tail_bound(m, params, k, c0) if k < p else ""
            rep_b = analysis.rep_comp_tail_bound(m, params, args.r, c0) if args.r > 1 else ""
            bound_rows.append([_fmt(c0), _fmt(mds_b), _fmt(rep_b)])
        _write_csv(os.path.join(args.out, "tail_bounds.csv"), header,
                   ["C0", "mds_lower_bound", "rep_lower_bound"], bound_rows)
    return EXIT_OK


def _parse_pair(text):
    try:
        c, delta = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected C,DELTA, got {text!r}") from None
    return c, delta


def cmd_overhead(args):
    _resolve_seed(args)
    pairs = args.pair or [(args.c, args.delta)]
    header = _config_lines("overhead", args)
    os.makedirs(args.out, exist_ok=True)
    summary_rows = []
    seeds = np.random.SeedSequence(args.seed).spawn(len(pairs))
    for (c, delta), seed in zip(pairs, seeds):
        est = ltcode.estimate_overhead(args.m, c, delta, args.alpha, args.trials, seed=seed)
        tag = f"c{c:g}_d{delta:g}"
        for t, (traj, used) in enumerate(zip(est.trajectories, est.symbols_used)):
            _write_csv(os.path.join(args.out, f"trajectory_{tag}_t{t}.csv"), header,
                       ["received", "decoded"], [[i + 1, int(v)] for i, v in enumerate(traj)])
            summary_rows.append([_fmt(c), _fmt(delta), t, int(used)])
        print(f"c={c:g} delta={delta:g}: mean M'={est.mean_used:.1f} max={est.max_used} "
              f"eps={est.epsilon:.4f} failures={est.failures}")
    _write_csv(os.path.join(args.out, "overhead.csv"), header,
               ["c", "delta", "trial", "symbols_used"], summary_rows)
    return EXIT_OK


def cmd_encode(args):
    from .runtime import storage

    spec = _spec_from_args(args)
    if args.matrix:
        A = storage.read_matrix(args.matrix)
    elif args.random is not None:
        m, n = args.random
        A = np.random.default_rng(args.matrix_seed).integers(-10, 11, size=(m, n)).astype(float)
        os.makedirs(args.out, exist_ok=True)
        storage.write_matrix(os.path.join(args.out, "A.cmv"), A)
    else:
        raise UsageError("pass --matrix FILE or --random M N")
    manifest = storage.encode_and_stage(A, spec, args.seed, args.out)
    print(f"staged {manifest.m_e} encoded rows for {manifest.p} workers in {args.out}")
    return EXIT_OK


def cmd_master(args):
    from .runtime import JobManifest, master_run, read_matrix, write_matrix

    manifest = JobManifest.load(args.manifest)
    if args.x:
        x = read_matrix(args.x).reshape(-1)
    else:
        x = np.random.default_rng(args.x_seed).integers(-10, 11, size=manifest.n).astype(float)
    b, report = master_run(x, manifest, host=args.host, port=args.port,
                           setup_timeout=args.setup_timeout, job_timeout=args.job_timeout)
    if args.b_out:
        write_matrix(args.b_out, b.reshape(-1, 1))
    _write_csv(args.report or "-", _config_lines("master", args), ["key", "value"], report.as_rows())
    return EXIT_OK


def cmd_worker(args):
    from .runtime import DelayInjection, JobManifest, worker_run

    manifest = JobManifest.load(args.manifest)
    if not 0 <= args.id < manifest.p:
        raise UsageError(f"--id must lie in [0, {manifest.p})")
    delay = DelayInjection(initial=args.initial_delay, per_task=args.task_delay,
                           rate=args.mu, seed=args.seed)
    entry = manifest.workers[args.id]
    report = worker_run(manifest.worker_path(args.id), entry.start_index, args.host, args.port,
                        args.id, delay, retries=args.retries, retry_interval=args.retry_interval)
    print(f"worker {report.worker_id}: sent {report.sent}/{report.assigned} results")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="ratelessmv", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte-Carlo latency/computation simulation")
    _add_strategy_args(p)
    _add_delay_args(p)
    p.add_argument("--m", type=_positive_int, default=10000)
    p.add_argument("--trials", type=_positive_int, default=500)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--md-mode", choices=["coupled", "fixed"], default="coupled")
    p.add_argument("--epsilon", type=float, default=0.05, help="overhead for --md-mode fixed")
    p.add_argument("--grid-points", type=_positive_int, default=101)
    p.add_argument("--out", default="simulation")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="closed-form latency means, bounds and tail bounds")
    _add_delay_args(p)
    p.add_argument("--m", type=_positive_int, default=10000)
    p.add_argument("--p", type=_positive_int, default=10)
    p.add_argument("--r", type=_positive_int, default=2)
    p.add_argument("--k", type=_positive_int, default=None)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--m-d", type=_positive_int, default=None, help="LT threshold (overrides --epsilon)")
    p.add_argument("--c0-max", type=float, default=None)
    p.add_argument("--grid-points", type=_positive_int, default=101)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("overhead", help="LT decoding threshold and avalanche trajectories")
    p.add_argument("--m", type=_positive_int, default=10000)
    p.add_argument("--c", type=_positive_float, default=ltcode.DEFAULT_C)
    p.add_argument("--delta", type=float, default=ltcode.DEFAULT_DELTA)
    p.add_argument("--pair", type=_parse_pair, action="append", help="C,DELTA (repeatable)")
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--trials", type=_positive_int, default=10)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="overhead")
    p.set_defaults(func=cmd_overhead)

    p = sub.add_parser("encode", help="encode a matrix and stage per-worker row files")
    _add_strategy_args(p)
    p.add_argument("--matrix", help="CMV1 matrix file")
    p.add_argument("--random", type=_positive_int, nargs=2, metavar=("M", "N"),
                   help="generate an integer matrix instead (saved as A.cmv)")
    p.add_argument("--matrix-seed", type=int, default=0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("master", help="run the master for a staged job")
    p.add_argument("--manifest", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--x", help="CMV1 file holding x")
    p.add_argument("--x-seed", type=int, default=0, help="seed for an integer x when --x is absent")
    p.add_argument("--b-out", help="write the decoded product here (CMV1)")
    p.add_argument("--report", help="report CSV path (default stdout)")
    p.add_argument("--setup-timeout", type=_positive_float, default=30.0)
    p.add_argument("--job-timeout", type=_positive_float, default=300.0)
    p.set_defaults(func=cmd_master)

    p = sub.add_parser("worker", help="run one worker of a staged job")
    p.add_argument("--manifest", required=True)
    p.add_argument("--id", type=int, required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--initial-delay", type=float, default=0.0)
    p.add_argument("--task-delay", type=float, default=0.0)
    p.add_argument("--mu", type=_positive_float, default=None,
                   help="draw the initial delay from Exp(mu) instead")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--retries", type=int, default=5)
    p.add_argument("--retry-interval", type=float, default=0.2)
    p.set_defaults(func=cmd_worker)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InvalidParameterError, UsageError) as exc:
        parser.print_usage(sys.stderr)
        print(f"ratelessmv {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (JobFailureError, SetupFailureError, ConnectionError, OSError) as exc:
        print(f"ratelessmv {args.command}: failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
