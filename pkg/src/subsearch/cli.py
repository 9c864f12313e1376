"""Command-line entry points: run, sweep, bench, protocol-check."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .errors import ProtocolError
from .harness import (RunConfig, evals_to_reach, external_objective,
                      load_config, run_experiment, run_sweep)
from .numerics import RngStream, stream_id
from .objectives import NoiseKey

PROJ_ALIASES = {"pca": "pca", "prior": "prior-norm", "n01": "random-n01",
                "n01d": "random-n01-over-d"}
INIT_ALIASES = {"cond": "conditioned", "random": "random-token"}


def _load(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        config.seed = args.seed
    if args.out is not None:
        config.out_dir = args.out
    if args.budget is not None:
        config.cma.budget = args.budget
    if args.d is not None:
        config.projection.d = args.d
    if args.proj is not None:
        config.projection.kind = PROJ_ALIASES[args.proj]
    if args.init is not None:
        config.init.mode = INIT_ALIASES[args.init]
    if args.tokens is not None:
        config.tokens = args.tokens
    config.validate()
    return config


def _add_common(parser):
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", help="output directory for trace and report")
    parser.add_argument("--budget", type=int)
    parser.add_argument("--d", type=int)
    parser.add_argument("--proj", choices=sorted(PROJ_ALIASES))
    parser.add_argument("--init", choices=sorted(INIT_ALIASES))
    parser.add_argument("--tokens", type=int, choices=(1, 2, 3))


def cmd_run(args) -> int:
    report = run_experiment(_load(args))
    print(json.dumps(report.to_json(), indent=2))
    return 0


def cmd_sweep(args) -> int:
    results = run_sweep(_load(args), args.axis)
    table = {}
    for value, report in results.items():
        if isinstance(report, Exception):
            table[str(value)] = {"error": str(report)}
        else:
            table[str(value)] = report.to_json()
    print(json.dumps(table, indent=2))
    return 0


def cmd_bench(args) -> int:
    config = _load(args)
    config.objective.kind = "benchmark"
    config.objective.name = args.name
    config.objective.intrinsic_dim = args.intrinsic_dim
    config.objective.ambient_dim = args.ambient_dim
    if args.proj is None:
        config.projection.kind = "identity"
    if args.target is not None:
        config.target = args.target
    report = run_experiment(config)
    print(json.dumps(report.to_json(), indent=2))
    return 0


def cmd_protocol_check(args) -> int:
    """Run the external child on random sphere batches and compare with the
    in-process value."""
    obj = external_objective(args.command, args.dim, args.timeout)
    rng = RngStream(args.seed or 0, stream_id("protocol-check"))
    worst = 0.0
    try:
        for round_id in range(args.rounds):
            key = NoiseKey(rng.raw64(), rng.raw64())
            batch = rng.normal(8, args.dim)
            got = obj.batch_evaluate(list(batch), key)
            want = [float(np.sum(x ** 2)) for x in batch]
            worst = max(worst, max(abs(a - b) for a, b in zip(got, want)))
    except ProtocolError as err:
        print(f"FAIL: {err}")
        return 1
    finally:
        obj.close()
    status = "OK" if worst <= args.tolerance else "FAIL"
    print(f"{status}: max |external - in-process| = {worst:.3e} "
          f"over {args.rounds} batches")
    return 0 if status == "OK" else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="subsearch",
        description="Gradient-free pseudo-token inversion with subspace CMA-ES")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment from a config")
    _add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run an ablation sweep")
    _add_common(p_sweep)
    p_sweep.add_argument("--axis", required=True,
                         choices=("projection", "d", "tokens", "init"))
    p_sweep.set_defaults(func=cmd_sweep)

    p_bench = sub.add_parser("bench", help="run a benchmark function")
    _add_common(p_bench)
    p_bench.add_argument("--name", default="sphere",
                         choices=("sphere", "rosenbrock", "rastrigin"))
    p_bench.add_argument("--intrinsic-dim", type=int, default=8)
    p_bench.add_argument("--ambient-dim", type=int, default=256)
    p_bench.add_argument("--target", type=float)
    p_bench.set_defaults(func=cmd_bench)

    p_proto = sub.add_parser("protocol-check",
                             help="conformance-check an external objective child")
    p_proto.add_argument("--command", required=True)
    p_proto.add_argument("--dim", type=int, default=8)
    p_proto.add_argument("--rounds", type=int, default=5)
    p_proto.add_argument("--timeout", type=float, default=30.0)
    p_proto.add_argument("--tolerance", type=float, default=1e-12)
    p_proto.add_argument("--seed", type=int, default=0)
    p_proto.set_defaults(func=cmd_protocol_check)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
