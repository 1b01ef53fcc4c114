"""Command-line harness: train, oracle export, chain evaluation, reports.

Exit codes: 0 success, 2 configuration error, 3 training divergence,
4 missing or corrupt artifact.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import config as cfg_mod
from . import networks as nets
from . import oracles
from . import stacking as st
from . import training
from .problems import make_problem

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_MISSING = 4


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="mfstack",
        description="Stacked multifidelity physics-informed training")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run a stacking experiment")
    p_train.add_argument("--problem", required=True)
    p_train.add_argument("--config", help="config file or preset name")
    p_train.add_argument("--case", help="wave case1..4 / burgers fixed,changing,...")
    p_train.add_argument("--scale", choices=["paper", "desk"])
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--levels", type=int)
    p_train.add_argument("--out", default=None)

    p_oracle = sub.add_parser("oracle", help="export a reference solution")
    p_oracle.add_argument("--problem", required=True)
    p_oracle.add_argument("--out", required=True)
    p_oracle.add_argument("--param", action="append", default=[],
                          help="equation parameter, e.g. c=2 or nu=0.01")
    p_oracle.add_argument("--seed", type=int, default=0,
                          help="GRF seed for burgers initial conditions")

    p_eval = sub.add_parser("eval", help="re-evaluate a trained chain")
    p_eval.add_argument("--chain", required=True)
    p_eval.add_argument("--out", required=True)

    p_report = sub.add_parser("report", help="aggregate error tables")
    p_report.add_argument("--runs", nargs="+", required=True)
    p_report.add_argument("--out", default=None)

    args = parser.parse_args(argv)
    try:
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "oracle":
            return _cmd_oracle(args)
        if args.command == "eval":
            return _cmd_eval(args)
        if args.command == "report":
            return _cmd_report(args)
    except cfg_mod.ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except training.TrainingDivergence as err:
        print(f"training diverged: {err}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (FileNotFoundError, nets.NetworkError) as err:
        print(f"missing artifact: {err}", file=sys.stderr)
        return EXIT_MISSING
    return EXIT_OK


def _cmd_train(args):
    base = cfg_mod.default_config(args.problem, case=args.case)
    if args.config:
        path = args.config
        if not os.path.exists(path) and not path.endswith(".cfg"):
            path = cfg_mod.preset_path(args.config)
        cfg = cfg_mod.load_config_file(path, base=base)
    else:
        cfg = base
    if cfg.problem != args.problem:
        raise cfg_mod.ConfigError(
            f"config is for problem '{cfg.problem}', not '{args.problem}'")
    if args.scale:
        cfg.scale = args.scale
    if args.seed is not None:
        cfg.seed = args.seed
    if args.levels is not None:
        cfg.levels = args.levels
    resolved = cfg.resolve()
    problem = make_problem(resolved.problem)

    def progress(level, err, wall):
        print(f"level {level}: rel_l2 {err:.6g}  ({wall:.1f}s)")

    result = training.run_stack(problem, resolved, out_dir=args.out,
                                progress=progress)
    print("level,rel_l2_error,param_count,wall_seconds")
    for i, err in enumerate(result.errors):
        print(f"{i},{err:.6g},{result.param_counts[i]},"
              f"{result.wall_seconds[i]:.1f}")
    return EXIT_OK


def _parse_params(pairs):
    out = {}
    for pair in pairs:
        key, _, val = pair.partition("=")
        if not val:
            raise cfg_mod.ConfigError(f"bad --param '{pair}', expected key=value")
        out[key.strip()] = float(val)
    return out


def _cmd_oracle(args):
    params = _parse_params(args.param)
    problem = make_problem(args.problem)
    if args.problem == "pendulum":
        ref = problem.eval_reference({})
        _write_csv(args.out, "s1,s2", ref)
    elif args.problem == "multiscale":
        ref = problem.eval_reference({})
        _write_csv(args.out, "s", ref)
    elif args.problem == "wave":
        c = params.get("c", 2.0)
        ref = problem.eval_reference({"c": c}).reshape(101, 101)
        _write_grid_csv(args.out, ref, c)
    else:
        nu = params.get("nu", 1e-4)
        u0 = problem.grf.sample(args.seed)
        grid = oracles.burgers_eval_grid(u0, nu)
        _write_grid_csv(args.out, grid, nu)
    print(f"wrote {args.out}")
    return EXIT_OK


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in np.atleast_2d(rows):
            fh.write(",".join(repr(float(v)) for v in np.atleast_1d(row)) + "\n")


def _write_grid_csv(path, grid, param):
    nx, nt = grid.shape
    with open(path, "w") as fh:
        fh.write("nx,nt,param\n")
        fh.write(f"{nx},{nt},{param!r}\n")
        for row in grid:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _parse_chain_manifest(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"chain manifest not found: {path}")
    meta = {"level_params": {}}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("level "):
                head, _, rest = line.partition(":")
                idx = int(head.split()[1])
                eq = {}
                if "[" in rest:
                    inner = rest[rest.index("[") + 1:rest.index("]")]
                    for piece in inner.split(";"):
                        if piece:
                            k, _, v = piece.partition("=")
                            eq[k.strip()] = float(v)
                meta["level_params"][idx] = eq
            elif "=" in line:
                k, _, v = line.partition("=")
                meta[k.strip()] = v.strip()
    return meta


def load_chain(chain_dir):
    """Rebuild a frozen chain from a result directory."""
    meta = _parse_chain_manifest(os.path.join(chain_dir, "chain.txt"))
    problem = make_problem(meta["problem"])
    n_levels = int(meta["levels"])
    seed = int(meta.get("seed", 0))
    level0, _ = nets.network_from_checkpoint(
        os.path.join(chain_dir, "level_000.ckpt"))
    chain = st.StackingChain(problem, level0, seed=seed)
    chain.level0_frozen = True
    chain.level0_equation_params = meta["level_params"].get(0, {})
    for i in range(1, n_levels + 1):
        nl, alpha = nets.network_from_checkpoint(
            os.path.join(chain_dir, f"level_{i:03d}_nl.ckpt"))
        lin, _ = nets.network_from_checkpoint(
            os.path.join(chain_dir, f"level_{i:03d}_lin.ckpt"))
        lvl = st.MultifidelityLevel(
            nl, lin, alpha=alpha if alpha is not None else st.ALPHA_INIT,
            equation_params=meta["level_params"].get(i, {}))
        lvl.frozen = True
        chain.levels.append(lvl)
    return chain, meta


def _cmd_eval(args):
    chain, meta = _parse_and_load(args.chain)
    problem = chain.problem
    if problem.kind == "deeponet":
        snap = cfg_mod.load_config_file(
            os.path.join(args.chain, "config_snapshot.cfg")).resolve()
        chain.eval_test_u = problem.test_set(snap.seed, snap.n_test)
        chain.eval_target_params = training.AnnealSchedule(
            tuple(snap.anneal_entries())).at(snap.levels)
    rows = []
    for level in range(chain.n_levels):
        rows.append((level, training._level_error(chain, level)))
    with open(args.out, "w") as fh:
        fh.write("level,rel_l2_error\n")
        for level, err in rows:
            fh.write(f"{level},{err!r}\n")
    for level, err in rows:
        print(f"level {level}: rel_l2 {err:.6g}")
    return EXIT_OK


def _parse_and_load(chain_dir):
    if not os.path.isdir(chain_dir):
        raise FileNotFoundError(f"chain directory not found: {chain_dir}")
    return load_chain(chain_dir)


def _cmd_report(args):
    tables = []
    for run in args.runs:
        path = os.path.join(run, "errors.csv")
        if not os.path.exists(path):
            raise FileNotFoundError(f"missing error table: {path}")
        errs = []
        with open(path) as fh:
            next(fh)
            for line in fh:
                errs.append(float(line.split(",")[1]))
        tables.append(errs)
    n_levels = min(len(t) for t in tables)
    lines = ["level,mean_rel_l2,std_rel_l2,n_runs"]
    for level in range(n_levels):
        vals = np.array([t[level] for t in tables])
        lines.append(f"{level},{float(vals.mean())!r},{float(vals.std())!r},{len(vals)}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    print(text, end="")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
