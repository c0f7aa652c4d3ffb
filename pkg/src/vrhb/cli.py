"""``vrhb`` command line: ``run``, ``rate`` and ``check``."""
import argparse
import sys
from dataclasses import replace

from . import checks, rates
from .bench import (
    DEFAULT_ETA_GRID,
    SOLVER_IDS,
    ExperimentPlan,
    aggregate,
    default_sizing,
    emit_trace,
    grid_search_eta,
    mean_passes_to_reach,
    run_experiment,
)
from .data import DatasetSpec, load_dataset
from .solvers import Momentum, SolverConfig

SUMMARY_TARGET = 1e-6


def read_config(path):
    """``key = value`` lines; ``#`` starts a comment.  Keys use dashes or underscores."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def parse_seeds(text):
    """``"10"`` means seeds 0..9; ``"3,7,11"`` (any comma) is an explicit list."""
    text = str(text).strip()
    if "," in text:
        return [int(s) for s in text.split(",") if s.strip()]
    count = int(text)
    if count < 1:
        raise ValueError("seed count must be >= 1")
    return list(range(count))


def _run_parser(sub):
    p = sub.add_parser("run", help="run solvers on a dataset and write a trace")
    p.add_argument("--config", help="file of 'key = value' lines; flags override it")
    p.add_argument("--data", help="LIBSVM path or synthetic:<spec>")
    p.add_argument("--preproc", choices=("standardize", "minmax", "none"), default="none")
    p.add_argument("--solver", default="vr-hb-power", help=f"comma list of {', '.join(SOLVER_IDS)}")
    p.add_argument("--eta", default="grid", help="step size or 'grid'")
    p.add_argument("--momentum", default="oracle", help="none | fixed:<beta> | oracle | adaptive")
    p.add_argument("--batch-frac", type=float, default=0.05)
    p.add_argument("--epoch-len", default="auto", help="inner steps m, or 'auto' for m*|S| = n")
    p.add_argument("--epochs", type=int, default=15)
    p.add_argument("--seeds", default="10", help="count, or comma list of seeds")
    p.add_argument("--budget", type=float, help="data-pass budget (overrides --epochs)")
    p.add_argument("--init-seed", type=int, default=0, help="seed of the shared start vector")
    p.add_argument("--out", help="trace path")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    return p


def build_parser():
    parser = argparse.ArgumentParser(prog="vrhb", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    parser.commands = {"run": _run_parser(sub)}

    r = sub.add_parser("rate", help="print the deterministic rate quantities")
    r.add_argument("--lambda1", type=float, required=True)
    r.add_argument("--lambda2", type=float, required=True)
    r.add_argument("--eta", type=float, required=True)
    r.add_argument("--m", type=int, required=True)

    c = sub.add_parser("check", help="run the randomized identity and bound suites")
    c.add_argument("--seed", type=int, default=0)
    parser.commands.update(rate=r, check=c)
    return parser


def _apply_config(parser, argv):
    """Re-parse with file values as defaults so explicit flags still win."""
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        sub = parser.commands[args.command]
        known = {a.dest for a in sub._actions}
        values = read_config(args.config)
        unknown = sorted(set(values) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        sub.set_defaults(**values)
        args = parser.parse_args(argv)
    return args


def _solver_configs(args, n):
    size, auto_m = default_sizing(n, args.batch_frac)
    m = auto_m if str(args.epoch_len) == "auto" else int(args.epoch_len)
    momentum = Momentum.parse(str(args.momentum))
    epochs = int(args.epochs)
    out = []
    for solver in [s.strip() for s in str(args.solver).split(",") if s.strip()]:
        if solver not in SOLVER_IDS:
            raise ValueError(f"unknown solver {solver!r}")
        mom = momentum
        if solver in ("power", "vr-pca"):
            mom = Momentum.none()
        elif solver == "power-m" and mom.kind == "adaptive":
            raise ValueError("power-m needs none, fixed or oracle momentum")
        out.append((solver, SolverConfig(eta=1.0, momentum=mom, batch_size=size, epoch_len=m, epochs=epochs)))
    if not out:
        raise ValueError("no solver given")
    return out


def _choose_eta(args, plan, data, ref, index):
    solver, config = plan.solvers[index]
    if solver in ("power", "power-m", "vr-power-m"):
        return 1.0
    if str(args.eta) != "grid":
        return float(args.eta)
    if config.momentum.kind == "adaptive":
        # AM reuses the step size selected for oracle momentum
        config = replace(config, momentum=Momentum.oracle())
    sub = replace(plan, solvers=[(solver, config)])
    eta, table = grid_search_eta(sub, DEFAULT_ETA_GRID, data, ref)
    for row in table:
        print(f"  grid {solver} eta={row['eta']:g}: mean final gap {row['mean_final_gap']:.3e}"
              f" (diverged {row['diverged']})")
    return eta


def cmd_run(args):
    if not args.data:
        raise ValueError("--data is required")
    if not args.out:
        raise ValueError("--out is required")
    spec = DatasetSpec.parse(args.data, args.preproc)
    data, ref = load_dataset(spec)
    plan = ExperimentPlan(
        dataset=spec,
        solvers=_solver_configs(args, data.n),
        seeds=parse_seeds(args.seeds),
        budget=args.budget,
        init_seed=int(args.init_seed),
    )
    print(f"data {spec.name}: n={data.n} d={data.d} lambda1={ref.lambda1:.6g} lambda2={ref.lambda2:.6g}")
    chosen = []
    for i, (solver, config) in enumerate(plan.solvers):
        eta = _choose_eta(args, plan, data, ref, i)
        chosen.append((solver, replace(config, eta=eta)))
    plan = replace(plan, solvers=chosen)
    traces = run_experiment(plan, data, ref)
    emit_trace(traces, args.format, args.out)

    agg = aggregate(traces)
    for solver, config in plan.solvers:
        mine = [t for t in traces if t.solver == solver]
        rows = agg.get(solver, [])
        final = rows[-1]["mean_gap"] if rows else float("nan")
        diverged = sum(t.diverged for t in mine)
        print(
            f"{solver}: eta={config.eta:g} momentum={config.momentum} |S|={config.batch_size} "
            f"m={config.epoch_len} final mean gap {final:.3e}, passes to {SUMMARY_TARGET:g}: "
            f"{mean_passes_to_reach(mine, SUMMARY_TARGET):.4g}, diverged {diverged}/{len(mine)}"
        )
    print(f"wrote {len(traces)} trace(s) to {args.out}")
    return 0


def cmd_rate(args):
    p = rates.RateParams(args.eta, args.lambda1, args.lambda2, args.m)
    print(f"gamma  = {p.gamma:.17g}")
    print(f"g      = {p.g:.17g}")
    print(f"alpha1 = {p.alpha1:.17g}")
    print(f"alpha2 = {p.alpha2:.17g}")
    print(f"beta   = {p.beta:.17g}")
    return 0


def cmd_check(args):
    results = checks.run_all(seed=args.seed)
    for res in results:
        print(res.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


COMMANDS = {"run": cmd_run, "rate": cmd_rate, "check": cmd_check}


def main(argv=None):
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        return COMMANDS[args.command](args)
    except (ValueError, OSError, ArithmeticError, RuntimeError) as err:
        print(f"vrhb: error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
