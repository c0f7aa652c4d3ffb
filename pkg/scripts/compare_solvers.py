"""Small- and large-batch comparison of the variance-reduced solvers.

For each synthetic spectrum and each batch setting (|S| = 1% n with m = 100,
|S| = 5% n with m = 20) the step size of VR HB Power and VR-PCA is picked
by grid search, then every solver runs under the same data-pass budget.
Writes one CSV trace per (dataset, setting) and prints passes-to-target.

    python3 scripts/compare_solvers.py --out-dir results --seeds 10
"""
import argparse
import os
from dataclasses import replace

import numpy as np

from vrhb.bench import (
    DEFAULT_ETA_GRID,
    ExperimentPlan,
    aggregate,
    default_sizing,
    emit_trace,
    grid_search_eta,
    mean_passes_to_reach,
    run_experiment,
)
from vrhb.data import BENCHMARK_DATASETS, SPECTRUM_B, DatasetSpec, load_dataset
from vrhb.solvers import Momentum, SolverConfig

SETTINGS = {"small-batch": 0.01, "large-batch": 0.05}


def spectrum_with_ratio(ratio, d=10):
    tail = np.linspace(min(0.5, 0.9 * ratio), 0.1 * ratio, d - 2)
    return (1.0, ratio) + tuple(np.round(tail, 12))


def datasets(n, names):
    out = {"spectrum-b": DatasetSpec(spectrum=SPECTRUM_B, n=n, name="spectrum-b")}
    for name in names:
        ratio = BENCHMARK_DATASETS[name]["ratio"]
        out[f"{name}-like"] = DatasetSpec(spectrum=spectrum_with_ratio(ratio), n=n, name=f"{name}-like")
    return out


def run_setting(spec, frac, seeds, budget, target):
    data, ref = load_dataset(spec)
    size, m = default_sizing(data.n, frac)
    base = SolverConfig(batch_size=size, epoch_len=m, epochs=1)
    solvers = [
        ("vr-hb-power", replace(base, momentum=Momentum.oracle())),
        ("vr-power-m", replace(base, momentum=Momentum.oracle())),
        ("vr-pca", base),
    ]
    chosen = []
    for solver, cfg in solvers:
        eta = 1.0
        if solver != "vr-power-m":
            plan = ExperimentPlan(spec, [(solver, cfg)], seeds=seeds, budget=budget)
            eta, _ = grid_search_eta(plan, DEFAULT_ETA_GRID, data, ref)
        chosen.append((solver, replace(cfg, eta=eta)))
    traces = run_experiment(ExperimentPlan(spec, chosen, seeds=seeds, budget=budget), data, ref)
    summary = []
    agg = aggregate(traces)
    for solver, cfg in chosen:
        mine = [t for t in traces if t.solver == solver]
        summary.append((solver, cfg.eta, mean_passes_to_reach(mine, target), agg[solver][-1]["mean_gap"]))
    return traces, summary, (size, m)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--budget", type=float, default=30.0)
    ap.add_argument("--target", type=float, default=1e-6)
    ap.add_argument("--like", default="ijcnn,mnist,rcv1", help="benchmark sets whose lambda2/lambda1 to mimic (comma list)")
    args = ap.parse_args(argv)

    os.makedirs(args.out_dir, exist_ok=True)
    seeds = list(range(args.seeds))
    names = [s for s in args.like.split(",") if s]
    for label, spec in datasets(args.n, names).items():
        for setting, frac in SETTINGS.items():
            traces, summary, (size, m) = run_setting(spec, frac, seeds, args.budget, args.target)
            path = os.path.join(args.out_dir, f"{label}_{setting}.csv")
            emit_trace(traces, "csv", path)
            print(f"{label} {setting} (|S|={size}, m={m}, ratio {spec.spectrum[1]:.4f}) -> {path}")
            for solver, eta, passes, final in summary:
                print(f"    {solver:12s} eta={eta:<6g} passes to {args.target:g}: {passes:7.2f}   final gap {final:.2e}")


if __name__ == "__main__":
    main()
