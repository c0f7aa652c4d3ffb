"""Experiment harness: solver x seed runs, step-size grid search, trace I/O."""
import csv
import io
import json
import math
import os
import tempfile
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .data import DatasetSpec, load_dataset
from .errors import DivergenceError, NoViableStepSizeError
from .matrix import normalize
from .solvers import (
    power_momentum_run,
    power_run,
    resolve_beta,
    vr_hb_power_run,
    vr_pca_run,
    vr_power_m_run,
)
from .trace import FIELDS, RunTrace, TraceRow

DEFAULT_ETA_GRID = (0.005, 0.01, 0.05, 0.1, 0.25, 0.5, 1.0)
SOLVER_IDS = ("power", "power-m", "vr-pca", "vr-power-m", "vr-hb-power")


def default_sizing(n, batch_frac):
    """(|S|, m) with |S| = max(1, round(frac * n)) and m * |S| = n (m >= 1)."""
    size = max(1, int(round(batch_frac * n)))
    size = min(size, n)
    return size, max(1, int(round(n / size)))


def epoch_cost(solver, config, n):
    """Data passes consumed by one epoch (or iteration, for the full-batch solvers)."""
    if solver in ("power", "power-m"):
        return 1.0
    inner = config.epoch_len if solver == "vr-pca" else config.epoch_len - 1
    return 1.0 + inner * config.batch_size / n


@dataclass
class ExperimentPlan:
    """What to run: one dataset, a list of (solver id, config), seeds.

    `budget` caps data passes; each solver runs as many whole epochs as fit.
    Without a budget the configs' own epoch counts are used.  The starting
    vector is drawn once from `init_seed` and shared by every run.
    """

    dataset: DatasetSpec
    solvers: list
    seeds: list = field(default_factory=lambda: [0])
    budget: Optional[float] = None
    init_seed: int = 0

    def __post_init__(self):
        if not self.solvers:
            raise ValueError("plan needs at least one solver")
        if not self.seeds:
            raise ValueError("plan needs at least one seed")
        for sid, _ in self.solvers:
            if sid not in SOLVER_IDS:
                raise ValueError(f"unknown solver {sid!r}")


def initial_vector(d, seed):
    return normalize(np.random.default_rng(seed).standard_normal(d))


def run_solver(solver, data, w0, config, ref):
    """One run; divergence yields the truncated trace flagged ``diverged``."""
    try:
        if solver == "power":
            trace = power_run(data, w0, config.epochs, ref)
        elif solver == "power-m":
            if config.momentum.kind == "adaptive":
                raise ValueError("power-m does not support adaptive momentum")
            beta = resolve_beta(config.momentum, 1.0, ref)
            trace = power_momentum_run(data, w0, beta, config.epochs, ref)
        elif solver == "vr-pca":
            trace = vr_pca_run(data, w0, config, ref)
        elif solver == "vr-power-m":
            trace = vr_power_m_run(data, w0, config, ref)
        elif solver == "vr-hb-power":
            trace = vr_hb_power_run(data, w0, config, ref)
        else:
            raise ValueError(f"unknown solver {solver!r}")
    except DivergenceError as err:
        trace = getattr(err, "trace", None) or RunTrace(solver, diverged=True, message=str(err))
    trace.seed = config.seed
    for row in trace.rows:
        row.seed = config.seed
    return trace


def _budgeted(solver, config, n, budget):
    if budget is None:
        return config
    epochs = int(math.floor(budget / epoch_cost(solver, config, n) + 1e-9))
    return replace(config, epochs=max(1, epochs))


def run_experiment(plan, data=None, ref=None):
    """Run every solver for every seed; returns a list of RunTrace.

    `data`/`ref` may be passed to skip loading the dataset again.
    """
    if data is None:
        data, ref = load_dataset(plan.dataset)
    w0 = initial_vector(data.d, plan.init_seed)
    traces = []
    for solver, config in plan.solvers:
        config = _budgeted(solver, config, data.n, plan.budget)
        for seed in plan.seeds:
            traces.append(run_solver(solver, data, w0, replace(config, seed=int(seed)), ref))
    return traces


def aggregate(traces):
    """Mean and sd of the error gap per (solver, epoch), over seeds only."""
    groups = defaultdict(lambda: defaultdict(list))
    for tr in traces:
        for row in tr.rows:
            if row.error_gap is not None:
                groups[tr.solver][row.epoch].append((row.data_passes, row.error_gap))
    out = {}
    for solver, by_epoch in groups.items():
        rows = []
        for epoch in sorted(by_epoch):
            passes, gaps = map(np.array, zip(*by_epoch[epoch]))
            rows.append(
                dict(epoch=epoch, data_passes=float(passes.mean()), mean_gap=float(gaps.mean()),
                     sd_gap=float(gaps.std()), runs=len(gaps))
            )
        out[solver] = rows
    return out


def mean_passes_to_reach(traces, target):
    """Data passes at the first epoch where the seed-mean gap is <= target."""
    for row in next(iter(aggregate(traces).values()), []):
        if row["mean_gap"] <= target:
            return row["data_passes"]
    return float("inf")


def grid_search_eta(plan, eta_grid=DEFAULT_ETA_GRID, data=None, ref=None, solver_index=0):
    """Pick the eta with the smallest seed-mean final gap for one solver.

    Grid points where any seed diverges are not viable.  Ties go to the
    smaller eta.  Returns (best_eta, table) where table rows hold eta, the
    mean final gap and the number of diverged seeds.
    """
    if not eta_grid:
        raise ValueError("empty step-size grid")
    if any(not 0 < e <= 1 for e in eta_grid):
        raise ValueError("step sizes must lie in (0, 1]")
    if data is None:
        data, ref = load_dataset(plan.dataset)
    solver, base = plan.solvers[solver_index]
    table = []
    best, best_gap = None, math.inf
    for eta in sorted(eta_grid):
        sub = replace(plan, solvers=[(solver, replace(base, eta=eta))])
        traces = run_experiment(sub, data, ref)
        diverged = sum(tr.diverged for tr in traces)
        gap = float(np.mean([tr.rows[-1].error_gap for tr in traces])) if not diverged else math.inf
        table.append(dict(eta=eta, mean_final_gap=gap, diverged=diverged))
        if gap < best_gap:
            best, best_gap = eta, gap
    if best is None:
        raise NoViableStepSizeError(f"all step sizes in {list(eta_grid)} diverged")
    return best, table


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _records(traces):
    for tr in traces:
        for row in tr.rows:
            yield row.as_dict()


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".trace-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_trace(traces, fmt, path):
    """Write all rows as CSV or JSON (write-then-rename)."""
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(FIELDS)
        for rec in _records(traces):
            writer.writerow([_fmt(rec[k]) for k in FIELDS])
        text = buf.getvalue()
    elif fmt == "json":
        text = json.dumps(list(_records(traces)), indent=1) + "\n"
    else:
        raise ValueError(f"unknown trace format {fmt!r}")
    _atomic_write(path, text)


def _parse_value(key, text):
    if text == "" or text is None:
        return None
    if key == "solver":
        return text
    if key in ("seed", "epoch"):
        return int(text)
    return float(text)


def read_trace(path):
    """Load rows written by :func:`emit_trace` (format from the extension)."""
    with open(path, newline="") as fh:
        if path.endswith(".json"):
            recs = json.load(fh)
        else:
            recs = [{k: _parse_value(k, v) for k, v in row.items()} for row in csv.DictReader(fh)]
    return [TraceRow(**{k: rec.get(k) for k in FIELDS}) for rec in recs]
