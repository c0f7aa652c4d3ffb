"""Per-epoch run records shared by the solvers and the benchmark harness."""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

FIELDS = (
    "solver",
    "seed",
    "epoch",
    "data_passes",
    "error_gap",
    "lambda2_hat",
    "contraction",
    "wallclock_s",
)


@dataclass
class TraceRow:
    solver: str
    seed: Optional[int]
    epoch: int
    data_passes: float
    error_gap: Optional[float]
    lambda2_hat: Optional[float]
    contraction: Optional[float]
    wallclock_s: float

    def as_dict(self):
        return {k: getattr(self, k) for k in FIELDS}


@dataclass
class RunTrace:
    """Rows of one solver run; row 0 is the starting point.

    `final` holds the last outer iterate, `diverged` is set when the run was
    cut short by a blow-up, in which case `message` says where.
    """

    solver: str
    seed: Optional[int] = None
    rows: list = field(default_factory=list)
    final: Optional[np.ndarray] = None
    outer_iterates: list = field(default_factory=list)
    diverged: bool = False
    message: str = ""

    def record(self, epoch, data_passes, gap, lambda2_hat=None, wallclock=0.0):
        contraction = None
        if self.rows and gap is not None:
            prev = self.rows[-1].error_gap
            if prev is not None and prev > 0:
                contraction = gap / prev
        self.rows.append(
            TraceRow(self.solver, self.seed, epoch, data_passes, gap, lambda2_hat, contraction, wallclock)
        )

    @property
    def gaps(self):
        return np.array([np.nan if r.error_gap is None else r.error_gap for r in self.rows])

    @property
    def passes(self):
        return np.array([r.data_passes for r in self.rows])

    @property
    def lambda2_hats(self):
        return [r.lambda2_hat for r in self.rows]

    def passes_to_reach(self, target):
        """Data passes at the first row whose gap is <= target, or inf."""
        for r in self.rows:
            if r.error_gap is not None and r.error_gap <= target:
                return r.data_passes
        return float("inf")

    def __len__(self):
        return len(self.rows)
