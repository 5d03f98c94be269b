"""Grid calibration of friction coefficient and tendon stretch compliance.

The search runs on a fixed lattice ``lo + k * step`` for each parameter. It
starts from a coarse sub-lattice and repeatedly halves the stride around the
incumbent, so the result always lies on the full-resolution lattice. Ties are
broken toward the lowest ``mu``, then the lowest compliance.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import DomainError
from .geometry import RobotGeometry, frame_origins
from .io import GroundTruthShape, tip_error
from .statics import ActuationCommand, SolverConfig, solve_statics

_TIE = 1e-15


@dataclass(frozen=True)
class SearchRanges:
    mu: tuple[float, float] = (0.0, 0.3)
    stretch_compliance: tuple[float, float] = (0.0, 1e-3)
    mu_step: float = 0.01
    stretch_step: float = 5e-5
    coarse_stride: int = 8

    def __post_init__(self):
        for (lo, hi), step, name in ((self.mu, self.mu_step, "mu"),
                                     (self.stretch_compliance, self.stretch_step, "stretch")):
            if not (np.isfinite(lo) and np.isfinite(hi) and 0 <= lo <= hi):
                raise DomainError(f"{name} range must be bounded with 0 <= lo <= hi")
            if not step > 0:
                raise DomainError(f"{name} step must be positive")
        if self.coarse_stride < 1:
            raise DomainError("coarse_stride must be >= 1")

    def mu_value(self, i: int) -> float:
        return self.mu[0] + i * self.mu_step

    def stretch_value(self, j: int) -> float:
        return self.stretch_compliance[0] + j * self.stretch_step

    @property
    def shape(self) -> tuple[int, int]:
        nm = int(math.floor((self.mu[1] - self.mu[0]) / self.mu_step + 1e-9)) + 1
        ns = int(math.floor((self.stretch_compliance[1] - self.stretch_compliance[0])
                            / self.stretch_step + 1e-9)) + 1
        return nm, ns


@dataclass
class CalibrationResult:
    mu: float
    stretch_compliance: float
    mean_error: float
    sample_errors: np.ndarray
    evaluations: int


def sample_errors(geom: RobotGeometry, dataset, mu: float, stretch: float,
                  config: SolverConfig | None = None) -> np.ndarray:
    """Tip error of every sample for one parameter pair."""
    cfg = replace(config or SolverConfig(), mu=mu, stretch_compliance=stretch)
    out = np.empty(len(dataset))
    for k, (command, truth) in enumerate(dataset):
        res = solve_statics(geom, command, cfg)
        out[k] = tip_error(frame_origins(geom, res.q_star), truth, geom.total_length)[0]
    return out


def _task(args):
    geom, dataset, mu, stretch, config = args
    return sample_errors(geom, dataset, mu, stretch, config)


def calibrate(geom: RobotGeometry, dataset: Sequence[tuple[ActuationCommand, GroundTruthShape]],
              ranges: SearchRanges | None = None, config: SolverConfig | None = None,
              workers: int = 1) -> CalibrationResult:
    """Find ``(mu, stretch_compliance)`` minimizing the mean tip error."""
    if len(dataset) == 0:
        raise DomainError("calibration dataset is empty")
    rng = ranges or SearchRanges()
    cfg = config or SolverConfig()
    nm, ns = rng.shape
    cache: dict[tuple[int, int], np.ndarray] = {}

    def evaluate(points):
        todo = sorted(p for p in set(points) if p not in cache)
        args = [(geom, dataset, rng.mu_value(i), rng.stretch_value(j), cfg) for i, j in todo]
        if workers > 1 and len(args) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_task, args))
        else:
            results = [_task(a) for a in args]
        cache.update(zip(todo, results))

    def better(p, best):
        e, eb = float(np.mean(cache[p])), float(np.mean(cache[best]))
        return e < eb - _TIE or (abs(e - eb) <= _TIE and p < best)

    stride = max(1, rng.coarse_stride)
    grid_m = sorted(set(range(0, nm, stride)) | {nm - 1})
    grid_s = sorted(set(range(0, ns, stride)) | {ns - 1})
    points = [(i, j) for i in grid_m for j in grid_s]
    evaluate(points)
    best = min(points)
    for p in points:
        if better(p, best):
            best = p
    while stride > 1:
        stride //= 2
        bi, bj = best
        window = [(i, j)
                  for i in range(bi - 2 * stride, bi + 2 * stride + 1, stride) if 0 <= i < nm
                  for j in range(bj - 2 * stride, bj + 2 * stride + 1, stride) if 0 <= j < ns]
        evaluate(window)
        for p in sorted(window):
            if better(p, best):
                best = p
    errs = cache[best]
    return CalibrationResult(rng.mu_value(best[0]), rng.stretch_value(best[1]),
                             float(np.mean(errs)), errs.copy(), len(cache))
