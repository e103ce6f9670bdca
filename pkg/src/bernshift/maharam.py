"""One-sided skew product (x, y) -> (sigma x, y + log T'(x)).

Heights are real numbers with an accumulated error budget; after n steps
the height equals log T^{n'}(x_0).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace

import numpy as np

from .cocycle import DEFAULT_TOL, log_rn_shift, log_rn_shift_batch, shift_certified_index
from .errors import HorizonTooShort, PreconditionError
from .mc import map_blocks
from .measure import ProductMeasure, Word, sample_matrix


@dataclass(frozen=True)
class SkewState:
    base: Word
    shift_offset: int = 0
    height: float = 0.0
    err_accum: float = 0.0

    @property
    def current(self) -> Word:
        return self.base.shifted(self.shift_offset)


def skew_step(m: ProductMeasure, s: SkewState, tol: float = DEFAULT_TOL) -> SkewState:
    rest = s.current
    if rest.horizon < 1:
        raise HorizonTooShort("horizon exhausted")
    step = log_rn_shift(m, rest, 1, tol)
    return replace(
        s,
        shift_offset=s.shift_offset + 1,
        height=s.height + step.value,
        err_accum=s.err_accum + step.err_bound,
    )


def skew_orbit(m: ProductMeasure, x: Word, steps: int, tol: float = DEFAULT_TOL) -> list[SkewState]:
    s = SkewState(x)
    out = [s]
    for _ in range(steps):
        s = skew_step(m, s, tol)
        out.append(s)
    return out


@dataclass(frozen=True)
class RecurrenceReport:
    targets: tuple
    epsilon: float
    samples: int
    steps: int
    seed: int
    horizon: int
    hit_fraction: tuple
    mean_first_hit: tuple  # None where no sample hit
    final_quantiles: dict  # q05, q25, median, q75, q95 of the last height
    max_err_bound: float

    def to_dict(self):
        return {
            "targets": [{"t": t, "hit_fraction": h, "mean_first_hit": f}
                        for t, h, f in zip(self.targets, self.hit_fraction, self.mean_first_hit)],
            "epsilon": self.epsilon,
            "samples": self.samples,
            "steps": self.steps,
            "seed": self.seed,
            "horizon": self.horizon,
            "final_quantiles": self.final_quantiles,
            "max_err_bound": self.max_err_bound,
        }


def _heights(m, X, steps, tol):
    return log_rn_shift_batch(m, X, np.arange(1, steps + 1), tol)


def recurrence_stats(
    m: ProductMeasure,
    targets,
    epsilon: float,
    samples: int,
    steps: int,
    seed: int,
    tol: float = DEFAULT_TOL,
    block: int = 256,
    workers: int = 1,
) -> RecurrenceReport:
    """Share of orbits whose height enters (t - eps, t + eps) within ``steps`` steps."""
    if epsilon <= 0 or samples < 1 or steps < 1:
        raise PreconditionError("epsilon, samples and steps must be positive")
    targets = tuple(float(t) for t in targets)
    H = max(steps, shift_certified_index(m, steps, tol))
    T = np.asarray(targets)

    def run(i, size, rng):
        X = sample_matrix(m, H, size, rng)
        h, errs = _heights(m, X, steps, tol)
        first = np.full((size, T.size), -1)
        for j, t in enumerate(T):
            inside = np.abs(h - t) < epsilon
            any_hit = inside.any(axis=1)
            first[any_hit, j] = np.argmax(inside[any_hit], axis=1) + 1
        return first, h[:, -1], float(errs.max())

    parts = map_blocks(run, samples, seed, block, workers)
    first = np.concatenate([p[0] for p in parts])
    last = np.concatenate([p[1] for p in parts])
    hit = first > 0
    frac = tuple(float(v) for v in hit.mean(axis=0))
    mean_first = tuple(
        float(first[hit[:, j], j].mean()) if hit[:, j].any() else None for j in range(T.size)
    )
    q = np.quantile(last, [0.05, 0.25, 0.5, 0.75, 0.95])
    return RecurrenceReport(
        targets=targets,
        epsilon=epsilon,
        samples=samples,
        steps=steps,
        seed=seed,
        horizon=H,
        hit_fraction=frac,
        mean_first_hit=mean_first,
        final_quantiles={k: float(v) for k, v in zip(("q05", "q25", "median", "q75", "q95"), q)},
        max_err_bound=max(p[2] for p in parts),
    )


def height_traces(m: ProductMeasure, samples: int, steps: int, seed: int, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Heights after 1..steps steps, one row per sampled orbit."""
    H = max(steps, shift_certified_index(m, steps, tol))
    parts = map_blocks(lambda i, size, rng: _heights(m, sample_matrix(m, H, size, rng), steps, tol)[0], samples, seed, 256)
    return np.concatenate(parts)


def traces_to_csv(heights: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sample_id", "step", "height"])
    for i, row in enumerate(heights):
        w.writerow([i, 0, repr(0.0)])
        for j, v in enumerate(row, start=1):
            w.writerow([i, j, repr(float(v))])
    return buf.getvalue()


def spread(heights: np.ndarray, lo: float = 0.05, hi: float = 0.95) -> np.ndarray:
    """Inter-quantile spread of the heights at every step."""
    q = np.quantile(heights, [lo, hi], axis=0)
    return q[1] - q[0]

