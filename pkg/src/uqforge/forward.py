"""Forward propagation of uncertainty and the 1-D random-walk sampler."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .domain import PriorSpec
from .errors import InvalidArgumentError, InvalidStartError, QoiEvaluationError
from .sequence import SampleSequence, correlation_matrix, mean_and_covariance

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class QoiMap:
    input_dim: int
    output_dim: int
    eval: Callable[[np.ndarray], object]

    def __call__(self, x):
        return np.atleast_1d(np.asarray(self.eval(x), dtype=float))


def _evaluate_rows(qoi: QoiMap, x: np.ndarray, start: int) -> np.ndarray:
    out = np.empty((x.shape[0], qoi.output_dim))
    for k, row in enumerate(x):
        v = qoi(row)
        if v.shape != (qoi.output_dim,):
            raise InvalidArgumentError(f"QoI returned shape {v.shape}, expected ({qoi.output_dim},)")
        if not np.all(np.isfinite(v)):
            raise QoiEvaluationError(start + k, v.tolist() if v.size > 1 else float(v[0]))
        out[k] = v
    return out


def evaluate_qoi(qoi: QoiMap, x: np.ndarray, n_workers: int = 1) -> np.ndarray:
    """Evaluate ``qoi`` row by row; output row ``k`` always matches input row ``k``."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[1] != qoi.input_dim:
        raise InvalidArgumentError(f"QoI expects dimension {qoi.input_dim}, samples have {x.shape[1]}")
    if n_workers <= 1 or x.shape[0] < 2 * n_workers:
        return _evaluate_rows(qoi, x, 0)
    cuts = np.linspace(0, x.shape[0], n_workers + 1).astype(int)
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        parts = list(pool.map(lambda ab: _evaluate_rows(qoi, x[ab[0]:ab[1]], ab[0]), zip(cuts[:-1], cuts[1:])))
    return np.vstack(parts)


def propagate(source, qoi: QoiMap, count: int | None = None, rng: np.random.Generator | None = None,
              n_workers: int = 1) -> tuple[SampleSequence, SampleSequence]:
    """Push a chain, or ``count`` prior draws, through ``qoi``.

    Returns the parameter sequence and the paired QoI sequence.
    """
    if isinstance(source, PriorSpec):
        if count is None or count < 1 or rng is None:
            raise InvalidArgumentError("sampling a prior needs a positive count and an rng")
        params = SampleSequence(source.sample(rng, count))
    elif isinstance(source, SampleSequence):
        params = source
    else:
        params = SampleSequence(np.asarray(source, dtype=float))
    q = evaluate_qoi(qoi, params.samples, n_workers)
    return params, SampleSequence(q, origin_worker=params.origin_worker)


def projectile_distance(g: float, v0: float = 5.0, alpha: float = math.pi / 4, h0: float = 0.0) -> float:
    """Horizontal range of a projectile launched at speed ``v0`` and angle ``alpha`` from height ``h0``."""
    if not g > 0:
        raise InvalidArgumentError(f"gravity must be positive, got {g}")
    if h0 < 0:
        raise InvalidArgumentError("launch height must be non-negative")
    vs = v0 * math.sin(alpha)
    return (v0 * math.cos(alpha) / g) * (vs + math.sqrt(vs * vs + 2.0 * g * h0))


def param_qoi_joint_stats(params, qois) -> tuple[np.ndarray, np.ndarray]:
    p = params.samples if isinstance(params, SampleSequence) else np.asarray(params, dtype=float)
    q = qois.samples if isinstance(qois, SampleSequence) else np.asarray(qois, dtype=float)
    p = p[:, None] if p.ndim == 1 else p
    q = q[:, None] if q.ndim == 1 else q
    if p.shape[0] != q.shape[0]:
        raise InvalidArgumentError(f"{p.shape[0]} parameter samples vs {q.shape[0]} QoI samples")
    joint = np.hstack([p, q])
    _, cov = mean_and_covariance(joint)
    return cov, correlation_matrix(joint)


# ---------------------------------------------------------------------------
# Random-walk Monte Carlo
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RandomWalkOptions:
    x0: float
    delta: float
    n_trials: int = 1
    n_steps: int = 1000

    def __post_init__(self):
        if not self.delta > 0:
            raise InvalidArgumentError("delta must be positive")
        if self.n_trials < 1 or self.n_steps < 1:
            raise InvalidArgumentError("n_trials and n_steps must be positive")


@dataclass
class RandomWalkResult:
    samples: SampleSequence
    accepted: int
    total: int
    per_trial_ratio: np.ndarray

    @property
    def acceptance_ratio(self) -> float:
        return self.accepted / self.total


def random_walk_mc(p: Callable[[float], float], options: RandomWalkOptions, rng: np.random.Generator) -> RandomWalkResult:
    """Uniform-step Metropolis walk on an unnormalized 1-D density.

    Each of the ``n_trials`` restarts begins at ``x0`` and takes ``n_steps``
    steps; all steps are returned in order.
    """
    x0 = float(options.x0)
    p0 = float(p(x0))
    if not p0 > 0:
        raise InvalidStartError(f"density is zero at the start point {x0}")
    out = np.empty(options.n_trials * options.n_steps)
    ratios = np.empty(options.n_trials)
    accepted = 0
    k = 0
    for trial in range(options.n_trials):
        x, px, acc = x0, p0, 0
        steps = rng.uniform(-options.delta, options.delta, options.n_steps)
        coins = rng.random(options.n_steps)
        for step, r in zip(steps, coins):
            y = x + step
            py = float(p(y))
            w = py / px
            if w >= 1.0 or r < w:
                x, px = y, py
                acc += 1
            out[k] = x
            k += 1
        ratios[trial] = acc / options.n_steps
        accepted += acc
    return RandomWalkResult(SampleSequence(out), accepted, k, ratios)


def tune_delta(p: Callable[[float], float], x0: float, rng: np.random.Generator, target: float = 0.5,
               delta0: float = 1.0, n_steps: int = 2000, rounds: int = 30, tol: float = 0.02) -> float:
    """Adjust the step size until the acceptance ratio is near ``target``.

    Works on ``log(delta)`` with a shrinking multiplicative correction.
    """
    delta = float(delta0)
    start = float(x0)
    for k in range(rounds):
        res = random_walk_mc(p, RandomWalkOptions(start, delta, 1, n_steps), rng)
        ratio = res.acceptance_ratio
        start = float(res.samples.samples[-1, 0])
        if abs(ratio - target) <= tol:
            break
        gain = 1.0 / math.sqrt(k + 1.0)
        delta *= math.exp(gain * (ratio - target) * 2.0)
    log.info("tuned random-walk step to %.6g", delta)
    return delta
