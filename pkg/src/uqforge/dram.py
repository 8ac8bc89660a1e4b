"""Delayed-rejection adaptive Metropolis (DRAM) chains.

Proposals at every stage are Gaussian and centred on the current position;
stage ``i`` uses covariance ``gamma_i * C1`` where ``C1`` is the master
covariance that the adaptive step keeps re-estimating from the chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import linalg

from .domain import TargetDensity, cholesky_lower
from .errors import InvalidArgumentError, InvalidStartError, UnsupportedOptionError
from .sequence import SampleSequence

NEG_INF = -math.inf


def default_sd(dim: int) -> float:
    return 2.4 ** 2 / dim


@dataclass
class DramOptions:
    n_pos: int
    initial_position: np.ndarray
    initial_proposal_cov: np.ndarray
    n_stages: int = 1
    stage_scales: Sequence[float] | None = None
    s_d: float | None = None
    epsilon: float = 1e-5
    n0: int = 0
    adapt_interval: int = 0
    out_of_bounds_in_chain: bool = True

    def __post_init__(self):
        self.initial_position = np.atleast_1d(np.asarray(self.initial_position, dtype=float))
        d = self.initial_position.shape[0]
        self.initial_proposal_cov = np.atleast_2d(np.asarray(self.initial_proposal_cov, dtype=float))
        if self.initial_proposal_cov.shape != (d, d):
            raise InvalidArgumentError(
                f"proposal covariance shape {self.initial_proposal_cov.shape} does not match dimension {d}"
            )
        if self.n_pos < 2:
            raise InvalidArgumentError("n_pos must be at least 2")
        if self.n_stages < 1:
            raise InvalidArgumentError("n_stages must be at least 1")
        if self.stage_scales is None:
            self.stage_scales = [1.0] * self.n_stages
        scales = [float(s) for s in self.stage_scales]
        if len(scales) != self.n_stages:
            raise InvalidArgumentError(f"expected {self.n_stages} stage scales, got {len(scales)}")
        if scales[0] != 1.0 or any(b < a for a, b in zip(scales, scales[1:])):
            raise InvalidArgumentError("stage scales must start at 1 and be non-decreasing")
        self.stage_scales = scales
        if self.s_d is None:
            self.s_d = default_sd(d)
        if not self.s_d > 0 or not self.epsilon > 0:
            raise InvalidArgumentError("s_d and epsilon must be positive")
        if self.n0 < 0 or self.adapt_interval < 0:
            raise InvalidArgumentError("n0 and adapt_interval must be non-negative")
        cholesky_lower(self.initial_proposal_cov)

    @property
    def dim(self):
        return self.initial_position.shape[0]


@dataclass
class DramResult:
    chain: SampleSequence
    accept_counts: np.ndarray
    n_sweeps: int
    out_of_support: int
    final_cov: np.ndarray
    n_adaptations: int = 0

    @property
    def acceptance_rate(self) -> float:
        return float(self.accept_counts.sum()) / self.n_sweeps if self.n_sweeps else 0.0


# ---------------------------------------------------------------------------
# Building blocks
# ---------------------------------------------------------------------------


def log_proposal_density(frm, to, cov) -> float:
    """Unnormalized Gaussian log-kernel ``-0.5 (to-frm)^T cov^-1 (to-frm)``."""
    chol = cholesky_lower(cov)
    z = linalg.solve_triangular(chol, np.atleast_1d(np.asarray(to, float) - np.asarray(frm, float)), lower=True)
    return -0.5 * float(z @ z)


def alpha_first(logpi_a: float, logpi_x: float, logq_ax: float = 0.0, logq_xa: float = 0.0) -> float:
    if logpi_x == NEG_INF:
        return 0.0
    return math.exp(min(0.0, (logpi_x - logpi_a) + (logq_xa - logq_ax)))


def am_update(history, s_d: float, epsilon: float) -> np.ndarray:
    """``s_d * cov(history) + s_d * epsilon * I`` (sample covariance, divisor n-1)."""
    x = history.samples if isinstance(history, SampleSequence) else np.asarray(history, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, d = x.shape
    if n < 1:
        raise InvalidArgumentError("adaptation needs at least one sample")
    cov = np.zeros((d, d)) if n < 2 else np.atleast_2d(np.cov(x, rowvar=False, ddof=1))
    return s_d * cov + s_d * epsilon * np.eye(d)


def stage_covariance(master, i: int, scales: Sequence[float]) -> np.ndarray:
    if not 1 <= i <= len(scales):
        raise InvalidArgumentError(f"stage {i} outside 1..{len(scales)}")
    return scales[i - 1] * np.asarray(master, dtype=float)


class _StageAlpha:
    """Delayed-rejection acceptance probabilities for one sweep.

    ``points[0]`` is the current position and ``points[1:]`` the candidates
    proposed so far.  Paths are tuples of indices into ``points``; results are
    memoized because reversed sub-paths are shared between stages.
    """

    def __init__(self, points, logpis, chol_master, scales):
        self.points = points
        self.logpis = logpis
        self.chol = chol_master
        self.scales = scales
        self._alpha = {}
        self._q = {}

    def _sqdist(self, a, b):
        key = (a, b) if a < b else (b, a)
        v = self._q.get(key)
        if v is None:
            z = linalg.solve_triangular(self.chol, self.points[b] - self.points[a], lower=True)
            v = float(z @ z)
            self._q[key] = v
        return v

    def logq(self, stage, a, b):
        return -0.5 * self._sqdist(a, b) / self.scales[stage - 1]

    def alpha(self, path) -> float:
        path = tuple(path)
        cached = self._alpha.get(path)
        if cached is not None:
            return cached
        j = len(path) - 1
        first, last = path[0], path[-1]
        if self.logpis[last] == NEG_INF:
            val = 0.0
        else:
            log_ratio = self.logpis[last] - self.logpis[first]
            for k in range(1, j + 1):
                log_ratio += self.logq(k, last, path[j - k]) - self.logq(k, first, path[k])
            val = None
            for k in range(1, j):
                num = self.alpha(path[::-1][: k + 1])
                den = self.alpha(path[: k + 1])
                if num >= 1.0 or den >= 1.0:
                    val = 0.0
                    break
                log_ratio += math.log1p(-num) - math.log1p(-den)
            if val is None:
                val = math.exp(min(0.0, log_ratio))
        self._alpha[path] = val
        return val


def alpha_stage(points, log_targets, master_cov, scales) -> float:
    """Acceptance probability of the last point of ``points`` at stage ``len(points)-1``.

    ``points[0]`` is the current state, ``points[1:]`` the successive
    candidates; ``log_targets`` are the matching log-densities.
    """
    pts = [np.atleast_1d(np.asarray(p, dtype=float)) for p in points]
    if len(pts) < 2 or len(pts) - 1 > len(scales):
        raise InvalidArgumentError("path length must be between 2 and n_stages + 1")
    calc = _StageAlpha(pts, [float(v) for v in log_targets], cholesky_lower(master_cov), list(scales))
    return calc.alpha(range(len(pts)))


# ---------------------------------------------------------------------------
# Chain driver
# ---------------------------------------------------------------------------


def run_dram_kernel(
    evaluate: Callable[[np.ndarray], tuple[float, float]],
    options: DramOptions,
    rng: np.random.Generator,
    lower=None,
    upper=None,
    worker: int = 0,
) -> DramResult:
    """DRAM driver on a generic evaluator returning ``(log_target, log_like)``.

    ``lower``/``upper`` bound the support cheaply before ``evaluate`` is called;
    points with ``log_target == -inf`` are treated as outside the support too.
    """
    if not options.out_of_bounds_in_chain:
        raise UnsupportedOptionError("putOutOfBoundsInChain = 0 is not supported")
    d = options.dim
    n_pos = options.n_pos
    scales = options.stage_scales
    sqrt_scales = [math.sqrt(s) for s in scales]
    lo = None if lower is None else np.asarray(lower, dtype=float)
    hi = None if upper is None else np.asarray(upper, dtype=float)

    if lo is None:
        lo = np.full(d, -np.inf)
    if hi is None:
        hi = np.full(d, np.inf)

    def in_box(x):
        return ((x >= lo) & (x <= hi)).all()

    current = options.initial_position.copy()
    if not in_box(current):
        raise InvalidStartError(f"initial position {current} lies outside the support")
    cur_lt, cur_ll = evaluate(current)
    if not math.isfinite(cur_lt):
        raise InvalidStartError(f"initial position {current} has log-target {cur_lt}")

    chain = np.empty((n_pos, d))
    log_targets = np.empty(n_pos)
    log_likes = np.empty(n_pos)
    chain[0], log_targets[0], log_likes[0] = current, cur_lt, cur_ll

    master = np.array(options.initial_proposal_cov, dtype=float)
    chol = cholesky_lower(master)
    accept_counts = np.zeros(options.n_stages, dtype=np.int64)
    out_of_support = 0
    n_adapt = 0
    adaptive = options.adapt_interval > 0
    # Moments of chain[0:k] are accumulated blockwise at adaptation time,
    # shifted by the start to limit cancellation.
    shift = current.copy()
    run_sum = np.zeros(d)
    run_outer = np.zeros((d, d))
    n_summed = 0

    for k in range(1, n_pos):
        # chain[0:k] holds positions m(0)..m(k-1); the current one is m(k-1).
        if adaptive and k >= options.n0 and k % options.adapt_interval == 0:
            block = chain[n_summed:k] - shift
            run_sum += block.sum(axis=0)
            run_outer += block.T @ block
            n_summed = k
            if k >= 2:
                mu = run_sum / k
                cov = (run_outer - k * np.outer(mu, mu)) / (k - 1)
                cov = 0.5 * (cov + cov.T)
            else:
                cov = np.zeros((d, d))
            master = options.s_d * cov + options.s_d * options.epsilon * np.eye(d)
            chol = cholesky_lower(master)
            n_adapt += 1

        points = [current]
        logpis = [cur_lt]
        llikes = [cur_ll]
        calc = None
        for stage in range(1, options.n_stages + 1):
            z = rng.standard_normal(d)
            cand = current + sqrt_scales[stage - 1] * (chol @ z)
            if in_box(cand):
                lt, ll = evaluate(cand)
            else:
                lt, ll = NEG_INF, NEG_INF
            points.append(cand)
            logpis.append(lt)
            llikes.append(ll)
            if lt == NEG_INF:
                out_of_support += 1
                continue
            if stage == 1:
                a = alpha_first(cur_lt, lt)
            else:
                if calc is None:
                    calc = _StageAlpha(points, logpis, chol, scales)
                a = calc.alpha(range(stage + 1))
            u = 1.0 - rng.random()
            if a >= u:
                current, cur_lt, cur_ll = cand, lt, ll
                accept_counts[stage - 1] += 1
                break
        chain[k], log_targets[k], log_likes[k] = current, cur_lt, cur_ll

    seq = SampleSequence(chain, log_targets, log_likes, origin_worker=worker)
    return DramResult(seq, accept_counts, n_pos - 1, out_of_support, master, n_adapt)


def run_dram(target: TargetDensity, options: DramOptions, rng: np.random.Generator, worker: int = 0) -> DramResult:
    if options.dim != target.dim:
        raise InvalidArgumentError(f"options dimension {options.dim} differs from target dimension {target.dim}")

    log_prior, log_like = target.log_prior, target.log_likelihood

    def evaluate(x):
        # The kernel has already checked the box.
        lp = float(log_prior(x))
        if lp == NEG_INF:
            return NEG_INF, NEG_INF
        ll = float(log_like(x))
        return lp + ll, ll

    return run_dram_kernel(evaluate, options, rng, target.domain.lower, target.domain.upper, worker)
