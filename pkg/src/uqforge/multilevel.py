"""Adaptive multilevel stochastic simulation (tempered sampling + evidence).

Level 0 samples the prior.  Each later level picks a new exponent ``tau`` so
that the effective sample size of the plausibility weights stays inside a
window, resamples chain starts from those weights, and runs short DRAM
chains on ``prior * likelihood**tau``.  The log-evidence is the sum of the
per-level ``log c`` increments.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .domain import BoxDomain, PriorSpec, intersect_domains
from .dram import DramOptions, default_sd, run_dram_kernel
from .errors import DegenerateLevelError, InvalidArgumentError
from .sequence import SampleSequence

log = logging.getLogger(__name__)

BISECTION_TOL = 1e-10


# ---------------------------------------------------------------------------
# Weight bookkeeping
# ---------------------------------------------------------------------------


def plausibility_log_weights(log_likes, tau_prev: float, tau_new: float) -> np.ndarray:
    ll = np.asarray(log_likes, dtype=float)
    delta = tau_new - tau_prev
    if not 0.0 <= tau_prev < tau_new <= 1.0:
        raise InvalidArgumentError(f"need 0 <= tau_prev < tau_new <= 1, got {tau_prev}, {tau_new}")
    # -inf log-likelihoods stay -inf (avoid 0 * inf when delta is tiny).
    with np.errstate(invalid="ignore"):
        out = delta * ll
    out[np.isneginf(ll)] = -np.inf
    return out


def normalize_and_ess(log_weights) -> tuple[np.ndarray, float]:
    lw = np.asarray(log_weights, dtype=float)
    if not np.any(np.isfinite(lw)):
        raise DegenerateLevelError("every plausibility weight is zero")
    w = np.exp(lw - logsumexp(lw))
    w /= w.sum()
    return w, float(1.0 / np.sum(w * w))


def level_log_c(log_weights) -> float:
    lw = np.asarray(log_weights, dtype=float)
    if not np.any(np.isfinite(lw)):
        raise DegenerateLevelError("every plausibility weight is zero")
    return float(logsumexp(lw) - math.log(lw.shape[0]))


def ess_ratio(log_likes, delta: float) -> float:
    ll = np.asarray(log_likes, dtype=float)
    if delta == 0.0:
        return float(np.count_nonzero(np.isfinite(ll))) / ll.shape[0]
    lw = np.where(np.isneginf(ll), -np.inf, delta * ll)
    return normalize_and_ess(lw)[1] / ll.shape[0]


def choose_tau(log_likes, tau_prev: float, beta_min: float, beta_max: float, n_total: int | None = None) -> float:
    """Next tempering exponent, by bisection on the gap ``tau - tau_prev``.

    Returns 1 when the full remaining step already keeps the ESS ratio above
    ``beta_min``.  ``n_total`` defaults to the number of log-likelihoods.
    """
    if not tau_prev < 1.0:
        raise InvalidArgumentError("tau_prev must be below 1")
    ll = np.asarray(log_likes, dtype=float)
    n = ll.shape[0] if n_total is None else n_total

    def ratio(delta):
        lw = np.where(np.isneginf(ll), -np.inf, delta * ll)
        return normalize_and_ess(lw)[1] / n

    gap = 1.0 - tau_prev
    if ratio(gap) > beta_min:
        return 1.0
    lo, hi = 0.0, gap
    best, best_err = hi, math.inf
    while hi - lo > BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        r = ratio(mid)
        if beta_min < r < beta_max:
            return tau_prev + mid
        err = beta_min - r if r <= beta_min else r - beta_max
        if err < best_err:
            best, best_err = mid, err
        if r >= beta_max:
            lo = mid
        else:
            hi = mid
    log.warning("bisection for tau did not reach the ESS window; using gap %.3g", best)
    return tau_prev + best


def weighted_covariance(samples, normalized_weights) -> tuple[np.ndarray, np.ndarray]:
    x = samples.samples if isinstance(samples, SampleSequence) else np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    w = np.asarray(normalized_weights, dtype=float)
    mean = w @ x
    xc = x - mean
    cov = (xc * w[:, None]).T @ xc
    return mean, 0.5 * (cov + cov.T)


def resample_starts(normalized_weights, n_next: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Multinomial resampling, aggregated into ``(index, multiplicity)`` pairs."""
    w = np.clip(np.asarray(normalized_weights, dtype=float), 0.0, None)
    w = w / w.sum()
    counts = rng.multinomial(n_next, w)
    return [(int(i), int(counts[i])) for i in np.flatnonzero(counts)]


@dataclass(frozen=True)
class ChainPiece:
    """A run of ``length`` transitions of chain ``chain`` starting at ``offset``."""

    chain: int
    offset: int
    length: int


def balance_load(chain_lengths, n_workers: int) -> list[list[ChainPiece]]:
    """Cut the ordered chain list into ``n_workers`` contiguous spans.

    Span ``w`` covers positions ``[w*T//N, (w+1)*T//N)`` of the concatenated
    chains, so every worker total is ``floor(T/N)`` or ``ceil(T/N)``.  A chain
    straddling a cut is split; each piece restarts from the chain's start.
    """
    if n_workers < 1:
        raise InvalidArgumentError("n_workers must be at least 1")
    lengths = [int(v) for v in chain_lengths]
    total = sum(lengths)
    bounds = [(w * total) // n_workers for w in range(n_workers + 1)]
    out: list[list[ChainPiece]] = [[] for _ in range(n_workers)]
    pos = 0
    w = 0
    for c, length in enumerate(lengths):
        start, end = pos, pos + length
        while start < end:
            while bounds[w + 1] <= start:
                w += 1
            cut = min(end, bounds[w + 1])
            out[w].append(ChainPiece(c, start - pos, cut - start))
            start = cut
        pos = end
    return out


def worker_totals(assignment: list[list[ChainPiece]]) -> list[int]:
    return [sum(p.length for p in pieces) for pieces in assignment]


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------


@dataclass
class LevelMhOptions:
    n_stages: int = 1
    stage_scales: list | None = None
    n0: int = 0
    adapt_interval: int = 0
    s_d: float | None = None
    epsilon: float = 1e-5
    scale_cov: bool = True
    n_total: int | None = None


@dataclass
class MlOptions:
    n_total: int = 100
    beta_min: float = 0.85
    beta_max: float = 0.91
    n_workers: int = 1
    seed: int = 0
    max_levels: int = 200
    # "multiplicity": one chain of length m per resampled start (the listed
    # algorithm).  "per_copy": m independent one-step chains instead.
    chain_layout: str = "multiplicity"
    mh: LevelMhOptions = field(default_factory=LevelMhOptions)
    level_mh: dict = field(default_factory=dict)
    last_level_mh: LevelMhOptions | None = None

    def __post_init__(self):
        if not 0.0 < self.beta_min < self.beta_max < 1.0:
            raise InvalidArgumentError("need 0 < beta_min < beta_max < 1")
        if self.n_total < 2:
            raise InvalidArgumentError("n_total must be at least 2")
        if self.n_workers < 1:
            raise InvalidArgumentError("n_workers must be at least 1")
        if self.chain_layout not in ("multiplicity", "per_copy"):
            raise InvalidArgumentError(f"unknown chain layout {self.chain_layout!r}")

    def mh_for(self, level: int, is_last: bool) -> LevelMhOptions:
        if is_last and self.last_level_mh is not None:
            return self.last_level_mh
        return self.level_mh.get(level, self.mh)

    def n_total_for(self, level: int, is_last: bool = False) -> int:
        opt = self.mh_for(level, is_last)
        return opt.n_total if opt.n_total is not None else self.n_total


@dataclass
class LevelRecord:
    level: int
    tau: float
    n_samples: int
    ess: float
    ess_ratio: float
    log_c: float
    n_chains: int = 0
    acceptance_rate: float = float("nan")
    worker_totals: list = field(default_factory=list)
    samples: SampleSequence | None = field(default=None, repr=False)


@dataclass
class AmssaResult:
    samples: SampleSequence
    log_evidence: float
    levels: list

    @property
    def taus(self) -> list[float]:
        return [lv.tau for lv in self.levels]


def _chain_rng(seed: int, level: int, start: int, offset: int) -> np.random.Generator:
    return np.random.default_rng([abs(int(seed)), int(seed < 0), level, start, offset])


def run_amssa(
    prior: PriorSpec,
    log_likelihood: Callable[[np.ndarray], float],
    options: MlOptions,
    likelihood_domain: BoxDomain | None = None,
    keep_levels: bool = False,
) -> AmssaResult:
    """Sample ``prior * likelihood`` and estimate its log-evidence.

    Randomness derives from ``options.seed`` only: level 0 and every
    resampling step use streams keyed by level, and every chain piece uses a
    stream keyed by (level, start index, offset), so the outcome does not
    depend on thread scheduling.
    """
    domain = prior.domain if likelihood_domain is None else intersect_domains(prior.domain, likelihood_domain)
    lo, hi = domain.lower, domain.upper
    d = prior.dim

    def loglike(x):
        if not ((x >= lo) & (x <= hi)).all():
            return -math.inf
        return float(log_likelihood(x))

    n0 = options.n_total_for(0)
    x = prior.sample(np.random.default_rng([abs(int(options.seed)), int(options.seed < 0), 0]), n0)
    ll = np.array([loglike(row) for row in x])
    lp = np.array([prior.log_pdf(row) for row in x])
    current = SampleSequence(x, lp, ll)
    levels = [LevelRecord(0, 0.0, n0, float(n0), 1.0, 0.0, samples=current if keep_levels else None)]
    tau = 0.0
    log_evidence = 0.0
    pool = ThreadPoolExecutor(max_workers=options.n_workers) if options.n_workers > 1 else None
    try:
        level = 0
        while tau < 1.0:
            level += 1
            if level > options.max_levels:
                raise DegenerateLevelError(f"tau reached only {tau} after {options.max_levels} levels")
            if not np.any(np.isfinite(current.log_likes)):
                raise DegenerateLevelError(f"level {level}: every sample has zero likelihood")
            new_tau = choose_tau(current.log_likes, tau, options.beta_min, options.beta_max)
            lw = plausibility_log_weights(current.log_likes, tau, new_tau)
            w, ess = normalize_and_ess(lw)
            log_c = level_log_c(lw)
            log_evidence += log_c
            is_last = new_tau >= 1.0
            mh = options.mh_for(level, is_last)
            n_next = options.n_total_for(level, is_last)

            _, sigma = weighted_covariance(current.samples, w)
            s_d = default_sd(d) if mh.s_d is None else mh.s_d
            scale = s_d if mh.scale_cov else 1.0
            prop_cov = scale * sigma + scale * mh.epsilon * np.eye(d)

            starts = resample_starts(w, n_next, np.random.default_rng([abs(int(options.seed)), int(options.seed < 0), level, 1 << 20]))
            if options.chain_layout == "per_copy":
                chains = [(i, 1, c) for i, m in starts for c in range(m)]
            else:
                chains = [(i, m, 0) for i, m in starts]
            assignment = balance_load([m for _, m, _ in chains], options.n_workers)

            def run_worker(pieces, _starts=chains, _tau=new_tau, _level=level, _mh=mh, _cov=prop_cov, _src=current):
                out = []
                for piece in pieces:
                    idx, _, copy = _starts[piece.chain]
                    res = _run_piece(_src, idx, copy, piece, prior, loglike, _tau, _mh, _cov, options.seed, _level, lo, hi)
                    out.append((piece.chain, piece.offset, res))
                return out

            if pool is None:
                results = [run_worker(p) for p in assignment]
            else:
                results = list(pool.map(run_worker, assignment))
            flat = sorted((r for worker in results for r in worker), key=lambda t: (t[0], t[1]))
            xs = np.vstack([r[2][0] for r in flat])
            lps = np.concatenate([r[2][1] for r in flat])
            lls = np.concatenate([r[2][2] for r in flat])
            accepted = sum(r[2][3] for r in flat)
            current = SampleSequence(xs, lps, lls)
            levels.append(
                LevelRecord(
                    level,
                    new_tau,
                    len(current),
                    ess,
                    ess / len(lw),
                    log_c,
                    n_chains=len(chains),
                    acceptance_rate=accepted / len(current),
                    worker_totals=worker_totals(assignment),
                    samples=current if keep_levels else None,
                )
            )
            log.info("level %d: tau=%.6g ess_ratio=%.4f log_c=%.6g", level, new_tau, ess / len(lw), log_c)
            tau = new_tau
    finally:
        if pool is not None:
            pool.shutdown()
    return AmssaResult(current, log_evidence, levels)


def _run_piece(src, idx, copy, piece, prior, loglike, tau, mh, cov, seed, level, lo, hi):
    """Run ``piece.length`` transitions from sample ``idx`` at exponent ``tau``.

    Returns (positions, log-priors, log-likes, accepted count); the start
    point itself is not part of the output.
    """
    start = src.samples[idx]

    def evaluate(x):
        lp = float(prior.log_pdf(x))
        if lp == -math.inf:
            return -math.inf, -math.inf
        ll = loglike(x)
        return lp + tau * ll, ll

    opts = DramOptions(
        n_pos=piece.length + 1,
        initial_position=start,
        initial_proposal_cov=cov,
        n_stages=mh.n_stages,
        stage_scales=mh.stage_scales,
        s_d=mh.s_d,
        epsilon=mh.epsilon,
        n0=mh.n0,
        adapt_interval=mh.adapt_interval,
    )
    res = run_dram_kernel(evaluate, opts, _chain_rng(seed, level, idx, piece.offset + copy), lo, hi)
    chain = res.chain
    xs = chain.samples[1:]
    lps = np.array([prior.log_pdf(x) for x in xs])
    return xs, lps, chain.log_likes[1:], int(res.accept_counts.sum())
