"""Sample sequences (chains) and the diagnostics computed on them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DegenerateColumnError, InsufficientDataError, InvalidArgumentError


@dataclass(frozen=True)
class SampleSequence:
    """An ordered set of parameter vectors stored as an ``(n, d)`` array.

    ``log_targets`` and ``log_likes`` are optional per-sample values kept in
    step with ``samples``.
    """

    samples: np.ndarray
    log_targets: np.ndarray | None = None
    log_likes: np.ndarray | None = None
    origin_worker: int = 0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2:
            raise InvalidArgumentError(f"samples must be 2-D, got shape {s.shape}")
        object.__setattr__(self, "samples", s)
        for name in ("log_targets", "log_likes"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=float).reshape(-1)
                if v.shape[0] != s.shape[0]:
                    raise InvalidArgumentError(f"{name} has {v.shape[0]} entries for {s.shape[0]} samples")
                object.__setattr__(self, name, v)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def dim(self):
        return self.samples.shape[1]

    def column(self, component: int) -> np.ndarray:
        if not 0 <= component < self.dim:
            raise InvalidArgumentError(f"component {component} out of range for dimension {self.dim}")
        return self.samples[:, component]

    def take(self, idx) -> "SampleSequence":
        return SampleSequence(
            self.samples[idx],
            None if self.log_targets is None else self.log_targets[idx],
            None if self.log_likes is None else self.log_likes[idx],
            self.origin_worker,
        )


@dataclass(frozen=True)
class FilterSpec:
    discard_portion: float = 0.0
    lag: int = 1

    def __post_init__(self):
        if not 0.0 <= self.discard_portion < 1.0:
            raise InvalidArgumentError("discard_portion must lie in [0, 1)")
        if int(self.lag) != self.lag or self.lag < 1:
            raise InvalidArgumentError("lag must be an integer >= 1")


def _values(seq) -> np.ndarray:
    if isinstance(seq, SampleSequence):
        return seq.samples
    a = np.asarray(seq, dtype=float)
    return a[:, None] if a.ndim == 1 else a


def _component(seq, component) -> np.ndarray:
    x = _values(seq)
    if not 0 <= component < x.shape[1]:
        raise InvalidArgumentError(f"component {component} out of range for dimension {x.shape[1]}")
    return x[:, component]


def mean_and_covariance(seq) -> tuple[np.ndarray, np.ndarray]:
    x = _values(seq)
    if x.shape[0] < 2:
        raise InsufficientDataError("mean and covariance need at least 2 samples")
    mean = x.mean(axis=0)
    cov = np.atleast_2d(np.cov(x, rowvar=False, ddof=1))
    return mean, cov


def correlation_matrix(seq) -> np.ndarray:
    _, cov = mean_and_covariance(seq)
    sd = np.sqrt(np.diag(cov))
    if np.any(sd == 0.0):
        raise DegenerateColumnError(f"zero-variance column(s): {np.flatnonzero(sd == 0.0).tolist()}")
    corr = cov / np.outer(sd, sd)
    corr = np.clip(corr, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return corr


def autocorrelation(seq, component: int, max_lag: int) -> np.ndarray:
    """Biased autocorrelation estimate ``r(0..max_lag)`` normalized by lag 0."""
    x = _component(seq, component)
    n = x.shape[0]
    if not 0 <= max_lag < n:
        raise InvalidArgumentError(f"max_lag must be in [0, {n - 1}]")
    xc = x - x.mean()
    denom = float(xc @ xc)
    if denom == 0.0:
        raise DegenerateColumnError("autocorrelation of a constant sequence is undefined")
    # FFT with zero padding gives all lags at once.
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conj(f), size)[: max_lag + 1]
    r = acov / denom
    r[0] = 1.0
    return r


def silverman_bandwidth(x: np.ndarray) -> float:
    n = x.shape[0]
    sigma = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75.0, 25.0])
    iqr = float(q75 - q25)
    spread = min(sigma, iqr / 1.34) if iqr > 0 else sigma
    return 0.9 * spread * n ** (-0.2)


def gaussian_kde(seq, component: int, grid) -> np.ndarray:
    x = _component(seq, component)
    if x.shape[0] < 10:
        raise InsufficientDataError("kernel density estimate needs at least 10 samples")
    h = silverman_bandwidth(x)
    if not h > 0.0:
        raise DegenerateColumnError("zero bandwidth: data are constant")
    g = np.atleast_1d(np.asarray(grid, dtype=float))
    xs = np.sort(x)
    out = np.empty(g.shape[0])
    # Chunk over the grid to bound memory for long chains.
    chunk = max(1, 2_000_000 // xs.shape[0])
    norm = 1.0 / (xs.shape[0] * h * math.sqrt(2.0 * math.pi))
    for start in range(0, g.shape[0], chunk):
        z = (g[start:start + chunk, None] - xs[None, :]) / h
        out[start:start + chunk] = np.exp(-0.5 * z * z).sum(axis=1) * norm
    return out


def ecdf(seq, component: int, at) -> float | np.ndarray:
    x = np.sort(_component(seq, component))
    if x.shape[0] == 0:
        raise InsufficientDataError("empirical CDF of an empty sequence")
    r = np.searchsorted(x, at, side="right") / x.shape[0]
    return float(r) if np.ndim(r) == 0 else r


def histogram(seq, component: int, bins: int = 50):
    """Counts and bin edges, as plain arrays for tabulation."""
    return np.histogram(_component(seq, component), bins=bins)


def filter_indices(n: int, spec: FilterSpec) -> np.ndarray:
    start = int(math.floor(spec.discard_portion * n))
    return np.arange(start, n, spec.lag)


def filter_sequence(seq: SampleSequence, spec: FilterSpec) -> SampleSequence:
    idx = filter_indices(len(seq), spec)
    if idx.size == 0:
        raise InsufficientDataError(
            f"filtering {len(seq)} samples with discard={spec.discard_portion}, lag={spec.lag} leaves nothing"
        )
    return seq.take(idx)


def unify(chains: Iterable[SampleSequence]) -> SampleSequence:
    """Concatenate chains in ascending ``origin_worker`` order."""
    chains = sorted(chains, key=lambda c: c.origin_worker)
    if not chains:
        raise InvalidArgumentError("nothing to unify")
    dims = {c.dim for c in chains}
    if len(dims) != 1:
        raise InvalidArgumentError(f"chains have mismatched dimensions {sorted(dims)}")

    def cat(name):
        parts = [getattr(c, name) for c in chains]
        return None if any(p is None for p in parts) else np.concatenate(parts)

    return SampleSequence(
        np.vstack([c.samples for c in chains]), cat("log_targets"), cat("log_likes"), chains[0].origin_worker
    )
