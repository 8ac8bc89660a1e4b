"""Parameter boxes, prior families and the log-space target density.

All densities are evaluated in log space; points outside a support map to
``-inf``.  Prior objects are frozen dataclasses and can be shared between
workers, while random streams (:class:`numpy.random.Generator`) are always
passed in by the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import linalg
from scipy.special import betaln, gammaln

from .errors import DecompositionError, EmptyDomainError, InvalidArgumentError

LOG_2PI = math.log(2.0 * math.pi)


def _as_vector(x, dim=None):
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1:
        raise InvalidArgumentError(f"expected a vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise InvalidArgumentError(f"dimension mismatch: expected {dim}, got {v.shape[0]}")
    return v


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box ``[lower, upper]`` with inclusive bounds.

    Infinite bounds are allowed so that unbounded families (Gaussian,
    log-normal, ...) can share the same membership test.
    """

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = _as_vector(self.lower)
        hi = _as_vector(self.upper)
        if lo.shape != hi.shape:
            raise InvalidArgumentError("lower and upper bounds differ in length")
        if not np.all(lo < hi):
            raise InvalidArgumentError("every lower bound must be strictly below its upper bound")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unbounded(cls, dim):
        return cls(np.full(dim, -np.inf), np.full(dim, np.inf))

    @property
    def dim(self):
        return self.lower.shape[0]

    @property
    def volume(self):
        return float(np.prod(self.upper - self.lower))

    def contains(self, x):
        x = _as_vector(x, self.dim)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def __eq__(self, other):
        if not isinstance(other, BoxDomain):
            return NotImplemented
        return np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper)

    def __hash__(self):
        return hash((self.lower.tobytes(), self.upper.tobytes()))


def intersect_domains(a: BoxDomain, b: BoxDomain) -> BoxDomain:
    """Componentwise intersection ``[max(lowers), min(uppers)]``."""
    if a.dim != b.dim:
        raise InvalidArgumentError(f"cannot intersect boxes of dimension {a.dim} and {b.dim}")
    lo = np.maximum(a.lower, b.lower)
    hi = np.minimum(a.upper, b.upper)
    if np.any(lo >= hi):
        raise EmptyDomainError(f"empty intersection: lower={lo}, upper={hi}")
    return BoxDomain(lo, hi)


def log_uniform_pdf(x, box: BoxDomain) -> float:
    """``-sum(log(upper - lower))`` inside the box, ``-inf`` outside."""
    x = _as_vector(x)
    if x.shape[0] != box.dim:
        raise InvalidArgumentError(f"dimension mismatch: point has {x.shape[0]}, box has {box.dim}")
    if not box.contains(x):
        return -math.inf
    return -float(np.sum(np.log(box.upper - box.lower)))


def cholesky_lower(cov) -> np.ndarray:
    """Lower Cholesky factor, raising :class:`DecompositionError` on failure."""
    c = np.atleast_2d(np.asarray(cov, dtype=float))
    if c.shape[0] != c.shape[1]:
        raise DecompositionError(f"covariance must be square, got {c.shape}")
    if not np.allclose(c, c.T, rtol=1e-10, atol=1e-14):
        raise DecompositionError("covariance matrix is not symmetric")
    try:
        return linalg.cholesky(c, lower=True)
    except linalg.LinAlgError as exc:
        raise DecompositionError("covariance matrix is not positive-definite") from exc


def log_gaussian_pdf(x, mean, cov) -> float:
    x = _as_vector(x)
    mu = _as_vector(mean, x.shape[0])
    chol = cholesky_lower(cov)
    if chol.shape[0] != x.shape[0]:
        raise InvalidArgumentError("covariance dimension does not match the point")
    z = linalg.solve_triangular(chol, x - mu, lower=True)
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return -0.5 * (x.shape[0] * LOG_2PI + log_det + float(z @ z))


# ---------------------------------------------------------------------------
# Prior families
# ---------------------------------------------------------------------------


class PriorSpec:
    """Common surface of every prior family.

    Subclasses implement ``dim``, ``domain``, ``log_pdf`` and ``sample``.
    """

    dim: int

    @property
    def domain(self) -> BoxDomain:
        raise NotImplementedError

    def log_pdf(self, x) -> float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` realizations as a ``(size, dim)`` array."""
        raise NotImplementedError


@dataclass(frozen=True)
class Uniform(PriorSpec):
    box: BoxDomain

    def __post_init__(self):
        if not (np.all(np.isfinite(self.box.lower)) and np.all(np.isfinite(self.box.upper))):
            raise InvalidArgumentError("uniform prior needs a bounded box")
        object.__setattr__(self, "_log_density", -float(np.sum(np.log(self.box.upper - self.box.lower))))

    @classmethod
    def from_bounds(cls, lower, upper):
        return cls(BoxDomain(lower, upper))

    @property
    def dim(self):
        return self.box.dim

    @property
    def domain(self):
        return self.box

    def log_pdf(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            return log_uniform_pdf(x, self.box)
        if not ((x >= self.box.lower) & (x <= self.box.upper)).all():
            return -math.inf
        return self._log_density

    def sample(self, rng, size):
        return rng.uniform(self.box.lower, self.box.upper, size=(size, self.dim))


@dataclass(frozen=True)
class Gaussian(PriorSpec):
    """Multivariate normal; ``cov`` is the covariance (variances, not std devs)."""

    mean: np.ndarray
    cov: np.ndarray
    chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mu = _as_vector(self.mean)
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mu.shape[0], mu.shape[0]):
            raise InvalidArgumentError(f"covariance shape {cov.shape} does not match mean of length {mu.shape[0]}")
        chol = cholesky_lower(cov)
        for arr in (mu, cov, chol):
            arr.setflags(write=False)
        object.__setattr__(self, "mean", mu)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "chol", chol)

    @property
    def dim(self):
        return self.mean.shape[0]

    @property
    def domain(self):
        return BoxDomain.unbounded(self.dim)

    def log_pdf(self, x):
        x = _as_vector(x, self.dim)
        z = linalg.solve_triangular(self.chol, x - self.mean, lower=True)
        log_det = 2.0 * float(np.sum(np.log(np.diag(self.chol))))
        return -0.5 * (self.dim * LOG_2PI + log_det + float(z @ z))

    def sample(self, rng, size):
        z = rng.standard_normal((size, self.dim))
        return self.mean + z @ self.chol.T


@dataclass(frozen=True)
class Beta(PriorSpec):
    alpha: float
    beta: float
    dim = 1

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise InvalidArgumentError("beta parameters must be positive")

    @property
    def domain(self):
        return BoxDomain([0.0], [1.0])

    def log_pdf(self, x):
        (v,) = _as_vector(x, 1)
        if v < 0.0 or v > 1.0:
            return -math.inf
        a, b = self.alpha, self.beta
        # An endpoint where the density diverges is not a usable state.
        if (v == 0.0 and a < 1.0) or (v == 1.0 and b < 1.0):
            return -math.inf
        with np.errstate(divide="ignore"):
            return float((a - 1.0) * np.log(v) + (b - 1.0) * np.log1p(-v) - betaln(a, b))

    def sample(self, rng, size):
        x = rng.beta(self.alpha, self.beta, size=(size, 1))
        # Draws can round onto an endpoint; move them one ulp inside.
        if self.alpha < 1.0:
            x = np.maximum(x, np.nextafter(0.0, 1.0))
        if self.beta < 1.0:
            x = np.minimum(x, np.nextafter(1.0, 0.0))
        return x


@dataclass(frozen=True)
class Gamma(PriorSpec):
    shape: float
    scale: float
    dim = 1

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise InvalidArgumentError("gamma parameters must be positive")

    @property
    def domain(self):
        return BoxDomain([0.0], [np.inf])

    def log_pdf(self, x):
        (v,) = _as_vector(x, 1)
        if v < 0.0 or not np.isfinite(v):
            return -math.inf
        k, s = self.shape, self.scale
        with np.errstate(divide="ignore"):
            return float((k - 1.0) * np.log(v) - v / s - gammaln(k) - k * math.log(s))

    def sample(self, rng, size):
        return rng.gamma(self.shape, self.scale, size=(size, 1))


@dataclass(frozen=True)
class InverseGamma(PriorSpec):
    """If ``X ~ InverseGamma(shape, scale)`` then ``1/X ~ Gamma(shape, 1/scale)``."""

    shape: float
    scale: float
    dim = 1

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise InvalidArgumentError("inverse-gamma parameters must be positive")

    @property
    def domain(self):
        return BoxDomain([0.0], [np.inf])

    def log_pdf(self, x):
        (v,) = _as_vector(x, 1)
        if v <= 0.0 or not np.isfinite(v):
            return -math.inf
        a, b = self.shape, self.scale
        return float(a * math.log(b) - gammaln(a) - (a + 1.0) * math.log(v) - b / v)

    def sample(self, rng, size):
        return 1.0 / rng.gamma(self.shape, 1.0 / self.scale, size=(size, 1))


@dataclass(frozen=True)
class LogNormal(PriorSpec):
    """``log X ~ N(location, scale**2)``."""

    location: float
    scale: float
    dim = 1

    def __post_init__(self):
        if not self.scale > 0:
            raise InvalidArgumentError("log-normal scale must be positive")

    @property
    def domain(self):
        return BoxDomain([0.0], [np.inf])

    def log_pdf(self, x):
        (v,) = _as_vector(x, 1)
        if v <= 0.0 or not np.isfinite(v):
            return -math.inf
        lv = math.log(v)
        s = self.scale
        return -lv - math.log(s) - 0.5 * LOG_2PI - 0.5 * ((lv - self.location) / s) ** 2

    def sample(self, rng, size):
        return rng.lognormal(self.location, self.scale, size=(size, 1))


@dataclass(frozen=True)
class Concatenated(PriorSpec):
    """Independent product of priors, coordinates laid out in part order."""

    parts: tuple

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise InvalidArgumentError("a concatenated prior needs at least one part")
        object.__setattr__(self, "parts", parts)

    @property
    def dim(self):
        return sum(p.dim for p in self.parts)

    @property
    def domain(self):
        lo = np.concatenate([p.domain.lower for p in self.parts])
        hi = np.concatenate([p.domain.upper for p in self.parts])
        return BoxDomain(lo, hi)

    def _split(self, x):
        x = _as_vector(x, self.dim)
        out, start = [], 0
        for p in self.parts:
            out.append(x[start:start + p.dim])
            start += p.dim
        return out

    def log_pdf(self, x):
        total = 0.0
        for p, xi in zip(self.parts, self._split(x)):
            total += p.log_pdf(xi)
            if total == -math.inf:
                break
        return total

    def sample(self, rng, size):
        return np.hstack([p.sample(rng, size) for p in self.parts])


def log_pdf(prior: PriorSpec, x) -> float:
    x = _as_vector(x)
    if x.shape[0] != prior.dim:
        raise InvalidArgumentError(f"dimension mismatch: prior has {prior.dim}, point has {x.shape[0]}")
    return prior.log_pdf(x)


def realize(prior: PriorSpec, rng: np.random.Generator) -> np.ndarray:
    """One draw from ``prior`` as a length-``dim`` vector."""
    return prior.sample(rng, 1)[0]


# ---------------------------------------------------------------------------
# Target density
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TargetDensity:
    """Log-prior plus log-likelihood restricted to ``domain``."""

    domain: BoxDomain
    log_prior: Callable[[np.ndarray], float]
    log_likelihood: Callable[[np.ndarray], float]

    @classmethod
    def from_prior(cls, prior: PriorSpec, log_likelihood, likelihood_domain: BoxDomain | None = None):
        domain = prior.domain
        if likelihood_domain is not None:
            domain = intersect_domains(domain, likelihood_domain)
        return cls(domain, prior.log_pdf, log_likelihood)

    @property
    def dim(self):
        return self.domain.dim

    def log_posterior(self, x) -> float:
        lp, ll = self.evaluate(x)
        return lp + ll

    def evaluate(self, x):
        """Return ``(log_prior, log_likelihood)``; both ``-inf`` outside the domain."""
        x = np.asarray(x, dtype=float)
        if not ((x >= self.domain.lower) & (x <= self.domain.upper)).all():
            return -math.inf, -math.inf
        lp = float(self.log_prior(x))
        if lp == -math.inf:
            return lp, -math.inf
        return lp, float(self.log_likelihood(x))


def prior_moments(prior: PriorSpec) -> tuple[np.ndarray, np.ndarray]:
    """Analytic mean and per-coordinate variance of ``prior``."""
    if isinstance(prior, Uniform):
        lo, hi = prior.box.lower, prior.box.upper
        return (lo + hi) / 2.0, (hi - lo) ** 2 / 12.0
    if isinstance(prior, Gaussian):
        return prior.mean.copy(), np.diag(prior.cov).copy()
    if isinstance(prior, Beta):
        a, b = prior.alpha, prior.beta
        return np.array([a / (a + b)]), np.array([a * b / ((a + b) ** 2 * (a + b + 1.0))])
    if isinstance(prior, Gamma):
        return np.array([prior.shape * prior.scale]), np.array([prior.shape * prior.scale ** 2])
    if isinstance(prior, InverseGamma):
        a, b = prior.shape, prior.scale
        if a <= 2:
            raise InvalidArgumentError("inverse-gamma variance is undefined for shape <= 2")
        return np.array([b / (a - 1.0)]), np.array([b * b / ((a - 1.0) ** 2 * (a - 2.0))])
    if isinstance(prior, LogNormal):
        m, s2 = prior.location, prior.scale ** 2
        return np.array([math.exp(m + s2 / 2.0)]), np.array([(math.exp(s2) - 1.0) * math.exp(2 * m + s2)])
    if isinstance(prior, Concatenated):
        ms, vs = zip(*(prior_moments(p) for p in prior.parts))
        return np.concatenate(ms), np.concatenate(vs)
    raise InvalidArgumentError(f"no analytic moments for {type(prior).__name__}")


def concatenate(*parts: Sequence[PriorSpec]) -> Concatenated:
    return Concatenated(tuple(parts))
