"""Targets, priors and QoI maps for the bundled example problems."""

from __future__ import annotations

import math

import numpy as np

from .domain import Beta, Concatenated, Gaussian, Uniform
from .errors import InvalidArgumentError
from .forward import QoiMap, projectile_distance

NEG_INF = -math.inf

# ---------------------------------------------------------------------------
# Simple inverse and forward problems
# ---------------------------------------------------------------------------

SIMPLE_MEAN = np.array([-1.0, 2.0])
SIMPLE_COV = np.diag([4.0, 1.0])
SIMPLE_BOX = 15.0


def simple_sip_prior() -> Uniform:
    return Uniform.from_bounds([-SIMPLE_BOX, -SIMPLE_BOX], [SIMPLE_BOX, SIMPLE_BOX])


def simple_sip_loglike(theta) -> float:
    a = theta[0] - SIMPLE_MEAN[0]
    b = theta[1] - SIMPLE_MEAN[1]
    return -0.5 * (a * a / 4.0 + b * b)


def simple_sfp_prior() -> Gaussian:
    return Gaussian(SIMPLE_MEAN.copy(), SIMPLE_COV.copy())


def sum_qoi(dim: int = 2) -> QoiMap:
    return QoiMap(dim, 1, lambda x: float(np.sum(x)))


# ---------------------------------------------------------------------------
# Gravity
# ---------------------------------------------------------------------------

# altitude [m], fall time [s], sigma [s]
GRAVITY_DATA = np.array([
    [10, 1.41, 0.02],
    [20, 2.14, 0.12],
    [30, 2.49, 0.02],
    [40, 2.87, 0.01],
    [50, 3.22, 0.03],
    [60, 3.49, 0.01],
    [70, 3.81, 0.03],
    [80, 4.07, 0.03],
    [90, 4.32, 0.03],
    [100, 4.47, 0.05],
    [110, 4.75, 0.01],
    [120, 4.99, 0.04],
    [130, 5.16, 0.01],
    [140, 5.26, 0.09],
])
GRAVITY_BOUNDS = (8.0, 11.0)


def fall_times(g: float, heights=None) -> np.ndarray:
    h = GRAVITY_DATA[:, 0] if heights is None else np.asarray(heights, dtype=float)
    return np.sqrt(2.0 * h / g)


def gravity_prior() -> Uniform:
    return Uniform.from_bounds([GRAVITY_BOUNDS[0]], [GRAVITY_BOUNDS[1]])


_H2 = 2.0 * GRAVITY_DATA[:, 0]
_T = GRAVITY_DATA[:, 1]
_INV_VAR = 1.0 / GRAVITY_DATA[:, 2] ** 2


def gravity_loglike(theta) -> float:
    g = float(theta[0])
    if not g > 0:
        return NEG_INF
    r = np.sqrt(_H2 / g) - _T
    return -0.5 * float(np.dot(r * r, _INV_VAR))


def gravity_qoi(v0: float = 5.0, alpha: float = math.pi / 4, h0: float = 0.0) -> QoiMap:
    return QoiMap(1, 1, lambda x: projectile_distance(float(x[0]), v0, alpha, h0))


# ---------------------------------------------------------------------------
# Bimodal
# ---------------------------------------------------------------------------

BIMODAL_HALF_WIDTH = 250.0
BIMODAL_MODES = ((10.0, 1.0), (100.0, 5.0))  # (mean, standard deviation)
BIMODAL_SPLIT = 55.0
_LOG_HALF = math.log(0.5)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def bimodal_prior() -> Uniform:
    return Uniform.from_bounds([-BIMODAL_HALF_WIDTH], [BIMODAL_HALF_WIDTH])


def _log_normal_pdf(x, mu, sd):
    z = (x - mu) / sd
    return -0.5 * z * z - math.log(sd) - _LOG_SQRT_2PI


def bimodal_loglike(theta) -> float:
    # The mixture is evaluated in log space: far from both modes each
    # component underflows on its own.
    x = float(theta[0])
    (m1, s1), (m2, s2) = BIMODAL_MODES
    return float(np.logaddexp(_log_normal_pdf(x, m1, s1), _log_normal_pdf(x, m2, s2))) + _LOG_HALF


# ---------------------------------------------------------------------------
# Modal
# ---------------------------------------------------------------------------

MODAL_PLUS = (72.0470, 71.8995, 72.2801, 71.9421, 72.3578)
MODAL_MINUS = (28.0292, 27.3726, 27.5388, 27.0357, 27.1588)
MODAL_BETA = {1: 0.09709133373799, 2: 0.08335837191688}
MODAL_ALPHA = 3.0


def _check_modes(num_modes):
    if num_modes not in (1, 2):
        raise InvalidArgumentError(f"num_modes must be 1 or 2, got {num_modes}")


def modal_prior(num_modes: int, concatenated: bool = False):
    """Uniform box, or uniform x uniform x beta when ``concatenated``."""
    _check_modes(num_modes)
    if not concatenated:
        return Uniform.from_bounds([0.0, 0.0, 0.0], [3.0, 3.0, 0.3])
    return Concatenated((Uniform.from_bounds([0.0, 0.0], [3.0, 3.0]), Beta(MODAL_ALPHA, MODAL_BETA[num_modes])))


def modal_loglike(num_modes: int):
    _check_modes(num_modes)
    plus = np.array(MODAL_PLUS)
    minus = np.array(MODAL_MINUS)
    # Normalizing factor as printed: 5/2 for one mode, 5 for two.
    norm = 2.5 if num_modes == 1 else 5.0

    def loglike(theta) -> float:
        t1, t2, s2 = float(theta[0]), float(theta[1]), float(theta[2])
        if not s2 > 0:
            return NEG_INF
        root = math.sqrt(t1 * t1 + 4.0 * t2 * t2)
        base = 10.0 * t1 + 20.0 * t2
        up = 10.0 * math.sqrt(base + 10.0 * root)
        ss = float(np.sum((up - plus) ** 2))
        if num_modes == 2:
            # base >= root on the prior support, so the argument is >= 0 up to rounding.
            down = 10.0 * math.sqrt(max(base - 10.0 * root, 0.0))
            ss += float(np.sum((down - minus) ** 2))
        return -norm * math.log(2.0 * math.pi * s2) - ss / (2.0 * s2)

    return loglike


# ---------------------------------------------------------------------------
# Straight line (sensitivity analysis)
# ---------------------------------------------------------------------------

LINE_NAMES = ("m", "c")


def line_priors():
    return Uniform.from_bounds([2.0, 3.0], [5.0, 7.0])


def line_qoi(x: float) -> QoiMap:
    return QoiMap(2, 1, lambda p: p[0] * x + p[1])


def line_exact_indices(x: float) -> dict:
    """First-order indices of ``m*x + c`` with the bundled uniform priors."""
    vm = x * x * (5.0 - 2.0) ** 2 / 12.0
    vc = (7.0 - 3.0) ** 2 / 12.0
    return {"m": vm / (vm + vc), "c": vc / (vm + vc)}
