"""Maximum-likelihood Weibull fitting of the largest distances in a sample.

Three-parameter fit with the location pinned to the tail minimum, then a
two-parameter MLE for shape/scale via bisection on the profile-likelihood
shape equation:

    f(k) = sum(x^k ln x)/sum(x^k) - 1/k - mean(ln x) = 0

f is strictly increasing in k and brackets a unique root for any
non-degenerate positive sample, so bisection to 1e-10 always converges.
"""

from __future__ import annotations

import numpy as np

ROOT_TOL = 1e-10
MAX_ITER = 200


class DegenerateTailError(ValueError):
    """Raised when the tail carries no spread to fit."""


class WeibullFit:
    """shape/scale/location plus the fit's tail metadata."""

    def __init__(self, shape, scale, location, tail_size, tail_max):
        if shape <= 0 or scale <= 0:
            raise ValueError("shape and scale must be positive")
        self.shape = float(shape)
        self.scale = float(scale)
        self.location = float(location)
        self.tail_size = int(tail_size)
        self.tail_max = float(tail_max)

    def cdf(self, d):
        """P(distance <= d); zero at and below the location."""
        z = (np.asarray(d, dtype=np.float64) - self.location) / self.scale
        z = np.maximum(z, 0.0)
        return 1.0 - np.exp(-(z ** self.shape))


def _profile_equation(k: float, y: np.ndarray, log_y: np.ndarray,
                      mean_log: float) -> float:
    yk = y ** k
    return float(np.sum(yk * log_y) / np.sum(yk) - 1.0 / k - mean_log)


def _solve_shape(y: np.ndarray) -> float:
    """Root of the profile equation on max-normalized data (y in (0, 1])."""
    log_y = np.log(y)
    mean_log = float(np.mean(log_y))
    lo, hi = 1e-6, 2.0
    # expand until the bracket straddles the root; f(lo) < 0 by construction
    it = 0
    while _profile_equation(hi, y, log_y, mean_log) < 0.0:
        hi *= 2.0
        it += 1
        if it > 60:
            raise DegenerateTailError("profile equation has no finite root")
    for _ in range(MAX_ITER):
        mid = 0.5 * (lo + hi)
        if _profile_equation(mid, y, log_y, mean_log) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < ROOT_TOL * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def fit_tail(distances, tail_size: int) -> WeibullFit:
    """Fit the `tail_size` largest distances; location = tail minimum.

    The shifted minimum is exactly zero and is excluded from the likelihood
    (a zero has no finite log-density); everything else enters the MLE.
    """
    d = np.asarray(distances, dtype=np.float64)
    if tail_size < 3:
        raise ValueError("tail_size must be >= 3")
    if d.size < tail_size:
        raise ValueError(f"need at least tail_size={tail_size} distances, "
                         f"got {d.size}")
    if not np.all(np.isfinite(d)):
        raise ValueError("distances must be finite")
    tail = np.sort(d)[-tail_size:]
    location = float(tail[0])
    x = tail - location
    x = x[x > 0.0]
    if x.size < 2 or float(tail[-1]) == location:
        raise DegenerateTailError(
            f"tail of {tail_size} distances is flat at {location:g}; "
            "nothing to fit")
    scale_norm = float(x.max())
    y = x / scale_norm
    shape = _solve_shape(y)
    scale = float(np.mean(y ** shape) ** (1.0 / shape)) * scale_norm
    return WeibullFit(shape, scale, location, tail_size, float(tail[-1]))


def sample_weibull(shape, scale, location, size, rng) -> np.ndarray:
    """Draws from the three-parameter Weibull (testing aid)."""
    return location + scale * rng.weibull(shape, size)
