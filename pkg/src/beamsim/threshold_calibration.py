"""Monte-Carlo study of the observed power ratio behind the reward thresholds.

The true ratio ``X`` of two coupling powers is observed through noisy
pilots as ``Y = |c1 + z1|^2 / |c2 + z2|^2``. Expanding ``|c + z|^2`` gives
``|c|^2 + eps + zeta`` with ``eps ~ N(0, 2 sigma_z^2 |c|^2)`` and
``zeta ~ Gamma(1, sigma_z^2)``; the thresholds ``c_u``/``c_l`` are picked so
that a worse beam rarely looks better (and vice versa).
"""

from dataclasses import dataclass

import numpy as np

from .qtracker import RewardThresholds

EXACT = "exact"
INDEPENDENT = "independent"
DEFAULT_X_GRID = tuple(np.round(np.arange(0.5, 1.5001, 0.1), 10))


class Unreachable(RuntimeError):
    pass


@dataclass(frozen=True)
class ExceedEstimate:
    prob: float
    stderr: float
    n_samples: int


def _noisy_power(power, sigma_z_sq, rng, size, method):
    if method == EXACT:
        # eps and zeta come from the same complex noise draw
        z = np.sqrt(sigma_z_sq / 2.0) * (rng.standard_normal(size) + 1j * rng.standard_normal(size))
        return np.abs(np.sqrt(power) + z) ** 2
    if method == INDEPENDENT:
        eps = rng.normal(0.0, np.sqrt(2.0 * sigma_z_sq * power), size)
        zeta = rng.gamma(1.0, sigma_z_sq, size) if sigma_z_sq > 0 else np.zeros(size)
        return np.maximum(power + eps + zeta, 0.0)
    raise ValueError(f"unknown method {method!r}")


def sample_y(x, signal_power, sigma_z_sq, rng, size=None, method=EXACT):
    """Draw observed ratios ``Y`` for a true ratio ``x``.

    ``signal_power`` is the denominator coupling power; the numerator's is
    ``x * signal_power``. ``method="exact"`` expands one complex noise draw
    per observation, so powers are never negative. ``method="independent"``
    draws ``eps`` and ``zeta`` separately and clamps negative powers at 0.
    """
    if signal_power <= 0 or x <= 0:
        raise ValueError("signal_power and x must be positive")
    n = 1 if size is None else size
    num = _noisy_power(x * signal_power, sigma_z_sq, rng, n, method)
    den = _noisy_power(signal_power, sigma_z_sq, rng, n, method)
    with np.errstate(divide="ignore"):
        y = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.inf)
    return float(y[0]) if size is None else y


def sigma_z_sq_for(snr_db, signal_power=1.0):
    return signal_power / 10.0 ** (snr_db / 10.0)


def prob_exceed(x, snr_db, c_u, n_samples, rng, method=EXACT):
    """Estimate ``Prob(Y > c_u)`` with its binomial standard error; SNR is ``|c_den|^2 / sigma_z^2``."""
    if n_samples < 10_000:
        raise ValueError("use at least 1e4 samples")
    y = sample_y(x, 1.0, sigma_z_sq_for(snr_db), rng, n_samples, method)
    p = float(np.mean(y > c_u))
    return ExceedEstimate(p, float(np.sqrt(p * (1.0 - p) / n_samples)), n_samples)


def calibrate(snr_db, target_false_positive=0.1, x_grid=DEFAULT_X_GRID, rng=None,
              n_samples=100_000, c_step=0.01, c_max=3.0, method=EXACT):
    """Smallest ``c_u >= 1`` and largest ``c_l <= 1`` meeting the false-reward target.

    ``c_u``: for every ``x < 1`` in ``x_grid``, ``Prob(Y > c_u) <= target``.
    ``c_l``: for every ``x > 1``, ``Prob(Y < c_l) <= target``. Both are
    searched on a grid of step ``c_step`` with common random numbers.
    """
    if not 0 < target_false_positive <= 0.5:
        raise ValueError("target must lie in (0, 0.5]")
    rng = np.random.default_rng(0) if rng is None else rng
    s2 = sigma_z_sq_for(snr_db)
    below = [x for x in x_grid if 0 < x < 1]
    above = [x for x in x_grid if x > 1]
    ys_below = [sample_y(x, 1.0, s2, rng, n_samples, method) for x in below]
    ys_above = [sample_y(x, 1.0, s2, rng, n_samples, method) for x in above]
    n_grid = int(round((c_max - 1.0) / c_step))
    c_u = c_l = None
    for i in range(n_grid + 1):
        c = 1.0 + i * c_step
        if all(np.mean(y > c) <= target_false_positive for y in ys_below):
            c_u = c
            break
    for i in range(int(round(1.0 / c_step))):
        c = 1.0 - i * c_step
        if c <= 0:
            break
        if all(np.mean(y < c) <= target_false_positive for y in ys_above):
            c_l = c
            break
    if c_u is None or c_l is None:
        raise Unreachable(f"no thresholds meet target {target_false_positive} at {snr_db} dB")
    return RewardThresholds(c_u=round(c_u, 10), c_l=round(c_l, 10))


def exceed_curves(snr_dbs=(20.0, 50.0), c_us=(1.0, 1.05, 1.1, 1.2), x_grid=DEFAULT_X_GRID,
                  n_samples=100_000, seed=0, method=EXACT):
    """Rows ``(x, snr_db, c_u, prob, stderr)`` for the exceedance-probability curves."""
    rows = []
    for i, snr in enumerate(snr_dbs):
        for j, c in enumerate(c_us):
            for k, x in enumerate(x_grid):
                rng = np.random.default_rng(np.random.SeedSequence([seed, i, j, k]))
                est = prob_exceed(x, snr, c, n_samples, rng, method)
                rows.append((float(x), float(snr), float(c), est.prob, est.stderr))
    return rows
