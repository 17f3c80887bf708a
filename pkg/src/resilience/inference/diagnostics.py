"""Split R-hat, effective sample size and Monte Carlo standard error.

All functions take draws shaped ``(n_chains, n_draws)`` for one scalar
quantity.
"""

from __future__ import annotations

import numpy as np


def _as_chains(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise ValueError("draws must be shaped (n_chains, n_draws)")
    return x


def _split(x: np.ndarray) -> np.ndarray:
    half = x.shape[1] // 2
    if half < 2:
        return x
    return np.concatenate([x[:, :half], x[:, -half:]], axis=0)


def split_rhat(draws) -> float:
    """Potential scale reduction on split chains."""
    x = _split(_as_chains(draws))
    m, n = x.shape
    if m < 2 or n < 2:
        return float("nan")
    w = np.mean(np.var(x, axis=1, ddof=1))
    b_over_n = np.var(np.mean(x, axis=1), ddof=1)
    if w == 0:
        return 1.0 if b_over_n == 0 else float("inf")
    var_plus = (n - 1) / n * w + b_over_n
    return float(np.sqrt(var_plus / w))


def _autocov(x: np.ndarray) -> np.ndarray:
    """Biased autocovariance of each row, by FFT."""
    n = x.shape[1]
    centered = x - x.mean(axis=1, keepdims=True)
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(centered, n=size, axis=1)
    acov = np.fft.irfft(f * np.conjugate(f), n=size, axis=1)[:, :n]
    return acov / n


def ess(draws) -> float:
    """Multi-chain effective sample size with Geyer's initial monotone sequence."""
    x = _as_chains(draws)
    m, n = x.shape
    if n < 4:
        return float(m * n)
    acov = _autocov(x)
    chain_var = acov[:, 0] * n / (n - 1)
    w = chain_var.mean()
    var_plus = w * (n - 1) / n
    if m > 1:
        var_plus += np.var(x.mean(axis=1), ddof=1)
    if var_plus <= 0:
        return float(m * n)
    rho = 1.0 - (w - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0

    # Sum adjacent pairs while positive, forcing the pair sums to be monotone.
    tau = -1.0
    prev = np.inf
    t = 0
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair <= 0:
            break
        pair = min(pair, prev)
        tau += 2.0 * pair
        prev = pair
        t += 2
    # Antithetic chains can push tau below 1; cap ESS at N log10 N.
    tau = max(tau, 1.0 / np.log10(max(m * n, 10)))
    return float(m * n / tau)


def mcse_mean(draws) -> float:
    x = _as_chains(draws)
    return float(np.std(x, ddof=1) / np.sqrt(ess(x)))


def mcse_sd(draws) -> float:
    """Delta-method standard error of the posterior standard deviation."""
    x = _as_chains(draws)
    return float(np.std(x, ddof=1) / np.sqrt(2.0 * ess(x)))
