import math

import numpy as np
import pytest

from resilience.toy import make_toy

L2PI = 0.5 * math.log(2 * math.pi)


class NormalMean:
    """Normal mean with known sigma and a Normal prior; closed-form evidence."""

    names = ("mu",)
    dim = 1

    def __init__(self, y, sigma, m0, s0):
        self.y = np.asarray(y, dtype=float)
        self.n = len(self.y)
        self.sigma, self.m0, self.s0 = sigma, m0, s0

    def batch_log_density(self, U):
        mu = U[:, 0]
        lp = -L2PI - math.log(self.s0) - 0.5 * ((mu - self.m0) / self.s0) ** 2
        r = self.y[None, :] - mu[:, None]
        ll = -self.n * (L2PI + math.log(self.sigma)) - 0.5 * (r * r).sum(axis=1) / self.sigma**2
        return U.copy(), ll, lp

    def prior_draw(self, rng):
        return np.array([rng.normal(self.m0, self.s0)])

    def to_unconstrained(self, theta):
        return np.array(theta, dtype=float)

    def from_unconstrained(self, u):
        return np.array(u, dtype=float)

    def log_jacobian(self, u):
        return 0.0

    def exact_log_evidence(self):
        from scipy.stats import multivariate_normal

        cov = self.sigma**2 * np.eye(self.n) + self.s0**2 * np.ones((self.n, self.n))
        return float(multivariate_normal(np.full(self.n, self.m0), cov).logpdf(self.y))


@pytest.fixture(scope="session")
def toy_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("toy")
    make_toy(d, seed=0)
    return d


def multiplicative_data(seed, n=300, ln_a=-4.0, b1=0.04, b2=0.07, c=0.0, noise=0.05):
    rng = np.random.default_rng(seed)
    w1 = rng.uniform(0, 40, n)
    w2 = rng.uniform(0, 40, n)
    r = np.exp(ln_a + b1 * w1 + b2 * w2) + c + rng.normal(0, noise, n)
    return {"w1": w1, "w2": w2, "r": r, "precip_flag": (rng.random(n) < 0.4).astype(int)}


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one pass/fail line for the acceptance summary."""

    def emit(criterion, ok, detail):
        status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        line = f"criterion {criterion}: {status} ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
