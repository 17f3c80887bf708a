"""Adaptive random-walk Metropolis with multi-chain diagnostics.

During warmup the proposal is tuned in two ways: a Robbins-Monro update of
a global log step size drives the acceptance rate towards ``target_accept``,
and the proposal covariance is re-estimated from the chain at the end of
each of a doubling series of windows. Everything is frozen once warmup
ends, so the retained draws come from a fixed Markov kernel.

Each chain owns a random stream derived from ``(seed, chain_index)``; a
chain's output does not depend on how many other chains run or in what
order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import gammaln

from ..errors import ConfigError, ConvergenceError, InsufficientDataError
from .diagnostics import ess, split_rhat
from .models import ModelSpec, RegressionTarget

log = logging.getLogger(__name__)

MIN_ROWS = 10
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
JUMP_DF = 4.0  # Student-t degrees of freedom of the Laplace jump component


@dataclass
class MCMCConfig:
    n_chains: int = 4
    n_warmup: int = 2000
    n_draws: int = 2000
    seed: int = 0
    target_accept: float = 0.234
    adapt: str = "full"
    rhat_max: float = 1.1
    n_init: int = 100
    collapse: bool = True
    jump_prob: float = 0.3

    def __post_init__(self):
        if self.n_chains < 2:
            raise ConfigError("n_chains must be >= 2 so R-hat can be computed")
        if self.n_draws < 4 or self.n_warmup < 0:
            raise ConfigError("need n_draws >= 4 and n_warmup >= 0")
        if not 0 < self.target_accept < 1:
            raise ConfigError("target_accept must lie in (0, 1)")
        if not 0 <= self.jump_prob < 1:
            raise ConfigError("jump_prob must lie in [0, 1)")
        if self.adapt not in ("full", "diagonal"):
            raise ConfigError(f"adapt must be 'full' or 'diagonal', got {self.adapt!r}")

    def replace(self, **changes) -> "MCMCConfig":
        return MCMCConfig(**{**asdict(self), **changes})


@dataclass
class ChainResult:
    draws: np.ndarray  # (n_draws, dim), constrained coordinates
    loglik: np.ndarray  # (n_draws,)
    accept_rate: float
    warmup_accept_rate: float
    step_size: float
    proposal_cov: np.ndarray
    init: np.ndarray
    jump_accept_rate: float = float("nan")


def chain_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def _windows(n_warmup: int) -> list[int]:
    """Iterations after which the proposal covariance is re-estimated."""
    if n_warmup < 20:
        return []
    start = int(0.15 * n_warmup)
    end = n_warmup - int(0.1 * n_warmup)
    size = max((end - start) // 15, 10)
    bounds = []
    pos = start
    while pos + size < end:
        nxt = pos + size
        # Fold a short final window into the previous one.
        if end - nxt < 2 * size:
            nxt = end
        bounds.append(nxt)
        pos = nxt
        size *= 2
    if not bounds or bounds[-1] != end:
        bounds.append(end)
    return bounds


def _initial_scale(target) -> np.ndarray:
    sd = getattr(target, "_prior_sd", None)
    scale = np.full(target.dim, 0.1)
    if sd is not None:
        scale[: len(sd)] = 0.01 * np.asarray(sd)
    slopes = getattr(target, "slope_index", None)
    if slopes is not None:
        scale[slopes] = 0.1  # asinh coordinates
    return scale


def _estimate_cov(window: np.ndarray, adapt: str, previous: np.ndarray) -> np.ndarray:
    n, dim = window.shape
    if n < 2 * dim + 2:
        return previous
    if adapt == "diagonal":
        cov = np.diag(np.var(window, axis=0, ddof=1))
    else:
        cov = np.atleast_2d(np.cov(window, rowvar=False))
    diag = np.diag(cov).copy()
    if not np.all(diag > 0):
        # A stuck window carries no information about scale.
        return previous
    # Shrink towards the diagonal, scale-free.
    cov = n / (n + 5.0) * cov + 5.0 / (n + 5.0) * 1e-3 * np.diag(diag)
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        return np.diag(diag)
    return cov


def _tempered(betas: np.ndarray, ll: np.ndarray, lpj: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        out = np.where(betas == 0, lpj, betas * ll + lpj)
    out[~(out > -math.inf)] = -math.inf
    return out


def _joint(target, U: np.ndarray):
    """Batched ``(theta, loglik, logprior + logjacobian)``, looping for plain targets."""
    if hasattr(target, "batch_log_density"):
        return target.batch_log_density(U)
    thetas, lls, lpjs = [], [], []
    for u in U:
        theta = target.from_unconstrained(u)
        lp = target.log_prior(theta)
        ll = target.log_likelihood(theta) if lp > -math.inf else -math.inf
        thetas.append(theta)
        lls.append(ll)
        lpjs.append(lp + target.log_jacobian(u) if lp > -math.inf else -math.inf)
    return np.array(thetas), np.array(lls, dtype=float), np.array(lpjs, dtype=float)


def _initial_point(target, config: MCMCConfig, rng: np.random.Generator, beta: float,
                   n_polish: int = 4) -> np.ndarray:
    """Best of ``n_init`` prior-based candidates.

    When data are in play the ``n_polish`` best candidates are also
    polished and the best polished point wins if it improves on them; one
    polish alone can stall in a poor local basin.
    """
    n_init = max(config.n_init, 1)
    if hasattr(target, "init_candidates"):
        candidates = target.init_candidates(rng, n_init)
    else:
        candidates = [target.prior_draw(rng) for _ in range(n_init)]
    U = np.array([target.to_unconstrained(c) for c in candidates])
    _, ll, lpj = _joint(target, U)
    lt = _tempered(np.full(len(U), float(beta)), ll, lpj)
    order = np.argsort(-lt, kind="stable")
    u, best_lt = U[order[0]], lt[order[0]]
    if beta > 0 and hasattr(target, "polish"):
        for i in order[:n_polish]:
            if not lt[i] > -math.inf:
                break
            polished = target.polish(target.from_unconstrained(U[i]))
            if polished is None:
                continue
            pu = target.to_unconstrained(polished)
            _, pll, plpj = _joint(target, pu[None, :])
            plt = _tempered(np.array([beta]), pll, plpj)[0]
            if plt > best_lt:
                u, best_lt = pu, plt
    return u


def _free_density(target, U: np.ndarray, betas: np.ndarray, collapsed: bool) -> np.ndarray:
    if collapsed:
        theta, log_jac = target.batch_from_unconstrained(U)
        value = target.batch_collapsed(theta, betas)[0] + log_jac
    else:
        _, ll, lpj = _joint(target, U)
        value = _tempered(betas, ll, lpj)
    value[~(value > -math.inf)] = -math.inf
    return value


def _laplace(target, config: MCMCConfig, free: np.ndarray, collapsed: bool):
    """Gaussian approximation ``(center, chol)`` of the posterior over ``free``.

    The center is a polished start point; the covariance is the inverse of
    a finite-difference Hessian whose steps are sized so the density drops
    by about one nat along each axis. Directions of non-negative curvature
    get the broadest variance among the well-curved ones. Returns ``None``
    when no direction is well curved.
    """
    u0 = _initial_point(target, config, chain_rng(config.seed, 2_000_000), 1.0)
    one = np.ones(1)

    def f(x):
        u = u0.copy()
        u[free] = x
        return _free_density(target, u[None, :], one, collapsed)[0]

    x0 = u0[free]
    f0 = f(x0)
    if not math.isfinite(f0):
        return None
    d = len(x0)
    eye = np.eye(d)
    h = np.empty(d)
    for i in range(d):
        step = 1e-3 * max(1.0, abs(x0[i]))
        for _ in range(80):
            drop = f0 - 0.5 * (f(x0 + step * eye[i]) + f(x0 - step * eye[i]))
            if not drop < 4.0:
                step /= 2.0
            elif drop < 0.25:
                step *= 2.0
            else:
                break
        h[i] = step
    H = np.empty((d, d))
    for i in range(d):
        H[i, i] = (f(x0 + h[i] * eye[i]) - 2 * f0 + f(x0 - h[i] * eye[i])) / h[i] ** 2
        for j in range(i):
            hi, hj = h[i] * eye[i], h[j] * eye[j]
            H[i, j] = H[j, i] = (
                f(x0 + hi + hj) - f(x0 + hi - hj) - f(x0 - hi + hj) + f(x0 - hi - hj)
            ) / (4 * h[i] * h[j])
    if not np.all(np.isfinite(H)):
        return None
    evals, evecs = np.linalg.eigh(-0.5 * (H + H.T))
    good = evals > 0
    if not good.any():
        return None
    evals = np.where(good, evals, evals[good].min())
    cov = (evecs / evals) @ evecs.T
    return x0, np.linalg.cholesky(0.5 * (cov + cov.T))


class _ChainBatch:
    """Independent random-walk Metropolis chains advanced in lockstep.

    Row ``j`` targets ``betas[j] * loglik + logprior`` and draws every random
    number from ``rngs[j]``, so its trajectory does not depend on which other
    chains share the batch. State is kept in unconstrained coordinates;
    ``lpj`` is the log prior plus log Jacobian.

    For targets that are conditionally linear in some parameters (those
    exposing ``batch_collapsed``), the random walk moves only the remaining
    block under the density with the linear block integrated out; the
    linear block is then redrawn exactly from its conditional.

    With probability ``jump_prob`` an iteration replaces the random-walk
    step by an independence proposal: an equal mixture of a Student-t
    centred on a Laplace approximation of the posterior, widened by
    ``1 / sqrt(beta)``, and the prior of the moving block (collapsed
    targets only). Rows at ``beta = 0`` of a collapsed target always take
    a prior draw, which that row's target accepts with probability one, so
    the prior rung is sampled exactly. Tempered chains
    otherwise stay in whichever of the broad prior-dominated basin and the
    data mode they first reach, since the random walk cannot cross between
    them.
    """

    def __init__(self, target, config: MCMCConfig, rngs: list[np.random.Generator], betas):
        self.target = target
        self.config = config
        self.betas = np.asarray(betas, dtype=float)
        rows = len(self.betas)
        self.collapsed = config.collapse and hasattr(target, "batch_collapsed")
        self.free = target.free_index if self.collapsed else np.arange(target.dim)
        dim = len(self.free)

        n_total = config.n_warmup + config.n_draws
        starts, z, log_u, z_lin, jumps, picks, chi = [], [], [], [], [], [], []
        for rng, beta in zip(rngs, self.betas):
            starts.append(_initial_point(target, config, rng, beta))
            z.append(rng.standard_normal((n_total, dim)))
            log_u.append(np.log(rng.random(n_total)))
            if self.collapsed:
                z_lin.append(rng.standard_normal((n_total, len(target.linear_index))))
            jumps.append(rng.random(n_total) < config.jump_prob)
            picks.append(rng.random(n_total) < 0.5)
            chi.append(rng.chisquare(JUMP_DF, n_total))
        self.z, self.log_u = np.stack(z), np.stack(log_u)
        self.z_lin = np.stack(z_lin) if self.collapsed else None
        self.laplace = _laplace(target, config, self.free, self.collapsed) if config.jump_prob > 0 else None
        self.jumps = np.stack(jumps) & (self.betas > 0)[:, None]
        if self.laplace is None:
            self.jumps[:] = False
        self.mix = self.collapsed and hasattr(target, "free_prior_logpdf")
        # True: draw the jump from the prior component.
        self.picks = np.stack(picks) & self.mix
        self.chi = np.stack(chi)
        self.exact_prior = (self.betas == 0) & self.mix
        self.jumps[self.exact_prior] = True
        self.picks[self.exact_prior] = True
        self.q_cur = None  # jump density at the current free coordinates
        self.n_jump = np.zeros(rows)
        self.n_jump_acc = np.zeros(rows)

        self.u = np.stack(starts)
        self.theta, self.ll, self.lpj = _joint(target, self.u)
        if not np.all(self.log_target > -math.inf):
            raise ConvergenceError("no initial candidate with finite target density")
        self.init = self.theta.copy()
        self.stale = np.ones(rows, dtype=bool)  # collapsed state not yet evaluated
        self.c_value = np.full(rows, -math.inf)
        self.c_mean = self.c_chol = None

        self.base_log_step = math.log(2.38 / math.sqrt(dim))
        self.log_step = np.full(rows, self.base_log_step)
        cov0 = np.diag(_initial_scale(target)[self.free] ** 2)
        self.cov = np.repeat(cov0[None], rows, axis=0)
        self.chol = np.linalg.cholesky(self.cov)
        self.windows = _windows(config.n_warmup)
        self.win_start = int(0.15 * config.n_warmup)
        self.win_draws: list[np.ndarray] = []
        self.rm_t = 0
        self.n_acc_warm = np.zeros(rows)
        self.n_acc = np.zeros(rows)
        self.n_walk_warm = np.zeros(rows)
        self.n_walk = np.zeros(rows)

    @property
    def log_target(self) -> np.ndarray:
        return _tempered(self.betas, self.ll, self.lpj)

    def _collapsed(self, U: np.ndarray, betas: np.ndarray):
        theta, log_jac = self.target.batch_from_unconstrained(U)
        value, mean, chol = self.target.batch_collapsed(theta, betas)
        value = value + log_jac
        value[~(value > -math.inf)] = -math.inf
        return value, mean, chol

    def _refresh(self) -> None:
        idx = np.flatnonzero(self.stale)
        if not len(idx):
            return
        value, mean, chol = self._collapsed(self.u[idx], self.betas[idx])
        if self.c_mean is None:
            self.c_mean = np.empty((len(self.u),) + mean.shape[1:])
            self.c_chol = np.empty((len(self.u),) + chol.shape[1:])
        self.c_value[idx], self.c_mean[idx], self.c_chol[idx] = value, mean, chol
        self.stale[idx] = False

    def _jump_log_q(self, x: np.ndarray) -> np.ndarray:
        """Log density of the jump mixture at rows of ``x`` (one temperature per row)."""
        center, chol = self.laplace
        d = len(center)
        nu = JUMP_DF
        w = np.linalg.solve(chol, (x - center).T)
        with np.errstate(divide="ignore"):
            m2 = self.betas * np.sum(w * w, axis=0)
            lap = (
                gammaln(0.5 * (nu + d)) - gammaln(0.5 * nu) - 0.5 * d * math.log(nu * math.pi)
                - np.sum(np.log(np.diag(chol))) + 0.5 * d * np.log(self.betas)
                - 0.5 * (nu + d) * np.log1p(m2 / nu)
            )
        if not self.mix:
            return lap
        prior = self.target.free_prior_logpdf(x)
        return np.logaddexp(lap, prior) - math.log(2.0)

    def _metropolis(self, it: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        prop = self.u.copy()
        z = self.z[:, it]
        prop[:, self.free] += np.exp(self.log_step)[:, None] * np.einsum("cij,cj->ci", self.chol, z)
        jump = self.jumps[:, it]
        correction = np.zeros(len(self.u))
        if jump.any():
            pick = self.picks[jump, it]
            jumped = np.empty((int(jump.sum()), len(self.free)))
            if pick.any():
                jumped[pick] = self.target.free_prior_from_normal(z[jump][pick])
            if not pick.all():
                center, chol = self.laplace
                rows = jump & ~self.picks[:, it]
                scale = np.sqrt(JUMP_DF / self.chi[rows, it] / self.betas[rows])[:, None]
                jumped[~pick] = center + scale * (z[rows] @ chol.T)
            prop[np.ix_(np.flatnonzero(jump), self.free)] = jumped
            mixed = jump & ~self.exact_prior
            if mixed.any():
                if self.q_cur is None:
                    self.q_cur = self._jump_log_q(self.u[:, self.free])
                q_prop = self._jump_log_q(prop[:, self.free])
                correction[mixed] = self.q_cur[mixed] - q_prop[mixed]
            exact = jump & self.exact_prior
            if exact.any():
                # Proposal equals target: the ratio is exactly one.
                correction[exact] = (
                    self.target.free_prior_logpdf(self.u[exact][:, self.free])
                    - self.target.free_prior_logpdf(prop[exact][:, self.free])
                )

        if self.collapsed:
            self._refresh()
            current = self.c_value
            lt, mean, chol = self._collapsed(prop, self.betas)
        else:
            current = self.log_target
            theta, ll, lpj = _joint(self.target, prop)
            lt = _tempered(self.betas, ll, lpj)
        with np.errstate(invalid="ignore"):
            log_alpha = np.where(
                lt == -math.inf, -math.inf,
                np.where(current == -math.inf, math.inf, lt - current + correction),
            )
        log_alpha[np.isnan(log_alpha)] = -math.inf
        acc = self.log_u[:, it] < log_alpha
        self.u[acc] = prop[acc]
        if self.q_cur is not None:
            if (jump & ~self.exact_prior).any():
                self.q_cur[acc] = q_prop[acc]
            elif acc.any():
                self.q_cur = None
        if not self.collapsed:
            self.theta[acc], self.ll[acc], self.lpj[acc] = theta[acc], ll[acc], lpj[acc]
            return log_alpha, acc, jump

        self.c_value[acc] = lt[acc]
        self.c_mean[acc], self.c_chol[acc] = mean[acc], chol[acc]
        ok = self.c_value > -math.inf
        if ok.any():
            self.u[ok] = self.target.batch_draw_linear(
                self.u[ok], self.c_mean[ok], self.c_chol[ok], self.z_lin[ok, it]
            )
        self.theta, self.ll, self.lpj = _joint(self.target, self.u)
        return log_alpha, acc, jump

    def step(self, it: int) -> None:
        cfg = self.config
        log_alpha, acc, jump = self._metropolis(it)
        walk = ~jump
        self.n_jump += jump
        self.n_jump_acc += acc & jump
        if it >= cfg.n_warmup:
            self.n_acc += acc & walk
            self.n_walk += walk
            return
        self.n_acc_warm += acc & walk
        self.n_walk_warm += walk
        self.rm_t += 1
        alpha = np.exp(np.minimum(0.0, log_alpha))
        self.log_step[walk] += self.rm_t ** -0.6 * (alpha[walk] - cfg.target_accept)
        if it >= self.win_start:
            self.win_draws.append(self.u[:, self.free].copy())
        if self.windows and it + 1 == self.windows[0]:
            self.windows.pop(0)
            window = np.stack(self.win_draws, axis=1)
            for j in range(len(self.u)):
                self.cov[j] = _estimate_cov(window[j], cfg.adapt, self.cov[j])
            self.chol = np.linalg.cholesky(self.cov)
            self.win_draws = []
            self.log_step[:] = self.base_log_step
            self.rm_t = 0

    def permute(self, order: np.ndarray) -> None:
        """Row ``j`` takes the state of row ``order[j]``; proposals stay put."""
        moved = order != np.arange(len(order))
        if not moved.any():
            return
        self.u, self.theta, self.ll, self.lpj = self.u[order], self.theta[order], self.ll[order], self.lpj[order]
        self.stale |= moved
        self.q_cur = None  # the jump density depends on the row's temperature

    def _rate(self, n_acc: float, n_walk: float, j: int) -> float:
        # Exact prior rows never take walk steps; report their jump rate.
        if self.exact_prior[j]:
            return float(self.n_jump_acc[j] / max(self.n_jump[j], 1))
        return float(n_acc / max(n_walk, 1))

    def results(self, draws: np.ndarray, loglik: np.ndarray) -> list[ChainResult]:
        cfg = self.config
        return [
            ChainResult(
                draws=draws[j],
                loglik=loglik[j],
                accept_rate=self._rate(self.n_acc[j], self.n_walk[j], j),
                warmup_accept_rate=self._rate(self.n_acc_warm[j], self.n_walk_warm[j], j),
                step_size=float(math.exp(self.log_step[j])),
                proposal_cov=self.cov[j],
                init=self.init[j],
                jump_accept_rate=float(self.n_jump_acc[j] / self.n_jump[j]) if self.n_jump[j] else float("nan"),
            )
            for j in range(len(self.u))
        ]


def _run(batch: _ChainBatch, on_iteration=None) -> list[ChainResult]:
    cfg = batch.config
    rows = len(batch.betas)
    draws = np.empty((rows, cfg.n_draws, batch.target.dim))
    loglik = np.empty((rows, cfg.n_draws))
    for it in range(cfg.n_warmup + cfg.n_draws):
        batch.step(it)
        if on_iteration is not None:
            on_iteration(it)
        k = it - cfg.n_warmup
        if k >= 0:
            draws[:, k] = batch.theta
            loglik[:, k] = batch.ll
    return batch.results(draws, loglik)


def sample_chain(target, config: MCMCConfig, chain_index: int, beta: float = 1.0) -> ChainResult:
    """Run one chain on the power posterior ``beta * loglik + logprior``."""
    batch = _ChainBatch(target, config, [chain_rng(config.seed, chain_index)], [beta])
    return _run(batch)[0]


def sample_tempered(target, config: MCMCConfig, betas, ensembles=None,
                    swap_sweeps: int = 10) -> list[list[ChainResult]]:
    """Independent replica-exchange ensembles over a temperature ladder.

    Each ensemble runs one chain per temperature; every rung adapts its own
    proposal. After every Metropolis step, ``swap_sweeps`` alternating
    even/odd sweeps of neighbour swaps are proposed. Swaps cost no
    likelihood evaluations, and repeating them lets states reach their
    natural temperature quickly. Returns, per ensemble, one ``ChainResult``
    per temperature in ``betas`` order.
    """
    betas = np.asarray(betas, dtype=float)
    ensembles = list(range(config.n_chains) if ensembles is None else ensembles)
    n_rungs, n_ens = len(betas), len(ensembles)
    rngs = [chain_rng(config.seed, e, k) for e in ensembles for k in range(n_rungs)]
    batch = _ChainBatch(target, config, rngs, np.tile(betas, n_ens))
    swap_rngs = [chain_rng(config.seed, e, 1_000_000) for e in ensembles]
    dbeta = np.diff(betas)

    def swap(it: int) -> None:
        if n_rungs < 2 or swap_sweeps <= 0:
            return
        order = np.arange(n_rungs * n_ens)
        ll_all = batch.ll
        for e, rng in enumerate(swap_rngs):
            base = e * n_rungs
            ll = ll_all[base: base + n_rungs]
            perm = np.arange(n_rungs)
            log_u = np.log(rng.random((swap_sweeps, n_rungs - 1)))
            for sweep in range(swap_sweeps):
                lo = np.arange((it * swap_sweeps + sweep) % 2, n_rungs - 1, 2)
                with np.errstate(invalid="ignore"):
                    log_alpha = dbeta[lo] * (ll[perm[lo]] - ll[perm[lo + 1]])
                # NaN (two zero-likelihood states) compares False: no swap.
                acc = lo[log_u[sweep, lo] < log_alpha]
                perm[acc], perm[acc + 1] = perm[acc + 1], perm[acc].copy()
            order[base: base + n_rungs] = base + perm
        batch.permute(order)

    results = _run(batch, swap)
    return [results[e * n_rungs:(e + 1) * n_rungs] for e in range(n_ens)]


def _check_alive(chains: list[ChainResult], label: str = "chain") -> None:
    dead = [i for i, ch in enumerate(chains) if ch.accept_rate == 0.0]
    if dead:
        dump = "; ".join(
            f"{label} {i}: warmup acceptance {chains[i].warmup_accept_rate:.3f}, "
            f"step {chains[i].step_size:.3g}, init {np.array2string(chains[i].init, precision=4)}"
            for i in dead
        )
        raise ConvergenceError(f"all proposals rejected after warmup ({dump})")


def sample_target(target, config: MCMCConfig, beta: float = 1.0) -> list[ChainResult]:
    rngs = [chain_rng(config.seed, c) for c in range(config.n_chains)]
    chains = _run(_ChainBatch(target, config, rngs, np.full(config.n_chains, float(beta))))
    _check_alive(chains)
    return chains


@dataclass
class PosteriorResult:
    """Posterior draws of one fitted model plus summaries and diagnostics."""

    names: tuple[str, ...]
    samples: np.ndarray  # (n_chains, n_draws, dim)
    loglik: np.ndarray  # (n_chains, n_draws)
    chain_acceptance: list[float]
    config: MCMCConfig
    spec: ModelSpec | None = None
    sigma_scale: float | None = None
    n_rows: int = 0
    n_clamped: int = 0
    log_marginal_likelihood: float | None = None
    lml_mc_error: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.diagnostics:
            self.diagnostics = {
                name: {
                    "rhat": split_rhat(self.samples[:, :, j]),
                    "ess": ess(self.samples[:, :, j]),
                }
                for j, name in enumerate(self.names)
            }

    @property
    def acceptance_rate(self) -> float:
        return float(np.mean(self.chain_acceptance))

    @property
    def max_rhat(self) -> float:
        return max(d["rhat"] for d in self.diagnostics.values())

    @property
    def converged(self) -> bool:
        return self.max_rhat <= self.config.rhat_max

    def flat(self) -> np.ndarray:
        """Draw x parameter matrix with chains concatenated."""
        return self.samples.reshape(-1, self.samples.shape[-1])

    def column(self, name: str) -> np.ndarray:
        return self.flat()[:, self.names.index(name)]

    def mean_params(self) -> np.ndarray:
        return self.flat().mean(axis=0)

    def summaries(self) -> dict[str, dict[str, float]]:
        flat = self.flat()
        out = {}
        for j, name in enumerate(self.names):
            x = flat[:, j]
            lo, hi = np.quantile(x, [0.025, 0.975])
            out[name] = {
                "mean": float(x.mean()),
                "sd": float(x.std(ddof=1)),
                "q2.5": float(lo),
                "q97.5": float(hi),
            }
        return out

    def credible_interval(self, name: str, level: float = 0.95) -> tuple[float, float]:
        tail = (1 - level) / 2
        lo, hi = np.quantile(self.column(name), [tail, 1 - tail])
        return float(lo), float(hi)


def run_target(target, config: MCMCConfig, spec: ModelSpec | None = None) -> PosteriorResult:
    target.n_clamped = 0
    chains = sample_target(target, config)
    result = PosteriorResult(
        names=tuple(target.names),
        samples=np.stack([c.draws for c in chains]),
        loglik=np.stack([c.loglik for c in chains]),
        chain_acceptance=[c.accept_rate for c in chains],
        config=config,
        spec=spec,
        sigma_scale=getattr(target, "sigma_scale", None),
        n_rows=getattr(target, "n", 0),
        n_clamped=getattr(target, "n_clamped", 0),
    )
    if not result.converged:
        log.warning(
            "%s: max R-hat %.3f exceeds %.2f",
            spec.name if spec else "target", result.max_rhat, config.rhat_max,
        )
    return result


def run_mcmc(spec: ModelSpec, table, config: MCMCConfig | None = None, force: bool = False,
             sigma_scale: float | None = None) -> PosteriorResult:
    """Fit ``spec`` to ``table`` by adaptive random-walk Metropolis.

    Tables with fewer than 10 rows are refused unless ``force`` is set.
    A result whose R-hat exceeds ``config.rhat_max`` is still returned, with
    ``converged`` False.
    """
    config = config or MCMCConfig()
    target = RegressionTarget.from_table(spec, table, sigma_scale)
    if target.n < MIN_ROWS:
        if not force:
            raise InsufficientDataError(
                f"{spec.name}: {target.n} rows, need at least {MIN_ROWS} (use force to override)"
            )
        log.warning("%s: fitting only %d rows (forced)", spec.name, target.n)
    return run_target(target, config, spec)
