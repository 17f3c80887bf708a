"""Regression model family linking peak weather to a resilience metric.

Three functional forms are supported::

    single_exp      R = a * exp(b * W) + c
    multiplicative  R = exp(ln_a + b1 * W1 + b2 * W2) + c
    additive        R = a1 * exp(b1 * W1) + a2 * exp(b2 * W2) + c

Every form carries independent Gaussian noise with scale ``sigma`` on the
(optionally transformed) response. Parameter vectors passed around this
package always end with ``sigma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np
from scipy.optimize import minimize

from ..errors import ConfigError, DataError

EXP_CLAMP = 700.0
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class Form(str, Enum):
    SINGLE_EXP = "single_exp"
    MULTIPLICATIVE = "multiplicative"
    ADDITIVE = "additive"


PARAMETERS: dict[Form, tuple[str, ...]] = {
    Form.SINGLE_EXP: ("a", "b", "c"),
    Form.MULTIPLICATIVE: ("ln_a", "b1", "b2", "c"),
    Form.ADDITIVE: ("a1", "b1", "a2", "b2", "c"),
}
N_PREDICTORS = {Form.SINGLE_EXP: 1, Form.MULTIPLICATIVE: 2, Form.ADDITIVE: 2}
# Parameters entering linearly once the others are fixed.
LINEAR_PARAMETERS = {
    Form.SINGLE_EXP: ("a", "c"),
    Form.MULTIPLICATIVE: ("c",),
    Form.ADDITIVE: ("a1", "a2", "c"),
}

# Normal(mean, sd) per parameter.
DEFAULT_PRIORS: dict[str, tuple[float, float]] = {
    "a": (0.0, 10.0),
    "ln_a": (0.0, 10.0),
    "a1": (0.0, 10.0),
    "a2": (0.0, 10.0),
    "b": (0.0, 1.0),
    "b1": (0.0, 1.0),
    "b2": (0.0, 1.0),
    "c": (0.0, 10.0),
}

RESPONSE_TRANSFORMS = ("identity", "log1p")

# Exponential slopes are sampled as asinh(b / tau) with tau = SLOPE_SCALE /
# sd(predictor). With the amplitude integrated out, the posterior of a
# weakly identified slope behaves like 1/|b| over several decades near
# zero; on the asinh scale that stretch is flat and a random walk covers it.
SLOPE_SCALE = 1e-3
SLOPE_PARAMETERS = {
    Form.SINGLE_EXP: ("b",),
    Form.MULTIPLICATIVE: ("b1", "b2"),
    Form.ADDITIVE: ("b1", "b2"),
}


@dataclass(frozen=True)
class ModelSpec:
    """Functional form, variables, priors and noise prior of one model.

    ``sigma_scale`` is the Half-Normal scale of the noise prior; ``None``
    means "sample standard deviation of the (transformed) training
    response", resolved when the model meets data.
    """

    form: Form
    predictors: tuple[str, ...]
    response: str
    priors: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    sigma_scale: float | None = None
    response_transform: str = "identity"
    name: str = ""
    transform_notes: str = ""

    def __post_init__(self):
        form = Form(self.form)
        object.__setattr__(self, "form", form)
        object.__setattr__(self, "predictors", tuple(self.predictors))
        if len(self.predictors) != N_PREDICTORS[form]:
            raise ConfigError(
                f"{form.value} takes {N_PREDICTORS[form]} predictor(s), "
                f"got {list(self.predictors)}"
            )
        unknown = set(self.priors) - set(PARAMETERS[form])
        if unknown:
            raise ConfigError(f"priors given for unknown parameters {sorted(unknown)}")
        priors = {}
        for p in PARAMETERS[form]:
            mean, sd = self.priors.get(p, DEFAULT_PRIORS[p])
            if not sd > 0:
                raise ConfigError(f"prior sd for {p} must be > 0, got {sd}")
            priors[p] = (float(mean), float(sd))
        object.__setattr__(self, "priors", priors)
        if self.sigma_scale is not None and not self.sigma_scale > 0:
            raise ConfigError(f"sigma_scale must be > 0, got {self.sigma_scale}")
        if self.response_transform not in RESPONSE_TRANSFORMS:
            raise ConfigError(f"unknown response transform {self.response_transform!r}")
        if not self.name:
            object.__setattr__(
                self, "name", f"{form.value}:{'+'.join(self.predictors)}->{self.response}"
            )
        if not self.transform_notes and self.response_transform == "log1p":
            object.__setattr__(
                self, "transform_notes", f"response modelled as log(1 + {self.response})"
            )

    @property
    def param_names(self) -> tuple[str, ...]:
        return PARAMETERS[self.form]

    @property
    def all_names(self) -> tuple[str, ...]:
        return self.param_names + ("sigma",)

    def transform(self, y):
        y = np.asarray(y, dtype=float)
        return np.log1p(y) if self.response_transform == "log1p" else y

    def inverse_transform(self, y):
        y = np.asarray(y, dtype=float)
        return np.expm1(y) if self.response_transform == "log1p" else y

    def design(self, table) -> tuple[np.ndarray, np.ndarray]:
        """Predictor matrix ``(n, k)`` and transformed response from a table.

        ``table`` is anything indexable by column name (an
        ``EventFeatureTable`` or a dict of arrays).
        """
        X = np.column_stack([np.asarray(table[p], dtype=float) for p in self.predictors])
        y = self.transform(table[self.response])
        check_finite(X, "predictor")
        check_finite(y, "response")
        return X.reshape(len(y), len(self.predictors)), y

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "form": self.form.value,
            "predictors": list(self.predictors),
            "response": self.response,
            "priors": {k: list(v) for k, v in self.priors.items()},
            "sigma_scale": self.sigma_scale,
            "response_transform": self.response_transform,
            "transform_notes": self.transform_notes,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelSpec":
        return cls(
            form=Form(d["form"]),
            predictors=tuple(d["predictors"]),
            response=d["response"],
            priors={k: tuple(v) for k, v in d.get("priors", {}).items()},
            sigma_scale=d.get("sigma_scale"),
            response_transform=d.get("response_transform", "identity"),
            name=d.get("name", ""),
            transform_notes=d.get("transform_notes", ""),
        )


def check_finite(values: np.ndarray, what: str) -> None:
    values = np.asarray(values, dtype=float)
    bad = ~np.isfinite(values)
    if bad.any():
        row = int(np.argwhere(bad)[0][0])
        raise DataError(f"non-finite {what} value in row {row}")


def _clamped_exp(z: np.ndarray) -> tuple[np.ndarray, int]:
    over = np.abs(z) > EXP_CLAMP
    n = int(np.count_nonzero(over))
    if n:
        z = np.clip(z, -EXP_CLAMP, EXP_CLAMP)
    return np.exp(z), n


def predict_counted(form: Form, params, X) -> tuple[np.ndarray, int]:
    """Vectorised prediction returning ``(prediction, n_clamped_exponents)``.

    ``params`` has shape ``(..., p)`` (a trailing sigma is ignored) and
    ``X`` shape ``(n, k)``; the result has shape ``(..., n)``.
    """
    params = np.asarray(params, dtype=float)
    X = np.asarray(X, dtype=float)
    P = lambda i: params[..., i, None]  # noqa: E731
    if form is Form.SINGLE_EXP:
        e, n = _clamped_exp(P(1) * X[:, 0])
        return P(0) * e + P(2), n
    if form is Form.MULTIPLICATIVE:
        e, n = _clamped_exp(P(0) + P(1) * X[:, 0] + P(2) * X[:, 1])
        return e + P(3), n
    e1, n1 = _clamped_exp(P(1) * X[:, 0])
    e2, n2 = _clamped_exp(P(3) * X[:, 1])
    return P(0) * e1 + P(2) * e2 + P(4), n1 + n2


def model_predict(spec: ModelSpec, params, features):
    """Predicted (transformed) response for one point or a batch of rows.

    ``features`` is either a length-k vector (returns a float) or an
    ``(n, k)`` matrix (returns an array of length n).
    """
    params = np.asarray(params, dtype=float)
    if params.shape[-1] not in (len(spec.param_names), len(spec.all_names)):
        raise ValueError(
            f"{spec.form.value} expects {len(spec.param_names)} parameters, "
            f"got {params.shape[-1]}"
        )
    X = np.asarray(features, dtype=float)
    scalar = X.ndim == 1
    X = X.reshape(1, -1) if scalar else X
    if X.shape[1] != len(spec.predictors):
        raise ValueError(f"expected {len(spec.predictors)} feature column(s), got {X.shape[1]}")
    check_finite(X, "feature")
    pred, _ = predict_counted(spec.form, params, X)
    if not scalar:
        return pred
    return float(pred[0]) if params.ndim == 1 else pred[..., 0]


def resolve_sigma_scale(spec: ModelSpec, y: np.ndarray) -> float:
    if spec.sigma_scale is not None:
        return spec.sigma_scale
    if len(y) >= 2:
        sd = float(np.std(y, ddof=1))
        if sd > 0:
            return sd
    return 1.0


class RegressionTarget:
    """Prior and Gaussian likelihood of one ModelSpec on fixed data.

    The sampler works in unconstrained coordinates where sigma is replaced
    by log(sigma) and each slope ``b`` by ``asinh(b / tau)``;
    ``to_unconstrained``/``from_unconstrained`` and ``log_jacobian`` handle
    that change of variables.
    """

    def __init__(self, spec: ModelSpec, X: np.ndarray, y: np.ndarray, sigma_scale: float | None = None):
        self.spec = spec
        self.X = np.asarray(X, dtype=float).reshape(len(y), len(spec.predictors))
        self.y = np.asarray(y, dtype=float)
        self.n = len(self.y)
        self.names = spec.all_names
        self.dim = len(self.names)
        self.sigma_scale = sigma_scale if sigma_scale is not None else resolve_sigma_scale(spec, self.y)
        pri = np.array([spec.priors[p] for p in spec.param_names])
        self._prior_mean = pri[:, 0]
        self._prior_sd = pri[:, 1]
        self._prior_const = -np.sum(np.log(self._prior_sd)) - len(pri) * _LOG_SQRT_2PI
        linear = LINEAR_PARAMETERS[spec.form]
        self.linear_index = np.array([spec.param_names.index(p) for p in linear])
        # Non-linear parameters, then sigma.
        self.free_index = np.array(
            [i for i, p in enumerate(spec.param_names) if p not in linear] + [self.dim - 1]
        )
        self._free_params = self.free_index[:-1]
        self._free_const = (
            -float(np.sum(np.log(self._prior_sd[self._free_params])))
            - len(self._free_params) * _LOG_SQRT_2PI
        )
        self._lin_mean = self._prior_mean[self.linear_index]
        self._lin_prec = 1.0 / self._prior_sd[self.linear_index] ** 2
        self._lin_chol0 = np.diag(np.sqrt(self._lin_prec))
        self._lin_prec_mat = np.diag(self._lin_prec)
        self._lin_prec_mean = self._lin_prec * self._lin_mean
        self._lin_quad0 = float(self._lin_prec_mean @ self._lin_mean)
        self._lin_half_logdet = 0.5 * float(np.sum(np.log(self._lin_prec)))
        self._yy = float(self.y @ self.y)
        self.slope_index = np.array([spec.param_names.index(p) for p in SLOPE_PARAMETERS[spec.form]])
        # Slope k multiplies predictor k in every form.
        sd = self.X.std(axis=0) if self.n >= 2 else np.ones(len(spec.predictors))
        self.slope_tau = SLOPE_SCALE / np.where(sd > 0, sd, 1.0)
        self._free_slope_pos = np.array(
            [k for k, i in enumerate(self._free_params) if i in self.slope_index], dtype=int
        )
        self._free_slope_tau = np.array(
            [self.slope_tau[list(self.slope_index).index(i)] for i in self._free_params if i in self.slope_index]
        )
        self.n_clamped = 0

    @classmethod
    def from_table(cls, spec: ModelSpec, table, sigma_scale: float | None = None) -> "RegressionTarget":
        X, y = spec.design(table)
        return cls(spec, X, y, sigma_scale)

    def log_prior(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        sigma = theta[-1]
        if not sigma > 0:
            return -math.inf
        z = (theta[:-1] - self._prior_mean) / self._prior_sd
        lp = self._prior_const - 0.5 * float(z @ z)
        s = self.sigma_scale
        return lp + math.log(2.0) - math.log(s) - _LOG_SQRT_2PI - 0.5 * (sigma / s) ** 2

    def log_likelihood(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        sigma = theta[-1]
        if not sigma > 0:
            return -math.inf
        if self.n == 0:
            return 0.0
        pred, n_clamped = predict_counted(self.spec.form, theta, self.X)
        self.n_clamped += n_clamped
        r = self.y - pred
        ss = float(r @ r)
        if not math.isfinite(ss):
            return -math.inf
        return -self.n * (_LOG_SQRT_2PI + math.log(sigma)) - 0.5 * ss / sigma**2

    def log_posterior(self, theta) -> float:
        lp = self.log_prior(theta)
        if lp == -math.inf:
            return lp
        return lp + self.log_likelihood(theta)

    def prior_draw(self, rng: np.random.Generator) -> np.ndarray:
        params = rng.normal(self._prior_mean, self._prior_sd)
        sigma = abs(rng.normal(0.0, self.sigma_scale))
        return np.append(params, max(sigma, 1e-12))

    def profile_linear(self, theta) -> np.ndarray | None:
        """Keep the slopes of ``theta``, refit amplitudes and offset by least squares.

        Every form is linear in its amplitude(s) and ``c`` once the slopes
        are fixed. Sigma becomes the residual RMS. Returns ``None`` when the
        data cannot support the refit.
        """
        form = self.spec.form
        if self.n < 3:
            return None
        X, y = self.X, self.y
        theta = np.array(theta, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            if form is Form.SINGLE_EXP:
                cols = [np.exp(np.clip(theta[1] * X[:, 0], -EXP_CLAMP, EXP_CLAMP))]
            elif form is Form.MULTIPLICATIVE:
                cols = [np.exp(np.clip(theta[1] * X[:, 0] + theta[2] * X[:, 1], -EXP_CLAMP, EXP_CLAMP))]
            else:
                cols = [
                    np.exp(np.clip(theta[1] * X[:, 0], -EXP_CLAMP, EXP_CLAMP)),
                    np.exp(np.clip(theta[3] * X[:, 1], -EXP_CLAMP, EXP_CLAMP)),
                ]
            A = np.column_stack(cols + [np.ones(self.n)])
            if not np.all(np.isfinite(A)):
                return None
            coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        if form is Form.SINGLE_EXP:
            theta[0], theta[2] = coef
        elif form is Form.MULTIPLICATIVE:
            if not coef[0] > 0:
                return None
            theta[0], theta[3] = math.log(coef[0]), coef[1]
        else:
            theta[0], theta[2], theta[4] = coef
        resid = y - A @ coef
        theta[-1] = max(float(np.sqrt(np.mean(resid**2))), 1e-12)
        return theta if np.all(np.isfinite(theta)) else None

    # -- batched densities used by the sampler -------------------------------

    def batch_log_density(self, U: np.ndarray):
        """``(theta, loglik, logprior + logjacobian)`` for rows of unconstrained points."""
        U = np.atleast_2d(np.asarray(U, dtype=float))
        theta, log_jac = self.batch_from_unconstrained(U)
        sigma = theta[:, -1]
        z = (theta[:, :-1] - self._prior_mean) / self._prior_sd
        s = self.sigma_scale
        lpj = (
            self._prior_const - 0.5 * np.sum(z * z, axis=1)
            + math.log(2.0 / s) - _LOG_SQRT_2PI - 0.5 * (sigma / s) ** 2 + log_jac
        )
        if self.n == 0:
            return theta, np.zeros(len(U)), lpj
        pred, n_clamped = predict_counted(self.spec.form, theta, self.X)
        self.n_clamped += n_clamped
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            r = self.y - pred
            ll = -self.n * (_LOG_SQRT_2PI + np.log(sigma)) - 0.5 * np.sum(r * r, axis=1) / sigma**2
        ll[~np.isfinite(ll)] = -math.inf
        return theta, ll, lpj

    # With the non-linear parameters and sigma fixed, every form is linear in
    # the remaining ones: y - offset = F @ lam + noise. Under Normal priors the
    # tempered likelihood L^beta integrates over lam in closed form, and lam
    # can be drawn exactly from its Gaussian conditional.

    def _batch_design(self, theta: np.ndarray):
        X = self.X
        P = lambda i: theta[:, i, None]  # noqa: E731
        form = self.spec.form
        F = np.ones((len(theta), self.n, len(self.linear_index)))
        offset = None
        if form is Form.SINGLE_EXP:
            F[..., 0], n = _clamped_exp(P(1) * X[:, 0])
        elif form is Form.MULTIPLICATIVE:
            offset, n = _clamped_exp(P(0) + P(1) * X[:, 0] + P(2) * X[:, 1])
        else:
            F[..., 0], n1 = _clamped_exp(P(1) * X[:, 0])
            F[..., 1], n2 = _clamped_exp(P(3) * X[:, 1])
            n = n1 + n2
        self.n_clamped += n
        return F, offset

    def batch_collapsed(self, theta: np.ndarray, betas: np.ndarray):
        """Collapsed log density of each row of ``theta`` at its own temperature.

        The linear parameters are integrated out of ``prior * L ** beta``;
        only the non-linear entries and sigma of ``theta`` are read. Returns
        ``(value, mean, chol)``: the conditional of the linear block is
        Gaussian with that mean and precision ``chol @ chol.T``.
        """
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        betas = np.broadcast_to(np.asarray(betas, dtype=float), (len(theta),))
        rows = len(theta)
        sigma = theta[:, -1]
        free = self._free_params
        z = (theta[:, free] - self._prior_mean[free]) / self._prior_sd[free]
        s = self.sigma_scale
        with np.errstate(over="ignore"):
            value = self._free_const - 0.5 * np.einsum("ij,ij->i", z, z) - 0.5 * (sigma / s) ** 2
        value += math.log(2.0 / s) - _LOG_SQRT_2PI
        value[~(sigma > 0)] = -math.inf
        m0, prec0 = self._lin_mean, self._lin_prec
        mean = np.empty((rows, len(m0)))
        chol = np.empty((rows, len(m0), len(m0)))
        live = (betas > 0) & (value > -math.inf) & (self.n > 0)
        mean[~live], chol[~live] = m0, self._lin_chol0
        if not live.any():
            return value, mean, chol
        idx = slice(None) if live.all() else np.flatnonzero(live)
        b, sg = betas[idx], sigma[idx]
        F, offset = self._batch_design(theta[idx])
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            w = b / sg**2
            Fy = np.einsum("cnk,n->ck", F, self.y)
            if offset is None:
                rr = self._yy
            else:
                Fy -= np.einsum("cnk,cn->ck", F, offset)
                r = self.y - offset
                rr = np.einsum("cn,cn->c", r, r)
            M = w[:, None, None] * np.einsum("cnk,cnl->ckl", F, F) + self._lin_prec_mat
            rhs = w[:, None] * Fy + self._lin_prec_mean
            ok = np.isfinite(M).all(axis=(1, 2)) & np.isfinite(rhs).all(axis=1)
            if not ok.all():
                M[~ok], rhs[~ok] = self._lin_prec_mat, self._lin_prec_mean
            try:
                L = np.linalg.cholesky(M)
            except np.linalg.LinAlgError:
                L = np.empty_like(M)
                for j, Mj in enumerate(M):
                    try:
                        L[j] = np.linalg.cholesky(Mj)
                    except np.linalg.LinAlgError:
                        ok[j], L[j] = False, self._lin_chol0
            m = np.linalg.solve(M, rhs[..., None])[..., 0]
            # Minimised quadratic form, w * |r - F m|^2 + |m - m0|^2_prec0.
            quad = w * rr + self._lin_quad0 - np.einsum("ck,ck->c", rhs, m)
            extra = (
                -b * self.n * (_LOG_SQRT_2PI + np.log(sg))
                + self._lin_half_logdet
                - np.log(np.diagonal(L, axis1=1, axis2=2)).sum(axis=1)
                - 0.5 * quad
            )
        extra[~(ok & np.isfinite(extra))] = -math.inf
        value[idx] += extra
        mean[idx], chol[idx] = m, L
        return value, mean, chol

    def free_prior_from_normal(self, z: np.ndarray) -> np.ndarray:
        """Map standard normals to prior draws of the non-linear block and log sigma.

        The result is in sampler coordinates (asinh slopes, log sigma).
        """
        free = self._free_params
        out = np.empty_like(z)
        out[:, :-1] = self._prior_mean[free] + self._prior_sd[free] * z[:, :-1]
        pos = self._free_slope_pos
        out[:, pos] = np.arcsinh(out[:, pos] / self._free_slope_tau)
        with np.errstate(divide="ignore"):
            out[:, -1] = np.log(self.sigma_scale * np.abs(z[:, -1]))
        return out

    def free_prior_logpdf(self, x: np.ndarray) -> np.ndarray:
        """Prior log density of the non-linear block and log sigma in sampler coordinates."""
        free = self._free_params
        pos = self._free_slope_pos
        params = x[:, :-1].copy()
        # Far-out points overflow to a log density of -inf, which is correct.
        with np.errstate(over="ignore"):
            params[:, pos] = self._free_slope_tau * np.sinh(x[:, pos])
            z = (params - self._prior_mean[free]) / self._prior_sd[free]
            s = self.sigma_scale
            sigma = np.exp(x[:, -1])
            return (
                self._free_const - 0.5 * np.sum(z * z, axis=1)
                + math.log(2.0 / s) - _LOG_SQRT_2PI - 0.5 * (sigma / s) ** 2 + x[:, -1]
                + _log_dsinh(x[:, pos], self._free_slope_tau)
            )

    def batch_draw_linear(self, theta: np.ndarray, mean: np.ndarray, chol: np.ndarray, z: np.ndarray) -> np.ndarray:
        """Rows of ``theta`` with the linear block replaced by ``mean + chol^-T z``."""
        out = np.array(theta, dtype=float)
        out[:, self.linear_index] = mean + np.linalg.solve(np.swapaxes(chol, 1, 2), z[..., None])[..., 0]
        return out

    def collapsed_log_density(self, theta, beta: float) -> float:
        """Single-point form of ``batch_collapsed``; returns the value only."""
        value, _, _ = self.batch_collapsed(np.asarray(theta, dtype=float)[None, :], np.array([beta]))
        return float(value[0])

    def _slope_index(self) -> list[int]:
        return {Form.SINGLE_EXP: [1], Form.MULTIPLICATIVE: [1, 2], Form.ADDITIVE: [1, 3]}[self.spec.form]

    def polish(self, theta) -> np.ndarray | None:
        """Minimise the profiled residual RMS over the slopes, starting at ``theta``."""
        start = self.profile_linear(theta)
        if start is None:
            return None
        idx = self._slope_index()

        def objective(slopes):
            trial = start.copy()
            trial[idx] = slopes
            fitted = self.profile_linear(trial)
            return math.log(fitted[-1]) if fitted is not None else 1e6

        res = minimize(objective, start[idx], method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-10, "maxiter": 400 * len(idx)})
        best = start.copy()
        best[idx] = res.x
        return self.profile_linear(best)

    def init_candidates(self, rng: np.random.Generator, n: int) -> list[np.ndarray]:
        """Start points, each followed by its least-squares profiled version.

        Half are prior draws. In the other half the slopes are drawn on the
        scale of the data (about one unit of curvature across one predictor
        sd), where prior draws rarely land when the predictors are large.
        """
        out = []
        sd = self.slope_tau / SLOPE_SCALE
        for k in range(n):
            theta = self.prior_draw(rng)
            if k % 2:
                theta[self.slope_index] = rng.normal(0.0, sd)
            out.append(theta)
            refined = self.profile_linear(theta)
            if refined is not None:
                out.append(refined)
        return out

    def batch_from_unconstrained(self, U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Rows of parameters from sampler coordinates, with ``log |d theta / d u|``."""
        U = np.atleast_2d(np.asarray(U, dtype=float))
        theta = U.copy()
        idx = self.slope_index
        # Far-out proposals overflow to inf and are rejected downstream.
        with np.errstate(over="ignore"):
            theta[:, -1] = np.exp(U[:, -1])
            theta[:, idx] = self.slope_tau * np.sinh(U[:, idx])
        return theta, U[:, -1] + _log_dsinh(U[:, idx], self.slope_tau)

    def to_unconstrained(self, theta) -> np.ndarray:
        u = np.array(theta, dtype=float)
        u[-1] = math.log(u[-1])
        u[self.slope_index] = np.arcsinh(u[self.slope_index] / self.slope_tau)
        return u

    def from_unconstrained(self, u) -> np.ndarray:
        return self.batch_from_unconstrained(u)[0][0]

    def log_jacobian(self, u) -> float:
        return float(self.batch_from_unconstrained(u)[1][0])


def _log_dsinh(v: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """Summed ``log(tau * cosh(v))`` over columns, safe for large ``|v|``."""
    log_cosh = np.logaddexp(v, -v) - math.log(2.0)
    return np.sum(np.log(tau) + log_cosh, axis=-1)


def log_posterior(spec: ModelSpec, params, table, sigma_scale: float | None = None) -> float:
    """Unnormalised log posterior of ``params`` (model parameters then sigma).

    Gaussian likelihood plus Normal priors on the regression parameters and
    a Half-Normal prior on sigma. Returns ``-inf`` for sigma <= 0.
    """
    params = np.asarray(params, dtype=float)
    if params.shape != (len(spec.all_names),):
        raise ValueError(f"expected parameters {spec.all_names}, got shape {params.shape}")
    return RegressionTarget.from_table(spec, table, sigma_scale).log_posterior(params)
