"""Student-t process and Gaussian process regression.

Both families share the RBF kernel with a white-noise diagonal. The Student-t
process uses the covariance parametrization of the multivariate Student-t, i.e.
``K`` is the covariance of the observations for ``nu > 2``. Its predictive
marginal at a new input has ``nu + n`` degrees of freedom and the GP variance
rescaled by ``(nu + beta - 2) / (nu + n - 2)``, where
``beta = (y - m)^T K^{-1} (y - m)``.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import minimize
from scipy.special import gammaln

from .kernel import ConditioningError, KernelParams, gram, gram_cross, jittered_cholesky

__all__ = [
    "Family",
    "Dataset",
    "FitConfig",
    "SurrogateModel",
    "PredictiveMarginal",
    "neg_log_likelihood",
    "condition",
    "fit",
    "predict",
    "predict_arrays",
    "beta_statistic",
    "NU_MIN",
    "NU_MAX",
]

log = logging.getLogger(__name__)

NU_MIN = 2.0 + 1e-3
NU_MAX = 1e6
FD_STEP = 1e-6
LOG10 = math.log(10.0)


class Family(str, enum.Enum):
    STUDENT_T = "StudentT"
    GAUSSIAN = "Gaussian"

    @classmethod
    def parse(cls, value) -> "Family":
        if isinstance(value, cls):
            return value
        for member in cls:
            if str(value).lower() in (member.value.lower(), member.name.lower()):
                return member
        raise ValueError(f"unknown surrogate family {value!r}")


@dataclass(frozen=True)
class Dataset:
    """Inputs ``X`` (n, d) and one objective's responses ``y`` (n,)."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite entries")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class FitConfig:
    """Hyperparameter search settings.

    ``bounds`` maps any of ``lengthscale``, ``signal_variance``,
    ``noise_variance`` to ``(lo, hi)`` in log10 units (lengthscales relative to
    the input range) and ``nu`` to ``(lo, hi)`` in natural units.
    """

    family: Family = Family.STUDENT_T
    n_starts: int = 10
    seed: int = 0
    bounds: dict = field(default_factory=dict)
    standardize: bool = True
    isotropic: bool = False
    maxiter: int = 200
    fixed_nu: float | None = None
    fixed_params: KernelParams | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        if self.n_starts < 1:
            raise ValueError("n_starts must be at least 1")
        unknown = set(self.bounds) - {"lengthscale", "signal_variance", "noise_variance", "nu"}
        if unknown:
            raise ValueError(f"unknown bounds keys: {sorted(unknown)}")

    def log10_bounds(self, name):
        defaults = {
            "lengthscale": (-3.0, 3.0),
            "signal_variance": (-4.0, 4.0),
            "noise_variance": (-8.0, 1.0),
        }
        lo, hi = self.bounds.get(name, defaults[name])
        return float(lo), float(hi)

    def nu_bounds(self):
        lo, hi = self.bounds.get("nu", (NU_MIN, NU_MAX))
        return max(float(lo), NU_MIN), min(float(hi), NU_MAX)


@dataclass(frozen=True)
class PredictiveMarginal:
    mean: float
    variance: float
    dof: float
    family: Family

    @property
    def scale(self) -> float:
        return math.sqrt(self.variance)


@dataclass(frozen=True, eq=False)
class SurrogateModel:
    """A conditioned surrogate for one objective.

    ``y`` and ``alpha`` live in standardized units; ``shift`` and ``scale``
    map predictions back to objective units.
    """

    family: Family
    params: KernelParams
    nu: float | None
    mean_const: float
    shift: float
    scale: float
    X: np.ndarray
    y: np.ndarray
    chol: np.ndarray
    alpha: np.ndarray
    beta: float
    jitter: float = 0.0
    nll: float = float("nan")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dof(self) -> float:
        if self.family is Family.GAUSSIAN:
            return math.inf
        return self.nu + self.n

    @property
    def variance_factor(self) -> float:
        """Ratio applied to the GP predictive variance."""
        if self.family is Family.GAUSSIAN:
            return 1.0
        return (self.nu + self.beta - 2.0) / (self.nu + self.n - 2.0)

    @property
    def effectively_gaussian(self) -> bool:
        return self.family is Family.GAUSSIAN or self.nu >= NU_MAX * (1 - 1e-6)


def _nll_terms(n, logdet_half, beta, nu, family):
    if family is Family.GAUSSIAN:
        return 0.5 * beta + logdet_half + 0.5 * n * math.log(2 * math.pi)
    return (
        gammaln(0.5 * nu)
        - gammaln(0.5 * (nu + n))
        + 0.5 * n * np.log((nu - 2.0) * math.pi)
        + logdet_half
        + 0.5 * (nu + n) * np.log1p(beta / (nu - 2.0))
    )


def neg_log_likelihood(data: Dataset, params: KernelParams, nu=None, family=Family.STUDENT_T,
                       mean: float = 0.0) -> float:
    """Negative log marginal likelihood of ``data.y`` under a constant mean.

    For the Student-t family this is the multivariate Student-t density with
    covariance ``K = gram(X) + noise * I``; for the Gaussian family it is the
    usual GP evidence.

    Raises:
        ConditioningError: if ``K`` cannot be factorized.
    """
    family = Family.parse(family)
    if family is Family.STUDENT_T and (nu is None or not nu > 2):
        raise ValueError(f"Student-t likelihood requires nu > 2, got {nu}")
    K = gram(data.X, params, include_noise=True)
    L, _ = jittered_cholesky(K)
    r = data.y - mean
    v = solve_triangular(L, r, lower=True)
    beta = float(v @ v)
    logdet_half = float(np.sum(np.log(np.diag(L))))
    return float(_nll_terms(data.n, logdet_half, beta, nu, family))


def beta_statistic(model: SurrogateModel) -> float:
    """``(y - m)^T K^{-1} (y - m)`` from the cached factorization."""
    v = solve_triangular(model.chol, model.y - model.mean_const, lower=True)
    return float(v @ v)


def _standardization(y, enabled):
    if not enabled:
        return 0.0, 1.0
    shift = float(np.mean(y))
    scale = float(np.std(y))
    if not np.isfinite(scale) or scale <= 0:
        scale = 1.0
    return shift, scale


def condition(data: Dataset, family, params: KernelParams, nu=None,
              standardize: bool = True, nll: float = float("nan")) -> SurrogateModel:
    """Build a surrogate from fixed hyperparameters (no optimization).

    ``params`` are interpreted in standardized units when ``standardize`` is
    set.
    """
    family = Family.parse(family)
    if family is Family.STUDENT_T:
        if nu is None or not nu > 2:
            raise ValueError(f"Student-t surrogate requires nu > 2, got {nu}")
        nu = float(nu)
    else:
        nu = None
    if params.dim != data.d:
        raise ValueError(f"kernel has {params.dim} lengthscales for {data.d}-d inputs")
    shift, scale = _standardization(data.y, standardize)
    y = (data.y - shift) / scale
    K = gram(data.X, params, include_noise=True)
    L, jitter = jittered_cholesky(K)
    mean_const = 0.0
    alpha = solve_triangular(L.T, solve_triangular(L, y - mean_const, lower=True), lower=False)
    v = solve_triangular(L, y - mean_const, lower=True)
    return SurrogateModel(
        family=family, params=params, nu=nu, mean_const=mean_const, shift=shift, scale=scale,
        X=data.X.copy(), y=y, chol=L, alpha=alpha, beta=float(v @ v), jitter=jitter, nll=nll,
    )


class _Objective:
    """Batched negative log likelihood over log-space hyperparameter vectors."""

    def __init__(self, X, y, family, isotropic, fixed_nu):
        self.X = X
        self.y = y
        self.n, self.d = X.shape
        self.family = family
        self.isotropic = isotropic
        self.fixed_nu = fixed_nu
        sqdiff = (X[:, None, :] - X[None, :, :]) ** 2
        self.sqdiff_flat = sqdiff.reshape(-1, self.d).T  # (d, n*n)
        self.n_ls = 1 if isotropic else self.d
        self.has_nu = family is Family.STUDENT_T and fixed_nu is None

    @property
    def size(self):
        return self.n_ls + 2 + (1 if self.has_nu else 0)

    def unpack(self, theta):
        theta = np.asarray(theta, dtype=float)
        ls = np.exp(theta[: self.n_ls])
        if self.isotropic:
            ls = np.repeat(ls, self.d)
        sv = math.exp(theta[self.n_ls])
        noise = math.exp(theta[self.n_ls + 1])
        if self.family is Family.GAUSSIAN:
            nu = None
        elif self.fixed_nu is not None:
            nu = float(self.fixed_nu)
        else:
            nu = 2.0 + math.exp(theta[self.n_ls + 2])
        return KernelParams(tuple(ls), sv, noise), nu

    def batch(self, thetas):
        """NLL for each row of ``thetas``; ``inf`` where factorization fails."""
        thetas = np.atleast_2d(thetas)
        b, n = thetas.shape[0], self.n
        inv_ls2 = np.exp(-2.0 * thetas[:, : self.n_ls])
        if self.isotropic:
            inv_ls2 = np.repeat(inv_ls2, self.d, axis=1)
        sv = np.exp(thetas[:, self.n_ls])
        noise = np.exp(thetas[:, self.n_ls + 1])
        # Factorizing [[K, y], [y^T, c]] yields L^{-1} y as the last row of the
        # factor, so one batched Cholesky gives both log|K| and beta.
        A = np.empty((b, n + 1, n + 1))
        A[:, :n, :n] = sv[:, None, None] * np.exp(-0.5 * (inv_ls2 @ self.sqdiff_flat).reshape(b, n, n))
        idx = np.arange(n)
        A[:, idx, idx] += noise[:, None]
        A[:, :n, n] = self.y
        A[:, n, :n] = self.y
        A[:, n, n] = 1e250
        out = np.full(b, np.inf)
        try:
            L = np.linalg.cholesky(A)
            ok = np.ones(b, dtype=bool)
        except np.linalg.LinAlgError:
            L = np.zeros_like(A)
            ok = np.zeros(b, dtype=bool)
            for i in range(b):
                try:
                    Li, jit = jittered_cholesky(A[i, :n, :n])
                except ConditioningError:
                    continue
                L[i, :n, :n] = Li
                L[i, n, :n] = solve_triangular(Li, self.y, lower=True)
                L[i, n, n] = 1.0
                ok[i] = True
        if not ok.any():
            return out
        Lk = L[ok]
        v = Lk[:, n, :n]
        beta = np.einsum("bi,bi->b", v, v)
        logdet_half = np.log(np.diagonal(Lk, axis1=1, axis2=2)[:, :n]).sum(axis=1)
        if self.family is Family.GAUSSIAN:
            nu = None
        elif self.fixed_nu is not None:
            nu = float(self.fixed_nu)
        else:
            nu = 2.0 + np.exp(thetas[ok, self.n_ls + 2])
        out[ok] = _nll_terms(self.n, logdet_half, beta, nu, self.family)
        return out

    def value_and_grad(self, theta):
        P = theta.size
        steps = FD_STEP * np.eye(P)
        pts = np.vstack([theta[None, :], theta + steps, theta - steps])
        vals = self.batch(pts)
        f = vals[0]
        if not np.isfinite(f):
            return 1e25, np.zeros(P)
        plus, minus = vals[1 : P + 1], vals[P + 1 :]
        grad = (plus - minus) / (2 * FD_STEP)
        # one-sided fallback where a perturbation left the feasible region
        bad = ~np.isfinite(grad)
        grad[bad] = np.where(np.isfinite(plus[bad]), (plus[bad] - f) / FD_STEP,
                             np.where(np.isfinite(minus[bad]), (f - minus[bad]) / FD_STEP, 0.0))
        return float(f), grad


def _search_space(data: Dataset, config: FitConfig, obj: _Objective):
    span = np.ptp(data.X, axis=0)
    span = np.where(span > 0, span, 1.0)
    if obj.isotropic:
        span = np.array([float(np.mean(span))])
    ls_lo, ls_hi = config.log10_bounds("lengthscale")
    sv_lo, sv_hi = config.log10_bounds("signal_variance")
    nz_lo, nz_hi = config.log10_bounds("noise_variance")
    lo = list(np.log(span) + ls_lo * LOG10) + [sv_lo * LOG10, nz_lo * LOG10]
    hi = list(np.log(span) + ls_hi * LOG10) + [sv_hi * LOG10, nz_hi * LOG10]
    first = list(np.log(0.5 * span)) + [0.0, math.log(1e-4)]
    if obj.has_nu:
        nu_lo, nu_hi = config.nu_bounds()
        lo.append(math.log(nu_lo - 2.0))
        hi.append(math.log(nu_hi - 2.0))
        first.append(math.log(10.0 - 2.0))
    lo, hi = np.array(lo), np.array(hi)
    return lo, hi, np.clip(first, lo, hi)


def _encode(params: KernelParams, nu, obj: _Objective):
    ls = np.log(params.lengthscales)
    if obj.isotropic:
        ls = ls[:1]
    theta = list(ls) + [math.log(params.signal_variance), math.log(max(params.noise_variance, 1e-300))]
    if obj.has_nu:
        theta.append(math.log(nu - 2.0))
    return np.array(theta)


def fit(data: Dataset, family=None, config: FitConfig | None = None, init=None) -> SurrogateModel:
    """Fit hyperparameters by multi-start bound-constrained minimization of the NLL.

    Args:
        data: Training inputs and one objective's responses (n >= 2).
        family: Overrides ``config.family`` when given.
        config: Search settings; defaults to ``FitConfig()``.
        init: Optional ``(KernelParams, nu)`` used as the first start instead of
            the fixed heuristic (warm start).

    Returns:
        The model at the best optimum over all starts. Non-convergence of a
        local run is not an error; its final iterate still competes.

    Raises:
        ConditioningError: if no start yields a factorizable Gram matrix.
    """
    config = config or FitConfig()
    family = Family.parse(family) if family is not None else config.family
    if data.n < 2:
        raise ValueError("fitting requires at least two observations")
    shift, scale = _standardization(data.y, config.standardize)
    y = (data.y - shift) / scale

    if config.fixed_params is not None:
        nu = config.fixed_nu if config.fixed_nu is not None else 10.0
        return condition(data, family, config.fixed_params,
                         nu if family is Family.STUDENT_T else None, config.standardize)

    obj = _Objective(data.X, y, family, config.isotropic, config.fixed_nu)
    lo, hi, first = _search_space(data, config, obj)
    if init is not None:
        first = np.clip(_encode(init[0], init[1], obj), lo, hi)
    rng = np.random.default_rng(config.seed)
    starts = [first] + [rng.uniform(lo, hi) for _ in range(config.n_starts - 1)]

    best_theta, best_f = None, np.inf
    for x0 in starts:
        try:
            res = minimize(obj.value_and_grad, x0, jac=True, method="L-BFGS-B",
                           bounds=list(zip(lo, hi)), options={"maxiter": config.maxiter})
            theta, f = res.x, float(obj.batch(res.x)[0])
        except (ValueError, FloatingPointError) as exc:  # pragma: no cover - defensive
            log.debug("start failed: %s", exc)
            continue
        f0 = float(obj.batch(x0)[0])
        if f0 < f:
            theta, f = x0, f0
        if f < best_f:
            best_theta, best_f = theta, f
    if best_theta is None or not np.isfinite(best_f):
        raise ConditioningError("every multi-start run failed to factorize the Gram matrix")
    params, nu = obj.unpack(best_theta)
    if family is Family.STUDENT_T and nu >= NU_MAX * (1 - 1e-9):
        log.debug("nu reached its upper bound; model is effectively Gaussian")
    return condition(data, family, params, nu, config.standardize, nll=best_f)


def predict_arrays(model: SurrogateModel, Xstar):
    """Vectorized predictive means and variances in objective units.

    Predictions are of the latent function: the noise term enters only
    through ``K``.

    Returns:
        ``(mean, variance)`` arrays of shape (m,).
    """
    Xstar = np.atleast_2d(np.asarray(Xstar, dtype=float))
    if not np.all(np.isfinite(Xstar)):
        raise ValueError("prediction inputs must be finite")
    Ks = gram_cross(model.X, Xstar, model.params)
    mean = model.mean_const + Ks.T @ model.alpha
    v = solve_triangular(model.chol, Ks, lower=True)
    s2 = model.params.signal_variance - np.einsum("ij,ij->j", v, v)
    s2 = np.maximum(s2, 1e-15 * model.params.signal_variance)
    s2 = s2 * model.variance_factor
    return mean * model.scale + model.shift, s2 * model.scale**2


def predict(model: SurrogateModel, xstar) -> PredictiveMarginal:
    """Predictive marginal at a single input."""
    xstar = np.asarray(xstar, dtype=float).ravel()
    mean, var = predict_arrays(model, xstar[None, :])
    return PredictiveMarginal(float(mean[0]), float(var[0]), model.dof, model.family)


def with_nu(model: SurrogateModel, nu: float) -> SurrogateModel:
    """Copy of a Student-t model with a different ``nu`` and the same factorization."""
    return replace(model, family=Family.STUDENT_T, nu=float(nu))
