"""Closed-form causal-rate estimation under a linear stochastic model.

The quantity estimated here is the information-flow rate from one series
to another, in nats per unit time: how fast the source component feeds
entropy into (positive) or drains it from (negative) the target's marginal
distribution. Under a linear model with additive independent noise the
maximum-likelihood estimate has a closed form built from three pieces:

1. a least-squares regression of the target's forward-difference series
   on all components (``fit_linear_model``),
2. sample covariances over the aligned window, and
3. normal-approximation inference on the fitted coefficients
   (``significance``).

The pairwise rate is ``a_hat[source] * C[target, source] / C[target,
target]``; the self rate is simply ``a_hat[target]``. Internally the
regression is solved on standardized variables (correlation matrix plus a
Cholesky factorization), which keeps the estimates invariant under
per-component affine rescaling of the data to near machine precision; all
reported quantities are mapped back to original units.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy import linalg, stats

from .core import PanelPairs, TimeSeriesSet, check_k, forward_difference
from .errors import (
    DegenerateBudgetError,
    NaNsPresentError,
    NonRectangularError,
    SameIndexError,
    SingularCovarianceError,
    TooShortError,
    ZeroVarianceWarning,
)

_EPS = float(np.finfo(float).eps)
_TINY = float(np.finfo(float).tiny)
# two-sided standard-normal quantiles for the 90/95/99% intervals
_Z90 = float(stats.norm.isf(0.05))
_Z95 = float(stats.norm.isf(0.025))
_Z99 = float(stats.norm.isf(0.005))


@dataclass(frozen=True)
class LinearModelFit:
    """Least-squares fit of a target's difference series on all components.

    ``coeffs[j]`` multiplies component j, ``intercept`` is the constant
    term, and ``coeff_cov`` is the sampling covariance of the stacked
    parameter vector ``[intercept, coeffs]`` (so ``coeff_cov[j + 1, j + 1]``
    is the variance of ``coeffs[j]``). ``resid_var`` is the dof-corrected
    mean squared residual in per-step units and ``g_hat = resid_var * k *
    dt`` the implied noise intensity per unit time. ``cov_row`` holds the
    sample covariance of the target with every component over the aligned
    window — the flow formulas need exactly that row.
    """

    target: int
    coeffs: np.ndarray
    intercept: float
    resid_var: float
    coeff_cov: np.ndarray
    g_hat: float
    n_eff: int
    dof: int
    k: int
    dt: float
    cov_row: np.ndarray

    def __post_init__(self):
        for name in ("coeffs", "coeff_cov", "cov_row"):
            a = np.asarray(getattr(self, name), dtype=float).copy()
            a.setflags(write=False)
            object.__setattr__(self, name, a)


@dataclass(frozen=True)
class FlowEstimate:
    """One causal rate — pairwise (source into target) or the target's self rate.

    ``value`` is in nats per unit time. ``normalized`` (the relative-
    importance share, in [-1, 1]) is filled in by ``normalize_flows``.
    ``coef_index`` and ``coef_scale`` record which fitted coefficient
    produced the value and the covariance ratio multiplying it, which is
    all ``significance`` needs to attach errors: value = coeffs[coef_index]
    * coef_scale.
    """

    kind: str
    source: Optional[int]
    target: int
    value: float
    coef_index: int
    coef_scale: float
    std_err: float = float("nan")
    ci90: tuple = ()
    ci95: tuple = ()
    ci99: tuple = ()
    p_value: float = float("nan")
    normalized: Optional[float] = None
    zero_variance: bool = False


@dataclass(frozen=True)
class NormalizedBudget:
    """Relative-importance decomposition of one target's entropy budget.

    ``z_total`` is the sum of absolute contributions (incoming flows, the
    self rate, and the noise term); every ``normalized`` field and
    ``noise_share`` is the corresponding term divided by ``z_total``, so
    the absolute shares sum to 1.
    """

    target: int
    flows: tuple
    self_flow: FlowEstimate
    noise_term: float
    noise_share: float
    z_total: float


class _Design:
    """Shared per-(window, k) regression state, reused across targets.

    ``window`` is the d x n_eff matrix of regressor samples. Standardized
    regressors and the Cholesky factor of their correlation matrix are
    precomputed once; individual targets then only need their own
    difference series. Read-only after construction, safe to share across
    worker threads.
    """

    def __init__(self, window: np.ndarray, names, dt: float, k: int):
        window = np.asarray(window, dtype=float)
        d, n_eff = window.shape
        if n_eff < d + 2:
            raise TooShortError(f"{n_eff} aligned samples cannot fit {d + 1} parameters")
        self.names = tuple(names)
        self.dt = float(dt)
        self.k = int(k)
        self.d = d
        self.n_eff = n_eff
        self.window = window
        self.mu = window.mean(axis=1)
        self.centered = window - self.mu[:, None]
        self.C = (self.centered @ self.centered.T) / (n_eff - 1)
        sd = np.sqrt(np.diag(self.C).copy())
        self.sd = sd
        if np.any(sd == 0.0):
            flat = [self.names[i] for i in np.flatnonzero(sd == 0.0)]
            raise SingularCovarianceError(f"zero-variance series make C singular: {flat}")
        self.Z = self.centered / sd[:, None]
        self.R = self.C / np.outer(sd, sd)
        try:
            self.cho = linalg.cho_factor(self.R, lower=True, check_finite=False)
            self.det_r = float(np.prod(np.diag(self.cho[0])) ** 2)
        except linalg.LinAlgError:
            self.cho = None
            self.det_r = 0.0

    def require_invertible(self):
        # tolerance: machine epsilon x d x max|entry|, evaluated on the
        # correlation matrix where max|entry| = 1, so the rule is scale-free
        tol = _EPS * self.d
        if self.cho is None or not self.det_r > tol:
            raise SingularCovarianceError(
                f"covariance matrix is numerically singular (correlation determinant "
                f"{self.det_r:.3e} <= tolerance {tol:.3e}); inputs are collinear"
            )


def _design_for(tss: TimeSeriesSet, k: int) -> _Design:
    check_k(tss.n_samples, tss.d, k)
    return _Design(tss.values[:, : tss.n_samples - k], tss.names, tss.dt, k)


def _fit_from_design(design: _Design, ydot: np.ndarray, target: int) -> LinearModelFit:
    design.require_invertible()
    d, n_eff = design.d, design.n_eff
    dof = n_eff - (d + 1)
    ymean = float(ydot.mean())
    yc = ydot - ymean
    sy = float(np.sqrt((yc @ yc) / (n_eff - 1)))
    if sy > 0.0:
        r = (design.Z @ (yc / sy)) / (n_eff - 1)
        beta_std = linalg.cho_solve(design.cho, r, check_finite=False)
        coeffs = beta_std * (sy / design.sd)
    else:
        coeffs = np.zeros(d)
    intercept = ymean - float(coeffs @ design.mu)
    resid = yc - coeffs @ design.centered
    resid_var = float(resid @ resid) / dof

    # sampling covariance of [intercept, coeffs]: resid_var times the
    # inverse Gram matrix of the regressors, assembled from C^{-1} via the
    # partitioned-inverse identities to stay well-conditioned
    rinv = linalg.cho_solve(design.cho, np.eye(d), check_finite=False)
    rinv = (rinv + rinv.T) / 2.0
    s = (rinv / np.outer(design.sd, design.sd)) / (n_eff - 1)
    smu = s @ design.mu
    cc = np.empty((d + 1, d + 1))
    cc[0, 0] = 1.0 / n_eff + float(design.mu @ smu)
    cc[0, 1:] = -smu
    cc[1:, 0] = -smu
    cc[1:, 1:] = s
    coeff_cov = resid_var * cc

    return LinearModelFit(
        target=int(target),
        coeffs=coeffs,
        intercept=intercept,
        resid_var=resid_var,
        coeff_cov=coeff_cov,
        g_hat=resid_var * design.dt * design.k,
        n_eff=n_eff,
        dof=dof,
        k=design.k,
        dt=design.dt,
        cov_row=design.C[target],
    )


def fit_linear_model(tss: TimeSeriesSet, target: int, k: int = 1) -> LinearModelFit:
    """Regress the target's forward-difference series on all components.

    The difference series is ``(x[n + k] - x[n]) / (k * dt)``; the
    regressors are the first ``N - k`` samples of every component plus a
    constant. Raises SingularCovarianceError for collinear inputs.
    """
    if not 0 <= target < tss.d:
        raise IndexError(f"target {target} out of range for d = {tss.d}")
    design = _design_for(tss, k)
    ydot = forward_difference(tss.values[target], k, tss.dt)
    return _fit_from_design(design, ydot, target)


def _normal_inference(value: float, std_err: float):
    """Two-sided p-value and central normal CIs for value/std_err."""
    zero_variance = False
    if std_err == 0.0:
        if value != 0.0:
            warnings.warn(
                "zero standard error with a nonzero estimate; p-value pinned to 0",
                ZeroVarianceWarning,
                stacklevel=3,
            )
            p = 0.0
            zero_variance = True
        else:
            p = 1.0
    else:
        p = float(2.0 * stats.norm.sf(abs(value) / std_err))
    cis = tuple((value - z * std_err, value + z * std_err) for z in (_Z90, _Z95, _Z99))
    return p, cis[0], cis[1], cis[2], zero_variance


def significance(flow: FlowEstimate, fit: LinearModelFit) -> FlowEstimate:
    """Attach delta-method standard error, p-value, and 90/95/99% CIs.

    The flow is linear in one fitted coefficient (``value = coeffs
    [coef_index] * coef_scale``), so its standard error is |coef_scale|
    times the coefficient's standard error from ``fit.coeff_cov``.
    """
    if flow.target != fit.target:
        raise ValueError(
            f"flow targets index {flow.target} but the fit is for index {fit.target}"
        )
    var = float(fit.coeff_cov[flow.coef_index + 1, flow.coef_index + 1])
    std_err = abs(flow.coef_scale) * float(np.sqrt(max(var, 0.0)))
    p, ci90, ci95, ci99, zv = _normal_inference(flow.value, std_err)
    return replace(
        flow, std_err=std_err, p_value=p, ci90=ci90, ci95=ci95, ci99=ci99, zero_variance=zv
    )


def _pair_estimate(fit: LinearModelFit, source: int) -> FlowEstimate:
    # scale = C[target, source] / C[target, target]; an exactly-zero sample
    # covariance therefore annihilates the flow exactly
    scale = float(fit.cov_row[source] / fit.cov_row[fit.target])
    est = FlowEstimate(
        kind="pairwise",
        source=int(source),
        target=fit.target,
        value=float(fit.coeffs[source] * scale),
        coef_index=int(source),
        coef_scale=scale,
    )
    return significance(est, fit)


def _self_estimate(fit: LinearModelFit) -> FlowEstimate:
    est = FlowEstimate(
        kind="self",
        source=None,
        target=fit.target,
        value=float(fit.coeffs[fit.target]),
        coef_index=fit.target,
        coef_scale=1.0,
    )
    return significance(est, fit)


def flow_multivariate(
    tss: TimeSeriesSet, source: int, target: int, k: int = 1
) -> FlowEstimate:
    """Rate of information flow from ``source`` into ``target``, conditioned on all components.

    Value: ``a_hat[source] * C[target, source] / C[target, target]`` with
    ``a_hat`` from ``fit_linear_model(tss, target, k)``. Standard error,
    p-value, and confidence intervals are attached.
    """
    d = tss.d
    if not (0 <= source < d and 0 <= target < d):
        raise IndexError(f"source {source} / target {target} out of range for d = {d}")
    if source == target:
        raise SameIndexError("source and target must differ; use self_contribution")
    return _pair_estimate(fit_linear_model(tss, target, k), source)


def self_contribution(tss: TimeSeriesSet, target: int, k: int = 1) -> FlowEstimate:
    """The target's own contribution to its marginal entropy change (nats per unit time).

    Equals the target's own fitted coefficient; the standard error is that
    coefficient's standard error.
    """
    return _self_estimate(fit_linear_model(tss, target, k))


def flow_bivariate(x1, x2, dt: float = 1.0, k: int = 1) -> FlowEstimate:
    """Closed-form rate from the second series into the first, ignoring all others.

    An independent arithmetic path from :func:`flow_multivariate`, written
    directly in the five sample moments of the pair:

        T = (C11*C12*C2d - C12^2*C1d) / (C11^2*C22 - C11*C12^2)

    where Cab are the pair covariances and C1d/C2d the covariances with the
    first series' forward-difference. Agrees with the two-variable
    regression route to rounding error; kept separate for cross-validation.
    """
    x1 = np.asarray(x1, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    if x1.shape != x2.shape:
        raise NonRectangularError(f"series lengths differ: {x1.size} vs {x2.size}")
    if not (np.isfinite(x1).all() and np.isfinite(x2).all()):
        raise NaNsPresentError("non-finite values in input series")
    n = x1.size
    check_k(n, 2, k)
    n_eff = n - k
    ydot = forward_difference(x1, k, dt)
    w1 = x1[:n_eff] - x1[:n_eff].mean()
    w2 = x2[:n_eff] - x2[:n_eff].mean()
    yc = ydot - ydot.mean()
    den = n_eff - 1
    c11 = float(w1 @ w1) / den
    c22 = float(w2 @ w2) / den
    c12 = float(w1 @ w2) / den
    c1d = float(w1 @ yc) / den
    c2d = float(w2 @ yc) / den
    cdd = float(yc @ yc) / den
    return _bivariate_from_moments(c11, c22, c12, c1d, c2d, cdd, n_eff, source=1, target=0)


def _bivariate_from_moments(
    c11, c22, c12, c1d, c2d, cdd, n_eff, source, target
) -> FlowEstimate:
    """Pairwise flow from the five moments of (target, source, d(target))."""
    det_c = c11 * c22 - c12 * c12
    # same scale-free singularity rule as the multivariate path: determinant
    # of the 2x2 correlation matrix against machine epsilon x d
    if not (c11 > 0.0 and c22 > 0.0) or not det_c / (c11 * c22) > _EPS * 2:
        raise SingularCovarianceError(
            "pair covariance matrix is numerically singular (perfectly correlated series)"
        )
    value = (c11 * c12 * c2d - c12 * c12 * c1d) / (c11 * c11 * c22 - c11 * c12 * c12)
    a1 = (c22 * c1d - c12 * c2d) / det_c
    a2 = (c11 * c2d - c12 * c1d) / det_c
    rss = max((n_eff - 1) * (cdd - a1 * c1d - a2 * c2d), 0.0)
    resid_var = rss / (n_eff - 3)
    var_a2 = resid_var * c11 / ((n_eff - 1) * det_c)
    scale = c12 / c11
    std_err = abs(scale) * float(np.sqrt(max(var_a2, 0.0)))
    p, ci90, ci95, ci99, zv = _normal_inference(value, std_err)
    return FlowEstimate(
        kind="pairwise",
        source=int(source),
        target=int(target),
        value=float(value),
        coef_index=int(source),
        coef_scale=float(scale),
        std_err=std_err,
        ci90=ci90,
        ci95=ci95,
        ci99=ci99,
        p_value=p,
        zero_variance=zv,
    )


def flow_panel(pairs: PanelPairs, source: int, target: int) -> FlowEstimate:
    """Pairwise flow from i.i.d. replicate (state, next-state) pairs.

    The per-replicate difference ``(x1 - x0) / dt_gap`` plays the role of
    the difference series and covariances run over the replicate index;
    the arithmetic is otherwise identical to :func:`flow_multivariate`.
    Replicate order is immaterial.
    """
    d = pairs.d
    if not (0 <= source < d and 0 <= target < d):
        raise IndexError(f"source {source} / target {target} out of range for d = {d}")
    if source == target:
        raise SameIndexError("source and target must differ for a pairwise flow")
    design = _Design(pairs.x0, pairs.names, pairs.dt_gap, 1)
    ydot = (pairs.x1[target] - pairs.x0[target]) / pairs.dt_gap
    fit = _fit_from_design(design, ydot, target)
    return _pair_estimate(fit, source)


def normalize_flows(
    flows: Sequence[FlowEstimate], self_flow: FlowEstimate, fit: LinearModelFit
) -> NormalizedBudget:
    """Convert raw rates into relative-importance shares for one target.

    The budget is Z = sum of |incoming flows| + |self rate| + |noise term|
    with noise term g_hat / (2 * C[target, target]); each share is its raw
    value divided by Z, so absolute shares sum to exactly 1 and every
    share lies in [-1, 1].
    """
    flows = tuple(flows)
    for fl in flows:
        if fl.kind != "pairwise" or fl.target != fit.target:
            raise ValueError("normalize_flows needs the pairwise flows into the fit's target")
    if self_flow.kind != "self" or self_flow.target != fit.target:
        raise ValueError("self_flow must be the self contribution of the fit's target")
    c_ii = float(fit.cov_row[fit.target])
    noise_term = fit.g_hat / (2.0 * c_ii)
    z = sum(abs(fl.value) for fl in flows) + abs(self_flow.value) + abs(noise_term)
    if not z > _TINY:
        raise DegenerateBudgetError(
            f"entropy budget for target {fit.target} is zero; nothing to normalize"
        )
    out_flows = tuple(replace(fl, normalized=fl.value / z) for fl in flows)
    out_self = replace(self_flow, normalized=self_flow.value / z)
    return NormalizedBudget(
        target=fit.target,
        flows=out_flows,
        self_flow=out_self,
        noise_term=noise_term,
        noise_share=abs(noise_term) / z,
        z_total=z,
    )
