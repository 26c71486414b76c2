"""
Marginal survival from the conditional surfaces:

    psi(u, s)  = (S0 - S1) S0 / integral of (S0 - S1)**2 over [0, tau]
    lambda(s)  = -integral of psi(u, s) Lam0star(u | s) du
    Lambda(t)  = integral of lambda over [0, G(t)] on the transformed scale
    S(t)       = exp(-Lambda(t)), clamped between the relatives' KM curves
"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.optimize import isotonic_regression

from .data import CASE, CONTROL, Grid
from .errors import BoundsCrossed, DegenerateDependence
from .km import km_relatives
from .surfaces import EstimatorConfig, build_conditional_surfaces

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MarginalEstimate:
    t_grid: Grid
    lambda_hat: np.ndarray
    s_hat: np.ndarray
    s_tilde: np.ndarray
    psi_denominator_min: float
    bounds_active_fraction: float
    hazard: np.ndarray = None
    negative_hazard_fraction: float = 0.0
    bandwidth: float = None

    def rows(self):
        for row in zip(self.t_grid.points, self.lambda_hat, self.s_hat, self.s_tilde):
            yield row


def _denominators(surf):
    diff = surf.S0 - surf.S1
    return diff, trapezoid(diff * diff, surf.u_grid.points, axis=1)


def psi_hat(surf, s_index, eps_den=1e-8):
    diff = surf.S0[s_index] - surf.S1[s_index]
    denominator = trapezoid(diff * diff, surf.u_grid.points)
    if not denominator >= eps_den:
        raise DegenerateDependence(s_index, denominator)
    return diff * surf.S0[s_index] / denominator


def hazard_hat(surf, s_index, eps_den=1e-8):
    psi = psi_hat(surf, s_index, eps_den)
    return -trapezoid(psi * surf.Lam0star[s_index], surf.u_grid.points)


def hazard_curve(surf, eps_den=1e-8):
    """
    lambda-hat at every s grid point (transformed scale) together with
    the smallest psi denominator.
    """

    diff, denominators = _denominators(surf)
    bad = np.flatnonzero(~(denominators >= eps_den))
    if bad.size:
        raise DegenerateDependence(int(bad[0]), float(denominators[bad[0]]))

    numerators = trapezoid(diff * surf.S0 * surf.Lam0star, surf.u_grid.points, axis=1)
    return -numerators / denominators, float(denominators.min())


def monotone_cumulative(values):
    """
    Least-squares projection of a cumulative hazard path onto the
    nondecreasing, nonnegative paths starting at 0. Early stretches
    that dip below zero are pooled with what follows instead of being
    pinned at 0 until the path recovers.

    >>> monotone_cumulative([0.0, -0.5, 0.75, 0.25]).tolist()
    [0.0, 0.0, 0.5, 0.5]
    >>> monotone_cumulative([0.0, 0.25, -0.75, 1.0]).tolist()
    [0.0, 0.0, 0.0, 1.0]
    """

    values = np.asarray(values, dtype=float)
    out = np.zeros_like(values)
    if values.size > 1:
        out[1:] = np.maximum(isotonic_regression(values[1:]).x, 0.0)
    return out


@dataclass(frozen=True, eq=False)
class _Cumulative:
    lambda_hat: np.ndarray
    hazard: np.ndarray
    denominator_min: float
    negative_fraction: float


def _cumulative_hazard(surf, t, eps_den):
    hazard, denominator_min = hazard_curve(surf, eps_den)
    s = surf.s_grid.points

    integrated = monotone_cumulative(cumulative_trapezoid(hazard, s, initial=0.0))

    lambda_hat = np.interp(surf.transform.forward(t), s, integrated)
    lambda_hat = np.where(t <= 0, 0.0, lambda_hat)

    negative = float(np.mean(hazard < 0))
    if negative:
        log.debug("negative hazard estimates at %.1f%% of s grid points", 100.0 * negative)
    return _Cumulative(lambda_hat, hazard, denominator_min, negative)


def marginal_from_surfaces(surf, t_grid, eps_den=1e-8):
    """
    Run the identity pipeline on ready-made surfaces (estimated or
    closed-form). No KM bounds are applied: S_tilde equals S_hat.
    """

    t = t_grid.points
    cumulative = _cumulative_hazard(surf, t, eps_den)
    s_hat = np.exp(-cumulative.lambda_hat)
    return MarginalEstimate(
        t_grid=t_grid,
        lambda_hat=cumulative.lambda_hat,
        s_hat=s_hat,
        s_tilde=s_hat,
        psi_denominator_min=cumulative.denominator_min,
        bounds_active_fraction=0.0,
        hazard=cumulative.hazard,
        negative_hazard_fraction=cumulative.negative_fraction,
        bandwidth=surf.bandwidth
    )


def apply_km_bounds(s_hat, t, km_case, km_control):
    """
    >>> from casekin.data import StepSurvival
    >>> case = StepSurvival([1.0], [0.92])
    >>> control = StepSurvival([1.0], [0.97])
    >>> apply_km_bounds([0.90, 0.95, 0.99], [1.0, 1.0, 1.0], case, control).tolist()
    [0.92, 0.95, 0.97]
    """

    s_hat = np.asarray(s_hat, dtype=float)
    t = np.asarray(t, dtype=float)
    lower = km_case(t)
    upper = km_control(t)

    out = np.clip(s_hat, lower, np.maximum(lower, upper))
    crossed = lower > upper
    if np.any(crossed):
        warnings.warn(
            "case-relatives KM above control-relatives KM at {0} of {1} points".format(
                int(crossed.sum()), crossed.size
            ),
            BoundsCrossed,
            stacklevel=2
        )
        out = np.where(crossed, 0.5 * (lower + upper), out)
    return out


def estimate_marginal(ds, h, config=EstimatorConfig(), t_grid=None, surfaces=None):
    ds.require_both_groups()
    if t_grid is None:
        t_grid = Grid.linspace(0.0, ds.tau0, config.t_points)
    if surfaces is None:
        surfaces = build_conditional_surfaces(ds, h, config=config)

    t = t_grid.points
    cumulative = _cumulative_hazard(surfaces, t, config.eps_den)
    s_hat = np.exp(-cumulative.lambda_hat)

    km_case = km_relatives(ds, CASE)
    km_control = km_relatives(ds, CONTROL)
    s_tilde = apply_km_bounds(s_hat, t, km_case, km_control)
    active = float(np.mean(s_tilde != s_hat))

    log.debug("marginal h=%.3f: bounds active at %.1f%% of t grid", h, 100.0 * active)

    return MarginalEstimate(
        t_grid=t_grid,
        lambda_hat=cumulative.lambda_hat,
        s_hat=s_hat,
        s_tilde=s_tilde,
        psi_denominator_min=cumulative.denominator_min,
        bounds_active_fraction=active,
        hazard=cumulative.hazard,
        negative_hazard_fraction=cumulative.negative_fraction,
        bandwidth=h
    )
