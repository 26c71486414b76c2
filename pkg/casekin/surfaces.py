import logging
from dataclasses import dataclass

import numpy as np

from .data import CASE, CONTROL, Grid
from .errors import DegenerateTimes, InsufficientData
from .kernel import EPS_C, K_MIN, RiskTable, TRIWEIGHT, local_linear_fits

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EstimatorConfig:
    s_points: int = 101
    u_points: int = 200
    t_points: int = 200
    k_min: int = K_MIN
    eps_c: float = EPS_C
    eps_den: float = 1e-8
    # use the local-constant increment where too few families are at risk
    fill_skipped: bool = True


class TimeTransform(object):
    """
    Piecewise-linear map of proband times onto [0, 1] through their
    weighted empirical distribution function.

    >>> tt = TimeTransform.from_times([10.0, 20.0, 30.0])
    >>> [round(float(tt.forward(t)), 12) for t in (10.0, 20.0, 30.0, 99.0)]
    [0.333333333333, 0.666666666667, 1.0, 1.0]
    >>> float(TimeTransform.from_times([10.0, 20.0], [3, 1]).forward(10.0))
    0.75
    """

    def __init__(self, knots, levels):
        knots = np.asarray(knots, dtype=float)
        levels = np.asarray(levels, dtype=float)
        if knots.size < 2 or np.any(np.diff(knots) <= 0) or np.any(np.diff(levels) <= 0):
            raise DegenerateTimes("time transform needs at least two distinct, increasing knots")
        self._knots = knots
        self._levels = levels

    @classmethod
    def from_times(cls, times, weights=None):
        times = np.asarray(times, dtype=float)
        if weights is None:
            weights = np.ones(times.size)
        weights = np.maximum(np.asarray(weights, dtype=float), 1.0)

        knots, inverse = np.unique(times, return_inverse=True)
        if knots.size < 2:
            raise DegenerateTimes("all proband times are equal")

        mass = np.bincount(inverse, weights=weights, minlength=knots.size)
        levels = np.cumsum(mass) / mass.sum()
        levels[-1] = 1.0

        if knots[0] > 0:
            knots = np.concatenate([[0.0], knots])
            levels = np.concatenate([[0.0], levels])
        return cls(knots, levels)

    @classmethod
    def linear(cls, hi):
        return cls([0.0, float(hi)], [0.0, 1.0])

    @property
    def knots(self):
        return self._knots

    @property
    def levels(self):
        return self._levels

    def forward(self, t):
        return np.interp(t, self._knots, self._levels, left=self._levels[0], right=1.0)

    def inverse(self, s):
        return np.interp(s, self._levels, self._knots)

    def __repr__(self):
        return "TimeTransform(knots={0})".format(self._knots.size)


def build_time_transform(ds):
    columns = ds.columns
    return TimeTransform.from_times(columns.proband_times, columns.sizes)


@dataclass(frozen=True)
class SurfaceDiagnostics:
    skipped: tuple
    degenerate: tuple
    events: tuple


@dataclass(frozen=True, eq=False)
class ConditionalSurfaces:
    s_grid: Grid
    u_grid: Grid
    S0: np.ndarray
    S1: np.ndarray
    Lam0: np.ndarray
    Lam1: np.ndarray
    Lam0star: np.ndarray
    transform: TimeTransform
    bandwidth: float = None
    diagnostics: SurfaceDiagnostics = None

    def survival(self, q):
        return self.S1 if q == CASE else self.S0

    def rows(self):
        s = self.s_grid.points
        u = self.u_grid.points
        for i in range(s.size):
            for k in range(u.size):
                yield (u[k], s[i], self.S0[i, k], self.S1[i, k], self.Lam0star[i, k])


def _step_values(event_times, increments, u):
    """
    Step-function evaluation of the cumulative increments of every s row
    at the u grid points.
    """

    index = np.searchsorted(event_times, u, side="right")
    rows = increments.shape[0]
    return np.concatenate([np.zeros((rows, 1)), np.cumsum(increments, axis=1)], axis=1)[:, index]


def build_conditional_surfaces(ds, h, s_grid=None, u_grid=None, config=EstimatorConfig(), transform=None):
    if not 0 < h <= 1:
        raise ValueError("bandwidth must lie in (0, 1], got {0!r}".format(h))
    ds.require_both_groups()

    if transform is None:
        transform = build_time_transform(ds)
    if s_grid is None:
        s_grid = Grid.linspace(0.0, 1.0, config.s_points)
    if u_grid is None:
        if ds.tau <= 0:
            raise InsufficientData("relatives have no follow-up time")
        u_grid = Grid.linspace(0.0, ds.tau, config.u_points)

    x = transform.forward(ds.columns.proband_times)
    u = u_grid.points

    lam = {}
    star = {}
    skipped = []
    degenerate = []
    events = []
    for q in (CONTROL, CASE):
        table = RiskTable.from_dataset(ds, x, q)
        fit = local_linear_fits(table, s_grid.points, h, TRIWEIGHT, config.k_min, config.eps_c)

        n_events = table.event_times.size
        n_skipped = int(fit.skipped.sum())
        if n_events and n_skipped == fit.skipped.size:
            raise InsufficientData(
                "every relative event of group {0} was skipped at bandwidth {1!r}".format(q, h)
            )

        d_lambda = fit.d_lambda
        if config.fill_skipped:
            d_lambda = np.where(fit.skipped, fit.d_lambda_constant, d_lambda)

        raw = _step_values(fit.event_times, d_lambda, u)
        star[q] = _step_values(fit.event_times, fit.d_lambda_star, u)
        # running maximum keeps each row a cumulative hazard
        lam[q] = np.maximum.accumulate(np.maximum(raw, 0.0), axis=1)

        skipped.append(n_skipped)
        degenerate.append(int(fit.degenerate.sum()))
        events.append(n_events)

    log.debug("surfaces h=%.3f: events %r, skipped %r, slope-degenerate %r", h, events, skipped, degenerate)

    return ConditionalSurfaces(
        s_grid=s_grid,
        u_grid=u_grid,
        S0=np.exp(-lam[CONTROL]),
        S1=np.exp(-lam[CASE]),
        Lam0=lam[CONTROL],
        Lam1=lam[CASE],
        Lam0star=star[CONTROL],
        transform=transform,
        bandwidth=h,
        diagnostics=SurfaceDiagnostics(tuple(skipped), tuple(degenerate), tuple(events))
    )
