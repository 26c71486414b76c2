"""
Bootstrap machinery around the marginal estimator: IMSE-based bandwidth
selection over a two-stage grid and percentile confidence bands.
"""

import math
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import trapezoid

from .data import CASE, CONTROL, Dataset, FamilyRecord, Observation
from .errors import CasekinError, CiFailed, EstimationError, KaplanMeierError, SelectionFailed
from .km import km_censoring, km_naive
from .marginal import estimate_marginal
from .surfaces import EstimatorConfig, build_conditional_surfaces
from .threadpool import thread_map

log = logging.getLogger(__name__)

# independent RNG stream families for the two bootstrap procedures
IMSE_STREAM = 0
CI_STREAM = 1


def _stream(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


@dataclass(frozen=True)
class BandwidthConfig:
    stage1_grid: tuple = tuple(round(0.1 * k, 10) for k in range(1, 11))
    stage2_offsets: tuple = (-0.05, 0.0, 0.05)
    b_inner: int = 30
    pilot_h: float = 0.5
    seed: int = 0
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)

    def __post_init__(self):
        if not self.stage1_grid or not all(0 < h <= 1 for h in self.stage1_grid):
            raise ValueError("stage-1 bandwidths must lie in (0, 1]")
        if not 0 < self.pilot_h <= 1:
            raise ValueError("pilot bandwidth must lie in (0, 1]")
        if self.b_inner < 2:
            raise ValueError("need at least 2 inner replications, got {0!r}".format(self.b_inner))


@dataclass(frozen=True)
class CiConfig:
    b_outer: int = 100
    level: float = 0.95
    seed: int = 0
    reselect_bandwidth: bool = False
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    bandwidth: BandwidthConfig = field(default_factory=BandwidthConfig)

    def __post_init__(self):
        if not 0 < self.level < 1:
            raise ValueError("level must lie in (0, 1), got {0!r}".format(self.level))
        if self.b_outer < 20:
            raise ValueError("need at least 20 outer replications, got {0!r}".format(self.b_outer))


def _interpolated_rows(surf, q, s):
    """
    Survival rows S_q(. | s) for every entry of s, linear in s between
    the two neighbouring grid rows.
    """

    points = surf.s_grid.points
    position = np.interp(s, points, np.arange(points.size, dtype=float))
    lower = np.minimum(np.floor(position).astype(np.int64), points.size - 2)
    frac = (position - lower)[:, None]

    stack = np.stack([surf.S0, surf.S1])
    return (1.0 - frac) * stack[q, lower] + frac * stack[q, lower + 1]


def _draw_events(rows, u_points, uniforms):
    below = rows <= uniforms[:, None]
    hit = below.any(axis=1)
    out = np.full(uniforms.shape, np.inf)
    out[hit] = u_points[np.argmax(below[hit], axis=1)]
    return out


def bootstrap_dataset(ds, surf, censor_km, seed=0, rng=None):
    """
    Redraw every relative from the fitted surfaces. Probands, group
    labels and family sizes are kept; each relative gets an event time
    from S_Q(. | proband time) and a censoring time from censor_km.
    """

    if rng is None:
        rng = _stream(seed)

    columns = ds.columns
    owner = columns.relative_family
    x = surf.transform.forward(columns.proband_times)[owner]
    groups = columns.groups[owner]
    u_points = surf.u_grid.points

    events = np.full(owner.size, np.inf)
    event_uniforms = rng.uniform(size=owner.size)
    censor_uniforms = rng.uniform(size=owner.size)

    for q in (CONTROL, CASE):
        members = np.flatnonzero(groups == q)
        if members.size:
            rows = _interpolated_rows(surf, q, x[members])
            events[members] = _draw_events(rows, u_points, event_uniforms[members])

    censoring = censor_km.sample(censor_uniforms)
    times = np.minimum(events, censoring)
    status = (events <= censoring) & np.isfinite(events)
    # no event and no censoring mass left: censored at the end of follow-up
    times = np.where(np.isfinite(times), times, surf.u_grid.hi)

    families = []
    offsets = np.concatenate([[0], np.cumsum(columns.sizes)])
    for index, family in enumerate(ds.families):
        lo, hi = offsets[index], offsets[index + 1]
        relatives = tuple(Observation(float(t), int(d)) for t, d in zip(times[lo:hi], status[lo:hi]))
        families.append(FamilyRecord(family.family_id, family.proband, relatives))
    return Dataset(tuple(families))


def bootstrap_replicates(ds, surf, censor_km, seed, count, stream=IMSE_STREAM):
    return thread_map(
        lambda index: bootstrap_dataset(ds, surf, censor_km, rng=_stream(seed, stream, index)),
        range(count)
    )


def pilot_replicates(ds, cfg):
    pilot = build_conditional_surfaces(ds, cfg.pilot_h, config=cfg.estimator)
    return bootstrap_replicates(ds, pilot, km_censoring(ds), cfg.seed, cfg.b_inner)


@dataclass(frozen=True, eq=False)
class ImseResult:
    bandwidth: float
    value: float
    t_grid: object
    reference: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    replicates: np.ndarray
    n_failed: int


def _replicate_curve(replicate, h, config, t_grid):
    try:
        return estimate_marginal(replicate, h, config, t_grid=t_grid).s_tilde
    except (EstimationError, KaplanMeierError) as error:
        log.debug("replication failed at h=%.3f: %s", h, error)
        return None


def imse_est(ds, h, cfg, replicates=None):
    """
    Integrated (bias^2 + variance) of the bounded estimate at bandwidth
    h, with the bootstrap mean taken over replicate datasets drawn from
    the pilot fit. Pass replicates to reuse one set across bandwidths.
    """

    if not 0 < h <= 1:
        raise ValueError("bandwidth must lie in (0, 1], got {0!r}".format(h))
    if replicates is None:
        replicates = pilot_replicates(ds, cfg)

    reference = estimate_marginal(ds, h, cfg.estimator)
    t_grid = reference.t_grid

    curves = thread_map(lambda rep: _replicate_curve(rep, h, cfg.estimator, t_grid), replicates)
    good = [curve for curve in curves if curve is not None]
    n_failed = len(curves) - len(good)

    needed = max(2, int(math.ceil(len(curves) / 2.0)))
    if len(good) < needed:
        raise SelectionFailed(
            "only {0} of {1} replications succeeded at h={2!r}".format(len(good), len(curves), h)
        )

    stacked = np.vstack(good)
    mean = stacked.mean(axis=0)
    variance = stacked.var(axis=0, ddof=1)
    mse = (mean - reference.s_tilde) ** 2 + variance
    value = float(trapezoid(mse, t_grid.points))

    log.info("imse h=%.3f: %.6g (%d failed replications)", h, value, n_failed)
    return ImseResult(
        bandwidth=h,
        value=value,
        t_grid=t_grid,
        reference=reference.s_tilde,
        mean=mean,
        variance=variance,
        replicates=stacked,
        n_failed=n_failed
    )


@dataclass(frozen=True)
class BandwidthSelection:
    bandwidth: float
    stage1: float
    table: tuple


def _best(table, candidates):
    finite = [h for h in candidates if math.isfinite(table[h])]
    if not finite:
        return None
    return min(finite, key=lambda h: (table[h], h))


def select_bandwidth(ds, cfg, imse=None):
    """
    Two-stage grid search: the best stage-1 bandwidth h1, then the best
    of h1 shifted by each stage-2 offset (clipped to (0, 1]). Ties go
    to the smaller bandwidth. imse maps a bandwidth to its IMSE value.
    """

    if imse is None:
        replicates = pilot_replicates(ds, cfg)

        def imse(h):
            return imse_est(ds, h, cfg, replicates).value

    table = {}

    def evaluate(h):
        if h in table:
            return
        try:
            table[h] = float(imse(h))
        except CasekinError as error:
            log.warning("bandwidth %.3f dropped: %s", h, error)
            table[h] = math.inf

    stage1 = sorted(set(round(h, 10) for h in cfg.stage1_grid))
    for h in stage1:
        evaluate(h)

    h1 = _best(table, stage1)
    if h1 is None:
        raise SelectionFailed("every stage-1 bandwidth failed")

    stage2 = sorted(set(min(round(h1 + offset, 10), 1.0) for offset in cfg.stage2_offsets))
    stage2 = [h for h in stage2 if h > 0]
    for h in stage2:
        evaluate(h)

    chosen = _best(table, stage2)
    log.info("selected bandwidth %.3f (stage 1: %.3f)", chosen, h1)
    return BandwidthSelection(chosen, h1, tuple(sorted(table.items())))


def resample_families(ds, rng):
    """
    Families drawn with replacement within each proband group, keeping
    the group sizes n1 and n0.
    """

    groups = ds.columns.groups
    picked = []
    for q in (CONTROL, CASE):
        members = np.flatnonzero(groups == q)
        if members.size:
            picked.append(rng.choice(members, size=members.size, replace=True))
    order = np.sort(np.concatenate(picked))
    return Dataset(tuple(ds.families[i] for i in order))


def percentile_band(curves, level):
    """
    Pointwise type-7 percentile interval of stacked bootstrap curves.

    >>> values = np.arange(1, 101)[:, None] / 100.0
    >>> lower, upper = percentile_band(values, 0.95)
    >>> round(float(lower[0]), 10), round(float(upper[0]), 10)
    (0.03475, 0.97525)
    """

    alpha = (1.0 - level) / 2.0
    curves = np.asarray(curves, dtype=float)
    lower = np.quantile(curves, alpha, axis=0, method="linear")
    upper = np.quantile(curves, 1.0 - alpha, axis=0, method="linear")
    return lower, upper


@dataclass(frozen=True, eq=False)
class ConfidenceBand:
    t_grid: object
    estimate: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    se: np.ndarray
    level: float
    bandwidth: float
    n_failed: int
    naive_se: np.ndarray = None

    def rows(self):
        return zip(self.t_grid.points, self.estimate, self.se, self.lower, self.upper)


def outer_resample(ds, seed, index):
    """
    The family resample behind outer replication number index of
    percentile_ci with the given seed.
    """

    return resample_families(ds, _stream(seed, CI_STREAM, index))


def percentile_ci(ds, h, cfg, t_grid=None):
    point = estimate_marginal(ds, h, cfg.estimator, t_grid=t_grid)
    t_grid = point.t_grid

    def replicate(index):
        rng = _stream(cfg.seed, CI_STREAM, index)
        resample = resample_families(ds, rng)
        naive = km_naive(resample)(t_grid.points)
        try:
            bandwidth = h
            if cfg.reselect_bandwidth:
                inner = replace(cfg.bandwidth, seed=int(rng.integers(2 ** 31)))
                bandwidth = select_bandwidth(resample, inner).bandwidth
            return estimate_marginal(resample, bandwidth, cfg.estimator, t_grid=t_grid).s_tilde, naive
        except CasekinError as error:
            log.debug("outer replication %d failed: %s", index, error)
            return None, naive

    results = thread_map(replicate, range(cfg.b_outer))
    good = [curve for curve, _ in results if curve is not None]
    n_failed = cfg.b_outer - len(good)

    if len(good) < math.ceil(0.8 * cfg.b_outer):
        raise CiFailed("only {0} of {1} outer replications succeeded".format(len(good), cfg.b_outer))
    if n_failed:
        log.warning("%d of %d outer replications failed", n_failed, cfg.b_outer)

    stacked = np.vstack(good)
    lower, upper = percentile_band(stacked, cfg.level)
    return ConfidenceBand(
        t_grid=t_grid,
        estimate=point.s_tilde,
        lower=lower,
        upper=upper,
        se=stacked.std(axis=0, ddof=1),
        level=cfg.level,
        bandwidth=h,
        n_failed=n_failed,
        naive_se=np.vstack([naive for _, naive in results]).std(axis=0, ddof=1)
    )
