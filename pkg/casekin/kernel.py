import logging
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial
from scipy import sparse

log = logging.getLogger(__name__)

K_MIN = 5
EPS_C = 1e-10


class Kernel(object):
    """
    Symmetric polynomial kernel supported on [-1, 1].

    >>> float(TRIWEIGHT(0.0))
    1.09375
    >>> float(TRIWEIGHT(-0.5))
    0.46142578125
    >>> float(TRIWEIGHT(1.0))
    0.0
    """

    def __init__(self, name, polynomial):
        self._name = name
        self._polynomial = polynomial

    @property
    def name(self):
        return self._name

    @property
    def support(self):
        return (-1.0, 1.0)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return np.where(np.abs(u) <= 1.0, self._polynomial(u), 0.0)

    def moment(self, k, omega):
        """
        Exact integral of r**k * K(r) over [-1, omega].

        >>> round(TRIWEIGHT.moment(2, 1.0), 14) == round(1.0 / 9, 14)
        True
        """

        omega = min(max(float(omega), -1.0), 1.0)
        integrand = self._polynomial * Polynomial([0.0] * k + [1.0])
        return float(integrand.integ(lbnd=-1.0)(omega))

    def __repr__(self):
        return "Kernel({0!r})".format(self._name)


TRIWEIGHT = Kernel("triweight", Polynomial([1.0, 0.0, -3.0, 0.0, 3.0, 0.0, -1.0]) * (35.0 / 32.0))


def kernel_eval(u):
    return TRIWEIGHT(u)


def kernel_moment(k, omega):
    return TRIWEIGHT.moment(k, omega)


class RiskTable(object):
    """
    Per-family at-risk counts Y_i.(v) and event counts dN_i.(v) of the
    relatives of one proband group, at that group's distinct relative
    event times v_1 < ... < v_K.
    """

    def __init__(self, x, y_at_risk, d_events, event_times):
        self._x = np.asarray(x, dtype=float)
        self._y = np.asarray(y_at_risk, dtype=float)
        self._dn = np.asarray(d_events, dtype=float)
        self._event_times = np.asarray(event_times, dtype=float)

        if self._y.shape != (self._x.size, self._event_times.size) or self._dn.shape != self._y.shape:
            raise ValueError("risk table arrays do not match (families x event times)")

    @classmethod
    def from_dataset(cls, ds, x, q):
        """
        Build the table of group q. x holds the transformed proband
        times of every family in ds.
        """

        columns = ds.columns
        members = np.flatnonzero(columns.groups == q)
        position = np.full(len(ds), -1, dtype=np.int64)
        position[members] = np.arange(members.size)

        in_group = position[columns.relative_family] >= 0
        times = columns.relative_times[in_group]
        status = columns.relative_status[in_group]
        owner = position[columns.relative_family[in_group]]

        # events at time 0 would break S_q(0|s) = 1
        event_times = np.unique(times[(status == 1) & (times > 0)])

        incidence = sparse.csr_matrix(
            (np.ones(owner.size), (owner, np.arange(owner.size))),
            shape=(members.size, owner.size)
        )
        at_risk = (times[:, None] >= event_times[None, :]).astype(float)
        y = np.asarray(incidence @ at_risk).reshape(members.size, event_times.size)

        dn = np.zeros((members.size, event_times.size))
        hit = (status == 1) & (times > 0)
        np.add.at(dn, (owner[hit], np.searchsorted(event_times, times[hit])), 1.0)

        return cls(np.asarray(x, dtype=float)[members], y, dn, event_times)

    @property
    def x(self):
        return self._x

    @property
    def y_at_risk(self):
        return self._y

    @property
    def d_events(self):
        return self._dn

    @property
    def event_times(self):
        return self._event_times

    @property
    def n_families(self):
        return self._x.size


@dataclass(frozen=True, eq=False)
class LocalFitAccumulators:
    y_weighted_sum: np.ndarray
    weighted_mean_x: np.ndarray
    weighted_sse: np.ndarray
    effective_count: np.ndarray


@dataclass(frozen=True, eq=False)
class PointFit:
    s: float
    event_times: np.ndarray
    d_lambda: np.ndarray
    d_lambda_star: np.ndarray
    skipped_count: int
    degenerate_count: int
    accumulators: LocalFitAccumulators


@dataclass(frozen=True, eq=False)
class BatchFit:
    s: np.ndarray
    event_times: np.ndarray
    d_lambda: np.ndarray
    d_lambda_star: np.ndarray
    skipped: np.ndarray
    degenerate: np.ndarray
    accumulators: LocalFitAccumulators
    # kernel-weighted Nelson-Aalen increments, also where the fit was skipped
    d_lambda_constant: np.ndarray = None

    def point(self, index):
        acc = self.accumulators
        return PointFit(
            s=float(self.s[index]),
            event_times=self.event_times,
            d_lambda=self.d_lambda[index],
            d_lambda_star=self.d_lambda_star[index],
            skipped_count=int(self.skipped[index].sum()),
            degenerate_count=int(self.degenerate[index].sum()),
            accumulators=LocalFitAccumulators(
                y_weighted_sum=acc.y_weighted_sum[index],
                weighted_mean_x=acc.weighted_mean_x[index],
                weighted_sse=acc.weighted_sse[index],
                effective_count=acc.effective_count[index]
            )
        )


def local_linear_fits(table, s_values, h, kernel=TRIWEIGHT, k_min=K_MIN, eps_c=EPS_C):
    """
    Local linear hazard increments at every s in s_values at once. Each
    accumulator over (s, v) is one matrix product of the kernel weight
    matrix (s x families) with the at-risk or event matrix
    (families x event times).
    """

    if h <= 0:
        raise ValueError("bandwidth must be positive, got {0!r}".format(h))

    s_values = np.atleast_1d(np.asarray(s_values, dtype=float))
    n_q = table.n_families
    y = table.y_at_risk
    dn = table.d_events

    z = table.x[None, :] - s_values[:, None]
    w = kernel(z / h)
    wz = w * z
    norm = n_q * h if n_q else 1.0

    sum_a = w @ y
    sum_az = wz @ y
    sum_azz = (wz * z) @ y
    sum_wdn = w @ dn
    sum_wzdn = wz @ dn
    effective = (w > 0).astype(float) @ (y > 0).astype(float)

    with np.errstate(divide="ignore", invalid="ignore"):
        z_bar = np.where(sum_a > 0, sum_az / np.where(sum_a > 0, sum_a, 1.0), 0.0)
        sse = np.maximum(sum_azz - z_bar * sum_az, 0.0)
        c = sse / norm

        slope = np.where(c >= eps_c, (sum_wzdn - z_bar * sum_wdn) / np.where(c >= eps_c, sse, 1.0), 0.0)
        level = np.where(sum_a > 0, sum_wdn / np.where(sum_a > 0, sum_a, 1.0), 0.0)

    skipped = effective < k_min
    degenerate = ~skipped & (c < eps_c)

    d_lambda_star = np.where(skipped, 0.0, slope)
    d_lambda = np.where(skipped, 0.0, level - d_lambda_star * z_bar)

    if log.isEnabledFor(logging.DEBUG) and skipped.size:
        log.debug(
            "local fits h=%.3f: %d of %d (s, v) pairs skipped, %d slope-degenerate",
            h, int(skipped.sum()), skipped.size, int(degenerate.sum())
        )

    return BatchFit(
        s=s_values,
        event_times=table.event_times,
        d_lambda=d_lambda,
        d_lambda_star=d_lambda_star,
        skipped=skipped,
        degenerate=degenerate,
        accumulators=LocalFitAccumulators(
            y_weighted_sum=sum_a / norm,
            weighted_mean_x=z_bar + s_values[:, None],
            weighted_sse=c,
            effective_count=effective
        ),
        d_lambda_constant=level
    )


def local_linear_fit(ds, s, q, h, x=None, kernel=TRIWEIGHT, k_min=K_MIN, eps_c=EPS_C):
    """
    Local linear increments at a single point s for the relatives of
    proband group q. x holds the transformed proband times of every
    family in ds; without it the proband times of ds are taken to be on
    the transformed scale already.
    """

    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1], got {0!r}".format(s))
    if x is None:
        x = ds.columns.proband_times
    x = np.asarray(x, dtype=float)
    if np.any((x < 0.0) | (x > 1.0)):
        raise ValueError("transformed proband times must lie in [0, 1]")

    table = RiskTable.from_dataset(ds, x, q)
    return local_linear_fits(table, [s], h, kernel, k_min, eps_c).point(0)
