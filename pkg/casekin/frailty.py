"""
Shared-frailty family generator and its closed-form oracle.

Conditional on the family frailty W, proband and relatives fail
independently with hazard W * nu * (mu * t) ** (p - 1). With H the
baseline cumulative hazard and L the frailty Laplace transform, every
survival quantity is L evaluated at a sum of H values:

    S(t)      = L(H(t))
    S(t, u)   = L(H(t) + H(u))
    S0(u | t) = S(t, u) / S(t)
"""

import logging
import collections
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq
from scipy.stats import kendalltau

from .data import Dataset, FamilyRecord, Grid, Observation
from .errors import NoRoot, PoolExhausted
from .surfaces import ConditionalSurfaces, TimeTransform

log = logging.getLogger(__name__)

GAMMA = "gamma"
PSTABLE = "pstable"

# cumulative end-of-study event rate and overall censoring fraction
SCENARIOS = {
    "high": (0.60, 0.60),
    "low": (0.15, 0.90),
}


def gamma_conditionals(h_t, h_u, hazard_t, theta):
    """
    Closed forms of S0(u|t), S1(u|t), Lam0star(u|t) and the marginal
    hazard at t for mean-one gamma frailty with variance theta, given
    H(t), H(u) and the baseline hazard at t.

    >>> s0, s1, star, lam = gamma_conditionals(1.0, 1.0, 1.0, 2.0)
    >>> round(float(s0), 6), round(float(s1), 6), round(float(star), 12), round(float(lam), 12)
    (0.774597, 0.464758, -0.133333333333, 0.333333333333)
    """

    h_t = np.asarray(h_t, dtype=float)
    h_u = np.asarray(h_u, dtype=float)
    hazard_t = np.asarray(hazard_t, dtype=float)

    if theta == 0:
        s0 = np.exp(-h_u) * np.ones_like(h_t)
        return s0, s0, np.zeros_like(s0), hazard_t * np.ones_like(h_u)

    inner = 1.0 + theta * h_t
    outer = 1.0 + theta * (h_t + h_u)
    s0 = (outer / inner) ** (-1.0 / theta)
    s1 = s0 ** (1.0 + theta)
    star = hazard_t * (1.0 / outer - 1.0 / inner)
    lam = hazard_t / inner * np.ones_like(h_u)
    return s0, s1, star, lam


def stable_conditionals(h_t, h_u, hazard_t, alpha):
    """
    Positive-stable counterpart of gamma_conditionals, Laplace transform
    exp(-x ** alpha).
    """

    h_t = np.asarray(h_t, dtype=float)
    h_u = np.asarray(h_u, dtype=float)
    hazard_t = np.asarray(hazard_t, dtype=float)
    total = h_t + h_u

    with np.errstate(divide="ignore", invalid="ignore"):
        s0 = np.exp(-(total ** alpha) + h_t ** alpha)
        pow_t = np.where(h_t > 0, h_t ** (alpha - 1.0), 0.0)
        pow_total = np.where(total > 0, total ** (alpha - 1.0), 0.0)

        ratio = np.where(h_t > 0, (total / np.where(h_t > 0, h_t, 1.0)) ** (alpha - 1.0), 0.0)
        if alpha == 1.0:
            ratio = np.ones_like(ratio)
        ratio = np.where((h_t <= 0) & (h_u <= 0), 1.0, ratio)

        # hazard_t * H(t) ** (alpha - 1) vanishes at t = 0 for alpha > 1 / p
        star = np.where(hazard_t > 0, alpha * hazard_t * (pow_total - pow_t), 0.0)
        lam = np.where(hazard_t > 0, alpha * hazard_t * pow_t, 0.0) * np.ones_like(h_u)

    return s0, s0 * ratio, star, lam


@dataclass(frozen=True)
class FrailtyModel:
    kind: str = GAMMA
    kendall_tau: float = 0.5
    p: float = 4.6
    mu: float = 0.01
    nu: float = None
    end_of_study: float = 110.0
    censor_lo: float = None

    def __post_init__(self):
        if self.kind not in (GAMMA, PSTABLE):
            raise ValueError("unknown frailty kind {0!r}".format(self.kind))
        if not 0 <= self.kendall_tau < 1:
            raise ValueError("kendall tau must lie in [0, 1), got {0!r}".format(self.kendall_tau))
        if self.p <= 0 or self.mu <= 0 or (self.nu is not None and self.nu <= 0):
            raise ValueError("baseline parameters must be positive")
        if self.censor_lo is not None and not 0 <= self.censor_lo <= self.end_of_study:
            raise ValueError("censor_lo must lie in [0, end_of_study]")

    @property
    def theta(self):
        return 2.0 * self.kendall_tau / (1.0 - self.kendall_tau)

    @property
    def alpha(self):
        return 1.0 - self.kendall_tau

    def with_(self, **changes):
        return replace(self, **changes)

    def _scale(self):
        if self.nu is None:
            raise ValueError("baseline level nu is not calibrated")
        return self.nu * self.mu ** (self.p - 1.0)

    def baseline_hazard(self, t):
        return self.nu * (self.mu * np.asarray(t, dtype=float)) ** (self.p - 1.0)

    def baseline_cumhazard(self, t):
        return self._scale() * np.asarray(t, dtype=float) ** self.p / self.p

    def baseline_inverse(self, h):
        return (self.p * np.asarray(h, dtype=float) / self._scale()) ** (1.0 / self.p)

    def laplace(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == PSTABLE:
            return np.exp(-(x ** self.alpha))
        if self.theta == 0:
            return np.exp(-x)
        return (1.0 + self.theta * x) ** (-1.0 / self.theta)

    def marginal_survival(self, t):
        return self.laplace(self.baseline_cumhazard(t))

    def marginal_cumhazard(self, t):
        h = self.baseline_cumhazard(t)
        if self.kind == PSTABLE:
            return h ** self.alpha
        if self.theta == 0:
            return h
        return np.log1p(self.theta * h) / self.theta

    def marginal_hazard(self, t):
        return self.conditionals(t, 0.0)[3]

    def conditional_cumhazard0(self, u, t):
        h_t = self.baseline_cumhazard(t)
        h_u = self.baseline_cumhazard(u)
        return -np.log(self.laplace(h_t + h_u)) + np.log(self.laplace(h_t))

    def conditionals(self, t, u):
        """
        (S0(u|t), S1(u|t), Lam0star(u|t), lambda(t)) broadcast over t and u.
        """

        h_t = self.baseline_cumhazard(t)
        h_u = self.baseline_cumhazard(u)
        hazard_t = self.baseline_hazard(t)
        if self.kind == PSTABLE:
            return stable_conditionals(h_t, h_u, hazard_t, self.alpha)
        return gamma_conditionals(h_t, h_u, hazard_t, self.theta)


@dataclass(frozen=True, eq=False)
class MarginalCurve:
    t: np.ndarray
    survival: np.ndarray

    def rows(self):
        return zip(self.t, self.survival)


def true_marginal(model, points=1101):
    t = np.linspace(0.0, model.end_of_study, points)
    return MarginalCurve(t, model.marginal_survival(t))


def draw_frailty(model, rng, size=None):
    if model.kendall_tau == 0:
        return np.ones(size) if size is not None else 1.0

    if model.kind == GAMMA:
        theta = model.theta
        return rng.gamma(shape=1.0 / theta, scale=theta, size=size)

    # Kanter's representation of the one-sided stable law with
    # Laplace transform exp(-s ** alpha)
    alpha = model.alpha
    angle = rng.uniform(0.0, np.pi, size=size)
    expo = rng.standard_exponential(size=size)
    return (
        np.sin(alpha * angle) / np.sin(angle) ** (1.0 / alpha)
        * (np.sin((1.0 - alpha) * angle) / expo) ** ((1.0 - alpha) / alpha)
    )


Population = collections.namedtuple("Population", [
    "frailty",
    "proband_latent",
    "relative_latent",
    "proband_time",
    "proband_status",
    "relative_time",
    "relative_status"
])


def _censor(model, uniforms, lo=None):
    end = model.end_of_study
    lo = model.censor_lo if lo is None else lo
    if lo is None:
        return np.full(np.shape(uniforms), end)
    return lo + uniforms * (end - lo)


def _latent(model, rng, n, J):
    frailty = draw_frailty(model, rng, n)
    with np.errstate(divide="ignore"):
        proband = model.baseline_inverse(rng.standard_exponential(n) / frailty)
        relatives = model.baseline_inverse(rng.standard_exponential((n, J)) / frailty[:, None])
    return frailty, proband, relatives


def simulate_population(model, n, J, rng, censored=True):
    frailty, proband, relatives = _latent(model, rng, n, J)
    c_proband = _censor(model, rng.uniform(size=n))
    c_relatives = _censor(model, rng.uniform(size=(n, J)))

    if not censored:
        c_proband = np.full(n, np.inf)
        c_relatives = np.full((n, J), np.inf)

    return Population(
        frailty=frailty,
        proband_latent=proband,
        relative_latent=relatives,
        proband_time=np.minimum(proband, c_proband),
        proband_status=(proband <= c_proband).astype(np.int64),
        relative_time=np.minimum(relatives, c_relatives),
        relative_status=(relatives <= c_relatives).astype(np.int64)
    )


def empirical_kendall_tau(x, y):
    return float(kendalltau(x, y)[0])


def calibrate_nu(model, target_event_rate, end_of_study=None):
    if not 0 < target_event_rate < 1:
        raise NoRoot("event rate {0!r} is not in (0, 1)".format(target_event_rate))
    end = model.end_of_study if end_of_study is None else end_of_study

    def excess(log_nu):
        trial = model.with_(nu=float(np.exp(log_nu)))
        return 1.0 - float(trial.marginal_survival(end)) - target_event_rate

    lo, hi = -60.0, 60.0
    if excess(lo) * excess(hi) > 0:
        raise NoRoot("event rate {0!r} unreachable by {1!r}".format(target_event_rate, end))

    nu = float(np.exp(brentq(excess, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500)))
    log.info("calibrated nu=%.6g for event rate %.3f at age %.1f", nu, target_event_rate, end)
    return nu


def calibrate_censoring(model, target_fraction, J=1, a=1, seed=0, population=20000):
    """
    Lower bound c_lo of the uniform interim-censoring ages that makes the
    relatives' censoring fraction in an n1:a*n1 case-control sample hit
    target_fraction. Uses one fixed-seed population for every trial c_lo.
    """

    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2 ** 31 - 1,)))
    _, proband, relatives = _latent(model, rng, population, J)
    u_proband = rng.uniform(size=population)
    u_relatives = rng.uniform(size=(population, J))

    def excess(lo):
        case = proband <= _censor(model, u_proband, lo)
        events = relatives <= _censor(model, u_relatives, lo)
        if case.all() or not case.any():
            return 1.0 - target_fraction
        rate = (events[case].mean() + a * events[~case].mean()) / (1.0 + a)
        return (1.0 - rate) - target_fraction

    lo, hi = 0.0, model.end_of_study
    if excess(lo) * excess(hi) > 0:
        raise NoRoot("censoring fraction {0!r} unreachable".format(target_fraction))

    censor_lo = float(brentq(excess, lo, hi, xtol=1e-3))
    log.info("calibrated interim censoring lower bound %.3f for fraction %.3f", censor_lo, target_fraction)
    return censor_lo


def scenario_model(kind=GAMMA, kendall_tau=0.5, rate="high", J=1, a=1, seed=0):
    event_rate, censoring = SCENARIOS[rate]
    model = FrailtyModel(kind=kind, kendall_tau=kendall_tau)
    model = model.with_(nu=calibrate_nu(model, event_rate))
    return model.with_(censor_lo=calibrate_censoring(model, censoring, J=J, a=a, seed=seed))


@dataclass(frozen=True)
class SimConfig:
    model: FrailtyModel
    n1: int = 500
    a: int = 1
    J: int = 1
    target_event_rate: float = None
    seed: int = 0
    batch_size: int = 2000
    max_batches: int = 1000

    def __post_init__(self):
        if self.n1 < 1 or self.a < 1 or self.J < 1:
            raise ValueError("n1, a and J must all be at least 1")


def _family(family_id, pop, index):
    relatives = tuple(
        Observation(float(t), int(d))
        for t, d in zip(pop.relative_time[index], pop.relative_status[index])
    )
    proband = Observation(float(pop.proband_time[index]), int(pop.proband_status[index]))
    return FamilyRecord(family_id, proband, relatives)


def family_stream(seed, index):
    """
    Random stream of candidate family number index. Every family has its
    own stream, so a family's draws do not depend on how candidates are
    batched or on the order they are generated in.
    """

    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def draw_families(model, J, seed, indices):
    pops = [simulate_population(model, 1, J, family_stream(seed, index)) for index in indices]
    return Population(*(np.concatenate(column) for column in zip(*pops)))


def simulate_dataset(cfg):
    model = cfg.model
    if model.nu is None:
        if cfg.target_event_rate is None:
            raise ValueError("model has no nu and no target event rate to calibrate it")
        model = model.with_(nu=calibrate_nu(model, cfg.target_event_rate))

    need_cases = cfg.n1
    need_controls = cfg.a * cfg.n1
    families = []

    for batch in range(cfg.max_batches):
        if need_cases == 0 and need_controls == 0:
            break

        first = batch * cfg.batch_size
        pop = draw_families(model, cfg.J, cfg.seed, range(first, first + cfg.batch_size))

        cases = np.flatnonzero(pop.proband_status == 1)[:need_cases]
        controls = np.flatnonzero(pop.proband_status == 0)[:need_controls]
        need_cases -= cases.size
        need_controls -= controls.size

        for index in np.sort(np.concatenate([cases, controls])):
            families.append(_family("{0:08d}".format(first + index), pop, index))
    else:
        if need_cases or need_controls:
            raise PoolExhausted(
                "{0} cases and {1} controls still missing after {2} batches".format(
                    need_cases, need_controls, cfg.max_batches
                )
            )

    log.info("simulated %d families (%s frailty, tau=%.2f)", len(families), model.kind, model.kendall_tau)
    return Dataset(tuple(families)), true_marginal(model)


def oracle_surfaces(model, s_grid=None, u_grid=None, s_points=101, u_points=200):
    """
    Exact conditional surfaces on the linear time scale t = s * end_of_study,
    with Lam0star differentiated with respect to s.
    """

    end = model.end_of_study
    if s_grid is None:
        s_grid = Grid.linspace(0.0, 1.0, s_points)
    if u_grid is None:
        u_grid = Grid.linspace(0.0, end, u_points)

    t = end * s_grid.points[:, None]
    u = u_grid.points[None, :]
    s0, s1, star, _ = model.conditionals(t, u)

    with np.errstate(divide="ignore"):
        lam0 = -np.log(s0)
        lam1 = -np.log(s1)

    surfaces = ConditionalSurfaces(
        s_grid=s_grid,
        u_grid=u_grid,
        S0=s0,
        S1=s1,
        Lam0=lam0,
        Lam1=lam1,
        Lam0star=end * star,
        transform=TimeTransform.linear(end)
    )
    return surfaces, true_marginal(model)
