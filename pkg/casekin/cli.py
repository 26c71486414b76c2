import sys
import logging
import argparse
import dataclasses
from dataclasses import dataclass

import numpy as np

from .bandwidth import BandwidthConfig, CiConfig, percentile_ci, select_bandwidth
from .csvio import config_fingerprint, parse_csv, write_csv, write_tsv
from .data import Grid
from .errors import CasekinError
from .frailty import (
    GAMMA,
    PSTABLE,
    SCENARIOS,
    FrailtyModel,
    SimConfig,
    calibrate_censoring,
    calibrate_nu,
    oracle_surfaces,
    simulate_dataset
)
from .km import km_naive
from .marginal import estimate_marginal, marginal_from_surfaces
from .surfaces import EstimatorConfig, build_conditional_surfaces

log = logging.getLogger(__name__)

PROG = "casekin"
COMMANDS = ("estimate", "simulate", "select-bandwidth", "ci", "oracle-check")

ORACLE_TOLERANCE = 1e-3
REPORT_STEP = 2.0


class UsageError(CasekinError):
    pass


def _bandwidth(text):
    if text == "auto":
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("{0!r} is neither a number nor 'auto'".format(text))
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError("bandwidth must lie in (0, 1]")
    return value


@dataclass(frozen=True)
class RunConfig:
    command: str
    input: str = None
    output: str = None
    truth: str = None
    bandwidth: object = "auto"
    seed: int = 0
    b_inner: int = 30
    b_outer: int = 100
    level: float = 0.95
    s_points: int = 101
    u_points: int = 200
    t_points: int = 200
    with_ci: bool = False
    frailty: str = GAMMA
    tau: float = 0.5
    scenario: str = "high"
    event_rate: float = None
    censoring: float = None
    n1: int = 500
    ratio: int = 1
    relatives: int = 1
    surfaces: str = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError("unknown command {0!r}".format(self.command))
        if self.command in ("estimate", "select-bandwidth", "ci") and not self.input:
            raise UsageError("{0} needs --input".format(self.command))
        if self.command == "select-bandwidth" and self.bandwidth != "auto":
            raise UsageError("select-bandwidth does not take a fixed --bandwidth")

        try:
            self._validate()
        except ValueError as error:
            raise UsageError(str(error))

    def _validate(self):
        if self.bandwidth != "auto" and not 0 < self.bandwidth <= 1:
            raise ValueError("bandwidth must lie in (0, 1], got {0!r}".format(self.bandwidth))
        if min(self.s_points, self.u_points, self.t_points) < 2:
            raise ValueError("grids need at least 2 points")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative, got {0!r}".format(self.seed))
        if min(self.n1, self.ratio, self.relatives) < 1:
            raise ValueError("n1, ratio and relatives must all be at least 1")
        if self.scenario not in SCENARIOS:
            raise ValueError("unknown scenario {0!r}".format(self.scenario))
        for name in ("event_rate", "censoring"):
            value = getattr(self, name)
            if value is not None and not 0 < value < 1:
                raise ValueError("{0} must lie in (0, 1), got {1!r}".format(name.replace("_", " "), value))
        FrailtyModel(kind=self.frailty, kendall_tau=self.tau)
        self.ci_config()

    def estimator_config(self):
        return EstimatorConfig(s_points=self.s_points, u_points=self.u_points, t_points=self.t_points)

    def bandwidth_config(self):
        return BandwidthConfig(b_inner=self.b_inner, seed=self.seed, estimator=self.estimator_config())

    def ci_config(self):
        return CiConfig(
            b_outer=self.b_outer,
            level=self.level,
            seed=self.seed,
            estimator=self.estimator_config(),
            bandwidth=self.bandwidth_config()
        )

    def targets(self):
        event_rate, censoring = SCENARIOS[self.scenario]
        if self.event_rate is not None:
            event_rate = self.event_rate
        if self.censoring is not None:
            censoring = self.censoring
        return event_rate, censoring

    def fingerprint(self):
        return config_fingerprint(self)


def build_parser():
    parser = argparse.ArgumentParser(
        prog=PROG,
        description="Marginal survival estimation from case-control family data."
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug logging")
    commands = parser.add_subparsers(dest="command", metavar="command")
    commands.required = True

    def io_args(sub, needs_input=True):
        if needs_input:
            sub.add_argument("--input", required=True, help="family CSV (family_id,role,time,status)")
        sub.add_argument("--output", default="-", help="output path (default: stdout)")

    def grid_args(sub):
        sub.add_argument("--s-grid", dest="s_points", type=int, default=101, help="proband-time grid points")
        sub.add_argument("--u-grid", dest="u_points", type=int, default=200, help="relative-time grid points")
        sub.add_argument("--t-grid", dest="t_points", type=int, default=200, help="output age grid points")

    def bootstrap_args(sub, outer=False):
        sub.add_argument("--seed", type=int, default=0)
        sub.add_argument("--b-inner", type=int, default=30, help="bootstrap replications per candidate bandwidth")
        if outer:
            sub.add_argument("--b-outer", type=int, default=100, help="bootstrap replications for the bands")
            sub.add_argument("--level", type=float, default=0.95, help="confidence level")

    def frailty_args(sub):
        sub.add_argument("--frailty", choices=(GAMMA, PSTABLE), default=GAMMA)
        sub.add_argument("--tau", type=float, default=0.5, help="within-family Kendall tau")
        sub.add_argument("--scenario", choices=sorted(SCENARIOS), default="high")
        sub.add_argument("--event-rate", dest="event_rate", type=float, default=None,
                         help="cumulative event rate by end of study (overrides --scenario)")

    sub = commands.add_parser("estimate", help="estimate the marginal survival curve")
    io_args(sub)
    grid_args(sub)
    bootstrap_args(sub, outer=True)
    sub.add_argument("--bandwidth", type=_bandwidth, default="auto", help="bandwidth in (0, 1] or 'auto'")
    sub.add_argument("--ci", dest="with_ci", action="store_true", help="add bootstrap standard errors and bands")
    sub.add_argument("--surfaces", default=None, metavar="PATH",
                     help="also write the conditional surfaces (u, s, S0, S1, Lam0star) as TSV")

    sub = commands.add_parser("simulate", help="generate case-control families under a frailty model")
    io_args(sub, needs_input=False)
    frailty_args(sub)
    sub.add_argument("--censoring", type=float, default=None,
                     help="relatives' censoring fraction (overrides --scenario)")
    sub.add_argument("--truth", default=None, help="true marginal TSV path (default: OUTPUT.truth.tsv)")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--n1", type=int, default=500, help="case families")
    sub.add_argument("--ratio", type=int, default=1, help="control families per case family")
    sub.add_argument("--relatives", type=int, default=1, help="relatives per family")

    sub = commands.add_parser("select-bandwidth", help="bootstrap IMSE bandwidth search")
    io_args(sub)
    grid_args(sub)
    bootstrap_args(sub)

    sub = commands.add_parser("ci", help="percentile bootstrap confidence bands")
    io_args(sub)
    grid_args(sub)
    bootstrap_args(sub, outer=True)
    sub.add_argument("--bandwidth", type=_bandwidth, default="auto", help="bandwidth in (0, 1] or 'auto'")

    sub = commands.add_parser("oracle-check", help="run the estimator on exact frailty-model surfaces")
    io_args(sub, needs_input=False)
    grid_args(sub)
    frailty_args(sub)

    return parser


def config_from_args(args):
    fields = set(field.name for field in dataclasses.fields(RunConfig))
    values = dict((key, value) for key, value in vars(args).items() if key in fields)
    return RunConfig(**values)


def _resolve_bandwidth(ds, cfg):
    if cfg.bandwidth != "auto":
        return cfg.bandwidth
    return select_bandwidth(ds, cfg.bandwidth_config()).bandwidth


def report_ages(ds):
    """
    Every REPORT_STEP years from the 5th percentile of proband ages up to
    the largest proband age.
    """

    times = ds.columns.proband_times
    start = float(np.floor(np.percentile(times, 5)))
    ages = np.arange(start, ds.tau0 + 1e-9, REPORT_STEP)
    if ages.size < 2:
        return Grid([start, max(ds.tau0, start + REPORT_STEP)])
    return Grid(ages)


def _estimate(cfg):
    ds = parse_csv(cfg.input)
    h = _resolve_bandwidth(ds, cfg)
    ages = report_ages(ds)

    surfaces = build_conditional_surfaces(ds, h, config=cfg.estimator_config())
    estimate = estimate_marginal(ds, h, cfg.estimator_config(), t_grid=ages, surfaces=surfaces)
    naive = km_naive(ds)(ages.points)

    columns = ["t", "lambda_hat", "s_hat", "s_tilde", "naive_km"]
    table = [estimate.t_grid.points, estimate.lambda_hat, estimate.s_hat, estimate.s_tilde, naive]
    if cfg.with_ci:
        band = percentile_ci(ds, h, cfg.ci_config(), t_grid=ages)
        columns += ["se", "lower", "upper", "naive_se"]
        table += [band.se, band.lower, band.upper, band.naive_se]

    comments = ["bandwidth {0!r}".format(h)]
    write_tsv(cfg.output, columns, zip(*table), cfg.fingerprint(), comments)
    if cfg.surfaces is not None:
        write_surfaces(cfg.surfaces, surfaces, cfg.fingerprint())
    return 0


SURFACE_COLUMNS = ("u", "s", "S0", "S1", "Lam0star")


def write_surfaces(path, surfaces, fingerprint=None):
    comments = [
        "bandwidth {0!r}".format(surfaces.bandwidth),
        "s is the proband age mapped to [0, 1] by the weighted empirical distribution function"
    ]
    write_tsv(path, SURFACE_COLUMNS, surfaces.rows(), fingerprint, comments)


def _simulate(cfg):
    event_rate, censoring = cfg.targets()

    model = FrailtyModel(kind=cfg.frailty, kendall_tau=cfg.tau)
    model = model.with_(nu=calibrate_nu(model, event_rate))
    model = model.with_(censor_lo=calibrate_censoring(
        model, censoring, J=cfg.relatives, a=cfg.ratio, seed=cfg.seed
    ))

    sim = SimConfig(model=model, n1=cfg.n1, a=cfg.ratio, J=cfg.relatives, seed=cfg.seed)
    ds, truth = simulate_dataset(sim)
    write_csv(ds, cfg.output)

    truth_path = cfg.truth
    if truth_path is None and cfg.output not in (None, "-"):
        truth_path = cfg.output + ".truth.tsv"
    if truth_path is not None:
        comments = ["nu {0!r} censor_lo {1!r}".format(model.nu, model.censor_lo)]
        write_tsv(truth_path, ["t", "survival"], truth.rows(), cfg.fingerprint(), comments)
    return 0


def _select_bandwidth(cfg):
    ds = parse_csv(cfg.input)
    selection = select_bandwidth(ds, cfg.bandwidth_config())
    rows = ((h, value, int(h == selection.bandwidth)) for h, value in selection.table)
    comments = ["selected {0!r}".format(selection.bandwidth)]
    write_tsv(cfg.output, ["h", "imse", "selected"], rows, cfg.fingerprint(), comments)
    return 0


def _ci(cfg):
    ds = parse_csv(cfg.input)
    h = _resolve_bandwidth(ds, cfg)
    band = percentile_ci(ds, h, cfg.ci_config())
    comments = ["bandwidth {0!r} level {1!r} failed {2}".format(h, band.level, band.n_failed)]
    write_tsv(cfg.output, ["t", "s_tilde", "se", "lower", "upper"], band.rows(), cfg.fingerprint(), comments)
    return 0


def oracle_error(model, s_points=101, u_points=200, t_points=200):
    """
    Largest absolute error of the cumulative hazard recovered from the
    model's exact surfaces, over a grid on [0, end_of_study].
    """

    surfaces, _ = oracle_surfaces(model, s_points=s_points, u_points=u_points)
    t_grid = Grid.linspace(0.0, model.end_of_study, t_points)
    estimate = marginal_from_surfaces(surfaces, t_grid)
    return float(np.max(np.abs(estimate.lambda_hat - model.marginal_cumhazard(t_grid.points))))


def _oracle_check(cfg):
    event_rate, _ = cfg.targets()
    model = FrailtyModel(kind=cfg.frailty, kendall_tau=cfg.tau)
    model = model.with_(nu=calibrate_nu(model, event_rate))

    error = oracle_error(model, cfg.s_points, cfg.u_points, cfg.t_points)
    passed = error < ORACLE_TOLERANCE
    rows = [(model.kind, model.kendall_tau, error, ORACLE_TOLERANCE, int(passed))]
    write_tsv(cfg.output, ["frailty", "tau", "max_abs_error", "tolerance", "passed"], rows, cfg.fingerprint())

    log.info("oracle max |Lambda_hat - Lambda| = %.3g", error)
    return 0 if passed else 1


HANDLERS = {
    "estimate": _estimate,
    "simulate": _simulate,
    "select-bandwidth": _select_bandwidth,
    "ci": _ci,
    "oracle-check": _oracle_check
}


def run_command(cfg):
    return HANDLERS[cfg.command](cfg)


def _fail(error, status):
    sys.stderr.write("{0}: error: {1}: {2}\n".format(PROG, type(error).__name__, error))
    return status


def main(argv=None):
    args = build_parser().parse_args(argv)

    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")
    logging.captureWarnings(True)

    try:
        cfg = config_from_args(args)
    except UsageError as error:
        return _fail(error, 2)

    try:
        return run_command(cfg)
    except (CasekinError, OSError, ValueError) as error:
        return _fail(error, 1)


if __name__ == "__main__":
    sys.exit(main())
