import math
import collections
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    DuplicateProband,
    EmptyDataset,
    InvalidRow,
    MissingProband,
    NegativeTime
)

PROBAND = "P"
RELATIVE = "R"

CONTROL = 0
CASE = 1


@dataclass(frozen=True)
class Observation:
    time: float
    status: int

    def __post_init__(self):
        if not math.isfinite(self.time):
            raise InvalidRow("time {0!r} is not finite".format(self.time))
        if self.time < 0:
            raise NegativeTime("time {0!r} is negative".format(self.time))
        if self.status not in (0, 1):
            raise InvalidRow("status {0!r} not in {{0, 1}}".format(self.status))


@dataclass(frozen=True)
class FamilyRecord:
    family_id: str
    proband: Observation
    relatives: tuple = ()

    @property
    def proband_group(self):
        return self.proband.status

    @property
    def size(self):
        return len(self.relatives)


class Columns(collections.namedtuple("Columns", [
    "proband_times",
    "groups",
    "sizes",
    "relative_times",
    "relative_status",
    "relative_family"
])):
    """
    Flat numpy views of a dataset. relative_family[k] is the index (into
    the family arrays) of the family relative k belongs to.
    """


@dataclass(frozen=True)
class Dataset:
    families: tuple = field(default=())

    @cached_property
    def columns(self):
        sizes = np.array([f.size for f in self.families], dtype=np.int64)
        times = [r.time for f in self.families for r in f.relatives]
        status = [r.status for f in self.families for r in f.relatives]
        return Columns(
            proband_times=np.array([f.proband.time for f in self.families], dtype=float),
            groups=np.array([f.proband_group for f in self.families], dtype=np.int64),
            sizes=sizes,
            relative_times=np.array(times, dtype=float),
            relative_status=np.array(status, dtype=np.int64),
            relative_family=np.repeat(np.arange(len(self.families)), sizes)
        )

    @property
    def n1(self):
        return int(np.sum(self.columns.groups == CASE))

    @property
    def n0(self):
        return int(np.sum(self.columns.groups == CONTROL))

    @property
    def tau0(self):
        times = self.columns.proband_times
        return float(times.max()) if times.size else 0.0

    @property
    def tau(self):
        times = self.columns.relative_times
        return float(times.max()) if times.size else 0.0

    @property
    def max_relatives(self):
        sizes = self.columns.sizes
        return int(sizes.max()) if sizes.size else 0

    def __len__(self):
        return len(self.families)

    def require_both_groups(self):
        if self.n1 < 1 or self.n0 < 1:
            raise EmptyDataset(
                "need at least one case and one control family "
                "(got n1={0}, n0={1})".format(self.n1, self.n0)
            )
        return self

    def group(self, q):
        return [f for f in self.families if f.proband_group == q]


def _number(value, name):
    try:
        return float(value)
    except (TypeError, ValueError):
        raise InvalidRow("{0} {1!r} is not a number".format(name, value))


def _observation(time, status):
    """
    >>> _observation("64.5", 1.0)
    Observation(time=64.5, status=1)
    >>> _observation(64.5, 1.5)
    Traceback (most recent call last):
        ...
    casekin.errors.InvalidRow: status 1.5 not in {0, 1}
    """

    number = _number(status, "status")
    if number not in (0.0, 1.0):
        raise InvalidRow("status {0!r} not in {{0, 1}}".format(status))
    return Observation(_number(time, "time"), int(number))


def validate_dataset(raw_records):
    """
    Build a Dataset from (family_id, role, time, status) rows.

    >>> ds = validate_dataset([
    ...     ("a", "P", 64.0, 1), ("a", "R", 50.0, 0), ("a", "R", 93.0, 1),
    ...     ("b", "P", 60.0, 0)
    ... ])
    >>> ds.n1, ds.n0, ds.tau0, ds.tau
    (1, 1, 64.0, 93.0)
    """

    probands = {}
    relatives = {}
    order = []

    for family_id, role, time, status in raw_records:
        family_id = str(family_id)
        if family_id not in relatives:
            relatives[family_id] = []
            order.append(family_id)

        obs = _observation(time, status)
        if role == PROBAND:
            if family_id in probands:
                raise DuplicateProband("family {0!r} has more than one proband".format(family_id))
            probands[family_id] = obs
        elif role == RELATIVE:
            relatives[family_id].append(obs)
        else:
            raise InvalidRow("unknown role {0!r} (expected P or R)".format(role))

    families = []
    for family_id in sorted(order):
        if family_id not in probands:
            raise MissingProband("family {0!r} has no proband".format(family_id))
        families.append(FamilyRecord(family_id, probands[family_id], tuple(relatives[family_id])))

    return Dataset(tuple(families)).require_both_groups()


def dataset_rows(ds):
    for family in ds.families:
        yield family.family_id, PROBAND, family.proband.time, family.proband.status
        for relative in family.relatives:
            yield family.family_id, RELATIVE, relative.time, relative.status


class StepSurvival(object):
    """
    Right-continuous nonincreasing step function with S(0) = 1.

    >>> curve = StepSurvival([1.0, 2.0], [0.5, 0.0])
    >>> curve([0.0, 0.99, 1.0, 1.5, 2.0, 9.0]).tolist()
    [1.0, 1.0, 0.5, 0.5, 0.0, 0.0]
    """

    def __init__(self, jump_times, values):
        jump_times = np.asarray(jump_times, dtype=float)
        values = np.asarray(values, dtype=float)

        if jump_times.shape != values.shape or jump_times.ndim != 1:
            raise ValueError("jump times and values must be 1-d arrays of equal length")
        if np.any(np.diff(jump_times) <= 0):
            raise ValueError("jump times must be strictly increasing")
        if np.any(np.diff(values) > 0) or np.any(values < 0) or np.any(values > 1):
            raise ValueError("values must be nonincreasing within [0, 1]")

        self._jump_times = jump_times
        self._values = values
        self._padded = np.concatenate([[1.0], values])

    @property
    def jump_times(self):
        return self._jump_times

    @property
    def values(self):
        return self._values

    @property
    def value_at_zero(self):
        return 1.0

    def __call__(self, t):
        index = np.searchsorted(self._jump_times, np.asarray(t, dtype=float), side="right")
        return self._padded[index]

    def sample(self, uniforms):
        """
        Inverse-transform draws: the first jump time where the curve
        falls to or below the uniform, or inf when it never does.
        """

        uniforms = np.asarray(uniforms, dtype=float)
        # values are nonincreasing, so -values is sorted
        index = np.searchsorted(-self._values, -uniforms, side="left")
        out = np.full(uniforms.shape, np.inf)
        hit = index < self._values.size
        out[hit] = self._jump_times[index[hit]]
        return out

    def __repr__(self):
        return "StepSurvival(jumps={0})".format(self._jump_times.size)


class Grid(object):
    """
    >>> g = Grid.linspace(0.0, 1.0, 5)
    >>> g.points.tolist()
    [0.0, 0.25, 0.5, 0.75, 1.0]
    >>> g.spacing
    0.25
    """

    def __init__(self, points):
        points = np.asarray(points, dtype=float)
        if points.ndim != 1 or points.size < 2:
            raise ValueError("a grid needs at least two points")
        if np.any(np.diff(points) <= 0):
            raise ValueError("grid points must be strictly increasing")
        self._points = points

    @classmethod
    def linspace(cls, lo, hi, count):
        return cls(np.linspace(lo, hi, int(count)))

    @property
    def points(self):
        return self._points

    @property
    def lo(self):
        return float(self._points[0])

    @property
    def hi(self):
        return float(self._points[-1])

    @property
    def spacing(self):
        steps = np.diff(self._points)
        if np.allclose(steps, steps[0]):
            return float(steps[0])
        return None

    def __len__(self):
        return self._points.size

    def __repr__(self):
        return "Grid(lo={0!r}, hi={1!r}, n={2})".format(self.lo, self.hi, len(self))
