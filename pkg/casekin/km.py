"""Product-limit curves for relatives and for the relatives' censoring times."""

import logging
from dataclasses import dataclass

import numpy as np

from .data import StepSurvival
from .errors import EmptyInput, NoRelatives

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class KmInput:
    observations: tuple
    flip_status: bool = False


def km_from_arrays(times, status, flip_status=False):
    """
    >>> km_from_arrays([1.0, 2.0, 3.0, 4.0], [1, 0, 1, 1]).values.tolist()
    [0.75, 0.375, 0.0]
    """

    times = np.asarray(times, dtype=float)
    status = np.asarray(status, dtype=np.int64)
    if times.size == 0:
        raise EmptyInput()

    events = (status == 0) if flip_status else (status == 1)
    event_times, deaths = np.unique(times[events], return_counts=True)
    if event_times.size == 0:
        return StepSurvival([], [])

    # at risk at v means observed time >= v, so an event and a censoring
    # tied at v both count in the risk set (events precede censorings)
    ordered = np.sort(times)
    at_risk = ordered.size - np.searchsorted(ordered, event_times, side="left")

    values = np.cumprod(1.0 - deaths / at_risk)
    return StepSurvival(event_times, np.clip(values, 0.0, 1.0))


def km_estimate(km_input):
    observations = km_input.observations
    if not observations:
        raise EmptyInput()
    times = [obs.time for obs in observations]
    status = [obs.status for obs in observations]
    return km_from_arrays(times, status, km_input.flip_status)


def km_relatives(ds, group):
    columns = ds.columns
    mask = columns.groups[columns.relative_family] == group
    if not np.any(mask):
        raise NoRelatives("no relatives in proband group {0!r}".format(group))
    return km_from_arrays(columns.relative_times[mask], columns.relative_status[mask])


def km_naive(ds):
    columns = ds.columns
    if columns.relative_times.size == 0:
        raise NoRelatives("dataset has no relatives")
    return km_from_arrays(columns.relative_times, columns.relative_status)


def km_censoring(ds):
    columns = ds.columns
    if columns.relative_times.size == 0:
        raise NoRelatives("dataset has no relatives")
    return km_from_arrays(columns.relative_times, columns.relative_status, flip_status=True)
