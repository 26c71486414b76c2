"""
Flat family CSV in, tab-separated result tables out.

Input rows are family_id,role,time,status with role P (proband, one per
family) or R (relative). Output tables start with a "# config <hash>"
comment, then a header line.
"""

import sys
import csv
import json
import math
import hashlib
import contextlib
import dataclasses

from .data import PROBAND, RELATIVE, dataset_rows, validate_dataset
from .errors import EmptyDataset, ParseError

HEADER = ("family_id", "role", "time", "status")


def _parse_row(line, row):
    if len(row) != len(HEADER):
        raise ParseError(line, "expected {0} fields, got {1}".format(len(HEADER), len(row)))

    family_id, role, time, status = (value.strip() for value in row)
    if not family_id:
        raise ParseError(line, "empty family_id")
    if role not in (PROBAND, RELATIVE):
        raise ParseError(line, "role {0!r} is not P or R".format(role))

    try:
        time = float(time)
    except ValueError:
        raise ParseError(line, "time {0!r} is not a number".format(time))
    if not math.isfinite(time):
        raise ParseError(line, "time {0!r} is not finite".format(time))
    if status not in ("0", "1"):
        raise ParseError(line, "status {0!r} is not 0 or 1".format(status))

    return family_id, role, time, int(status)


def read_rows(stream):
    """
    >>> import io
    >>> rows = read_rows(io.StringIO("family_id,role,time,status\\na,P,64.5,1\\n"))
    >>> list(rows)
    [('a', 'P', 64.5, 1)]
    """

    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None:
        raise EmptyDataset("input is empty")
    if tuple(value.strip() for value in header) != HEADER:
        raise ParseError(1, "header must be {0!r}".format(",".join(HEADER)))

    for row in reader:
        if not row or not any(value.strip() for value in row):
            continue
        yield _parse_row(reader.line_num, row)


def parse_csv(path):
    with open(path, newline="", encoding="utf-8") as stream:
        return validate_dataset(list(read_rows(stream)))


@contextlib.contextmanager
def _output(path, newline=None):
    if path is None or path == "-":
        yield sys.stdout
        return
    with open(path, "w", newline=newline, encoding="utf-8") as stream:
        yield stream


def write_csv(ds, path):
    # repr gives the shortest text that parses back to the same float
    with _output(path, newline="") as stream:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(HEADER)
        for family_id, role, time, status in dataset_rows(ds):
            writer.writerow([family_id, role, repr(float(time)), status])


def _plain(value):
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return dataclasses.asdict(value)
    return str(value)


def config_fingerprint(config):
    """
    >>> config_fingerprint({"a": 1}) == config_fingerprint({"a": 1})
    True
    >>> len(config_fingerprint({"a": 1}))
    16
    """

    if dataclasses.is_dataclass(config):
        config = dataclasses.asdict(config)
    text = json.dumps(config, sort_keys=True, default=_plain)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def format_value(value):
    """
    >>> [format_value(v) for v in (0.5, 1.0 / 3.0, 7, float("nan"), "x")]
    ['0.5', '0.3333333333', '7', 'nan', 'x']
    """

    if isinstance(value, str):
        return value
    if isinstance(value, int) and not isinstance(value, bool):
        return str(value)
    return format(float(value), ".10g")


def write_tsv(path, columns, rows, fingerprint=None, comments=()):
    with _output(path) as stream:
        if fingerprint is not None:
            stream.write("# config {0}\n".format(fingerprint))
        for comment in comments:
            stream.write("# {0}\n".format(comment))
        stream.write("\t".join(columns) + "\n")
        for row in rows:
            stream.write("\t".join(format_value(value) for value in row) + "\n")


def read_tsv(stream):
    """
    Column names and float rows of a table written by write_tsv.

    >>> import io
    >>> text = "# config abc\\nt\\tv\\n1\\t0.5\\n"
    >>> read_tsv(io.StringIO(text))
    (['t', 'v'], [[1.0, 0.5]])
    """

    columns = None
    rows = []
    for line in stream:
        line = line.rstrip("\n")
        if not line or line.startswith("#"):
            continue
        if columns is None:
            columns = line.split("\t")
            continue
        rows.append([float(value) for value in line.split("\t")])
    return columns, rows
