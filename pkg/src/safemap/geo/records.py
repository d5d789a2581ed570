"""Accident-report ingestion from CSV."""

from __future__ import annotations

import csv
import datetime as dt
import io
import warnings
from dataclasses import dataclass

REQUIRED_COLUMNS = ("id", "date", "time", "day_of_week",
                    "latitude", "longitude", "vehicles", "casualties")


class IngestError(Exception):
    """Unusable input file: missing columns or no valid records."""


@dataclass(frozen=True)
class AccidentRecord:
    """One accident report, restricted to attributes common across sources."""

    id: str
    date: dt.date
    time: dt.time
    day_of_week: int
    latitude: float
    longitude: float
    vehicles: int
    casualties: int

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"latitude {self.latitude} outside [-90, 90]")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValueError(f"longitude {self.longitude} outside [-180, 180]")
        if not 1 <= self.day_of_week <= 7:
            raise ValueError(f"day_of_week {self.day_of_week} outside 1..7")
        if self.vehicles < 0 or self.casualties < 0:
            raise ValueError("vehicle and casualty counts must be non-negative")


@dataclass
class IngestResult:
    records: list[AccidentRecord]
    skipped: int


def _parse_row(row: dict) -> AccidentRecord:
    day, month, year = row["date"].strip().split("/")
    hh, mm = row["time"].strip().split(":")[:2]
    return AccidentRecord(
        id=row["id"].strip(),
        date=dt.date(int(year), int(month), int(day)),
        time=dt.time(int(hh), int(mm)),
        day_of_week=int(row["day_of_week"]),
        latitude=float(row["latitude"]),
        longitude=float(row["longitude"]),
        vehicles=int(row["vehicles"]),
        casualties=int(row["casualties"]),
    )


def ingest_accidents(csv_stream) -> IngestResult:
    """Parse accident reports; malformed rows are skipped and counted.

    ``csv_stream`` is a text file object (or anything ``csv.DictReader``
    accepts).  Dates are dd/mm/yyyy, times HH:MM.  Rows that fail to parse
    or violate record invariants are dropped with one summary warning;
    a missing mandatory column or an empty file is a hard error.
    """
    if isinstance(csv_stream, (str, bytes)):
        csv_stream = io.StringIO(csv_stream.decode("utf-8")
                                 if isinstance(csv_stream, bytes) else csv_stream)
    reader = csv.DictReader(csv_stream)
    if reader.fieldnames is None:
        raise IngestError("empty file: no header row")
    missing = [c for c in REQUIRED_COLUMNS if c not in reader.fieldnames]
    if missing:
        raise IngestError(f"missing mandatory columns: {missing}")
    records: list[AccidentRecord] = []
    skipped = 0
    for row in reader:
        try:
            records.append(_parse_row(row))
        except (ValueError, KeyError, AttributeError, TypeError):
            skipped += 1
    if skipped:
        warnings.warn(f"skipped {skipped} malformed accident row(s)", stacklevel=2)
    if not records:
        raise IngestError("no records")
    return IngestResult(records=records, skipped=skipped)
