"""Station files, target-minus-reference differencing and calendar labels.

A station file is a CSV with header ``year,season,value`` holding whole
cycles: every season 1..T of every year from the first to the last.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import MdlsegError, NotFullCycles, PeriodicSeries, validate_series


class ParseError(MdlsegError):
    pass


class GapError(MdlsegError):
    def __init__(self, year: int, season: int):
        super().__init__(f"missing observation for year {year}, season {season}")
        self.year = year
        self.season = season


class AlignmentError(MdlsegError):
    pass


@dataclass(frozen=True)
class StationSeries:
    series: PeriodicSeries
    start_year: int

    @property
    def period(self) -> int:
        return self.series.period


def calendar_label(t: int, T: int, start_year: int) -> tuple[int, int]:
    """(year, season) of the 1-based index t."""
    return start_year + (t - 1) // T, (t - 1) % T + 1


def calendar_index(year: int, season: int, T: int, start_year: int) -> int:
    return (year - start_year) * T + season


def read_station_file(path, T: int) -> StationSeries:
    path = Path(path)
    rows: dict[tuple[int, int], float] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if [h.strip().lower() for h in header] != ["year", "season", "value"]:
            raise ParseError(f"{path}:1: expected header 'year,season,value', got {','.join(header)!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise ParseError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            try:
                year, season, value = int(row[0]), int(row[1]), float(row[2])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: cannot parse {','.join(row)!r}") from None
            if not 1 <= season <= T:
                raise ParseError(f"{path}:{lineno}: season {season} outside 1..{T}")
            if (year, season) in rows:
                raise ParseError(f"{path}:{lineno}: duplicate entry {year},{season}")
            rows[(year, season)] = value
    if not rows:
        raise ParseError(f"{path}: no data rows")
    years = [y for y, _ in rows]
    first, last = min(years), max(years)
    values = []
    for year in range(first, last + 1):
        for season in range(1, T + 1):
            if (year, season) not in rows:
                raise GapError(year, season)
            values.append(rows[(year, season)])
    return StationSeries(validate_series(values, T), first)


def ingest(path, T: int) -> PeriodicSeries:
    return read_station_file(path, T).series


def format_station_csv(series: PeriodicSeries, start_year: int) -> str:
    T = series.period
    lines = ["year,season,value"]
    for t, x in enumerate(series.values, start=1):
        year, season = calendar_label(t, T, start_year)
        lines.append(f"{year},{season},{x:.17g}")
    return "\n".join(lines) + "\n"


def write_station_file(path, series: PeriodicSeries, start_year: int):
    if series.N % series.period:
        raise NotFullCycles("series does not hold whole cycles")
    Path(path).write_text(format_station_csv(series, start_year))


def difference(target: PeriodicSeries, refs: Sequence[PeriodicSeries]) -> PeriodicSeries:
    """Target minus the unweighted mean of the reference series."""
    if not refs:
        raise AlignmentError("at least one reference series is required")
    for r in refs:
        if r.N != target.N or r.period != target.period:
            raise AlignmentError(
                f"reference has N={r.N}, T={r.period}; target has N={target.N}, T={target.period}"
            )
    ref = np.mean([r.values for r in refs], axis=0)
    return PeriodicSeries(target.values - ref, target.period)


def difference_stations(target: StationSeries, refs: Sequence[StationSeries]) -> StationSeries:
    for r in refs:
        if r.start_year != target.start_year:
            raise AlignmentError(
                f"reference starts in {r.start_year}, target in {target.start_year}"
            )
    return StationSeries(difference(target.series, [r.series for r in refs]),
                         target.start_year)
