"""City-year panel container, CSV ingestion and missing-value interpolation."""

import logging
from dataclasses import dataclass, field
from os import PathLike

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from landagg.errors import (AllMissingSeries, DataError, DuplicateObservation, MalformedHeader,
                            MissingValues, MissingYear, NegativeValue, NonNumericValue,
                            UnknownCity, UnknownSector, UnknownVariable)

log = logging.getLogger(__name__)

LONG_HEADER = ["city", "year", "variable", "value"]
MISSING_TOKENS = {"", "NA"}


def _readonly(a: NDArray) -> NDArray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PanelDataset:
    """City x year x variable table with an explicit missing mask.

    ``values`` holds NaN where ``missing`` is set, but the mask is what
    callers should consult.
    """
    cities: tuple[str, ...]
    years: tuple[int, ...]
    variables: tuple[str, ...]
    values: NDArray
    missing: NDArray = field(default=None)

    def __post_init__(self):
        cities = tuple(str(c) for c in self.cities)
        years = tuple(int(y) for y in self.years)
        variables = tuple(str(v) for v in self.variables)

        if len(set(cities)) != len(cities):
            raise DataError("city identifiers must be unique")
        if len(set(variables)) != len(variables):
            raise DataError("variable names must be unique")
        if any(b <= a for a, b in zip(years, years[1:])):
            raise DataError("years must be strictly increasing")

        values = np.array(self.values, dtype=float)
        shape = (len(cities), len(years), len(variables))
        if values.shape != shape:
            raise DataError(f"values have shape {values.shape}, axes need {shape}")

        if self.missing is None:
            missing = np.isnan(values)
        else:
            missing = np.array(self.missing, dtype=bool)
            if missing.shape != shape:
                raise DataError(f"missing mask has shape {missing.shape}, axes need {shape}")

        values = np.where(missing, np.nan, values)

        object.__setattr__(self, "cities", cities)
        object.__setattr__(self, "years", years)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "missing", _readonly(missing))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape

    def city_index(self, city: str) -> int:
        try:
            return self.cities.index(city)
        except ValueError:
            raise UnknownCity(f"unknown city '{city}'") from None

    def year_index(self, year: int) -> int:
        try:
            return self.years.index(int(year))
        except ValueError:
            raise MissingYear(f"year {year} is outside the panel ({self.years[0]}-{self.years[-1]})") from None

    def variable_index(self, variable: str) -> int:
        try:
            return self.variables.index(variable)
        except ValueError:
            raise UnknownVariable(f"unknown variable '{variable}'") from None

    def value(self, city: str, year: int, variable: str) -> float | None:
        i, t, k = self.city_index(city), self.year_index(year), self.variable_index(variable)
        if self.missing[i, t, k]:
            return None
        return float(self.values[i, t, k])

    def series(self, variable: str) -> NDArray:
        """City x year array for one variable, NaN where missing."""
        return self.values[:, :, self.variable_index(variable)].copy()

    def has_missing(self, variables=None) -> bool:
        if variables is None:
            return bool(self.missing.any())
        idx = [self.variable_index(v) for v in variables]
        return bool(self.missing[:, :, idx].any())

    def with_variable(self, name: str, data: NDArray) -> "PanelDataset":
        """New dataset with ``name`` added (or replaced); NaN cells become missing."""
        data = np.asarray(data, dtype=float)
        if data.shape != (len(self.cities), len(self.years)):
            raise DataError(f"variable '{name}' has shape {data.shape}, "
                            f"expected {(len(self.cities), len(self.years))}")

        if name in self.variables:
            k = self.variables.index(name)
            values = self.values.copy()
            values[:, :, k] = data
            return PanelDataset(self.cities, self.years, self.variables, values)

        values = np.concatenate([self.values, data[:, :, None]], axis=2)
        return PanelDataset(self.cities, self.years, self.variables + (name,), values)

    def subset(self, cities=None, years=None, variables=None) -> "PanelDataset":
        ci = [self.city_index(c) for c in cities] if cities is not None else list(range(len(self.cities)))
        ti = [self.year_index(y) for y in years] if years is not None else list(range(len(self.years)))
        vi = [self.variable_index(v) for v in variables] if variables is not None else list(range(len(self.variables)))

        values = self.values[np.ix_(ci, ti, vi)]
        missing = self.missing[np.ix_(ci, ti, vi)]
        return PanelDataset(tuple(self.cities[i] for i in ci), tuple(self.years[t] for t in ti),
                            tuple(self.variables[k] for k in vi), values, missing)

    def to_frame(self) -> pd.DataFrame:
        """Long-schema frame, city-major then year then variable order."""
        n, t, k = self.shape
        frame = pd.DataFrame({
            "city": np.repeat(self.cities, t * k),
            "year": np.tile(np.repeat(self.years, k), n),
            "variable": np.tile(self.variables, n * t),
            "value": self.values.reshape(-1),
        })
        return frame


@dataclass(frozen=True)
class EmploymentTable:
    year: int
    cities: tuple[str, ...]
    sectors: tuple[str, ...]
    employment: NDArray

    def __post_init__(self):
        employment = np.array(self.employment, dtype=float)
        cities = tuple(self.cities)
        sectors = tuple(self.sectors)

        if employment.shape != (len(cities), len(sectors)):
            raise DataError(f"employment has shape {employment.shape}, "
                            f"expected {(len(cities), len(sectors))}")
        if np.isnan(employment).any():
            raise MissingValues(f"employment table for {self.year} has missing cells")
        if (employment < 0).any():
            i, j = np.argwhere(employment < 0)[0]
            raise NegativeValue(f"negative employment for {cities[i]} in sector '{sectors[j]}'")

        object.__setattr__(self, "cities", cities)
        object.__setattr__(self, "sectors", sectors)
        object.__setattr__(self, "employment", _readonly(employment))

    def sector_index(self, sector: str) -> int:
        try:
            return self.sectors.index(sector)
        except ValueError:
            raise UnknownSector(f"unknown sector '{sector}'") from None

    def column(self, sector: str) -> NDArray:
        return self.employment[:, self.sector_index(sector)]

    def aggregate(self, groups: dict[str, list[str]]) -> "EmploymentTable":
        """Sum sector columns into named groups; the groups become the new sectors."""
        columns = []
        for name, members in groups.items():
            idx = [self.sector_index(s) for s in members]
            columns.append(self.employment[:, idx].sum(axis=1))
        return EmploymentTable(self.year, self.cities, tuple(groups), np.column_stack(columns))


def _parse_float(cell: str, row: int, column: str) -> float:
    cell = cell.strip()
    if cell in MISSING_TOKENS:
        return np.nan
    try:
        return float(cell)
    except ValueError:
        raise NonNumericValue(f"row {row}, column '{column}': '{cell}' is not a number") from None


def _parse_year(cell: str, row: int) -> int:
    try:
        return int(cell.strip())
    except ValueError:
        raise NonNumericValue(f"row {row}, column 'year': '{cell}' is not an integer year") from None


def read_table(path: str | PathLike) -> pd.DataFrame:
    try:
        return pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise MalformedHeader(f"{path}: file is empty") from None
    except pd.errors.ParserError as e:
        raise MalformedHeader(f"{path}: {e}") from None


def load_panel(path: str | PathLike, schema: str = "long") -> PanelDataset:
    """Read a long (city,year,variable,value) or wide (city,year,<vars...>) panel CSV.

    Row numbers in error messages count the header as row 1.
    """
    raw = read_table(path)
    header = [str(c) for c in raw.columns]
    records: dict[tuple[str, int, str], float] = {}
    cities: list[str] = []
    variables: list[str] = []

    def add(city: str, year: int, variable: str, value: float, row: int):
        key = (city, year, variable)
        if key in records:
            raise DuplicateObservation(f"row {row}: duplicate observation for "
                                       f"({city}, {year}, {variable})")
        records[key] = value
        if city not in cities:
            cities.append(city)
        if variable not in variables:
            variables.append(variable)

    if schema == "long":
        if header != LONG_HEADER:
            raise MalformedHeader(f"{path}: expected header {','.join(LONG_HEADER)}, got {','.join(header)}")

        for n, (city, year, variable, value) in enumerate(raw.itertuples(index=False), start=2):
            add(city.strip(), _parse_year(year, n), variable.strip(), _parse_float(value, n, "value"), n)

    elif schema == "wide":
        if len(header) < 3 or header[:2] != ["city", "year"]:
            raise MalformedHeader(f"{path}: wide header must start with city,year and name at least one variable")
        if len(set(header)) != len(header):
            raise MalformedHeader(f"{path}: duplicate column names in header")

        for n, row in enumerate(raw.itertuples(index=False), start=2):
            city, year = row[0].strip(), _parse_year(row[1], n)
            for column, cell in zip(header[2:], row[2:]):
                add(city, year, column, _parse_float(cell, n, column), n)

        # wide columns keep header order even when every cell is blank
        variables = header[2:]

    else:
        raise MalformedHeader(f"unknown panel schema '{schema}' (expected 'long' or 'wide')")

    years = sorted({year for _, year, _ in records})
    values = np.full((len(cities), len(years), len(variables)), np.nan)
    ci = {c: i for i, c in enumerate(cities)}
    ti = {y: t for t, y in enumerate(years)}
    vi = {v: k for k, v in enumerate(variables)}
    for (city, year, variable), value in records.items():
        values[ci[city], ti[year], vi[variable]] = value

    ds = PanelDataset(tuple(cities), tuple(years), tuple(variables), values)
    log.debug("loaded %s: %d cities, %d years, %d variables, %d missing cells",
              path, len(cities), len(years), len(variables), int(ds.missing.sum()))
    return ds


def write_panel(ds: PanelDataset, path: str | PathLike) -> None:
    """Write the canonical long schema; missing cells are empty strings."""
    frame = ds.to_frame()
    frame["value"] = [("" if np.isnan(v) else repr(float(v))) for v in frame["value"]]
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")


def write_wide(ds: PanelDataset, path: str | PathLike) -> None:
    """Write the wide schema (city,year,<variables>); missing cells are empty strings."""
    n, t, _ = ds.shape
    frame = pd.DataFrame({"city": np.repeat(ds.cities, t), "year": np.tile(ds.years, n)})
    for k, variable in enumerate(ds.variables):
        frame[variable] = [("" if np.isnan(v) else repr(float(v))) for v in ds.values[:, :, k].reshape(-1)]
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")


def region_means(ds: PanelDataset, regions: dict[str, tuple[str, ...]]) -> PanelDataset:
    """Per-year mean over each region's member cities; regions take the place of cities.

    Missing cells are skipped. A region-year with no observed member stays missing.
    """
    if not regions:
        raise DataError("no regions to aggregate")

    means = []
    for name, members in regions.items():
        if not members:
            raise DataError(f"region '{name}' has no member cities")
        sub = ds.subset(cities=list(members))
        observed = ~sub.missing
        count = observed.sum(axis=0)
        total = np.where(observed, sub.values, 0.0).sum(axis=0)
        means.append(np.where(count > 0, total / np.maximum(count, 1), np.nan))
        log.debug("region %s: %d cities", name, len(members))

    return PanelDataset(tuple(regions), ds.years, ds.variables, np.stack(means))


def interpolate_missing(ds: PanelDataset) -> PanelDataset:
    """Fill gaps linearly in year index; carry the nearest observation past the ends."""
    if not ds.missing.any():
        return ds

    values = ds.values.copy()
    positions = np.arange(len(ds.years), dtype=float)
    filled = 0

    for i, city in enumerate(ds.cities):
        for k, variable in enumerate(ds.variables):
            gaps = ds.missing[i, :, k]
            if not gaps.any():
                continue
            if gaps.all():
                raise AllMissingSeries(f"no observed value for city '{city}', variable '{variable}'")

            observed = ~gaps
            # np.interp holds the end values constant outside the observed range
            values[i, gaps, k] = np.interp(positions[gaps], positions[observed], values[i, observed, k])
            filled += int(gaps.sum())

    if filled:
        log.warning("interpolated %d missing cells", filled)
    return PanelDataset(ds.cities, ds.years, ds.variables, values, np.zeros_like(ds.missing))


def extract_employment(ds: PanelDataset, year: int, sectors: list[str]) -> EmploymentTable:
    t = ds.year_index(year)
    idx = []
    for sector in sectors:
        if sector not in ds.variables:
            raise UnknownSector(f"unknown sector '{sector}'")
        idx.append(ds.variables.index(sector))

    if ds.missing[:, t, idx].any():
        i, j = np.argwhere(ds.missing[:, t, idx])[0]
        raise MissingValues(f"employment for {ds.cities[i]}, sector '{sectors[j]}' is missing in {year}; "
                            f"interpolate the panel first")

    return EmploymentTable(int(year), ds.cities, tuple(sectors), ds.values[:, t, idx])
