"""Agglomeration indices: location quotient, relative diversification, co-agglomeration."""

import logging
from dataclasses import dataclass
from enum import Enum
from os import PathLike

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from landagg.errors import AxisMismatch, BothZero, DataError, ZeroCityTotal, ZeroSectorTotal, ZeroSubsetTotal
from landagg.panel import EmploymentTable

log = logging.getLogger(__name__)

INDEX_KINDS = ("LQ", "RDI", "COGG")


class CoggFormula(Enum):
    BALANCE_PLUS_HEIGHT = "balance-plus-height"
    BALANCE_ONLY = "balance-only"
    HEIGHT_ONLY = "height-only"

    @classmethod
    def parse(cls, value: "str | CoggFormula") -> "CoggFormula":
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            options = ", ".join(f.value for f in cls)
            raise DataError(f"unknown co-agglomeration formula '{value}' (expected one of {options})") from None


@dataclass(frozen=True)
class IndexSeries:
    cities: tuple[str, ...]
    year: int
    values: NDArray
    kind: str
    label: str = ""

    def __post_init__(self):
        if self.kind not in INDEX_KINDS:
            raise DataError(f"unknown index kind '{self.kind}'")
        values = np.array(self.values, dtype=float)
        if values.shape != (len(self.cities),):
            raise DataError(f"{len(self.cities)} cities but {values.shape[0]} values")
        values.setflags(write=False)
        object.__setattr__(self, "cities", tuple(self.cities))
        object.__setattr__(self, "values", values)
        if not self.label:
            object.__setattr__(self, "label", self.kind)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.cities, self.values.tolist()))


def location_quotient(t: EmploymentTable, sector: str, reference: EmploymentTable | None = None) -> IndexSeries:
    """LQ_i = (x_is / sum_s x_is) / (sum_i x_is / sum_i sum_s x_is), denominator over ``reference``."""
    if reference is None:
        reference = t

    city_totals = t.employment.sum(axis=1)
    zero = np.flatnonzero(city_totals <= 0)
    if zero.size:
        raise ZeroCityTotal(f"city '{t.cities[zero[0]]}' has zero total employment in {t.year}")

    reference_sector = reference.column(sector).sum()
    if reference_sector <= 0:
        raise ZeroSectorTotal(f"sector '{sector}' has zero employment in the reference table ({reference.year})")

    local_share = t.column(sector) / city_totals
    reference_share = reference_sector / reference.employment.sum()
    return IndexSeries(t.cities, t.year, local_share / reference_share, "LQ", f"LQ_{sector}")


def rdi(t: EmploymentTable, sectors: list[str]) -> IndexSeries:
    """Relative diversification, one minus the Herfindahl index of sector shares within ``sectors``."""
    idx = [t.sector_index(s) for s in sectors]
    block = t.employment[:, idx]
    totals = block.sum(axis=1)

    zero = np.flatnonzero(totals <= 0)
    if zero.size:
        raise ZeroSubsetTotal(f"city '{t.cities[zero[0]]}' has no employment in {', '.join(sectors)} ({t.year})")

    shares = block / totals[:, None]
    return IndexSeries(t.cities, t.year, 1.0 - np.sum(shares ** 2, axis=1), "RDI")


def coagglomeration(lq_m: IndexSeries, lq_s: IndexSeries,
                    f: CoggFormula | str = CoggFormula.BALANCE_PLUS_HEIGHT) -> IndexSeries:
    """Co-agglomeration of two LQ series.

    balance = 1 - |m - s| / (m + s), height = m + s; the default formula is
    their sum.
    """
    f = CoggFormula.parse(f)
    if lq_m.cities != lq_s.cities or lq_m.year != lq_s.year:
        raise AxisMismatch("co-agglomeration inputs must share cities and year")

    m, s = lq_m.values, lq_s.values
    if (m < 0).any() or (s < 0).any():
        raise DataError("location quotients must be nonnegative")

    height = m + s
    zero = np.flatnonzero(height == 0)
    if zero.size:
        raise BothZero(f"both location quotients are zero for city '{lq_m.cities[zero[0]]}'")

    balance = 1.0 - np.abs(m - s) / height
    if f is CoggFormula.BALANCE_ONLY:
        values = balance
    elif f is CoggFormula.HEIGHT_ONLY:
        values = height
    else:
        values = balance + height

    return IndexSeries(lq_m.cities, lq_m.year, values, "COGG")


def lq_tier(value: float) -> int:
    if value > 2.0:
        return 1
    if value > 1.5:
        return 2
    if value >= 1.0:
        return 3
    return 4


def classify_lq_tiers(lq: IndexSeries) -> dict[str, int]:
    """Tier 1: LQ > 2; tier 2: (1.5, 2]; tier 3: [1, 1.5]; tier 4: below 1."""
    if lq.kind != "LQ":
        raise DataError(f"tier classification needs an LQ series, got {lq.kind}")
    if not np.isfinite(lq.values).all():
        raise DataError("tier classification needs finite location quotients")
    return {city: lq_tier(value) for city, value in zip(lq.cities, lq.values)}


def index_frame(series: list[IndexSeries]) -> pd.DataFrame:
    """Long frame ``city,year,index,value`` in the order the series are given."""
    frames = [pd.DataFrame({"city": s.cities, "year": s.year, "index": s.label, "value": s.values})
              for s in series]
    if not frames:
        return pd.DataFrame(columns=["city", "year", "index", "value"])
    return pd.concat(frames, ignore_index=True)


def write_indices(series: list[IndexSeries], path: str | PathLike) -> None:
    frame = index_frame(series)
    frame["value"] = [repr(float(v)) for v in frame["value"]]
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
