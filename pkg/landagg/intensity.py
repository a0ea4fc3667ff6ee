"""Land-use intensity scoring.

Indicators are min-max normalized over the whole panel (every city and year
together), weighted either by the vertical-and-horizontal scatter-degree
method (principal eigenvector of the summed cross-product matrices) or by the
entropy method, and combined into one score per city-year. Scores are then
ranked per year to classify each city's trajectory.
"""

import logging
from dataclasses import dataclass, field
from os import PathLike

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from scipy.special import xlogy

from landagg.errors import (AllZeroIndicator, ConstantIndicator, DataError, DegenerateSpectrum,
                            DimensionMismatch, MissingValues, SingleObservation, UninformativeIndicators)
from landagg.numerics import eig_sym
from landagg.panel import PanelDataset

log = logging.getLogger(__name__)

ORIENTATIONS = ("positive", "negative")
DIMENSIONS = ("land-use-intensity", "economic-benefit", "ecological-benefit")
WEIGHT_MODES = ("unit-norm", "sum-one")
CLAMP_EPSILON = 1e-10

STABILITY_BANDS = ((5, "stable"), (10, "fluctuating"))
INTENSITY_BANDS = ((10.0, "high"), (20.0, "moderate"))


@dataclass(frozen=True)
class IndicatorSpec:
    name: str
    orientation: str = "positive"
    dimension: str = "land-use-intensity"

    def __post_init__(self):
        if self.orientation not in ORIENTATIONS:
            raise DataError(f"indicator '{self.name}': orientation must be positive or negative, "
                            f"got '{self.orientation}'")
        if self.dimension not in DIMENSIONS:
            raise DataError(f"indicator '{self.name}': unknown dimension '{self.dimension}'")

    @classmethod
    def from_dict(cls, data: dict) -> "IndicatorSpec":
        return cls(data["name"], data.get("orientation", "positive"), data.get("dimension", "land-use-intensity"))


@dataclass(frozen=True)
class NormalizedPanel:
    cities: tuple[str, ...]
    years: tuple[int, ...]
    indicators: tuple[IndicatorSpec, ...]
    values: NDArray  # city x year x indicator, in [0, 1]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(spec.name for spec in self.indicators)

    def period(self, t: int) -> NDArray:
        """City x indicator matrix for the t-th year."""
        return self.values[:, t, :]


@dataclass(frozen=True)
class WeightVector:
    indicators: tuple[str, ...]
    weights: NDArray
    mode: str
    method: str = ""
    lambda_max: float | None = None
    dimensions: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.mode not in WEIGHT_MODES:
            raise DataError(f"unknown weight normalization '{self.mode}'")
        weights = np.array(self.weights, dtype=float)
        if weights.shape != (len(self.indicators),):
            raise DimensionMismatch(f"{weights.size} weights for {len(self.indicators)} indicators")
        if (weights < 0).any():
            raise DataError("indicator weights must be nonnegative")
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "indicators", tuple(self.indicators))
        object.__setattr__(self, "dimensions", tuple(self.dimensions))

    def as_sum_one(self) -> "WeightVector":
        return self._rescaled(self.weights / self.weights.sum(), "sum-one")

    def as_unit_norm(self) -> "WeightVector":
        return self._rescaled(self.weights / np.linalg.norm(self.weights), "unit-norm")

    def as_mode(self, mode: str) -> "WeightVector":
        return self.as_sum_one() if mode == "sum-one" else self.as_unit_norm()

    def _rescaled(self, weights: NDArray, mode: str) -> "WeightVector":
        return WeightVector(self.indicators, weights, mode, self.method, self.lambda_max, self.dimensions)


@dataclass(frozen=True)
class IntensityScores:
    cities: tuple[str, ...]
    years: tuple[int, ...]
    values: NDArray  # city x year

    def ranks(self) -> NDArray:
        """Rank per year, 1 = highest score; ties go to the lexicographically smaller city."""
        n, t = self.values.shape
        ranks = np.zeros((n, t), dtype=int)
        for k in range(t):
            order = sorted(range(n), key=lambda i: (-self.values[i, k], self.cities[i]))
            ranks[order, k] = np.arange(1, n + 1)
        return ranks


@dataclass(frozen=True)
class DynamicClass:
    city: str
    stability: str
    intensity: str
    max_difference: int
    mean_rank: float


def normalize(ds: PanelDataset, specs: list[IndicatorSpec]) -> NormalizedPanel:
    names = [spec.name for spec in specs]
    if not names:
        raise DataError("at least one indicator is required")
    if len(set(names)) != len(names):
        raise DataError("indicator names must be unique")

    # resolves every name before the missing check so unknown names are reported first
    for name in names:
        ds.variable_index(name)
    if ds.has_missing(names):
        raise MissingValues("indicator variables have missing cells; interpolate the panel first")

    columns = []
    for spec in specs:
        x = ds.series(spec.name)
        lo, hi = x.min(), x.max()
        if hi <= lo:
            raise ConstantIndicator(f"indicator '{spec.name}' is constant over the panel ({lo})")
        if spec.orientation == "positive":
            columns.append((x - lo) / (hi - lo))
        else:
            columns.append((hi - x) / (hi - lo))

    return NormalizedPanel(ds.cities, ds.years, tuple(specs), np.stack(columns, axis=2))


def cross_product_sum(normalized: NormalizedPanel) -> NDArray:
    """H = sum over years of A_k' A_k."""
    return np.einsum("itj,itk->jk", normalized.values, normalized.values)


def vh_weights(normalized: NormalizedPanel, mode: str = "unit-norm") -> WeightVector:
    """Scatter-degree weights: the principal eigenvector of the summed cross products.

    H is entrywise nonnegative, so the absolute value of any top eigenvector
    is itself a top eigenvector; components below CLAMP_EPSILON become 0.
    """
    n, t, j = normalized.values.shape
    if n < 2 or t < 1 or j < 1:
        raise DataError(f"scatter-degree weights need >= 2 cities, >= 1 year and >= 1 indicator "
                        f"(got {n}, {t}, {j})")

    h = cross_product_sum(normalized)
    values, vectors = eig_sym(h)
    lambda_max = float(values[-1])
    if lambda_max <= 0.0:
        raise DegenerateSpectrum("cross-product matrix is zero; every normalized indicator is zero")

    w = np.abs(vectors[:, -1])
    w[w < CLAMP_EPSILON] = 0.0
    w /= np.linalg.norm(w)

    log.debug("scatter-degree lambda_max = %.6g", lambda_max)
    weights = WeightVector(normalized.names, w, "unit-norm", "vh", lambda_max,
                           tuple(spec.dimension for spec in normalized.indicators))
    return weights.as_mode(mode)


def entropy_weights(normalized: NormalizedPanel) -> WeightVector:
    """Entropy weights over the pooled city-year observations, sum-one mode."""
    n, t, j = normalized.values.shape
    pooled = normalized.values.reshape(n * t, j)
    observations = pooled.shape[0]
    if observations < 2:
        raise SingleObservation("entropy weights need at least two city-year observations")

    totals = pooled.sum(axis=0)
    zero = np.flatnonzero(totals <= 0)
    if zero.size:
        raise AllZeroIndicator(f"indicator '{normalized.names[zero[0]]}' is zero in every observation")

    p = pooled / totals
    entropy = -xlogy(p, p).sum(axis=0) / np.log(observations)
    divergence = 1.0 - entropy
    divergence[divergence < CLAMP_EPSILON] = 0.0
    if divergence.sum() <= 0:
        raise UninformativeIndicators("every indicator has maximum entropy")

    return WeightVector(normalized.names, divergence / divergence.sum(), "sum-one", "entropy", None,
                        tuple(spec.dimension for spec in normalized.indicators))


def score(normalized: NormalizedPanel, w: WeightVector) -> IntensityScores:
    if w.indicators != normalized.names:
        raise DimensionMismatch(f"weights are for ({', '.join(w.indicators)}), "
                                f"panel has ({', '.join(normalized.names)})")
    return IntensityScores(normalized.cities, normalized.years, normalized.values @ w.weights)


def _band(value, bands, last: str) -> str:
    for edge, label in bands:
        if value <= edge:
            return label
    return last


def dynamic_classify(scores: IntensityScores) -> dict[str, DynamicClass]:
    n, t = scores.values.shape
    if n < 2 or t < 2:
        raise DataError(f"dynamic classification needs >= 2 cities and >= 2 years (got {n}, {t})")

    ranks = scores.ranks()
    classes = {}
    for i, city in enumerate(scores.cities):
        difference = int(ranks[i].max() - ranks[i].min())
        mean_rank = float(ranks[i].mean())
        classes[city] = DynamicClass(city, _band(difference, STABILITY_BANDS, "jumping"),
                                     _band(mean_rank, INTENSITY_BANDS, "low"), difference, mean_rank)
    return classes


def weight_report(w: WeightVector) -> dict:
    unit, total = w.as_unit_norm(), w.as_sum_one()
    dimensions = w.dimensions or ("",) * len(w.indicators)
    return {
        "method": w.method,
        "mode": w.mode,
        "lambda_max": w.lambda_max,
        "indicators": [
            {"name": name, "dimension": dimension,
             "weight_unit_norm": float(u), "weight_sum_one": float(s)}
            for name, dimension, u, s in zip(w.indicators, dimensions, unit.weights, total.weights)
        ],
    }


def scores_frame(scores: IntensityScores) -> pd.DataFrame:
    n, t = scores.values.shape
    return pd.DataFrame({
        "city": np.repeat(scores.cities, t),
        "year": np.tile(scores.years, n),
        "score": scores.values.reshape(-1),
    })


def write_scores(scores: IntensityScores, path: str | PathLike) -> None:
    frame = scores_frame(scores)
    frame["score"] = [repr(float(v)) for v in frame["score"]]
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")


def write_classification(classes: dict[str, DynamicClass], path: str | PathLike) -> None:
    frame = pd.DataFrame([
        {"city": c.city, "stability": c.stability, "intensity": c.intensity,
         "max_difference": c.max_difference, "mean_rank": repr(c.mean_rank)}
        for c in classes.values()
    ], columns=["city", "stability", "intensity", "max_difference", "mean_rank"])
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
