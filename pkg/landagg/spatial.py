"""Contiguity weights and Moran's I (global and local) with permutation inference."""

import logging
from dataclasses import dataclass, field
from os import PathLike

import numpy as np
from numpy.typing import NDArray
from scipy import stats

from landagg.errors import (ConstantVector, DataError, DimensionMismatch, EmptyWeights, MalformedHeader,
                            SelfLoop, UnknownCity)
from landagg.numerics import eig_sym
from landagg.panel import read_table
from landagg.replicates import run_replicates

log = logging.getLogger(__name__)

ADJACENCY_HEADER = ["city_a", "city_b"]
DEFAULT_PERMUTATIONS = 999


@dataclass(frozen=True)
class SpatialWeights:
    """n x n weights over ``cities`` built from a symmetric binary adjacency.

    ``spectrum`` holds the eigenvalues (ascending) of the matrix the weights are
    similar to: D^-1/2 A D^-1/2 when row-standardized, A itself otherwise.
    """
    cities: tuple[str, ...]
    adjacency: NDArray
    weights: NDArray
    standardized: bool
    spectrum: NDArray = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.cities)

    @property
    def s0(self) -> float:
        return float(self.weights.sum())

    @property
    def s1(self) -> float:
        return float(0.5 * ((self.weights + self.weights.T) ** 2).sum())

    @property
    def s2(self) -> float:
        return float(((self.weights.sum(axis=1) + self.weights.sum(axis=0)) ** 2).sum())

    @property
    def isolated(self) -> tuple[str, ...]:
        degree = self.adjacency.sum(axis=1)
        return tuple(city for city, d in zip(self.cities, degree) if d == 0)

    def lag(self, x: NDArray) -> NDArray:
        return self.weights @ x

    def interval(self) -> tuple[float, float]:
        """Open interval of spatial parameters for which I - rho W is nonsingular."""
        lo, hi = float(self.spectrum[0]), float(self.spectrum[-1])
        if not lo < 0.0 < hi:
            raise EmptyWeights("weight matrix has no neighbours; spatial parameter is not identified")
        return 1.0 / lo, 1.0 / hi

    def log_det(self, rho: float) -> float:
        """ln|det(I - rho W)| through the cached spectrum."""
        return float(np.sum(np.log(np.abs(1.0 - rho * self.spectrum))))

    def restrict(self, cities) -> "SpatialWeights":
        idx = [self.city_index(c) for c in cities]
        return _from_adjacency(tuple(self.cities[i] for i in idx), self.adjacency[np.ix_(idx, idx)],
                               self.standardized)

    def city_index(self, city: str) -> int:
        try:
            return self.cities.index(city)
        except ValueError:
            raise UnknownCity(f"city '{city}' is not on the weights axis") from None


@dataclass(frozen=True)
class MoranResult:
    statistic: float
    expectation: float
    variance: float
    z: float
    p_norm: float
    variance_rand: float | None
    z_rand: float | None
    p_rand: float | None
    permutations: int
    p_sim: float | None = None
    mean_sim: float | None = None
    std_sim: float | None = None

    def as_dict(self) -> dict:
        return {
            "I": self.statistic,
            "E": self.expectation,
            "var": self.variance,
            "z": self.z,
            "p_norm": self.p_norm,
            "var_rand": self.variance_rand,
            "z_rand": self.z_rand,
            "p_rand": self.p_rand,
            "p": self.p_sim,
            "permutations": self.permutations,
            "mean_sim": self.mean_sim,
            "std_sim": self.std_sim,
        }


@dataclass(frozen=True)
class LisaResult:
    cities: tuple[str, ...]
    local: NDArray
    lag: NDArray  # spatial lag of the standardized values
    standardized: NDArray
    quadrants: tuple[str, ...]
    p_sim: NDArray | None
    permutations: int

    def as_records(self) -> list[dict]:
        records = []
        for i, city in enumerate(self.cities):
            records.append({
                "city": city,
                "I": float(self.local[i]),
                "lag": float(self.lag[i]),
                "quadrant": self.quadrants[i],
                "p": None if self.p_sim is None else float(self.p_sim[i]),
                "x": float(self.standardized[i]),
                "y": float(self.lag[i]),
            })
        return records


def _from_adjacency(cities: tuple[str, ...], adjacency: NDArray, standardize: bool) -> SpatialWeights:
    adjacency = np.array(adjacency, dtype=float)
    degree = adjacency.sum(axis=1)
    connected = degree > 0

    if standardize:
        weights = np.zeros_like(adjacency)
        weights[connected] = adjacency[connected] / degree[connected, None]
        scale = np.zeros_like(degree)
        scale[connected] = 1.0 / np.sqrt(degree[connected])
        symmetric = scale[:, None] * adjacency * scale[None, :]
    else:
        weights = adjacency.copy()
        symmetric = adjacency

    spectrum, _ = eig_sym(symmetric)
    for a in (adjacency, weights, spectrum):
        a.setflags(write=False)

    w = SpatialWeights(cities, adjacency, weights, standardize, spectrum)
    if w.isolated:
        log.warning("isolated cities with all-zero weight rows: %s", ", ".join(w.isolated))
    return w


def build_weights(edges, cities, standardize: bool = True) -> SpatialWeights:
    """Binary contiguity weights from undirected ``(city_a, city_b)`` pairs.

    A pair with an empty ``city_b`` only declares ``city_a`` (a city without neighbours).
    """
    cities = tuple(str(c) for c in cities)
    if len(set(cities)) != len(cities):
        raise DataError("city identifiers on the weights axis must be unique")
    index = {c: i for i, c in enumerate(cities)}

    adjacency = np.zeros((len(cities), len(cities)))
    for a, b in edges:
        for city in (a, b) if b else (a,):
            if city not in index:
                raise UnknownCity(f"edge ({a}, {b}) names city '{city}' which is not on the axis")
        if not b:
            continue
        if a == b:
            raise SelfLoop(f"edge ({a}, {b}) is a self loop")
        adjacency[index[a], index[b]] = adjacency[index[b], index[a]] = 1.0

    return _from_adjacency(cities, adjacency, standardize)


def load_adjacency(path: str | PathLike) -> list[tuple[str, str]]:
    raw = read_table(path)
    header = [str(c) for c in raw.columns]
    if header != ADJACENCY_HEADER:
        raise MalformedHeader(f"{path}: expected header {','.join(ADJACENCY_HEADER)}, got {','.join(header)}")
    return [(a.strip(), b.strip()) for a, b in raw.itertuples(index=False)]


def adjacency_cities(edges) -> tuple[str, ...]:
    """Cities named by an edge list, in order of first appearance."""
    cities = []
    for a, b in edges:
        for city in (a, b):
            if city and city not in cities:
                cities.append(city)
    return tuple(cities)


def _centered(x, w: SpatialWeights) -> NDArray:
    x = np.asarray(x, dtype=float)
    if x.shape != (w.n,):
        raise DimensionMismatch(f"{x.size} values for {w.n} cities")
    if not np.isfinite(x).all():
        raise DataError("Moran's I needs a finite value for every city")
    if w.n < 3:
        raise DataError(f"Moran's I needs at least 3 cities, got {w.n}")
    if w.s0 == 0.0:
        raise EmptyWeights("weight matrix has no nonzero weight")

    z = x - x.mean()
    if np.all(np.abs(z) <= 1e-12 * max(1.0, np.abs(x).max())):
        raise ConstantVector("variable is constant across cities")
    return z


def moran_statistic(z: NDArray, w: SpatialWeights) -> float:
    """I = (n / S0) z'Wz / z'z for a centered z."""
    return float(w.n / w.s0 * (z @ w.lag(z)) / (z @ z))


def _one_tailed(sim: NDArray, observed, expectation) -> NDArray:
    """Share of simulated values at least as extreme as ``observed`` on its side of ``expectation``."""
    above = observed >= expectation
    larger = np.where(above, (sim >= observed).sum(axis=0), (sim <= observed).sum(axis=0))
    return (larger + 1.0) / (sim.shape[0] + 1.0)


def global_moran(x, w: SpatialWeights, permutations: int = DEFAULT_PERMUTATIONS, seed: int = 0,
                 workers: int = 1) -> MoranResult:
    z = _centered(x, w)
    n = w.n
    statistic = moran_statistic(z, w)

    expectation = -1.0 / (n - 1)
    s0, s1, s2 = w.s0, w.s1, w.s2
    s02 = s0 * s0
    variance = (n * n * s1 - n * s2 + 3 * s02) / ((n - 1) * (n + 1) * s02) - expectation ** 2
    z_norm = (statistic - expectation) / np.sqrt(variance)
    p_norm = float(2.0 * stats.norm.sf(abs(z_norm)))

    variance_rand = z_rand = p_rand = None
    if n > 3:
        k = (z ** 4).sum() / n / ((z ** 2).sum() / n) ** 2
        a = n * ((n * n - 3 * n + 3) * s1 - n * s2 + 3 * s02)
        b = k * ((n * n - n) * s1 - 2 * n * s2 + 6 * s02)
        variance_rand = float((a - b) / ((n - 1) * (n - 2) * (n - 3) * s02) - expectation ** 2)
        if variance_rand > 0:
            z_rand = float((statistic - expectation) / np.sqrt(variance_rand))
            p_rand = float(2.0 * stats.norm.sf(abs(z_rand)))

    result = dict(statistic=statistic, expectation=expectation, variance=float(variance), z=float(z_norm),
                  p_norm=p_norm, variance_rand=variance_rand, z_rand=z_rand, p_rand=p_rand,
                  permutations=int(permutations))
    if permutations > 0:
        sim = np.array(run_replicates(lambda r, rng: moran_statistic(rng.permutation(z), w),
                                      permutations, seed, workers))
        result.update(p_sim=float(_one_tailed(sim, statistic, expectation)),
                      mean_sim=float(sim.mean()), std_sim=float(sim.std()))

    log.debug("global Moran's I = %.6f (z = %.3f)", statistic, z_norm)
    return MoranResult(**result)


def local_moran(x, w: SpatialWeights, permutations: int = DEFAULT_PERMUTATIONS, seed: int = 0,
                workers: int = 1) -> LisaResult:
    z = _centered(x, w)
    n = w.n
    m2 = (z @ z) / n
    local = z / m2 * w.lag(z)

    standardized = z / z.std()
    lag = w.lag(standardized)
    quadrants = tuple(("H" if zi >= 0 else "L") + ("H" if li >= 0 else "L") for zi, li in zip(z, lag))

    p_sim = None
    if permutations > 0:
        # row i holds every other city's value and the weights i gives them
        off = ~np.eye(n, dtype=bool)
        others = np.broadcast_to(z, (n, n))[off].reshape(n, n - 1)
        row_weights = w.weights[off].reshape(n, n - 1)

        def conditional(r, rng):
            shuffled = rng.permuted(others, axis=1)
            return z / m2 * (row_weights * shuffled).sum(axis=1)

        sim = np.array(run_replicates(conditional, permutations, seed, workers))
        expectation = -w.weights.sum(axis=1) / (n - 1)
        p_sim = _one_tailed(sim, local, expectation)

    return LisaResult(w.cities, local, lag, standardized, quadrants, p_sim, int(permutations))


def moran_report(global_result: MoranResult, local_result: LisaResult, w: SpatialWeights, **context) -> dict:
    """JSON-ready report; ``local`` doubles as Moran scatter data (x = z/sd, y = lag)."""
    report = dict(context)
    report["n"] = w.n
    report["global"] = global_result.as_dict()
    report["local"] = local_result.as_records()
    report["isolated"] = list(w.isolated)
    return report
