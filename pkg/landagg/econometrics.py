"""Fixed-effects panel regressions: within OLS, spatial lag (SLM) and spatial error (SEM) by ML.

Rows of every design are ordered city-major then year. The spatial models
apply W to each year's cross section, so they need a balanced panel whose
city axis matches the weights.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy import stats

from landagg.errors import (BoundarySolution, DataError, InsufficientObservations, NonConvergence, RankDeficient,
                            RankDeficientDesign, UnbalancedPanel, UnknownCity)
from landagg.numerics import hessian, least_squares, maximize_1d
from landagg.panel import PanelDataset
from landagg.spatial import SpatialWeights

log = logging.getLogger(__name__)

EFFECTS = ("city", "twoway")
MODELS = {"ols": "OLS-FE", "slm": "SLM-FE", "sem": "SEM-FE"}

BOUNDARY_DELTA = 1e-6
BOUNDARY_WARNING = 1e-2
SEARCH_GRID = 201
SEARCH_TOLERANCE = 1e-8
WITHIN_TOLERANCE = 1e-12
WITHIN_MAX_PASSES = 1000

STAR_LEVELS = ((2.576, "***"), (1.960, "**"), (1.645, "*"))


@dataclass(frozen=True)
class ModelSpec:
    name: str
    dependent: str
    focal: str
    quadratic: bool = False
    controls: tuple[str, ...] = ()
    effects: str = "city"

    def __post_init__(self):
        object.__setattr__(self, "controls", tuple(self.controls))
        if self.focal in self.controls:
            raise DataError(f"model '{self.name}': focal regressor '{self.focal}' is also a control")
        if self.dependent == self.focal or self.dependent in self.controls:
            raise DataError(f"model '{self.name}': dependent variable '{self.dependent}' is also a regressor")
        if len(set(self.controls)) != len(self.controls):
            raise DataError(f"model '{self.name}': duplicate control variables")
        if self.effects not in EFFECTS:
            raise DataError(f"model '{self.name}': effects must be one of {', '.join(EFFECTS)}")

    @property
    def squared_name(self) -> str:
        return f"{self.focal}2"

    @property
    def columns(self) -> tuple[str, ...]:
        focal = (self.focal, self.squared_name) if self.quadratic else (self.focal,)
        return focal + self.controls

    @classmethod
    def from_dict(cls, name: str, data: dict) -> "ModelSpec":
        return cls(name, data["dependent"], data["focal"], bool(data.get("quadratic", False)),
                   tuple(data.get("controls", ())), data.get("effects", "city"))


@dataclass(frozen=True)
class DesignMatrices:
    spec: ModelSpec
    columns: tuple[str, ...]
    y: NDArray
    x: NDArray
    city: NDArray  # row -> position on `cities`
    year: NDArray  # row -> position on `years`
    cities: tuple[str, ...]
    years: tuple[int, ...]

    @property
    def nobs(self) -> int:
        return self.y.shape[0]

    @property
    def balanced(self) -> bool:
        return self.nobs == len(self.cities) * len(self.years)

    def select(self, keep: NDArray) -> "DesignMatrices":
        """Rows where ``keep`` is set, with both axes re-indexed to what remains."""
        city_ids = np.unique(self.city[keep])
        year_ids = np.unique(self.year[keep])
        city_map = np.full(len(self.cities), -1)
        city_map[city_ids] = np.arange(city_ids.size)
        year_map = np.full(len(self.years), -1)
        year_map[year_ids] = np.arange(year_ids.size)
        return DesignMatrices(self.spec, self.columns, self.y[keep], self.x[keep],
                              city_map[self.city[keep]], year_map[self.year[keep]],
                              tuple(self.cities[i] for i in city_ids), tuple(self.years[t] for t in year_ids))


@dataclass(frozen=True)
class SpatialFit:
    model: str
    columns: tuple[str, ...]
    coefficients: NDArray
    std_errors: NDArray
    t_stats: NDArray
    sigma2: float
    loglik: float
    r2: float
    nobs: int
    n_cities: int
    n_years: int
    spatial_param: float | None = None
    spatial_se: float | None = None
    spatial_t: float | None = None
    label: str = ""
    residuals: NDArray = field(default=None, repr=False)

    @property
    def spatial_name(self) -> str | None:
        return {"SLM-FE": "rho", "SEM-FE": "lambda"}.get(self.model)

    @property
    def r2_kind(self) -> str:
        return "R-squared" if self.model == "OLS-FE" else "pseudo R-squared"

    def coefficient(self, name: str) -> float:
        return float(self.coefficients[self.columns.index(name)])


@dataclass(frozen=True)
class LmTest:
    statistic: float
    p_value: float


@dataclass(frozen=True)
class LmDiagnostics:
    lm_lag: LmTest
    lm_error: LmTest
    robust_lm_lag: LmTest
    robust_lm_error: LmTest

    def as_dict(self) -> dict:
        return {name: {"statistic": test.statistic, "p": test.p_value}
                for name, test in (("lm_lag", self.lm_lag), ("lm_error", self.lm_error),
                                   ("robust_lm_lag", self.robust_lm_lag),
                                   ("robust_lm_error", self.robust_lm_error))}


def build_design(ds: PanelDataset, spec: ModelSpec) -> DesignMatrices:
    y = ds.series(spec.dependent)
    focal = ds.series(spec.focal)
    blocks = [focal]
    if spec.quadratic:
        blocks.append(focal ** 2)
    blocks.extend(ds.series(name) for name in spec.controls)

    n, t = y.shape
    x = np.stack(blocks, axis=2).reshape(n * t, len(blocks))
    y = y.reshape(n * t)
    city = np.repeat(np.arange(n), t)
    year = np.tile(np.arange(t), n)

    keep = np.isfinite(y) & np.isfinite(x).all(axis=1)
    dropped = int((~keep).sum())
    if dropped:
        log.warning("model '%s': %d city-years with missing values dropped", spec.name, dropped)

    k = len(spec.columns)
    if keep.sum() < k + 2:
        raise InsufficientObservations(f"model '{spec.name}': {int(keep.sum())} usable rows for {k} regressors")

    full = DesignMatrices(spec, spec.columns, y, x, city, year, ds.cities, ds.years)
    return full.select(keep) if dropped else full


def balance_design(d: DesignMatrices) -> DesignMatrices:
    """Largest balanced block: drop incomplete cities or incomplete years, whichever keeps more rows."""
    if d.balanced:
        return d

    observed = np.zeros((len(d.cities), len(d.years)), dtype=bool)
    observed[d.city, d.year] = True
    complete_cities = observed.all(axis=1)
    complete_years = observed.all(axis=0)

    by_city = int(complete_cities.sum()) * len(d.years)
    by_year = len(d.cities) * int(complete_years.sum())
    if max(by_city, by_year) == 0:
        raise UnbalancedPanel(f"model '{d.spec.name}': no balanced block of cities and years remains")

    if by_year >= by_city:
        keep = complete_years[d.year]
        log.warning("model '%s': balancing dropped years %s", d.spec.name,
                    ", ".join(str(y) for y, ok in zip(d.years, complete_years) if not ok))
    else:
        keep = complete_cities[d.city]
        log.warning("model '%s': balancing dropped cities %s", d.spec.name,
                    ", ".join(c for c, ok in zip(d.cities, complete_cities) if not ok))

    return d.select(keep)


def _demean(v: NDArray, groups: NDArray) -> NDArray:
    counts = np.bincount(groups)
    if v.ndim == 1:
        return v - (np.bincount(groups, weights=v) / counts)[groups]
    means = np.column_stack([np.bincount(groups, weights=v[:, k]) / counts for k in range(v.shape[1])])
    return v - means[groups]


def within_transform(v: NDArray, d: DesignMatrices, effects: str | None = None) -> NDArray:
    """Remove city means (and year means for two-way effects) from rows of ``v``."""
    effects = effects or d.spec.effects
    v = np.asarray(v, dtype=float)
    out = _demean(v, d.city)
    if effects == "city":
        return out

    # alternating projections; one pass suffices on a balanced panel
    for _ in range(WITHIN_MAX_PASSES):
        previous = out
        out = _demean(_demean(out, d.year), d.city)
        if np.max(np.abs(out - previous)) <= WITHIN_TOLERANCE * max(1.0, np.max(np.abs(v))):
            return out
    raise NonConvergence("two-way within transform did not converge")


def _solve(x: NDArray, y: NDArray, columns: tuple[str, ...]):
    try:
        return least_squares(x, y)
    except RankDeficient as e:
        column = getattr(e, "column", None)
        name = columns[column] if column is not None else "?"
        raise RankDeficientDesign(f"column '{name}' is collinear with earlier columns after the within "
                                  f"transform") from None


def _gaussian_loglik(rss: float, nobs: int) -> float:
    return -nobs / 2.0 * (math.log(2.0 * math.pi) + 1.0 + math.log(rss / nobs))


def fit_ols_fe(d: DesignMatrices) -> SpatialFit:
    y = within_transform(d.y, d)
    x = within_transform(d.x, d)
    coefficients, residuals, rss = _solve(x, y, d.columns)

    nobs = d.nobs
    sigma2 = rss / nobs
    tss = float(y @ y)
    r2 = 1.0 - rss / tss if tss > 0 else float("nan")

    cov = sigma2 * np.linalg.inv(x.T @ x)
    se = np.sqrt(np.diag(cov))
    return SpatialFit("OLS-FE", d.columns, coefficients, se, coefficients / se, float(sigma2),
                      _gaussian_loglik(rss, nobs), float(r2), nobs, len(d.cities), len(d.years),
                      label=d.spec.name, residuals=residuals)


class SpatialProblem:
    """Within-transformed arrays and concentrated likelihoods for one design and W."""

    def __init__(self, d: DesignMatrices, w: SpatialWeights):
        if not d.balanced:
            raise UnbalancedPanel(f"model '{d.spec.name}': spatial models need a balanced panel "
                                  f"({d.nobs} rows for {len(d.cities)} cities x {len(d.years)} years)")
        self.w = _align(w, d.cities)
        self.design = d
        self.n, self.t = len(d.cities), len(d.years)
        self.nobs = d.nobs

        self.y = within_transform(d.y, d)
        self.x = within_transform(d.x, d)
        self.wy = within_transform(self.lag(d.y), d)
        self.wx = within_transform(self.lag(d.x), d)

    def lag(self, v: NDArray) -> NDArray:
        """Apply W to every year's cross section of city-major rows."""
        grid = v.reshape((self.n, self.t) + v.shape[1:])
        return np.tensordot(self.w.weights, grid, axes=(1, 0)).reshape(v.shape)

    def interval(self) -> tuple[float, float]:
        lo, hi = self.w.interval()
        return lo + BOUNDARY_DELTA, hi - BOUNDARY_DELTA

    def jacobian(self, param: float) -> float:
        return self.t * self.w.log_det(param)

    def lag_residuals(self):
        b0, e0, _ = _solve(self.x, self.y, self.design.columns)
        b1, e1, _ = _solve(self.x, self.wy, self.design.columns)
        return b0, b1, e0, e1

    def slm_concentrated(self):
        _, _, e0, e1 = self.lag_residuals()
        a, b, c = e0 @ e0, e0 @ e1, e1 @ e1

        def loglik(rho: float) -> float:
            rss = a - 2.0 * rho * b + rho * rho * c
            return -self.nobs / 2.0 * math.log(rss / self.nobs) + self.jacobian(rho)
        return loglik

    def sem_coefficients(self, lam: float):
        y = self.y - lam * self.wy
        x = self.x - lam * self.wx
        return _solve(x, y, self.design.columns)

    def sem_concentrated(self):
        def loglik(lam: float) -> float:
            _, _, rss = self.sem_coefficients(lam)
            return -self.nobs / 2.0 * math.log(rss / self.nobs) + self.jacobian(lam)
        return loglik

    def slm_full(self, theta: NDArray) -> float:
        k = self.x.shape[1]
        beta, rho, sigma2 = theta[:k], theta[k], theta[k + 1]
        e = self.y - rho * self.wy - self.x @ beta
        return self._full(e, rho, sigma2)

    def sem_full(self, theta: NDArray) -> float:
        k = self.x.shape[1]
        beta, lam, sigma2 = theta[:k], theta[k], theta[k + 1]
        e = (self.y - lam * self.wy) - (self.x - lam * self.wx) @ beta
        return self._full(e, lam, sigma2)

    def _full(self, e: NDArray, param: float, sigma2: float) -> float:
        if sigma2 <= 0:
            return float("-inf")
        return (-self.nobs / 2.0 * math.log(2.0 * math.pi * sigma2) + self.jacobian(param)
                - float(e @ e) / (2.0 * sigma2))


def _align(w: SpatialWeights, cities: tuple[str, ...]) -> SpatialWeights:
    if w.cities == cities:
        return w
    missing = [c for c in cities if c not in w.cities]
    if missing:
        raise UnknownCity(f"cities missing from the weights: {', '.join(missing)}")
    log.info("restricting weights to the %d cities of the design", len(cities))
    return w.restrict(cities)


def concentrated_loglik(d: DesignMatrices, w: SpatialWeights, model: str):
    """Concentrated log-likelihood (without constants) of the slm or sem model as a function of its parameter."""
    problem = SpatialProblem(d, w)
    return problem.slm_concentrated() if model == "slm" else problem.sem_concentrated()


def _maximize(f, problem: SpatialProblem, name: str) -> float:
    lo, hi = problem.interval()
    estimate = maximize_1d(f, lo, hi, SEARCH_GRID, SEARCH_TOLERANCE)
    if estimate - lo < BOUNDARY_DELTA or hi - estimate < BOUNDARY_DELTA:
        raise BoundarySolution(f"{name} estimate {estimate:.6f} is on the edge of ({lo:.6f}, {hi:.6f})")
    if min(estimate - lo, hi - estimate) < BOUNDARY_WARNING:
        log.warning("%s estimate %.6f is close to the edge of (%.6f, %.6f)", name, estimate, lo, hi)
    return estimate


def _ml_fit(problem: SpatialProblem, model: str, param: float, beta: NDArray, rss: float,
            full, fitted: NDArray) -> SpatialFit:
    d = problem.design
    sigma2 = rss / problem.nobs
    if sigma2 <= 0.0:
        raise NonConvergence(f"{MODELS[model]}: residual variance is zero; the likelihood is unbounded")
    theta = np.concatenate([beta, [param, sigma2]])

    # sigma2 takes a relative step so it stays positive however small it is
    scale = np.append(np.maximum(np.abs(theta[:-1]), 1.0), sigma2)
    information = -hessian(full, theta, scale=scale)
    try:
        cov = np.linalg.inv(information)
    except np.linalg.LinAlgError:
        raise NonConvergence(f"{MODELS[model]}: information matrix is singular at the optimum") from None
    variances = np.diag(cov)
    if (variances <= 0).any():
        raise NonConvergence(f"{MODELS[model]}: information matrix is not positive definite at the optimum")
    se = np.sqrt(variances)

    k = beta.size
    loglik = full(theta)
    r2 = float(np.corrcoef(fitted, problem.y)[0, 1] ** 2)
    residuals = problem.y - fitted
    return SpatialFit(MODELS[model], d.columns, beta, se[:k], beta / se[:k], float(sigma2), float(loglik),
                      r2, problem.nobs, problem.n, problem.t, float(param), float(se[k]), float(param / se[k]),
                      label=d.spec.name, residuals=residuals)


def fit_slm_fe(d: DesignMatrices, w: SpatialWeights) -> SpatialFit:
    problem = SpatialProblem(d, w)
    b0, b1, e0, e1 = problem.lag_residuals()
    rho = _maximize(problem.slm_concentrated(), problem, "rho")

    beta = b0 - rho * b1
    e = e0 - rho * e1
    fitted = rho * problem.wy + problem.x @ beta
    log.debug("SLM-FE '%s': rho = %.6f", d.spec.name, rho)
    return _ml_fit(problem, "slm", rho, beta, float(e @ e), problem.slm_full, fitted)


def fit_sem_fe(d: DesignMatrices, w: SpatialWeights) -> SpatialFit:
    problem = SpatialProblem(d, w)
    lam = _maximize(problem.sem_concentrated(), problem, "lambda")

    beta, _, rss = problem.sem_coefficients(lam)
    fitted = problem.x @ beta
    log.debug("SEM-FE '%s': lambda = %.6f", d.spec.name, lam)
    return _ml_fit(problem, "sem", lam, beta, rss, problem.sem_full, fitted)


def fit_model(d: DesignMatrices, model: str, w: SpatialWeights | None = None) -> SpatialFit:
    if model == "ols":
        return fit_ols_fe(d)
    if w is None:
        raise DataError(f"model '{model}' needs spatial weights")
    if model == "slm":
        return fit_slm_fe(d, w)
    if model == "sem":
        return fit_sem_fe(d, w)
    raise DataError(f"unknown model '{model}' (expected ols, slm or sem)")


def _lm(statistic: float) -> LmTest:
    statistic = max(float(statistic), 0.0)
    return LmTest(statistic, float(stats.chi2.sf(statistic, 1)))


def lm_tests(ols: SpatialFit, d: DesignMatrices, w: SpatialWeights) -> LmDiagnostics:
    """Pooled Lagrange multiplier tests for a spatial lag or error on within-OLS residuals.

    The trace term is scaled by T - 1, the periods left after removing city means.
    """
    problem = SpatialProblem(d, w)
    e = ols.residuals
    if e is None or e.shape != problem.y.shape:
        raise DataError("LM tests need the residuals of a within OLS fit on the same design")

    sigma2 = float(e @ e) / problem.nobs
    we = problem.lag(e)
    weights = problem.w.weights
    trace = float(np.trace(weights.T @ weights + weights @ weights)) * max(problem.t - 1, 1)

    r_err = float(e @ we) / sigma2
    r_lag = float(e @ problem.wy) / sigma2

    wxb = within_transform(problem.lag(d.x @ ols.coefficients), d)
    _, _, rss_wxb = least_squares(problem.x, wxb)
    nj = (rss_wxb + trace * sigma2) / sigma2

    def ratio(num, den):
        return num / den if den > 0 else 0.0

    return LmDiagnostics(
        lm_lag=_lm(ratio(r_lag ** 2, nj)),
        lm_error=_lm(ratio(r_err ** 2, trace)),
        robust_lm_lag=_lm(ratio((r_lag - r_err) ** 2, nj - trace)),
        robust_lm_error=_lm(ratio((r_err - trace / nj * r_lag) ** 2, trace - trace ** 2 / nj)),
    )


def stars(t: float) -> str:
    for threshold, mark in STAR_LEVELS:
        if abs(t) >= threshold:
            return mark
    return ""


def format_cell(value: float, t: float) -> str:
    """``0.020*** (3.05)``: coefficient to 3 decimals, stars, t-statistic in parentheses."""
    return f"{value:.3f}{stars(t)} ({t:.2f})"


@dataclass(frozen=True)
class RegressionTable:
    text: str
    data: dict


def _fit_record(fit: SpatialFit) -> dict:
    record = {"name": fit.label or fit.model, "model": fit.model}
    if fit.spatial_param is not None:
        record["spatial_param"] = {"name": fit.spatial_name, "value": fit.spatial_param,
                                   "se": fit.spatial_se, "t": fit.spatial_t}
    record["coefficients"] = [
        {"name": name, "value": float(v), "se": float(s), "t": float(t), "stars": stars(t)}
        for name, v, s, t in zip(fit.columns, fit.coefficients, fit.std_errors, fit.t_stats)
    ]
    record.update(sigma2=fit.sigma2, loglik=fit.loglik, r2=fit.r2, r2_kind=fit.r2_kind, nobs=fit.nobs)
    return record


def summarize(fits: list[SpatialFit], spec: ModelSpec) -> RegressionTable:
    """Column-per-model regression table as aligned text and JSON-ready data."""
    if not fits:
        raise DataError("nothing to summarize")
    base = [c for c in fits[0].columns if c != spec.squared_name]
    for fit in fits[1:]:
        if [c for c in fit.columns if c != spec.squared_name] != base:
            raise DataError("fits in one table must share regressors up to the squared focal term")

    rows = list(spec.columns) if spec.quadratic else list(fits[0].columns)
    if any(spec.squared_name in fit.columns for fit in fits) and spec.squared_name not in rows:
        rows.insert(1, spec.squared_name)

    spatial_names = []
    for fit in fits:
        if fit.spatial_name and fit.spatial_name not in spatial_names:
            spatial_names.append(fit.spatial_name)

    header = [""] + [f"({i}) {fit.model}" for i, fit in enumerate(fits, start=1)]
    body = []
    for name in rows + spatial_names:
        cells = [name]
        for fit in fits:
            if name in fit.columns:
                j = fit.columns.index(name)
                cells.append(format_cell(fit.coefficients[j], fit.t_stats[j]))
            elif name == fit.spatial_name:
                cells.append(format_cell(fit.spatial_param, fit.spatial_t))
            else:
                cells.append("")
        body.append(cells)

    body.append(["Observations"] + [str(fit.nobs) for fit in fits])
    body.append(["R-squared"] + [f"{fit.r2:.3f}" for fit in fits])
    body.append(["Log-likelihood"] + [f"{fit.loglik:.3f}" for fit in fits])

    table = [header] + body
    widths = [max(len(row[k]) for row in table) for k in range(len(header))]
    lines = ["  ".join(cell.ljust(widths[0]) if k == 0 else cell.rjust(widths[k])
                       for k, cell in enumerate(row)).rstrip() for row in table]
    rule = "-" * len(max(lines, key=len))
    lines.insert(1, rule)
    lines.insert(len(lines) - 3, rule)
    lines.append(rule)
    lines.append(f"Dependent variable: {spec.dependent}. t-statistics in parentheses.")
    lines.append("*** p<0.01, ** p<0.05, * p<0.1. Spatial models report the squared correlation of "
                 "fitted and observed values as R-squared.")

    data = {"spec": spec.name, "dependent": spec.dependent, "effects": spec.effects,
            "models": [_fit_record(fit) for fit in fits]}
    return RegressionTable("\n".join(lines) + "\n", data)
