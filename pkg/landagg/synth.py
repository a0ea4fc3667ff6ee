"""Synthetic panels: production-density inputs, spatial lag and spatial error DGPs, and the demo fixture.

Every generator is a pure function of its parameters and seed. Draw order is
fixed (regressors, then fixed effects, then disturbances) so a panel is
reproducible from the seed alone.
"""

import logging
from dataclasses import dataclass, field, fields

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import solve

from landagg.errors import EmptyWeights, InvalidParameter, SingularReducedForm
from landagg.indices import location_quotient
from landagg.panel import EmploymentTable, PanelDataset
from landagg.spatial import SpatialWeights

log = logging.getLogger(__name__)

SERVICE_SECTORS = ("emp_transport", "emp_it", "emp_finance", "emp_leasing", "emp_research")
DEMO_CONTROLS = ("GDP", "ABUND", "TEC", "EDUC", "URBAN", "STR")


def _from_dict(cls, data: dict | None):
    data = dict(data or {})
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise InvalidParameter(f"{cls.__name__}: unknown parameters {', '.join(unknown)}")
    for key in ("beta",):
        if key in data:
            data[key] = tuple(float(b) for b in data[key])
    return cls(**data)


def _city_names(n: int) -> tuple[str, ...]:
    return tuple(f"C{i + 1:02d}" for i in range(n))


@dataclass(frozen=True)
class DensityParams:
    omega: float = 1.0
    beta1: float = 0.6
    beta2: float = 0.3
    sigma: float = 0.1
    n_cities: int = 30
    n_years: int = 16
    first_year: int = 2003
    labor_mean: float = 0.0
    labor_sd: float = 0.5
    capital_mean: float = 0.0
    capital_sd: float = 0.5

    def __post_init__(self):
        if not self.omega > 0:
            raise InvalidParameter(f"omega must be positive, got {self.omega}")
        if self.sigma < 0 or self.labor_sd < 0 or self.capital_sd < 0:
            raise InvalidParameter("dispersion parameters must be nonnegative")
        if self.n_cities < 1 or self.n_years < 1:
            raise InvalidParameter("a density panel needs at least one city and one year")

    @classmethod
    def from_dict(cls, data: dict | None) -> "DensityParams":
        return _from_dict(cls, data)


@dataclass(frozen=True)
class SlmDgpParams:
    rho: float = 0.4
    beta: tuple[float, ...] = (1.0, -0.5)
    fe_sd: float = 1.0
    sigma: float = 0.2
    seed: int = 0
    n_years: int = 16
    first_year: int = 2003

    def __post_init__(self):
        _check_common(self.beta, self.fe_sd, self.sigma, self.n_years)

    @classmethod
    def from_dict(cls, data: dict | None) -> "SlmDgpParams":
        return _from_dict(cls, data)


@dataclass(frozen=True)
class SemDgpParams:
    lam: float = 0.5
    beta: tuple[float, ...] = (1.0, -0.5)
    fe_sd: float = 1.0
    sigma: float = 0.2
    seed: int = 0
    n_years: int = 16
    first_year: int = 2003

    def __post_init__(self):
        _check_common(self.beta, self.fe_sd, self.sigma, self.n_years)

    @classmethod
    def from_dict(cls, data: dict | None) -> "SemDgpParams":
        return _from_dict(cls, data)


@dataclass(frozen=True)
class DemoParams:
    n_years: int = 16
    first_year: int = 2003
    rho: float = 0.4
    beta: tuple[float, ...] = (0.02, 0.0001, -0.1, -0.001, 0.002, 0.106, 0.078)
    sigma: float = 0.05
    fe_sd: float = 0.1
    density: DensityParams = field(default_factory=lambda: DensityParams(omega=2.0, beta1=0.6, beta2=0.3,
                                                                          sigma=0.05))

    def __post_init__(self):
        _check_common(self.beta, self.fe_sd, self.sigma, self.n_years)
        if len(self.beta) != 1 + len(DEMO_CONTROLS):
            raise InvalidParameter(f"demo beta needs {1 + len(DEMO_CONTROLS)} coefficients "
                                   f"(LQ_manufacturing then {', '.join(DEMO_CONTROLS)})")
        if isinstance(self.density, dict):
            object.__setattr__(self, "density", DensityParams.from_dict(self.density))

    @classmethod
    def from_dict(cls, data: dict | None) -> "DemoParams":
        return _from_dict(cls, data)


def _check_common(beta, fe_sd: float, sigma: float, n_years: int):
    if not beta:
        raise InvalidParameter("beta needs at least one coefficient")
    if fe_sd < 0 or sigma < 0:
        raise InvalidParameter("fe_sd and sigma must be nonnegative")
    if n_years < 1:
        raise InvalidParameter("n_years must be at least 1")


def output_density(omega: float, beta1: float, beta2: float, labor_density, capital_density):
    """Land output density p = omega (N/L)^beta1 (K/L)^beta2."""
    return omega * np.power(labor_density, beta1) * np.power(capital_density, beta2)


def gen_density_panel(p: DensityParams, seed: int) -> PanelDataset:
    rng = np.random.default_rng(seed)
    shape = (p.n_cities, p.n_years)
    labor = rng.lognormal(p.labor_mean, p.labor_sd, shape)
    capital = rng.lognormal(p.capital_mean, p.capital_sd, shape)
    noise = np.exp(p.sigma * rng.standard_normal(shape))
    density = output_density(p.omega, p.beta1, p.beta2, labor, capital) * noise

    years = tuple(range(p.first_year, p.first_year + p.n_years))
    return PanelDataset(_city_names(p.n_cities), years, ("density", "labor_density", "capital_density"),
                        np.stack([density, labor, capital], axis=2))


def _reduced_form(w: SpatialWeights, param: float, rhs: NDArray, name: str) -> NDArray:
    """Solve (I - param W) y = rhs for every column of rhs."""
    if np.any(np.abs(1.0 - param * w.spectrum) <= 1e-12):
        raise SingularReducedForm(f"I - {name} W is singular at {name} = {param}")
    try:
        lo, hi = w.interval()
        if not lo < param < hi:
            raise InvalidParameter(f"{name} = {param} is outside the admissible interval ({lo:.4f}, {hi:.4f})")
    except EmptyWeights:
        pass
    return solve(np.identity(w.n) - param * w.weights, rhs)


def slm_reduced_form(w: SpatialWeights, rho: float, rhs: NDArray) -> NDArray:
    return _reduced_form(w, rho, rhs, "rho")


def sem_disturbance(w: SpatialWeights, lam: float, v: NDArray) -> NDArray:
    """u = (I - lam W)^-1 v, per column of v."""
    return _reduced_form(w, lam, v, "lambda")


def _regressors(x: NDArray | None, n: int, t: int, k: int, rng: np.random.Generator) -> NDArray:
    if x is None:
        return rng.standard_normal((n, t, k))
    x = np.asarray(x, dtype=float)
    if x.shape != (n, t, k):
        raise InvalidParameter(f"regressors have shape {x.shape}, expected {(n, t, k)}")
    return x


def _spatial_panel(w: SpatialWeights, x: NDArray, y: NDArray, first_year: int) -> PanelDataset:
    n, t, k = x.shape
    names = ("y",) + tuple(f"x{j + 1}" for j in range(k))
    years = tuple(range(first_year, first_year + t))
    return PanelDataset(w.cities, years, names, np.concatenate([y[:, :, None], x], axis=2))


def gen_slm_panel(p: SlmDgpParams, w: SpatialWeights, x: NDArray | None = None) -> PanelDataset:
    """y_t = (I - rho W)^-1 (X_t beta + mu + eps_t); variables ``y, x1..xK``."""
    rng = np.random.default_rng(p.seed)
    beta = np.asarray(p.beta)
    x = _regressors(x, w.n, p.n_years, beta.size, rng)
    mu = p.fe_sd * rng.standard_normal(w.n)
    eps = p.sigma * rng.standard_normal((w.n, p.n_years))

    y = slm_reduced_form(w, p.rho, x @ beta + mu[:, None] + eps)
    return _spatial_panel(w, x, y, p.first_year)


def gen_sem_panel(p: SemDgpParams, w: SpatialWeights, x: NDArray | None = None) -> PanelDataset:
    """y_t = X_t beta + mu + u_t with u_t = (I - lam W)^-1 v_t."""
    rng = np.random.default_rng(p.seed)
    beta = np.asarray(p.beta)
    x = _regressors(x, w.n, p.n_years, beta.size, rng)
    mu = p.fe_sd * rng.standard_normal(w.n)
    v = p.sigma * rng.standard_normal((w.n, p.n_years))

    y = x @ beta + mu[:, None] + sem_disturbance(w, p.lam, v)
    return _spatial_panel(w, x, y, p.first_year)


def _demo_employment(rng: np.random.Generator, n: int, t: int) -> dict[str, NDArray]:
    size = rng.lognormal(np.log(400_000), 0.6, n)
    growth = 1.0 + rng.uniform(0.0, 0.03, n)
    total = size[:, None] * growth[:, None] ** np.arange(t)

    mfg_base = rng.uniform(0.15, 0.45, n)
    mfg_trend = rng.uniform(-0.008, 0.004, n)
    mfg = np.clip(mfg_base[:, None] + mfg_trend[:, None] * np.arange(t)
                  + rng.normal(0.0, 0.01, (n, t)), 0.05, 0.7)

    # services take 15-35% of employment, split by a per-city mix with small yearly noise
    service_total = rng.uniform(0.15, 0.35, n)[:, None] + rng.normal(0.0, 0.01, (n, t))
    mix = rng.dirichlet(np.full(len(SERVICE_SECTORS), 4.0), n)
    jitter = rng.lognormal(0.0, 0.05, (n, t, len(SERVICE_SECTORS)))
    shares = mix[:, None, :] * jitter
    shares = shares / shares.sum(axis=2, keepdims=True) * service_total[:, :, None]

    employment = {"emp_mfg": total * mfg}
    for j, sector in enumerate(SERVICE_SECTORS):
        employment[sector] = total * shares[:, :, j]
    employment["emp_other"] = total * np.maximum(1.0 - mfg - service_total, 0.02)
    return {sector: np.round(values) for sector, values in employment.items()}


def gen_demo_panel(p: DemoParams, w: SpatialWeights, seed: int) -> PanelDataset:
    """Demo city panel over the cities of ``w``.

    Employment covers manufacturing, five producer-service sectors and the
    rest of the economy. Land-use indicators come from the output-density
    model. The dependent ``y`` follows a spatial lag process driven by the
    manufacturing location quotient and the six controls.
    """
    rng = np.random.default_rng(seed)
    n, t = w.n, p.n_years
    years = tuple(range(p.first_year, p.first_year + t))
    steps = np.arange(t)

    employment = _demo_employment(rng, n, t)
    sectors = tuple(employment)
    lq = np.zeros((n, t))
    for k, year in enumerate(years):
        table = EmploymentTable(year, w.cities, sectors,
                                np.column_stack([employment[s][:, k] for s in sectors]))
        lq[:, k] = location_quotient(table, "emp_mfg").values

    area = rng.uniform(800.0, 8000.0, n)
    total = sum(employment.values())
    labor = total / area[:, None] / 100.0
    capital = rng.lognormal(0.0, 0.4, n)[:, None] * (1.0 + rng.uniform(0.03, 0.09, n)[:, None]) ** steps
    d = p.density
    density = output_density(d.omega, d.beta1, d.beta2, labor, capital) \
        * np.exp(d.sigma * rng.standard_normal((n, t)))
    land_per_capita = area[:, None] * 1000.0 / total
    green = np.clip(rng.uniform(0.3, 0.42, n)[:, None] + 0.004 * steps
                    + rng.normal(0.0, 0.01, (n, t)), 0.0, 1.0)

    controls = {
        "GDP": rng.lognormal(np.log(8000.0), 0.3, n)[:, None] * (1.0 + rng.uniform(0.05, 0.1, n)[:, None]) ** steps,
        "ABUND": rng.uniform(0.0, 0.5, (n, t)),
        "TEC": rng.uniform(0.0, 20.0, n)[:, None] + rng.normal(0.0, 2.0, (n, t)),
        "EDUC": rng.normal(10.0, 1.0, (n, t)),
        "URBAN": np.clip(rng.uniform(0.4, 0.8, n)[:, None] + rng.uniform(0.002, 0.008, n)[:, None] * steps,
                         0.0, 0.95),
        "STR": np.clip(rng.normal(1.0, 0.3, (n, t)), 0.2, None),
    }

    x = np.stack([lq] + [controls[name] for name in DEMO_CONTROLS], axis=2)
    mu = p.fe_sd * rng.standard_normal(n)
    eps = p.sigma * rng.standard_normal((n, t))
    y = slm_reduced_form(w, p.rho, x @ np.asarray(p.beta) + mu[:, None] + eps)

    variables = dict(employment)
    variables.update(density=density, labor_density=labor, capital_density=capital,
                     land_per_capita=land_per_capita, green_coverage=green)
    variables.update(controls)
    variables["y"] = y

    log.debug("demo panel: %d cities, %d years, %d variables", n, t, len(variables))
    return PanelDataset(w.cities, years, tuple(variables), np.stack(list(variables.values()), axis=2))
