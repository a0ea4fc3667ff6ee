import hashlib
import json
import logging
from os import makedirs, path

import numpy as np

from landagg.config_handler import RunConfig, write_resolved
from landagg.errors import InvalidConfig, UnknownReference
from landagg.indices import coagglomeration, location_quotient, rdi
from landagg.intensity import entropy_weights, normalize, score, vh_weights
from landagg.panel import PanelDataset, extract_employment, interpolate_missing, load_panel, region_means, write_wide
from landagg.spatial import SpatialWeights, adjacency_cities, build_weights, load_adjacency

log = logging.getLogger(__name__)


class Command():
    """One pipeline step writing into its own run directory.

    Subclasses set ``name`` and implement ``execute``; ``arguments`` lists the
    command-line values that, with the resolved config, identify the run.
    """
    name = ""

    def __init__(self, config: RunConfig, args) -> None:
        self._config = config
        self._args = args
        self._run_dir = None
        self._panel = None


    def arguments(self) -> dict:
        return {}


    def run_stamp(self) -> str:
        payload = json.dumps({"command": self.name, "config": self._config.to_dict(), "args": self.arguments()},
                             sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


    def run(self) -> str:
        self._run_dir = path.join(self._config.output, f"{self.name}-{self.run_stamp()}")
        makedirs(self._run_dir, exist_ok=True)
        write_resolved(self._config, self._run_dir)

        log.info("%s: writing to %s", self.name, self._run_dir)
        self.execute()
        return self._run_dir


    def execute(self) -> None:
        raise NotImplementedError


    def output_path(self, filename: str) -> str:
        return path.join(self._run_dir, filename)


    def write_json(self, filename: str, data: dict) -> str:
        target = self.output_path(filename)
        with open(target, "w", encoding="utf-8") as file:
            json.dump(data, file, indent=2, sort_keys=False, allow_nan=False)
            file.write("\n")
        return target


    def write_text(self, filename: str, text: str) -> str:
        target = self.output_path(filename)
        with open(target, "w", encoding="utf-8", newline="\n") as file:
            file.write(text)
        return target


    def panel(self) -> PanelDataset:
        if self._panel is None:
            ds = load_panel(self._config.require("panel"), self._config.panel_schema)
            self._panel = interpolate_missing(ds)
        return self._panel


    def check_variables(self, ds: PanelDataset, names, section: str) -> None:
        for name in names:
            if name not in ds.variables:
                raise UnknownReference(f"{section}: '{name}' is not a variable of {self._config.panel}")


    def index_tables(self, ds: PanelDataset):
        """Per-year employment tables and their manufacturing/services/other aggregates."""
        config = self._config
        if not config.manufacturing:
            raise InvalidConfig(f"{config.config_path}: sectors.manufacturing is required")
        self.check_variables(ds, config.sectors, "sectors")

        groups = {"manufacturing": list(config.manufacturing), "services": list(config.services)}
        if config.other:
            groups["other"] = list(config.other)

        for year in ds.years:
            table = extract_employment(ds, year, list(config.sectors))
            yield table, table.aggregate(groups)


    def index_series(self, ds: PanelDataset) -> list:
        series = []
        for table, grouped in self.index_tables(ds):
            lq_m = location_quotient(grouped, "manufacturing")
            lq_s = location_quotient(grouped, "services")
            series.append(_relabel(lq_m, "LQ_manufacturing"))
            series.append(_relabel(lq_s, "LQ_services"))
            for sector in self._config.services:
                series.append(location_quotient(table, sector))
            series.append(rdi(table, list(self._config.services)))
            series.append(coagglomeration(lq_m, lq_s, self._config.cogg))
        return series


    def intensity_weights(self, ds: PanelDataset, method: str | None = None):
        config = self._config
        if not config.indicators:
            raise InvalidConfig(f"{config.config_path}: no indicators configured")
        self.check_variables(ds, [spec.name for spec in config.indicators], "indicators")

        normalized = normalize(ds, list(config.indicators))
        method = method or config.intensity_method
        if method == "entropy":
            weights = entropy_weights(normalized)
        else:
            weights = vh_weights(normalized, config.weight_mode)
        return normalized, weights


    def derived_panel(self) -> PanelDataset:
        """Panel plus the index series (by label) and, with indicators configured, ``score``."""
        ds = self.panel()
        if self._config.manufacturing:
            ds = with_series(ds, self.index_series(ds))

        if self._config.indicators:
            normalized, weights = self.intensity_weights(ds)
            ds = ds.with_variable("score", score(normalized, weights).values)
        return ds


    def write_regions(self, ds: PanelDataset, variables) -> str | None:
        """Region means of ``variables`` as regions.csv (wide schema); skipped without configured regions."""
        regions = self._config.regions
        if not regions:
            return None
        for name, members in regions.items():
            unknown = [city for city in members if city not in ds.cities]
            if unknown:
                raise UnknownReference(f"regions.{name}: '{unknown[0]}' is not a city of {self._config.panel}")

        target = self.output_path("regions.csv")
        write_wide(region_means(ds.subset(variables=list(variables)), regions), target)
        log.info("%d region means written to %s", len(regions), target)
        return target


    def weights(self, cities) -> SpatialWeights:
        edges = load_adjacency(self._config.require("adjacency"))
        w = build_weights(edges, adjacency_cities(edges), self._config.standardize)
        if w.cities != tuple(cities):
            w = w.restrict(cities)
        return w


def with_series(ds: PanelDataset, series) -> PanelDataset:
    """Add one city x year variable per series label, years in panel order."""
    columns = {}
    for s in series:
        columns.setdefault(s.label, []).append(s.values)
    for label, values in columns.items():
        ds = ds.with_variable(label, np.column_stack(values))
    return ds


def _relabel(series, label: str):
    return type(series)(series.cities, series.year, series.values, series.kind, label)
