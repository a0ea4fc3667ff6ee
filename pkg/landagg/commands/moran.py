import logging

import numpy as np

from landagg.commands.base import Command
from landagg.config_handler import RunConfig
from landagg.errors import MissingValues
from landagg.spatial import global_moran, local_moran, moran_report

log = logging.getLogger(__name__)


class MoranCommand(Command):
    name = "moran"

    def __init__(self, config: RunConfig, args) -> None:
        super().__init__(config, args)
        self._variable = getattr(args, "variable", None) or "score"
        self._year = getattr(args, "year", None)


    def arguments(self) -> dict:
        return {"variable": self._variable, "year": self._year}


    def execute(self) -> None:
        seed = self._config.require_seed()
        ds = self.derived_panel()
        year = self._year if self._year is not None else ds.years[-1]

        x = ds.series(self._variable)[:, ds.year_index(year)]
        if np.isnan(x).any():
            raise MissingValues(f"'{self._variable}' has missing values in {year}")

        w = self.weights(ds.cities)
        permutations, workers = self._config.permutations, self._config.workers
        global_result = global_moran(x, w, permutations, seed, workers)
        local_result = local_moran(x, w, permutations, seed, workers)

        log.info("Moran's I of %s in %s: %.4f", self._variable, year, global_result.statistic)
        self.write_json("moran.json", moran_report(global_result, local_result, w,
                                                   variable=self._variable, year=int(year)))
