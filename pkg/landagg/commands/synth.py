import json
import logging
import shutil
from os import makedirs, path

from landagg.commands.base import Command
from landagg.config_handler import RunConfig
from landagg.errors import InvalidConfig, InvalidParameter, MissingInput
from landagg.panel import write_panel
from landagg.spatial import adjacency_cities, build_weights, load_adjacency
from landagg.synth import (DemoParams, DensityParams, SemDgpParams, SlmDgpParams, gen_demo_panel,
                           gen_density_panel, gen_sem_panel, gen_slm_panel)

log = logging.getLogger(__name__)

GENERATORS = ("density", "slm", "sem", "demo")


class SynthCommand(Command):
    name = "synth"

    def __init__(self, config: RunConfig, args) -> None:
        super().__init__(config, args)
        self._generator = getattr(args, "generator", None) or "demo"
        params = getattr(args, "params", None) or config.synth_params
        self._params_file = path.abspath(params) if params else None
        out = getattr(args, "out", None)
        self._out = path.abspath(out) if out else None


    def arguments(self) -> dict:
        return {"generator": self._generator, "params": self._load_params()}


    def _load_params(self) -> dict:
        if self._params_file is None:
            return {}
        try:
            with open(self._params_file, "r", encoding="utf-8") as file:
                data = json.load(file)
        except OSError as e:
            raise MissingInput(f"cannot read parameters {self._params_file}: {e.strerror}") from None
        except json.JSONDecodeError as e:
            raise InvalidConfig(f"{self._params_file}: invalid JSON: {e}") from None

        if not isinstance(data, dict) or not isinstance(data.get(self._generator, {}), dict):
            raise InvalidParameter(f"{self._params_file}: '{self._generator}' must be an object of parameters")
        return data.get(self._generator, {})


    def _weights(self):
        edges = load_adjacency(self._config.require("adjacency"))
        return build_weights(edges, adjacency_cities(edges), self._config.standardize)


    def execute(self) -> None:
        if self._generator not in GENERATORS:
            raise InvalidConfig(f"unknown generator '{self._generator}' (expected {', '.join(GENERATORS)})")

        params = dict(self._load_params())
        if self._generator == "density":
            ds = gen_density_panel(DensityParams.from_dict(params), self._config.require_seed())
        elif self._generator == "demo":
            ds = gen_demo_panel(DemoParams.from_dict(params), self._weights(), self._config.require_seed())
        else:
            if "seed" not in params:
                params["seed"] = self._config.require_seed()
            if self._generator == "slm":
                ds = gen_slm_panel(SlmDgpParams.from_dict(params), self._weights())
            else:
                ds = gen_sem_panel(SemDgpParams.from_dict(params), self._weights())

        target = self.output_path("panel.csv")
        write_panel(ds, target)
        if self._out:
            makedirs(path.dirname(self._out) or ".", exist_ok=True)
            shutil.copyfile(target, self._out)
            log.info("panel copied to %s", self._out)
