import json
import logging
from dataclasses import dataclass, field
from os import path

import yaml

from landagg.errors import DataError, InvalidConfig, MissingInput
from landagg.econometrics import ModelSpec
from landagg.indices import CoggFormula
from landagg.intensity import DIMENSIONS, ORIENTATIONS, WEIGHT_MODES, IndicatorSpec
from landagg.spatial import DEFAULT_PERMUTATIONS

log = logging.getLogger(__name__)

SECTIONS = ("inputs", "sectors", "regions", "indicators", "cogg", "intensity", "models", "moran", "seed",
            "output", "synth")
PANEL_SCHEMAS = ("long", "wide")
INTENSITY_METHODS = ("vh", "entropy")
DEFAULT_SERVICES = ("emp_transport", "emp_it", "emp_finance", "emp_leasing", "emp_research")


@dataclass(frozen=True)
class RunConfig:
    config_path: str
    panel: str | None = None
    panel_schema: str = "long"
    adjacency: str | None = None
    standardize: bool = True
    manufacturing: tuple[str, ...] = ()
    services: tuple[str, ...] = DEFAULT_SERVICES
    other: tuple[str, ...] = ()
    regions: dict[str, tuple[str, ...]] = field(default_factory=dict)
    indicators: tuple[IndicatorSpec, ...] = ()
    cogg: str = CoggFormula.BALANCE_PLUS_HEIGHT.value
    intensity_method: str = "vh"
    weight_mode: str = "unit-norm"
    models: dict[str, ModelSpec] = field(default_factory=dict)
    balance: bool = True
    permutations: int = DEFAULT_PERMUTATIONS
    workers: int = 1
    seed: int | None = None
    output: str = "out"
    synth_params: str | None = None

    @property
    def sectors(self) -> tuple[str, ...]:
        return self.manufacturing + self.services + self.other

    def require(self, name: str) -> str:
        """Path of a configured input file, which must exist."""
        value = getattr(self, name)
        if not value:
            raise MissingInput(f"{self.config_path}: this command needs inputs.{name}")
        if not path.isfile(value):
            raise MissingInput(f"{self.config_path}: inputs.{name} does not exist: {value}")
        return value

    def require_seed(self) -> int:
        if self.seed is None:
            raise InvalidConfig(f"{self.config_path}: a seed is required for this command")
        return self.seed

    def to_dict(self) -> dict:
        """Resolved configuration: absolute paths and every default filled in."""
        return {
            "inputs": {"panel": self.panel, "panel_schema": self.panel_schema,
                       "adjacency": self.adjacency, "standardize": self.standardize},
            "sectors": {"manufacturing": list(self.manufacturing), "services": list(self.services),
                        "other": list(self.other)},
            "regions": {name: list(members) for name, members in self.regions.items()},
            "indicators": [{"name": s.name, "orientation": s.orientation, "dimension": s.dimension}
                           for s in self.indicators],
            "cogg": self.cogg,
            "intensity": {"method": self.intensity_method, "weights": self.weight_mode},
            "models": {"balance": self.balance,
                       "specs": {name: {"dependent": m.dependent, "focal": m.focal, "quadratic": m.quadratic,
                                        "controls": list(m.controls), "effects": m.effects}
                                 for name, m in self.models.items()}},
            "moran": {"permutations": self.permutations, "workers": self.workers},
            "seed": self.seed,
            "output": self.output,
            "synth": {"params": self.synth_params},
        }


def _is_names(value) -> bool:
    return isinstance(value, list) and all(isinstance(v, str) and v for v in value)


class ConfigHandler():
    def __init__(self, config_path: str) -> None:
        self._config_file = path.abspath(path.expanduser(config_path))
        self._base_dir = path.dirname(self._config_file)


    def _get_file_contents(self) -> dict:
        try:
            with open(self._config_file, "r", encoding="utf-8") as file:
                if self._config_file.endswith((".yml", ".yaml")):
                    return yaml.safe_load(file) or {}
                return json.load(file)
        except OSError as e:
            raise MissingInput(f"cannot read config {self._config_file}: {e.strerror}") from None
        except json.JSONDecodeError as e:
            raise InvalidConfig(f"{self._config_file}: invalid JSON: {e}") from None
        except yaml.YAMLError as e:
            raise InvalidConfig(f"{self._config_file}: invalid YAML: {e}") from None


    def _resolve(self, value: str | None) -> str | None:
        if not value:
            return None
        return path.normpath(path.join(self._base_dir, path.expanduser(value)))


    def validate(self, data: dict) -> tuple[bool, str]:
        """Check the structure of a configuration document.

        Returns:
            Tuple of (is_valid, error_message)
        """
        if not isinstance(data, dict):
            return False, "configuration must be an object"

        unknown = [key for key in data if key not in SECTIONS]
        if unknown:
            return False, f"unknown section '{unknown[0]}'"

        inputs = data.get("inputs", {})
        if not isinstance(inputs, dict):
            return False, "inputs must be an object"
        for key in ("panel", "adjacency"):
            if inputs.get(key) is not None and not isinstance(inputs[key], str):
                return False, f"inputs.{key} must be a path"
        if inputs.get("panel_schema", "long") not in PANEL_SCHEMAS:
            return False, f"inputs.panel_schema must be one of {', '.join(PANEL_SCHEMAS)}"

        sectors = data.get("sectors", {})
        if not isinstance(sectors, dict):
            return False, "sectors must be an object"
        for key in ("manufacturing", "services"):
            if key in sectors and not (_is_names(sectors[key]) and sectors[key]):
                return False, f"sectors.{key} must be a non-empty list of variable names"
        if "other" in sectors and not _is_names(sectors["other"]):
            return False, "sectors.other must be a list of variable names"

        regions = data.get("regions", {})
        if not isinstance(regions, dict):
            return False, "regions must be an object of region name to city list"
        for name, members in regions.items():
            if not (_is_names(members) and members):
                return False, f"region '{name}' must be a non-empty list of city names"

        groups = [set(sectors.get(key, [])) for key in ("manufacturing", "services", "other")]
        for a in range(3):
            for b in range(a + 1, 3):
                shared = groups[a] & groups[b]
                if shared:
                    return False, f"sector '{sorted(shared)[0]}' appears in more than one sector set"

        indicators = data.get("indicators", [])
        if not isinstance(indicators, list):
            return False, "indicators must be a list"
        names = []
        for item in indicators:
            if not isinstance(item, dict) or not isinstance(item.get("name"), str):
                return False, "every indicator needs a name"
            if item.get("orientation", "positive") not in ORIENTATIONS:
                return False, f"indicator '{item['name']}': orientation must be positive or negative"
            if item.get("dimension", DIMENSIONS[0]) not in DIMENSIONS:
                return False, f"indicator '{item['name']}': unknown dimension '{item['dimension']}'"
            names.append(item["name"])
        if len(set(names)) != len(names):
            return False, "indicator names must be unique"
        overlap = set(names) & set().union(*groups)
        if overlap:
            return False, f"'{sorted(overlap)[0]}' is both a sector and an indicator"

        if data.get("cogg", CoggFormula.BALANCE_PLUS_HEIGHT.value) not in [f.value for f in CoggFormula]:
            return False, f"unknown cogg formula '{data['cogg']}'"

        intensity = data.get("intensity", {})
        if not isinstance(intensity, dict):
            return False, "intensity must be an object"
        if intensity.get("method", "vh") not in INTENSITY_METHODS:
            return False, f"intensity.method must be one of {', '.join(INTENSITY_METHODS)}"
        if intensity.get("weights", "unit-norm") not in WEIGHT_MODES:
            return False, f"intensity.weights must be one of {', '.join(WEIGHT_MODES)}"

        models = data.get("models", {})
        if not isinstance(models, dict) or not isinstance(models.get("specs", {}), dict):
            return False, "models.specs must be an object of named model specs"
        for name, spec in models.get("specs", {}).items():
            if not isinstance(spec, dict) or "dependent" not in spec or "focal" not in spec:
                return False, f"model '{name}' needs a dependent and a focal variable"

        moran = data.get("moran", {})
        if not isinstance(moran, dict):
            return False, "moran must be an object"
        permutations = moran.get("permutations", DEFAULT_PERMUTATIONS)
        if not isinstance(permutations, int) or isinstance(permutations, bool) or permutations < 0:
            return False, "moran.permutations must be a nonnegative integer"
        workers = moran.get("workers", 1)
        if not isinstance(workers, int) or isinstance(workers, bool) or workers < 1:
            return False, "moran.workers must be a positive integer"

        seed = data.get("seed")
        if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool) or seed < 0):
            return False, "seed must be a nonnegative integer"

        if not isinstance(data.get("output", "out"), str):
            return False, "output must be a directory path"

        synth = data.get("synth", {})
        if not isinstance(synth, dict) or not isinstance(synth.get("params", ""), (str, type(None))):
            return False, "synth.params must be a path"

        return True, ""


    def load(self) -> RunConfig:
        data = self._get_file_contents()
        is_valid, error = self.validate(data)
        if not is_valid:
            raise InvalidConfig(f"{self._config_file}: {error}")

        inputs = data.get("inputs", {})
        sectors = data.get("sectors", {})
        intensity = data.get("intensity", {})
        models = data.get("models", {})
        moran = data.get("moran", {})

        try:
            indicators = tuple(IndicatorSpec.from_dict(item) for item in data.get("indicators", []))
            specs = {name: ModelSpec.from_dict(name, spec) for name, spec in models.get("specs", {}).items()}
        except DataError as e:
            raise InvalidConfig(f"{self._config_file}: {e}") from None

        config = RunConfig(
            config_path=self._config_file,
            panel=self._resolve(inputs.get("panel")),
            panel_schema=inputs.get("panel_schema", "long"),
            adjacency=self._resolve(inputs.get("adjacency")),
            standardize=bool(inputs.get("standardize", True)),
            manufacturing=tuple(sectors.get("manufacturing", ())),
            services=tuple(sectors.get("services", DEFAULT_SERVICES)),
            other=tuple(sectors.get("other", ())),
            regions={name: tuple(members) for name, members in data.get("regions", {}).items()},
            indicators=indicators,
            cogg=data.get("cogg", CoggFormula.BALANCE_PLUS_HEIGHT.value),
            intensity_method=intensity.get("method", "vh"),
            weight_mode=intensity.get("weights", "unit-norm"),
            models=specs,
            balance=bool(models.get("balance", True)),
            permutations=moran.get("permutations", DEFAULT_PERMUTATIONS),
            workers=moran.get("workers", 1),
            seed=data.get("seed"),
            output=self._resolve(data.get("output", "out")),
            synth_params=self._resolve(data.get("synth", {}).get("params")),
        )
        log.debug("loaded config %s", self._config_file)
        return config


def write_resolved(config: RunConfig, directory: str) -> str:
    target = path.join(directory, "config.resolved.json")
    with open(target, "w", encoding="utf-8") as file:
        json.dump(config.to_dict(), file, indent=2, sort_keys=True)
        file.write("\n")
    return target
