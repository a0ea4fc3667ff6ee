import logging
from dataclasses import replace

from landagg.commands.base import Command
from landagg.config_handler import RunConfig
from landagg.econometrics import (MODELS, balance_design, build_design, fit_model, fit_ols_fe, lm_tests,
                                  summarize)
from landagg.errors import InvalidConfig, UnknownReference

log = logging.getLogger(__name__)


class FitCommand(Command):
    name = "fit"

    def __init__(self, config: RunConfig, args) -> None:
        super().__init__(config, args)
        self._model = getattr(args, "model", None) or "slm"
        self._spec_name = getattr(args, "spec", None)


    def arguments(self) -> dict:
        return {"model": self._model, "spec": self._spec_name}


    def _spec(self):
        specs = self._config.models
        if not specs:
            raise InvalidConfig(f"{self._config.config_path}: no model specs configured")
        if self._spec_name is None:
            return next(iter(specs.values()))
        if self._spec_name not in specs:
            raise UnknownReference(f"unknown model spec '{self._spec_name}' "
                                   f"(configured: {', '.join(specs)})")
        return specs[self._spec_name]


    def execute(self) -> None:
        if self._model not in MODELS:
            raise InvalidConfig(f"unknown model '{self._model}' (expected {', '.join(MODELS)})")

        spec = self._spec()
        ds = self.derived_panel()
        self.check_variables(ds, (spec.dependent, spec.focal) + spec.controls, f"model '{spec.name}'")

        # a quadratic spec is reported next to its linear counterpart
        specs = [replace(spec, quadratic=False), spec] if spec.quadratic else [spec]
        spatial = self._model != "ols" or self._config.adjacency is not None

        fits, diagnostics = [], {}
        for s in specs:
            design = build_design(ds, s)
            if spatial and self._config.balance:
                design = balance_design(design)

            w = self.weights(design.cities) if spatial else None
            fits.append(fit_model(design, self._model, w))

            if w is not None and design.balanced:
                column = "quadratic" if s.quadratic else "linear"
                diagnostics[column] = lm_tests(fit_ols_fe(design), design, w).as_dict()

        table = summarize(fits, spec)
        data = dict(table.data)
        if diagnostics:
            data["lm_tests"] = diagnostics

        self.write_text("table.txt", table.text)
        self.write_json("table.json", data)
        log.info("%s fit of '%s' on %d observations", self._model, spec.name, fits[-1].nobs)
