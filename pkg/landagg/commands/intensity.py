from landagg.commands.base import Command
from landagg.intensity import dynamic_classify, score, weight_report, write_classification, write_scores


class IntensityCommand(Command):
    name = "intensity"

    def arguments(self) -> dict:
        return {"method": self.method}


    @property
    def method(self) -> str:
        return getattr(self._args, "method", None) or self._config.intensity_method


    def execute(self) -> None:
        ds = self.panel()
        normalized, weights = self.intensity_weights(ds, self.method)
        scores = score(normalized, weights)

        write_scores(scores, self.output_path("scores.csv"))
        self.write_json("weights.json", weight_report(weights))
        write_classification(dynamic_classify(scores), self.output_path("classification.csv"))
        self.write_regions(ds.with_variable("score", scores.values), ["score"])
