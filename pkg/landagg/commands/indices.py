import pandas as pd

from landagg.commands.base import Command, with_series
from landagg.indices import classify_lq_tiers, write_indices


class IndicesCommand(Command):
    name = "indices"

    def execute(self) -> None:
        ds = self.panel()
        series = self.index_series(ds)
        write_indices(series, self.output_path("indices.csv"))

        # manufacturing specialization tiers per city-year
        tiers = pd.DataFrame([
            {"city": city, "year": s.year, "tier": tier}
            for s in series if s.label == "LQ_manufacturing"
            for city, tier in classify_lq_tiers(s).items()
        ], columns=["city", "year", "tier"])
        tiers.to_csv(self.output_path("tiers.csv"), index=False, lineterminator="\n", encoding="utf-8")

        labels = list(dict.fromkeys(s.label for s in series))
        self.write_regions(with_series(ds, series), labels)
