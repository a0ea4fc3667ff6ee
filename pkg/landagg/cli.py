import argparse
import logging
import sys

from landagg.commands import FitCommand, IndicesCommand, IntensityCommand, MoranCommand, SynthCommand
from landagg.config_handler import ConfigHandler
from landagg.errors import LandAggError

log = logging.getLogger(__name__)

LOG_FORMAT = "[%(name)s] %(levelname)s: %(message)s"

COMMANDS = {
    "indices": IndicesCommand,
    "intensity": IntensityCommand,
    "moran": MoranCommand,
    "fit": FitCommand,
    "synth": SynthCommand,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser("landagg", description="Agglomeration indices, land-use intensity "
                                     "scores, Moran's I and spatial panel models for city-year panels")
    parser.add_argument("--verbose", help="Log debug messages", action="store_true")
    commands = parser.add_subparsers(dest="command", required=True)

    def add(name: str, description: str) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, help=description)
        sub.add_argument("--config", help="Run configuration (JSON or YAML)", type=str, required=True)
        sub.add_argument("--verbose", help="Log debug messages", action="store_true", default=argparse.SUPPRESS)
        return sub

    add("indices", "Location quotients, diversification and co-agglomeration per city-year")

    intensity = add("intensity", "Land-use intensity weights, scores and dynamic classification")
    intensity.add_argument("--method", help="Weighting method", choices=["vh", "entropy"], required=False)

    moran = add("moran", "Global and local Moran's I of one variable in one year")
    moran.add_argument("--variable", help="Panel or derived variable (default: score)", type=str, required=False)
    moran.add_argument("--year", help="Year (default: last panel year)", type=int, required=False)

    fit = add("fit", "Fixed-effects OLS, spatial lag or spatial error model")
    fit.add_argument("--model", help="Estimator", choices=["ols", "slm", "sem"], default="slm")
    fit.add_argument("--spec", help="Model spec name from the config (default: first)", type=str, required=False)

    synth = add("synth", "Generate a synthetic panel")
    synth.add_argument("--generator", help="Data generating process", choices=["density", "slm", "sem", "demo"],
                       default="demo")
    synth.add_argument("--params", help="Generator parameter file (JSON)", type=str, required=False)
    synth.add_argument("--out", help="Also copy the generated panel here", type=str, required=False)
    return parser


def setup_logging(verbose: bool = False) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root = logging.getLogger("landagg")
    root.handlers[:] = [handler]
    root.setLevel(logging.DEBUG if verbose else logging.WARNING)
    root.propagate = False


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)

    try:
        config = ConfigHandler(args.config).load()
        run_dir = COMMANDS[args.command](config, args).run()
    except LandAggError as e:
        print(f"{e.name}: {e}", file=sys.stderr)
        return e.exit_code

    print(run_dir)
    return 0
