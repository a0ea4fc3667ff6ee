from .base      import Command
from .indices   import IndicesCommand
from .intensity import IntensityCommand
from .moran     import MoranCommand
from .fit       import FitCommand
from .synth     import SynthCommand
