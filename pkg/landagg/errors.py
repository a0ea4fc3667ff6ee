class LandAggError(Exception):
    """Base class for every error raised by landagg.

    ``exit_code`` is what the command line returns when the error escapes a command.
    """
    exit_code = 1

    @property
    def name(self) -> str:
        return type(self).__name__


class ConfigError(LandAggError):
    exit_code = 2


class DataError(LandAggError):
    exit_code = 3


class EstimationError(LandAggError):
    exit_code = 4


# panel
class MalformedHeader(DataError): pass
class DuplicateObservation(DataError): pass
class NonNumericValue(DataError): pass
class AllMissingSeries(DataError): pass
class UnknownSector(DataError): pass
class MissingYear(DataError): pass
class UnknownVariable(DataError): pass
class MissingValues(DataError): pass
class NegativeValue(DataError): pass

# indices
class ZeroCityTotal(DataError): pass
class ZeroSectorTotal(DataError): pass
class ZeroSubsetTotal(DataError): pass
class AxisMismatch(DataError): pass
class BothZero(DataError): pass

# intensity
class ConstantIndicator(DataError): pass
class AllZeroIndicator(DataError): pass
class SingleObservation(DataError): pass
class DimensionMismatch(DataError): pass
class DegenerateSpectrum(DataError): pass
class UninformativeIndicators(DataError): pass

# spatial
class UnknownCity(DataError): pass
class SelfLoop(DataError): pass
class ConstantVector(DataError): pass
class EmptyWeights(DataError): pass

# numerics
class AsymmetricInput(DataError): pass
class NonFiniteEvaluation(EstimationError): pass
class RankDeficient(EstimationError): pass

# econometrics
class InsufficientObservations(DataError): pass
class UnbalancedPanel(DataError): pass
class RankDeficientDesign(RankDeficient): pass
class NonConvergence(EstimationError): pass
class BoundarySolution(EstimationError): pass

# synth
class InvalidParameter(ConfigError): pass
class SingularReducedForm(EstimationError): pass

# config
class InvalidConfig(ConfigError): pass
class MissingInput(ConfigError): pass
class UnknownReference(ConfigError): pass
