class CasekinError(Exception):
    pass


class DataError(CasekinError):
    pass


class MissingProband(DataError):
    pass


class DuplicateProband(DataError):
    pass


class NegativeTime(DataError):
    pass


class InvalidRow(DataError):
    pass


class EmptyDataset(DataError):
    pass


class ParseError(DataError):
    def __init__(self, line, message):
        DataError.__init__(self, "line {0}: {1}".format(line, message))
        self.line = line


class KaplanMeierError(CasekinError):
    pass


class EmptyInput(KaplanMeierError):
    def __init__(self, message="no observations"):
        KaplanMeierError.__init__(self, message)


class NoRelatives(KaplanMeierError):
    pass


class EstimationError(CasekinError):
    pass


class DegenerateTimes(EstimationError):
    pass


class InsufficientData(EstimationError):
    pass


class DegenerateDependence(EstimationError):
    def __init__(self, s_index, denominator):
        EstimationError.__init__(
            self,
            "no usable within-family dependence at s index {0} "
            "(denominator {1!r})".format(s_index, denominator)
        )
        self.s_index = s_index
        self.denominator = denominator


class BandwidthError(CasekinError):
    pass


class SelectionFailed(BandwidthError):
    pass


class CiFailed(BandwidthError):
    pass


class SimulationError(CasekinError):
    pass


class PoolExhausted(SimulationError):
    pass


class NoRoot(SimulationError):
    pass


class BoundsCrossed(UserWarning):
    pass
