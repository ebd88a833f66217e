"""Exception hierarchy shared across the toolkit."""


class CdraError(Exception):
    """Base class for all toolkit errors."""


class GraphError(CdraError):
    pass


class CycleDetected(GraphError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("cycle: " + " -> ".join(self.cycle))


class DanglingEdge(GraphError):
    pass


class DuplicateNode(GraphError):
    pass


class UnknownNode(GraphError):
    pass


class NoEdgesToRemove(GraphError):
    pass


class InvalidGcm(CdraError):
    pass


class LevelOutOfDomain(CdraError):
    pass


class StateSpaceTooLarge(CdraError):
    pass


class ParseError(CdraError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaMismatch(CdraError):
    pass


class EmptyData(CdraError):
    pass


EmptyTable = EmptyData


class MissingColumn(CdraError):
    pass


class InsufficientSupport(CdraError):
    def __init__(self, coverage, floor):
        self.coverage = coverage
        self.floor = floor
        super().__init__(f"stratum coverage {coverage:.4f} below floor {floor:.4f}")


class NotIdentifiable(CdraError):
    pass


class EnumerationBoundExceeded(CdraError):
    pass


class NominalMissing(CdraError):
    pass


class MissingSpec(CdraError):
    pass
