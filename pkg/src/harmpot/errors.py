"""Exception hierarchy shared by all harmpot modules."""


class HarmpotError(Exception):
    pass


# meshgen
class ResolutionTooSmall(HarmpotError):
    pass


class NonManifold(HarmpotError):
    pass


class MarkerError(HarmpotError):
    """Marker set rejected (failed validation or unusable for a lift)."""


# complex
class NonConformingMesh(HarmpotError):
    pass


class DegreeOutOfRange(HarmpotError):
    pass


class MismatchedComplex(HarmpotError):
    pass


# topology
class UnknownEdge(HarmpotError, KeyError):
    pass


class UnknownFace(HarmpotError, KeyError):
    pass


class MeshTooLargeForDense(HarmpotError):
    pass


# harmonic fields
class ChordViolation(MarkerError):
    pass


class SideAmbiguity(MarkerError):
    pass


class InconsistentBasis(HarmpotError):
    pass


# solvers
class SolverDiverged(HarmpotError):
    pass


class NonFiniteInput(HarmpotError, ValueError):
    pass


class SingularMatrix(HarmpotError):
    pass


class SingularSystem(SingularMatrix):
    pass


class CapExceeded(MeshTooLargeForDense):
    pass


# io
class FormatVersionMismatch(HarmpotError):
    pass


class ParseError(HarmpotError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + where)


class IndexOutOfRange(HarmpotError, IndexError):
    pass
